#pragma once

#include <cstdint>
#include <string>

#include "riscap/common.hpp"

namespace riscap {

enum class Scheme {
    capacity_csit,
    capacity_csir,
    max_snr_csit,
    max_snr_csir,
    perfect,
    max_snr_perfect,
    layered,
    layered_perfect,
};

inline std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::capacity_csit: return "capacity-csit";
        case Scheme::capacity_csir: return "capacity-csir";
        case Scheme::max_snr_csit: return "max-snr-csit";
        case Scheme::max_snr_csir: return "max-snr-csir";
        case Scheme::perfect: return "perfect";
        case Scheme::max_snr_perfect: return "max-snr-perfect";
        case Scheme::layered: return "layered";
        case Scheme::layered_perfect: return "layered-perfect";
    }
    throw InvalidParameter("unknown scheme");
}

inline Scheme parse_scheme(const std::string& name) {
    if (name == "capacity-csit") return Scheme::capacity_csit;
    if (name == "capacity-csir") return Scheme::capacity_csir;
    if (name == "max-snr-csit") return Scheme::max_snr_csit;
    if (name == "max-snr-csir") return Scheme::max_snr_csir;
    if (name == "perfect") return Scheme::perfect;
    if (name == "max-snr-perfect") return Scheme::max_snr_perfect;
    if (name == "layered") return Scheme::layered;
    if (name == "layered-perfect") return Scheme::layered_perfect;
    throw InvalidParameter("unknown scheme tag '" + name + "'");
}

// One estimated rate with its Monte-Carlo uncertainty and provenance.
struct RateEstimate {
    double bits_per_symbol = 0.0;
    double std_err = 0.0;
    std::size_t samples = 0;
    std::string scheme;
    std::uint64_t seed = 0;
    std::string pilot_mode = "none";        // none | exhaustive | structured | explicit
    std::string evaluation_mode = "exact";  // exact | lower-bound
    bool converged = true;                  // false if any inner optimization hit its cap
};

// Monte-Carlo controls shared by the rate operations. `samples` counts total
// (noise, estimate) draws; schemes that optimize per channel state split it
// into ceil(samples / states_hint) draws for each of `states_hint` states.
struct McSettings {
    std::size_t samples = 4000;
    std::uint64_t seed = 1;
    std::size_t draws_per_state = 100;  // z draws per channel state in per-state schemes
    unsigned threads = 1;
    std::size_t support_cap = kDefaultEnumerationCap;
    // Per-state distribution optimization: duality-gap target (bits) and
    // iteration cap. A gap of 1e-3 bits moves the rate by well under 1e-3.
    double opt_tol = 1e-3;
    int opt_max_iterations = 250;
};

}  // namespace riscap
