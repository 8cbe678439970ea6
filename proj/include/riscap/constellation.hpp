#pragma once

#include <string>
#include <vector>

#include "riscap/common.hpp"

namespace riscap {

// Finite symbol constellation, normalized to unit average power.
struct Constellation {
    enum class Kind { ask, psk };

    std::vector<cplx> points;
    Kind kind = Kind::ask;

    std::size_t size() const { return points.size(); }

    double average_power() const {
        std::vector<double> p(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) p[i] = std::norm(points[i]);
        return pairwise_sum(p) / static_cast<double>(points.size());
    }
};

// Amplitude levels {sigma, 3*sigma, ..., (2S-1)*sigma} with
// sigma = sqrt(3 / (3 + 4(S^2 - 1))), which makes the average power one.
inline Constellation make_ask(std::size_t levels) {
    if (levels == 0) throw InvalidParameter("ask constellation needs at least one level");
    const double s = static_cast<double>(levels);
    const double sigma = std::sqrt(3.0 / (3.0 + 4.0 * (s * s - 1.0)));
    Constellation c;
    c.kind = Constellation::Kind::ask;
    c.points.reserve(levels);
    for (std::size_t k = 0; k < levels; ++k) {
        c.points.emplace_back(sigma * static_cast<double>(2 * k + 1), 0.0);
    }
    return c;
}

// S-th roots of unity, e^{j 2 pi k / S}.
inline Constellation make_psk(std::size_t levels) {
    if (levels == 0) throw InvalidParameter("psk constellation needs at least one point");
    Constellation c;
    c.kind = Constellation::Kind::psk;
    c.points.reserve(levels);
    for (std::size_t k = 0; k < levels; ++k) {
        const double phi = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(levels);
        c.points.emplace_back(std::cos(phi), std::sin(phi));
    }
    return c;
}

// Parses "4ask", "4-ask", "qpsk", "8-psk", "bpsk" style names.
inline Constellation parse_constellation(std::string name) {
    for (char& ch : name) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    std::string digits, rest;
    for (char ch : name) {
        if (ch == '-' || ch == '_' || ch == ' ') continue;
        if (ch >= '0' && ch <= '9' && rest.empty()) {
            digits.push_back(ch);
        } else {
            rest.push_back(ch);
        }
    }
    if (rest == "bpsk") return make_psk(2);
    if (rest == "qpsk") return make_psk(4);
    if (digits.empty()) throw InvalidParameter("cannot parse constellation name '" + name + "'");
    const std::size_t s = static_cast<std::size_t>(std::stoull(digits));
    if (rest == "ask") return make_ask(s);
    if (rest == "psk") return make_psk(s);
    throw InvalidParameter("cannot parse constellation name '" + name + "'");
}

inline std::string constellation_name(const Constellation& c) {
    const std::string suffix = c.kind == Constellation::Kind::ask ? "ask" : "psk";
    return std::to_string(c.size()) + suffix;
}

// Discrete reflection phases {2 pi a / A : a = 0..A-1}, sorted ascending.
struct PhaseSet {
    std::vector<double> phases;

    std::size_t size() const { return phases.size(); }

    cplx unit(std::size_t index) const {
        const double phi = phases.at(index);
        return {std::cos(phi), std::sin(phi)};
    }
};

inline PhaseSet make_phase_set(std::size_t count) {
    if (count == 0) throw InvalidParameter("phase set needs at least one phase");
    PhaseSet ps;
    ps.phases.reserve(count);
    for (std::size_t a = 0; a < count; ++a) {
        ps.phases.push_back(2.0 * kPi * static_cast<double>(a) / static_cast<double>(count));
    }
    return ps;
}

}  // namespace riscap
