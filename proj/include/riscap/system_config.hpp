#pragma once

#include <cstdint>

#include "riscap/common.hpp"
#include "riscap/constellation.hpp"

namespace riscap {

// All scalar parameters of one link configuration. Immutable by convention
// after construction; validate() is the single source of invariant checks.
struct SystemConfig {
    std::size_t rx_antennas = 1;   // N
    std::size_t ris_elements = 1;  // K
    PhaseSet phase_set;            // A discrete phases
    Constellation constellation;   // S symbols
    std::size_t symbols_per_block = 1;  // m, symbols per sub-block
    std::size_t sub_blocks = 1;         // ell, sub-blocks per coherence block
    std::size_t training_blocks = 0;    // tau, pilot sub-blocks
    std::size_t scd_pilots = 1;         // mu, per-sub-block pilot symbols (layered only)
    double power = 1.0;                 // P, linear average power
    double gamma_tau = 1.0;             // training amplitude gain
    double gamma_d = 1.0;               // data amplitude gain

    std::size_t data_blocks() const { return sub_blocks - training_blocks; }
    std::size_t nk() const { return rx_antennas * ris_elements; }
    std::size_t phase_count() const { return phase_set.size(); }
    std::size_t symbol_count() const { return constellation.size(); }

    // |C| before merging duplicate matrices: A^K * S^m.
    std::size_t input_label_count(std::size_t cap = kDefaultEnumerationCap) const {
        const std::size_t phases =
            checked_pow(phase_count(), ris_elements, cap, "phase pattern space A^K");
        const std::size_t symbols =
            checked_pow(symbol_count(), symbols_per_block, cap, "symbol block space S^m");
        if (phases != 0 && symbols > cap / phases) {
            throw CapacityExceeded("input set A^K*S^m exceeds enumeration cap of " +
                                   std::to_string(cap) + " elements");
        }
        return phases * symbols;
    }

    void validate() const {
        if (rx_antennas == 0) throw InvalidParameter("rx antenna count must be positive");
        if (ris_elements == 0) throw InvalidParameter("ris element count must be positive");
        if (phase_set.size() == 0) throw InvalidParameter("phase set is empty");
        if (constellation.size() == 0) throw InvalidParameter("constellation is empty");
        if (symbols_per_block == 0) throw InvalidParameter("symbols per sub-block must be positive");
        if (sub_blocks == 0) throw InvalidParameter("sub-block count must be positive");
        if (training_blocks > sub_blocks) {
            throw InvalidParameter("training sub-blocks tau exceeds sub-block count ell");
        }
        if (power <= 0.0) throw InvalidParameter("average power must be positive");
        if (gamma_tau < 0.0 || gamma_d < 0.0) throw InvalidParameter("power gains must be nonnegative");
        const double ell = static_cast<double>(sub_blocks);
        const double tau = static_cast<double>(training_blocks);
        const double split = (tau / ell) * gamma_tau * gamma_tau +
                             ((ell - tau) / ell) * gamma_d * gamma_d;
        const double tol = 1e-12 * std::max(1.0, power);
        if (std::abs(split - power) > tol) {
            throw InvalidParameter("power split (tau/ell)*gamma_tau^2 + ((ell-tau)/ell)*gamma_d^2 "
                                   "does not match P");
        }
        const double cpow = constellation.average_power();
        if (std::abs(cpow - 1.0) > 1e-12) {
            throw InvalidParameter("constellation average power is not one");
        }
    }

    void require_data_blocks() const {
        if (training_blocks >= sub_blocks) {
            throw NoDataSubBlocks("no data sub-blocks: tau = ell leaves nothing to transmit");
        }
    }

    void require_layered() const {
        if (scd_pilots < 1 || scd_pilots > symbols_per_block) {
            throw InvalidParameter("layered pilot count mu must satisfy 1 <= mu <= m");
        }
    }

    // Equal training/data amplitude, gamma_tau = gamma_d = sqrt(P).
    void set_equal_power_split(double p_linear) {
        power = p_linear;
        gamma_tau = std::sqrt(p_linear);
        gamma_d = std::sqrt(p_linear);
    }
};

}  // namespace riscap
