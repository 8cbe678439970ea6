#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <memory>
#include <numeric>
#include <vector>

#include "riscap/shaping.hpp"

namespace riscap {

using Support = std::vector<BlockInput>;

// All A^K phase patterns, lexicographic (element 0 most significant).
inline std::vector<std::vector<std::uint32_t>> phase_patterns(const SystemConfig& config,
                                                              std::size_t cap = kDefaultEnumerationCap) {
    checked_pow(config.phase_count(), config.ris_elements, cap, "phase pattern space A^K");
    std::vector<std::vector<std::uint32_t>> out;
    std::vector<std::uint32_t> theta(config.ris_elements, 0);
    do {
        out.push_back(theta);
    } while (detail::next_tuple(theta, config.phase_count()));
    return out;
}

namespace detail {

inline Support tuples_over(const std::vector<EffectiveInput>& alphabet, std::size_t width,
                           std::size_t n_rx, std::size_t cap) {
    checked_pow(alphabet.size(), width, cap,
                "joint input space |C|^(ell-tau) (use the separable lower bound)");
    Support out;
    std::vector<std::uint32_t> pick(width, 0);
    do {
        std::vector<EffectiveInput> tuple;
        tuple.reserve(width);
        for (std::uint32_t idx : pick) tuple.push_back(alphabet[idx]);
        out.push_back(block_input_from_effective(tuple, n_rx,
                                                 std::vector<std::uint32_t>(pick.begin(), pick.end())));
    } while (next_tuple(pick, alphabet.size()));
    return out;
}

}  // namespace detail

// C^{1 x width}: joint inputs over `width` data sub-blocks.
inline Support joint_support(const SystemConfig& config, std::size_t width,
                             std::size_t cap = kDefaultEnumerationCap) {
    return detail::tuples_over(enumerate_inputs(config, cap), width, config.rx_antennas, cap);
}

// C(theta)^{1 x width}: same with the reflection pattern pinned.
inline Support joint_support_fixed_phase(std::span<const std::uint32_t> theta,
                                         const SystemConfig& config, std::size_t width,
                                         std::size_t cap = kDefaultEnumerationCap) {
    return detail::tuples_over(enumerate_inputs_fixed_phase(theta, config, cap), width,
                               config.rx_antennas, cap);
}

// Q(width): phase-shift matrices with entries sqrt(mu) e^{j theta}, one
// K x 1 column per sub-block (the averaged pilot-column channel).
inline Support phase_matrix_support(const SystemConfig& config, std::size_t width,
                                    std::size_t cap = kDefaultEnumerationCap) {
    const auto patterns = phase_patterns(config, cap);
    checked_pow(patterns.size(), width, cap,
                "phase matrix space A^(K (ell-tau)) (use the separable lower bound)");
    const double amp = std::sqrt(static_cast<double>(config.scd_pilots));
    std::vector<Eigen::MatrixXcd> columns;
    columns.reserve(patterns.size());
    for (const auto& theta : patterns) {
        Eigen::MatrixXcd col(static_cast<Eigen::Index>(config.ris_elements), 1);
        for (std::size_t k = 0; k < config.ris_elements; ++k) {
            col(static_cast<Eigen::Index>(k), 0) = amp * config.phase_set.unit(theta[k]);
        }
        columns.push_back(std::move(col));
    }
    Support out;
    std::vector<std::uint32_t> pick(width, 0);
    do {
        std::vector<Eigen::MatrixXcd> blocks;
        blocks.reserve(width);
        for (std::uint32_t idx : pick) blocks.push_back(columns[idx]);
        out.push_back(make_block_input(std::move(blocks), config.rx_antennas,
                                       std::vector<std::uint32_t>(pick.begin(), pick.end())));
    } while (detail::next_tuple(pick, columns.size()));
    return out;
}

// Symbol-layer inputs for layered decoding: e^{j theta_i} s_i^T over the
// m - mu data symbols of each sub-block, grouped by the phase tuple the
// symbols are conditioned on.
inline Support layered_symbol_support(const SystemConfig& config, std::size_t width,
                                      std::size_t cap = kDefaultEnumerationCap) {
    config.require_layered();
    const std::size_t data_symbols = config.symbols_per_block - config.scd_pilots;
    if (data_symbols == 0) return {};
    const auto patterns = phase_patterns(config, cap);
    const std::size_t theta_tuples = checked_pow(
        patterns.size(), width, cap, "phase tuple space A^(K width) (use the separable lower bound)");
    const std::size_t symbols_per_tuple =
        checked_pow(config.symbol_count(), data_symbols * width, cap,
                    "symbol tuple space S^((m-mu) width) (use the separable lower bound)");
    if (theta_tuples != 0 && symbols_per_tuple > cap / theta_tuples) {
        throw CapacityExceeded("layered symbol support exceeds enumeration cap of " +
                               std::to_string(cap) + " elements (use the separable lower bound)");
    }

    Support out;
    out.reserve(theta_tuples * symbols_per_tuple);
    std::vector<std::uint32_t> theta_pick(width, 0);
    std::uint32_t group = 0;
    do {
        std::vector<std::uint32_t> symbol_pick(data_symbols * width, 0);
        do {
            std::vector<Eigen::MatrixXcd> blocks;
            blocks.reserve(width);
            for (std::size_t b = 0; b < width; ++b) {
                const auto& theta = patterns[theta_pick[b]];
                Eigen::MatrixXcd blk(static_cast<Eigen::Index>(config.ris_elements),
                                     static_cast<Eigen::Index>(data_symbols));
                for (std::size_t k = 0; k < config.ris_elements; ++k) {
                    const cplx ej = config.phase_set.unit(theta[k]);
                    for (std::size_t q = 0; q < data_symbols; ++q) {
                        blk(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(q)) =
                            ej * config.constellation.points[symbol_pick[b * data_symbols + q]];
                    }
                }
                blocks.push_back(std::move(blk));
            }
            std::vector<std::uint32_t> key(theta_pick.begin(), theta_pick.end());
            key.insert(key.end(), symbol_pick.begin(), symbol_pick.end());
            out.push_back(
                make_block_input(std::move(blocks), config.rx_antennas, std::move(key), group));
        } while (detail::next_tuple(symbol_pick, config.symbol_count()));
        ++group;
    } while (detail::next_tuple(theta_pick, patterns.size()));
    return out;
}

// Probability vector over a shared ordered support, with the applicable
// expected-trace budget carried along.
struct InputDistribution {
    std::shared_ptr<const Support> support;
    Eigen::VectorXd probs;
    double power_budget = 0.0;

    void validate() const {
        if (!support || static_cast<Eigen::Index>(support->size()) != probs.size()) {
            throw InvalidParameter("distribution does not match its support");
        }
        double total = 0.0, expected_trace = 0.0;
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
            if (probs(i) < -1e-12) throw InvalidParameter("distribution has negative mass");
            total += probs(i);
            expected_trace += probs(i) * (*support)[static_cast<std::size_t>(i)].trace_power;
        }
        if (std::abs(total - 1.0) > 1e-10) throw InvalidParameter("distribution does not sum to one");
        if (expected_trace > power_budget + 1e-9) {
            throw InvalidParameter("distribution violates the expected trace power budget");
        }
    }
};

inline InputDistribution uniform_distribution(std::shared_ptr<const Support> support,
                                              double power_budget) {
    InputDistribution dist;
    dist.support = std::move(support);
    dist.probs = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dist.support->size()),
                                           1.0 / static_cast<double>(dist.support->size()));
    dist.power_budget = power_budget;
    return dist;
}

// Stable canonical reordering by key (then group); the paired probability
// vector follows the permutation. Evaluations canonicalize on entry so that
// relabeled supports produce bit-identical results.
inline void canonicalize_support(Support& support, Eigen::VectorXd& probs) {
    const std::size_t n = support.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (support[a].group != support[b].group) return support[a].group < support[b].group;
        return support[a].key < support[b].key;
    });
    Support sorted;
    sorted.reserve(n);
    Eigen::VectorXd sorted_probs(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        sorted.push_back(std::move(support[order[i]]));
        sorted_probs(static_cast<Eigen::Index>(i)) = probs(static_cast<Eigen::Index>(order[i]));
    }
    support = std::move(sorted);
    probs = std::move(sorted_probs);
}

}  // namespace riscap
