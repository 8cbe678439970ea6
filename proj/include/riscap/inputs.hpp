#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "riscap/rng.hpp"
#include "riscap/system_config.hpp"

namespace riscap {

// One element of the effective input set C: the rank-one K x m matrix
// e^{j theta} s^T together with the index tuple that generated it.
struct EffectiveInput {
    Eigen::MatrixXcd matrix;             // K x m
    std::vector<std::uint32_t> theta;    // K phase indices
    std::vector<std::uint32_t> symbol;   // m constellation indices

    double trace_power() const { return matrix.squaredNorm(); }
};

inline EffectiveInput make_effective_input(std::span<const std::uint32_t> theta,
                                           std::span<const std::uint32_t> symbol,
                                           const SystemConfig& config) {
    const std::size_t k = config.ris_elements;
    const std::size_t m = config.symbols_per_block;
    if (theta.size() != k || symbol.size() != m) {
        throw InvalidParameter("effective input index tuple has wrong length");
    }
    EffectiveInput in;
    in.theta.assign(theta.begin(), theta.end());
    in.symbol.assign(symbol.begin(), symbol.end());
    in.matrix.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
    for (std::size_t kk = 0; kk < k; ++kk) {
        if (theta[kk] >= config.phase_count()) {
            throw InvalidParameter("phase index out of range");
        }
        const cplx ej = config.phase_set.unit(theta[kk]);
        for (std::size_t q = 0; q < m; ++q) {
            if (symbol[q] >= config.symbol_count()) {
                throw InvalidParameter("symbol index out of range");
            }
            in.matrix(static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(q)) =
                ej * config.constellation.points[symbol[q]];
        }
    }
    return in;
}

namespace detail {

// Advances a mixed-radix counter; returns false after wrapping past the end.
inline bool next_tuple(std::vector<std::uint32_t>& tuple, std::size_t radix) {
    for (std::size_t i = tuple.size(); i-- > 0;) {
        if (++tuple[i] < radix) return true;
        tuple[i] = 0;
    }
    return tuple.empty();
}

}  // namespace detail

// Every element of C in lexicographic order over (theta indices, symbol
// indices), theta most significant. Downstream probability vectors index
// into this order.
inline std::vector<EffectiveInput> enumerate_inputs(const SystemConfig& config,
                                                    std::size_t cap = kDefaultEnumerationCap) {
    const std::size_t total = config.input_label_count(cap);
    std::vector<EffectiveInput> out;
    out.reserve(total);
    std::vector<std::uint32_t> theta(config.ris_elements, 0);
    do {
        std::vector<std::uint32_t> symbol(config.symbols_per_block, 0);
        do {
            out.push_back(make_effective_input(theta, symbol, config));
        } while (detail::next_tuple(symbol, config.symbol_count()));
    } while (detail::next_tuple(theta, config.phase_count()));
    return out;
}

// The subset C(theta): symbol indices vary, phase pattern fixed.
inline std::vector<EffectiveInput> enumerate_inputs_fixed_phase(
    std::span<const std::uint32_t> theta, const SystemConfig& config,
    std::size_t cap = kDefaultEnumerationCap) {
    for (std::uint32_t t : theta) {
        if (t >= config.phase_count()) throw InvalidParameter("phase index out of range");
    }
    if (theta.size() != config.ris_elements) {
        throw InvalidParameter("phase pattern has wrong length");
    }
    const std::size_t total =
        checked_pow(config.symbol_count(), config.symbols_per_block, cap, "symbol block space S^m");
    std::vector<EffectiveInput> out;
    out.reserve(total);
    std::vector<std::uint32_t> symbol(config.symbols_per_block, 0);
    do {
        out.push_back(make_effective_input(theta, symbol, config));
    } while (detail::next_tuple(symbol, config.symbol_count()));
    return out;
}

// Number of distinct matrices in C. PSK inputs can collide (a common phase
// may move between the pattern and the symbols), so duplicates are merged
// before the high-SNR entropy count.
inline std::size_t distinct_input_count(const SystemConfig& config,
                                        std::size_t cap = kDefaultEnumerationCap) {
    const auto inputs = enumerate_inputs(config, cap);
    std::vector<std::vector<std::int64_t>> keys;
    keys.reserve(inputs.size());
    for (const auto& in : inputs) {
        std::vector<std::int64_t> key;
        key.reserve(static_cast<std::size_t>(2 * in.matrix.size()));
        for (Eigen::Index c = 0; c < in.matrix.cols(); ++c) {
            for (Eigen::Index r = 0; r < in.matrix.rows(); ++r) {
                const cplx v = in.matrix(r, c);
                key.push_back(static_cast<std::int64_t>(std::llround(v.real() * 1e9)));
                key.push_back(static_cast<std::int64_t>(std::llround(v.imag() * 1e9)));
            }
        }
        keys.push_back(std::move(key));
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys.size();
}

// X^kron = X^T (x) I_N, so that stack(H X) = X^kron stack(H).
inline Eigen::MatrixXcd kron_lift(const Eigen::MatrixXcd& x, Eigen::Index n_rx) {
    const Eigen::Index k = x.rows();
    const Eigen::Index m = x.cols();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(m * n_rx, k * n_rx);
    for (Eigen::Index q = 0; q < m; ++q) {
        for (Eigen::Index kk = 0; kk < k; ++kk) {
            out.block(q * n_rx, kk * n_rx, n_rx, n_rx) =
                x(kk, q) * Eigen::MatrixXcd::Identity(n_rx, n_rx);
        }
    }
    return out;
}

// One fading realization: unit-modulus g, iid CN(0,1) H, and the combined
// vector hbar = stack(H diag(g)), itself iid CN(0,1).
struct ChannelRealization {
    Eigen::VectorXcd g;   // K, |g_k| = 1
    Eigen::MatrixXcd H;   // N x K
    Eigen::VectorXcd hbar;  // NK
};

inline ChannelRealization sample_channel(const CounterRng& rng, std::size_t n_rx,
                                         std::size_t n_ris) {
    ChannelRealization ch;
    const auto n = static_cast<Eigen::Index>(n_rx);
    const auto k = static_cast<Eigen::Index>(n_ris);
    ch.g.resize(k);
    const CounterRng g_rng = rng.at(stream::kChannelG);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double phi = 2.0 * kPi * g_rng.uniform(static_cast<std::uint64_t>(i));
        ch.g(i) = cplx{std::cos(phi), std::sin(phi)};
    }
    ch.H.resize(n, k);
    const CounterRng h_rng = rng.at(stream::kChannelH);
    std::uint64_t ctr = 0;
    for (Eigen::Index c = 0; c < k; ++c) {
        for (Eigen::Index r = 0; r < n; ++r) {
            ch.H(r, c) = h_rng.complex_gaussian(ctr++);
        }
    }
    ch.hbar.resize(n * k);
    for (Eigen::Index c = 0; c < k; ++c) {
        ch.hbar.segment(c * n, n) = ch.H.col(c) * ch.g(c);
    }
    return ch;
}

}  // namespace riscap
