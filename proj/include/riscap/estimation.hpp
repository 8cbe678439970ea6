#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <functional>
#include <string>
#include <vector>

#include "riscap/inputs.hpp"

namespace riscap {

// tau pilot sub-blocks and their stacked lifted form (N m tau) x (N K).
struct PilotBlock {
    std::vector<EffectiveInput> pilots;
    Eigen::MatrixXcd lifted;
    double trace_power = 0.0;
};

inline PilotBlock make_pilot_block(std::vector<EffectiveInput> pilots, std::size_t n_rx,
                                   std::size_t n_ris) {
    PilotBlock block;
    block.pilots = std::move(pilots);
    const auto n = static_cast<Eigen::Index>(n_rx);
    Eigen::Index rows = 0;
    const Eigen::Index cols = static_cast<Eigen::Index>(n_rx * n_ris);
    for (const auto& p : block.pilots) {
        if (p.matrix.rows() != static_cast<Eigen::Index>(n_ris)) {
            throw InvalidParameter("pilot matrix row count does not match the element count");
        }
        rows += p.matrix.cols() * n;
    }
    block.lifted.resize(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : block.pilots) {
        const Eigen::MatrixXcd lift = kron_lift(p.matrix, n);
        block.lifted.middleRows(at, lift.rows()) = lift;
        at += lift.rows();
        block.trace_power += p.trace_power();
    }
    return block;
}

// Training-phase output y_{1:tau} = gamma_tau * X^kron * hbar + noise.
inline Eigen::VectorXcd training_output(const PilotBlock& block, double gamma_tau,
                                        const Eigen::VectorXcd& hbar,
                                        const Eigen::VectorXcd& noise) {
    if (block.lifted.cols() != hbar.size() || block.lifted.rows() != noise.size()) {
        throw InvalidParameter("training output dimension mismatch");
    }
    return gamma_tau * (block.lifted * hbar) + noise;
}

// Linear MMSE channel estimator for a fixed pilot block: the gain operator,
// the error covariance, and a square root of the estimate's prior covariance
// I - error_cov (used to sample the estimate directly).
struct EstimatorModel {
    Eigen::MatrixXcd gain;            // NK x (N m tau)
    Eigen::MatrixXcd error_cov;       // NK x NK, Hermitian, eigenvalues in [0, 1]
    Eigen::MatrixXcd prior_cov_root;  // NK x NK, root * root^H = I - error_cov
};

namespace detail {

inline Eigen::MatrixXcd hermitian_root(const Eigen::MatrixXcd& psd) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(psd);
    if (es.info() != Eigen::Success) throw InternalError("eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam(i) < -1e-10) {
            throw InternalError("prior covariance has eigenvalue below -1e-10");
        }
        lam(i) = std::max(lam(i), 0.0);
    }
    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

}  // namespace detail

inline EstimatorModel build_estimator(const PilotBlock& block, double gamma_tau,
                                      std::size_t n_rx) {
    (void)n_rx;
    const Eigen::Index nk = block.lifted.cols();
    const Eigen::Index rows = block.lifted.rows();
    EstimatorModel model;
    if (rows == 0) {
        // No observations: the estimate is zero and the error covers everything.
        model.gain.resize(nk, 0);
        model.error_cov = Eigen::MatrixXcd::Identity(nk, nk);
        model.prior_cov_root = Eigen::MatrixXcd::Zero(nk, nk);
        return model;
    }
    const Eigen::MatrixXcd& b = block.lifted;
    Eigen::MatrixXcd inner = (gamma_tau * gamma_tau) * (b * b.adjoint());
    inner += Eigen::MatrixXcd::Identity(rows, rows);
    Eigen::LLT<Eigen::MatrixXcd> llt(inner);
    if (llt.info() != Eigen::Success) throw InternalError("training Gram factorization failed");
    // gain = gamma_tau * B^H inner^{-1}, applied through the factorization.
    model.gain = gamma_tau * llt.solve(b).adjoint();
    Eigen::MatrixXcd cov =
        Eigen::MatrixXcd::Identity(nk, nk) - gamma_tau * (model.gain * b);
    model.error_cov = 0.5 * (cov + cov.adjoint());
    model.prior_cov_root =
        detail::hermitian_root(Eigen::MatrixXcd::Identity(nk, nk) - model.error_cov);
    return model;
}

// Estimation with zero error: hbar itself is known.
inline EstimatorModel perfect_csi_model(std::size_t nk_dim) {
    const auto nk = static_cast<Eigen::Index>(nk_dim);
    EstimatorModel model;
    model.gain.resize(nk, 0);
    model.error_cov = Eigen::MatrixXcd::Zero(nk, nk);
    model.prior_cov_root = Eigen::MatrixXcd::Identity(nk, nk);
    return model;
}

inline Eigen::VectorXcd estimate(const EstimatorModel& model, const Eigen::VectorXcd& training_y) {
    if (model.gain.cols() != training_y.size()) {
        throw InvalidParameter("training observation has wrong length");
    }
    return model.gain * training_y;
}

// Draws hhat ~ CN(0, I - error_cov) as prior_cov_root * w.
inline Eigen::VectorXcd sample_estimate_prior(const EstimatorModel& model, const CounterRng& rng) {
    const Eigen::Index nk = model.prior_cov_root.rows();
    Eigen::VectorXcd w(nk);
    for (Eigen::Index i = 0; i < nk; ++i) {
        w(i) = rng.complex_gaussian(static_cast<std::uint64_t>(i));
    }
    return model.prior_cov_root * w;
}

// All tau-tuples over C that satisfy tr(X_{1:tau} X^*) <= K m tau, in
// lexicographic order over per-pilot input indices.
inline std::vector<PilotBlock> enumerate_pilot_blocks(const SystemConfig& config,
                                                      std::size_t cap = kDefaultEnumerationCap) {
    const std::size_t tau = config.training_blocks;
    if (tau == 0) throw InvalidParameter("pilot enumeration needs tau >= 1");
    const auto inputs = enumerate_inputs(config, cap);
    checked_pow(inputs.size(), tau, cap,
                "pilot block space |C|^tau (consider the structured pilot block)");
    const double budget = static_cast<double>(config.ris_elements * config.symbols_per_block * tau);
    std::vector<PilotBlock> blocks;
    std::vector<std::uint32_t> pick(tau, 0);
    do {
        double trace = 0.0;
        for (std::uint32_t idx : pick) trace += inputs[idx].trace_power();
        if (trace <= budget + 1e-9) {
            std::vector<EffectiveInput> chosen;
            chosen.reserve(tau);
            for (std::uint32_t idx : pick) chosen.push_back(inputs[idx]);
            blocks.push_back(
                make_pilot_block(std::move(chosen), config.rx_antennas, config.ris_elements));
        }
    } while (detail::next_tuple(pick, inputs.size()));
    return blocks;
}

// Deterministic fallback when |C|^tau is too large to enumerate: unit-modulus
// symbols and phase rows from the base-A tensor pattern over the elements
// (for A = 2 this is the Sylvester +/-1 pattern). Rows repeat cyclically past
// the pattern dimension. Trace power meets the pilot budget with equality.
inline PilotBlock structured_pilot_block(const SystemConfig& config) {
    const std::size_t tau = config.training_blocks;
    if (tau == 0) throw InvalidParameter("structured pilot block needs tau >= 1");
    const std::size_t a = config.phase_count();
    const std::size_t k = config.ris_elements;

    // Smallest power of A covering K, so the pattern has full column rank
    // whenever tau >= that dimension.
    std::size_t dim = 1;
    while (dim < k) dim *= std::max<std::size_t>(a, 2);

    // Symbol closest to 1 among unit-modulus choices; plain 1 when the
    // constellation has no unit-modulus point (keeps the trace budget exact).
    cplx pilot_symbol{1.0, 0.0};
    std::uint32_t pilot_symbol_index = 0;
    double best = 1e300;
    for (std::size_t s_idx = 0; s_idx < config.constellation.points.size(); ++s_idx) {
        const cplx& s = config.constellation.points[s_idx];
        if (std::abs(std::abs(s) - 1.0) > 1e-9) continue;
        const double d = std::abs(s - cplx{1.0, 0.0});
        if (d < best) {
            best = d;
            pilot_symbol = s;
            pilot_symbol_index = static_cast<std::uint32_t>(s_idx);
        }
    }

    const auto digits = [a](std::size_t v, std::size_t count) {
        std::vector<std::size_t> d(count, 0);
        for (std::size_t i = 0; i < count && a > 1; ++i) {
            d[i] = v % a;
            v /= a;
        }
        return d;
    };
    std::size_t digit_count = 1;
    if (a > 1) {
        digit_count = 0;
        for (std::size_t v = dim - 1; v > 0; v /= a) ++digit_count;
        digit_count = std::max<std::size_t>(digit_count, 1);
    }

    std::vector<EffectiveInput> pilots;
    pilots.reserve(tau);
    for (std::size_t i = 0; i < tau; ++i) {
        const auto row = digits(i % dim, digit_count);
        EffectiveInput in;
        in.theta.resize(k);
        in.symbol.assign(config.symbols_per_block, pilot_symbol_index);
        in.matrix.resize(static_cast<Eigen::Index>(k),
                         static_cast<Eigen::Index>(config.symbols_per_block));
        for (std::size_t kk = 0; kk < k; ++kk) {
            const auto col = digits(kk % dim, digit_count);
            std::size_t acc = 0;
            for (std::size_t d = 0; d < digit_count; ++d) acc += row[d] * col[d];
            const auto phase_idx = static_cast<std::uint32_t>(a > 0 ? acc % a : 0);
            in.theta[kk] = phase_idx;
            const cplx ej = config.phase_set.unit(phase_idx);
            for (std::size_t q = 0; q < config.symbols_per_block; ++q) {
                in.matrix(static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(q)) =
                    ej * pilot_symbol;
            }
        }
        pilots.push_back(std::move(in));
    }
    return make_pilot_block(std::move(pilots), config.rx_antennas, config.ris_elements);
}

// tau = 0: no observations, so the estimate is zero and the error covariance
// is the full prior.
inline EstimatorModel no_training_model(std::size_t nk_dim) {
    const auto nk = static_cast<Eigen::Index>(nk_dim);
    EstimatorModel model;
    model.gain.resize(nk, 0);
    model.error_cov = Eigen::MatrixXcd::Identity(nk, nk);
    model.prior_cov_root = Eigen::MatrixXcd::Zero(nk, nk);
    return model;
}

}  // namespace riscap
