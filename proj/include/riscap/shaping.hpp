#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "riscap/estimation.hpp"

namespace riscap {

// Conditional output covariance Gamma(X) = I + gamma_d^2 X^kron Gamma_mmse
// (X^kron)^H, held with its lower-triangular root and log-determinant.
struct ShapedCovariance {
    Eigen::MatrixXcd gamma;
    Eigen::MatrixXcd root;  // lower triangular, root * root^H = gamma
    double log_det = 0.0;   // natural log
};

inline ShapedCovariance shaped_covariance(const Eigen::MatrixXcd& lifted,
                                          const Eigen::MatrixXcd& error_cov, double gamma_d) {
    if (lifted.cols() != error_cov.rows() || error_cov.rows() != error_cov.cols()) {
        throw InvalidParameter("shaped covariance dimension mismatch");
    }
    const Eigen::Index d = lifted.rows();
    ShapedCovariance out;
    out.gamma = Eigen::MatrixXcd::Identity(d, d);
    if (gamma_d != 0.0 && !error_cov.isZero(0.0)) {
        out.gamma += (gamma_d * gamma_d) * (lifted * error_cov * lifted.adjoint());
        out.gamma = 0.5 * (out.gamma + out.gamma.adjoint().eval());
    }
    Eigen::LLT<Eigen::MatrixXcd> llt(out.gamma);
    if (llt.info() != Eigen::Success) {
        throw InternalError("shaped covariance factorization failed");
    }
    out.root = llt.matrixL();
    double ld = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) ld += std::log(out.root(i, i).real());
    out.log_det = 2.0 * ld;
    return out;
}

// v^H Gamma^{-1} v through triangular solves against the root.
inline double mahalanobis_sq(const Eigen::VectorXcd& v, const ShapedCovariance& cov) {
    if (v.size() != cov.root.rows()) throw InvalidParameter("mahalanobis dimension mismatch");
    const Eigen::VectorXcd t = cov.root.triangularView<Eigen::Lower>().solve(v);
    return t.squaredNorm();
}

// A channel-input hypothesis spanning one or more sub-blocks: the per-block
// matrices, their stacked lifted form, and a canonical ordering key.
struct BlockInput {
    std::vector<Eigen::MatrixXcd> blocks;  // each K x (block width)
    Eigen::MatrixXcd lifted;               // (N * total width) x NK
    double trace_power = 0.0;
    std::vector<std::uint32_t> key;        // label tuple, lexicographic order
    std::uint32_t group = 0;               // conditioning group (layered symbol layer)
};

inline BlockInput make_block_input(std::vector<Eigen::MatrixXcd> blocks, std::size_t n_rx,
                                   std::vector<std::uint32_t> key = {}, std::uint32_t group = 0) {
    BlockInput in;
    in.blocks = std::move(blocks);
    in.key = std::move(key);
    in.group = group;
    const auto n = static_cast<Eigen::Index>(n_rx);
    Eigen::Index rows = 0, cols = 0;
    for (const auto& b : in.blocks) {
        rows += b.cols() * n;
        cols = b.rows() * n;
    }
    in.lifted.resize(rows, cols);
    Eigen::Index at = 0;
    for (const auto& b : in.blocks) {
        const Eigen::MatrixXcd lift = kron_lift(b, n);
        in.lifted.middleRows(at, lift.rows()) = lift;
        at += lift.rows();
        in.trace_power += b.squaredNorm();
    }
    return in;
}

inline BlockInput block_input_from_effective(const std::vector<EffectiveInput>& inputs,
                                             std::size_t n_rx,
                                             std::vector<std::uint32_t> key = {},
                                             std::uint32_t group = 0) {
    std::vector<Eigen::MatrixXcd> blocks;
    blocks.reserve(inputs.size());
    for (const auto& in : inputs) blocks.push_back(in.matrix);
    return make_block_input(std::move(blocks), n_rx, std::move(key), group);
}

// u = ln(|Gamma(X1)|/|Gamma(X2)|) - || V(X1) z + gamma_d (X1 - X2)^kron hhat ||^2_{Gamma(X2)}.
inline double u_value(const BlockInput& x1, const BlockInput& x2, const Eigen::VectorXcd& z,
                      const Eigen::VectorXcd& hhat, const Eigen::MatrixXcd& error_cov,
                      double gamma_d) {
    if (x1.lifted.rows() != x2.lifted.rows() || x1.lifted.cols() != x2.lifted.cols()) {
        throw InvalidParameter("u value: input dimensions disagree");
    }
    if (z.size() != x1.lifted.rows() || hhat.size() != x1.lifted.cols()) {
        throw InvalidParameter("u value: vector dimensions disagree");
    }
    const ShapedCovariance g1 = shaped_covariance(x1.lifted, error_cov, gamma_d);
    const ShapedCovariance g2 = shaped_covariance(x2.lifted, error_cov, gamma_d);
    const Eigen::VectorXcd w =
        g1.root.triangularView<Eigen::Lower>() * z + gamma_d * ((x1.lifted - x2.lifted) * hhat);
    return g1.log_det - g2.log_det - mahalanobis_sq(w, g2);
}

// Log of the conditional output density, ln p(y | hhat, X), without the
// dimension constant (which cancels in ratios).
inline double log_density_unnormalized(const Eigen::VectorXcd& y, const BlockInput& x,
                                       const Eigen::VectorXcd& hhat,
                                       const Eigen::MatrixXcd& error_cov, double gamma_d) {
    const ShapedCovariance g = shaped_covariance(x.lifted, error_cov, gamma_d);
    const Eigen::VectorXcd resid = y - gamma_d * (x.lifted * hhat);
    return -g.log_det - mahalanobis_sq(resid, g);
}

// Checks the likelihood-ratio identity behind the u variable: at the output
// y = gamma_d X1^kron hhat + V(X1) z, the ratio p(y|hhat,X2)/p(y|hhat,X1)
// equals exp(u + ||z||^2). Returns both sides.
inline std::pair<double, double> likelihood_ratio_check(const BlockInput& x1, const BlockInput& x2,
                                                        const Eigen::VectorXcd& z,
                                                        const Eigen::VectorXcd& hhat,
                                                        const Eigen::MatrixXcd& error_cov,
                                                        double gamma_d) {
    const double u = u_value(x1, x2, z, hhat, error_cov, gamma_d);
    const ShapedCovariance g1 = shaped_covariance(x1.lifted, error_cov, gamma_d);
    const Eigen::VectorXcd y =
        gamma_d * (x1.lifted * hhat) + g1.root.triangularView<Eigen::Lower>() * z;
    const double log_ratio = log_density_unnormalized(y, x2, hhat, error_cov, gamma_d) -
                             log_density_unnormalized(y, x1, hhat, error_cov, gamma_d);
    return {std::exp(u + z.squaredNorm()), std::exp(log_ratio)};
}

}  // namespace riscap
