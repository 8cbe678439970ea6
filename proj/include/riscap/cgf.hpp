#pragma once

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <vector>

#include "riscap/rate_types.hpp"
#include "riscap/rng.hpp"
#include "riscap/support.hpp"

namespace riscap {

// Per-element quantities reused by every u evaluation over a support.
struct PreparedElement {
    Eigen::MatrixXcd lifted;    // d x NK
    Eigen::MatrixXcd root;      // d x d lower triangular
    Eigen::MatrixXcd root_inv;  // d x d lower triangular
    double log_det = 0.0;
    double trace = 0.0;
};

struct PreparedSupport {
    std::vector<PreparedElement> elems;
    std::vector<std::uint32_t> group_of;               // per element
    std::vector<std::vector<std::uint32_t>> groups;    // element ids per group
    Eigen::Index noise_dim = 0;
    Eigen::Index nk = 0;
    double gamma_d = 0.0;

    std::size_t size() const { return elems.size(); }

    static PreparedSupport build(const Support& support, const Eigen::MatrixXcd& error_cov,
                                 double gamma_d) {
        if (support.empty()) throw InvalidParameter("empty input support");
        PreparedSupport out;
        out.gamma_d = gamma_d;
        out.nk = support.front().lifted.cols();
        out.noise_dim = support.front().lifted.rows();
        out.elems.reserve(support.size());
        std::uint32_t max_group = 0;
        for (const auto& in : support) {
            if (in.lifted.rows() != out.noise_dim || in.lifted.cols() != out.nk) {
                throw InvalidParameter("support elements have mismatched dimensions");
            }
            PreparedElement pe;
            pe.lifted = in.lifted;
            const ShapedCovariance cov = shaped_covariance(in.lifted, error_cov, gamma_d);
            pe.root = cov.root;
            pe.root_inv = cov.root.triangularView<Eigen::Lower>().solve(
                Eigen::MatrixXcd::Identity(out.noise_dim, out.noise_dim));
            pe.log_det = cov.log_det;
            pe.trace = in.trace_power;
            out.elems.push_back(std::move(pe));
            out.group_of.push_back(in.group);
            max_group = std::max(max_group, in.group);
        }
        out.groups.resize(max_group + 1);
        for (std::size_t i = 0; i < support.size(); ++i) {
            out.groups[support[i].group].push_back(static_cast<std::uint32_t>(i));
        }
        return out;
    }
};

// Draws the Monte-Carlo pair (z, hhat) for one sample index. The estimate is
// either sampled from its prior CN(0, I - error_cov) or held fixed.
class PairSource {
   public:
    static PairSource joint(Eigen::Index noise_dim, const Eigen::MatrixXcd& prior_root,
                            CounterRng z_rng, CounterRng h_rng) {
        PairSource s;
        s.noise_dim_ = noise_dim;
        s.prior_root_ = prior_root;
        s.z_rng_ = z_rng;
        s.h_rng_ = h_rng;
        s.fixed_ = false;
        return s;
    }

    static PairSource fixed_state(Eigen::Index noise_dim, Eigen::VectorXcd hhat,
                                  CounterRng z_rng) {
        PairSource s;
        s.noise_dim_ = noise_dim;
        s.fixed_hhat_ = std::move(hhat);
        s.z_rng_ = z_rng;
        s.fixed_ = true;
        return s;
    }

    void draw(std::size_t index, Eigen::VectorXcd& z, Eigen::VectorXcd& hhat) const {
        z.resize(noise_dim_);
        const CounterRng zr = z_rng_.at(index);
        for (Eigen::Index i = 0; i < noise_dim_; ++i) {
            z(i) = zr.complex_gaussian(static_cast<std::uint64_t>(i));
        }
        if (fixed_) {
            hhat = fixed_hhat_;
            return;
        }
        const Eigen::Index nk = prior_root_.rows();
        Eigen::VectorXcd w(nk);
        const CounterRng hr = h_rng_.at(index);
        for (Eigen::Index i = 0; i < nk; ++i) {
            w(i) = hr.complex_gaussian(static_cast<std::uint64_t>(i));
        }
        hhat = prior_root_ * w;
    }

    Eigen::Index noise_dim() const { return noise_dim_; }

   private:
    Eigen::Index noise_dim_ = 0;
    Eigen::MatrixXcd prior_root_;
    Eigen::VectorXcd fixed_hhat_;
    CounterRng z_rng_, h_rng_;
    bool fixed_ = false;
};

// Scratch space for one sample's u matrix over (outer, inner) elements.
struct UWorkspace {
    Eigen::MatrixXcd y;        // d x n_outer
    Eigen::MatrixXcd t;        // d x n_outer
    Eigen::VectorXcd vin;      // d
    Eigen::VectorXcd cin;      // d
    Eigen::MatrixXd u;         // n_outer x n_inner
    Eigen::VectorXcd z, hhat;  // draw buffers
};

// Fills u(a, b) = ln|G_a| - ln|G_b| - ||Linv_b (y_a - v_b)||^2 with
// y_a = L_a z + gamma_d X_a^kron hhat and v_b = gamma_d X_b^kron hhat.
inline void compute_u_matrix(const PreparedSupport& outer, const PreparedSupport& inner,
                             const Eigen::VectorXcd& z, const Eigen::VectorXcd& hhat,
                             UWorkspace& ws) {
    const auto n_out = static_cast<Eigen::Index>(outer.size());
    const auto n_in = static_cast<Eigen::Index>(inner.size());
    const Eigen::Index d = outer.noise_dim;
    ws.y.resize(d, n_out);
    ws.t.resize(d, n_out);
    ws.u.resize(n_out, n_in);
    for (Eigen::Index a = 0; a < n_out; ++a) {
        const auto& ea = outer.elems[static_cast<std::size_t>(a)];
        ws.y.col(a) = ea.root.triangularView<Eigen::Lower>() * z;
        ws.y.col(a).noalias() += outer.gamma_d * (ea.lifted * hhat);
    }
    for (Eigen::Index b = 0; b < n_in; ++b) {
        const auto& eb = inner.elems[static_cast<std::size_t>(b)];
        ws.vin.noalias() = inner.gamma_d * (eb.lifted * hhat);
        ws.cin.noalias() = eb.root_inv.triangularView<Eigen::Lower>() * ws.vin;
        ws.t.noalias() = eb.root_inv.triangularView<Eigen::Lower>() * ws.y;
        for (Eigen::Index a = 0; a < n_out; ++a) {
            const double q = (ws.t.col(a) - ws.cin).squaredNorm();
            ws.u(a, b) = outer.elems[static_cast<std::size_t>(a)].log_det - eb.log_det - q;
        }
    }
}

struct CgfEstimate {
    double kappa_bits = 0.0;
    double std_err = 0.0;
    std::size_t samples = 0;
};

namespace detail {

// Conditional inner log-weights, normalized within each group.
inline std::vector<double> inner_log_weights(const PreparedSupport& inner,
                                             const Eigen::VectorXd& inner_probs) {
    std::vector<double> logw(inner.size(), -std::numeric_limits<double>::infinity());
    for (const auto& members : inner.groups) {
        double total = 0.0;
        for (std::uint32_t b : members) total += inner_probs(b);
        if (total <= 0.0) continue;
        for (std::uint32_t b : members) {
            if (inner_probs(b) > 0.0) logw[b] = std::log(inner_probs(b) / total);
        }
    }
    return logw;
}

}  // namespace detail

// Monte-Carlo conditional CGF: outer expectation over (z, hhat) sampled and
// over X1 summed exactly; inner expectation over X2 summed exactly with
// log-sum-exp stabilization. `fill_u` computes one sample's u matrix.
template <typename UFiller>
CgfEstimate kappa_from_provider(std::size_t samples, const PreparedSupport& outer,
                                const PreparedSupport& inner, const Eigen::VectorXd& outer_probs,
                                const Eigen::VectorXd& inner_probs, UFiller&& fill_u,
                                unsigned threads = 1) {
    if (samples == 0) throw InvalidParameter("conditional cgf needs at least one sample");
    if (outer_probs.size() != static_cast<Eigen::Index>(outer.size()) ||
        inner_probs.size() != static_cast<Eigen::Index>(inner.size())) {
        throw InvalidParameter("probability vector does not match support");
    }
    const std::vector<double> logw = detail::inner_log_weights(inner, inner_probs);
    for (Eigen::Index a = 0; a < outer_probs.size(); ++a) {
        if (outer_probs(a) <= 0.0) continue;
        const auto& members = inner.groups[outer.group_of[static_cast<std::size_t>(a)]];
        bool any = false;
        for (std::uint32_t b : members) {
            if (logw[b] > -std::numeric_limits<double>::infinity()) any = true;
        }
        if (!any) throw InvalidParameter("outer element has no inner mass in its group");
    }
    std::vector<double> stats(samples, 0.0);

    const auto run_block = [&](std::size_t begin, std::size_t end) {
        UWorkspace ws;
        Eigen::ArrayXd terms;
        for (std::size_t i = begin; i < end; ++i) {
            fill_u(i, ws);
            double stat = 0.0;
            for (Eigen::Index a = 0; a < outer_probs.size(); ++a) {
                const double pa = outer_probs(a);
                if (pa <= 0.0) continue;
                const auto& members = inner.groups[outer.group_of[static_cast<std::size_t>(a)]];
                terms.resize(static_cast<Eigen::Index>(members.size()));
                Eigen::Index count = 0;
                for (std::uint32_t b : members) {
                    const double lw = logw[b];
                    if (!(lw > -std::numeric_limits<double>::infinity())) continue;
                    terms(count++) = ws.u(a, static_cast<Eigen::Index>(b)) + lw;
                }
                const auto head = terms.head(count);
                const double mx = head.maxCoeff();
                stat += pa * (mx + std::log((head - mx).exp().sum())) * kLog2E;
            }
            stats[i] = stat;
        }
    };

    if (threads <= 1) {
        run_block(0, samples);
    } else {
        const unsigned workers = std::min<unsigned>(threads, 64);
        std::vector<std::thread> pool;
        const std::size_t chunk = (samples + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t begin = static_cast<std::size_t>(w) * chunk;
            const std::size_t end = std::min(samples, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back([begin, end, &run_block] { run_block(begin, end); });
        }
        for (auto& t : pool) t.join();
    }

    const MeanStderr ms = mean_and_stderr(stats);
    return {ms.mean, ms.std_err, samples};
}

// Conditional CGF of the channel u variable under a (z, hhat) pair source.
inline CgfEstimate conditional_cgf(const PreparedSupport& outer, const PreparedSupport& inner,
                                   const Eigen::VectorXd& outer_probs,
                                   const Eigen::VectorXd& inner_probs, const PairSource& source,
                                   std::size_t samples, unsigned threads = 1) {
    return kappa_from_provider(
        samples, outer, inner, outer_probs, inner_probs,
        [&](std::size_t i, UWorkspace& ws) {
            source.draw(i, ws.z, ws.hhat);
            compute_u_matrix(outer, inner, ws.z, ws.hhat, ws);
        },
        threads);
}

// Table-backed objective for optimizing the input distribution at a fixed
// Monte-Carlo sample set: J(p) = -kappa_hat(p) in bits, with X1 and X2 drawn
// from the same p. Stores exp(u - rowmax) once; every optimizer step then
// costs one pass over the table.
class MiEvaluator {
   public:
    MiEvaluator(const PreparedSupport& support, const PairSource& source, std::size_t samples,
                unsigned threads = 1)
        : n_(static_cast<Eigen::Index>(support.size())), samples_(samples) {
        if (support.groups.size() != 1) {
            throw InvalidParameter("distribution optimization requires an ungrouped support");
        }
        traces_.resize(n_);
        for (Eigen::Index a = 0; a < n_; ++a) {
            traces_(a) = support.elems[static_cast<std::size_t>(a)].trace;
        }
        row_max_.resize(samples_ * static_cast<std::size_t>(n_));
        table_.resize(samples_ * static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_));
        const auto build_block = [&](std::size_t begin, std::size_t end) {
            UWorkspace ws;
            Eigen::ArrayXd row_buf(n_);
            for (std::size_t i = begin; i < end; ++i) {
                source.draw(i, ws.z, ws.hhat);
                compute_u_matrix(support, support, ws.z, ws.hhat, ws);
                for (Eigen::Index a = 0; a < n_; ++a) {
                    row_buf = ws.u.row(a).transpose().array();
                    const double mx = row_buf.maxCoeff();
                    row_max_[i * static_cast<std::size_t>(n_) + static_cast<std::size_t>(a)] = mx;
                    Eigen::Map<Eigen::ArrayXf>(row_ptr(i, a), n_) =
                        (row_buf - mx).exp().cast<float>();
                }
            }
        };
        if (threads <= 1 || samples_ < 2) {
            build_block(0, samples_);
        } else {
            std::vector<std::thread> pool;
            const unsigned workers = std::min<unsigned>(threads, 64);
            const std::size_t chunk = (samples_ + workers - 1) / workers;
            for (unsigned w = 0; w < workers; ++w) {
                const std::size_t begin = static_cast<std::size_t>(w) * chunk;
                const std::size_t end = std::min(samples_, begin + chunk);
                if (begin >= end) break;
                pool.emplace_back([begin, end, &build_block] { build_block(begin, end); });
            }
            for (auto& t : pool) t.join();
        }
        // per-outer sums of the row maxima, reused by every objective value
        mx_sum_.resize(n_);
        mx_sum_.setZero();
        for (std::size_t i = 0; i < samples_; ++i) {
            for (Eigen::Index a = 0; a < n_; ++a) {
                mx_sum_(a) += row_max_[i * static_cast<std::size_t>(n_) + static_cast<std::size_t>(a)];
            }
        }
        r_.resize(samples_ * static_cast<std::size_t>(n_));
        rq_.resize(samples_ * static_cast<std::size_t>(n_));
        rp_t_.resize(r_.size());
        rq_t_.resize(r_.size());
        col_buf_.resize(static_cast<Eigen::Index>(samples_));
    }

    Eigen::Index dimension() const { return n_; }
    const Eigen::VectorXd& traces() const { return traces_; }

    // Sets the current point, refreshing the per-(sample, outer) inner sums.
    double set_point(const Eigen::VectorXd& p) {
        p_ = p;
        for (std::size_t i = 0; i < samples_; ++i) {
            for (Eigen::Index a = 0; a < n_; ++a) {
                const float* row = row_ptr(i, a);
                double acc = 0.0;
                for (Eigen::Index b = 0; b < n_; ++b) {
                    acc += p(b) * static_cast<double>(row[b]);
                }
                r_[i * static_cast<std::size_t>(n_) + static_cast<std::size_t>(a)] = acc;
            }
        }
        value_ = value_from_r(p_);
        return value_;
    }

    double value() const { return value_; }

    // dJ/dp_c at the current point; one pass over the stored table.
    void gradient(Eigen::VectorXd& grad) const {
        grad = Eigen::VectorXd::Zero(n_);
        const double scale = -kLog2E / static_cast<double>(samples_);
        for (std::size_t i = 0; i < samples_; ++i) {
            const double* rrow = &r_[i * static_cast<std::size_t>(n_)];
            const double* mrow = &row_max_[i * static_cast<std::size_t>(n_)];
            for (Eigen::Index c = 0; c < n_; ++c) {
                grad(c) += scale * (mrow[c] + std::log(rrow[c]));
            }
            for (Eigen::Index a = 0; a < n_; ++a) {
                const double pa = p_(a);
                if (pa <= 0.0) continue;
                const double w = scale * pa / rrow[a];
                const float* row = row_ptr(i, a);
                for (Eigen::Index b = 0; b < n_; ++b) {
                    grad(b) += w * static_cast<double>(row[b]);
                }
            }
        }
    }

    // Prepares the segment toward a sparse vertex q (at most two atoms) and
    // caches outer-major copies so line-search probes are vectorized.
    void prepare_segment(const std::vector<std::pair<Eigen::Index, double>>& q) {
        q_ = q;
        for (std::size_t i = 0; i < samples_; ++i) {
            double* out = &rq_[i * static_cast<std::size_t>(n_)];
            for (Eigen::Index a = 0; a < n_; ++a) {
                const float* row = row_ptr(i, a);
                double acc = 0.0;
                for (const auto& [idx, w] : q) acc += w * static_cast<double>(row[idx]);
                out[a] = acc;
            }
        }
        for (Eigen::Index a = 0; a < n_; ++a) {
            double* pt = &rp_t_[static_cast<std::size_t>(a) * samples_];
            double* qt = &rq_t_[static_cast<std::size_t>(a) * samples_];
            for (std::size_t i = 0; i < samples_; ++i) {
                pt[i] = r_[i * static_cast<std::size_t>(n_) + static_cast<std::size_t>(a)];
                qt[i] = rq_[i * static_cast<std::size_t>(n_) + static_cast<std::size_t>(a)];
            }
        }
    }

    double segment_value(double gamma) const {
        double total = 0.0;
        for (Eigen::Index a = 0; a < n_; ++a) {
            double w = (1.0 - gamma) * p_(a);
            for (const auto& [idx, wq] : q_) {
                if (idx == a) w += gamma * wq;
            }
            if (w <= 0.0) continue;
            const auto m = static_cast<Eigen::Index>(samples_);
            const Eigen::Map<const Eigen::ArrayXd> pt(&rp_t_[static_cast<std::size_t>(a) * samples_], m);
            const Eigen::Map<const Eigen::ArrayXd> qt(&rq_t_[static_cast<std::size_t>(a) * samples_], m);
            col_buf_ = (1.0 - gamma) * pt + gamma * qt;
            total += w * (mx_sum_(a) + col_buf_.log().sum());
        }
        return -kLog2E * total / static_cast<double>(samples_);
    }

    void commit_step(double gamma) {
        value_ = segment_value(gamma);
        p_ *= (1.0 - gamma);
        for (const auto& [idx, w] : q_) p_(idx) += gamma * w;
        for (std::size_t j = 0; j < r_.size(); ++j) {
            r_[j] = (1.0 - gamma) * r_[j] + gamma * rq_[j];
        }
    }

    const Eigen::VectorXd& point() const { return p_; }

   private:
    float* row_ptr(std::size_t i, Eigen::Index a) {
        return table_.data() +
               (i * static_cast<std::size_t>(n_) + static_cast<std::size_t>(a)) *
                   static_cast<std::size_t>(n_);
    }
    const float* row_ptr(std::size_t i, Eigen::Index a) const {
        return table_.data() +
               (i * static_cast<std::size_t>(n_) + static_cast<std::size_t>(a)) *
                   static_cast<std::size_t>(n_);
    }

    double value_from_r(const Eigen::VectorXd& p) const {
        double total = 0.0;
        for (Eigen::Index a = 0; a < n_; ++a) {
            if (p(a) <= 0.0) continue;
            for (std::size_t i = 0; i < samples_; ++i) {
                col_buf_(static_cast<Eigen::Index>(i)) =
                    r_[i * static_cast<std::size_t>(n_) + static_cast<std::size_t>(a)];
            }
            total += p(a) * (mx_sum_(a) + col_buf_.log().sum());
        }
        return -kLog2E * total / static_cast<double>(samples_);
    }

    Eigen::Index n_;
    std::size_t samples_;
    Eigen::VectorXd traces_;
    Eigen::VectorXd p_;
    std::vector<double> row_max_;
    std::vector<float> table_;
    Eigen::VectorXd mx_sum_;
    std::vector<double> r_, rq_, rp_t_, rq_t_;
    mutable Eigen::ArrayXd col_buf_;
    std::vector<std::pair<Eigen::Index, double>> q_;
    double value_ = 0.0;
};

}  // namespace riscap
