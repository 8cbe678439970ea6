#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "riscap/cgf.hpp"
#include "riscap/optimize.hpp"

namespace riscap {

namespace detail {

inline RateEstimate assemble_rate(const CgfEstimate& kappa, double noise_dim, double scale,
                                  Scheme scheme, const McSettings& mc) {
    RateEstimate r;
    r.bits_per_symbol = scale * (-noise_dim * kLog2E - kappa.kappa_bits);
    r.std_err = scale * kappa.std_err;
    r.samples = kappa.samples;
    r.scheme = scheme_name(scheme);
    r.seed = mc.seed;
    return r;
}

// Perfect-CSI variant: no training phase, all sub-blocks carry data.
inline SystemConfig perfect_variant(const SystemConfig& config) {
    SystemConfig c = config;
    c.training_blocks = 0;
    c.set_equal_power_split(config.power);
    return c;
}

inline PreparedSupport prepare_canonical(Support support, const Eigen::MatrixXcd& error_cov,
                                         double gamma_d) {
    Eigen::VectorXd dummy = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(support.size()));
    canonicalize_support(support, dummy);
    return PreparedSupport::build(support, error_cov, gamma_d);
}

inline Eigen::VectorXd uniform_probs(std::size_t n) {
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
}

struct PerStatePlan {
    std::size_t states = 1;
    std::size_t draws = 1;
};

inline PerStatePlan per_state_plan(const McSettings& mc) {
    PerStatePlan plan;
    plan.draws = std::max<std::size_t>(1, std::min(mc.samples, mc.draws_per_state));
    plan.states = std::max<std::size_t>(1, mc.samples / plan.draws);
    return plan;
}

// Average over sampled channel states of the per-state optimized value
// max_p -kappa_hat(p); candidates (one per reflection pattern for max-SNR)
// are maximized over with first-wins ties.
struct PerStateOutcome {
    CgfEstimate kappa;  // kappa_bits = -mean optimized value, std_err over states
    bool all_converged = true;
};

inline PerStateOutcome per_state_optimized(const std::vector<PreparedSupport>& candidates,
                                           double budget, const EstimatorModel& estimator,
                                           const McSettings& mc) {
    const PerStatePlan plan = per_state_plan(mc);
    std::vector<double> values(plan.states, 0.0);
    std::vector<char> converged(plan.states, 1);
    const CounterRng h_rng = CounterRng::seeded(mc.seed, stream::kEstimate);
    const CounterRng z_base = CounterRng::seeded(mc.seed, stream::kNoise);

    OptimizerSettings opt;
    opt.max_iterations = mc.opt_max_iterations;
    opt.convergence_tol = mc.opt_tol;
    opt.power_budget = budget;

    const auto run_state = [&](std::size_t j) {
        const Eigen::VectorXcd hhat = sample_estimate_prior(estimator, h_rng.at(j));
        double best = -std::numeric_limits<double>::infinity();
        bool ok = true;
        for (const auto& cand : candidates) {
            PairSource source = PairSource::fixed_state(cand.noise_dim, hhat, z_base.at(j));
            MiEvaluator eval(cand, source, plan.draws, 1);
            OptimizeResult res = maximize_over_polytope(eval, eval.traces(), opt);
            if (res.value > best) best = res.value;
            ok = ok && res.converged;
        }
        values[j] = best;
        converged[j] = ok ? 1 : 0;
    };
    parallel_for_index(plan.states, mc.threads,
                       [&](std::size_t j) { run_state(j); });

    PerStateOutcome out;
    const MeanStderr ms = mean_and_stderr(values);
    out.kappa.kappa_bits = -ms.mean;
    out.kappa.std_err = ms.std_err;
    out.kappa.samples = plan.states * plan.draws;
    for (char c : converged) out.all_converged = out.all_converged && (c != 0);
    return out;
}

}  // namespace detail

// Mutual information of the data channel at a fixed input distribution,
// Monte-Carlo averaged over the noise and the channel-estimate prior.
inline RateEstimate mutual_info(const InputDistribution& dist, const EstimatorModel& estimator,
                                const SystemConfig& config, const McSettings& mc) {
    config.validate();
    config.require_data_blocks();
    dist.validate();
    Support support = *dist.support;
    Eigen::VectorXd probs = dist.probs;
    canonicalize_support(support, probs);
    const PreparedSupport prep = PreparedSupport::build(support, estimator.error_cov, config.gamma_d);
    const PairSource source =
        PairSource::joint(prep.noise_dim, estimator.prior_cov_root,
                          CounterRng::seeded(mc.seed, stream::kNoise),
                          CounterRng::seeded(mc.seed, stream::kEstimate));
    const CgfEstimate kappa =
        conditional_cgf(prep, prep, probs, probs, source, mc.samples, mc.threads);
    const double scale =
        1.0 / static_cast<double>(config.symbols_per_block * config.sub_blocks);
    RateEstimate r = detail::assemble_rate(kappa, static_cast<double>(prep.noise_dim), scale,
                                           Scheme::capacity_csir, mc);
    r.scheme = "mutual-info";
    return r;
}

// Same, conditioned on one fixed channel estimate (Monte-Carlo over noise
// only). This is the per-state objective the CSIT schemes optimize.
inline RateEstimate mutual_info_given_estimate(const InputDistribution& dist,
                                               const Eigen::VectorXcd& hhat,
                                               const EstimatorModel& estimator,
                                               const SystemConfig& config, const McSettings& mc) {
    config.validate();
    config.require_data_blocks();
    dist.validate();
    Support support = *dist.support;
    Eigen::VectorXd probs = dist.probs;
    canonicalize_support(support, probs);
    const PreparedSupport prep = PreparedSupport::build(support, estimator.error_cov, config.gamma_d);
    const PairSource source = PairSource::fixed_state(
        prep.noise_dim, hhat, CounterRng::seeded(mc.seed, stream::kNoise));
    const CgfEstimate kappa =
        conditional_cgf(prep, prep, probs, probs, source, mc.samples, mc.threads);
    const double scale =
        1.0 / static_cast<double>(config.symbols_per_block * config.sub_blocks);
    RateEstimate r = detail::assemble_rate(kappa, static_cast<double>(prep.noise_dim), scale,
                                           Scheme::capacity_csir, mc);
    r.scheme = "mutual-info";
    return r;
}

// Capacity with the channel estimate shared by transmitter and receiver: the
// input distribution is optimized for every sampled estimate.
inline RateEstimate rate_capacity_csit(const SystemConfig& config, const EstimatorModel& estimator,
                                       const McSettings& mc) {
    config.validate();
    config.require_data_blocks();
    const std::size_t width = config.data_blocks();
    std::vector<PreparedSupport> candidates;
    candidates.push_back(detail::prepare_canonical(joint_support(config, width, mc.support_cap),
                                                   estimator.error_cov, config.gamma_d));
    const double budget =
        static_cast<double>(config.ris_elements * config.symbols_per_block * width);
    const detail::PerStateOutcome out = detail::per_state_optimized(candidates, budget, estimator, mc);
    const double scale = 1.0 / static_cast<double>(config.symbols_per_block * config.sub_blocks);
    RateEstimate r = detail::assemble_rate(out.kappa, static_cast<double>(candidates[0].noise_dim),
                                           scale, Scheme::capacity_csit, mc);
    r.converged = out.all_converged;
    return r;
}

// Capacity with the estimate at the receiver only: uniform joint inputs.
inline RateEstimate rate_capacity_csir(const SystemConfig& config, const EstimatorModel& estimator,
                                       const McSettings& mc) {
    config.validate();
    config.require_data_blocks();
    const std::size_t width = config.data_blocks();
    auto support = std::make_shared<Support>(joint_support(config, width, mc.support_cap));
    const double budget =
        static_cast<double>(config.ris_elements * config.symbols_per_block * width);
    RateEstimate r = mutual_info(uniform_distribution(support, budget), estimator, config, mc);
    r.scheme = scheme_name(Scheme::capacity_csir);
    return r;
}

// Perfect-CSI capacity benchmark: no training, the exact channel is the state.
inline RateEstimate rate_perfect_csi(const SystemConfig& config, const McSettings& mc) {
    const SystemConfig pc = detail::perfect_variant(config);
    pc.validate();
    const EstimatorModel model = perfect_csi_model(pc.nk());
    RateEstimate r = rate_capacity_csit(pc, model, mc);
    r.scheme = scheme_name(Scheme::perfect);
    return r;
}

enum class MaxSnrCsi { full, rx_only, perfect };

// Fixed-reflection baseline: one pattern per coherence block, chosen from the
// channel estimate (full/perfect) or once globally (rx_only); data rides on
// the symbols only.
inline RateEstimate rate_max_snr(const SystemConfig& config_in, const EstimatorModel& estimator_in,
                                 const McSettings& mc, MaxSnrCsi csi) {
    SystemConfig config = config_in;
    EstimatorModel estimator = estimator_in;
    if (csi == MaxSnrCsi::perfect) {
        config = detail::perfect_variant(config_in);
        estimator = perfect_csi_model(config.nk());
    }
    config.validate();
    config.require_data_blocks();
    const std::size_t width = config.data_blocks();
    const double budget =
        static_cast<double>(config.ris_elements * config.symbols_per_block * width);
    const double scale = 1.0 / static_cast<double>(config.symbols_per_block * config.sub_blocks);
    const auto patterns = phase_patterns(config, mc.support_cap);

    if (csi == MaxSnrCsi::rx_only) {
        // One global pattern; uniform symbols; common random numbers across
        // candidates so the argmax is well defined.
        std::optional<RateEstimate> best;
        for (const auto& theta : patterns) {
            auto support = std::make_shared<Support>(
                joint_support_fixed_phase(theta, config, width, mc.support_cap));
            RateEstimate r =
                mutual_info(uniform_distribution(support, budget), estimator, config, mc);
            if (!best || r.bits_per_symbol > best->bits_per_symbol) best = std::move(r);
        }
        best->scheme = scheme_name(Scheme::max_snr_csir);
        return *best;
    }

    std::vector<PreparedSupport> candidates;
    candidates.reserve(patterns.size());
    for (const auto& theta : patterns) {
        candidates.push_back(
            detail::prepare_canonical(joint_support_fixed_phase(theta, config, width, mc.support_cap),
                                      estimator.error_cov, config.gamma_d));
    }
    const detail::PerStateOutcome out = detail::per_state_optimized(candidates, budget, estimator, mc);
    RateEstimate r = detail::assemble_rate(out.kappa, static_cast<double>(candidates[0].noise_dim),
                                           scale,
                                           csi == MaxSnrCsi::perfect ? Scheme::max_snr_perfect
                                                                     : Scheme::max_snr_csit,
                                           mc);
    r.converged = out.all_converged;
    return r;
}

namespace detail {

struct LayeredParts {
    CgfEstimate phase_layer;
    CgfEstimate symbol_layer;
    double phase_noise_dim = 0.0;
    double symbol_noise_dim = 0.0;
    bool has_symbol_layer = false;
};

inline LayeredParts layered_parts(const SystemConfig& config, const EstimatorModel& estimator,
                                  const McSettings& mc, std::size_t width) {
    config.require_layered();
    LayeredParts parts;
    {
        Support q_support = phase_matrix_support(config, width, mc.support_cap);
        Eigen::VectorXd probs = uniform_probs(q_support.size());
        canonicalize_support(q_support, probs);
        const PreparedSupport prep =
            PreparedSupport::build(q_support, estimator.error_cov, config.gamma_d);
        const PairSource source = PairSource::joint(
            prep.noise_dim, estimator.prior_cov_root,
            CounterRng::seeded(mc.seed, stream::kLayerPhaseNoise),
            CounterRng::seeded(mc.seed, stream::kLayerPhaseEstimate));
        parts.phase_layer = conditional_cgf(prep, prep, probs, probs, source, mc.samples, mc.threads);
        parts.phase_noise_dim = static_cast<double>(prep.noise_dim);
    }
    if (config.scd_pilots < config.symbols_per_block) {
        Support x_support = layered_symbol_support(config, width, mc.support_cap);
        Eigen::VectorXd probs = uniform_probs(x_support.size());
        canonicalize_support(x_support, probs);
        const PreparedSupport prep =
            PreparedSupport::build(x_support, estimator.error_cov, config.gamma_d);
        const PairSource source = PairSource::joint(
            prep.noise_dim, estimator.prior_cov_root,
            CounterRng::seeded(mc.seed, stream::kLayerSymbolNoise),
            CounterRng::seeded(mc.seed, stream::kLayerSymbolEstimate));
        parts.symbol_layer =
            conditional_cgf(prep, prep, probs, probs, source, mc.samples, mc.threads);
        parts.symbol_noise_dim = static_cast<double>(prep.noise_dim);
        parts.has_symbol_layer = true;
    }
    return parts;
}

inline RateEstimate assemble_layered(const LayeredParts& parts, double scale, Scheme scheme,
                                     const McSettings& mc) {
    RateEstimate r;
    r.bits_per_symbol =
        scale * (-parts.phase_noise_dim * kLog2E - parts.phase_layer.kappa_bits);
    double var = parts.phase_layer.std_err * parts.phase_layer.std_err;
    if (parts.has_symbol_layer) {
        r.bits_per_symbol +=
            scale * (-parts.symbol_noise_dim * kLog2E - parts.symbol_layer.kappa_bits);
        var += parts.symbol_layer.std_err * parts.symbol_layer.std_err;
    }
    r.std_err = scale * std::sqrt(var);
    r.samples = parts.phase_layer.samples;
    r.scheme = scheme_name(scheme);
    r.seed = mc.seed;
    return r;
}

}  // namespace detail

// Layered scheme: phases decoded first from the averaged pilot columns, then
// symbols with the phases known. Both layers use uniform codebooks, so no
// optimization is involved.
inline RateEstimate rate_layered(const SystemConfig& config, const EstimatorModel& estimator,
                                 const McSettings& mc) {
    config.validate();
    config.require_data_blocks();
    const std::size_t width = config.data_blocks();
    const detail::LayeredParts parts = detail::layered_parts(config, estimator, mc, width);
    const double scale = 1.0 / static_cast<double>(config.symbols_per_block * config.sub_blocks);
    return detail::assemble_layered(parts, scale, Scheme::layered, mc);
}

inline RateEstimate rate_layered_perfect(const SystemConfig& config, const McSettings& mc) {
    const SystemConfig pc = detail::perfect_variant(config);
    pc.validate();
    const EstimatorModel model = perfect_csi_model(pc.nk());
    const detail::LayeredParts parts = detail::layered_parts(pc, model, mc, pc.sub_blocks);
    const double scale = 1.0 / static_cast<double>(pc.symbols_per_block * pc.sub_blocks);
    return detail::assemble_layered(parts, scale, Scheme::layered_perfect, mc);
}

// Separable-decoding lower bounds: per-sub-block supports, the rate scaled by
// (ell - tau)/(m ell). Exponentially cheaper than the joint evaluation and
// equal to it when a single data sub-block remains.
inline RateEstimate lower_bound(const SystemConfig& config_in, const EstimatorModel& estimator_in,
                                const McSettings& mc, Scheme scheme) {
    SystemConfig config = config_in;
    EstimatorModel estimator = estimator_in;
    const bool perfect = scheme == Scheme::perfect || scheme == Scheme::max_snr_perfect ||
                         scheme == Scheme::layered_perfect;
    if (perfect) {
        config = detail::perfect_variant(config_in);
        estimator = perfect_csi_model(config.nk());
    }
    config.validate();
    config.require_data_blocks();
    const double width_factor = static_cast<double>(config.data_blocks());
    const double scale = width_factor /
                         static_cast<double>(config.symbols_per_block * config.sub_blocks);
    const double budget = static_cast<double>(config.ris_elements * config.symbols_per_block);

    RateEstimate r;
    switch (scheme) {
        case Scheme::capacity_csit:
        case Scheme::perfect: {
            std::vector<PreparedSupport> candidates;
            candidates.push_back(detail::prepare_canonical(joint_support(config, 1, mc.support_cap),
                                                           estimator.error_cov, config.gamma_d));
            const detail::PerStateOutcome out =
                detail::per_state_optimized(candidates, budget, estimator, mc);
            r = detail::assemble_rate(out.kappa, static_cast<double>(candidates[0].noise_dim),
                                      scale, scheme, mc);
            r.converged = out.all_converged;
            break;
        }
        case Scheme::capacity_csir: {
            auto support = std::make_shared<Support>(joint_support(config, 1, mc.support_cap));
            RateEstimate inner =
                mutual_info(uniform_distribution(support, budget), estimator, config, mc);
            r = inner;
            r.bits_per_symbol = inner.bits_per_symbol * width_factor;
            r.std_err = inner.std_err * width_factor;
            r.scheme = scheme_name(scheme);
            break;
        }
        case Scheme::max_snr_csit:
        case Scheme::max_snr_perfect: {
            const auto patterns = phase_patterns(config, mc.support_cap);
            std::vector<PreparedSupport> candidates;
            candidates.reserve(patterns.size());
            for (const auto& theta : patterns) {
                candidates.push_back(detail::prepare_canonical(
                    joint_support_fixed_phase(theta, config, 1, mc.support_cap),
                    estimator.error_cov, config.gamma_d));
            }
            const detail::PerStateOutcome out =
                detail::per_state_optimized(candidates, budget, estimator, mc);
            r = detail::assemble_rate(out.kappa, static_cast<double>(candidates[0].noise_dim),
                                      scale, scheme, mc);
            r.converged = out.all_converged;
            break;
        }
        case Scheme::max_snr_csir: {
            const auto patterns = phase_patterns(config, mc.support_cap);
            std::optional<RateEstimate> best;
            for (const auto& theta : patterns) {
                auto support = std::make_shared<Support>(
                    joint_support_fixed_phase(theta, config, 1, mc.support_cap));
                RateEstimate cand =
                    mutual_info(uniform_distribution(support, budget), estimator, config, mc);
                if (!best || cand.bits_per_symbol > best->bits_per_symbol) best = std::move(cand);
            }
            r = *best;
            r.bits_per_symbol *= width_factor;
            r.std_err *= width_factor;
            r.scheme = scheme_name(scheme);
            break;
        }
        case Scheme::layered:
        case Scheme::layered_perfect: {
            const detail::LayeredParts parts = detail::layered_parts(config, estimator, mc, 1);
            r = detail::assemble_layered(parts, scale, scheme, mc);
            break;
        }
    }
    r.evaluation_mode = "lower-bound";
    return r;
}

// Closed-form high-SNR asymptotes. Joint and layered limits require enough
// pilots for asymptotically perfect estimation (tau >= K); max-SNR needs one.
inline double high_snr_limit(const SystemConfig& config_in, Scheme scheme,
                             std::size_t cap = kDefaultEnumerationCap) {
    const bool perfect = scheme == Scheme::perfect || scheme == Scheme::max_snr_perfect ||
                         scheme == Scheme::layered_perfect;
    SystemConfig config = perfect ? detail::perfect_variant(config_in) : config_in;
    config.validate();
    config.require_data_blocks();
    const double m = static_cast<double>(config.symbols_per_block);
    const double ell = static_cast<double>(config.sub_blocks);
    const double data = static_cast<double>(config.data_blocks());
    switch (scheme) {
        case Scheme::capacity_csit:
        case Scheme::capacity_csir:
            if (config.training_blocks < config.ris_elements) {
                throw InvalidParameter("joint-encoding high-SNR limit requires tau >= K");
            }
            [[fallthrough]];
        case Scheme::perfect:
            return data * std::log2(static_cast<double>(distinct_input_count(config, cap))) /
                   (m * ell);
        case Scheme::max_snr_csit:
        case Scheme::max_snr_csir:
            if (config.training_blocks < 1) {
                throw InvalidParameter("max-SNR high-SNR limit requires tau >= 1");
            }
            [[fallthrough]];
        case Scheme::max_snr_perfect:
            return data * std::log2(static_cast<double>(config.symbol_count())) / ell;
        case Scheme::layered:
            if (config.training_blocks < config.ris_elements) {
                throw InvalidParameter("layered high-SNR limit requires tau >= K");
            }
            [[fallthrough]];
        case Scheme::layered_perfect: {
            config.require_layered();
            const double mu = static_cast<double>(config.scd_pilots);
            const double k = static_cast<double>(config.ris_elements);
            const double a = static_cast<double>(config.phase_count());
            const double s = static_cast<double>(config.symbol_count());
            return data * ((m - mu) * std::log2(s) + k * std::log2(a)) / (m * ell);
        }
    }
    throw InvalidParameter("unknown scheme");
}

// Deterministic 2-D grid quadrature of the scalar-channel mutual information
// I(x; y | h) for y = gamma_d * h * x + CN(0,1) noise and a weighted finite
// input set. Entirely independent of the CGF path it cross-checks.
struct OracleGrid {
    double extent_sigmas = 8.0;
    double step = 0.02;
};

inline double mi_oracle_scalar(const std::vector<cplx>& points, const std::vector<double>& probs,
                               double gamma_d, cplx h, OracleGrid grid = {}) {
    if (points.empty() || points.size() != probs.size()) {
        throw InvalidParameter("oracle needs matching points and probabilities");
    }
    if (grid.step > 0.05 || grid.step <= 0.0) {
        throw InvalidParameter("oracle grid step must be in (0, 0.05]");
    }
    const std::size_t n = points.size();
    std::vector<cplx> means(n);
    double re_lo = 1e300, re_hi = -1e300, im_lo = 1e300, im_hi = -1e300;
    for (std::size_t i = 0; i < n; ++i) {
        means[i] = gamma_d * h * points[i];
        re_lo = std::min(re_lo, means[i].real());
        re_hi = std::max(re_hi, means[i].real());
        im_lo = std::min(im_lo, means[i].imag());
        im_hi = std::max(im_hi, means[i].imag());
    }
    const double sigma = std::sqrt(0.5);  // per real component of CN(0,1)
    const double pad = grid.extent_sigmas * sigma;
    re_lo -= pad;
    re_hi += pad;
    im_lo -= pad;
    im_hi += pad;
    const auto steps_re = static_cast<std::size_t>(std::ceil((re_hi - re_lo) / grid.step));
    const auto steps_im = static_cast<std::size_t>(std::ceil((im_hi - im_lo) / grid.step));
    const double cell = grid.step * grid.step;
    double nats = 0.0;
    std::vector<double> dens(n);
    for (std::size_t a = 0; a < steps_re; ++a) {
        const double yr = re_lo + (static_cast<double>(a) + 0.5) * grid.step;
        for (std::size_t b = 0; b < steps_im; ++b) {
            const double yi = im_lo + (static_cast<double>(b) + 0.5) * grid.step;
            double mix = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dr = yr - means[i].real();
                const double di = yi - means[i].imag();
                dens[i] = std::exp(-(dr * dr + di * di)) / kPi;
                mix += probs[i] * dens[i];
            }
            if (mix <= 0.0) continue;
            double term = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (probs[i] <= 0.0 || dens[i] <= 0.0) continue;
                term += probs[i] * dens[i] * std::log(dens[i] / mix);
            }
            nats += term * cell;
        }
    }
    return nats * kLog2E;
}

}  // namespace riscap
