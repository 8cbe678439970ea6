#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

#include "riscap/estimation.hpp"
#include "riscap/rate_types.hpp"
#include "riscap/support.hpp"

namespace riscap {

struct OptimizerSettings {
    int max_iterations = 500;
    double convergence_tol = 1e-4;  // duality-gap threshold, bits
    enum class StepRule { exact_line_search, diminishing } step_rule = StepRule::exact_line_search;
    double power_budget = 0.0;
};

struct OptimizeResult {
    Eigen::VectorXd probs;
    double value = 0.0;
    double fw_gap = 0.0;
    int iterations = 0;
    bool converged = false;
};

// A vertex of {p >= 0, sum p = 1, <t, p> <= budget}: one atom, or a two-atom
// mixture pinned to the budget face.
using PolytopeVertex = std::vector<std::pair<Eigen::Index, double>>;

namespace detail {

// Exact linear maximization of <g, q> over the simplex-with-budget polytope.
// Single atoms handle the interior; the budget face is the upper concave
// envelope of (trace, gradient) points evaluated at the budget.
inline PolytopeVertex lmo_simplex_budget(const Eigen::VectorXd& g, const Eigen::VectorXd& t,
                                         double budget,
                                         const std::vector<Eigen::Index>& by_trace) {
    const Eigen::Index n = g.size();
    const double tol = 1e-12 * std::max(1.0, std::abs(budget));
    Eigen::Index best_single = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (t(i) <= budget + tol && (best_single < 0 || g(i) > g(best_single))) best_single = i;
    }
    if (best_single < 0) throw InvalidParameter("power budget admits no support element");

    // Upper hull over points sorted by trace; collinear points are dropped.
    std::vector<Eigen::Index> hull;
    for (Eigen::Index idx : by_trace) {
        while (hull.size() >= 2) {
            const Eigen::Index p1 = hull[hull.size() - 2];
            const Eigen::Index p2 = hull[hull.size() - 1];
            const double cross = (t(p2) - t(p1)) * (g(idx) - g(p1)) -
                                 (t(idx) - t(p1)) * (g(p2) - g(p1));
            if (cross >= 0.0) {
                hull.pop_back();
            } else {
                break;
            }
        }
        if (!hull.empty() && std::abs(t(hull.back()) - t(idx)) <= 0.0) {
            if (g(idx) > g(hull.back())) hull.back() = idx;
            continue;
        }
        hull.push_back(idx);
    }

    double best_value = g(best_single);
    PolytopeVertex best{{best_single, 1.0}};
    for (std::size_t s = 0; s + 1 < hull.size(); ++s) {
        const Eigen::Index i = hull[s], j = hull[s + 1];
        if (!(t(i) <= budget + tol && t(j) > budget + tol)) continue;
        const double lam = (t(j) - budget) / (t(j) - t(i));
        const double val = lam * g(i) + (1.0 - lam) * g(j);
        if (val > best_value + 1e-15 * std::max(1.0, std::abs(val))) {
            best_value = val;
            best = {{i, lam}, {j, 1.0 - lam}};
        }
    }
    return best;
}

inline Eigen::VectorXd vertex_to_dense(const PolytopeVertex& v, Eigen::Index n) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    for (const auto& [idx, w] : v) q(idx) += w;
    return q;
}

}  // namespace detail

// Maximum-entropy feasible start: uniform when it meets the budget, else
// uniform over the elements that fit the budget on their own.
inline Eigen::VectorXd feasible_start(const Eigen::VectorXd& traces, double budget) {
    const Eigen::Index n = traces.size();
    const double tol = 1e-9;
    double avg = traces.sum() / static_cast<double>(n);
    if (avg <= budget + tol) {
        return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    }
    std::vector<Eigen::Index> fit;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (traces(i) <= budget + tol) fit.push_back(i);
    }
    if (fit.empty()) throw InvalidParameter("power budget admits no support element");
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i : fit) p(i) = 1.0 / static_cast<double>(fit.size());
    return p;
}

// Adapter giving plain value/gradient objectives the segment interface the
// Frank-Wolfe driver works against.
template <typename ValueFn, typename GradFn>
class CallbackObjective {
   public:
    CallbackObjective(Eigen::Index n, ValueFn value_fn, GradFn grad_fn)
        : n_(n), value_fn_(std::move(value_fn)), grad_fn_(std::move(grad_fn)) {}

    Eigen::Index dimension() const { return n_; }
    double set_point(const Eigen::VectorXd& p) {
        p_ = p;
        value_ = value_fn_(p_);
        return value_;
    }
    double value() const { return value_; }
    void gradient(Eigen::VectorXd& g) const { grad_fn_(p_, g); }
    void prepare_segment(const PolytopeVertex& q) { q_ = q; }
    double segment_value(double gamma) const {
        Eigen::VectorXd mix = (1.0 - gamma) * p_;
        for (const auto& [idx, w] : q_) mix(idx) += gamma * w;
        return value_fn_(mix);
    }
    void commit_step(double gamma) {
        p_ *= (1.0 - gamma);
        for (const auto& [idx, w] : q_) p_(idx) += gamma * w;
        value_ = value_fn_(p_);
    }
    const Eigen::VectorXd& point() const { return p_; }

   private:
    Eigen::Index n_;
    ValueFn value_fn_;
    GradFn grad_fn_;
    Eigen::VectorXd p_;
    PolytopeVertex q_;
    double value_ = 0.0;
};

// Frank-Wolfe over {p >= 0, sum p = 1, <traces, p> <= budget}. The linear
// subproblem is solved exactly; the step is an exact golden-section line
// search (the objective is concave along the segment) or the 2/(k+2) rule.
// Terminates when the duality gap drops below convergence_tol.
template <typename Objective>
OptimizeResult maximize_over_polytope(Objective& obj, const Eigen::VectorXd& traces,
                                      const OptimizerSettings& settings,
                                      const Eigen::VectorXd* start = nullptr) {
    const Eigen::Index n = obj.dimension();
    if (settings.max_iterations < 1 || settings.convergence_tol <= 0.0) {
        throw InvalidParameter("optimizer settings out of range");
    }
    std::vector<Eigen::Index> by_trace(static_cast<std::size_t>(n));
    std::iota(by_trace.begin(), by_trace.end(), Eigen::Index{0});
    std::stable_sort(by_trace.begin(), by_trace.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return traces(a) < traces(b); });

    Eigen::VectorXd p = start ? *start : feasible_start(traces, settings.power_budget);
    OptimizeResult res;
    res.value = obj.set_point(p);
    res.probs = p;
    res.fw_gap = std::numeric_limits<double>::infinity();

    Eigen::VectorXd grad(n);
    for (int k = 0; k < settings.max_iterations; ++k) {
        obj.gradient(grad);
        const PolytopeVertex q = detail::lmo_simplex_budget(grad, traces, settings.power_budget,
                                                            by_trace);
        double gap = -grad.dot(obj.point());
        for (const auto& [idx, w] : q) gap += w * grad(idx);
        res.iterations = k + 1;
        res.fw_gap = gap;
        if (gap <= settings.convergence_tol) {
            res.converged = true;
            break;
        }
        obj.prepare_segment(q);
        double gamma = 2.0 / (static_cast<double>(k) + 2.0);
        if (settings.step_rule == OptimizerSettings::StepRule::exact_line_search) {
            // Golden-section on [0, 1]; the segment objective is concave.
            // Interval depth follows the gap tolerance.
            const double inv_phi = 0.6180339887498949;
            const double target = std::min(1e-5, 1e-2 * settings.convergence_tol);
            const int steps = std::clamp(
                static_cast<int>(std::ceil(std::log(target) / std::log(inv_phi))), 24, 48);
            double lo = 0.0, hi = 1.0;
            double x1 = hi - inv_phi * (hi - lo);
            double x2 = lo + inv_phi * (hi - lo);
            double f1 = obj.segment_value(x1);
            double f2 = obj.segment_value(x2);
            for (int it = 0; it < steps; ++it) {
                if (f1 < f2) {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + inv_phi * (hi - lo);
                    f2 = obj.segment_value(x2);
                } else {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - inv_phi * (hi - lo);
                    f1 = obj.segment_value(x1);
                }
            }
            gamma = 0.5 * (lo + hi);
            // Keep the step only if it does not lose to the endpoints.
            const double f_end = obj.segment_value(1.0);
            if (f_end > obj.segment_value(gamma)) gamma = 1.0;
        }
        obj.commit_step(gamma);
        if (obj.value() >= res.value) {
            res.value = obj.value();
            res.probs = obj.point();
        }
    }
    return res;
}

// Simplex-constrained concave maximization of a deterministic objective given
// as callbacks; gradient may be analytic or finite-difference.
inline OptimizeResult maximize_distribution(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& gradient,
    const Eigen::VectorXd& traces, const OptimizerSettings& settings) {
    CallbackObjective obj(traces.size(), objective, gradient);
    return maximize_over_polytope(obj, traces, settings);
}

// Exhaustive maximization of `inner` over all A^K phase patterns. Ties keep
// the lexicographically smallest pattern.
inline std::pair<std::vector<std::uint32_t>, double> search_phase_pattern(
    const std::function<double(std::span<const std::uint32_t>)>& inner, const PhaseSet& phase_set,
    std::size_t ris_elements, std::size_t cap = kDefaultEnumerationCap) {
    checked_pow(phase_set.size(), ris_elements, cap, "phase pattern space A^K");
    std::vector<std::uint32_t> theta(ris_elements, 0);
    std::vector<std::uint32_t> best_theta = theta;
    double best = -std::numeric_limits<double>::infinity();
    do {
        const double v = inner(theta);
        if (v > best) {
            best = v;
            best_theta = theta;
        }
    } while (detail::next_tuple(theta, phase_set.size()));
    return {best_theta, best};
}

struct PilotSearchResult {
    PilotBlock block;
    RateEstimate rate;
    std::string search_mode;  // exhaustive | structured
};

// Tests every admissible pilot block when the space fits the cap, otherwise
// falls back to the structured block. Ties keep the first (lexicographic)
// block.
inline PilotSearchResult search_pilots(
    const SystemConfig& config, const std::function<RateEstimate(const PilotBlock&)>& functional,
    std::size_t cap = kDefaultEnumerationCap) {
    if (config.training_blocks == 0) throw InvalidParameter("pilot search needs tau >= 1");
    PilotSearchResult out;
    bool exhaustive = true;
    try {
        checked_pow(config.input_label_count(cap), config.training_blocks, cap,
                    "pilot block space |C|^tau");
    } catch (const CapacityExceeded&) {
        exhaustive = false;
    }
    if (!exhaustive) {
        out.block = structured_pilot_block(config);
        out.rate = functional(out.block);
        out.search_mode = "structured";
        out.rate.pilot_mode = "structured";
        return out;
    }
    const auto blocks = enumerate_pilot_blocks(config, cap);
    if (blocks.empty()) throw InvalidParameter("no pilot block satisfies the power constraint");
    bool first = true;
    for (const auto& block : blocks) {
        RateEstimate r = functional(block);
        if (first || r.bits_per_symbol > out.rate.bits_per_symbol) {
            out.block = block;
            out.rate = std::move(r);
            first = false;
        }
    }
    out.search_mode = "exhaustive";
    out.rate.pilot_mode = "exhaustive";
    return out;
}

enum class SweepParameter { tau, mu };

struct SweepRow {
    std::size_t value = 0;
    RateEstimate rate;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    std::size_t argmax = 0;  // index into rows
};

// Evaluates a rate functional across tau or mu values with a shared base
// seed; reports the full table and the argmax row.
inline SweepTable sweep_discrete(
    SweepParameter parameter, std::span<const std::size_t> range,
    const SystemConfig& base_config,
    const std::function<RateEstimate(const SystemConfig&)>& functional) {
    if (range.empty()) throw InvalidParameter("sweep range is empty");
    SweepTable table;
    for (std::size_t value : range) {
        SystemConfig config = base_config;
        if (parameter == SweepParameter::tau) {
            if (value >= config.sub_blocks) {
                throw InvalidParameter("sweep value tau = " + std::to_string(value) +
                                       " leaves no data sub-blocks");
            }
            config.training_blocks = value;
            config.set_equal_power_split(config.power);
        } else {
            if (value < 1 || value > config.symbols_per_block) {
                throw InvalidParameter("sweep value mu = " + std::to_string(value) +
                                       " is outside 1..m");
            }
            config.scd_pilots = value;
        }
        SweepRow row;
        row.value = value;
        row.rate = functional(config);
        table.rows.push_back(std::move(row));
    }
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
        if (table.rows[i].rate.bits_per_symbol >
            table.rows[table.argmax].rate.bits_per_symbol) {
            table.argmax = i;
        }
    }
    return table;
}

}  // namespace riscap
