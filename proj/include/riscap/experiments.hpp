#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "riscap/rates.hpp"

namespace riscap {

enum class SweepAxis { power_db, tau, ell, antennas, control_rate_m };

inline std::string sweep_axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::power_db: return "power_db";
        case SweepAxis::tau: return "tau";
        case SweepAxis::ell: return "ell";
        case SweepAxis::antennas: return "antennas";
        case SweepAxis::control_rate_m: return "control_rate_m";
    }
    throw InvalidParameter("unknown sweep axis");
}

inline SweepAxis parse_sweep_axis(const std::string& name) {
    if (name == "power_db") return SweepAxis::power_db;
    if (name == "tau") return SweepAxis::tau;
    if (name == "ell") return SweepAxis::ell;
    if (name == "antennas") return SweepAxis::antennas;
    if (name == "control_rate_m") return SweepAxis::control_rate_m;
    throw InvalidParameter("unknown sweep axis '" + name + "'");
}

enum class EvaluationMode { exact, lower_bound, auto_select };
enum class PilotMode { auto_select, exhaustive, structured, none };

// One runnable experiment: a base configuration, an axis to sweep, and the
// schemes to evaluate at every axis value.
struct Scenario {
    std::string name = "scenario";
    SystemConfig config;
    std::vector<Scheme> schemes;
    SweepAxis sweep_axis = SweepAxis::power_db;
    std::vector<double> axis_values;
    std::size_t samples = 4000;
    std::uint64_t seed = 1;
    std::size_t draws_per_state = 100;
    EvaluationMode evaluation = EvaluationMode::auto_select;
    PilotMode pilot_mode = PilotMode::auto_select;
    std::size_t pilot_search_samples = 500;
    unsigned threads = 1;
};

struct SweepResultRow {
    std::string axis;
    double axis_value = 0.0;
    std::string scheme;
    double rate_bits = 0.0;
    double std_err = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::string pilot_mode = "none";
    std::string evaluation_mode = "exact";
};

struct SweepResult {
    std::vector<SweepResultRow> rows;
};

// Exact-formula dispatch; throws CapacityExceeded when the joint support does
// not fit, which auto mode turns into the lower-bound path.
inline RateEstimate evaluate_exact(const SystemConfig& config, const EstimatorModel& estimator,
                                   const McSettings& mc, Scheme scheme) {
    switch (scheme) {
        case Scheme::capacity_csit: return rate_capacity_csit(config, estimator, mc);
        case Scheme::capacity_csir: return rate_capacity_csir(config, estimator, mc);
        case Scheme::max_snr_csit: return rate_max_snr(config, estimator, mc, MaxSnrCsi::full);
        case Scheme::max_snr_csir: return rate_max_snr(config, estimator, mc, MaxSnrCsi::rx_only);
        case Scheme::perfect: return rate_perfect_csi(config, mc);
        case Scheme::max_snr_perfect: return rate_max_snr(config, estimator, mc, MaxSnrCsi::perfect);
        case Scheme::layered: return rate_layered(config, estimator, mc);
        case Scheme::layered_perfect: return rate_layered_perfect(config, mc);
    }
    throw InvalidParameter("unknown scheme");
}

inline RateEstimate evaluate_rate(const SystemConfig& config, const EstimatorModel& estimator,
                                  const McSettings& mc, Scheme scheme, EvaluationMode mode) {
    switch (mode) {
        case EvaluationMode::exact: return evaluate_exact(config, estimator, mc, scheme);
        case EvaluationMode::lower_bound: return lower_bound(config, estimator, mc, scheme);
        case EvaluationMode::auto_select:
            try {
                return evaluate_exact(config, estimator, mc, scheme);
            } catch (const CapacityExceeded&) {
                return lower_bound(config, estimator, mc, scheme);
            }
    }
    throw InvalidParameter("unknown evaluation mode");
}

// Pilot policy for one evaluation point. Exhaustive search ranks candidate
// blocks by the uniform-input separable lower bound at a reduced sample
// count; the winner is reused for every scheme at that point.
struct PilotSelection {
    EstimatorModel estimator;
    std::string mode = "none";
};

inline PilotSelection select_pilots(const SystemConfig& config, PilotMode requested,
                                    std::size_t search_samples, std::uint64_t seed,
                                    unsigned threads) {
    PilotSelection choice;
    if (config.training_blocks == 0) {
        choice.estimator = no_training_model(config.nk());
        choice.mode = "none";
        return choice;
    }
    PilotMode mode = requested;
    if (mode == PilotMode::auto_select) {
        mode = PilotMode::exhaustive;
        try {
            checked_pow(config.input_label_count(), config.training_blocks,
                        kDefaultEnumerationCap, "pilot block space |C|^tau");
        } catch (const CapacityExceeded&) {
            mode = PilotMode::structured;
        }
    }
    if (mode == PilotMode::structured || mode == PilotMode::none) {
        choice.estimator =
            build_estimator(structured_pilot_block(config), config.gamma_tau, config.rx_antennas);
        choice.mode = "structured";
        return choice;
    }
    McSettings search_mc;
    search_mc.samples = search_samples;
    search_mc.seed = seed;
    search_mc.threads = threads;
    const auto functional = [&](const PilotBlock& block) {
        const EstimatorModel model =
            build_estimator(block, config.gamma_tau, config.rx_antennas);
        return lower_bound(config, model, search_mc, Scheme::capacity_csir);
    };
    const PilotSearchResult found = search_pilots(config, functional);
    choice.estimator = build_estimator(found.block, config.gamma_tau, config.rx_antennas);
    choice.mode = found.search_mode;
    return choice;
}

namespace detail {

inline SystemConfig apply_axis(SystemConfig config, SweepAxis axis, double value) {
    switch (axis) {
        case SweepAxis::power_db:
            config.set_equal_power_split(db_to_linear(value));
            break;
        case SweepAxis::tau:
            config.training_blocks = static_cast<std::size_t>(value);
            config.set_equal_power_split(config.power);
            break;
        case SweepAxis::ell:
            config.sub_blocks = static_cast<std::size_t>(value);
            config.set_equal_power_split(config.power);
            break;
        case SweepAxis::antennas:
            config.rx_antennas = static_cast<std::size_t>(value);
            break;
        case SweepAxis::control_rate_m:
            config.symbols_per_block = static_cast<std::size_t>(value);
            break;
    }
    return config;
}

inline std::string sanitize_note(std::string text) {
    for (char& c : text) {
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    }
    return text;
}

}  // namespace detail

// Runs every (axis value, scheme) pair. Per-point failures become annotated
// rows; the sweep itself always completes.
inline SweepResult run_scenario(const Scenario& scenario) {
    if (scenario.axis_values.empty()) throw InvalidParameter("scenario has no axis values");
    SweepResult result;
    const std::string axis = sweep_axis_name(scenario.sweep_axis);
    for (double value : scenario.axis_values) {
        SystemConfig config = detail::apply_axis(scenario.config, scenario.sweep_axis, value);
        std::optional<PilotSelection> pilots;
        std::string point_error;
        try {
            config.validate();
            pilots = select_pilots(config, scenario.pilot_mode, scenario.pilot_search_samples,
                                   scenario.seed, scenario.threads);
        } catch (const std::exception& e) {
            point_error = e.what();
        }
        for (Scheme scheme : scenario.schemes) {
            SweepResultRow row;
            row.axis = axis;
            row.axis_value = value;
            row.scheme = scheme_name(scheme);
            row.seed = scenario.seed;
            if (!point_error.empty()) {
                row.rate_bits = std::numeric_limits<double>::quiet_NaN();
                row.std_err = std::numeric_limits<double>::quiet_NaN();
                row.evaluation_mode = "error: " + detail::sanitize_note(point_error);
                result.rows.push_back(std::move(row));
                continue;
            }
            McSettings mc;
            mc.samples = scenario.samples;
            mc.seed = scenario.seed;
            mc.draws_per_state = scenario.draws_per_state;
            mc.threads = scenario.threads;
            try {
                const RateEstimate rate =
                    evaluate_rate(config, pilots->estimator, mc, scheme, scenario.evaluation);
                row.rate_bits = rate.bits_per_symbol;
                row.std_err = rate.std_err;
                row.samples = rate.samples;
                row.evaluation_mode = rate.evaluation_mode;
                row.pilot_mode = pilots->mode;
            } catch (const std::exception& e) {
                row.rate_bits = std::numeric_limits<double>::quiet_NaN();
                row.std_err = std::numeric_limits<double>::quiet_NaN();
                row.pilot_mode = pilots->mode;
                row.evaluation_mode = "error: " + detail::sanitize_note(e.what());
            }
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

inline std::string format_full_precision(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// CSV with a fixed header, full-precision numbers, LF line endings.
inline std::string emit_csv(const SweepResult& result) {
    std::string out = "axis,axis_value,scheme,rate_bits,std_err,samples,seed,pilot_mode,evaluation_mode\n";
    for (const auto& row : result.rows) {
        out += row.axis;
        out += ',';
        out += format_full_precision(row.axis_value);
        out += ',';
        out += row.scheme;
        out += ',';
        out += format_full_precision(row.rate_bits);
        out += ',';
        out += format_full_precision(row.std_err);
        out += ',';
        out += std::to_string(row.samples);
        out += ',';
        out += std::to_string(row.seed);
        out += ',';
        out += row.pilot_mode;
        out += ',';
        out += row.evaluation_mode;
        out += '\n';
    }
    return out;
}

inline void write_csv(const SweepResult& result, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    const std::string body = emit_csv(result);
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) throw IoError("write to '" + path + "' failed");
}

// Parses emit_csv output back into rows (numeric fields bit-exact via %.17g).
inline SweepResult parse_csv(const std::string& text) {
    SweepResult result;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() < 9) throw IoError("malformed csv row: " + line);
        SweepResultRow row;
        row.axis = fields[0];
        row.axis_value = std::stod(fields[1]);
        row.scheme = fields[2];
        row.rate_bits = std::stod(fields[3]);
        row.std_err = std::stod(fields[4]);
        row.samples = std::stoull(fields[5]);
        row.seed = std::stoull(fields[6]);
        row.pilot_mode = fields[7];
        row.evaluation_mode = fields[8];
        result.rows.push_back(std::move(row));
    }
    return result;
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace detail

// Applies one `key = value` assignment. Keys mirror the configuration and
// scenario field names; power is accepted in dB as P_dB.
inline void apply_scenario_key(Scenario& scenario, const std::string& key,
                               const std::string& value) {
    if (key == "name") {
        scenario.name = value;
    } else if (key == "N") {
        scenario.config.rx_antennas = std::stoull(value);
    } else if (key == "K") {
        scenario.config.ris_elements = std::stoull(value);
    } else if (key == "A") {
        scenario.config.phase_set = make_phase_set(std::stoull(value));
    } else if (key == "constellation") {
        scenario.config.constellation = parse_constellation(value);
    } else if (key == "m") {
        scenario.config.symbols_per_block = std::stoull(value);
    } else if (key == "ell") {
        scenario.config.sub_blocks = std::stoull(value);
    } else if (key == "tau") {
        scenario.config.training_blocks = std::stoull(value);
    } else if (key == "mu") {
        scenario.config.scd_pilots = std::stoull(value);
    } else if (key == "P_dB") {
        scenario.config.set_equal_power_split(db_to_linear(std::stod(value)));
    } else if (key == "P") {
        scenario.config.set_equal_power_split(std::stod(value));
    } else if (key == "gamma_tau") {
        scenario.config.gamma_tau = std::stod(value);
    } else if (key == "gamma_d") {
        scenario.config.gamma_d = std::stod(value);
    } else if (key == "schemes") {
        scenario.schemes.clear();
        for (const auto& tag : detail::split_list(value)) {
            scenario.schemes.push_back(parse_scheme(tag));
        }
    } else if (key == "sweep_axis") {
        scenario.sweep_axis = parse_sweep_axis(value);
    } else if (key == "axis_values") {
        scenario.axis_values.clear();
        for (const auto& item : detail::split_list(value)) {
            scenario.axis_values.push_back(std::stod(item));
        }
    } else if (key == "samples") {
        scenario.samples = std::stoull(value);
    } else if (key == "seed") {
        scenario.seed = std::stoull(value);
    } else if (key == "draws_per_state") {
        scenario.draws_per_state = std::stoull(value);
    } else if (key == "evaluation") {
        if (value == "exact") {
            scenario.evaluation = EvaluationMode::exact;
        } else if (value == "lower-bound") {
            scenario.evaluation = EvaluationMode::lower_bound;
        } else if (value == "auto") {
            scenario.evaluation = EvaluationMode::auto_select;
        } else {
            throw InvalidParameter("unknown evaluation mode '" + value + "'");
        }
    } else if (key == "pilot_mode") {
        if (value == "auto") {
            scenario.pilot_mode = PilotMode::auto_select;
        } else if (value == "exhaustive") {
            scenario.pilot_mode = PilotMode::exhaustive;
        } else if (value == "structured") {
            scenario.pilot_mode = PilotMode::structured;
        } else if (value == "none") {
            scenario.pilot_mode = PilotMode::none;
        } else {
            throw InvalidParameter("unknown pilot mode '" + value + "'");
        }
    } else if (key == "pilot_search_samples") {
        scenario.pilot_search_samples = std::stoull(value);
    } else if (key == "threads") {
        scenario.threads = static_cast<unsigned>(std::stoul(value));
    } else {
        throw InvalidParameter("unknown scenario key '" + key + "'");
    }
}

inline Scenario parse_scenario_text(const std::string& text) {
    Scenario scenario;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidParameter("scenario line is not 'key = value': " + line);
        }
        apply_scenario_key(scenario, detail::trim(line.substr(0, eq)),
                           detail::trim(line.substr(eq + 1)));
    }
    return scenario;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open scenario file '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_scenario_text(buf.str());
}

}  // namespace riscap
