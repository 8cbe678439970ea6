#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "riscap/riscap.hpp"

using namespace riscap;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string scheme;
    double snr_db = std::numeric_limits<double>::quiet_NaN();
    std::int64_t samples = -1;
    std::int64_t seed = -1;
    std::string output;
    unsigned threads = 1;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args, bool with_scheme) {
    cmd->add_option("--config", args.config_path, "configuration / scenario file")->required();
    cmd->add_option("--set", args.overrides, "override a config key, key=value (repeatable)");
    if (with_scheme) cmd->add_option("--scheme", args.scheme, "scheme tag");
    cmd->add_option("--snr-db", args.snr_db, "average power P in dB (equal split)");
    cmd->add_option("--samples", args.samples, "Monte-Carlo sample count");
    cmd->add_option("--seed", args.seed, "random seed");
    cmd->add_option("--output", args.output, "CSV output path");
    cmd->add_option("--threads", args.threads, "worker thread cap (results are unchanged)");
}

Scenario load_with_overrides(const CommonArgs& args) {
    Scenario sc = load_scenario(args.config_path);
    for (const std::string& kv : args.overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            throw InvalidParameter("--set expects key=value, got '" + kv + "'");
        }
        std::string key = kv.substr(0, eq);
        std::string value = kv.substr(eq + 1);
        const auto strip = [](std::string& s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
        };
        strip(key);
        strip(value);
        apply_scenario_key(sc, key, value);
    }
    if (!std::isnan(args.snr_db)) sc.config.set_equal_power_split(db_to_linear(args.snr_db));
    if (args.samples >= 0) sc.samples = static_cast<std::size_t>(args.samples);
    if (args.seed >= 0) sc.seed = static_cast<std::uint64_t>(args.seed);
    sc.threads = args.threads;
    return sc;
}

McSettings settings_of(const Scenario& sc) {
    McSettings mc;
    mc.samples = sc.samples;
    mc.seed = sc.seed;
    mc.draws_per_state = sc.draws_per_state;
    mc.threads = sc.threads;
    return mc;
}

void append_csv_row(const std::string& path, const SweepResultRow& row) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream f(path, std::ios::binary | std::ios::app);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    SweepResult one;
    one.rows.push_back(row);
    std::string body = emit_csv(one);
    if (!fresh) body = body.substr(body.find('\n') + 1);
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) throw IoError("write to '" + path + "' failed");
}

int run_rate(const CommonArgs& args) {
    const Scenario sc = load_with_overrides(args);
    if (args.scheme.empty()) throw InvalidParameter("rate needs --scheme");
    const Scheme scheme = parse_scheme(args.scheme);
    sc.config.validate();
    sc.config.require_data_blocks();
    const PilotSelection pilots = select_pilots(sc.config, sc.pilot_mode,
                                                sc.pilot_search_samples, sc.seed, sc.threads);
    const RateEstimate rate =
        evaluate_rate(sc.config, pilots.estimator, settings_of(sc), scheme, sc.evaluation);
    std::printf("%s %.17g %.17g %zu %llu\n", rate.scheme.c_str(), rate.bits_per_symbol,
                rate.std_err, rate.samples, static_cast<unsigned long long>(rate.seed));
    if (!args.output.empty()) {
        SweepResultRow row;
        row.axis = "power_db";
        row.axis_value = linear_to_db(sc.config.power);
        row.scheme = rate.scheme;
        row.rate_bits = rate.bits_per_symbol;
        row.std_err = rate.std_err;
        row.samples = rate.samples;
        row.seed = rate.seed;
        row.pilot_mode = pilots.mode;
        row.evaluation_mode = rate.evaluation_mode;
        append_csv_row(args.output, row);
    }
    return 0;
}

int run_limit(const CommonArgs& args) {
    const Scenario sc = load_with_overrides(args);
    if (args.scheme.empty()) throw InvalidParameter("limit needs --scheme");
    const double value = high_snr_limit(sc.config, parse_scheme(args.scheme));
    std::printf("%.12g\n", value);
    return 0;
}

int run_sweep(const CommonArgs& args) {
    Scenario sc = load_with_overrides(args);
    const SweepResult result = run_scenario(sc);
    if (args.output.empty()) {
        std::fputs(emit_csv(result).c_str(), stdout);
    } else {
        write_csv(result, args.output);
    }
    return 0;
}

int run_estimate_demo(const CommonArgs& args) {
    const Scenario sc = load_with_overrides(args);
    sc.config.validate();
    const PilotSelection pilots = select_pilots(sc.config, sc.pilot_mode,
                                                sc.pilot_search_samples, sc.seed, sc.threads);
    const Eigen::MatrixXcd& cov = pilots.estimator.error_cov;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(cov);
    std::printf("pilot_mode %s\n", pilots.mode.c_str());
    std::printf("tau %zu observations %td\n", sc.config.training_blocks,
                pilots.estimator.gain.cols());
    std::printf("error_cov dim %td trace %.17g\n", cov.rows(), cov.real().trace());
    std::printf("error_cov eig_min %.17g eig_max %.17g\n", es.eigenvalues().minCoeff(),
                es.eigenvalues().maxCoeff());
    return 0;
}

int run_validate(const CommonArgs& args) {
    const Scenario sc = load_with_overrides(args);
    sc.config.validate();
    std::printf("ok\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rate evaluation for an RIS-aided single-RF link"};
    app.require_subcommand(1);

    CommonArgs rate_args, limit_args, sweep_args, demo_args, validate_args;
    CLI::App* rate_cmd = app.add_subcommand("rate", "evaluate one scheme at one configuration");
    add_common_flags(rate_cmd, rate_args, true);
    CLI::App* limit_cmd = app.add_subcommand("limit", "closed-form high-SNR limit");
    add_common_flags(limit_cmd, limit_args, true);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a scenario sweep, emit CSV");
    add_common_flags(sweep_cmd, sweep_args, false);
    CLI::App* demo_cmd =
        app.add_subcommand("estimate-demo", "pilot selection and error-covariance summary");
    add_common_flags(demo_cmd, demo_args, false);
    CLI::App* validate_cmd = app.add_subcommand("validate", "check configuration invariants");
    add_common_flags(validate_cmd, validate_args, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (rate_cmd->parsed()) return run_rate(rate_args);
        if (limit_cmd->parsed()) return run_limit(limit_args);
        if (sweep_cmd->parsed()) return run_sweep(sweep_args);
        if (demo_cmd->parsed()) return run_estimate_demo(demo_args);
        if (validate_cmd->parsed()) return run_validate(validate_args);
    } catch (const CapacityExceeded& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const InvalidParameter& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 2;
}
