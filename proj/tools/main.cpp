#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "CLI11.hpp"
#include "json.hpp"

#include "dmpkit/config.hpp"
#include "dmpkit/correction.hpp"
#include "dmpkit/coupling.hpp"
#include "dmpkit/dmp.hpp"
#include "dmpkit/errors.hpp"
#include "dmpkit/io.hpp"
#include "dmpkit/rnn.hpp"
#include "dmpkit/simulate.hpp"
#include "dmpkit/trajectory.hpp"

namespace {

using dmpkit::Config;
using dmpkit::ConfigError;
using dmpkit::ParseError;
using nlohmann::json;

// Seed precedence: --seed flag, then the config file (only when it actually
// contains the key), then DMPKIT_SEED, then the built-in default.
std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("DMPKIT_SEED");
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    std::uint64_t value = 0;
    const char* end = raw + std::string_view(raw).size();
    auto [ptr, ec] = std::from_chars(raw, end, value);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("DMPKIT_SEED is not an unsigned integer: " +
                          std::string(raw));
    return value;
}

// The raw config document, for key-presence checks the typed loader erases.
json raw_config(const std::optional<std::string>& path) {
    if (!path) return json::object();
    std::ifstream in(*path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    json parsed = json::parse(buf.str(), nullptr, false);
    return parsed.is_discarded() ? json::object() : parsed;
}

bool has_key(const json& root, std::initializer_list<const char*> path) {
    const json* node = &root;
    for (const char* key : path) {
        if (!node->is_object() || !node->contains(key)) return false;
        node = &(*node)[key];
    }
    return true;
}

std::uint64_t resolve_seed(const CLI::Option* flag, std::uint64_t flag_value,
                           bool config_has_key, std::uint64_t config_value) {
    if (flag != nullptr && flag->count() > 0) return flag_value;
    if (config_has_key) return config_value;
    if (std::optional<std::uint64_t> env = env_seed()) return *env;
    return config_value;
}

void emit(bool json_mode, const json& summary, const std::string& human) {
    if (json_mode)
        std::cout << dmpkit::canonical_json(summary);
    else
        std::cout << human << "\n";
}

json metrics_json(const dmpkit::DetectorMetrics& m) {
    return json{{"tp", m.tp},
                {"tn", m.tn},
                {"fp", m.fp},
                {"fn", m.fn},
                {"precision", m.precision},
                {"recall", m.recall},
                {"f1", m.f1}};
}

json run_json(const dmpkit::ScenarioResult& result, std::uint64_t seed) {
    return json{{"seed", seed},
                {"max_abs_acceleration", result.metrics.max_abs_acceleration},
                {"final_goal_error", result.metrics.final_goal_error},
                {"recovery_time", result.metrics.recovery_time},
                {"slowdown_ratio", result.metrics.slowdown_ratio},
                {"diverged", result.diverged},
                {"saturated", result.saturated}};
}

// The stock scenario primitive: a half-metre single-channel reach over four
// seconds, fit with the configured basis.
dmpkit::Dmp scenario_dmp(const Config& config) {
    dmpkit::Trajectory demo =
        dmpkit::min_jerk(Eigen::VectorXd::Zero(1),
                         Eigen::VectorXd::Constant(1, 0.5), 4.0, 0.004);
    return dmpkit::fit(demo, config.dmp.tau, config.dmp.n_basis,
                       config.dmp.alpha_z, config.dmp.alpha_x);
}

std::string fmt(double value) { return dmpkit::format_double(value); }

int run(int argc, char** argv) {
    CLI::App app{"Motion primitive toolkit: learn, repair, execute, detect"};
    app.require_subcommand(1);

    std::string config_path;
    bool json_mode = false;
    app.add_option("--config", config_path, "JSON configuration file")
        ->check(CLI::ExistingFile);
    app.add_flag("--json", json_mode, "print a machine-readable JSON summary");

    // fit
    auto* fit_cmd =
        app.add_subcommand("fit", "learn a primitive from a demonstration CSV");
    fit_cmd->fallthrough();
    std::string fit_in, fit_out;
    double fit_tau = 0.0;
    fit_cmd->add_option("--in", fit_in, "demonstration trajectory CSV")->required();
    fit_cmd->add_option("--out", fit_out, "output primitive JSON")->required();
    auto* fit_tau_opt = fit_cmd->add_option(
        "--tau", fit_tau, "time constant (default: demonstration duration)");

    // rollout
    auto* roll_cmd =
        app.add_subcommand("rollout", "integrate a primitive and write the path");
    roll_cmd->fallthrough();
    std::string roll_dmp, roll_out;
    double roll_duration = 0.0, roll_dt = 0.0;
    roll_cmd->add_option("--dmp", roll_dmp, "primitive JSON")->required();
    roll_cmd->add_option("--out", roll_out, "output trajectory CSV")->required();
    auto* roll_duration_opt = roll_cmd->add_option(
        "--duration", roll_duration, "integration time (default: the primitive's tau)");
    auto* roll_dt_opt = roll_cmd->add_option("--dt", roll_dt, "step size");

    // merge
    auto* merge_cmd = app.add_subcommand(
        "merge", "splice a corrective demonstration into a deficient one");
    merge_cmd->fallthrough();
    std::string merge_base, merge_corr, merge_out, merge_dmp_out;
    double merge_lambda = 1.0;
    merge_cmd->add_option("--base", merge_base, "deficient trajectory CSV")->required();
    merge_cmd->add_option("--correction", merge_corr, "corrective trajectory CSV")
        ->required();
    merge_cmd->add_option("--lambda", merge_lambda,
                          "smoothness weight for the repaired prefix");
    merge_cmd->add_option("--out", merge_out, "merged trajectory CSV")->required();
    merge_cmd->add_option("--dmp-out", merge_dmp_out, "refit primitive JSON")
        ->required();

    // simulate
    auto* sim_cmd = app.add_subcommand(
        "simulate", "run the coupled controller against the simulated plant");
    sim_cmd->fallthrough();
    std::string sim_scenario, sim_controller, sim_dmp, sim_out;
    double sim_delay_ms = 0.0;
    bool sim_noise = true;
    std::uint64_t sim_seed = 0;
    int sim_repeats = 1;
    sim_cmd->add_option("--scenario", sim_scenario, "perturbation scenario")
        ->check(CLI::IsMember({"stop", "move", "none"}));
    sim_cmd->add_option("--controller", sim_controller, "gain preset")
        ->check(CLI::IsMember({"proposed", "legacy"}));
    auto* sim_delay_opt = sim_cmd->add_option("--delay-ms", sim_delay_ms,
                                              "measurement transport delay");
    sim_cmd->add_flag("--noise,!--no-noise", sim_noise,
                      "enable measurement/process noise (default on)");
    auto* sim_seed_opt = sim_cmd->add_option("--seed", sim_seed, "noise seed");
    sim_cmd->add_option("--dmp", sim_dmp,
                        "primitive JSON to execute (default: stock half-metre reach)");
    sim_cmd->add_option("--out", sim_out, "per-step log CSV (first run)");
    sim_cmd->add_option("--repeats", sim_repeats,
                        "number of runs with consecutive seeds")
        ->check(CLI::PositiveNumber);

    // gen-data
    auto* gen_cmd = app.add_subcommand(
        "gen-data", "generate labeled synthetic torque recordings");
    gen_cmd->fallthrough();
    std::string gen_out, gen_shape = "damped-sine";
    dmpkit::SynthConfig synth_defaults;
    int gen_n = synth_defaults.n_recordings;
    int gen_samples = static_cast<int>(synth_defaults.n_samples);
    int gen_channels = synth_defaults.n_ch;
    double gen_noise_std = synth_defaults.noise_std;
    double gen_amp = synth_defaults.transient_amp;
    double gen_dt = synth_defaults.dt;
    std::uint64_t gen_seed = 0;
    gen_cmd->add_option("--out", gen_out, "output directory")->required();
    gen_cmd->add_option("--n", gen_n, "number of recordings")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--samples", gen_samples, "samples per recording")
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--channels", gen_channels, "torque channels")
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--noise-std", gen_noise_std, "stationary noise floor");
    gen_cmd->add_option("--amp", gen_amp, "transient peak amplitude");
    gen_cmd->add_option("--shape", gen_shape, "transient shape")
        ->check(CLI::IsMember({"damped-sine", "impulse"}));
    gen_cmd->add_option("--dt", gen_dt, "sample period");
    auto* gen_seed_opt = gen_cmd->add_option("--seed", gen_seed, "generator seed");

    // train-detector
    auto* train_cmd = app.add_subcommand(
        "train-detector", "train the transient classifier on recordings");
    train_cmd->fallthrough();
    std::string train_data, train_out;
    int train_n_pre = 0, train_n_post = 0;
    double train_ratio = 0.0;
    std::uint64_t train_seed = 0;
    train_cmd->add_option("--data", train_data, "recordings directory")->required();
    train_cmd->add_option("--out", train_out, "output model JSON")->required();
    auto* train_pre_opt =
        train_cmd->add_option("--n-pre", train_n_pre, "window samples before the peak");
    auto* train_post_opt =
        train_cmd->add_option("--n-post", train_n_post, "window samples after the peak");
    auto* train_ratio_opt =
        train_cmd->add_option("--ratio", train_ratio, "negatives per positive");
    auto* train_seed_opt =
        train_cmd->add_option("--seed", train_seed, "weight-init seed");

    // sweep
    auto* sweep_cmd = app.add_subcommand(
        "sweep", "search the detection window, retrain densely, report the grid");
    sweep_cmd->fallthrough();
    std::string sweep_data, sweep_out, sweep_report;
    std::uint64_t sweep_seed = 0;
    sweep_cmd->add_option("--data", sweep_data, "recordings directory")->required();
    sweep_cmd->add_option("--out", sweep_out, "output model JSON")->required();
    sweep_cmd->add_option("--report", sweep_report, "grid report JSON file");
    auto* sweep_seed_opt =
        sweep_cmd->add_option("--seed", sweep_seed, "weight-init seed");

    // detect
    auto* det_cmd = app.add_subcommand(
        "detect", "stream a torque CSV through a trained detector");
    det_cmd->fallthrough();
    std::string det_model, det_in, det_out;
    double det_refractory = 0.5;
    det_cmd->add_option("--model", det_model, "detector model JSON")->required();
    det_cmd->add_option("--in", det_in, "torque stream CSV")->required();
    det_cmd->add_option("--refractory", det_refractory,
                        "seconds to stay quiet after a detection");
    det_cmd->add_option("--out", det_out, "detections CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::optional<std::string> config_file;
    if (!config_path.empty()) config_file = config_path;
    const Config config =
        config_file ? dmpkit::load_config(*config_file) : Config{};
    const json raw = raw_config(config_file);

    if (app.got_subcommand(fit_cmd)) {
        const dmpkit::Trajectory demo = dmpkit::load_trajectory_csv(fit_in);
        const double tau = fit_tau_opt->count() > 0 ? fit_tau : config.dmp.tau;
        std::vector<int> degenerate;
        const dmpkit::Dmp dmp =
            dmpkit::fit(demo, tau, config.dmp.n_basis, config.dmp.alpha_z,
                        config.dmp.alpha_x, &degenerate);
        dmpkit::save_dmp(fit_out, dmp);
        std::string human = "fit: " + std::to_string(dmp.channels()) +
                            " channel(s), " + std::to_string(dmp.n_basis()) +
                            " basis functions, tau " + fmt(dmp.tau) + " -> " +
                            fit_out;
        if (!degenerate.empty())
            human += " (constant channels: " + std::to_string(degenerate.size()) + ")";
        emit(json_mode, json{{"command", "fit"},
                             {"out", fit_out},
                             {"channels", dmp.channels()},
                             {"n_basis", dmp.n_basis()},
                             {"tau", dmp.tau},
                             {"degenerate_channels", degenerate}},
             human);
        return 0;
    }

    if (app.got_subcommand(roll_cmd)) {
        const dmpkit::Dmp dmp = dmpkit::load_dmp(roll_dmp);
        const double duration =
            roll_duration_opt->count() > 0 ? roll_duration : dmp.tau;
        const double dt = roll_dt_opt->count() > 0 ? roll_dt : config.sim.dt;
        const dmpkit::Trajectory traj = dmpkit::rollout(dmp, duration, dt);
        dmpkit::save_trajectory_csv(roll_out, traj);
        const Eigen::VectorXd final_row =
            traj.samples.row(traj.rows() - 1).transpose();
        const double goal_error = (final_row - dmp.goal).norm();
        std::vector<double> final_vec(final_row.data(),
                                      final_row.data() + final_row.size());
        emit(json_mode, json{{"command", "rollout"},
                             {"out", roll_out},
                             {"rows", traj.rows()},
                             {"duration", duration},
                             {"dt", dt},
                             {"final", final_vec},
                             {"goal_error", goal_error}},
             "rollout: " + std::to_string(traj.rows()) + " rows over " +
                 fmt(duration) + " s, goal error " + fmt(goal_error) + " -> " +
                 roll_out);
        return 0;
    }

    if (app.got_subcommand(merge_cmd)) {
        if (merge_lambda < 0.0)
            throw ConfigError("merge: lambda must be >= 0");
        dmpkit::CorrectionInput input;
        input.deficient = dmpkit::load_trajectory_csv(merge_base);
        input.corrective = dmpkit::load_trajectory_csv(merge_corr);
        input.lambda = merge_lambda;
        const auto [result, dmp] = dmpkit::merge_and_refit(
            input, config.dmp.tau, config.dmp.n_basis, config.dmp.alpha_z,
            config.dmp.alpha_x);
        dmpkit::save_trajectory_csv(merge_out, result.merged);
        dmpkit::save_dmp(merge_dmp_out, dmp);
        emit(json_mode,
             json{{"command", "merge"},
                  {"out", merge_out},
                  {"dmp_out", merge_dmp_out},
                  {"split_index", result.split_index},
                  {"rows", result.merged.rows()},
                  {"lambda", merge_lambda}},
             "merge: split at sample " + std::to_string(result.split_index) +
                 ", " + std::to_string(result.merged.rows()) + " rows -> " +
                 merge_out + ", primitive -> " + merge_dmp_out);
        return 0;
    }

    if (app.got_subcommand(sim_cmd)) {
        dmpkit::ScenarioConfig scenario;
        scenario.noise = config.sim.noise;
        scenario.perturbation = config.sim.perturbation;
        scenario.dt = config.sim.dt;
        scenario.duration = config.sim.duration;
        const double delay_ms =
            sim_delay_opt->count() > 0 ? sim_delay_ms : config.sim.delay_ms;
        if (delay_ms < 0.0) throw ConfigError("simulate: delay must be >= 0");
        scenario.delay = delay_ms / 1000.0;
        if (!sim_scenario.empty())
            scenario.perturbation.kind =
                dmpkit::perturbation_kind_from_string(sim_scenario);
        if (!sim_noise) {
            scenario.noise.pos_meas_std = 0.0;
            scenario.noise.vel_proc_std = 0.0;
            scenario.noise.kinematic_bias_std = 0.0;
        }
        const std::uint64_t base_seed =
            resolve_seed(sim_seed_opt, sim_seed,
                         has_key(raw, {"sim", "noise", "seed"}),
                         config.sim.noise.seed);

        dmpkit::Gains gains = config.controller;
        if (sim_controller == "proposed") gains = dmpkit::proposed_gains();
        if (sim_controller == "legacy") gains = dmpkit::legacy_gains();

        const dmpkit::Dmp dmp =
            sim_dmp.empty() ? scenario_dmp(config) : dmpkit::load_dmp(sim_dmp);

        // Batches fan out to a worker pool; results aggregate in seed order.
        std::vector<std::future<dmpkit::ScenarioResult>> futures;
        futures.reserve(static_cast<std::size_t>(sim_repeats));
        for (int i = 0; i < sim_repeats; ++i) {
            dmpkit::ScenarioConfig run_config = scenario;
            run_config.noise.seed = base_seed + static_cast<std::uint64_t>(i);
            futures.push_back(std::async(std::launch::async, [&dmp, &gains,
                                                              run_config]() {
                return dmpkit::run_scenario(dmp, gains, run_config);
            }));
        }

        json runs = json::array();
        std::string human;
        bool any_diverged = false;
        for (int i = 0; i < sim_repeats; ++i) {
            const dmpkit::ScenarioResult result = futures[static_cast<std::size_t>(i)].get();
            const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
            runs.push_back(run_json(result, seed));
            any_diverged = any_diverged || result.diverged;
            if (i == 0 && !sim_out.empty())
                dmpkit::save_scenario_csv(sim_out, result);
            if (!human.empty()) human += "\n";
            human += "run(seed " + std::to_string(seed) + "): max |acc| " +
                     fmt(result.metrics.max_abs_acceleration) + ", final error " +
                     fmt(result.metrics.final_goal_error) + ", recovery " +
                     fmt(result.metrics.recovery_time) + " s" +
                     (result.diverged ? " [DIVERGED]" : "") +
                     (result.saturated ? " [saturated]" : "");
        }
        emit(json_mode,
             json{{"command", "simulate"},
                  {"scenario", to_string(scenario.perturbation.kind)},
                  {"controller",
                   sim_controller.empty() ? "config" : sim_controller},
                  {"delay_ms", delay_ms},
                  {"noise", sim_noise},
                  {"seed", base_seed},
                  {"repeats", sim_repeats},
                  {"diverged", any_diverged},
                  {"runs", runs}},
             human);
        return 0;
    }

    if (app.got_subcommand(gen_cmd)) {
        dmpkit::SynthConfig synth;
        synth.n_recordings = gen_n;
        synth.n_samples = gen_samples;
        synth.n_ch = gen_channels;
        synth.dt = gen_dt;
        synth.noise_std = gen_noise_std;
        synth.transient_amp = gen_amp;
        synth.transient_shape = gen_shape;
        synth.seed = resolve_seed(gen_seed_opt, gen_seed, false, 0);
        const std::vector<dmpkit::Recording> recordings =
            dmpkit::synth_transients(synth);
        dmpkit::save_recordings(gen_out, recordings);
        emit(json_mode, json{{"command", "gen-data"},
                             {"dir", gen_out},
                             {"recordings", gen_n},
                             {"samples", gen_samples},
                             {"channels", gen_channels},
                             {"shape", gen_shape},
                             {"seed", synth.seed}},
             "gen-data: " + std::to_string(gen_n) + " recordings (" +
                 std::to_string(gen_samples) + " samples x " +
                 std::to_string(gen_channels) + " channels) -> " + gen_out);
        return 0;
    }

    if (app.got_subcommand(train_cmd)) {
        const std::vector<dmpkit::Recording> recordings =
            dmpkit::load_recordings(train_data);
        const int n_pre =
            train_pre_opt->count() > 0 ? train_n_pre : config.detector.n_pre;
        const int n_post =
            train_post_opt->count() > 0 ? train_n_post : config.detector.n_post;
        const double ratio =
            train_ratio_opt->count() > 0 ? train_ratio : config.detector.ratio;
        const auto [train_set, test_set] =
            dmpkit::build_datasets(recordings, n_pre, n_post, ratio);
        dmpkit::TrainConfig tc;
        tc.lr = config.detector.lr;
        tc.steps = config.detector.steps;
        tc.seed = resolve_seed(train_seed_opt, train_seed,
                               has_key(raw, {"detector", "seed"}),
                               config.detector.seed);
        const dmpkit::RnnModel model =
            dmpkit::train(train_set, n_pre, n_post, tc);
        const dmpkit::DetectorMetrics held_out =
            dmpkit::evaluate(model, test_set);
        dmpkit::save_rnn(train_out, model);
        emit(json_mode,
             json{{"command", "train-detector"},
                  {"out", train_out},
                  {"window", json::array({n_pre, n_post})},
                  {"train_windows", train_set.windows.size()},
                  {"test", metrics_json(held_out)}},
             "train-detector: window (" + std::to_string(n_pre) + "," +
                 std::to_string(n_post) + "), held-out F1 " +
                 fmt(held_out.f1) + " -> " + train_out);
        return 0;
    }

    if (app.got_subcommand(sweep_cmd)) {
        const std::vector<dmpkit::Recording> recordings =
            dmpkit::load_recordings(sweep_data);
        dmpkit::SweepConfig sc;
        sc.ratio = config.detector.ratio;
        sc.final_ratio = config.detector.final_ratio;
        sc.window_cap = config.detector.window_cap;
        sc.train.lr = config.detector.lr;
        sc.train.steps = config.detector.steps;
        sc.train.seed = resolve_seed(sweep_seed_opt, sweep_seed,
                                     has_key(raw, {"detector", "seed"}),
                                     config.detector.seed);
        const dmpkit::SweepResult result = dmpkit::sweep_window(recordings, sc);
        dmpkit::save_rnn(sweep_out, result.model);
        json report = json::array();
        for (const dmpkit::SweepRow& row : result.report)
            report.push_back(json{{"n_pre", row.n_pre},
                                  {"n_post", row.n_post},
                                  {"test", metrics_json(row.test)}});
        if (!sweep_report.empty()) {
            std::ofstream out(sweep_report, std::ios::binary);
            if (!out) throw ParseError("cannot write " + sweep_report);
            out << dmpkit::canonical_json(json{{"report", report}});
        }
        emit(json_mode,
             json{{"command", "sweep"},
                  {"out", sweep_out},
                  {"window", json::array({result.n_pre, result.n_post})},
                  {"reached_perfect", result.reached_perfect},
                  {"final", metrics_json(result.final_test)},
                  {"report", report}},
             "sweep: chose window (" + std::to_string(result.n_pre) + "," +
                 std::to_string(result.n_post) + ")" +
                 (result.reached_perfect ? "" : " [never reached F1=1]") +
                 ", final F1 " + fmt(result.final_test.f1) + " -> " + sweep_out);
        return 0;
    }

    if (app.got_subcommand(det_cmd)) {
        if (det_refractory < 0.0)
            throw ConfigError("detect: refractory must be >= 0");
        const dmpkit::RnnModel model = dmpkit::load_rnn(det_model);
        const dmpkit::Trajectory stream = dmpkit::load_trajectory_csv(det_in);
        const std::vector<Eigen::Index> hits =
            dmpkit::detect_stream(model, stream, det_refractory);
        json detections = json::array();
        std::string human;
        for (Eigen::Index sample : hits) {
            const double t = static_cast<double>(sample) * stream.dt;
            detections.push_back(json{{"sample", sample}, {"t", t}});
            if (!human.empty()) human += "\n";
            human += "detection at sample " + std::to_string(sample) + " (t=" +
                     fmt(t) + ")";
        }
        if (human.empty()) human = "no detections";
        if (!det_out.empty()) {
            std::ofstream out(det_out, std::ios::binary);
            if (!out) throw ParseError("cannot write " + det_out);
            out << "sample,t\n";
            for (Eigen::Index sample : hits)
                out << sample << ","
                    << fmt(static_cast<double>(sample) * stream.dt) << "\n";
        }
        emit(json_mode, json{{"command", "detect"},
                             {"count", hits.size()},
                             {"detections", detections}},
             human);
        return 0;
    }

    return 2;  // unreachable: a subcommand is required
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const dmpkit::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
