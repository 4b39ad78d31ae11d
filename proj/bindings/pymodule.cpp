#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dmpkit/correction.hpp"
#include "dmpkit/coupling.hpp"
#include "dmpkit/dmp.hpp"
#include "dmpkit/io.hpp"
#include "dmpkit/rnn.hpp"
#include "dmpkit/simulate.hpp"
#include "dmpkit/trajectory.hpp"

namespace py = pybind11;
using namespace dmpkit;

namespace {

ScenarioResult run_scenario_kwargs(const Dmp& dmp, const Gains& gains,
                                   const std::string& scenario, double duration,
                                   double dt, double delay, std::uint64_t seed,
                                   bool noise, double t_start, double t_end,
                                   double move_amplitude) {
    ScenarioConfig config;
    config.duration = duration;
    config.dt = dt;
    config.delay = delay;
    config.noise.seed = seed;
    if (!noise) {
        config.noise.pos_meas_std = 0.0;
        config.noise.vel_proc_std = 0.0;
        config.noise.kinematic_bias_std = 0.0;
    }
    config.perturbation.kind = perturbation_kind_from_string(scenario);
    config.perturbation.t_start = t_start;
    config.perturbation.t_end = t_end;
    config.perturbation.move_amplitude = move_amplitude;
    return run_scenario(dmp, gains, config);
}

std::vector<Recording> synth_kwargs(int n_recordings, int n_samples, int n_ch,
                                    double dt, double noise_std,
                                    double transient_amp,
                                    const std::string& transient_shape,
                                    std::uint64_t seed) {
    SynthConfig config;
    config.n_recordings = n_recordings;
    config.n_samples = n_samples;
    config.n_ch = n_ch;
    config.dt = dt;
    config.noise_std = noise_std;
    config.transient_amp = transient_amp;
    config.transient_shape = transient_shape;
    config.seed = seed;
    return synth_transients(config);
}

std::pair<RnnModel, DetectorMetrics> train_detector_kwargs(
    const std::vector<Recording>& recordings, int n_pre, int n_post,
    double ratio, double lr, int steps, std::uint64_t seed) {
    auto [train_set, test_set] = build_datasets(recordings, n_pre, n_post, ratio);
    TrainConfig config{lr, steps, seed};
    RnnModel model = train(train_set, n_pre, n_post, config);
    return {model, evaluate(model, test_set)};
}

SweepResult sweep_kwargs(const std::vector<Recording>& recordings, double ratio,
                         double final_ratio, int window_cap, double lr,
                         int steps, std::uint64_t seed) {
    SweepConfig config;
    config.ratio = ratio;
    config.final_ratio = final_ratio;
    config.window_cap = window_cap;
    config.train = TrainConfig{lr, steps, seed};
    return sweep_window(recordings, config);
}

}  // namespace

PYBIND11_MODULE(_dmpkit, m) {
    m.doc() = "Motion primitives: learn from demonstrations, repair with "
              "corrections, execute under temporal coupling, detect torque "
              "transients.";

    py::class_<Trajectory>(m, "Trajectory",
                           "Uniformly sampled multi-channel signal; row k holds "
                           "all channels at time k*dt.")
        .def(py::init([](const Eigen::MatrixXd& samples, double dt) {
                 Trajectory t;
                 t.samples = samples;
                 t.dt = dt;
                 return t;
             }),
             py::arg("samples"), py::arg("dt"))
        .def_readwrite("samples", &Trajectory::samples)
        .def_readwrite("dt", &Trajectory::dt)
        .def_property_readonly("rows", &Trajectory::rows)
        .def_property_readonly("channels", &Trajectory::channels)
        .def_property_readonly("duration", &Trajectory::duration)
        .def("__repr__", [](const Trajectory& t) {
            return "Trajectory(" + std::to_string(t.rows()) + " x " +
                   std::to_string(t.channels()) + " @ dt=" +
                   format_double(t.dt) + ")";
        });

    m.def("min_jerk", &min_jerk, py::arg("start"), py::arg("goal"),
          py::arg("duration"), py::arg("dt") = 0.004,
          "Rest-to-rest minimum-jerk profile from start to goal.");
    m.def("finite_difference", &finite_difference, py::arg("values"),
          py::arg("dt"),
          "Column-wise first derivative: central interior, one-sided ends.");

    py::class_<Dmp>(m, "Dmp",
                    "Point attractor with a phase-driven learned forcing term; "
                    "one weight vector per channel.")
        .def(py::init<>())
        .def_readwrite("weights", &Dmp::weights)
        .def_readwrite("centers", &Dmp::centers)
        .def_readwrite("widths", &Dmp::widths)
        .def_readwrite("goal", &Dmp::goal)
        .def_readwrite("start", &Dmp::start)
        .def_readwrite("tau", &Dmp::tau)
        .def_readwrite("alpha_z", &Dmp::alpha_z)
        .def_readwrite("beta_z", &Dmp::beta_z)
        .def_readwrite("alpha_x", &Dmp::alpha_x)
        .def_property_readonly("n_basis", &Dmp::n_basis)
        .def_property_readonly("channels", &Dmp::channels)
        .def("__repr__", [](const Dmp& d) {
            return "Dmp(" + std::to_string(d.channels()) + " channels, " +
                   std::to_string(d.n_basis()) + " basis, tau=" +
                   format_double(d.tau) + ")";
        });

    m.def(
        "fit",
        [](const Trajectory& demo, double tau, Eigen::Index n_basis,
           double alpha_z, double alpha_x) {
            return fit(demo, tau, n_basis, alpha_z, alpha_x);
        },
        py::arg("demo"), py::arg("tau") = 0.0, py::arg("n_basis") = 30,
        py::arg("alpha_z") = 25.0, py::arg("alpha_x") = 1.0,
        "Learn a primitive from a demonstration; tau <= 0 uses the "
        "demonstration's duration.");
    m.def("rollout", &rollout, py::arg("dmp"), py::arg("duration"),
          py::arg("dt") = 0.004,
          "Integrate the primitive; row k is the position after k steps.");

    py::class_<MergeResult>(m, "MergeResult",
                            "A repaired trajectory: smoothed prefix spliced "
                            "onto the untouched corrective tail.")
        .def_readonly("merged", &MergeResult::merged)
        .def_readonly("split_index", &MergeResult::split_index)
        .def_readonly("modified_prefix", &MergeResult::modified_prefix);

    m.def(
        "merge",
        [](const Trajectory& deficient, const Trajectory& corrective,
           double lam) { return merge({deficient, corrective, lam}); },
        py::arg("deficient"), py::arg("corrective"), py::arg("lam") = 1.0,
        "Splice a corrective demonstration onto a deficient one, smoothing "
        "the prefix into the junction.");
    m.def(
        "merge_and_refit",
        [](const Trajectory& deficient, const Trajectory& corrective,
           double lam, double tau, Eigen::Index n_basis, double alpha_z,
           double alpha_x) {
            return merge_and_refit({deficient, corrective, lam}, tau, n_basis,
                                   alpha_z, alpha_x);
        },
        py::arg("deficient"), py::arg("corrective"), py::arg("lam") = 1.0,
        py::arg("tau") = 0.0, py::arg("n_basis") = 30, py::arg("alpha_z") = 25.0,
        py::arg("alpha_x") = 1.0,
        "Merge, then learn a fresh primitive from the repaired trajectory.");

    py::class_<Gains>(m, "Gains", "Controller parameters for coupled execution.")
        .def(py::init<>())
        .def_readwrite("k_p", &Gains::k_p)
        .def_readwrite("k_v", &Gains::k_v)
        .def_readwrite("k_c", &Gains::k_c)
        .def_readwrite("alpha_e", &Gains::alpha_e)
        .def_readwrite("feedforward", &Gains::feedforward)
        .def_readwrite("a_max", &Gains::a_max)
        .def_readwrite("velocity_filter_cutoff", &Gains::velocity_filter_cutoff);
    m.def("proposed_gains", &proposed_gains,
          "Low PD gains made viable by feedforward; wide stability margins.");
    m.def("legacy_gains", &legacy_gains,
          "Stiff PD tracking without feedforward; margins collapse under delay.");
    m.def("closed_loop_poles", &closed_loop_poles, py::arg("gains"),
          "Roots of s^2 + k_v s + k_p.");
    m.def("delay_margin", &delay_margin, py::arg("gains"),
          "Largest transport delay the tracking loop tolerates, in seconds.");

    py::class_<Metrics>(m, "Metrics", "Summary numbers of one simulated run.")
        .def_readonly("max_abs_acceleration", &Metrics::max_abs_acceleration)
        .def_readonly("final_goal_error", &Metrics::final_goal_error)
        .def_readonly("recovery_time", &Metrics::recovery_time)
        .def_readonly("slowdown_ratio", &Metrics::slowdown_ratio);

    py::class_<ScenarioLog>(m, "ScenarioLog", "Per-step record of one run.")
        .def_readonly("t", &ScenarioLog::t)
        .def_readonly("y_u", &ScenarioLog::y_u)
        .def_readonly("y_c", &ScenarioLog::y_c)
        .def_readonly("y_a", &ScenarioLog::y_a)
        .def_readonly("acc", &ScenarioLog::acc)
        .def_readonly("tau_a", &ScenarioLog::tau_a)
        .def_readonly("e", &ScenarioLog::e)
        .def_readonly("x", &ScenarioLog::x);

    py::class_<ScenarioResult>(m, "ScenarioResult",
                               "Log and metrics of one closed-loop execution.")
        .def_readonly("log", &ScenarioResult::log)
        .def_readonly("metrics", &ScenarioResult::metrics)
        .def_readonly("diverged", &ScenarioResult::diverged)
        .def_readonly("saturated", &ScenarioResult::saturated)
        .def_readonly("tau", &ScenarioResult::tau);

    m.def("run_scenario", &run_scenario_kwargs, py::arg("dmp"), py::arg("gains"),
          py::arg("scenario") = "none", py::arg("duration") = 10.0,
          py::arg("dt") = 0.004, py::arg("delay") = 0.012, py::arg("seed") = 0,
          py::arg("noise") = true, py::arg("t_start") = 2.0,
          py::arg("t_end") = 3.0, py::arg("move_amplitude") = 0.05,
          py::call_guard<py::gil_scoped_release>(),
          "Execute a primitive against the simulated plant with noise, delay "
          "and an optional stop/move perturbation. Deterministic per seed.");

    py::class_<DetectorMetrics>(m, "DetectorMetrics",
                                "Confusion counts and derived scores.")
        .def_readonly("tp", &DetectorMetrics::tp)
        .def_readonly("tn", &DetectorMetrics::tn)
        .def_readonly("fp", &DetectorMetrics::fp)
        .def_readonly("fn", &DetectorMetrics::fn)
        .def_readonly("precision", &DetectorMetrics::precision)
        .def_readonly("recall", &DetectorMetrics::recall)
        .def_readonly("f1", &DetectorMetrics::f1);
    m.def("classification_metrics", &classification_metrics, py::arg("tp"),
          py::arg("tn"), py::arg("fp"), py::arg("fn"),
          "Precision, recall and F1 from confusion counts; degenerate "
          "denominators give zero.");

    py::class_<RnnModel>(m, "RnnModel",
                         "Recurrent two-class window classifier; class 0 is "
                         "'transient'.")
        .def(py::init<>())
        .def_readwrite("U", &RnnModel::U)
        .def_readwrite("W", &RnnModel::W)
        .def_readwrite("V", &RnnModel::V)
        .def_readwrite("b", &RnnModel::b)
        .def_readwrite("c", &RnnModel::c)
        .def_readwrite("n_pre", &RnnModel::n_pre)
        .def_readwrite("n_post", &RnnModel::n_post)
        .def_readwrite("n_ch", &RnnModel::n_ch)
        .def_readwrite("norm_mean", &RnnModel::norm_mean)
        .def_readwrite("norm_std", &RnnModel::norm_std)
        .def_property_readonly("window_length", &RnnModel::window_length);
    m.def("forward", &forward, py::arg("model"), py::arg("seq"),
          "Class probabilities and final hidden state for one window.");

    py::class_<Recording>(m, "Recording",
                          "A torque log with its ground-truth transient peak.")
        .def_readonly("torques", &Recording::torques)
        .def_readonly("peak_index", &Recording::peak_index);
    m.def("synth_transients", &synth_kwargs, py::arg("n_recordings") = 50,
          py::arg("n_samples") = 2000, py::arg("n_ch") = 7,
          py::arg("dt") = 0.004, py::arg("noise_std") = 0.02,
          py::arg("transient_amp") = 0.2,
          py::arg("transient_shape") = "damped-sine", py::arg("seed") = 0,
          py::call_guard<py::gil_scoped_release>(),
          "Slow-ramp baselines plus colored noise, one transient per "
          "recording at a random late time.");

    m.def("train_detector", &train_detector_kwargs, py::arg("recordings"),
          py::arg("n_pre") = 5, py::arg("n_post") = 3, py::arg("ratio") = 20.0,
          py::arg("lr") = 1e-2, py::arg("steps") = 2000, py::arg("seed") = 0,
          py::call_guard<py::gil_scoped_release>(),
          "Cut windows from the recordings (even indices train, odd test), "
          "train, and return the model with its held-out metrics.");

    py::class_<SweepRow>(m, "SweepRow", "One window size tried by the sweep.")
        .def_readonly("n_pre", &SweepRow::n_pre)
        .def_readonly("n_post", &SweepRow::n_post)
        .def_readonly("test", &SweepRow::test);
    py::class_<SweepResult>(m, "SweepResult",
                            "Chosen window, final model and search report.")
        .def_readonly("n_pre", &SweepResult::n_pre)
        .def_readonly("n_post", &SweepResult::n_post)
        .def_readonly("model", &SweepResult::model)
        .def_readonly("final_test", &SweepResult::final_test)
        .def_readonly("report", &SweepResult::report)
        .def_readonly("reached_perfect", &SweepResult::reached_perfect);
    m.def("sweep_window", &sweep_kwargs, py::arg("recordings"),
          py::arg("ratio") = 20.0, py::arg("final_ratio") = 100.0,
          py::arg("window_cap") = 30, py::arg("lr") = 1e-2,
          py::arg("steps") = 2000, py::arg("seed") = 0,
          py::call_guard<py::gil_scoped_release>(),
          "Grow the window until held-out F1 reaches 1, shrink the tail, "
          "retrain densely at final_ratio.");

    m.def("detect_stream", &detect_stream, py::arg("model"), py::arg("stream"),
          py::arg("refractory") = 0.5,
          "Causal sliding-window detection; emits the last sample index of "
          "each positive window, then holds off for `refractory` seconds.");

    m.def("save_dmp", &save_dmp, py::arg("path"), py::arg("dmp"));
    m.def("load_dmp", &load_dmp, py::arg("path"));
    m.def("save_rnn", &save_rnn, py::arg("path"), py::arg("model"));
    m.def("load_rnn", &load_rnn, py::arg("path"));
    m.def("save_trajectory_csv", &save_trajectory_csv, py::arg("path"),
          py::arg("traj"));
    m.def("load_trajectory_csv", &load_trajectory_csv, py::arg("path"));
    m.def("save_recordings", &save_recordings, py::arg("dir"),
          py::arg("recordings"));
    m.def("load_recordings", &load_recordings, py::arg("dir"));
}
