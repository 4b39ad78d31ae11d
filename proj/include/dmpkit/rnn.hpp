#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dmpkit/trajectory.hpp"

namespace dmpkit {

// Recurrent two-class sequence classifier over torque windows of length
// T = n_pre + 1 + n_post around a transient peak. Hidden size equals the
// channel count. Class 0 is "transient", class 1 is "no transient".
struct RnnModel {
    Eigen::MatrixXd U;  // n_ch x n_ch, input weights
    Eigen::MatrixXd W;  // n_ch x n_ch, recurrent weights
    Eigen::MatrixXd V;  // 2 x n_ch, output weights
    Eigen::VectorXd b;  // n_ch
    Eigen::Vector2d c;
    int n_pre = 5;
    int n_post = 3;
    int n_ch = 7;
    // Per-channel input normalization fixed at training time; empty = none.
    Eigen::VectorXd norm_mean;
    Eigen::VectorXd norm_std;

    int window_length() const { return n_pre + 1 + n_post; }
};

void validate(const RnnModel& model);

// One window plus its one-hot label; true = transient present.
struct LabeledWindow {
    Eigen::MatrixXd seq;  // T x n_ch
    bool positive = false;
};

struct LabeledDataset {
    std::vector<LabeledWindow> windows;
    double ratio = 1.0;  // negatives per positive, weights the loss
};

struct DetectorMetrics {
    int tp = 0;
    int tn = 0;
    int fp = 0;
    int fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

DetectorMetrics classification_metrics(int tp, int tn, int fp, int fn);

// h1 = tanh(b + U x1); ht = tanh(b + W h(t-1) + U xt); y = softmax(c + V hT).
// Returns the class probabilities and the final hidden state. Inputs are
// normalized with the model's stored statistics first.
std::pair<Eigen::Vector2d, Eigen::VectorXd> forward(const RnnModel& model,
                                                    const Eigen::MatrixXd& seq);

// Class-weighted cross-entropy averaged over the batch: positives weigh
// data.ratio, negatives 1. Probabilities are clamped at 1e-12 before log.
double loss(const RnnModel& model, const LabeledDataset& data);

struct RnnGradients {
    Eigen::MatrixXd U;
    Eigen::MatrixXd W;
    Eigen::MatrixXd V;
    Eigen::VectorXd b;
    Eigen::Vector2d c;
};

// Exact gradients of loss() via backpropagation through time.
RnnGradients gradients(const RnnModel& model, const LabeledDataset& data);

struct TrainConfig {
    double lr = 1e-2;
    int steps = 2000;
    std::uint64_t seed = 0;
};

// Full-batch Adam from small uniform random initialization. The dataset must
// contain both classes. Normalization statistics are taken from the data and
// stored in the model.
RnnModel train(const LabeledDataset& data, int n_pre, int n_post,
               const TrainConfig& config);

// Counts with positive = predicted probability of class 0 above 0.5.
DetectorMetrics evaluate(const RnnModel& model, const LabeledDataset& data);

// A raw torque log with the ground-truth transient peak sample.
struct Recording {
    Trajectory torques;
    Eigen::Index peak_index = -1;
};

struct SynthConfig {
    int n_recordings = 50;
    int n_samples = 2000;
    int n_ch = 7;
    double dt = 0.004;
    double noise_std = 0.02;
    double transient_amp = 0.2;
    std::string transient_shape = "damped-sine";  // or "impulse"
    std::uint64_t seed = 0;
};

// Slow-ramp baselines plus colored noise, one transient per recording at a
// random late time; the ground-truth peak index is recorded.
std::vector<Recording> synth_transients(const SynthConfig& config);

// Cuts positive windows [p - n_pre, p + n_post] around each peak and
// non-overlapping negative windows elsewhere, targeting `ratio` negatives per
// positive across the split; even-indexed recordings train, odd ones test.
// The achieved ratio is stored per split.
std::pair<LabeledDataset, LabeledDataset> build_datasets(
    const std::vector<Recording>& recordings, int n_pre, int n_post,
    double ratio);

struct SweepConfig {
    double ratio = 20.0;
    double final_ratio = 100.0;
    int window_cap = 30;
    TrainConfig train;
};

struct SweepRow {
    int n_pre = 0;
    int n_post = 0;
    DetectorMetrics test;
};

struct SweepResult {
    int n_pre = 0;
    int n_post = 0;
    RnnModel model;                // final model, retrained at final_ratio
    DetectorMetrics final_test;
    std::vector<SweepRow> report;  // every (n_pre, n_post) tried, in order
    bool reached_perfect = false;  // test F1 hit 1 during the search
};

// Two-phase window search: grow (n_pre, n_post) together from (1, 1) until
// test F1 reaches 1 (or the cap), then shrink n_post while F1 holds; retrain
// the chosen window at final_ratio.
SweepResult sweep_window(const std::vector<Recording>& recordings,
                         const SweepConfig& config);

// Causal sliding-window detection over a torque stream: emits the sample
// index t whenever the window [t-T+1, t] classifies positive, then stays
// quiet for `refractory` seconds.
std::vector<Eigen::Index> detect_stream(const RnnModel& model,
                                        const Trajectory& stream,
                                        double refractory = 0.5);

}  // namespace dmpkit
