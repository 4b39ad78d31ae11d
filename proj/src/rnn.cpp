#include "dmpkit/rnn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

namespace dmpkit {

namespace {

constexpr double kProbFloor = 1e-12;
constexpr double kFlatStd = 1e-8;
constexpr double kArRho = 0.95;
// Max of exp(-k/3) sin(2 pi k / 5) over integer k, reached at k = 1; divides
// the damped-sine template so transient_amp is the deflection at the peak row.
const double kDampedPeak = std::exp(-1.0 / 3.0) * std::sin(2.0 * M_PI / 5.0);

Eigen::Vector2d softmax2(const Eigen::Vector2d& o) {
    const double m = std::max(o(0), o(1));
    Eigen::Vector2d e(std::exp(o(0) - m), std::exp(o(1) - m));
    return e / e.sum();
}

// Inputs enter every pass through the stored normalization.
Eigen::MatrixXd normalized(const RnnModel& model, const Eigen::MatrixXd& seq) {
    if (seq.cols() != model.n_ch)
        throw std::invalid_argument("rnn: sequence channel count mismatch");
    if (seq.rows() < 1) throw std::invalid_argument("rnn: empty sequence");
    if (model.norm_mean.size() == 0) return seq;
    Eigen::MatrixXd out = seq;
    out.rowwise() -= model.norm_mean.transpose();
    out.array().rowwise() /= model.norm_std.transpose().array();
    return out;
}

double window_weight(const LabeledWindow& w, double ratio) {
    return w.positive ? ratio : 1.0;
}

}  // namespace

void validate(const RnnModel& model) {
    if (model.n_ch < 1) throw std::invalid_argument("rnn: need at least one channel");
    if (model.n_pre < 1) throw std::invalid_argument("rnn: n_pre must be positive");
    if (model.n_post < 0) throw std::invalid_argument("rnn: n_post must be >= 0");
    if (model.U.rows() != model.n_ch || model.U.cols() != model.n_ch)
        throw std::invalid_argument("rnn: U must be n_ch x n_ch");
    if (model.W.rows() != model.n_ch || model.W.cols() != model.n_ch)
        throw std::invalid_argument("rnn: W must be n_ch x n_ch");
    if (model.V.rows() != 2 || model.V.cols() != model.n_ch)
        throw std::invalid_argument("rnn: V must be 2 x n_ch");
    if (model.b.size() != model.n_ch)
        throw std::invalid_argument("rnn: b must have n_ch entries");
    if (!model.U.allFinite() || !model.W.allFinite() || !model.V.allFinite() ||
        !model.b.allFinite() || !model.c.allFinite())
        throw std::invalid_argument("rnn: non-finite weights");
    const bool no_norm = model.norm_mean.size() == 0 && model.norm_std.size() == 0;
    if (!no_norm) {
        if (model.norm_mean.size() != model.n_ch || model.norm_std.size() != model.n_ch)
            throw std::invalid_argument("rnn: normalization size mismatch");
        if (!model.norm_mean.allFinite() || !model.norm_std.allFinite() ||
            (model.norm_std.array() <= 0.0).any())
            throw std::invalid_argument("rnn: bad normalization statistics");
    }
}

std::pair<Eigen::Vector2d, Eigen::VectorXd> forward(const RnnModel& model,
                                                    const Eigen::MatrixXd& seq) {
    const Eigen::MatrixXd x = normalized(model, seq);
    Eigen::VectorXd h =
        (model.b + model.U * x.row(0).transpose()).array().tanh().matrix();
    for (Eigen::Index t = 1; t < x.rows(); ++t)
        h = (model.b + model.W * h + model.U * x.row(t).transpose())
                .array()
                .tanh()
                .matrix();
    const Eigen::Vector2d y = softmax2(model.c + model.V * h);
    return {y, std::move(h)};
}

double loss(const RnnModel& model, const LabeledDataset& data) {
    if (data.windows.empty()) throw std::invalid_argument("rnn: empty batch");
    double total = 0.0;
    for (const LabeledWindow& w : data.windows) {
        const Eigen::Vector2d y = forward(model, w.seq).first;
        const double p = std::max(y(w.positive ? 0 : 1), kProbFloor);
        total += window_weight(w, data.ratio) * -std::log(p);
    }
    return total / static_cast<double>(data.windows.size());
}

RnnGradients gradients(const RnnModel& model, const LabeledDataset& data) {
    if (data.windows.empty()) throw std::invalid_argument("rnn: empty batch");
    const Eigen::Index n = model.n_ch;
    RnnGradients g;
    g.U = Eigen::MatrixXd::Zero(n, n);
    g.W = Eigen::MatrixXd::Zero(n, n);
    g.V = Eigen::MatrixXd::Zero(2, n);
    g.b = Eigen::VectorXd::Zero(n);
    g.c = Eigen::Vector2d::Zero();

    for (const LabeledWindow& w : data.windows) {
        const Eigen::MatrixXd x = normalized(model, w.seq);
        const Eigen::Index T = x.rows();
        Eigen::MatrixXd h(T, n);
        Eigen::VectorXd ht =
            (model.b + model.U * x.row(0).transpose()).array().tanh().matrix();
        h.row(0) = ht;
        for (Eigen::Index t = 1; t < T; ++t) {
            ht = (model.b + model.W * ht + model.U * x.row(t).transpose())
                     .array()
                     .tanh()
                     .matrix();
            h.row(t) = ht;
        }
        const Eigen::Vector2d y = softmax2(model.c + model.V * ht);

        Eigen::Vector2d target(w.positive ? 1.0 : 0.0, w.positive ? 0.0 : 1.0);
        const Eigen::Vector2d delta_o = window_weight(w, data.ratio) * (y - target);
        g.c += delta_o;
        g.V += delta_o * ht.transpose();

        Eigen::VectorXd dh = model.V.transpose() * delta_o;
        for (Eigen::Index t = T - 1; t >= 0; --t) {
            const Eigen::VectorXd dpre =
                (dh.array() * (1.0 - h.row(t).transpose().array().square()))
                    .matrix();
            g.b += dpre;
            g.U += dpre * x.row(t);
            if (t > 0) {
                g.W += dpre * h.row(t - 1);
                dh = model.W.transpose() * dpre;
            }
        }
    }

    const double inv = 1.0 / static_cast<double>(data.windows.size());
    g.U *= inv;
    g.W *= inv;
    g.V *= inv;
    g.b *= inv;
    g.c *= inv;
    return g;
}

DetectorMetrics classification_metrics(int tp, int tn, int fp, int fn) {
    DetectorMetrics m;
    m.tp = tp;
    m.tn = tn;
    m.fp = fp;
    m.fn = fn;
    m.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    m.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

RnnModel train(const LabeledDataset& data, int n_pre, int n_post,
               const TrainConfig& config) {
    if (data.windows.empty()) throw std::invalid_argument("rnn: empty batch");
    long positives = 0;
    for (const LabeledWindow& w : data.windows) positives += w.positive ? 1 : 0;
    if (positives == 0 || positives == static_cast<long>(data.windows.size()))
        throw std::invalid_argument("rnn: training needs both classes");
    if (config.lr < 0.0 || config.steps < 0)
        throw std::invalid_argument("rnn: bad training configuration");

    const Eigen::Index n = data.windows.front().seq.cols();
    for (const LabeledWindow& w : data.windows)
        if (w.seq.cols() != n || w.seq.rows() < 1)
            throw std::invalid_argument("rnn: inconsistent window shapes");

    RnnModel model;
    model.n_ch = static_cast<int>(n);
    model.n_pre = n_pre;
    model.n_post = n_post;

    // Per-channel batch statistics, population variance, flat channels kept
    // at unit scale.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    long count = 0;
    for (const LabeledWindow& w : data.windows) {
        mean += w.seq.colwise().sum().transpose();
        count += w.seq.rows();
    }
    mean /= static_cast<double>(count);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(n);
    for (const LabeledWindow& w : data.windows)
        sq += (w.seq.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    Eigen::VectorXd std_dev = (sq / static_cast<double>(count)).cwiseSqrt();
    for (Eigen::Index i = 0; i < n; ++i)
        if (std_dev(i) < kFlatStd) std_dev(i) = 1.0;
    model.norm_mean = mean;
    model.norm_std = std_dev;

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> init(-0.1, 0.1);
    auto fill = [&](double* p, Eigen::Index len) {
        for (Eigen::Index k = 0; k < len; ++k) p[k] = init(rng);
    };
    model.U.resize(n, n);
    model.W.resize(n, n);
    model.V.resize(2, n);
    model.b.resize(n);
    fill(model.U.data(), n * n);
    fill(model.W.data(), n * n);
    fill(model.V.data(), 2 * n);
    fill(model.b.data(), n);
    fill(model.c.data(), 2);
    validate(model);

    struct Block {
        double* param;
        const double* grad;
        Eigen::Index len;
    };
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Eigen::Index total = n * n * 2 + 2 * n + n + 2;
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(total);
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(total);

    for (int step = 1; step <= config.steps; ++step) {
        const RnnGradients g = gradients(model, data);
        const Block blocks[] = {
            {model.U.data(), g.U.data(), n * n},
            {model.W.data(), g.W.data(), n * n},
            {model.V.data(), g.V.data(), 2 * n},
            {model.b.data(), g.b.data(), n},
            {model.c.data(), g.c.data(), 2},
        };
        const double bc1 = 1.0 - std::pow(beta1, step);
        const double bc2 = 1.0 - std::pow(beta2, step);
        Eigen::Index at = 0;
        for (const Block& blk : blocks) {
            for (Eigen::Index k = 0; k < blk.len; ++k, ++at) {
                const double grad = blk.grad[k];
                m1(at) = beta1 * m1(at) + (1.0 - beta1) * grad;
                m2(at) = beta2 * m2(at) + (1.0 - beta2) * grad * grad;
                blk.param[k] -=
                    config.lr * (m1(at) / bc1) / (std::sqrt(m2(at) / bc2) + eps);
            }
        }
    }
    return model;
}

DetectorMetrics evaluate(const RnnModel& model, const LabeledDataset& data) {
    int tp = 0, tn = 0, fp = 0, fn = 0;
    for (const LabeledWindow& w : data.windows) {
        const bool hit = forward(model, w.seq).first(0) > 0.5;
        if (w.positive)
            hit ? ++tp : ++fn;
        else
            hit ? ++fp : ++tn;
    }
    return classification_metrics(tp, tn, fp, fn);
}

std::vector<Recording> synth_transients(const SynthConfig& config) {
    const bool damped = config.transient_shape == "damped-sine";
    if (!damped && config.transient_shape != "impulse")
        throw std::invalid_argument("unknown transient shape: " + config.transient_shape);
    if (config.n_recordings < 1 || config.n_samples < 4 || config.n_ch < 1)
        throw std::invalid_argument("synth: bad sizes");
    if (!(config.dt > 0.0) || config.noise_std < 0.0 || config.transient_amp < 0.0)
        throw std::invalid_argument("synth: bad parameters");

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> level(-0.1, 0.1);
    std::uniform_real_distribution<double> jitter(-0.02, 0.02);
    std::uniform_real_distribution<double> magnitude(0.5, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const Eigen::Index n = config.n_samples;
    const auto lo = static_cast<Eigen::Index>(0.55 * static_cast<double>(n));
    const auto hi = static_cast<Eigen::Index>(0.85 * static_cast<double>(n));
    std::uniform_int_distribution<long long> onset_at(lo, hi);
    // noise_std is the stationary noise-floor level; the AR(1) innovation is
    // scaled down so the floor comes out at exactly that std.
    const double drive = config.noise_std * std::sqrt(1.0 - kArRho * kArRho);

    // Recordings are repetitions of one nominal motion: each channel has a
    // common slow ramp, re-run with small per-recording offsets.
    Eigen::VectorXd base_start(config.n_ch), base_end(config.n_ch);
    for (int c = 0; c < config.n_ch; ++c) {
        base_start(c) = level(rng);
        base_end(c) = level(rng);
    }

    std::vector<Recording> out;
    out.reserve(static_cast<std::size_t>(config.n_recordings));
    for (int r = 0; r < config.n_recordings; ++r) {
        const auto onset = static_cast<Eigen::Index>(onset_at(rng));
        Recording rec;
        rec.peak_index = onset + 1;
        rec.torques.dt = config.dt;
        rec.torques.samples.resize(n, config.n_ch);
        for (int c = 0; c < config.n_ch; ++c) {
            const double start = base_start(c) + jitter(rng);
            const double end = base_end(c) + jitter(rng);
            // Random strength per channel, but a direction that is fixed per
            // channel: repeated events deflect each joint the same way.
            const double gamma =
                magnitude(rng) * (c % 2 == 0 ? 1.0 : -1.0);
            double colored = config.noise_std * gauss(rng);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j > 0) colored = kArRho * colored + drive * gauss(rng);
                const double ramp =
                    start + (end - start) * static_cast<double>(j) /
                                static_cast<double>(n - 1);
                double transient = 0.0;
                if (j >= onset) {
                    const double k = static_cast<double>(j - onset);
                    if (damped)
                        transient = config.transient_amp * gamma *
                                    std::exp(-k / 3.0) *
                                    std::sin(2.0 * M_PI * k / 5.0) / kDampedPeak;
                    else if (j == rec.peak_index)
                        transient = config.transient_amp * gamma;
                }
                rec.torques.samples(j, c) = ramp + colored + transient;
            }
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::pair<LabeledDataset, LabeledDataset> build_datasets(
    const std::vector<Recording>& recordings, int n_pre, int n_post,
    double ratio) {
    if (n_pre < 1 || n_post < 0) throw std::invalid_argument("datasets: bad window");
    if (ratio < 0.0) throw std::invalid_argument("datasets: negative ratio");
    if (recordings.empty()) throw std::invalid_argument("datasets: no recordings");
    const Eigen::Index T = n_pre + 1 + n_post;
    const Eigen::Index ch = recordings.front().torques.samples.cols();
    for (const Recording& rec : recordings) {
        const Eigen::Index n = rec.torques.samples.rows();
        if (rec.torques.samples.cols() != ch)
            throw std::invalid_argument("datasets: channel count mismatch");
        if (rec.peak_index - n_pre < 0 || rec.peak_index + n_post >= n)
            throw std::invalid_argument("datasets: window hangs off a recording");
    }

    std::pair<LabeledDataset, LabeledDataset> result;
    for (int parity = 0; parity < 2; ++parity) {
        LabeledDataset& split = parity == 0 ? result.first : result.second;
        std::vector<const Recording*> members;
        for (std::size_t i = 0; i < recordings.size(); ++i)
            if (static_cast<int>(i % 2) == parity) members.push_back(&recordings[i]);

        // One positive per recording, cut exactly around the labeled peak.
        std::vector<std::vector<Eigen::Index>> tiles(members.size());
        for (std::size_t i = 0; i < members.size(); ++i) {
            const Recording& rec = *members[i];
            LabeledWindow w;
            w.seq = rec.torques.samples.middleRows(rec.peak_index - n_pre, T);
            w.positive = true;
            split.windows.push_back(std::move(w));

            // Candidate negative tiles, left to right across the recording.
            // Stride T + 1 so successive tiles sweep every phase of the
            // window lattice; a stride of exactly T would leave T - 1 of the
            // offsets a streaming scan visits unrepresented in training.
            const Eigen::Index n = rec.torques.samples.rows();
            std::vector<Eigen::Index> cands;
            for (Eigen::Index s = rec.peak_index - n_pre - T; s >= 0; s -= T + 1)
                cands.push_back(s);
            std::reverse(cands.begin(), cands.end());
            for (Eigen::Index s = rec.peak_index + n_post + 1; s + T <= n; s += T + 1)
                cands.push_back(s);

            // Visit candidates in bit-reversed index order: any prefix then
            // spreads over the whole recording. Taking them in position
            // order would cluster small quotas next to the positive and
            // leave entire regions unrepresented among the negatives.
            int bits = 0;
            while ((std::size_t{1} << bits) < cands.size()) ++bits;
            for (std::size_t k = 0; k < (std::size_t{1} << bits); ++k) {
                std::size_t idx = 0;
                for (int b = 0; b < bits; ++b)
                    idx |= ((k >> b) & 1u) << (bits - 1 - b);
                if (idx < cands.size()) tiles[i].push_back(cands[idx]);
            }
        }

        const auto positives = static_cast<long>(members.size());
        const long target = static_cast<long>(std::llround(ratio * static_cast<double>(positives)));
        long taken = 0;
        for (std::size_t round = 0; taken < target; ++round) {
            bool any = false;
            for (std::size_t i = 0; i < members.size() && taken < target; ++i) {
                if (round >= tiles[i].size()) continue;
                any = true;
                LabeledWindow w;
                w.seq = members[i]->torques.samples.middleRows(tiles[i][round], T);
                w.positive = false;
                split.windows.push_back(std::move(w));
                ++taken;
            }
            if (!any) break;
        }
        split.ratio = positives > 0
                          ? static_cast<double>(taken) / static_cast<double>(positives)
                          : 0.0;
    }
    return result;
}

SweepResult sweep_window(const std::vector<Recording>& recordings,
                         const SweepConfig& config) {
    if (config.window_cap < 1) throw std::invalid_argument("sweep: bad window cap");
    SweepResult res;

    auto attempt = [&](int n_pre, int n_post) {
        auto [train_set, test_set] =
            build_datasets(recordings, n_pre, n_post, config.ratio);
        const RnnModel model = train(train_set, n_pre, n_post, config.train);
        SweepRow row;
        row.n_pre = n_pre;
        row.n_post = n_post;
        row.test = evaluate(model, test_set);
        res.report.push_back(row);
        return row.test.f1 == 1.0;
    };

    int pre = config.window_cap, post = config.window_cap;
    for (int k = 1; k <= config.window_cap; ++k) {
        if (attempt(k, k)) {
            res.reached_perfect = true;
            pre = k;
            post = k;
            break;
        }
    }
    if (res.reached_perfect)
        while (post > 0 && attempt(pre, post - 1)) --post;

    auto [final_train, final_test] =
        build_datasets(recordings, pre, post, config.final_ratio);
    res.model = train(final_train, pre, post, config.train);
    res.final_test = evaluate(res.model, final_test);
    res.n_pre = pre;
    res.n_post = post;
    return res;
}

std::vector<Eigen::Index> detect_stream(const RnnModel& model,
                                        const Trajectory& stream,
                                        double refractory) {
    validate(model);
    if (stream.samples.cols() != model.n_ch)
        throw std::invalid_argument("detect: channel count mismatch");
    if (!(stream.dt > 0.0)) throw std::invalid_argument("detect: bad dt");
    if (refractory < 0.0) throw std::invalid_argument("detect: negative refractory");

    const Eigen::Index T = model.window_length();
    const Eigen::Index rows = stream.samples.rows();
    const auto quiet =
        static_cast<Eigen::Index>(std::llround(refractory / stream.dt));
    std::vector<Eigen::Index> hits;
    Eigen::Index t = T - 1;
    while (t < rows) {
        const Eigen::Vector2d y =
            forward(model, stream.samples.middleRows(t - T + 1, T)).first;
        if (y(0) > 0.5) {
            hits.push_back(t);
            t += quiet + 1;
        } else {
            ++t;
        }
    }
    return hits;
}

}  // namespace dmpkit
