#include "dmpkit/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dmpkit/errors.hpp"

namespace dmpkit {

using nlohmann::json;

namespace {

// Every section reader walks the document's keys so anything unknown is
// reported by name instead of silently ignored.
class Section {
public:
    Section(const json& value, std::string name) : value_(value), name_(std::move(name)) {
        if (!value_.is_object())
            throw ConfigError("'" + name_ + "' must be an object");
    }

    ~Section() = default;

    const json* find(const std::string& key) {
        seen_.push_back(key);
        const auto it = value_.find(key);
        return it == value_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [key, item] : value_.items()) {
            (void)item;
            bool known = false;
            for (const std::string& k : seen_) known = known || k == key;
            if (!known)
                throw ConfigError("'" + name_ + "' has no option '" + key + "'");
        }
    }

    void number(const std::string& key, double& out) {
        if (const json* item = find(key)) {
            if (!item->is_number())
                throw ConfigError("'" + name_ + "." + key + "' must be a number");
            out = item->get<double>();
        }
    }

    void integer(const std::string& key, int& out) {
        if (const json* item = find(key)) {
            if (!item->is_number_integer())
                throw ConfigError("'" + name_ + "." + key + "' must be an integer");
            out = item->get<int>();
        }
    }

    void seed(const std::string& key, std::uint64_t& out) {
        if (const json* item = find(key)) {
            if (!item->is_number_unsigned() &&
                !(item->is_number_integer() && item->get<std::int64_t>() >= 0))
                throw ConfigError("'" + name_ + "." + key +
                                  "' must be a non-negative integer");
            out = item->get<std::uint64_t>();
        }
    }

    void boolean(const std::string& key, bool& out) {
        if (const json* item = find(key)) {
            if (!item->is_boolean())
                throw ConfigError("'" + name_ + "." + key + "' must be true or false");
            out = item->get<bool>();
        }
    }

private:
    const json& value_;
    std::string name_;
    std::vector<std::string> seen_;
};

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

void read_dmp(const json& value, DmpSection& out) {
    Section section(value, "dmp");
    section.integer("n_basis", out.n_basis);
    section.number("alpha_z", out.alpha_z);
    section.number("alpha_x", out.alpha_x);
    section.number("tau", out.tau);
    section.finish();
    require(out.n_basis >= 2, "dmp.n_basis must be at least 2");
    require(out.alpha_z > 0.0, "dmp.alpha_z must be positive");
    require(out.alpha_x > 0.0, "dmp.alpha_x must be positive");
    require(out.tau >= 0.0, "dmp.tau must be non-negative");
}

void read_controller(const json& value, Gains& out) {
    Section section(value, "controller");
    section.number("k_p", out.k_p);
    section.number("k_v", out.k_v);
    section.number("k_c", out.k_c);
    section.number("alpha_e", out.alpha_e);
    section.number("k_t", out.k_t);
    section.boolean("feedforward", out.feedforward);
    section.number("a_max", out.a_max);
    section.number("velocity_filter_cutoff", out.velocity_filter_cutoff);
    section.finish();
    require(out.k_p > 0.0, "controller.k_p must be positive");
    require(out.k_v > 0.0, "controller.k_v must be positive");
    require(out.k_c >= 0.0, "controller.k_c must be non-negative");
    require(out.alpha_e > 0.0, "controller.alpha_e must be positive");
    require(out.k_t >= 0.0, "controller.k_t must be non-negative");
    require(out.a_max > 0.0, "controller.a_max must be positive");
    require(out.velocity_filter_cutoff > 0.0,
            "controller.velocity_filter_cutoff must be positive");
}

void read_noise(const json& value, NoiseConfig& out) {
    Section section(value, "sim.noise");
    section.number("pos_meas_std", out.pos_meas_std);
    section.number("vel_proc_std", out.vel_proc_std);
    section.number("kinematic_bias_std", out.kinematic_bias_std);
    section.number("kinematic_bias_rate", out.kinematic_bias_rate);
    section.seed("seed", out.seed);
    section.finish();
    require(out.pos_meas_std >= 0.0, "sim.noise.pos_meas_std must be non-negative");
    require(out.vel_proc_std >= 0.0, "sim.noise.vel_proc_std must be non-negative");
    require(out.kinematic_bias_std >= 0.0,
            "sim.noise.kinematic_bias_std must be non-negative");
    require(out.kinematic_bias_rate >= 0.0,
            "sim.noise.kinematic_bias_rate must be non-negative");
}

void read_perturbation(const json& value, Perturbation& out) {
    Section section(value, "sim.perturbation");
    if (const json* item = section.find("kind")) {
        if (!item->is_string())
            throw ConfigError("'sim.perturbation.kind' must be a string");
        try {
            out.kind = perturbation_kind_from_string(item->get<std::string>());
        } catch (const std::invalid_argument& err) {
            throw ConfigError(err.what());
        }
    }
    section.number("t_start", out.t_start);
    section.number("t_end", out.t_end);
    section.number("move_amplitude", out.move_amplitude);
    section.finish();
    require(out.t_start >= 0.0, "sim.perturbation.t_start must be non-negative");
    if (out.kind != PerturbationKind::None)
        require(out.t_end > out.t_start,
                "sim.perturbation.t_end must come after t_start");
}

void read_sim(const json& value, SimSection& out) {
    Section section(value, "sim");
    if (const json* item = section.find("noise")) read_noise(*item, out.noise);
    if (const json* item = section.find("perturbation"))
        read_perturbation(*item, out.perturbation);
    section.number("delay_ms", out.delay_ms);
    section.number("dt", out.dt);
    section.number("duration", out.duration);
    section.finish();
    require(out.delay_ms >= 0.0, "sim.delay_ms must be non-negative");
    require(out.dt > 0.0, "sim.dt must be positive");
    require(out.duration >= 0.0 && std::isfinite(out.duration),
            "sim.duration must be a non-negative finite number");
}

void read_detector(const json& value, DetectorSection& out) {
    Section section(value, "detector");
    section.number("lr", out.lr);
    section.integer("steps", out.steps);
    section.number("ratio", out.ratio);
    section.number("final_ratio", out.final_ratio);
    section.integer("window_cap", out.window_cap);
    section.integer("n_pre", out.n_pre);
    section.integer("n_post", out.n_post);
    section.seed("seed", out.seed);
    section.finish();
    require(out.lr > 0.0, "detector.lr must be positive");
    require(out.steps >= 0, "detector.steps must be non-negative");
    require(out.ratio > 0.0, "detector.ratio must be positive");
    require(out.final_ratio > 0.0, "detector.final_ratio must be positive");
    require(out.window_cap >= 1, "detector.window_cap must be at least 1");
    require(out.n_pre >= 1, "detector.n_pre must be at least 1");
    require(out.n_post >= 0, "detector.n_post must be non-negative");
}

}  // namespace

Config config_from_json(const json& value) {
    Config config;
    Section top(value, "configuration");
    if (const json* item = top.find("dmp")) read_dmp(*item, config.dmp);
    if (const json* item = top.find("controller"))
        read_controller(*item, config.controller);
    if (const json* item = top.find("sim")) read_sim(*item, config.sim);
    if (const json* item = top.find("detector"))
        read_detector(*item, config.detector);
    top.finish();
    return config;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw ParseError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    json value = json::parse(buf.str(), nullptr, false);
    if (value.is_discarded())
        throw ParseError("malformed json in " + path.string());
    return config_from_json(value);
}

}  // namespace dmpkit
