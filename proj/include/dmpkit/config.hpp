#pragma once

#include <cstdint>
#include <filesystem>

#include "json.hpp"

#include "dmpkit/coupling.hpp"
#include "dmpkit/rnn.hpp"
#include "dmpkit/simulate.hpp"

namespace dmpkit {

struct DmpSection {
    int n_basis = 30;
    double alpha_z = 25.0;
    double alpha_x = 1.0;
    double tau = 0.0;  // 0: take the demonstration duration
};

struct SimSection {
    NoiseConfig noise;
    Perturbation perturbation;
    double delay_ms = 12.0;
    double dt = 0.004;
    double duration = 10.0;
};

struct DetectorSection {
    double lr = 1e-2;
    int steps = 2000;
    double ratio = 20.0;
    double final_ratio = 100.0;
    int window_cap = 30;
    int n_pre = 5;
    int n_post = 3;
    std::uint64_t seed = 0;
};

// Tool-wide configuration; sections mirror the library defaults exactly.
// Unknown keys anywhere are rejected.
struct Config {
    DmpSection dmp;
    Gains controller;
    SimSection sim;
    DetectorSection detector;
};

Config config_from_json(const nlohmann::json& value);
Config load_config(const std::filesystem::path& path);

}  // namespace dmpkit
