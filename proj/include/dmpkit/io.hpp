#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "dmpkit/dmp.hpp"
#include "dmpkit/rnn.hpp"
#include "dmpkit/simulate.hpp"
#include "dmpkit/trajectory.hpp"

namespace dmpkit {

// Shortest decimal representation that round-trips the exact double. All
// file output goes through this so artifacts are diffable and reproducible.
std::string format_double(double value);

// Canonical JSON text: sorted keys, no whitespace except one trailing
// newline, numbers via format_double.
std::string canonical_json(const nlohmann::json& value);

nlohmann::json to_json(const Dmp& dmp);
Dmp dmp_from_json(const nlohmann::json& value);
void save_dmp(const std::filesystem::path& path, const Dmp& dmp);
Dmp load_dmp(const std::filesystem::path& path);

nlohmann::json to_json(const RnnModel& model);
RnnModel rnn_from_json(const nlohmann::json& value);
void save_rnn(const std::filesystem::path& path, const RnnModel& model);
RnnModel load_rnn(const std::filesystem::path& path);

// Trajectory CSV: header `t,ch0,..,chD-1`, one row per sample. The torque
// variant uses columns `tau1..tauD` instead.
void save_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory load_trajectory_csv(const std::filesystem::path& path);

// Scenario log CSV: columns t,y_u,y_c,y_a,acc,tau_a,e,x with vector
// quantities expanded per channel (suffix 0..D-1) when D > 1.
void save_scenario_csv(const std::filesystem::path& path, const ScenarioResult& result);

// One CSV per recording (t,tau1..tauD) plus a sidecar JSON with the
// ground-truth transient peak index of each file.
void save_recordings(const std::filesystem::path& dir,
                     const std::vector<Recording>& recordings);
std::vector<Recording> load_recordings(const std::filesystem::path& dir);

}  // namespace dmpkit
