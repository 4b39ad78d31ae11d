#include "dmpkit/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>
#include <vector>

#include "dmpkit/errors.hpp"

namespace dmpkit {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& token) {
    double value = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr != end)
        throw ParseError("not a number: '" + token + "'");
    return value;
}

void write_canonical(const json& value, std::string& out) {
    switch (value.type()) {
        case json::value_t::null:
            out += "null";
            return;
        case json::value_t::boolean:
            out += value.get<bool>() ? "true" : "false";
            return;
        case json::value_t::number_integer:
            out += std::to_string(value.get<std::int64_t>());
            return;
        case json::value_t::number_unsigned:
            out += std::to_string(value.get<std::uint64_t>());
            return;
        case json::value_t::number_float: {
            const double d = value.get<double>();
            // JSON has no representation for non-finite numbers.
            out += std::isfinite(d) ? format_double(d) : "null";
            return;
        }
        case json::value_t::string:
            out += json(value.get<std::string>()).dump();
            return;
        case json::value_t::array: {
            out += '[';
            bool first = true;
            for (const json& item : value) {
                if (!first) out += ',';
                first = false;
                write_canonical(item, out);
            }
            out += ']';
            return;
        }
        case json::value_t::object: {
            out += '{';
            bool first = true;
            for (const auto& [key, item] : value.items()) {
                if (!first) out += ',';
                first = false;
                out += json(key).dump();
                out += ':';
                write_canonical(item, out);
            }
            out += '}';
            return;
        }
        default:
            throw ParseError("unsupported json value type");
    }
}

std::string slurp_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw ParseError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw ParseError("cannot write " + path.string());
    out << text;
    if (!out.good()) throw ParseError("write failed: " + path.string());
}

json parse_json_text(const std::string& text, const fs::path& path) {
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded())
        throw ParseError("malformed json in " + path.string());
    return value;
}

// Strict object access: the caller enumerates every legal key up front.
void require_keys(const json& value, const std::vector<std::string>& keys,
                  const std::string& what) {
    if (!value.is_object()) throw ParseError(what + ": expected an object");
    for (const auto& [key, item] : value.items()) {
        (void)item;
        bool known = false;
        for (const std::string& k : keys) known = known || k == key;
        if (!known) throw ParseError(what + ": unknown key '" + key + "'");
    }
    for (const std::string& k : keys)
        if (!value.contains(k)) throw ParseError(what + ": missing key '" + k + "'");
}

double json_double(const json& value, const std::string& key) {
    const json& item = value.at(key);
    if (!item.is_number()) throw ParseError("'" + key + "' must be a number");
    return item.get<double>();
}

int json_int(const json& value, const std::string& key) {
    const json& item = value.at(key);
    if (!item.is_number_integer())
        throw ParseError("'" + key + "' must be an integer");
    return item.get<int>();
}

Eigen::VectorXd json_vector(const json& value, const std::string& key) {
    const json& item = value.at(key);
    if (!item.is_array()) throw ParseError("'" + key + "' must be an array");
    Eigen::VectorXd out(item.size());
    Eigen::Index i = 0;
    for (const json& entry : item) {
        if (!entry.is_number())
            throw ParseError("'" + key + "' must hold numbers");
        out(i++) = entry.get<double>();
    }
    return out;
}

Eigen::MatrixXd json_matrix(const json& value, const std::string& key) {
    const json& item = value.at(key);
    if (!item.is_array()) throw ParseError("'" + key + "' must be an array of rows");
    const Eigen::Index rows = static_cast<Eigen::Index>(item.size());
    Eigen::MatrixXd out;
    Eigen::Index r = 0;
    for (const json& row : item) {
        if (!row.is_array()) throw ParseError("'" + key + "' rows must be arrays");
        if (r == 0) out.resize(rows, static_cast<Eigen::Index>(row.size()));
        if (static_cast<Eigen::Index>(row.size()) != out.cols())
            throw ParseError("'" + key + "' rows differ in length");
        Eigen::Index c = 0;
        for (const json& entry : row) {
            if (!entry.is_number())
                throw ParseError("'" + key + "' must hold numbers");
            out(r, c++) = entry.get<double>();
        }
        ++r;
    }
    if (rows == 0) out.resize(0, 0);
    return out;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(row);
    }
    return out;
}

}  // namespace

std::string canonical_json(const json& value) {
    std::string out;
    write_canonical(value, out);
    out += '\n';
    return out;
}

json to_json(const Dmp& dmp) {
    json out;
    out["alpha_z"] = dmp.alpha_z;
    out["beta_z"] = dmp.beta_z;
    out["alpha_x"] = dmp.alpha_x;
    out["tau"] = dmp.tau;
    out["start"] = vector_to_json(dmp.start);
    out["goal"] = vector_to_json(dmp.goal);
    out["weights"] = matrix_to_json(dmp.weights);
    out["centers"] = vector_to_json(dmp.centers);
    out["widths"] = vector_to_json(dmp.widths);
    return out;
}

Dmp dmp_from_json(const json& value) {
    require_keys(value,
                 {"alpha_z", "beta_z", "alpha_x", "tau", "start", "goal",
                  "weights", "centers", "widths"},
                 "motion model");
    Dmp dmp;
    dmp.alpha_z = json_double(value, "alpha_z");
    dmp.beta_z = json_double(value, "beta_z");
    dmp.alpha_x = json_double(value, "alpha_x");
    dmp.tau = json_double(value, "tau");
    dmp.start = json_vector(value, "start");
    dmp.goal = json_vector(value, "goal");
    dmp.weights = json_matrix(value, "weights");
    dmp.centers = json_vector(value, "centers");
    dmp.widths = json_vector(value, "widths");
    try {
        validate(dmp);
    } catch (const std::invalid_argument& err) {
        throw ParseError(std::string("invalid motion model: ") + err.what());
    }
    return dmp;
}

void save_dmp(const fs::path& path, const Dmp& dmp) {
    spit_file(path, canonical_json(to_json(dmp)));
}

Dmp load_dmp(const fs::path& path) {
    return dmp_from_json(parse_json_text(slurp_file(path), path));
}

json to_json(const RnnModel& model) {
    json out;
    out["n_pre"] = model.n_pre;
    out["n_post"] = model.n_post;
    out["n_ch"] = model.n_ch;
    out["U"] = matrix_to_json(model.U);
    out["W"] = matrix_to_json(model.W);
    out["V"] = matrix_to_json(model.V);
    out["b"] = vector_to_json(model.b);
    out["c"] = vector_to_json(model.c);
    out["norm_mean"] = vector_to_json(model.norm_mean);
    out["norm_std"] = vector_to_json(model.norm_std);
    return out;
}

RnnModel rnn_from_json(const json& value) {
    require_keys(value,
                 {"n_pre", "n_post", "n_ch", "U", "W", "V", "b", "c",
                  "norm_mean", "norm_std"},
                 "detector model");
    RnnModel model;
    model.n_pre = json_int(value, "n_pre");
    model.n_post = json_int(value, "n_post");
    model.n_ch = json_int(value, "n_ch");
    model.U = json_matrix(value, "U");
    model.W = json_matrix(value, "W");
    model.V = json_matrix(value, "V");
    model.b = json_vector(value, "b");
    const Eigen::VectorXd c = json_vector(value, "c");
    if (c.size() != 2) throw ParseError("'c' must have two entries");
    model.c = c;
    model.norm_mean = json_vector(value, "norm_mean");
    model.norm_std = json_vector(value, "norm_std");
    try {
        validate(model);
    } catch (const std::invalid_argument& err) {
        throw ParseError(std::string("invalid detector model: ") + err.what());
    }
    return model;
}

void save_rnn(const fs::path& path, const RnnModel& model) {
    spit_file(path, canonical_json(to_json(model)));
}

RnnModel load_rnn(const fs::path& path) {
    return rnn_from_json(parse_json_text(slurp_file(path), path));
}

namespace {

void save_samples_csv(const fs::path& path, const Trajectory& traj,
                      const std::string& prefix, int first_index) {
    std::string text = "t";
    for (Eigen::Index c = 0; c < traj.samples.cols(); ++c)
        text += "," + prefix + std::to_string(first_index + static_cast<int>(c));
    text += '\n';
    for (Eigen::Index r = 0; r < traj.samples.rows(); ++r) {
        text += format_double(static_cast<double>(r) * traj.dt);
        for (Eigen::Index c = 0; c < traj.samples.cols(); ++c)
            text += "," + format_double(traj.samples(r, c));
        text += '\n';
    }
    spit_file(path, text);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string::size_type from = 0;
    while (true) {
        const auto comma = line.find(',', from);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(from));
            return fields;
        }
        fields.push_back(line.substr(from, comma - from));
        from = comma + 1;
    }
}

}  // namespace

void save_trajectory_csv(const fs::path& path, const Trajectory& traj) {
    save_samples_csv(path, traj, "ch", 0);
}

Trajectory load_trajectory_csv(const fs::path& path) {
    const std::string text = slurp_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.empty())
        throw ParseError(path.string() + ": missing header");
    const std::vector<std::string> header = split_fields(line);
    if (header.size() < 2 || header[0] != "t")
        throw ParseError(path.string() + ": header must be t plus channels");
    const auto cols = static_cast<Eigen::Index>(header.size() - 1);

    std::vector<double> times;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_fields(line);
        if (static_cast<Eigen::Index>(fields.size()) != cols + 1)
            throw ParseError(path.string() + ": ragged row");
        times.push_back(parse_double(fields[0]));
        for (Eigen::Index c = 0; c < cols; ++c)
            values.push_back(parse_double(fields[static_cast<std::size_t>(c) + 1]));
    }
    const auto rows = static_cast<Eigen::Index>(times.size());
    if (rows < 2) throw ParseError(path.string() + ": need at least two samples");

    Trajectory traj;
    traj.dt = times[1] - times[0];
    if (!(traj.dt > 0.0)) throw ParseError(path.string() + ": non-increasing time");
    for (Eigen::Index r = 1; r < rows; ++r) {
        const double step = times[static_cast<std::size_t>(r)] -
                            times[static_cast<std::size_t>(r - 1)];
        if (std::abs(step - traj.dt) >
            1e-9 * std::max(1.0, std::abs(times[static_cast<std::size_t>(r)])))
            throw ParseError(path.string() + ": uneven sample times");
    }
    traj.samples.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            traj.samples(r, c) = values[static_cast<std::size_t>(r * cols + c)];
    return traj;
}

void save_scenario_csv(const fs::path& path, const ScenarioResult& result) {
    const ScenarioLog& log = result.log;
    const Eigen::Index ch = log.y_c.cols();
    const bool wide = ch > 1;
    auto field_names = [&](const std::string& base) {
        std::string names;
        for (Eigen::Index c = 0; c < ch; ++c)
            names += "," + base + (wide ? std::to_string(c) : "");
        return names;
    };
    std::string text = "t" + field_names("y_u") + field_names("y_c") +
                       field_names("y_a") + field_names("acc") + ",tau_a" +
                       field_names("e") + ",x";
    text += '\n';
    for (Eigen::Index r = 0; r < log.t.size(); ++r) {
        text += format_double(log.t(r));
        auto append_row = [&](const Eigen::MatrixXd& m) {
            for (Eigen::Index c = 0; c < ch; ++c)
                text += "," + format_double(m(r, c));
        };
        append_row(log.y_u);
        append_row(log.y_c);
        append_row(log.y_a);
        append_row(log.acc);
        text += "," + format_double(log.tau_a(r));
        append_row(log.e);
        text += "," + format_double(log.x(r));
        text += '\n';
    }
    spit_file(path, text);
}

void save_recordings(const fs::path& dir,
                     const std::vector<Recording>& recordings) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ParseError("cannot create " + dir.string());
    json peaks = json::object();
    for (std::size_t i = 0; i < recordings.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "rec_%03zu.csv", i);
        save_samples_csv(dir / name, recordings[i].torques, "tau", 1);
        peaks[name] = static_cast<std::int64_t>(recordings[i].peak_index);
    }
    json sidecar;
    sidecar["peaks"] = peaks;
    spit_file(dir / "peaks.json", canonical_json(sidecar));
}

std::vector<Recording> load_recordings(const fs::path& dir) {
    const fs::path sidecar_path = dir / "peaks.json";
    const json sidecar = parse_json_text(slurp_file(sidecar_path), sidecar_path);
    require_keys(sidecar, {"peaks"}, "recording index");
    const json& peaks = sidecar.at("peaks");
    if (!peaks.is_object()) throw ParseError("'peaks' must map files to indices");

    std::vector<Recording> out;
    for (const auto& [name, peak] : peaks.items()) {
        if (!peak.is_number_integer())
            throw ParseError("peak index for '" + name + "' must be an integer");
        Recording rec;
        rec.torques = load_trajectory_csv(dir / name);
        rec.peak_index = peak.get<std::int64_t>();
        if (rec.peak_index < 0 || rec.peak_index >= rec.torques.samples.rows())
            throw ParseError("peak index for '" + name + "' is out of range");
        out.push_back(std::move(rec));
    }
    if (out.empty()) throw ParseError("no recordings listed in " + sidecar_path.string());
    return out;
}

}  // namespace dmpkit
