#pragma once

#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "natadv/errors.hpp"
#include "natadv/mat.hpp"

namespace natadv {

// One episode: per-step observations, actions and shared rewards.
struct Trajectory {
    Mat human_obs;      // (T, 6)
    Mat robot_obs;      // (T, 4)
    Mat human_actions;  // (T, 2)
    Mat robot_actions;  // (T, 2)
    std::vector<double> rewards;
    bool success = false;

    int length() const { return static_cast<int>(rewards.size()); }

    double episode_return() const {
        return std::accumulate(rewards.begin(), rewards.end(), 0.0);
    }
};

namespace detail {

inline nlohmann::json mat_to_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Mat mat_from_json(const nlohmann::json& rows, int expect_cols) {
    const int r = static_cast<int>(rows.size());
    Mat m(r, expect_cols);
    for (int i = 0; i < r; ++i) {
        const auto& row = rows.at(i);
        if (static_cast<int>(row.size()) != expect_cols)
            throw CorruptionError("trajectory record: inconsistent row width");
        for (int j = 0; j < expect_cols; ++j) m(i, j) = row.at(j).get<double>();
    }
    return m;
}

} // namespace detail

inline std::string trajectory_to_ndjson_line(const Trajectory& t) {
    nlohmann::json j;
    j["v"] = 1;
    j["human_obs"] = detail::mat_to_json(t.human_obs);
    j["robot_obs"] = detail::mat_to_json(t.robot_obs);
    j["human_actions"] = detail::mat_to_json(t.human_actions);
    j["robot_actions"] = detail::mat_to_json(t.robot_actions);
    j["rewards"] = t.rewards;
    j["success"] = t.success;
    return j.dump();
}

inline Trajectory trajectory_from_ndjson_line(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(std::string("bad trajectory record: ") + e.what());
    }
    if (!j.contains("v") || j["v"].get<int>() != 1)
        throw CorruptionError("unsupported trajectory schema version");
    Trajectory t;
    t.human_obs = detail::mat_from_json(j.at("human_obs"), 6);
    t.robot_obs = detail::mat_from_json(j.at("robot_obs"), 4);
    t.human_actions = detail::mat_from_json(j.at("human_actions"), 2);
    t.robot_actions = detail::mat_from_json(j.at("robot_actions"), 2);
    t.rewards = j.at("rewards").get<std::vector<double>>();
    t.success = j.at("success").get<bool>();
    const int n = t.length();
    if (t.human_obs.rows != n || t.robot_obs.rows != n || t.human_actions.rows != n ||
        t.robot_actions.rows != n)
        throw CorruptionError("trajectory record: sequence lengths differ");
    return t;
}

inline void save_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& trajs) {
    std::string out;
    for (const auto& t : trajs) {
        out += trajectory_to_ndjson_line(t);
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

inline std::vector<Trajectory> load_trajectories(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw NotFoundError("trajectory file not found: " + path.string());
    std::vector<Trajectory> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.push_back(trajectory_from_ndjson_line(line));
    }
    return out;
}

} // namespace natadv
