#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>

#include "natadv/errors.hpp"
#include "natadv/rng.hpp"

namespace natadv {

// CursorAssist: a desk-scale two-player cooperative task on the unit square.
// A human avatar carries one of two possible goal points (offsets from the
// avatar); only the human knows which one is active. The robot effector is
// rewarded for touching the active goal, penalised for distance to it and
// for touching the avatar body. Success is a run of consecutive contact
// steps.
struct CursorAssistConfig {
    int horizon = 50;
    double a_max = 0.05;
    double r_contact = 10.0;
    double w_dist = 2.0;
    double r_body = 20.0;
    double r_goal_radius = 0.15;
    double r_body_radius = 0.06;
    int success_streak = 10;
    std::array<std::array<double, 2>, 2> goal_offsets{{{-0.22, -0.14}, {0.22, -0.14}}};
    std::array<double, 2> human_start{0.5, 0.7};
    std::array<double, 2> effector_start{0.5, 0.2};

    void validate() const {
        if (horizon <= 0) throw ConfigError("env.horizon must be > 0");
        if (a_max <= 0.0) throw ConfigError("env.a_max must be > 0");
        if (r_goal_radius <= 0.0 || r_body_radius <= 0.0) throw ConfigError("env radii must be > 0");
        if (success_streak <= 0 || success_streak > horizon)
            throw ConfigError("env.success_streak must be in [1, horizon]");
        if (w_dist < 0.0 || r_contact < 0.0 || r_body < 0.0)
            throw ConfigError("env reward magnitudes must be >= 0");
        for (const auto& off : goal_offsets) {
            const double norm = std::sqrt(off[0] * off[0] + off[1] * off[1]);
            if (norm <= r_goal_radius + r_body_radius)
                throw ConfigError("env.goal_offsets must clear the body/goal contact radii");
        }
    }

    double reward_min() const { return -r_body - w_dist * std::sqrt(2.0); }
    double reward_max() const { return r_contact; }
};

struct EnvSpec {
    int state_dim = 0;
    int human_obs_dim = 0;
    int robot_obs_dim = 0;
    int human_action_dim = 0;
    int robot_action_dim = 0;
    int horizon = 0;
    std::pair<double, double> reward_range_hint{0.0, 0.0};
};

inline EnvSpec env_spec(const CursorAssistConfig& cfg) {
    cfg.validate();
    EnvSpec s;
    s.state_dim = 7; // two positions, goal index, step, contact streak
    s.robot_obs_dim = 4;
    s.human_obs_dim = 6;
    s.human_action_dim = 2;
    s.robot_action_dim = 2;
    s.horizon = cfg.horizon;
    s.reward_range_hint = {cfg.reward_min() * cfg.horizon, cfg.reward_max() * cfg.horizon};
    return s;
}

struct CursorAssistState {
    std::array<double, 2> human{};
    std::array<double, 2> effector{};
    int goal_index = 0;
    int step = 0;
    int contact_streak = 0;
};

inline std::array<double, 2> goal_point(const CursorAssistConfig& cfg, const CursorAssistState& s) {
    return {s.human[0] + cfg.goal_offsets[s.goal_index][0],
            s.human[1] + cfg.goal_offsets[s.goal_index][1]};
}

inline CursorAssistState env_reset(const CursorAssistConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(Rng::derive(seed, 0x9e5f));
    CursorAssistState s;
    s.human = cfg.human_start;
    s.effector = cfg.effector_start;
    s.goal_index = static_cast<int>(rng.next_u64() & 1ULL);
    return s;
}

struct StepResult {
    CursorAssistState state;
    double reward = 0.0;
    bool contact = false;
};

namespace detail {
inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }
inline double clamp_sym(double v, double m) { return v < -m ? -m : (v > m ? m : v); }
inline double dist2d(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1];
    return std::sqrt(dx * dx + dy * dy);
}
} // namespace detail

inline StepResult env_step(const CursorAssistConfig& cfg, const CursorAssistState& s,
                           std::span<const double> a_human, std::span<const double> a_robot) {
    StepResult out;
    CursorAssistState& n = out.state;
    n = s;
    for (int d = 0; d < 2; ++d) {
        n.human[d] = detail::clamp01(n.human[d] + detail::clamp_sym(a_human[d], cfg.a_max));
        n.effector[d] = detail::clamp01(n.effector[d] + detail::clamp_sym(a_robot[d], cfg.a_max));
    }
    n.step = s.step + 1;

    const auto goal = goal_point(cfg, n);
    const double d_goal = detail::dist2d(n.effector, goal);
    const double d_body = detail::dist2d(n.effector, n.human);
    const bool contact = d_goal <= cfg.r_goal_radius;
    const bool body_hit = d_body <= cfg.r_body_radius && !contact;

    double reward = -cfg.w_dist * d_goal;
    if (contact) reward += cfg.r_contact;
    if (body_hit) reward -= cfg.r_body;

    n.contact_streak = contact ? s.contact_streak + 1 : 0;
    out.reward = reward;
    out.contact = contact;
    return out;
}

// o_human = positions ++ one-hot goal; o_robot = positions only.
inline void env_observe(const CursorAssistState& s, std::span<double> o_human, std::span<double> o_robot) {
    if (o_human.size() != 6 || o_robot.size() != 4) throw ContractError("env_observe: bad buffer sizes");
    o_robot[0] = s.human[0];
    o_robot[1] = s.human[1];
    o_robot[2] = s.effector[0];
    o_robot[3] = s.effector[1];
    for (int i = 0; i < 4; ++i) o_human[i] = o_robot[i];
    o_human[4] = s.goal_index == 0 ? 1.0 : 0.0;
    o_human[5] = s.goal_index == 1 ? 1.0 : 0.0;
}

} // namespace natadv
