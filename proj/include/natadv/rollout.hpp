#pragma once

#include <cstdint>
#include <vector>

#include "natadv/env.hpp"
#include "natadv/nn.hpp"
#include "natadv/trajectory.hpp"

namespace natadv {

struct RolloutBatch {
    std::vector<Trajectory> trajs;
    double mean_return = 0.0;
    double success_rate = 0.0;
};

// Runs one seeded episode. Episode seed streams: 0 -> reset, 1 -> human
// actions, 2 -> robot actions.
inline Trajectory run_episode(const CursorAssistConfig& cfg, const GaussianPolicy& human,
                              const GaussianPolicy& robot, std::uint64_t episode_seed,
                              bool stochastic = true) {
    const EnvSpec spec = env_spec(cfg);
    if (human.obs_dim() != spec.human_obs_dim || human.act_dim() != spec.human_action_dim)
        throw ContractError("rollout: human policy dims do not match EnvSpec");
    if (robot.obs_dim() != spec.robot_obs_dim || robot.act_dim() != spec.robot_action_dim)
        throw ContractError("rollout: robot policy dims do not match EnvSpec");

    Rng human_rng(Rng::derive(episode_seed, 1));
    Rng robot_rng(Rng::derive(episode_seed, 2));

    CursorAssistState state = env_reset(cfg, episode_seed);
    const int T = cfg.horizon;
    Trajectory t;
    t.human_obs = Mat(T, 6);
    t.robot_obs = Mat(T, 4);
    t.human_actions = Mat(T, 2);
    t.robot_actions = Mat(T, 2);
    t.rewards.resize(T);

    std::vector<double> oH(6), oR(4), aH(2), aR(2);
    for (int step = 0; step < T; ++step) {
        env_observe(state, oH, oR);
        human.act(oH, human_rng, stochastic, aH);
        robot.act(oR, robot_rng, stochastic, aR);
        for (int j = 0; j < 6; ++j) t.human_obs(step, j) = oH[j];
        for (int j = 0; j < 4; ++j) t.robot_obs(step, j) = oR[j];
        for (int j = 0; j < 2; ++j) {
            t.human_actions(step, j) = aH[j];
            t.robot_actions(step, j) = aR[j];
        }
        StepResult r = env_step(cfg, state, aH, aR);
        t.rewards[step] = r.reward;
        state = r.state;
        if (state.contact_streak >= cfg.success_streak) t.success = true;
    }
    return t;
}

inline RolloutBatch rollout(const CursorAssistConfig& cfg, const GaussianPolicy& human,
                            const GaussianPolicy& robot, int n_episodes, std::uint64_t seed,
                            bool stochastic = true) {
    if (n_episodes <= 0) throw ContractError("rollout: n_episodes must be > 0");
    RolloutBatch out;
    out.trajs.reserve(n_episodes);
    double ret = 0.0;
    int succ = 0;
    for (int i = 0; i < n_episodes; ++i) {
        out.trajs.push_back(run_episode(cfg, human, robot, Rng::derive(seed, i), stochastic));
        ret += out.trajs.back().episode_return();
        succ += out.trajs.back().success ? 1 : 0;
    }
    out.mean_return = ret / n_episodes;
    out.success_rate = static_cast<double>(succ) / n_episodes;
    return out;
}

} // namespace natadv
