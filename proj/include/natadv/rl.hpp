#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "natadv/env.hpp"
#include "natadv/ppo.hpp"
#include "natadv/rollout.hpp"

namespace natadv {

struct NnConfig {
    std::vector<int> policy_hidden{64, 64};
    std::vector<int> critic_hidden{64, 64};
    double policy_lr = 5e-5;
    double critic_lr = 5e-5;
    double adam_eps = 1e-4;
    double log_std_init = -3.0;

    void validate() const {
        if (policy_hidden.empty() || critic_hidden.empty()) throw ConfigError("nn hidden sizes must be nonempty");
        if (policy_lr <= 0.0 || critic_lr <= 0.0) throw ConfigError("nn learning rates must be > 0");
    }
};

struct IterationMetrics {
    int iter = 0;
    double mean_return = 0.0;
    double success_rate = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double bc_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
};

inline std::string metrics_csv_header() {
    return "iter,return,success,policy_loss,value_loss,bc_loss,entropy,approx_kl";
}

inline std::string metrics_csv_row(const IterationMetrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", m.iter, m.mean_return,
                  m.success_rate, m.policy_loss, m.value_loss, m.bc_loss, m.entropy, m.approx_kl);
    return buf;
}

struct CoopPair {
    GaussianPolicy human;
    GaussianPolicy robot;
    Mlp human_critic;
    Mlp robot_critic;
    std::vector<IterationMetrics> curves;
};

namespace detail {

inline int episodes_per_iter(const CursorAssistConfig& env, const PpoConfig& ppo) {
    return std::max(1, (ppo.steps_per_iter + env.horizon - 1) / env.horizon);
}

// Aborts when the mean return sits below `floor` for `window` consecutive
// iterations.
struct DivergenceGuard {
    double floor;
    int window;
    int below = 0;

    void observe(double mean_return) {
        below = mean_return < floor ? below + 1 : 0;
        if (below >= window)
            throw TrainingError("training diverged: mean return below floor for " +
                                std::to_string(window) + " iterations");
    }
};

} // namespace detail

// Joint PPO on the shared task reward; both policies update every iteration.
// The returned human policy is the synthetic human for everything downstream.
inline CoopPair cooptimize(const CursorAssistConfig& env, const NnConfig& nn, const PpoConfig& ppo,
                           int iterations, std::uint64_t seed) {
    env.validate();
    nn.validate();
    ppo.validate();
    if (iterations <= 0) throw ConfigError("cooptimize: iterations must be > 0");

    const EnvSpec spec = env_spec(env);
    Rng init_h(Rng::derive(seed, 1)), init_r(Rng::derive(seed, 2));
    Rng init_hc(Rng::derive(seed, 3)), init_rc(Rng::derive(seed, 4));

    CoopPair pair{
        GaussianPolicy::make(spec.human_obs_dim, nn.policy_hidden, spec.human_action_dim, init_h, nn.log_std_init),
        GaussianPolicy::make(spec.robot_obs_dim, nn.policy_hidden, spec.robot_action_dim, init_r, nn.log_std_init),
        Mlp::make(spec.human_obs_dim, nn.critic_hidden, 1, init_hc, 0.01),
        Mlp::make(spec.robot_obs_dim, nn.critic_hidden, 1, init_rc, 0.01),
        {}};

    Adam adam_h(AdamConfig{.lr = nn.policy_lr, .eps = nn.adam_eps});
    Adam adam_r(AdamConfig{.lr = nn.policy_lr, .eps = nn.adam_eps});
    Adam adam_hc(AdamConfig{.lr = nn.critic_lr, .eps = nn.adam_eps});
    Adam adam_rc(AdamConfig{.lr = nn.critic_lr, .eps = nn.adam_eps});

    // Co-optimization runs plain PPO; the BC/RL mixing weights belong to
    // personalized robot training.
    PpoConfig coop_ppo = ppo;
    coop_ppo.rl_coeff = 1.0;
    coop_ppo.bc_coeff = 0.0;

    detail::DivergenceGuard guard{spec.reward_range_hint.first, 50};
    const int episodes = detail::episodes_per_iter(env, ppo);
    for (int iter = 0; iter < iterations; ++iter) {
        const RolloutBatch batch = rollout(env, pair.human, pair.robot, episodes, Rng::derive(seed, 0x1000 + iter));

        std::vector<EpisodeData> eh, er;
        for (const auto& t : batch.trajs) {
            eh.push_back(episode_view(t, AgentSide::human));
            er.push_back(episode_view(t, AgentSide::robot));
        }
        const TrainBatch bh = make_train_batch(eh, pair.human, pair.human_critic, coop_ppo);
        const TrainBatch br = make_train_batch(er, pair.robot, pair.robot_critic, coop_ppo);

        Rng rng_h(Rng::derive(seed, 0x2000 + iter));
        Rng rng_r(Rng::derive(seed, 0x3000 + iter));
        const PpoMetrics mh = ppo_update(pair.human, pair.human_critic, adam_h, adam_hc, bh, coop_ppo, rng_h);
        const PpoMetrics mr = ppo_update(pair.robot, pair.robot_critic, adam_r, adam_rc, br, coop_ppo, rng_r);

        IterationMetrics row;
        row.iter = iter;
        row.mean_return = batch.mean_return;
        row.success_rate = batch.success_rate;
        row.policy_loss = 0.5 * (mh.policy_loss + mr.policy_loss);
        row.value_loss = 0.5 * (mh.value_loss + mr.value_loss);
        row.entropy = 0.5 * (mh.entropy + mr.entropy);
        row.approx_kl = 0.5 * (mh.approx_kl + mr.approx_kl);
        pair.curves.push_back(row);
        guard.observe(batch.mean_return);
    }
    return pair;
}

// Returns the partner policy for one training episode.
using PartnerProvider = std::function<const GaussianPolicy&(int episode_index, Rng& partner_rng)>;

struct RobotTrainResult {
    GaussianPolicy robot;
    Mlp critic;
    std::vector<IterationMetrics> curves;
};

// Shared robot-side training loop used by personalized training and by
// robust fine-tuning (which only differ in how the partner is drawn).
inline RobotTrainResult train_robot_loop(const CursorAssistConfig& env, const PartnerProvider& partner,
                                         GaussianPolicy robot, Mlp critic, Adam adam_r, Adam adam_rc,
                                         const NnConfig& nn, const PpoConfig& ppo, int iterations,
                                         std::uint64_t seed, GaussianPolicy* bc_expert = nullptr) {
    env.validate();
    ppo.validate();
    if (iterations <= 0) throw ConfigError("train_robot_loop: iterations must be > 0");

    const EnvSpec spec = env_spec(env);
    detail::DivergenceGuard guard{spec.reward_range_hint.first, 50};
    const int episodes = detail::episodes_per_iter(env, ppo);

    RobotTrainResult out{std::move(robot), std::move(critic), {}};
    for (int iter = 0; iter < iterations; ++iter) {
        Rng partner_rng(Rng::derive(seed, 0x7000 + iter));
        const std::uint64_t iter_seed = Rng::derive(seed, 0x1000 + iter);

        std::vector<Trajectory> trajs;
        trajs.reserve(episodes);
        double ret = 0.0;
        int successes = 0;
        for (int e = 0; e < episodes; ++e) {
            const GaussianPolicy& h = partner(e, partner_rng);
            trajs.push_back(run_episode(env, h, out.robot, Rng::derive(iter_seed, e)));
            ret += trajs.back().episode_return();
            successes += trajs.back().success ? 1 : 0;
        }

        std::vector<EpisodeData> er;
        for (const auto& t : trajs) er.push_back(episode_view(t, AgentSide::robot));
        const TrainBatch br = make_train_batch(er, out.robot, out.critic, ppo);

        Rng rng_r(Rng::derive(seed, 0x3000 + iter));
        const PpoMetrics mr = ppo_update(out.robot, out.critic, adam_r, adam_rc, br, ppo, rng_r, bc_expert);

        IterationMetrics row;
        row.iter = iter;
        row.mean_return = ret / episodes;
        row.success_rate = static_cast<double>(successes) / episodes;
        row.policy_loss = mr.policy_loss;
        row.value_loss = mr.value_loss;
        row.bc_loss = mr.bc_loss;
        row.entropy = mr.entropy;
        row.approx_kl = mr.approx_kl;
        out.curves.push_back(row);
        guard.observe(row.mean_return);
    }
    return out;
}

// Trains a fresh robot against the frozen synthetic human; when an expert is
// given, its mean actions supply an auxiliary behavior-cloning target.
inline RobotTrainResult train_personalized(const CursorAssistConfig& env, const GaussianPolicy& human,
                                           const NnConfig& nn, const PpoConfig& ppo, int iterations,
                                           std::uint64_t seed, GaussianPolicy* bc_expert = nullptr) {
    nn.validate();
    const EnvSpec spec = env_spec(env);
    Rng init_r(Rng::derive(seed, 12)), init_rc(Rng::derive(seed, 13));
    GaussianPolicy robot =
        GaussianPolicy::make(spec.robot_obs_dim, nn.policy_hidden, spec.robot_action_dim, init_r, nn.log_std_init);
    Mlp critic = Mlp::make(spec.robot_obs_dim, nn.critic_hidden, 1, init_rc, 0.01);
    Adam adam_r(AdamConfig{.lr = nn.policy_lr, .eps = nn.adam_eps});
    Adam adam_rc(AdamConfig{.lr = nn.critic_lr, .eps = nn.adam_eps});

    PartnerProvider base_only = [&human](int, Rng&) -> const GaussianPolicy& { return human; };
    return train_robot_loop(env, base_only, std::move(robot), std::move(critic), adam_r, adam_rc, nn, ppo,
                            iterations, seed, bc_expert);
}

} // namespace natadv
