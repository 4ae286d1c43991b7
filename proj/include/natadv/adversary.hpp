#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "natadv/frontier.hpp"
#include "natadv/mmd.hpp"
#include "natadv/naturalness.hpp"
#include "natadv/rl.hpp"

namespace natadv {

struct AdversaryConfig {
    double lambda = 0.0;
    MetricKind metric = MetricKind::ls_gan;
    int disc_updates_per_iter = 1;
    PpoConfig ppo;
    int iterations = 120;
    std::uint64_t seed = 1;
    int eval_episodes = 40;
    // Replay reservoir of past adversary features for discriminator updates;
    // half of each agent batch is drawn from it so the discriminator keeps
    // covering every region the adversary has visited. 0 disables replay.
    int disc_replay_capacity = 20000;
    DiscConfig disc;
    MmdConfig mmd;

    void validate() const {
        if (lambda < 0.0) throw ConfigError("adversary.lambda must be >= 0");
        if (iterations <= 0) throw ConfigError("adversary.iterations must be > 0");
        if (eval_episodes <= 0) throw ConfigError("adversary.eval_episodes must be > 0");
        if (disc_replay_capacity < 0) throw ConfigError("adversary.disc_replay_capacity must be >= 0");
        ppo.validate();
        disc.validate();
        mmd.validate();
    }
};

// Per-step shaped reward for the adversarial human: inverted task reward
// minus the lambda-weighted divergence penalty. The chi-square penalty is the
// squared discriminator score; the KL penalty is the score itself (the
// estimated log density ratio). lambda = 0 reduces exactly to -env_reward.
inline double adversary_reward(double env_reward, double d_score, double lambda, MetricKind metric) {
    if (lambda == 0.0) return -env_reward;
    switch (metric) {
    case MetricKind::ls_gan: return -env_reward - lambda * d_score * d_score;
    case MetricKind::kl_logistic: return -env_reward - lambda * d_score;
    case MetricKind::mmd: return -env_reward; // episode-level penalty applied separately
    }
    return -env_reward;
}

struct AdversaryResult {
    GaussianPolicy policy;
    std::optional<Discriminator> discriminator; // absent for the mmd metric
    double naturalness = 0.0;
    double adversarialness = 0.0; // meaningful only when `normalized`
    bool normalized = false;
    double raw_mean_robot_return = 0.0;
    double eval_success_rate = 0.0;
    double canonical_accuracy = 1.0;
    bool mode_collapse_warning = false;
    double mmd_scale = 0.0; // rho used for the MMD naturalness map
    std::vector<IterationMetrics> curves;
};

// Trains the adversarial human against a frozen robot: one PPO step on the
// shaped reward, then discriminator step(s) on fresh adversarial vs canonical
// batches, for `iterations` rounds. Evaluation runs on a seed stream disjoint
// from every training stream.
inline AdversaryResult train_adversary(const CursorAssistConfig& env, const GaussianPolicy& robot,
                                       const CanonicalDataset& canonical, const AdversaryConfig& cfg,
                                       const NnConfig& nn,
                                       const GaussianPolicy* init_human = nullptr,
                                       const std::optional<Normalization>& norm = std::nullopt) {
    env.validate();
    cfg.validate();
    nn.validate();
    const EnvSpec spec = env_spec(env);

    GaussianPolicy adversary = [&] {
        if (init_human) {
            if (init_human->obs_dim() != spec.human_obs_dim || init_human->act_dim() != spec.human_action_dim)
                throw ContractError("train_adversary: init human dims do not match EnvSpec");
            return *init_human;
        }
        Rng rng(Rng::derive(cfg.seed, 0xAD));
        return GaussianPolicy::make(spec.human_obs_dim, nn.policy_hidden, spec.human_action_dim, rng,
                                    nn.log_std_init);
    }();
    Rng critic_rng(Rng::derive(cfg.seed, 0xAC));
    Mlp critic = Mlp::make(spec.human_obs_dim, nn.critic_hidden, 1, critic_rng, 0.01);

    Adam adam_p(AdamConfig{.lr = nn.policy_lr, .eps = nn.adam_eps});
    Adam adam_c(AdamConfig{.lr = nn.critic_lr, .eps = nn.adam_eps});

    const bool uses_disc = cfg.metric != MetricKind::mmd;
    Discriminator disc = uses_disc ? Discriminator::make(cfg.disc, canonical, cfg.seed)
                                   : Discriminator{}; // unused for mmd
    const double mmd_scale = cfg.metric == MetricKind::mmd
                                 ? mmd_naturalness_scale(canonical.features, cfg.mmd)
                                 : 0.0;

    PpoConfig adv_ppo = cfg.ppo;
    adv_ppo.rl_coeff = 1.0;
    adv_ppo.bc_coeff = 0.0;

    AdversaryResult result{std::move(adversary), std::nullopt, 0, 0, false, 0, 0, 1.0, false, mmd_scale, {}};
    const int episodes = detail::episodes_per_iter(env, adv_ppo);
    std::vector<std::vector<double>> replay;
    std::uint64_t replay_seen = 0;

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const RolloutBatch batch =
            rollout(env, result.policy, robot, episodes, Rng::derive(cfg.seed, 0x1000 + iter));

        // Shaped rewards for the adversary.
        std::vector<EpisodeData> eps;
        eps.reserve(batch.trajs.size());
        for (const auto& t : batch.trajs) {
            EpisodeData e = episode_view(t, AgentSide::human);
            if (cfg.lambda > 0.0 && uses_disc) {
                const Mat scores = disc.scores(trajectory_features(t));
                for (int s = 0; s < static_cast<int>(e.rewards.size()); ++s)
                    e.rewards[s] = adversary_reward(e.rewards[s], scores(s, 0), cfg.lambda, cfg.metric);
            } else {
                for (double& r : e.rewards) r = -r;
                if (cfg.lambda > 0.0 && cfg.metric == MetricKind::mmd)
                    e.rewards.back() -= cfg.lambda * mmd2(trajectory_features(t), canonical.features, cfg.mmd);
            }
            eps.push_back(std::move(e));
        }

        const TrainBatch tb = make_train_batch(eps, result.policy, critic, adv_ppo);
        Rng update_rng(Rng::derive(cfg.seed, 0x2000 + iter));
        const PpoMetrics pm = ppo_update(result.policy, critic, adam_p, adam_c, tb, adv_ppo, update_rng);

        double disc_loss = 0.0;
        if (uses_disc) {
            Rng disc_rng(Rng::derive(cfg.seed, 0x4000 + iter));
            const Mat adv_features = stack_features(batch.trajs);
            // Reservoir-sample this iteration's features into the replay pool.
            if (cfg.disc_replay_capacity > 0) {
                Rng res_rng(Rng::derive(cfg.seed, 0x6000 + iter));
                for (int i = 0; i < adv_features.rows; ++i) {
                    if (static_cast<int>(replay.size()) < cfg.disc_replay_capacity) {
                        replay.emplace_back(adv_features.row(i), adv_features.row(i) + adv_features.cols);
                    } else {
                        const std::uint64_t slot = res_rng.uniform_int(++replay_seen);
                        if (slot < replay.size())
                            replay[slot].assign(adv_features.row(i), adv_features.row(i) + adv_features.cols);
                    }
                }
                replay_seen += adv_features.rows;
            }
            for (int u = 0; u < cfg.disc_updates_per_iter; ++u) {
                Mat agent(cfg.disc.batch, adv_features.cols);
                const int fresh = replay.empty() ? cfg.disc.batch : cfg.disc.batch / 2;
                for (int i = 0; i < cfg.disc.batch; ++i) {
                    if (i < fresh) {
                        const int src = static_cast<int>(disc_rng.uniform_int(adv_features.rows));
                        for (int j = 0; j < agent.cols; ++j) agent(i, j) = adv_features(src, j);
                    } else {
                        const auto& row = replay[disc_rng.uniform_int(replay.size())];
                        for (int j = 0; j < agent.cols; ++j) agent(i, j) = row[j];
                    }
                }
                const Mat expert = canonical.sample_features(cfg.disc.batch, disc_rng);
                disc_loss = disc.update(agent, expert, disc_rng);
            }
            Rng acc_rng(Rng::derive(cfg.seed, 0x5000 + iter));
            result.canonical_accuracy =
                discriminator_canonical_accuracy(disc, canonical.sample_features(256, acc_rng));
            if (result.canonical_accuracy < 0.6) result.mode_collapse_warning = true;
        }

        IterationMetrics row;
        row.iter = iter;
        row.mean_return = batch.mean_return; // robot task return, not the shaped reward
        row.success_rate = batch.success_rate;
        row.policy_loss = pm.policy_loss;
        row.value_loss = disc_loss;
        row.entropy = pm.entropy;
        row.approx_kl = pm.approx_kl;
        result.curves.push_back(row);
    }

    // Held-out evaluation on a dedicated seed stream.
    const RolloutBatch eval =
        rollout(env, result.policy, robot, cfg.eval_episodes, Rng::derive(cfg.seed, 0xE7A1));
    result.raw_mean_robot_return = eval.mean_return;
    result.eval_success_rate = eval.success_rate;
    if (uses_disc) {
        result.naturalness = naturalness_score(disc, eval.trajs);
    } else {
        const double m2 = mmd2(stack_features(eval.trajs), canonical.features, cfg.mmd);
        result.naturalness = mmd_naturalness(m2, mmd_scale);
    }
    if (norm) {
        result.adversarialness = normalize_adversarialness(eval.mean_return, norm->lo, norm->hi);
        result.normalized = true;
    }
    if (uses_disc) result.discriminator = std::move(disc);
    return result;
}

} // namespace natadv
