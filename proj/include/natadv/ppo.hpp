#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "natadv/errors.hpp"
#include "natadv/nn.hpp"
#include "natadv/rng.hpp"
#include "natadv/trajectory.hpp"

namespace natadv {

struct PpoConfig {
    double clip_eps = 0.3;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    int epochs_per_iter = 30;
    int minibatches = 20;
    int steps_per_iter = 4800;
    double value_clip = 10.0;
    double grad_clip = 20.0;
    double bc_coeff = 1.0;
    double rl_coeff = 0.1;
    double entropy_coeff = 0.001;

    void validate() const {
        if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("rl.clip_eps must be in (0,1)");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("rl.gamma must be in (0,1]");
        if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("rl.gae_lambda must be in [0,1]");
        if (epochs_per_iter <= 0 || minibatches <= 0 || steps_per_iter <= 0)
            throw ConfigError("rl counts must be > 0");
    }
};

enum class AgentSide { human, robot };

// One episode of training data for a single agent.
struct EpisodeData {
    Mat obs;
    Mat actions;
    std::vector<double> rewards;
};

inline EpisodeData episode_view(const Trajectory& t, AgentSide side) {
    EpisodeData e;
    e.obs = side == AgentSide::human ? t.human_obs : t.robot_obs;
    e.actions = side == AgentSide::human ? t.human_actions : t.robot_actions;
    e.rewards = t.rewards;
    return e;
}

struct TrainBatch {
    Mat obs;
    Mat actions;
    std::vector<double> logp_old;
    std::vector<double> advantages;
    std::vector<double> returns;
    std::vector<double> values_old;

    int size() const { return obs.rows; }
};

// GAE(lambda) over finite episodes with V(s_T) = 0 at the horizon.
inline TrainBatch make_train_batch(const std::vector<EpisodeData>& episodes, GaussianPolicy& policy,
                                   const Mlp& critic, const PpoConfig& cfg) {
    if (episodes.empty()) throw ContractError("make_train_batch: empty batch");
    int total = 0;
    for (const auto& e : episodes) total += static_cast<int>(e.rewards.size());

    TrainBatch b;
    b.obs = Mat(total, episodes[0].obs.cols);
    b.actions = Mat(total, episodes[0].actions.cols);
    b.logp_old.resize(total);
    b.advantages.resize(total);
    b.returns.resize(total);
    b.values_old.resize(total);

    int row = 0;
    for (const auto& e : episodes) {
        const int T = static_cast<int>(e.rewards.size());
        const Mat values = critic.forward(e.obs);
        double adv_next = 0.0;
        std::vector<double> adv(T);
        for (int t = T - 1; t >= 0; --t) {
            const double v_next = t + 1 < T ? values(t + 1, 0) : 0.0;
            const double delta = e.rewards[t] + cfg.gamma * v_next - values(t, 0);
            adv_next = delta + cfg.gamma * cfg.gae_lambda * adv_next;
            adv[t] = adv_next;
        }
        for (int t = 0; t < T; ++t) {
            const int r = row + t;
            for (int j = 0; j < b.obs.cols; ++j) b.obs(r, j) = e.obs(t, j);
            for (int j = 0; j < b.actions.cols; ++j) b.actions(r, j) = e.actions(t, j);
            b.advantages[r] = adv[t];
            b.values_old[r] = values(t, 0);
            b.returns[r] = adv[t] + values(t, 0);
        }
        row += T;
    }

    // Old log-probs go through the same tape path as the update so freshly
    // synced ratios are exactly one.
    Tape t;
    Var lp = policy.log_prob(t, t.constant(b.obs), b.actions);
    for (int i = 0; i < total; ++i) b.logp_old[i] = t.val(lp)(i, 0);
    return b;
}

struct PpoMetrics {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double bc_loss = 0.0;
    double clip_frac = 0.0;
    double grad_norm = 0.0;
};

// Clipped-surrogate PPO with value clipping, entropy bonus and an optional
// behavior-cloning term against a frozen expert.
inline PpoMetrics ppo_update(GaussianPolicy& policy, Mlp& critic, Adam& policy_adam, Adam& critic_adam,
                             const TrainBatch& batch, const PpoConfig& cfg, Rng& rng,
                             GaussianPolicy* bc_expert = nullptr) {
    cfg.validate();
    const int n = batch.size();
    if (n == 0) throw ContractError("ppo_update: empty batch");

    // Per-batch advantage normalization.
    std::vector<double> adv = batch.advantages;
    {
        double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
        double var = 0.0;
        for (double a : adv) var += (a - mean) * (a - mean);
        const double sd = std::sqrt(var / n) + 1e-8;
        for (double& a : adv) a = (a - mean) / sd;
    }

    Mat expert_actions;
    if (bc_expert) expert_actions = bc_expert->mean_net.forward(batch.obs);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    PpoMetrics m;
    int updates = 0;
    const int mb_count = std::min(cfg.minibatches, n);
    for (int epoch = 0; epoch < cfg.epochs_per_iter; ++epoch) {
        for (int i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.uniform_int(static_cast<std::uint64_t>(i) + 1)]);
        for (int mb = 0; mb < mb_count; ++mb) {
            const int lo = static_cast<int>(static_cast<std::int64_t>(mb) * n / mb_count);
            const int hi = static_cast<int>(static_cast<std::int64_t>(mb + 1) * n / mb_count);
            const int bs = hi - lo;
            if (bs <= 0) continue;

            Mat obs(bs, batch.obs.cols), actions(bs, batch.actions.cols);
            Mat adv_m(bs, 1), logp_old_m(bs, 1), ret_m(bs, 1), vold_m(bs, 1);
            Mat expert_m;
            if (bc_expert) expert_m = Mat(bs, batch.actions.cols);
            for (int r = 0; r < bs; ++r) {
                const int src = order[lo + r];
                for (int j = 0; j < obs.cols; ++j) obs(r, j) = batch.obs(src, j);
                for (int j = 0; j < actions.cols; ++j) actions(r, j) = batch.actions(src, j);
                adv_m(r, 0) = adv[src];
                logp_old_m(r, 0) = batch.logp_old[src];
                ret_m(r, 0) = batch.returns[src];
                vold_m(r, 0) = batch.values_old[src];
                if (bc_expert)
                    for (int j = 0; j < actions.cols; ++j) expert_m(r, j) = expert_actions(src, j);
            }

            // Policy step.
            {
                Tape t;
                Var obs_v = t.constant(obs);
                Var logp = policy.log_prob(t, obs_v, actions);
                Var ratio = t.exp_(t.sub(logp, t.constant(logp_old_m)));
                Var adv_v = t.constant(adv_m);
                Var surr = t.min_(t.mul(ratio, adv_v),
                                  t.mul(t.clamp_pass(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv_v));
                Var ppo_loss = t.neg(t.mean_all(surr));
                Var ent = policy.entropy(t);
                Var loss = t.add_scalar_node(ppo_loss, ent, -cfg.entropy_coeff);
                double bc_val = 0.0;
                if (bc_expert) {
                    Var mu = policy.mean_net.forward(t, obs_v);
                    Var bc = t.mean_all(t.square(t.sub(mu, t.constant(expert_m))));
                    bc_val = t.val(bc)(0, 0);
                    loss = t.add(t.scale(loss, cfg.rl_coeff), t.scale(bc, cfg.bc_coeff));
                }
                const double loss_val = t.val(loss)(0, 0);
                if (!std::isfinite(loss_val)) throw TrainingError("ppo_update: non-finite policy loss");

                auto params = policy.params();
                zero_grads(params);
                t.backward(loss);
                m.grad_norm += clip_grad_norm(params, cfg.grad_clip);
                policy_adam.step(params);
                policy.clamp_log_std();

                const Mat& ratios = t.val(ratio);
                double kl = 0.0, clipped = 0.0;
                const Mat& lp_new = t.val(logp);
                for (int r = 0; r < bs; ++r) {
                    kl += logp_old_m(r, 0) - lp_new(r, 0);
                    if (std::fabs(ratios(r, 0) - 1.0) > cfg.clip_eps) clipped += 1.0;
                }
                m.approx_kl += kl / bs;
                m.clip_frac += clipped / bs;
                m.policy_loss += t.val(ppo_loss)(0, 0);
                m.entropy += t.val(ent)(0, 0);
                m.bc_loss += bc_val;
            }

            // Critic step with clipped value targets.
            {
                Tape t;
                Var v = critic.forward(t, t.constant(obs));
                Var vold = t.constant(vold_m);
                Var vclip = t.add(vold, t.clamp_pass(t.sub(v, vold), -cfg.value_clip, cfg.value_clip));
                Var retv = t.constant(ret_m);
                Var loss = t.mean_all(t.max_(t.square(t.sub(v, retv)), t.square(t.sub(vclip, retv))));
                const double loss_val = t.val(loss)(0, 0);
                if (!std::isfinite(loss_val)) throw TrainingError("ppo_update: non-finite value loss");

                auto params = critic.params();
                zero_grads(params);
                t.backward(loss);
                clip_grad_norm(params, cfg.grad_clip);
                critic_adam.step(params);
                m.value_loss += loss_val;
            }
            ++updates;
        }
    }
    if (updates > 0) {
        m.policy_loss /= updates;
        m.value_loss /= updates;
        m.entropy /= updates;
        m.approx_kl /= updates;
        m.bc_loss /= updates;
        m.clip_frac /= updates;
        m.grad_norm /= updates;
    }
    return m;
}

} // namespace natadv
