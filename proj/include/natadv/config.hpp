#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "natadv/adversary.hpp"
#include "natadv/env.hpp"
#include "natadv/naturalness.hpp"
#include "natadv/rigid.hpp"
#include "natadv/rl.hpp"

namespace natadv {

struct FrontierConfig {
    double nat_lo = 0.2; // failure-case selection window
    double nat_hi = 0.8;
    int top_n = 3;
    double adversary_rate = 0.15;
};

// Full run configuration; the file format is JSON with one object per
// section: env / nn / rl / gan / scan / frontier.
struct RunConfig {
    CursorAssistConfig env;
    NnConfig nn;
    PpoConfig rl;
    int coop_iterations = 400;
    int robot_iterations = 240;
    int adversary_iterations = 120;
    int finetune_iterations = 120;
    int canonical_episodes = 40;
    int eval_episodes = 100;
    MetricKind metric = MetricKind::ls_gan;
    int disc_updates_per_iter = 1;
    int attack_eval_episodes = 40;
    // Attack-phase overrides (0 -> inherit the base value). Adversarial
    // training is stabler with a slower policy than the cooperative phases
    // need.
    double attack_policy_lr = 0.0;
    int attack_epochs_per_iter = 0;
    int disc_replay_capacity = 20000;
    DiscConfig gan;
    MmdConfig mmd;
    ScanConfig scan;
    FrontierConfig frontier;

    void validate() const {
        env.validate();
        nn.validate();
        rl.validate();
        gan.validate();
        mmd.validate();
        scan.validate();
        if (coop_iterations <= 0 || robot_iterations <= 0 || adversary_iterations <= 0 ||
            finetune_iterations <= 0)
            throw ConfigError("rl iteration counts must be > 0");
        if (canonical_episodes <= 0 || eval_episodes <= 0 || attack_eval_episodes <= 0)
            throw ConfigError("episode counts must be > 0");
        if (disc_updates_per_iter < 0) throw ConfigError("gan.disc_updates_per_iter must be >= 0");
        if (attack_policy_lr < 0.0 || attack_epochs_per_iter < 0 || disc_replay_capacity < 0)
            throw ConfigError("attack overrides must be >= 0");
        if (!(frontier.nat_lo <= frontier.nat_hi)) throw ConfigError("frontier.nat_range must be ordered");
        if (frontier.top_n < 1) throw ConfigError("frontier.top_n must be >= 1");
        if (!(frontier.adversary_rate >= 0.0 && frontier.adversary_rate <= 1.0))
            throw ConfigError("frontier.adversary_rate must be in [0,1]");
    }

    AdversaryConfig adversary_config(double lambda, std::uint64_t seed) const {
        AdversaryConfig a;
        a.lambda = lambda;
        a.metric = metric;
        a.disc_updates_per_iter = disc_updates_per_iter;
        a.ppo = rl;
        if (attack_epochs_per_iter > 0) a.ppo.epochs_per_iter = attack_epochs_per_iter;
        a.iterations = adversary_iterations;
        a.seed = seed;
        a.eval_episodes = attack_eval_episodes;
        a.disc_replay_capacity = disc_replay_capacity;
        a.disc = gan;
        a.disc.kind = metric == MetricKind::kl_logistic ? MetricKind::kl_logistic : MetricKind::ls_gan;
        a.mmd = mmd;
        return a;
    }

    NnConfig attack_nn() const {
        NnConfig n = nn;
        if (attack_policy_lr > 0.0) n.policy_lr = attack_policy_lr;
        return n;
    }
};

namespace cfgdetail {

template <typename T>
void get(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

} // namespace cfgdetail

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["env"] = {{"horizon", c.env.horizon},
                {"a_max", c.env.a_max},
                {"r_contact", c.env.r_contact},
                {"w_dist", c.env.w_dist},
                {"r_body", c.env.r_body},
                {"r_goal_radius", c.env.r_goal_radius},
                {"r_body_radius", c.env.r_body_radius},
                {"success_streak", c.env.success_streak},
                {"goal_offsets", c.env.goal_offsets},
                {"human_start", c.env.human_start},
                {"effector_start", c.env.effector_start}};
    j["nn"] = {{"policy_hidden", c.nn.policy_hidden}, {"critic_hidden", c.nn.critic_hidden},
               {"policy_lr", c.nn.policy_lr},         {"critic_lr", c.nn.critic_lr},
               {"adam_eps", c.nn.adam_eps},           {"log_std_init", c.nn.log_std_init}};
    j["rl"] = {{"clip_eps", c.rl.clip_eps},
               {"gamma", c.rl.gamma},
               {"gae_lambda", c.rl.gae_lambda},
               {"epochs_per_iter", c.rl.epochs_per_iter},
               {"minibatches", c.rl.minibatches},
               {"steps_per_iter", c.rl.steps_per_iter},
               {"value_clip", c.rl.value_clip},
               {"grad_clip", c.rl.grad_clip},
               {"bc_coeff", c.rl.bc_coeff},
               {"rl_coeff", c.rl.rl_coeff},
               {"entropy_coeff", c.rl.entropy_coeff},
               {"coop_iterations", c.coop_iterations},
               {"robot_iterations", c.robot_iterations},
               {"adversary_iterations", c.adversary_iterations},
               {"finetune_iterations", c.finetune_iterations},
               {"canonical_episodes", c.canonical_episodes},
               {"eval_episodes", c.eval_episodes},
               {"attack_eval_episodes", c.attack_eval_episodes},
               {"attack_policy_lr", c.attack_policy_lr},
               {"attack_epochs_per_iter", c.attack_epochs_per_iter}};
    j["gan"] = {{"metric", metric_kind_name(c.metric)},
                {"target_a", c.gan.target_a},
                {"target_b", c.gan.target_b},
                {"target_c", c.gan.target_c},
                {"noise_std_scale", c.gan.noise_std_scale},
                {"noise_decay", c.gan.noise_decay},
                {"grad_penalty_coeff", c.gan.grad_penalty_coeff},
                {"expert_loss_weight", c.gan.expert_loss_weight},
                {"agent_loss_weight", c.gan.agent_loss_weight},
                {"lr", c.gan.lr},
                {"hidden", c.gan.hidden},
                {"batch", c.gan.batch},
                {"disc_updates_per_iter", c.disc_updates_per_iter},
                {"disc_replay_capacity", c.disc_replay_capacity},
                {"mmd_bandwidth", c.mmd.bandwidth},
                {"mmd_biased", c.mmd.biased}};
    j["scan"] = {{"lambda_min", c.scan.lambda_min},
                 {"lambda_max", c.scan.lambda_max},
                 {"rounds", c.scan.rounds},
                 {"samples_per_round", c.scan.samples_per_round},
                 {"seeds", c.scan.seeds},
                 {"window", c.scan.window}};
    j["frontier"] = {{"nat_range", std::vector<double>{c.frontier.nat_lo, c.frontier.nat_hi}},
                     {"top_n", c.frontier.top_n},
                     {"adversary_rate", c.frontier.adversary_rate}};
    return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    using cfgdetail::get;
    RunConfig c;
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    if (j.contains("env")) {
        const auto& e = j["env"];
        get(e, "horizon", c.env.horizon);
        get(e, "a_max", c.env.a_max);
        get(e, "r_contact", c.env.r_contact);
        get(e, "w_dist", c.env.w_dist);
        get(e, "r_body", c.env.r_body);
        get(e, "r_goal_radius", c.env.r_goal_radius);
        get(e, "r_body_radius", c.env.r_body_radius);
        get(e, "success_streak", c.env.success_streak);
        get(e, "goal_offsets", c.env.goal_offsets);
        get(e, "human_start", c.env.human_start);
        get(e, "effector_start", c.env.effector_start);
    }
    if (j.contains("nn")) {
        const auto& e = j["nn"];
        get(e, "policy_hidden", c.nn.policy_hidden);
        get(e, "critic_hidden", c.nn.critic_hidden);
        get(e, "policy_lr", c.nn.policy_lr);
        get(e, "critic_lr", c.nn.critic_lr);
        get(e, "adam_eps", c.nn.adam_eps);
        get(e, "log_std_init", c.nn.log_std_init);
    }
    if (j.contains("rl")) {
        const auto& e = j["rl"];
        get(e, "clip_eps", c.rl.clip_eps);
        get(e, "gamma", c.rl.gamma);
        get(e, "gae_lambda", c.rl.gae_lambda);
        get(e, "epochs_per_iter", c.rl.epochs_per_iter);
        get(e, "minibatches", c.rl.minibatches);
        get(e, "steps_per_iter", c.rl.steps_per_iter);
        get(e, "value_clip", c.rl.value_clip);
        get(e, "grad_clip", c.rl.grad_clip);
        get(e, "bc_coeff", c.rl.bc_coeff);
        get(e, "rl_coeff", c.rl.rl_coeff);
        get(e, "entropy_coeff", c.rl.entropy_coeff);
        get(e, "coop_iterations", c.coop_iterations);
        get(e, "robot_iterations", c.robot_iterations);
        get(e, "adversary_iterations", c.adversary_iterations);
        get(e, "finetune_iterations", c.finetune_iterations);
        get(e, "canonical_episodes", c.canonical_episodes);
        get(e, "eval_episodes", c.eval_episodes);
        get(e, "attack_eval_episodes", c.attack_eval_episodes);
        get(e, "attack_policy_lr", c.attack_policy_lr);
        get(e, "attack_epochs_per_iter", c.attack_epochs_per_iter);
    }
    if (j.contains("gan")) {
        const auto& e = j["gan"];
        std::string metric = metric_kind_name(c.metric);
        get(e, "metric", metric);
        c.metric = metric_kind_from_name(metric);
        get(e, "target_a", c.gan.target_a);
        get(e, "target_b", c.gan.target_b);
        get(e, "target_c", c.gan.target_c);
        get(e, "noise_std_scale", c.gan.noise_std_scale);
        get(e, "noise_decay", c.gan.noise_decay);
        get(e, "grad_penalty_coeff", c.gan.grad_penalty_coeff);
        get(e, "expert_loss_weight", c.gan.expert_loss_weight);
        get(e, "agent_loss_weight", c.gan.agent_loss_weight);
        get(e, "lr", c.gan.lr);
        get(e, "hidden", c.gan.hidden);
        get(e, "batch", c.gan.batch);
        get(e, "disc_updates_per_iter", c.disc_updates_per_iter);
        get(e, "disc_replay_capacity", c.disc_replay_capacity);
        get(e, "mmd_bandwidth", c.mmd.bandwidth);
        get(e, "mmd_biased", c.mmd.biased);
    }
    if (j.contains("scan")) {
        const auto& e = j["scan"];
        get(e, "lambda_min", c.scan.lambda_min);
        get(e, "lambda_max", c.scan.lambda_max);
        get(e, "rounds", c.scan.rounds);
        get(e, "samples_per_round", c.scan.samples_per_round);
        get(e, "seeds", c.scan.seeds);
        get(e, "window", c.scan.window);
    }
    if (j.contains("frontier")) {
        const auto& e = j["frontier"];
        std::vector<double> range{c.frontier.nat_lo, c.frontier.nat_hi};
        get(e, "nat_range", range);
        if (range.size() != 2) throw ConfigError("frontier.nat_range must have two entries");
        c.frontier.nat_lo = range[0];
        c.frontier.nat_hi = range[1];
        get(e, "top_n", c.frontier.top_n);
        get(e, "adversary_rate", c.frontier.adversary_rate);
    }
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return run_config_from_json(j);
}

} // namespace natadv
