#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "natadv/frontier.hpp"
#include "natadv/rl.hpp"

namespace natadv {

// Training population for robust fine-tuning: the synthetic human plus
// frontier-selected adversarial humans drawn at a fixed rate.
struct PopulationSpec {
    const GaussianPolicy* base_human = nullptr;
    std::vector<const GaussianPolicy*> adversaries;
    double adversary_rate = 0.15;

    void validate() const {
        if (!base_human) throw ContractError("population: base human is required");
        if (!(adversary_rate >= 0.0 && adversary_rate <= 1.0))
            throw ConfigError("population.adversary_rate must be in [0,1]");
        if (adversary_rate > 0.0 && adversaries.empty())
            throw ConfigError("population: adversaries required when rate > 0");
    }
};

// Failure cases: runs with naturalness inside `nat_range`, the top `n` by
// adversarialness, ties broken toward the smaller lambda.
inline std::vector<FrontierPoint> select_failure_cases(const std::vector<FrontierPoint>& points,
                                                       std::pair<double, double> nat_range = {0.2, 0.8},
                                                       int n = 3) {
    if (points.empty()) throw ContractError("select_failure_cases: empty frontier");
    if (n < 1) throw ContractError("select_failure_cases: n must be >= 1");
    std::vector<FrontierPoint> in_range;
    for (const auto& p : points)
        if (p.naturalness >= nat_range.first && p.naturalness <= nat_range.second)
            in_range.push_back(p);
    std::sort(in_range.begin(), in_range.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
        if (a.adversarialness != b.adversarialness) return a.adversarialness > b.adversarialness;
        if (a.lambda != b.lambda) return a.lambda < b.lambda;
        return a.run_id < b.run_id;
    });
    if (static_cast<int>(in_range.size()) > n) in_range.resize(n);
    return in_range;
}

// The partner draw is a pure function of (seed stream, rate, adversary
// order); rollout seeding is independent of it, so rate 0 reproduces plain
// continued training bit for bit.
inline PartnerProvider population_partner(const PopulationSpec& pop) {
    pop.validate();
    return [&pop](int, Rng& partner_rng) -> const GaussianPolicy& {
        if (pop.adversary_rate > 0.0) {
            const double u = partner_rng.uniform();
            if (u < pop.adversary_rate) {
                const auto pick = partner_rng.uniform_int(pop.adversaries.size());
                return *pop.adversaries[pick];
            }
        }
        return *pop.base_human;
    };
}

// Resumes PPO from the given robot checkpoint against the mixed population.
// Everything but the robot (and its critic) stays frozen.
inline RobotTrainResult robust_finetune(const CursorAssistConfig& env, const PopulationSpec& pop,
                                        const GaussianPolicy& robot_start, const Mlp& critic_start,
                                        const NnConfig& nn, const PpoConfig& ppo, int iterations,
                                        std::uint64_t seed) {
    pop.validate();
    Adam adam_r(AdamConfig{.lr = nn.policy_lr, .eps = nn.adam_eps});
    Adam adam_rc(AdamConfig{.lr = nn.critic_lr, .eps = nn.adam_eps});
    return train_robot_loop(env, population_partner(pop), robot_start, critic_start, adam_r, adam_rc, nn,
                            ppo, iterations, seed);
}

} // namespace natadv
