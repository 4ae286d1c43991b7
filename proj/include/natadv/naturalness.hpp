#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "natadv/nn.hpp"
#include "natadv/rng.hpp"
#include "natadv/serialize.hpp"
#include "natadv/trajectory.hpp"

namespace natadv {

enum class MetricKind { ls_gan, kl_logistic, mmd };

inline std::string metric_kind_name(MetricKind k) {
    switch (k) {
    case MetricKind::ls_gan: return "ls_gan";
    case MetricKind::kl_logistic: return "kl_logistic";
    case MetricKind::mmd: return "mmd";
    }
    return "?";
}

inline MetricKind metric_kind_from_name(const std::string& s) {
    if (s == "ls_gan") return MetricKind::ls_gan;
    if (s == "kl_logistic") return MetricKind::kl_logistic;
    if (s == "mmd") return MetricKind::mmd;
    throw ConfigError("unknown naturalness metric: " + s);
}

// Per-step naturalness features: the per-step state as the human sees it
// (both agents' positions plus the goal one-hot) and the normalized episode
// time. Actions stay out, keeping the metric observation-only and
// memory-less. The goal channel makes mis-signaling visible (motion that
// mimics the other goal's canonical episodes) and the time channel exposes
// schedule shifts; neither is distinguishable from canonical data through
// positions alone.
inline Mat trajectory_features(const Trajectory& t) {
    const int T = t.human_obs.rows;
    Mat out(T, t.human_obs.cols + 1);
    for (int i = 0; i < T; ++i) {
        for (int j = 0; j < t.human_obs.cols; ++j) out(i, j) = t.human_obs(i, j);
        out(i, t.human_obs.cols) = T > 0 ? static_cast<double>(i) / T : 0.0;
    }
    return out;
}

// Reference trajectories from the trusted human-robot pair.
struct CanonicalDataset {
    std::vector<Trajectory> trajs;
    Mat features;
    std::vector<double> movement_std;
    double mean_return = 0.0;

    static CanonicalDataset from_trajectories(std::vector<Trajectory> trajs) {
        if (trajs.empty()) throw ContractError("canonical dataset must be nonempty");
        CanonicalDataset d;
        d.trajs = std::move(trajs);
        const int obs_cols = d.trajs[0].human_obs.cols;
        const int cols = obs_cols + 1;
        int total = 0;
        for (const auto& t : d.trajs) {
            if (t.human_obs.cols != obs_cols) throw ContractError("canonical dataset: mixed feature widths");
            total += t.human_obs.rows;
        }
        d.features = Mat(total, cols);
        int row = 0;
        double ret = 0.0;
        for (const auto& t : d.trajs) {
            const Mat f = trajectory_features(t);
            for (int i = 0; i < f.rows; ++i)
                for (int j = 0; j < cols; ++j) d.features(row + i, j) = f(i, j);
            row += f.rows;
            ret += t.episode_return();
        }
        d.mean_return = ret / static_cast<double>(d.trajs.size());

        // Per-feature std of one-step movement, used to scale annealing
        // noise. The time column moves by a constant step, so its movement
        // std is zero and it never gets noised.
        d.movement_std.assign(cols, 0.0);
        std::vector<double> mean(cols, 0.0);
        int n = 0;
        for (const auto& t : d.trajs)
            for (int i = 0; i + 1 < t.human_obs.rows; ++i, ++n)
                for (int j = 0; j < obs_cols; ++j) mean[j] += t.human_obs(i + 1, j) - t.human_obs(i, j);
        if (n > 0) {
            for (int j = 0; j < obs_cols; ++j) mean[j] /= n;
            for (const auto& t : d.trajs)
                for (int i = 0; i + 1 < t.human_obs.rows; ++i)
                    for (int j = 0; j < obs_cols; ++j) {
                        const double delta = t.human_obs(i + 1, j) - t.human_obs(i, j) - mean[j];
                        d.movement_std[j] += delta * delta;
                    }
            for (int j = 0; j < obs_cols; ++j) d.movement_std[j] = std::sqrt(d.movement_std[j] / n);
        }
        return d;
    }

    static CanonicalDataset load(const std::filesystem::path& path) {
        return from_trajectories(load_trajectories(path));
    }

    void save(const std::filesystem::path& path) const { save_trajectories(path, trajs); }

    Mat sample_features(int n, Rng& rng) const {
        Mat out(n, features.cols);
        for (int i = 0; i < n; ++i) {
            const int src = static_cast<int>(rng.uniform_int(features.rows));
            for (int j = 0; j < features.cols; ++j) out(i, j) = features(src, j);
        }
        return out;
    }
};

inline Mat stack_features(const std::vector<Trajectory>& trajs) {
    if (trajs.empty()) throw ContractError("stack_features: empty");
    int total = 0;
    for (const auto& t : trajs) total += t.human_obs.rows;
    Mat out(total, trajs[0].human_obs.cols + 1);
    int row = 0;
    for (const auto& t : trajs) {
        const Mat f = trajectory_features(t);
        for (int i = 0; i < f.rows; ++i)
            for (int j = 0; j < out.cols; ++j) out(row + i, j) = f(i, j);
        row += f.rows;
    }
    return out;
}

struct DiscConfig {
    MetricKind kind = MetricKind::ls_gan;
    // LS-GAN regression targets: agent batches regress to b, expert batches
    // to a; the policy penalty is (D - c)^2.
    double target_a = -1.0;
    double target_b = 1.0;
    double target_c = 0.0;
    double noise_std_scale = 10.0;
    double noise_decay = 0.98;
    double grad_penalty_coeff = 0.3;
    double expert_loss_weight = 4.0;
    double agent_loss_weight = 1.0;
    double lr = 1e-3;
    std::vector<int> hidden{64, 64};
    int batch = 256;

    void validate() const {
        if (!(noise_decay > 0.0 && noise_decay <= 1.0)) throw ConfigError("gan.noise_decay must be in (0,1]");
        if (noise_std_scale < 0.0 || grad_penalty_coeff < 0.0) throw ConfigError("gan noise/penalty must be >= 0");
        if (batch <= 0 || lr <= 0.0) throw ConfigError("gan.batch and gan.lr must be > 0");
    }
};

// Observation-level discriminator trained with the LS-GAN quadratic or the
// KL logistic objective. Trajectories are scored per step and averaged.
struct Discriminator {
    DiscConfig cfg;
    Mlp net;
    Adam adam;
    std::int64_t updates = 0;
    std::vector<double> feature_std;

    static Discriminator make(const DiscConfig& cfg, const CanonicalDataset& canonical, std::uint64_t seed) {
        return make_raw(cfg, canonical.features.cols, canonical.movement_std, seed);
    }

    static Discriminator make_raw(const DiscConfig& cfg, int feature_dim,
                                  std::vector<double> feature_std, std::uint64_t seed) {
        cfg.validate();
        if (static_cast<int>(feature_std.size()) != feature_dim)
            throw ContractError("discriminator: feature_std width mismatch");
        Rng rng(Rng::derive(seed, 0xD15C));
        Discriminator d{cfg, Mlp::make(feature_dim, cfg.hidden, 1, rng, 0.01),
                        Adam(AdamConfig{.lr = cfg.lr, .eps = 1e-8}), 0, std::move(feature_std)};
        return d;
    }

    double noise_std(int feature) const {
        return cfg.noise_std_scale * feature_std[feature] *
               std::pow(cfg.noise_decay, static_cast<double>(updates));
    }

    Mat add_noise(const Mat& X, Rng& rng) const {
        if (cfg.noise_std_scale == 0.0) return X;
        Mat out = X;
        for (int j = 0; j < X.cols; ++j) {
            const double sd = noise_std(j);
            if (sd == 0.0) continue;
            for (int i = 0; i < X.rows; ++i) out(i, j) += sd * rng.normal();
        }
        return out;
    }

    Mat scores(const Mat& X) const { return net.forward(X); }

    double score_one(std::span<const double> features) const {
        std::vector<double> y(1);
        net.forward(features, y);
        return y[0];
    }

    double trajectory_score(const Trajectory& t) const {
        const Mat s = scores(trajectory_features(t));
        double acc = 0.0;
        for (int i = 0; i < s.rows; ++i) acc += s(i, 0);
        return acc / s.rows;
    }

    // One gradient step on fresh agent/expert batches; returns the loss.
    double update(const Mat& agent_batch, const Mat& expert_batch, Rng& rng) {
        Tape t;
        const Var loss = build_loss(t, agent_batch, expert_batch, rng);
        auto params = net.params();
        zero_grads(params);
        t.backward(loss);
        adam.step(params);
        ++updates;
        return t.val(loss)(0, 0);
    }

    // Loss value under the configured objective (noise and gradient penalty
    // included when enabled); does not change any state.
    double loss_value(const Mat& agent_batch, const Mat& expert_batch, Rng& rng) {
        Tape t;
        return t.val(build_loss(t, agent_batch, expert_batch, rng))(0, 0);
    }

private:
    Var build_loss(Tape& t, const Mat& agent_batch, const Mat& expert_batch, Rng& rng) {
        if (agent_batch.rows == 0 || expert_batch.rows == 0)
            throw ContractError("discriminator loss: empty batch");
        const Mat agent_noised = add_noise(agent_batch, rng);
        const Mat expert_noised = add_noise(expert_batch, rng);

        Var agent_x = t.constant(agent_noised);
        Var expert_x = t.constant(expert_noised);
        Var s_agent = net.forward(t, agent_x);
        std::vector<Var> hidden;
        Var s_expert = net.forward(t, expert_x, &hidden);

        Var loss;
        if (cfg.kind == MetricKind::ls_gan) {
            Var la = t.mean_all(t.square(t.add_scalar(s_agent, -cfg.target_b)));
            Var le = t.mean_all(t.square(t.add_scalar(s_expert, -cfg.target_a)));
            loss = t.add(t.scale(la, cfg.agent_loss_weight), t.scale(le, cfg.expert_loss_weight));
        } else if (cfg.kind == MetricKind::kl_logistic) {
            Var la = t.mean_all(t.softplus(t.neg(s_agent)));
            Var le = t.mean_all(t.softplus(s_expert));
            loss = t.add(la, le);
        } else {
            throw ContractError("discriminator loss: mmd metric has no discriminator");
        }

        if (cfg.grad_penalty_coeff > 0.0) {
            Var gin = net.input_gradient(t, expert_x, hidden);
            Var gp = t.mean_all(t.rowsum(t.square(gin)));
            loss = t.add(loss, t.scale(gp, cfg.grad_penalty_coeff));
        }
        if (!std::isfinite(t.val(loss)(0, 0))) throw TrainingError("discriminator loss is non-finite");
        return loss;
    }
};

inline double ls_gan_loss(Discriminator& d, const Mat& agent_batch, const Mat& expert_batch, Rng& rng) {
    if (d.cfg.kind != MetricKind::ls_gan) throw ContractError("ls_gan_loss: wrong discriminator kind");
    return d.loss_value(agent_batch, expert_batch, rng);
}

inline double kl_logistic_loss(Discriminator& d, const Mat& agent_batch, const Mat& expert_batch, Rng& rng) {
    if (d.cfg.kind != MetricKind::kl_logistic) throw ContractError("kl_logistic_loss: wrong discriminator kind");
    return d.loss_value(agent_batch, expert_batch, rng);
}

// Fraction of trajectories classified as canonical (mean score below zero).
inline double naturalness_score(const Discriminator& d, const std::vector<Trajectory>& trajs) {
    if (trajs.empty()) throw ContractError("naturalness_score: empty trajectory set");
    int below = 0;
    for (const auto& t : trajs)
        if (d.trajectory_score(t) < 0.0) ++below;
    return static_cast<double>(below) / static_cast<double>(trajs.size());
}

// Chi-square divergence estimate of an LS-GAN discriminator at optimality.
inline double chi2_estimate(const Discriminator& d, const std::vector<Trajectory>& trajs) {
    if (d.cfg.kind != MetricKind::ls_gan) throw ContractError("chi2_estimate: requires an ls_gan discriminator");
    if (trajs.empty()) throw ContractError("chi2_estimate: empty trajectory set");
    double acc = 0.0;
    for (const auto& t : trajs) {
        const double s = d.trajectory_score(t);
        acc += s * s;
    }
    return acc / static_cast<double>(trajs.size());
}

// Accuracy on the canonical per-step samples under increasing noise, one
// entry per noise multiplier. Noise is expressed in units of the canonical
// movement std per feature.
inline std::vector<double> probe_discriminator(const Discriminator& d, const CanonicalDataset& canonical,
                                               const std::vector<double>& noise_levels, std::uint64_t seed) {
    std::vector<double> out;
    out.reserve(noise_levels.size());
    Rng rng(Rng::derive(seed, 0x9806E));
    for (const double level : noise_levels) {
        Mat X = canonical.features;
        for (int j = 0; j < X.cols; ++j) {
            const double sd = level * canonical.movement_std[j];
            if (sd == 0.0) continue;
            for (int i = 0; i < X.rows; ++i) X(i, j) += sd * rng.normal();
        }
        const Mat s = d.scores(X);
        int canonical_votes = 0;
        for (int i = 0; i < s.rows; ++i)
            if (s(i, 0) < 0.0) ++canonical_votes;
        out.push_back(static_cast<double>(canonical_votes) / s.rows);
    }
    return out;
}

inline double discriminator_canonical_accuracy(const Discriminator& d, const Mat& canonical_sample) {
    const Mat s = d.scores(canonical_sample);
    int below = 0;
    for (int i = 0; i < s.rows; ++i)
        if (s(i, 0) < 0.0) ++below;
    return static_cast<double>(below) / s.rows;
}

inline void save_discriminator(const std::filesystem::path& path, const Discriminator& d) {
    BlobWriter w;
    blob_add_mlp(w, "net", d.net, true);
    w.add_scalar("updates", static_cast<double>(d.updates));
    Mat fs(1, static_cast<int>(d.feature_std.size()));
    for (int j = 0; j < fs.cols; ++j) fs(0, j) = d.feature_std[j];
    w.add("feature_std", fs);
    w.write(path);
}

inline Discriminator load_discriminator(const std::filesystem::path& path, const DiscConfig& cfg) {
    BlobReader r = BlobReader::from_file(path);
    Discriminator d{cfg, blob_read_mlp(r, "net"), Adam(AdamConfig{.lr = cfg.lr, .eps = 1e-8}), 0, {}};
    d.updates = static_cast<std::int64_t>(r.scalar("updates"));
    const Mat& fs = r.mat("feature_std");
    d.feature_std.assign(fs.a.begin(), fs.a.end());
    return d;
}

} // namespace natadv
