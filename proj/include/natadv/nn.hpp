#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "natadv/autodiff.hpp"
#include "natadv/errors.hpp"
#include "natadv/mat.hpp"
#include "natadv/rng.hpp"

namespace natadv {

// Fully-connected tanh net: affine -> tanh -> ... -> affine (identity output).
struct Mlp {
    std::vector<int> sizes;       // {in, hidden..., out}
    std::vector<Param> w;         // w[l]: (sizes[l+1], sizes[l])
    std::vector<Param> b;         // b[l]: (1, sizes[l+1])

    static Mlp make(int in, const std::vector<int>& hidden, int out, Rng& rng,
                    double last_layer_scale = 1.0) {
        Mlp net;
        net.sizes.push_back(in);
        for (int h : hidden) net.sizes.push_back(h);
        net.sizes.push_back(out);
        for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
            const int fan_in = net.sizes[l];
            const int fan_out = net.sizes[l + 1];
            const bool last = (l + 2 == net.sizes.size());
            const double scale = (last ? last_layer_scale : 1.0) / std::sqrt(static_cast<double>(fan_in));
            Mat wm(fan_out, fan_in);
            for (double& e : wm.a) e = scale * rng.normal();
            net.w.emplace_back(std::move(wm));
            net.b.emplace_back(Mat(1, fan_out));
        }
        return net;
    }

    int in_dim() const { return sizes.front(); }
    int out_dim() const { return sizes.back(); }
    std::size_t layer_count() const { return w.size(); }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& p : w) n += p.value.size();
        for (const auto& p : b) n += p.value.size();
        return n;
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (auto& p : w) out.push_back(&p);
        for (auto& p : b) out.push_back(&p);
        return out;
    }

    void forward(std::span<const double> x, std::span<double> y) const {
        if (static_cast<int>(x.size()) != in_dim()) throw ContractError("Mlp::forward: input size mismatch");
        if (static_cast<int>(y.size()) != out_dim()) throw ContractError("Mlp::forward: output size mismatch");
        std::vector<double> cur(x.begin(), x.end());
        std::vector<double> next;
        for (std::size_t l = 0; l < w.size(); ++l) {
            const Mat& W = w[l].value;
            const Mat& B = b[l].value;
            next.assign(W.rows, 0.0);
            for (int i = 0; i < W.rows; ++i) {
                const double* wr = W.row(i);
                double acc = B(0, i);
                for (int j = 0; j < W.cols; ++j) acc += wr[j] * cur[j];
                next[i] = acc;
            }
            if (l + 1 < w.size())
                for (double& e : next) e = std::tanh(e);
            cur.swap(next);
        }
        std::copy(cur.begin(), cur.end(), y.begin());
    }

    Mat forward(const Mat& X) const {
        if (X.cols != in_dim()) throw ContractError("Mlp::forward: input size mismatch");
        Mat cur = X;
        for (std::size_t l = 0; l < w.size(); ++l) {
            Mat next(cur.rows, w[l].value.rows);
            gemm_nt(cur, w[l].value, next, false);
            for (int i = 0; i < next.rows; ++i)
                for (int j = 0; j < next.cols; ++j) next(i, j) += b[l].value(0, j);
            if (l + 1 < w.size())
                for (double& e : next.a) e = std::tanh(e);
            cur = std::move(next);
        }
        return cur;
    }

    // Tape forward; `hidden` receives the post-tanh activations of each
    // hidden layer (used for input-gradient penalties).
    Var forward(Tape& t, Var x, std::vector<Var>* hidden = nullptr) {
        Var cur = x;
        for (std::size_t l = 0; l < w.size(); ++l) {
            Var lin = t.add_row(t.matmul_nt(cur, t.leaf(w[l])), t.leaf(b[l]));
            if (l + 1 < w.size()) {
                cur = t.tanh_(lin);
                if (hidden) hidden->push_back(cur);
            } else {
                cur = lin;
            }
        }
        return cur;
    }

    // d out / d x for a scalar-output net, expressed as tape ops so the
    // result stays differentiable w.r.t. the weights.
    Var input_gradient(Tape& t, Var x, const std::vector<Var>& hidden) {
        if (out_dim() != 1) throw ContractError("input_gradient: scalar output only");
        const int batch = val_rows(t, x);
        Var up = t.broadcast_row(t.leaf(w.back()), batch); // (B, n_last)
        for (std::size_t l = hidden.size(); l-- > 0;) {
            Var gated = t.mul(t.one_minus_square(hidden[l]), up);
            up = t.matmul_nn(gated, t.leaf(w[l]));
        }
        return up; // (B, in)
    }

private:
    static int val_rows(Tape& t, Var v) { return t.val(v).rows; }
};

constexpr double kLog2Pi = 1.8378770664093454835606594728112; // log(2*pi)

// Diagonal Gaussian policy: MLP mean plus a learned per-dimension log-std.
struct GaussianPolicy {
    Mlp mean_net;
    Param log_std;     // (1, act_dim)
    double log_std_min = -5.0;
    double log_std_max = 1.0;

    static GaussianPolicy make(int obs_dim, const std::vector<int>& hidden, int act_dim,
                               Rng& rng, double log_std_init = -3.0) {
        GaussianPolicy p;
        p.mean_net = Mlp::make(obs_dim, hidden, act_dim, rng, 0.01);
        p.log_std = Param(Mat(1, act_dim, log_std_init));
        return p;
    }

    int obs_dim() const { return mean_net.in_dim(); }
    int act_dim() const { return mean_net.out_dim(); }

    std::vector<Param*> params() {
        auto out = mean_net.params();
        out.push_back(&log_std);
        return out;
    }

    void clamp_log_std() {
        for (double& e : log_std.value.a)
            e = e < log_std_min ? log_std_min : (e > log_std_max ? log_std_max : e);
    }

    void act(std::span<const double> obs, Rng& rng, bool stochastic,
             std::span<double> action) const {
        mean_net.forward(obs, action);
        if (!stochastic) return;
        for (int d = 0; d < act_dim(); ++d) action[d] += std::exp(log_std.value(0, d)) * rng.normal();
    }

    double log_prob(std::span<const double> obs, std::span<const double> action) const {
        std::vector<double> mean(act_dim());
        mean_net.forward(obs, std::span<double>(mean));
        double lp = 0.0;
        for (int d = 0; d < act_dim(); ++d) {
            const double ls = log_std.value(0, d);
            const double z = (action[d] - mean[d]) * std::exp(-ls);
            lp += -0.5 * z * z - ls - 0.5 * kLog2Pi;
        }
        return lp;
    }

    // (B,1) log-probabilities of `actions` under the current parameters.
    Var log_prob(Tape& t, Var obs, const Mat& actions) {
        Var mu = mean_net.forward(t, obs);
        Var ls = t.leaf(log_std);
        Var d = t.sub(t.constant(actions), mu);
        Var z = t.mul_row(d, t.exp_(t.neg(ls)));
        Var q = t.rowsum(t.square(z));
        Var lp = t.add_scalar(t.scale(q, -0.5), -0.5 * kLog2Pi * act_dim());
        return t.add_scalar_node(lp, t.sum_all(ls), -1.0);
    }

    // Differential entropy (scalar node); constant w.r.t. observations.
    Var entropy(Tape& t) {
        Var s = t.sum_all(t.leaf(log_std));
        return t.add_scalar(s, 0.5 * act_dim() * (1.0 + kLog2Pi));
    }

    double entropy_value() const {
        double s = 0.0;
        for (double e : log_std.value.a) s += e;
        return s + 0.5 * act_dim() * (1.0 + kLog2Pi);
    }
};

struct AdamConfig {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-4;
};

// Bias-corrected Adam. Moments live inside each Param.
struct Adam {
    AdamConfig cfg;
    std::int64_t t = 0;

    explicit Adam(AdamConfig c = {}) : cfg(c) {}

    void step(const std::vector<Param*>& params) {
        ++t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (Param* p : params) {
            if (p->m.size() == 0) {
                p->m = Mat::zeros_like(p->value);
                p->v = Mat::zeros_like(p->value);
            }
            for (std::size_t k = 0; k < p->value.a.size(); ++k) {
                const double g = p->grad.a[k];
                if (!std::isfinite(g)) throw TrainingError("Adam: non-finite gradient");
                p->m.a[k] = cfg.beta1 * p->m.a[k] + (1.0 - cfg.beta1) * g;
                p->v.a[k] = cfg.beta2 * p->v.a[k] + (1.0 - cfg.beta2) * g * g;
                const double mhat = p->m.a[k] / bc1;
                const double vhat = p->v.a[k] / bc2;
                p->value.a[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            }
        }
    }
};

inline void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->zero_grad();
}

// Returns the pre-clip global norm.
inline double clip_grad_norm(const std::vector<Param*>& params, double max_norm) {
    double sq = 0.0;
    for (Param* p : params)
        for (double g : p->grad.a) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (Param* p : params)
            for (double& g : p->grad.a) g *= s;
    }
    return norm;
}

} // namespace natadv
