#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "natadv/errors.hpp"
#include "natadv/frontier.hpp"

namespace natadv {

struct ScanConfig {
    double lambda_min = 1e-5;
    double lambda_max = 10.0;
    int rounds = 3;            // d
    int samples_per_round = 6; // k
    std::vector<std::uint64_t> seeds{1, 2, 3};
    int window = 3; // L, the LARGEST-JUMP sliding window

    void validate() const {
        if (!(lambda_min > 0.0 && lambda_min < lambda_max))
            throw ConfigError("scan: requires 0 < lambda_min < lambda_max");
        if (rounds < 1 || samples_per_round < 1 || window < 1)
            throw ConfigError("scan: rounds, samples and window must be >= 1");
        if (seeds.empty()) throw ConfigError("scan: needs at least one seed");
    }
};

// k lambdas with evenly spaced logs over [lo, hi]; endpoints included for
// k >= 2, the geometric midpoint for k == 1.
inline std::vector<double> log_space_grid(double lo, double hi, int k) {
    if (!(lo > 0.0)) throw ContractError("log_space_grid: lo must be > 0");
    if (!(lo <= hi)) throw ContractError("log_space_grid: requires lo <= hi");
    if (k < 1) throw ContractError("log_space_grid: k must be >= 1");
    if (k == 1) return {std::sqrt(lo * hi)};
    std::vector<double> out(k);
    const double llo = std::log(lo), lhi = std::log(hi);
    out[0] = lo;
    out[k - 1] = hi;
    for (int j = 1; j + 1 < k; ++j)
        out[j] = std::exp(llo + (lhi - llo) * static_cast<double>(j) / (k - 1));
    return out;
}

// Windowed-envelope jump detector over (lambda, value) pairs. With pairs
// sorted by lambda, the lower envelope at index i is the window minimum over
// the trailing L entries and the upper envelope the window maximum over the
// leading L entries; the boundary i|i+1 with the largest envelope gap wins,
// ties going to the smallest lower index. Returns the adjacent lambda pair
// bracketing that boundary.
inline std::pair<double, double> largest_jump(const std::vector<double>& values,
                                              const std::vector<double>& lambdas, int window) {
    if (values.size() != lambdas.size()) throw ContractError("largest_jump: list lengths differ");
    if (values.size() < 2) throw ContractError("largest_jump: needs at least two points");
    if (window < 1) throw ContractError("largest_jump: window must be >= 1");

    std::vector<std::pair<double, double>> pairs(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) pairs[i] = {lambdas[i], values[i]};
    std::sort(pairs.begin(), pairs.end());

    const int n = static_cast<int>(pairs.size());
    std::vector<double> lower(n), upper(n);
    for (int i = 0; i < n; ++i) {
        const int start = std::max(i + 1 - window, 0);
        double mn = pairs[start].second;
        for (int j = start + 1; j <= i; ++j) mn = std::min(mn, pairs[j].second);
        lower[i] = mn;
        const int stop = std::min(i + window, n);
        double mx = pairs[i].second;
        for (int j = i + 1; j < stop; ++j) mx = std::max(mx, pairs[j].second);
        upper[i] = mx;
    }

    int best = 0;
    double best_gap = upper[1] - lower[0];
    for (int i = 1; i + 1 < n; ++i) {
        const double gap = upper[i + 1] - lower[i];
        if (gap > best_gap) {
            best_gap = gap;
            best = i;
        }
    }
    return {pairs[best].first, pairs[best + 1].first};
}

// Thrown by a runner to stop the whole scan without recording a failure;
// completed runs keep their persisted results, so a later invocation resumes.
struct ScanInterrupt : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScanRunOutcome {
    bool ok = false;
    std::string run_id;
    double naturalness = 0.0;
    double raw_return = 0.0;
    std::string error;
};

// Runs one adversary training for (lambda, seed); `round` and `index` only
// identify the slot for persistence and seeding.
using AdversaryRunner =
    std::function<ScanRunOutcome(double lambda, std::uint64_t seed, int round, int index)>;

struct ScanRun {
    std::uint64_t seed = 0;
    int round = 0;
    int index = 0;
    double lambda = 0.0;
    std::string run_id;
    std::string status; // "done" | "failed"
    double naturalness = 0.0;
    double adversarialness = 0.0;
    double raw_return = 0.0;
    std::string error;
};

struct ScanState {
    std::vector<ScanRun> runs; // seed-major, then round, then grid index
    Normalization norm;
    bool norm_valid = false;
    // Refinement bounds per seed, one entry per round (the bounds the round's
    // grid was drawn from).
    std::map<std::uint64_t, std::vector<std::pair<double, double>>> bounds_history;
};

using ScanProgress = std::function<void(const ScanRun&)>;

// RIGID: per seed, d rounds of k log-spaced lambdas, narrowing the bounds
// through LARGEST-JUMP on that seed's accumulated naturalness curve. Seeds
// refine independently; a round is a barrier across all seeds. Failed runs
// are recorded and excluded from refinement. Adversarialness is normalized
// once round 0 fixes the calibration ceiling (unless an override is given).
inline ScanState rigid_scan(const ScanConfig& cfg, const AdversaryRunner& runner, double coop_mean_return,
                            int jobs = 1, const std::optional<Normalization>& norm_override = std::nullopt,
                            const ScanProgress& progress = {}) {
    cfg.validate();
    if (jobs < 1) throw ContractError("rigid_scan: jobs must be >= 1");

    ScanState state;
    std::map<std::uint64_t, std::pair<double, double>> bounds;
    for (const auto s : cfg.seeds) bounds[s] = {cfg.lambda_min, cfg.lambda_max};

    for (int round = 0; round < cfg.rounds; ++round) {
        struct Task {
            std::uint64_t seed;
            int index;
            double lambda;
        };
        std::vector<Task> tasks;
        for (const auto seed : cfg.seeds) {
            state.bounds_history[seed].push_back(bounds[seed]);
            const auto grid = log_space_grid(bounds[seed].first, bounds[seed].second, cfg.samples_per_round);
            for (int i = 0; i < static_cast<int>(grid.size()); ++i)
                tasks.push_back({seed, i, grid[i]});
        }

        std::vector<ScanRun> round_runs(tasks.size());
        std::atomic<std::size_t> next{0};
        std::atomic<bool> interrupted{false};
        auto worker = [&] {
            for (;;) {
                if (interrupted.load()) return;
                const std::size_t t = next.fetch_add(1);
                if (t >= tasks.size()) return;
                const Task& task = tasks[t];
                ScanRun run;
                run.seed = task.seed;
                run.round = round;
                run.index = task.index;
                run.lambda = task.lambda;
                try {
                    const ScanRunOutcome out = runner(task.lambda, task.seed, round, task.index);
                    run.run_id = out.run_id;
                    if (out.ok) {
                        run.status = "done";
                        run.naturalness = out.naturalness;
                        run.raw_return = out.raw_return;
                    } else {
                        run.status = "failed";
                        run.error = out.error;
                    }
                } catch (const ScanInterrupt&) {
                    interrupted.store(true);
                    return;
                } catch (const std::exception& e) {
                    run.status = "failed";
                    run.error = e.what();
                }
                round_runs[t] = std::move(run);
            }
        };
        {
            std::vector<std::thread> pool;
            const int n_workers = std::min<int>(jobs, static_cast<int>(tasks.size()));
            pool.reserve(n_workers);
            for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        if (interrupted.load()) throw ScanInterrupt("scan interrupted");
        for (auto& r : round_runs) state.runs.push_back(std::move(r));

        // Calibrate normalization after the first round: the ceiling is the
        // most adversarial observed endpoint run.
        if (!state.norm_valid) {
            if (norm_override) {
                state.norm = *norm_override;
            } else {
                double hi = -1e300;
                for (const auto& r : state.runs)
                    if (r.status == "done") hi = std::max(hi, -r.raw_return);
                state.norm.lo = -coop_mean_return;
                state.norm.hi = hi > state.norm.lo ? hi : state.norm.lo + 1.0;
            }
            state.norm_valid = true;
        }
        for (auto& r : state.runs)
            if (r.status == "done")
                r.adversarialness = normalize_adversarialness(r.raw_return, state.norm.lo, state.norm.hi);
        if (progress)
            for (const auto& r : state.runs)
                if (r.round == round) progress(r);

        if (round + 1 >= cfg.rounds) break;

        // Refine bounds per seed from its successful runs inside the current
        // bounds, deduplicating repeated lambdas.
        for (const auto seed : cfg.seeds) {
            std::map<double, double> by_lambda;
            for (const auto& r : state.runs)
                if (r.seed == seed && r.status == "done" && r.lambda >= bounds[seed].first &&
                    r.lambda <= bounds[seed].second && !by_lambda.count(r.lambda))
                    by_lambda.emplace(r.lambda, r.naturalness);
            if (by_lambda.size() < 2) continue; // keep current bounds
            std::vector<double> ls, ns;
            for (const auto& [l, natv] : by_lambda) {
                ls.push_back(l);
                ns.push_back(natv);
            }
            bounds[seed] = largest_jump(ns, ls, cfg.window);
        }
    }
    return state;
}

inline std::vector<FrontierPoint> scan_frontier_points(const ScanState& state) {
    std::vector<FrontierPoint> pts;
    for (const auto& r : state.runs) {
        if (r.status != "done") continue;
        FrontierPoint p;
        p.run_id = r.run_id;
        p.lambda = r.lambda;
        p.seed = r.seed;
        p.naturalness = r.naturalness;
        p.adversarialness = r.adversarialness;
        pts.push_back(std::move(p));
    }
    return pts;
}

} // namespace natadv
