#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "natadv/rigid.hpp"
#include "natadv/rng.hpp"

using namespace natadv;

namespace {

// Independent transcription of the windowed-envelope construction, used as
// the oracle for randomized cross-checks.
std::pair<double, double> jump_oracle(std::vector<double> values, std::vector<double> lambdas, int L) {
    std::vector<std::size_t> idx(values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return lambdas[a] != lambdas[b] ? lambdas[a] < lambdas[b] : values[a] < values[b];
    });
    std::vector<double> S, L_sorted;
    for (auto i : idx) {
        S.push_back(values[i]);
        L_sorted.push_back(lambdas[i]);
    }
    const int n = static_cast<int>(S.size());
    auto lower_env = [&](int i) {
        double m = 1e300;
        for (int j = std::max(i + 1 - L, 0); j <= i; ++j) m = std::min(m, S[j]);
        return m;
    };
    auto upper_env = [&](int i) {
        double m = -1e300;
        for (int j = i; j < std::min(i + L, n); ++j) m = std::max(m, S[j]);
        return m;
    };
    int best = 0;
    double best_gap = -1e300;
    for (int i = 0; i + 1 < n; ++i) {
        const double gap = upper_env(i + 1) - lower_env(i);
        if (gap > best_gap) {
            best_gap = gap;
            best = i;
        }
    }
    return {L_sorted[best], L_sorted[best + 1]};
}

ScanRunOutcome synthetic_run(double lambda, std::uint64_t seed, int round, int index,
                             double fail_lambda = -1.0) {
    ScanRunOutcome out;
    if (fail_lambda > 0.0 && std::fabs(lambda - fail_lambda) < 1e-12) {
        out.ok = false;
        out.error = "injected failure";
        return out;
    }
    out.ok = true;
    out.run_id = "syn-" + std::to_string(seed) + "-" + std::to_string(round) + "-" + std::to_string(index);
    // Smooth sigmoid naturalness in log-lambda with a small seeded wiggle.
    const double x = std::log10(lambda);
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(std::llround(x * 1e6))));
    out.naturalness = 1.0 / (1.0 + std::exp(-1.7 * (x + 1.0))) + 0.02 * (rng.uniform() - 0.5);
    out.naturalness = std::clamp(out.naturalness, 0.0, 1.0);
    out.raw_return = -400.0 + 700.0 * out.naturalness; // natural runs score high returns
    return out;
}

} // namespace

TEST_CASE("log_space_grid fixtures") {
    SECTION("log-even decade") {
        const auto g = log_space_grid(1.0, 100.0, 3);
        REQUIRE(g.size() == 3);
        REQUIRE(g[0] == 1.0);
        REQUIRE(g[1] == Catch::Approx(10.0).margin(1e-12));
        REQUIRE(g[2] == 100.0);
    }
    SECTION("degenerate single sample") {
        const auto g = log_space_grid(5.0, 5.0, 1);
        REQUIRE(g.size() == 1);
        REQUIRE(g[0] == Catch::Approx(5.0).margin(1e-12));
    }
    SECTION("six samples over the paper range form a geometric progression") {
        const auto g = log_space_grid(1e-5, 10.0, 6);
        REQUIRE(g.size() == 6);
        REQUIRE(g.front() == 1e-5);
        REQUIRE(g.back() == 10.0);
        const double r0 = g[1] / g[0];
        for (std::size_t i = 0; i + 1 < g.size(); ++i)
            REQUIRE(g[i + 1] / g[i] == Catch::Approx(r0).epsilon(1e-9));
    }
    SECTION("contract errors") {
        REQUIRE_THROWS_AS(log_space_grid(0.0, 1.0, 3), ContractError);
        REQUIRE_THROWS_AS(log_space_grid(-1.0, 1.0, 3), ContractError);
        REQUIRE_THROWS_AS(log_space_grid(2.0, 1.0, 3), ContractError);
        REQUIRE_THROWS_AS(log_space_grid(1.0, 2.0, 0), ContractError);
    }
}

TEST_CASE("largest_jump matches ten hand-traced sequences") {
    struct Case {
        std::vector<double> nat, lambda;
        int L;
        std::pair<double, double> expect;
    };
    const std::vector<Case> cases{
        // 1. clean staircase jump
        {{0.1, 0.12, 0.7, 0.72}, {1, 2, 3, 4}, 2, {2, 3}},
        // 2. constant values: zero gap, first pair by tie-break
        {{0.5, 0.5, 0.5}, {1, 2, 3}, 1, {1, 2}},
        // 3. noisy dip
        {{0.1, 0.6, 0.05, 0.65}, {1, 2, 3, 4}, 2, {3, 4}},
        // 4. minimal input
        {{0.0, 1.0}, {1, 2}, 1, {1, 2}},
        // 5. uniform ramp (exactly representable): every gap ties, first
        //    boundary wins
        {{0.125, 0.25, 0.375, 0.5, 0.625}, {1, 2, 3, 4, 5}, 1, {1, 2}},
        // 6. window larger than the list
        {{0.2, 0.9, 0.3}, {1, 2, 3}, 5, {1, 2}},
        // 7. unsorted lambdas are sorted first (same data as case 1)
        {{0.72, 0.1, 0.7, 0.12}, {4, 1, 3, 2}, 2, {2, 3}},
        // 8. early spike dominates the leading envelope
        {{0.1, 0.95, 0.12, 0.14, 0.8, 0.82}, {1, 2, 3, 4, 5, 6}, 3, {1, 2}},
        // 9. decreasing values: all gaps negative and equal, first boundary
        {{0.875, 0.75, 0.625, 0.5}, {1, 2, 3, 4}, 2, {1, 2}},
        // 10. plateau then jump; window lookahead ties, smallest index wins
        {{0.2, 0.2, 0.2, 0.8, 0.8}, {1, 2, 3, 4, 5}, 2, {2, 3}},
    };
    for (std::size_t i = 0; i < cases.size(); ++i) {
        INFO("case " << i + 1);
        const auto got = largest_jump(cases[i].nat, cases[i].lambda, cases[i].L);
        REQUIRE(got.first == cases[i].expect.first);
        REQUIRE(got.second == cases[i].expect.second);
        const auto oracle = jump_oracle(cases[i].nat, cases[i].lambda, cases[i].L);
        REQUIRE(got == oracle);
    }
}

TEST_CASE("largest_jump equals the oracle on random sequences") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(10));
        const int L = 1 + static_cast<int>(rng.uniform_int(4));
        std::vector<double> nat(n), lam(n);
        for (int i = 0; i < n; ++i) {
            nat[i] = rng.uniform();
            lam[i] = std::exp(rng.uniform(-5.0, 2.0));
        }
        REQUIRE(largest_jump(nat, lam, L) == jump_oracle(nat, lam, L));
    }
}

TEST_CASE("largest_jump contract errors") {
    REQUIRE_THROWS_AS(largest_jump({0.5}, {1.0}, 1), ContractError);
    REQUIRE_THROWS_AS(largest_jump({0.5, 0.6}, {1.0}, 1), ContractError);
    REQUIRE_THROWS_AS(largest_jump({0.5, 0.6}, {1.0, 2.0}, 0), ContractError);
}

TEST_CASE("rigid_scan accounting at desk and paper scale") {
    auto runner = [](double l, std::uint64_t s, int r, int i) { return synthetic_run(l, s, r, i); };

    SECTION("desk preset: 2 rounds x 4 samples x 2 seeds = 16") {
        ScanConfig cfg;
        cfg.rounds = 2;
        cfg.samples_per_round = 4;
        cfg.seeds = {1, 2};
        const ScanState st = rigid_scan(cfg, runner, 350.0);
        REQUIRE(st.runs.size() == 16);
        for (const auto& s : cfg.seeds) {
            int count = 0;
            for (const auto& r : st.runs)
                if (r.seed == s) ++count;
            REQUIRE(count == cfg.rounds * cfg.samples_per_round);
        }
    }
    SECTION("paper defaults: 3 rounds x 6 samples x 3 seeds = 54") {
        ScanConfig cfg; // defaults
        const ScanState st = rigid_scan(cfg, runner, 350.0);
        REQUIRE(st.runs.size() == 54);
    }
}

TEST_CASE("one-round scan emits exactly the initial log grid per seed") {
    ScanConfig cfg;
    cfg.rounds = 1;
    cfg.samples_per_round = 5;
    cfg.seeds = {3, 9};
    auto runner = [](double l, std::uint64_t s, int r, int i) { return synthetic_run(l, s, r, i); };
    const ScanState st = rigid_scan(cfg, runner, 350.0);
    const auto grid = log_space_grid(cfg.lambda_min, cfg.lambda_max, 5);
    for (const auto seed : cfg.seeds) {
        std::vector<double> got;
        for (const auto& r : st.runs)
            if (r.seed == seed) got.push_back(r.lambda);
        REQUIRE(got == grid);
    }
}

TEST_CASE("refinement bounds nest and stay inside sampled lambdas") {
    ScanConfig cfg;
    cfg.rounds = 3;
    cfg.samples_per_round = 5;
    cfg.seeds = {1, 2, 3};
    cfg.window = 2;
    auto runner = [](double l, std::uint64_t s, int r, int i) { return synthetic_run(l, s, r, i); };
    const ScanState st = rigid_scan(cfg, runner, 350.0);

    for (const auto seed : cfg.seeds) {
        const auto& history = st.bounds_history.at(seed);
        REQUIRE(history.size() == 3);
        std::set<double> seen;
        for (const auto& r : st.runs)
            if (r.seed == seed) seen.insert(r.lambda);
        for (std::size_t round = 1; round < history.size(); ++round) {
            REQUIRE(history[round].first >= history[round - 1].first);
            REQUIRE(history[round].second <= history[round - 1].second);
            REQUIRE(history[round].first < history[round].second);
            // Both refined endpoints were previously sampled lambdas.
            REQUIRE(seen.count(history[round].first) == 1);
            REQUIRE(seen.count(history[round].second) == 1);
        }
    }
}

TEST_CASE("scan results are replay-deterministic and job-count independent") {
    ScanConfig cfg;
    cfg.rounds = 2;
    cfg.samples_per_round = 4;
    cfg.seeds = {1, 2};
    auto runner = [](double l, std::uint64_t s, int r, int i) { return synthetic_run(l, s, r, i); };
    const ScanState a = rigid_scan(cfg, runner, 350.0, 1);
    const ScanState b = rigid_scan(cfg, runner, 350.0, 4);
    REQUIRE(a.runs.size() == b.runs.size());
    for (std::size_t i = 0; i < a.runs.size(); ++i) {
        REQUIRE(a.runs[i].lambda == b.runs[i].lambda);
        REQUIRE(a.runs[i].seed == b.runs[i].seed);
        REQUIRE(a.runs[i].naturalness == b.runs[i].naturalness);
        REQUIRE(a.runs[i].adversarialness == b.runs[i].adversarialness);
        REQUIRE(a.runs[i].run_id == b.runs[i].run_id);
    }
    REQUIRE(a.norm.lo == b.norm.lo);
    REQUIRE(a.norm.hi == b.norm.hi);
}

TEST_CASE("a failed run is recorded and does not disturb the others") {
    ScanConfig cfg;
    cfg.rounds = 2;
    cfg.samples_per_round = 4;
    cfg.seeds = {1};
    const auto grid = log_space_grid(cfg.lambda_min, cfg.lambda_max, 4);
    const double fail_at = grid[1];
    const Normalization fixed{-350.0, 400.0};

    auto ok_runner = [](double l, std::uint64_t s, int r, int i) { return synthetic_run(l, s, r, i); };
    auto flaky_runner = [fail_at](double l, std::uint64_t s, int r, int i) {
        return synthetic_run(l, s, r, i, fail_at);
    };
    const ScanState good = rigid_scan(cfg, ok_runner, 350.0, 1, fixed);
    const ScanState flaky = rigid_scan(cfg, flaky_runner, 350.0, 1, fixed);

    REQUIRE(flaky.runs.size() == good.runs.size());
    int failed = 0;
    for (const auto& r : flaky.runs)
        if (r.status == "failed") {
            ++failed;
            REQUIRE(r.error == "injected failure");
        }
    REQUIRE(failed >= 1);
    // Round-0 companions are untouched.
    for (std::size_t i = 0; i < 4; ++i) {
        if (flaky.runs[i].status != "done") continue;
        REQUIRE(flaky.runs[i].naturalness == good.runs[i].naturalness);
        REQUIRE(flaky.runs[i].adversarialness == good.runs[i].adversarialness);
    }
    // A runner that throws is also contained.
    auto throwing = [fail_at](double l, std::uint64_t s, int r, int i) {
        if (std::fabs(l - fail_at) < 1e-12) throw TrainingError("boom");
        return synthetic_run(l, s, r, i);
    };
    const ScanState caught = rigid_scan(cfg, throwing, 350.0, 1, fixed);
    int threw = 0;
    for (const auto& r : caught.runs)
        if (r.status == "failed") ++threw;
    REQUIRE(threw >= 1);
}

TEST_CASE("scan frontier points carry only successful runs") {
    ScanConfig cfg;
    cfg.rounds = 1;
    cfg.samples_per_round = 4;
    cfg.seeds = {1};
    const auto grid = log_space_grid(cfg.lambda_min, cfg.lambda_max, 4);
    auto flaky = [&](double l, std::uint64_t s, int r, int i) { return synthetic_run(l, s, r, i, grid[2]); };
    const ScanState st = rigid_scan(cfg, flaky, 350.0);
    const auto pts = scan_frontier_points(st);
    REQUIRE(pts.size() == 3);
}
