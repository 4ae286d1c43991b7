#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "natadv/frontier.hpp"
#include "natadv/rng.hpp"

using namespace natadv;

namespace {

FrontierPoint pt(double nat, double adv, double lambda = 1.0, const std::string& id = "r") {
    FrontierPoint p;
    p.run_id = id;
    p.lambda = lambda;
    p.naturalness = nat;
    p.adversarialness = adv;
    return p;
}

std::vector<FrontierPoint> brute_force_pareto(const std::vector<FrontierPoint>& pts) {
    std::vector<FrontierPoint> out;
    for (const auto& p : pts) {
        bool dominated = false;
        for (const auto& q : pts)
            if (dominates(q, p)) dominated = true;
        if (!dominated) {
            bool dup = false;
            for (const auto& k : out)
                if (k.naturalness == p.naturalness && k.adversarialness == p.adversarialness) dup = true;
            if (!dup) out.push_back(p);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const FrontierPoint& a, const FrontierPoint& b) { return a.naturalness < b.naturalness; });
    return out;
}

} // namespace

TEST_CASE("adversarialness normalization") {
    REQUIRE(normalize_adversarialness(-200.0, 200.0, 1400.0) == 0.0);
    REQUIRE(normalize_adversarialness(-1400.0, 200.0, 1400.0) == 1.0);
    REQUIRE(normalize_adversarialness(-800.0, 200.0, 1400.0) == 0.5);
    // Clipping beyond the range.
    REQUIRE(normalize_adversarialness(-2000.0, 200.0, 1400.0) == 1.0);
    REQUIRE(normalize_adversarialness(100.0, 200.0, 1400.0) == 0.0);
    REQUIRE_THROWS_AS(normalize_adversarialness(0.0, 5.0, 5.0), ContractError);
    REQUIRE_THROWS_AS(normalize_adversarialness(0.0, 7.0, 2.0), ContractError);
    // Idempotence over the unit normalization: already-clamped values are
    // fixed points.
    for (double v : {0.0, 0.25, 0.5, 1.0})
        REQUIRE(normalize_adversarialness(-v, 0.0, 1.0) == v);
}

TEST_CASE("pareto extraction fixtures") {
    SECTION("dominated point removed") {
        const auto out = pareto_extract({pt(0.5, 0.5), pt(0.6, 0.6)});
        REQUIRE(out.size() == 1);
        REQUIRE(out[0].naturalness == 0.6);
    }
    SECTION("incomparable points all retained, sorted by naturalness") {
        const auto out = pareto_extract({pt(0.8, 0.3), pt(0.2, 0.9), pt(0.5, 0.5)});
        REQUIRE(out.size() == 3);
        REQUIRE(out[0].naturalness == 0.2);
        REQUIRE(out[1].naturalness == 0.5);
        REQUIRE(out[2].naturalness == 0.8);
    }
    SECTION("exact duplicates retained once") {
        const auto out = pareto_extract({pt(0.4, 0.7, 1, "a"), pt(0.4, 0.7, 2, "b")});
        REQUIRE(out.size() == 1);
    }
    SECTION("empty input is a contract error") {
        REQUIRE_THROWS_AS(pareto_extract({}), ContractError);
    }
}

TEST_CASE("pareto extraction matches the quadratic oracle on random sets") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<FrontierPoint> pts;
        const int n = 50;
        for (int i = 0; i < n; ++i) pts.push_back(pt(rng.uniform(), rng.uniform(), rng.uniform(), "r" + std::to_string(i)));
        const auto fast = pareto_extract(pts);
        const auto oracle = brute_force_pareto(pts);
        REQUIRE(fast.size() == oracle.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
            REQUIRE(fast[i].naturalness == oracle[i].naturalness);
            REQUIRE(fast[i].adversarialness == oracle[i].adversarialness);
        }
        // Dominance soundness: nothing in the full set dominates a member.
        for (const auto& p : fast)
            for (const auto& q : pts) REQUIRE_FALSE(dominates(q, p));
    }
}

TEST_CASE("auc fixtures") {
    SECTION("single point extends to a flat line") {
        REQUIRE(frontier_auc({pt(0.5, 1.0)}) == Catch::Approx(1.0).margin(1e-15));
        REQUIRE(frontier_auc({pt(0.3, 0.4)}) == Catch::Approx(0.4).margin(1e-15));
    }
    SECTION("triangle") {
        REQUIRE(frontier_auc({pt(0.0, 1.0), pt(1.0, 0.0)}) == Catch::Approx(0.5).margin(1e-15));
    }
    SECTION("three-point trapezoid sums") {
        REQUIRE(frontier_auc({pt(0.0, 1.0), pt(0.5, 0.5), pt(1.0, 0.0)}) ==
                Catch::Approx(0.5).margin(1e-15));
    }
    SECTION("empty frontier is a contract error") {
        REQUIRE_THROWS_AS(frontier_auc({}), ContractError);
    }
}

TEST_CASE("auc responds correctly to added points") {
    Rng rng(88);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<FrontierPoint> pts;
        for (int i = 0; i < 12; ++i) pts.push_back(pt(rng.uniform(), rng.uniform()));
        const double base = frontier_auc(pareto_extract(pts));

        // A point dominating an existing frontier point never decreases AUC.
        const auto front = pareto_extract(pts);
        const auto& target = front[rng.uniform_int(front.size())];
        auto plus = pts;
        plus.push_back(pt(std::min(1.0, target.naturalness + 0.05), std::min(1.0, target.adversarialness + 0.05)));
        REQUIRE(frontier_auc(pareto_extract(plus)) >= base - 1e-12);

        // A dominated point never changes it.
        auto plus2 = pts;
        plus2.push_back(pt(target.naturalness * 0.5, target.adversarialness * 0.5));
        REQUIRE(frontier_auc(pareto_extract(plus2)) == Catch::Approx(base).margin(1e-12));
    }
}

TEST_CASE("horizontal extension makes a flat leftmost point free") {
    // Adding a new leftmost point at the same adversarialness as the old
    // leftmost leaves the AUC unchanged.
    std::vector<FrontierPoint> pts{pt(0.5, 0.8), pt(0.9, 0.2)};
    const double base = frontier_auc(pareto_extract(pts));
    pts.push_back(pt(0.2, 0.8));
    REQUIRE(frontier_auc(pareto_extract(pts)) == Catch::Approx(base).margin(1e-15));
}

TEST_CASE("build_frontier normalizes, extracts and scores") {
    Normalization norm{100.0, 500.0};
    std::vector<FrontierPoint> raw{pt(0.9, 0, 0.1, "a"), pt(0.3, 0, 1.0, "b"), pt(0.5, 0, 0.5, "c")};
    std::vector<double> returns{-180.0, -500.0, -300.0};
    const Frontier f = build_frontier(raw, returns, norm);
    REQUIRE(f.all_points.size() == 3);
    REQUIRE(f.all_points[0].adversarialness == Catch::Approx(0.2));
    REQUIRE(f.all_points[1].adversarialness == Catch::Approx(1.0));
    REQUIRE(f.all_points[2].adversarialness == Catch::Approx(0.5));
    REQUIRE(f.pareto_points.size() == 3); // all incomparable here
    REQUIRE(f.auc > 0.0);

    SECTION("single run frontier AUC equals its adversarialness") {
        const Frontier g = build_frontier({pt(0.4, 0, 1.0, "solo")}, {-300.0}, norm);
        REQUIRE(g.auc == Catch::Approx(0.5).margin(1e-15));
    }
    SECTION("csv layout") {
        const std::string csv = frontier_csv(f);
        REQUIRE(csv.find("run_id,lambda,seed,naturalness,adversarialness,pareto_flag\n") == 0);
        REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 4);
        REQUIRE(csv.find(",1\n") != std::string::npos);
    }
    SECTION("svg has one polyline and a marker per run") {
        const std::string svg = frontier_svg(f);
        std::size_t polylines = 0, circles = 0, pos = 0;
        while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
            ++polylines;
            ++pos;
        }
        pos = 0;
        while ((pos = svg.find("<circle", pos)) != std::string::npos) {
            ++circles;
            ++pos;
        }
        REQUIRE(polylines == 1);
        REQUIRE(circles == f.all_points.size());
    }
}
