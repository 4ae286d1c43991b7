#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "natadv/errors.hpp"

namespace natadv {

// Affine map from negative robot return to [0,1]; lo/hi are calibrated per
// robot checkpoint (lo from the cooperative pair, hi from the pure-adversary
// endpoint) and stored with the frontier.
struct Normalization {
    double lo = 0.0;
    double hi = 1.0;
};

inline double normalize_adversarialness(double mean_robot_return, double lo, double hi) {
    if (!(lo < hi)) throw ContractError("normalize_adversarialness: requires lo < hi");
    const double x = (-mean_robot_return - lo) / (hi - lo);
    return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x);
}

struct FrontierPoint {
    std::string run_id;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    double naturalness = 0.0;
    double adversarialness = 0.0;
};

inline bool dominates(const FrontierPoint& q, const FrontierPoint& p) {
    return q.naturalness >= p.naturalness && q.adversarialness >= p.adversarialness &&
           (q.naturalness > p.naturalness || q.adversarialness > p.adversarialness);
}

// Non-dominated subset, sorted by naturalness ascending. Exact coordinate
// duplicates are kept once.
inline std::vector<FrontierPoint> pareto_extract(const std::vector<FrontierPoint>& points) {
    if (points.empty()) throw ContractError("pareto_extract: empty point set");
    std::vector<FrontierPoint> kept;
    for (const auto& p : points) {
        bool drop = false;
        for (const auto& q : points) {
            if (dominates(q, p)) {
                drop = true;
                break;
            }
        }
        if (drop) continue;
        bool dup = false;
        for (const auto& k : kept)
            if (k.naturalness == p.naturalness && k.adversarialness == p.adversarialness) {
                dup = true;
                break;
            }
        if (!dup) kept.push_back(p);
    }
    std::sort(kept.begin(), kept.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
        if (a.naturalness != b.naturalness) return a.naturalness < b.naturalness;
        return a.adversarialness < b.adversarialness;
    });
    return kept;
}

// Trapezoidal area under the Pareto polyline, extended horizontally to x=0
// from the leftmost point and to x=1 from the rightmost. Lower means a more
// robust robot.
inline double frontier_auc(const std::vector<FrontierPoint>& pareto_sorted) {
    if (pareto_sorted.empty()) throw ContractError("auc: empty frontier");
    double area = pareto_sorted.front().adversarialness * pareto_sorted.front().naturalness;
    for (std::size_t i = 0; i + 1 < pareto_sorted.size(); ++i) {
        const auto& a = pareto_sorted[i];
        const auto& b = pareto_sorted[i + 1];
        area += 0.5 * (a.adversarialness + b.adversarialness) * (b.naturalness - a.naturalness);
    }
    area += pareto_sorted.back().adversarialness * (1.0 - pareto_sorted.back().naturalness);
    return area;
}

struct Frontier {
    std::vector<FrontierPoint> all_points;
    std::vector<FrontierPoint> pareto_points;
    double auc = 0.0;
    Normalization norm;
};

// `raw_returns[i]` is the mean robot return of run i; coordinates are
// normalized here so all points share one calibration.
inline Frontier build_frontier(std::vector<FrontierPoint> points_raw_adv,
                               const std::vector<double>& raw_returns, const Normalization& norm) {
    if (points_raw_adv.size() != raw_returns.size())
        throw ContractError("build_frontier: points/returns size mismatch");
    if (points_raw_adv.empty()) throw ContractError("build_frontier: no successful runs");
    Frontier f;
    f.norm = norm;
    for (std::size_t i = 0; i < points_raw_adv.size(); ++i) {
        FrontierPoint p = points_raw_adv[i];
        p.adversarialness = normalize_adversarialness(raw_returns[i], norm.lo, norm.hi);
        f.all_points.push_back(std::move(p));
    }
    f.pareto_points = pareto_extract(f.all_points);
    f.auc = frontier_auc(f.pareto_points);
    return f;
}

inline bool is_pareto_member(const Frontier& f, const FrontierPoint& p) {
    for (const auto& q : f.pareto_points)
        if (q.run_id == p.run_id && q.naturalness == p.naturalness &&
            q.adversarialness == p.adversarialness)
            return true;
    return false;
}

inline std::string frontier_csv(const Frontier& f) {
    std::string out = "run_id,lambda,seed,naturalness,adversarialness,pareto_flag\n";
    char buf[320];
    for (const auto& p : f.all_points) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%llu,%.17g,%.17g,%d\n", p.run_id.c_str(), p.lambda,
                      static_cast<unsigned long long>(p.seed), p.naturalness, p.adversarialness,
                      is_pareto_member(f, p) ? 1 : 0);
        out += buf;
    }
    return out;
}

// Scatter of all runs plus the frontier polyline, as a standalone SVG.
inline std::string frontier_svg(const Frontier& f, int width = 640, int height = 480) {
    const double mx = 60, my = 40;
    auto X = [&](double nat) { return mx + nat * (width - 2 * mx); };
    auto Y = [&](double adv) { return height - my - adv * (height - 2 * my); };
    char buf[512];
    std::string s;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\">\n", width, height);
    s += buf;
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"white\" stroke=\"black\"/>\n",
                  mx, my, width - 2 * mx, height - 2 * my);
    s += buf;
    s += "<text x=\"" + std::to_string(width / 2) + "\" y=\"" + std::to_string(height - 8) +
         "\" text-anchor=\"middle\">naturalness</text>\n";
    s += "<text x=\"16\" y=\"" + std::to_string(height / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + std::to_string(height / 2) +
         ")\">adversarialness</text>\n";

    std::string poly;
    {
        const auto& ps = f.pareto_points;
        std::snprintf(buf, sizeof buf, "%g,%g ", X(0.0), Y(ps.front().adversarialness));
        poly += buf;
        for (const auto& p : ps) {
            std::snprintf(buf, sizeof buf, "%g,%g ", X(p.naturalness), Y(p.adversarialness));
            poly += buf;
        }
        std::snprintf(buf, sizeof buf, "%g,%g", X(1.0), Y(ps.back().adversarialness));
        poly += buf;
    }
    s += "<polyline fill=\"none\" stroke=\"#e07020\" stroke-width=\"2\" points=\"" + poly + "\"/>\n";
    for (const auto& p : f.all_points) {
        const bool on_front = is_pareto_member(f, p);
        std::snprintf(buf, sizeof buf,
                      "<circle cx=\"%g\" cy=\"%g\" r=\"4\" fill=\"%s\"><title>%s lambda=%g</title></circle>\n",
                      X(p.naturalness), Y(p.adversarialness), on_front ? "#e07020" : "#4070c0",
                      p.run_id.c_str(), p.lambda);
        s += buf;
    }
    char auc_buf[96];
    std::snprintf(auc_buf, sizeof auc_buf, "<text x=\"%g\" y=\"%g\">AUC = %.4f</text>\n", mx + 8, my + 18, f.auc);
    s += auc_buf;
    s += "</svg>\n";
    return s;
}

} // namespace natadv
