#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "corrnet3d/indicator.hpp"
#include "corrnet3d/pointcloud.hpp"
#include "corrnet3d/random.hpp"

namespace corrnet3d {

/// Fraction of rows whose predicted target index equals the ground truth.
inline double corr_strict(std::span<const std::size_t> pred, std::span<const std::size_t> gt) {
    if (pred.size() != gt.size())
        throw ShapeError("corr: prediction has " + std::to_string(pred.size()) + " rows, ground truth " + std::to_string(gt.size()));
    if (pred.empty()) throw ShapeError("corr: empty correspondence");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == gt[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// Largest pairwise Euclidean distance within the cloud.
inline double dist_max(const PointCloud& pc) {
    double best = 0.0;
    for (std::size_t i = 0; i < pc.size(); ++i)
        for (std::size_t j = i + 1; j < pc.size(); ++j) best = std::max(best, squared_distance(pc[i], pc[j]));
    return std::sqrt(best);
}

struct CurvePoint {
    double tolerance;
    double corr;
};

struct CorrReport {
    double strict = 0.0;
    std::vector<CurvePoint> curve;
    std::size_t n = 0;
    double dist_max = 0.0;
};

inline std::vector<double> default_tolerances() {
    std::vector<double> t;
    for (int i = 0; i <= 20; ++i) t.push_back(i / 100.0);
    return t;
}

/// Row i counts as correct at tolerance e when the predicted target point lies
/// within e * dist_max(target) of the true one.
inline CorrReport corr_tolerant(std::span<const std::size_t> pred, std::span<const std::size_t> gt, const PointCloud& target,
                                std::span<const double> tolerances) {
    if (tolerances.empty()) throw ContractError("corr_tolerant: empty tolerance list");
    if (!std::is_sorted(tolerances.begin(), tolerances.end()) || tolerances.front() < 0.0 || tolerances.back() > 1.0)
        throw ContractError("corr_tolerant: tolerances must be sorted ascending within [0, 1]");
    if (pred.size() != target.size()) throw ShapeError("corr_tolerant: prediction and target sizes differ");
    CorrReport report;
    report.strict = corr_strict(pred, gt);
    report.n = pred.size();
    report.dist_max = dist_max(target);
    std::vector<double> err(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] >= target.size() || gt[i] >= target.size()) throw ShapeError("corr_tolerant: index out of range");
        err[i] = pred[i] == gt[i] ? 0.0 : distance(target[pred[i]], target[gt[i]]);
    }
    for (double tol : tolerances) {
        const double radius = tol * report.dist_max;
        std::size_t ok = 0;
        for (double e : err) ok += e <= radius;
        report.curve.push_back({tol, static_cast<double>(ok) / static_cast<double>(err.size())});
    }
    return report;
}

/// Fraction correct at a single tolerance.
inline double corr_at(std::span<const std::size_t> pred, std::span<const std::size_t> gt, const PointCloud& target, double tol) {
    const double t[] = {tol};
    return corr_tolerant(pred, gt, target, t).curve.front().corr;
}

// ---------------------------------------------------------------------------
// Pseudo clustering
// ---------------------------------------------------------------------------

/// FPS key points, nearest-key assignment, and members of each cluster sorted
/// by distance to their key (ties by index; the key itself is always first).
struct ClusterMap {
    std::vector<std::size_t> keys;
    std::vector<std::size_t> assignment;
    std::vector<std::vector<std::size_t>> members;
};

inline ClusterMap build_clusters(const PointCloud& pc, std::size_t m) {
    ClusterMap cm;
    cm.keys = fps_sample(pc, m);
    cm.assignment.resize(pc.size());
    cm.members.resize(m);
    for (std::size_t i = 0; i < pc.size(); ++i) {
        std::size_t best = 0;
        double best_d = squared_distance(pc[i], pc[cm.keys[0]]);
        for (std::size_t c = 1; c < m; ++c) {
            const double d = squared_distance(pc[i], pc[cm.keys[c]]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        cm.assignment[i] = best;
    }
    // Keys own themselves even if another key sits on a duplicate point.
    for (std::size_t c = 0; c < m; ++c) cm.assignment[cm.keys[c]] = c;
    for (std::size_t i = 0; i < pc.size(); ++i) cm.members[cm.assignment[i]].push_back(i);
    for (std::size_t c = 0; c < m; ++c) {
        const auto& key = pc[cm.keys[c]];
        const std::size_t key_idx = cm.keys[c];
        std::sort(cm.members[c].begin(), cm.members[c].end(), [&](std::size_t a, std::size_t b) {
            if (a == key_idx || b == key_idx) return a == key_idx && b != key_idx;
            const double da = squared_distance(pc[a], key), db = squared_distance(pc[b], key);
            return da != db ? da < db : a < b;
        });
    }
    return cm;
}

/// Correspondence between two key-point clouds of equal size.
using KeyMatcher = std::function<std::vector<std::size_t>(const PointCloud& keys_a, const PointCloud& keys_b)>;

/// Dense correspondence from key-point correspondence: rank r of cluster c in
/// A maps to rank r of the matched cluster in B, or to that cluster's key
/// point when B's cluster is too small.
inline std::vector<std::size_t> pseudo_cluster_correspond(const PointCloud& a, const PointCloud& b, std::size_t m,
                                                          const KeyMatcher& matcher) {
    if (a.size() != b.size()) throw ShapeError("pseudo clustering: clouds differ in size");
    const ClusterMap ca = build_clusters(a, m);
    const ClusterMap cb = build_clusters(b, m);
    const auto key_corr = matcher(a.subset(ca.keys), b.subset(cb.keys));
    if (key_corr.size() != m) throw ShapeError("pseudo clustering: key matcher returned the wrong number of rows");
    std::vector<std::size_t> out(a.size());
    for (std::size_t c = 0; c < m; ++c) {
        if (key_corr[c] >= m) throw ShapeError("pseudo clustering: key matcher index out of range");
        const auto& target = cb.members[key_corr[c]];
        const auto& source = ca.members[c];
        for (std::size_t r = 0; r < source.size(); ++r) out[source[r]] = r < target.size() ? target[r] : target.front();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalizer benchmark
// ---------------------------------------------------------------------------

struct BenchRow {
    std::string method;
    std::size_t n;
    double median_seconds;
};

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Median wall time of desmooth and sinkhorn(iterations) on random [n x n]
/// similarity-like inputs, one row per (method, size).
inline std::vector<BenchRow> bench_normalizers(std::span<const std::size_t> sizes, std::size_t sinkhorn_iterations,
                                               std::size_t repeats, std::uint64_t seed = 7) {
    if (repeats == 0) throw ContractError("bench: repeats must be >= 1");
    std::vector<BenchRow> rows;
    Rng rng(seed);
    for (std::size_t n : sizes) {
        if (n < 2) throw ContractError("bench: sizes must be >= 2");
        std::vector<double> data(n * n);
        for (auto& x : data) x = 1.0 / (rng.uniform() + 0.05);
        const Tensor s({n, n}, std::move(data));
        auto time = [&](auto&& fn) {
            std::vector<double> samples;
            for (std::size_t r = 0; r < repeats; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                const Tensor out = fn();
                const auto t1 = std::chrono::steady_clock::now();
                if (out.size() != n * n) throw ShapeError("bench: normalizer output has the wrong size");
                samples.push_back(std::chrono::duration<double>(t1 - t0).count());
            }
            return median(std::move(samples));
        };
        rows.push_back({"desmooth", n, time([&] { return desmooth(s).soft; })});
        rows.push_back({"sinkhorn", n, time([&] { return sinkhorn(s, sinkhorn_iterations).soft; })});
    }
    return rows;
}

/// Least-squares slope of log(time) against log(n) for one method.
inline double loglog_slope(std::span<const BenchRow> rows, const std::string& method) {
    std::vector<double> xs, ys;
    for (const auto& r : rows)
        if (r.method == method) {
            xs.push_back(std::log(static_cast<double>(r.n)));
            ys.push_back(std::log(r.median_seconds));
        }
    if (xs.size() < 2) throw ContractError("loglog_slope: need at least two sizes");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    return num / den;
}

}  // namespace corrnet3d
