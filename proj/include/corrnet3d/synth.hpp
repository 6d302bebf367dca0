#pragma once

// Synthetic training data: procedural base shapes and rigid / smoothly bent
// pairs with recorded ground-truth permutations.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "corrnet3d/pointcloud.hpp"
#include "corrnet3d/random.hpp"

namespace corrnet3d {

using Matrix3 = std::array<std::array<double, 3>, 3>;

inline Point3 apply(const Matrix3& r, const Point3& p) {
    Point3 out{};
    for (int i = 0; i < 3; ++i) out[i] = r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2];
    return out;
}

/// Rotation drawn uniformly from SO(3) (normalized Gaussian quaternion).
inline Matrix3 random_rotation(Rng& rng) {
    double w, x, y, z, norm;
    do {
        w = rng.normal();
        x = rng.normal();
        y = rng.normal();
        z = rng.normal();
        norm = std::sqrt(w * w + x * x + y * y + z * z);
    } while (norm < 1e-12);
    w /= norm;
    x /= norm;
    y /= norm;
    z /= norm;
    return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
             {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
             {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
}

inline constexpr Matrix3 kIdentity3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

/// Target = rotation * source + translation, rows scattered by `gt`
/// (target[gt[i]] is the image of source[i]).
inline ShapePair make_rigid_pair(const PointCloud& base, const Matrix3& rotation, const Point3& translation,
                                 std::vector<std::size_t> gt) {
    PointCloud target;
    target.points.resize(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        Point3 p = apply(rotation, base[i]);
        for (int k = 0; k < 3; ++k) p[k] += translation[k];
        target.points[gt.at(i)] = p;
    }
    return ShapePair(base, std::move(target), std::move(gt));
}

/// Uniform rotation, translation uniform in [-0.5, 0.5]^3, random row shuffle.
inline ShapePair synth_rigid_pair(const PointCloud& base, std::uint64_t seed) {
    Rng rng(seed);
    const Matrix3 r = random_rotation(rng);
    Point3 t{};
    for (auto& v : t) v = rng.uniform(-0.5, 0.5);
    return make_rigid_pair(base, r, t, rng.permutation(base.size()));
}

/// Smooth sinusoidal bend: one coordinate axis is displaced by
/// a * sin(pi * u + phase) where u is another axis, a in [0, amplitude]. The
/// map is a shear, hence a bijection. Rows are shuffled as in the rigid case.
inline ShapePair synth_nonrigid_pair(const PointCloud& base, double amplitude, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t along = rng.index(3);
    const std::size_t displaced = (along + 1 + rng.index(2)) % 3;
    const double a = amplitude * rng.uniform();
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    auto gt = rng.permutation(base.size());
    PointCloud target;
    target.points.resize(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        Point3 p = base[i];
        if (a > 0.0) p[displaced] += a * std::sin(M_PI * p[along] + phase);
        target.points[gt[i]] = p;
    }
    return ShapePair(base, std::move(target), std::move(gt));
}

namespace detail {

struct Ellipsoid {
    Point3 center;
    Point3 radii;
};

inline double ellipsoid_area(const Point3& r) {
    // Knud Thomsen's approximation.
    constexpr double p = 1.6075;
    const double a = std::pow(r[0], p), b = std::pow(r[1], p), c = std::pow(r[2], p);
    return 4.0 * M_PI * std::pow((a * b + a * c + b * c) / 3.0, 1.0 / p);
}

}  // namespace detail

/// Procedural asymmetric "creature": an ellipsoidal body with a head, a curled
/// tail, a dorsal fin and limbs on one side only, all proportions jittered by
/// the seed. Surface points are drawn area-weighted per part; the result is
/// normalized to the unit ball.
inline PointCloud synth_base_shape(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    auto jitter = [&](double v, double rel) { return v * rng.uniform(1.0 - rel, 1.0 + rel); };
    std::vector<detail::Ellipsoid> parts;
    parts.push_back({{0, 0, 0}, {jitter(0.55, 0.15), jitter(0.28, 0.15), jitter(0.22, 0.15)}});
    parts.push_back({{jitter(0.72, 0.1), 0.0, jitter(0.14, 0.3)}, {jitter(0.17, 0.2), jitter(0.15, 0.2), jitter(0.15, 0.2)}});
    const double curl = rng.uniform(0.15, 0.45);
    for (int s = 1; s <= 4; ++s) {
        const double u = s / 4.0;
        parts.push_back({{-0.55 - 0.32 * u, curl * u * u, 0.08 + 0.25 * u},
                         {jitter(0.10 - 0.015 * s, 0.1), jitter(0.07, 0.1), jitter(0.07, 0.1)}});
    }
    parts.push_back({{jitter(-0.05, 0.5), 0.0, jitter(0.30, 0.1)}, {jitter(0.16, 0.2), 0.025, jitter(0.12, 0.2)}});
    parts.push_back({{jitter(0.30, 0.2), jitter(0.34, 0.1), -0.22}, {0.07, 0.07, jitter(0.17, 0.2)}});
    parts.push_back({{jitter(-0.28, 0.2), jitter(0.32, 0.1), -0.24}, {0.07, 0.07, jitter(0.16, 0.2)}});

    std::vector<double> cumulative;
    double total = 0.0;
    for (const auto& part : parts) cumulative.push_back(total += detail::ellipsoid_area(part.radii));

    PointCloud pc;
    pc.points.reserve(n);
    while (pc.points.size() < n) {
        const double pick = rng.uniform() * total;
        std::size_t k = 0;
        while (k + 1 < parts.size() && cumulative[k] <= pick) ++k;
        const auto& part = parts[k];
        double x, y, z, norm;
        do {
            x = rng.normal();
            y = rng.normal();
            z = rng.normal();
            norm = std::sqrt(x * x + y * y + z * z);
        } while (norm < 1e-12);
        pc.points.push_back({part.center[0] + part.radii[0] * x / norm, part.center[1] + part.radii[1] * y / norm,
                             part.center[2] + part.radii[2] * z / norm});
    }
    return normalize_unit(pc);
}

}  // namespace corrnet3d
