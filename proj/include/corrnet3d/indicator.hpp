#pragma once

// Correspondence indicator: inverse-distance feature similarity, the DeSmooth
// normalizer, the Sinkhorn baseline and row-argmax quantization.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "corrnet3d/errors.hpp"
#include "corrnet3d/ops.hpp"
#include "corrnet3d/tensor.hpp"

namespace corrnet3d {

struct DeSmoothConfig {
    double t = 10.0;               // prior ratio applied to the standardized rows
    double tau = 3.0;              // dominance threshold on t * z, diagnostics only
    double variance_floor = 1e-8;  // guards constant rows
};

/// Soft correspondence (rows sum to 1) with its optional hard quantization.
struct CorrMatrix {
    Tensor soft;
    std::optional<std::vector<std::size_t>> hard;
};

inline constexpr double kSimilarityEpsilon = 1e-8;

/// Entry (i, j) = 1 / (||fa_i - fb_j|| + eps).
inline Tensor similarity(const Tensor& fa, const Tensor& fb, double eps = kSimilarityEpsilon) {
    for (const Tensor* f : {&fa, &fb})
        for (double v : f->data())
            if (std::isnan(v)) throw NumericError("similarity: NaN in features");
    return reciprocal(add_scalar(pairwise_distance(fa, fb), eps));
}

/// Row-standardized and t-scaled logits t * (s_ij - mu_i) / sigma_i.
inline Tensor desmooth_logits(const Tensor& s, const DeSmoothConfig& cfg) {
    if (s.rank() != 2 || s.cols() < 2) throw ShapeError("desmooth: need an [n x n] matrix with n >= 2, got " + shape_string(s.shape()));
    if (!(cfg.t > 0.0)) throw ContractError("desmooth: prior ratio t must be positive");
    const Tensor mu = row_mean(s);
    const Tensor sigma = row_std(s, cfg.variance_floor);
    return scale(div_col(sub_col(s, mu), sigma), cfg.t);
}

/// Single-pass DeSmooth: standardize each row, scale by t, row softmax.
inline CorrMatrix desmooth(const Tensor& s, const DeSmoothConfig& cfg = {}) {
    return {row_softmax(desmooth_logits(s, cfg)), std::nullopt};
}

struct DominanceStats {
    std::vector<std::size_t> counts;  // c_i: entries of row i with t*z >= tau
    double mean = 0.0;
    double stddev = 0.0;  // population

    /// Whether [mean - 3 sd, mean + 3 sd] contains 1.
    bool brackets_one() const { return mean - 3.0 * stddev <= 1.0 && 1.0 <= mean + 3.0 * stddev; }
};

/// Counts of logits >= tau per row of `logits` (the t-scaled z matrix).
inline DominanceStats dominance_stats(const Tensor& logits, double tau) {
    DominanceStats st;
    const auto m = logits.rows(), n = logits.cols();
    st.counts.assign(m, 0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (logits(i, j) >= tau) ++st.counts[i];
    for (auto c : st.counts) st.mean += static_cast<double>(c);
    st.mean /= static_cast<double>(m);
    for (auto c : st.counts) st.stddev += (static_cast<double>(c) - st.mean) * (static_cast<double>(c) - st.mean);
    st.stddev = std::sqrt(st.stddev / static_cast<double>(m));
    return st;
}

/// Smallest t in `candidates` whose mean dominance count over all matrices
/// lies in [lo, hi]; nullopt when none qualifies.
inline std::optional<double> calibrate_t(std::span<const Tensor> similarities, double tau,
                                         std::span<const double> candidates, double lo = 0.8, double hi = 1.2) {
    for (double t : candidates) {
        double mean = 0.0;
        std::size_t rows = 0;
        for (const auto& s : similarities) {
            const auto st = dominance_stats(desmooth_logits(s.detach(), {t, tau}), tau);
            mean += st.mean * static_cast<double>(st.counts.size());
            rows += st.counts.size();
        }
        if (rows == 0) return std::nullopt;
        mean /= static_cast<double>(rows);
        if (mean >= lo && mean <= hi) return t;
    }
    return std::nullopt;
}

namespace detail {

inline Tensor sinkhorn_sweeps(Tensor p, std::size_t iterations) {
    for (std::size_t it = 0; it < iterations; ++it) {
        p = transpose(row_normalize(transpose(p)));
        p = row_normalize(p);
    }
    return p;
}

}  // namespace detail

/// Alternating column/row normalization of a positive matrix, finishing on
/// rows. Each iteration is one column pass followed by one row pass.
inline Tensor sinkhorn_normalize(const Tensor& positive, std::size_t iterations) {
    if (iterations == 0) throw ContractError("sinkhorn: iterations must be >= 1");
    return detail::sinkhorn_sweeps(row_normalize(positive), iterations);
}

/// Sinkhorn layer on exp-scaled similarities: the initial row pass is a row
/// softmax, then `iterations` column/row sweeps.
inline CorrMatrix sinkhorn(const Tensor& s, std::size_t iterations) {
    if (iterations == 0) throw ContractError("sinkhorn: iterations must be >= 1");
    return {detail::sinkhorn_sweeps(row_softmax(s), iterations), std::nullopt};
}

/// Row argmax of a soft correspondence; ties go to the lowest column.
inline std::vector<std::size_t> quantize(const Tensor& soft) {
    const auto m = soft.rows(), n = soft.cols();
    std::vector<std::size_t> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < n; ++j)
            if (soft(i, j) > soft(i, best)) best = j;
        out[i] = best;
    }
    return out;
}

inline CorrMatrix with_hard(CorrMatrix c) {
    c.hard = quantize(c.soft);
    return c;
}

}  // namespace corrnet3d
