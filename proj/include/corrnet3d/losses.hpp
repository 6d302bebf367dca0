#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "corrnet3d/ops.hpp"
#include "corrnet3d/pointcloud.hpp"

namespace corrnet3d {

struct LossWeights {
    double lambda1 = 0.1;    // permutation regularizer
    double lambda2 = 0.01;   // manifold regularizer
    std::size_t k_mfd = 10;  // neighbours per point in the manifold term
};

inline constexpr double kManifoldEpsilon = 1e-8;

/// ||A - A_tilde||_F^2 + ||B - B_tilde||_F^2
inline Tensor loss_rec(const Tensor& a, const Tensor& a_rec, const Tensor& b, const Tensor& b_rec) {
    return add(frobenius_sq(sub(a, a_rec)), frobenius_sq(sub(b, b_rec)));
}

/// ||P P^T - I||_F^2
inline Tensor loss_perm(const Tensor& p) {
    if (p.rank() != 2 || p.rows() != p.cols()) throw ShapeError("loss_perm: P must be square, got " + shape_string(p.shape()));
    return frobenius_sq(sub(matmul(p, transpose(p)), Tensor::identity(p.rows())));
}

namespace detail {

// sum over (i, k in nbrs(i)) of ||X_i - X_k||^2 / max(||c_i - c_k||^2, eps)
inline Tensor neighbour_distortion(const Tensor& mapped, const Tensor& coords, std::size_t k) {
    const std::size_t n = coords.rows();
    const auto nbrs = knn_indices(coords.data(), coords.data(), coords.cols(), k, true);
    std::vector<std::size_t> centres(n * k);
    std::vector<double> inv_denominator(n * k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < k; ++r) {
            const std::size_t j = nbrs[i * k + r];
            centres[i * k + r] = i;
            double d2 = 0.0;
            for (std::size_t c = 0; c < coords.cols(); ++c) {
                const double diff = coords(i, c) - coords(j, c);
                d2 += diff * diff;
            }
            inv_denominator[i * k + r] = 1.0 / std::max(d2, kManifoldEpsilon);
        }
    const Tensor diff = sub(gather_rows(mapped, centres), gather_rows(mapped, nbrs));
    return sum(mul(row_sum(mul(diff, diff)), Tensor({n * k, 1}, std::move(inv_denominator))));
}

}  // namespace detail

/// Local-geometry term: neighbours of a_i should stay close after mapping by
/// the rows of P (p_i B), and neighbours of b_i after mapping by the columns
/// of P (p^i A). Neighbourhoods come from the input coordinates. The clouds
/// enter as data; the gradient flows to P only.
inline Tensor loss_mfd(const Tensor& p, const Tensor& a, const Tensor& b, std::size_t k) {
    if (p.rank() != 2 || p.rows() != a.rows() || p.cols() != b.rows())
        throw ShapeError("loss_mfd: P " + shape_string(p.shape()) + " does not match clouds " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
    const Tensor ad = a.detach(), bd = b.detach();
    return add(detail::neighbour_distortion(matmul(p, bd), ad, k),
               detail::neighbour_distortion(matmul(transpose(p), ad), bd, k));
}

/// Reconstruction plus weighted permutation and manifold regularizers.
inline Tensor loss_total(const Tensor& a, const Tensor& b, const Tensor& a_rec, const Tensor& b_rec, const Tensor& p,
                         const LossWeights& w) {
    Tensor total = loss_rec(a, a_rec, b, b_rec);
    if (w.lambda1 != 0.0) total = add(total, scale(loss_perm(p), w.lambda1));
    if (w.lambda2 != 0.0) total = add(total, scale(loss_mfd(p, a, b, w.k_mfd), w.lambda2));
    return total;
}

/// Symmetric Chamfer distance: mean squared distance from each point to the
/// nearest point of the other set, summed over both directions.
inline Tensor loss_chamfer(const Tensor& x, const Tensor& y) {
    const Tensor d = pairwise_sq_distance(x, y);
    return add(scale(sum(row_min(d)), 1.0 / static_cast<double>(x.rows())),
               scale(sum(row_min(transpose(d))), 1.0 / static_cast<double>(y.rows())));
}

/// Binary matrix with ones at (i, gt[i]).
inline Tensor permutation_matrix(std::span<const std::size_t> gt) {
    if (!is_bijection(gt)) throw ContractError("permutation_matrix: ground truth is not a bijection");
    const std::size_t n = gt.size();
    auto m = Tensor::zeros({n, n});
    auto d = m.mutable_data();
    for (std::size_t i = 0; i < n; ++i) d[i * n + gt[i]] = 1.0;
    return m;
}

/// ||P - P_gt||_F^2
inline Tensor loss_supervised(const Tensor& p, std::span<const std::size_t> gt) {
    if (p.rank() != 2 || p.rows() != gt.size() || p.cols() != gt.size())
        throw ShapeError("loss_supervised: P " + shape_string(p.shape()) + " vs ground truth of size " + std::to_string(gt.size()));
    return frobenius_sq(sub(p, permutation_matrix(gt)));
}

}  // namespace corrnet3d
