#pragma once

// Differentiable ops over 2-D (and scalar) tensors. Each op computes its value
// eagerly and, when any input requires gradients, records an exact backward
// rule on the result.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "corrnet3d/errors.hpp"
#include "corrnet3d/tensor.hpp"

namespace corrnet3d {

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

inline void require_2d(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " + shape_string(t.shape()));
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

inline Node& in(Node& self, std::size_t k) { return *self.inputs[k]; }

template <typename F>
Tensor unary_elementwise(const Tensor& a, F&& value, std::function<double(double x, double y)> deriv) {
    std::vector<double> out(a.size());
    auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(x[i]);
    return make_result(a.shape(), std::move(out), {a}, [deriv = std::move(deriv)](Node& self) {
        Node& a = in(self, 0);
        if (!a.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) a.grad[i] += self.grad[i] * deriv(a.data[i], self.data[i]);
    });
}

}  // namespace detail

/// Matrix product of [m x k] and [k x p].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_2d(a, "matmul");
    detail::require_2d(b, "matmul");
    const auto m = a.rows(), k = a.cols(), p = b.cols();
    if (b.rows() != k)
        throw ShapeError("matmul: inner dimensions disagree, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
    std::vector<double> out(m * p);
    detail::MatrixMap(out.data(), m, p).noalias() =
        detail::ConstMatrixMap(a.data().data(), m, k) * detail::ConstMatrixMap(b.data().data(), k, p);
    return detail::make_result({m, p}, std::move(out), {a, b}, [m, k, p](detail::Node& self) {
        auto& A = detail::in(self, 0);
        auto& B = detail::in(self, 1);
        detail::ConstMatrixMap dC(self.grad.data(), m, p);
        if (A.requires_grad)
            detail::MatrixMap(A.grad.data(), m, k).noalias() += dC * detail::ConstMatrixMap(B.data.data(), k, p).transpose();
        if (B.requires_grad)
            detail::MatrixMap(B.grad.data(), k, p).noalias() += detail::ConstMatrixMap(A.data.data(), m, k).transpose() * dC;
    });
}

inline Tensor transpose(const Tensor& a) {
    detail::require_2d(a, "transpose");
    const auto m = a.rows(), n = a.cols();
    std::vector<double> out(m * n);
    auto x = a.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
    return detail::make_result({n, m}, std::move(out), {a}, [m, n](detail::Node& self) {
        auto& A = detail::in(self, 0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) A.grad[i * n + j] += self.grad[j * m + i];
    });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_size(shape) != a.size())
        throw ShapeError("reshape: " + shape_string(a.shape()) + " cannot become " + shape_string(shape));
    std::vector<double> out(a.data().begin(), a.data().end());
    return detail::make_result(std::move(shape), std::move(out), {a}, [](detail::Node& self) {
        auto& A = detail::in(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i];
    });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            auto& X = detail::in(self, k);
            if (!X.requires_grad) continue;
            for (std::size_t i = 0; i < self.grad.size(); ++i) X.grad[i] += self.grad[i];
        }
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        auto& A = detail::in(self, 0);
        auto& B = detail::in(self, 1);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            A.accumulate(i, self.grad[i]);
            B.accumulate(i, -self.grad[i]);
        }
    });
}

/// Elementwise (Hadamard) product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        auto& A = detail::in(self, 0);
        auto& B = detail::in(self, 1);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            A.accumulate(i, self.grad[i] * B.data[i]);
            B.accumulate(i, self.grad[i] * A.data[i]);
        }
    });
}

inline Tensor scale(const Tensor& a, double s) {
    return detail::unary_elementwise(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& a, double s) {
    return detail::unary_elementwise(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

inline Tensor reciprocal(const Tensor& a) {
    return detail::unary_elementwise(
        a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

/// Leaky rectifier; slope 0 gives a plain ReLU. The derivative at 0 is taken
/// from the negative side.
inline Tensor leaky_relu(const Tensor& a, double slope = 0.2) {
    return detail::unary_elementwise(
        a, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

inline Tensor relu(const Tensor& a) { return leaky_relu(a, 0.0); }

/// [m x n] + [1 x n] broadcast over rows (bias add).
inline Tensor add_row(const Tensor& a, const Tensor& row) {
    detail::require_2d(a, "add_row");
    const auto m = a.rows(), n = a.cols();
    if (row.size() != n)
        throw ShapeError("add_row: row of shape " + shape_string(row.shape()) + " does not broadcast over " +
                         shape_string(a.shape()));
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] + row[j];
    return detail::make_result(a.shape(), std::move(out), {a, row}, [m, n](detail::Node& self) {
        auto& A = detail::in(self, 0);
        auto& R = detail::in(self, 1);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                A.accumulate(i * n + j, self.grad[i * n + j]);
                R.accumulate(j, self.grad[i * n + j]);
            }
    });
}

/// [m x n] - [m x 1] broadcast over columns.
inline Tensor sub_col(const Tensor& a, const Tensor& col) {
    detail::require_2d(a, "sub_col");
    const auto m = a.rows(), n = a.cols();
    if (col.size() != m)
        throw ShapeError("sub_col: column of shape " + shape_string(col.shape()) + " does not broadcast over " +
                         shape_string(a.shape()));
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] - col[i];
    return detail::make_result(a.shape(), std::move(out), {a, col}, [m, n](detail::Node& self) {
        auto& A = detail::in(self, 0);
        auto& C = detail::in(self, 1);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                A.accumulate(i * n + j, self.grad[i * n + j]);
                C.accumulate(i, -self.grad[i * n + j]);
            }
    });
}

/// [m x n] / [m x 1] broadcast over columns.
inline Tensor div_col(const Tensor& a, const Tensor& col) {
    detail::require_2d(a, "div_col");
    const auto m = a.rows(), n = a.cols();
    if (col.size() != m)
        throw ShapeError("div_col: column of shape " + shape_string(col.shape()) + " does not broadcast over " +
                         shape_string(a.shape()));
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] / col[i];
    return detail::make_result(a.shape(), std::move(out), {a, col}, [m, n](detail::Node& self) {
        auto& A = detail::in(self, 0);
        auto& C = detail::in(self, 1);
        for (std::size_t i = 0; i < m; ++i) {
            const double c = C.data[i];
            for (std::size_t j = 0; j < n; ++j) {
                const double g = self.grad[i * n + j];
                A.accumulate(i * n + j, g / c);
                C.accumulate(i, -g * self.data[i * n + j] / c);
            }
        }
    });
}

/// Concatenation along the last (column) axis.
inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
    detail::require_2d(a, "concat_cols");
    detail::require_2d(b, "concat_cols");
    if (a.rows() != b.rows())
        throw ShapeError("concat_cols: row counts differ, " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    const auto m = a.rows(), na = a.cols(), nb = b.cols(), n = na + nb;
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        std::copy_n(a.data().begin() + i * na, na, out.begin() + i * n);
        std::copy_n(b.data().begin() + i * nb, nb, out.begin() + i * n + na);
    }
    return detail::make_result({m, n}, std::move(out), {a, b}, [m, na, nb, n](detail::Node& self) {
        auto& A = detail::in(self, 0);
        auto& B = detail::in(self, 1);
        for (std::size_t i = 0; i < m; ++i) {
            if (A.requires_grad)
                for (std::size_t j = 0; j < na; ++j) A.grad[i * na + j] += self.grad[i * n + j];
            if (B.requires_grad)
                for (std::size_t j = 0; j < nb; ++j) B.grad[i * nb + j] += self.grad[i * n + na + j];
        }
    });
}

/// Row i of the result is row indices[i] of `a`. Repeated indices sum their
/// gradients.
inline Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices) {
    detail::require_2d(a, "gather_rows");
    const auto m = a.rows(), n = a.cols(), r = indices.size();
    if (r == 0) throw ShapeError("gather_rows: empty index list");
    std::vector<double> out(r * n);
    for (std::size_t i = 0; i < r; ++i) {
        if (indices[i] >= m)
            throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " out of range for " +
                             shape_string(a.shape()));
        std::copy_n(a.data().begin() + indices[i] * n, n, out.begin() + i * n);
    }
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return detail::make_result({r, n}, std::move(out), {a}, [idx = std::move(idx), n](detail::Node& self) {
        auto& A = detail::in(self, 0);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < n; ++j) A.grad[idx[i] * n + j] += self.grad[i * n + j];
    });
}

/// Per-row sum, [m x n] -> [m x 1].
inline Tensor row_sum(const Tensor& a) {
    detail::require_2d(a, "row_sum");
    const auto m = a.rows(), n = a.cols();
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i] += a[i * n + j];
    return detail::make_result({m, 1}, std::move(out), {a}, [m, n](detail::Node& self) {
        auto& A = detail::in(self, 0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) A.grad[i * n + j] += self.grad[i];
    });
}

/// Per-row mean, [m x n] -> [m x 1].
inline Tensor row_mean(const Tensor& a) { return scale(row_sum(a), 1.0 / static_cast<double>(a.cols())); }

/// Per-row population standard deviation, [m x n] -> [m x 1]. The variance is
/// floored at `variance_floor` so constant rows yield sqrt(floor); the floored
/// branch has zero gradient.
inline Tensor row_std(const Tensor& a, double variance_floor = 1e-8) {
    detail::require_2d(a, "row_std");
    const auto m = a.rows(), n = a.cols();
    std::vector<double> mean(m, 0.0), out(m);
    std::vector<char> floored(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) mean[i] += a[i * n + j];
        mean[i] /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = a[i * n + j] - mean[i];
            var += d * d;
        }
        var /= static_cast<double>(n);
        if (var < variance_floor) {
            var = variance_floor;
            floored[i] = 1;
        }
        out[i] = std::sqrt(var);
    }
    return detail::make_result(
        {m, 1}, std::move(out), {a},
        [m, n, mean = std::move(mean), floored = std::move(floored)](detail::Node& self) {
            auto& A = detail::in(self, 0);
            for (std::size_t i = 0; i < m; ++i) {
                if (floored[i]) continue;
                // d sigma / d x_j = (x_j - mu) / (n sigma)
                const double g = self.grad[i] / (static_cast<double>(n) * self.data[i]);
                for (std::size_t j = 0; j < n; ++j) A.grad[i * n + j] += g * (A.data[i * n + j] - mean[i]);
            }
        });
}

/// Per-row minimum, [m x n] -> [m x 1]; gradient goes to the first minimizer.
inline Tensor row_min(const Tensor& a) {
    detail::require_2d(a, "row_min");
    const auto m = a.rows(), n = a.cols();
    std::vector<double> out(m);
    std::vector<std::size_t> arg(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < n; ++j)
            if (a[i * n + j] < a[i * n + best]) best = j;
        arg[i] = best;
        out[i] = a[i * n + best];
    }
    return detail::make_result({m, 1}, std::move(out), {a}, [n, arg = std::move(arg)](detail::Node& self) {
        auto& A = detail::in(self, 0);
        for (std::size_t i = 0; i < arg.size(); ++i) A.grad[i * n + arg[i]] += self.grad[i];
    });
}

/// Entry (i, j) = ||a_i - b_j||_2 for rows of [m x d] and [p x d]. The
/// gradient at zero distance is taken as 0.
inline Tensor pairwise_distance(const Tensor& a, const Tensor& b) {
    detail::require_2d(a, "pairwise_distance");
    detail::require_2d(b, "pairwise_distance");
    if (a.cols() != b.cols())
        throw ShapeError("pairwise_distance: row widths differ, " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    const auto m = a.rows(), p = b.rows(), d = a.cols();
    std::vector<double> out(m * p);
    auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = x[i * d + c] - y[j * d + c];
                s += diff * diff;
            }
            out[i * p + j] = std::sqrt(s);
        }
    return detail::make_result({m, p}, std::move(out), {a, b}, [m, p, d](detail::Node& self) {
        auto& A = detail::in(self, 0);
        auto& B = detail::in(self, 1);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < p; ++j) {
                const double dist = self.data[i * p + j];
                if (dist == 0.0) continue;
                const double g = self.grad[i * p + j] / dist;
                if (g == 0.0) continue;
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = A.data[i * d + c] - B.data[j * d + c];
                    A.accumulate(i * d + c, g * diff);
                    B.accumulate(j * d + c, -g * diff);
                }
            }
    });
}

/// Entry (i, j) = ||a_i - b_j||_2^2.
inline Tensor pairwise_sq_distance(const Tensor& a, const Tensor& b) {
    detail::require_2d(a, "pairwise_sq_distance");
    detail::require_2d(b, "pairwise_sq_distance");
    if (a.cols() != b.cols())
        throw ShapeError("pairwise_sq_distance: row widths differ, " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    const auto m = a.rows(), p = b.rows(), d = a.cols();
    std::vector<double> out(m * p);
    auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = x[i * d + c] - y[j * d + c];
                s += diff * diff;
            }
            out[i * p + j] = s;
        }
    return detail::make_result({m, p}, std::move(out), {a, b}, [m, p, d](detail::Node& self) {
        auto& A = detail::in(self, 0);
        auto& B = detail::in(self, 1);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < p; ++j) {
                const double g = 2.0 * self.grad[i * p + j];
                if (g == 0.0) continue;
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = A.data[i * d + c] - B.data[j * d + c];
                    A.accumulate(i * d + c, g * diff);
                    B.accumulate(j * d + c, -g * diff);
                }
            }
    });
}

/// Max over consecutive groups of `group` rows: [(m*group) x n] -> [m x n].
/// Gradient is routed to the argmax only; ties go to the lowest index.
inline Tensor max_pool_rows(const Tensor& a, std::size_t group) {
    detail::require_2d(a, "max_pool_rows");
    if (group == 0 || a.rows() % group != 0)
        throw ShapeError("max_pool_rows: " + std::to_string(a.rows()) + " rows are not a multiple of group size " +
                         std::to_string(group));
    const auto m = a.rows() / group, n = a.cols();
    std::vector<double> out(m * n);
    std::vector<std::size_t> arg(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            std::size_t best = i * group * n + j;
            for (std::size_t r = 1; r < group; ++r) {
                const std::size_t at = (i * group + r) * n + j;
                if (a[at] > a[best]) best = at;
            }
            arg[i * n + j] = best;
            out[i * n + j] = a[best];
        }
    return detail::make_result({m, n}, std::move(out), {a}, [arg = std::move(arg)](detail::Node& self) {
        auto& A = detail::in(self, 0);
        for (std::size_t i = 0; i < arg.size(); ++i) A.grad[arg[i]] += self.grad[i];
    });
}

/// Mean over the row (point) axis: [m x n] -> [1 x n].
inline Tensor mean_rows(const Tensor& a) {
    detail::require_2d(a, "mean_rows");
    const auto m = a.rows(), n = a.cols();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += a[i * n + j];
    for (auto& v : out) v /= static_cast<double>(m);
    return detail::make_result({1, n}, std::move(out), {a}, [m, n](detail::Node& self) {
        auto& A = detail::in(self, 0);
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) A.grad[i * n + j] += self.grad[j] * inv;
    });
}

inline Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return detail::make_result({1}, {s}, {a}, [](detail::Node& self) {
        auto& A = detail::in(self, 0);
        for (auto& g : A.grad) g += self.grad[0];
    });
}

/// Squared Frobenius norm (sum of squares of all entries).
inline Tensor frobenius_sq(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return detail::make_result({1}, {s}, {a}, [](detail::Node& self) {
        auto& A = detail::in(self, 0);
        const double g = 2.0 * self.grad[0];
        for (std::size_t i = 0; i < A.grad.size(); ++i) A.grad[i] += g * A.data[i];
    });
}

/// Softmax along each row, stabilized by subtracting the row max.
inline Tensor row_softmax(const Tensor& a) {
    detail::require_2d(a, "row_softmax");
    const auto m = a.rows(), n = a.cols();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            const double v = a[i * n + j];
            if (std::isnan(v)) throw NumericError("row_softmax: NaN in row " + std::to_string(i));
            hi = std::max(hi, v);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += (out[i * n + j] = std::exp(a[i * n + j] - hi));
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
    }
    return detail::make_result({m, n}, std::move(out), {a}, [m, n](detail::Node& self) {
        auto& A = detail::in(self, 0);
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * self.data[i * n + j];
            for (std::size_t j = 0; j < n; ++j)
                A.grad[i * n + j] += self.data[i * n + j] * (self.grad[i * n + j] - dot);
        }
    });
}

/// Divides each row by its sum.
inline Tensor row_normalize(const Tensor& a) { return div_col(a, row_sum(a)); }

}  // namespace corrnet3d
