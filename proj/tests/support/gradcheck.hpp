#pragma once

// Central finite-difference oracle for the autodiff engine.
//
// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1).
// When a coordinate fails at step h, it is re-measured at h / 10; if the two
// numeric estimates disagree with each other (a kink of relu / max / kNN lies
// within h of the sample) and the finer one matches, the coordinate is counted
// as a kink instead of an error.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "corrnet3d/ops.hpp"
#include "corrnet3d/random.hpp"
#include "corrnet3d/tensor.hpp"

namespace corrnet3d::testing {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t kinks = 0;
    std::string worst;  // "input#index" of the largest error
};

inline double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0}); }

/// `f` rebuilds the scalar from the current values of `inputs` (which must be
/// leaves requiring gradients). At most `per_input` coordinates of each input
/// are probed, chosen with `rng` when the input is larger.
inline GradCheckResult check_gradients(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double h = 1e-5,
                                       double tol = 1e-4, std::size_t per_input = std::numeric_limits<std::size_t>::max(),
                                       std::uint64_t seed = 1) {
    for (auto& t : inputs) t.zero_grad();
    backward(f());
    std::vector<std::vector<double>> analytic;
    for (auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

    auto eval = [&] { return f().item(); };
    GradCheckResult res;
    Rng rng(seed);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto data = inputs[k].mutable_data();
        std::vector<std::size_t> coords(data.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        if (coords.size() > per_input) {
            rng.shuffle(coords);
            coords.resize(per_input);
        }
        auto central = [&](std::size_t i, double step) {
            const double x = data[i];
            data[i] = x + step;
            const double up = eval();
            data[i] = x - step;
            const double down = eval();
            data[i] = x;
            return (up - down) / (2.0 * step);
        };
        for (std::size_t i : coords) {
            const double a = analytic[k][i];
            const double n1 = central(i, h);
            double err = rel_error(a, n1);
            if (err > tol) {
                const double n2 = central(i, h / 10.0);
                if (rel_error(n1, n2) > tol && rel_error(a, n2) <= tol) {
                    ++res.kinks;
                    continue;
                }
            }
            ++res.checked;
            if (err > res.max_rel_error) {
                res.max_rel_error = err;
                res.worst = "input" + std::to_string(k) + "#" + std::to_string(i);
            }
        }
    }
    for (auto& t : inputs) t.zero_grad();
    return res;
}

/// Random leaf tensor with entries uniform in [lo, hi).
inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

/// Scalar probe sum(x * w) with a fixed random weight, so that every output
/// entry contributes with a distinct coefficient.
inline Tensor weighted_sum(const Tensor& x, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w(x.size());
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    return sum(mul(x, Tensor(x.shape(), std::move(w))));
}

}  // namespace corrnet3d::testing
