#pragma once

// Symmetric deformer: permutes each cloud by the soft correspondence and maps
// the permuted points, conditioned on the other cloud's global feature, onto
// a reconstruction of that other cloud.

#include <string>
#include <utility>
#include <vector>

#include "corrnet3d/ops.hpp"
#include "corrnet3d/params.hpp"

namespace corrnet3d {

enum class DeformerMode {
    shared,         // one MLP for both directions
    unshared,       // one MLP per direction
    fully_connected,  // ablation: flattened cloud through dense layers
    no_global,      // ablation: global vectors replaced by zeros
};

/// Three dense layers (in -> h -> h -> out); leaky activations between layers,
/// none on the output.
struct Mlp3 {
    Tensor w1, b1, w2, b2, w3, b3;

    static Mlp3 create(ParamStore& params, Rng& rng, const std::string& prefix, std::size_t in, std::size_t hidden,
                       std::size_t out) {
        Mlp3 m;
        m.w1 = params.add_weight(prefix + ".fc1.weight", in, hidden, rng);
        m.b1 = params.add_bias(prefix + ".fc1.bias", hidden);
        m.w2 = params.add_weight(prefix + ".fc2.weight", hidden, hidden, rng);
        m.b2 = params.add_bias(prefix + ".fc2.bias", hidden);
        m.w3 = params.add_weight(prefix + ".fc3.weight", hidden, out, rng);
        m.b3 = params.add_bias(prefix + ".fc3.bias", out);
        return m;
    }

    std::size_t in_width() const { return w1.rows(); }

    Tensor operator()(const Tensor& x) const {
        Tensor h = leaky_relu(add_row(matmul(x, w1), b1), 0.2);
        h = leaky_relu(add_row(matmul(h, w2), b2), 0.2);
        return add_row(matmul(h, w3), b3);
    }
};

/// A_hat = P^T A (aligned with B), B_hat = P B (aligned with A).
inline std::pair<Tensor, Tensor> permute_pair(const Tensor& a, const Tensor& b, const Tensor& p) {
    if (p.rank() != 2 || p.rows() != a.rows() || p.cols() != b.rows())
        throw ShapeError("permute_pair: P " + shape_string(p.shape()) + " does not match clouds " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
    return {matmul(transpose(p), a), matmul(p, b)};
}

/// Concatenates `global` [1 x d] to every row of `permuted` [n x 3] and runs
/// the point-wise MLP, giving an [n x 3] reconstruction.
inline Tensor deform(const Tensor& permuted, const Tensor& global, const Mlp3& mlp) {
    if (permuted.rank() != 2 || permuted.cols() != 3) throw ShapeError("deform: expected [n x 3] points, got " + shape_string(permuted.shape()));
    if (3 + global.size() != mlp.in_width())
        throw ShapeError("deform: 3 + global width " + std::to_string(global.size()) + " != MLP input width " +
                         std::to_string(mlp.in_width()));
    const std::vector<std::size_t> rows(permuted.rows(), 0);
    const Tensor g = gather_rows(reshape(global, {1, global.size()}), rows);
    return mlp(concat_cols(permuted, g));
}

struct DeformerConfig {
    DeformerMode mode = DeformerMode::shared;
    std::size_t hidden = 128;
    std::size_t points = 0;  // required by the fully-connected ablation only
};

class SymmetricDeformer {
  public:
    SymmetricDeformer() = default;

    SymmetricDeformer(const DeformerConfig& cfg, std::size_t global_dim, ParamStore& params, Rng& rng,
                      const std::string& prefix = "deformer")
        : cfg_(cfg), global_dim_(global_dim) {
        switch (cfg.mode) {
            case DeformerMode::shared:
            case DeformerMode::no_global:
                to_a_ = Mlp3::create(params, rng, prefix, 3 + global_dim, cfg.hidden, 3);
                to_b_ = to_a_;
                break;
            case DeformerMode::unshared:
                to_a_ = Mlp3::create(params, rng, prefix + ".to_a", 3 + global_dim, cfg.hidden, 3);
                to_b_ = Mlp3::create(params, rng, prefix + ".to_b", 3 + global_dim, cfg.hidden, 3);
                break;
            case DeformerMode::fully_connected:
                if (cfg.points == 0) throw ContractError("fully-connected deformer needs a fixed point count");
                to_a_ = Mlp3::create(params, rng, prefix, 3 * cfg.points + global_dim, cfg.hidden, 3 * cfg.points);
                to_b_ = to_a_;
                break;
        }
    }

    const DeformerConfig& config() const { return cfg_; }
    const Mlp3& to_a() const { return to_a_; }
    const Mlp3& to_b() const { return to_b_; }

    /// Returns (A_tilde, B_tilde): A_tilde from (P B, v_a), B_tilde from (P^T A, v_b).
    std::pair<Tensor, Tensor> reconstruct_both(const Tensor& a, const Tensor& b, const Tensor& p, const Tensor& va,
                                               const Tensor& vb) const {
        auto [a_hat, b_hat] = permute_pair(a, b, p);
        return {branch(b_hat, va, to_a_), branch(a_hat, vb, to_b_)};
    }

  private:
    Tensor branch(const Tensor& permuted, const Tensor& global, const Mlp3& mlp) const {
        switch (cfg_.mode) {
            case DeformerMode::no_global:
                return deform(permuted, Tensor::zeros({1, global_dim_}), mlp);
            case DeformerMode::fully_connected: {
                if (permuted.rows() != cfg_.points)
                    throw ShapeError("fully-connected deformer built for " + std::to_string(cfg_.points) + " points, got " +
                                     std::to_string(permuted.rows()));
                const Tensor flat = concat_cols(reshape(permuted, {1, 3 * cfg_.points}), reshape(global, {1, global_dim_}));
                return reshape(mlp(flat), {cfg_.points, 3});
            }
            default:
                return deform(permuted, global, mlp);
        }
    }

    DeformerConfig cfg_;
    std::size_t global_dim_ = 0;
    Mlp3 to_a_;
    Mlp3 to_b_;
};

}  // namespace corrnet3d
