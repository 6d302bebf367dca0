#pragma once

// Dynamic-graph EdgeConv feature embedding.

#include <cstddef>
#include <string>
#include <vector>

#include "corrnet3d/ops.hpp"
#include "corrnet3d/params.hpp"
#include "corrnet3d/pointcloud.hpp"

namespace corrnet3d {

inline constexpr double kLeakySlope = 0.2;

/// Per-point features F [n x d] and the permutation-invariant summary v [1 x d].
struct FeatureSet {
    Tensor pointwise;
    Tensor global;
};

/// One EdgeConv layer: out_i = max_{j in kNN(i)} act([f_i, f_j - f_i] W + b).
/// Neighbours are found in the layer's input feature space and are treated as
/// constants under differentiation.
struct EdgeConvLayer {
    Tensor weight;  // [2 d_in x d_out]
    Tensor bias;    // [1 x d_out]
    std::size_t k = 10;

    std::size_t in_width() const { return weight.rows() / 2; }
    std::size_t out_width() const { return weight.cols(); }

    Tensor forward(const Tensor& features) const {
        const std::size_t n = features.rows(), d = features.cols();
        if (d != in_width())
            throw ShapeError("edgeconv: input width " + std::to_string(d) + " but layer expects " + std::to_string(in_width()));
        if (k >= n) throw ContractError("edgeconv: k = " + std::to_string(k) + " needs more than k points, got " + std::to_string(n));
        const auto neighbours = knn_indices(features.data(), features.data(), d, k, true);
        std::vector<std::size_t> centres(n * k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < k; ++r) centres[i * k + r] = i;
        const Tensor centre = gather_rows(features, centres);
        const Tensor edge = concat_cols(centre, sub(gather_rows(features, neighbours), centre));
        return max_pool_rows(leaky_relu(add_row(matmul(edge, weight), bias), kLeakySlope), k);
    }
};

struct EmbeddingConfig {
    std::size_t layers = 3;
    std::size_t edge_width = 64;    // width of every layer but the last
    std::size_t feature_dim = 96;   // d
    std::size_t k = 10;
};

/// EdgeConv stack followed by max+mean pooling and a linear projection to d.
class FeatureEmbedding {
  public:
    FeatureEmbedding() = default;

    FeatureEmbedding(const EmbeddingConfig& cfg, ParamStore& params, Rng& rng, const std::string& prefix = "embed")
        : cfg_(cfg) {
        if (cfg.layers == 0) throw ContractError("embedding needs at least one EdgeConv layer");
        std::size_t in = 3;
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            const std::size_t out = l + 1 == cfg.layers ? cfg.feature_dim : cfg.edge_width;
            const std::string name = prefix + ".layer" + std::to_string(l + 1);
            layers_.push_back({params.add_weight(name + ".weight", 2 * in, out, rng), params.add_bias(name + ".bias", out), cfg.k});
            in = out;
        }
        pool_weight_ = params.add_weight(prefix + ".global.weight", 2 * cfg.feature_dim, cfg.feature_dim, rng);
        pool_bias_ = params.add_bias(prefix + ".global.bias", cfg.feature_dim);
    }

    const std::vector<EdgeConvLayer>& layers() const { return layers_; }
    const EmbeddingConfig& config() const { return cfg_; }

    FeatureSet embed(const Tensor& coords) const {
        Tensor f = coords;
        for (const auto& layer : layers_) f = layer.forward(f);
        const Tensor pooled = concat_cols(max_pool_rows(f, f.rows()), mean_rows(f));
        return {f, add_row(matmul(pooled, pool_weight_), pool_bias_)};
    }

    FeatureSet embed(const PointCloud& cloud) const { return embed(cloud.to_tensor()); }

  private:
    EmbeddingConfig cfg_;
    std::vector<EdgeConvLayer> layers_;
    Tensor pool_weight_;
    Tensor pool_bias_;
};

}  // namespace corrnet3d
