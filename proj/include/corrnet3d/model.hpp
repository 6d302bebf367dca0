#pragma once

// Full network: shared embedding -> correspondence indicator -> symmetric
// deformer, with one parameter store for everything.

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "corrnet3d/deformer.hpp"
#include "corrnet3d/embedding.hpp"
#include "corrnet3d/indicator.hpp"
#include "corrnet3d/params.hpp"

namespace corrnet3d {

enum class Normalizer { desmooth, sinkhorn };

struct ModelConfig {
    EmbeddingConfig embedding;
    DeformerConfig deformer;
    Normalizer normalizer = Normalizer::desmooth;
    DeSmoothConfig desmooth;
    std::size_t sinkhorn_iterations = 30;
};

struct ForwardResult {
    FeatureSet features_a;
    FeatureSet features_b;
    Tensor similarity;
    Tensor p;      // soft correspondence
    Tensor a_rec;  // undefined when the deformer is skipped
    Tensor b_rec;
};

class CorrNet {
  public:
    CorrNet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        Rng rng(seed);
        embedding_ = FeatureEmbedding(cfg.embedding, params_, rng);
        deformer_ = SymmetricDeformer(cfg.deformer, cfg.embedding.feature_dim, params_, rng);
    }

    // Parameter tensors are shared handles; a copy would alias the original's
    // weights while owning a separate store.
    CorrNet(const CorrNet&) = delete;
    CorrNet& operator=(const CorrNet&) = delete;
    CorrNet(CorrNet&&) = default;

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const FeatureEmbedding& embedding() const { return embedding_; }
    const SymmetricDeformer& deformer() const { return deformer_; }

    Tensor normalize(const Tensor& s) const {
        if (cfg_.normalizer == Normalizer::sinkhorn) return sinkhorn(s, cfg_.sinkhorn_iterations).soft;
        return desmooth(s, cfg_.desmooth).soft;
    }

    /// Embedding and soft correspondence only.
    ForwardResult correspond(const Tensor& a, const Tensor& b) const {
        ForwardResult r;
        r.features_a = embedding_.embed(a);
        r.features_b = embedding_.embed(b);
        r.similarity = similarity(r.features_a.pointwise, r.features_b.pointwise);
        r.p = normalize(r.similarity);
        return r;
    }

    ForwardResult forward(const Tensor& a, const Tensor& b) const {
        ForwardResult r = correspond(a, b);
        std::tie(r.a_rec, r.b_rec) =
            deformer_.reconstruct_both(a, b, r.p, r.features_a.global, r.features_b.global);
        return r;
    }

    /// Hard correspondence for two clouds of equal size; both are normalized
    /// to the unit ball first.
    std::vector<std::size_t> infer(const PointCloud& a, const PointCloud& b) const {
        if (a.size() != b.size())
            throw ShapeError("infer: clouds differ in size (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
        const auto r = correspond(normalize_unit(a).to_tensor(), normalize_unit(b).to_tensor());
        return quantize(r.p);
    }

  private:
    ModelConfig cfg_;
    ParamStore params_;
    FeatureEmbedding embedding_;
    SymmetricDeformer deformer_;
};

}  // namespace corrnet3d
