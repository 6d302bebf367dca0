#pragma once

// Every differentiable operation plus the composed training objective, each
// wrapped as a named finite-difference check. Shared by the unit tests and the
// acceptance run.

#include <functional>
#include <string>
#include <vector>

#include "corrnet3d/corrnet3d.hpp"
#include "gradcheck.hpp"

namespace corrnet3d::testing {

struct NamedCheck {
    std::string name;
    GradCheckResult result;
};

inline std::vector<NamedCheck> run_gradient_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<NamedCheck> out;
    const std::uint64_t probe = seed * 7919 + 1;
    auto check = [&](const std::string& name, std::vector<Tensor> inputs, std::function<Tensor()> f,
                     std::size_t per_input = std::numeric_limits<std::size_t>::max()) {
        out.push_back({name, check_gradients(f, std::move(inputs), 1e-5, 1e-4, per_input, seed)});
    };

    {
        auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
        check("matmul", {a, b}, [=] { return weighted_sum(matmul(a, b), probe); });
    }
    {
        auto a = random_tensor({3, 4}, rng);
        check("transpose", {a}, [=] { return weighted_sum(transpose(a), probe); });
        check("reshape", {a}, [=] { return weighted_sum(reshape(a, {2, 6}), probe); });
        check("scale", {a}, [=] { return weighted_sum(scale(a, -1.7), probe); });
        check("add_scalar", {a}, [=] { return weighted_sum(mul(add_scalar(a, 0.3), a), probe); });
        check("leaky_relu", {a}, [=] { return weighted_sum(leaky_relu(a), probe); });
        check("relu", {a}, [=] { return weighted_sum(relu(a), probe); });
        check("row_sum", {a}, [=] { return weighted_sum(row_sum(a), probe); });
        check("row_mean", {a}, [=] { return weighted_sum(row_mean(a), probe); });
        check("row_std", {a}, [=] { return weighted_sum(row_std(a), probe); });
        check("row_min", {a}, [=] { return weighted_sum(row_min(a), probe); });
        check("mean_rows", {a}, [=] { return weighted_sum(mean_rows(a), probe); });
        check("max_pool_rows", {a}, [=] { return weighted_sum(max_pool_rows(a, 3), probe); });
        check("sum", {a}, [=] { return scale(sum(a), 0.5); });
        check("frobenius_sq", {a}, [=] { return frobenius_sq(a); });
        check("row_softmax", {a}, [=] { return weighted_sum(row_softmax(scale(a, 3.0)), probe); });
        const std::vector<std::size_t> idx{2, 0, 2, 1, 1};
        check("gather_rows", {a}, [=] { return weighted_sum(gather_rows(a, idx), probe); });
    }
    {
        auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
        check("add", {a, b}, [=] { return weighted_sum(add(a, b), probe); });
        check("sub", {a, b}, [=] { return weighted_sum(sub(a, b), probe); });
        check("mul", {a, b}, [=] { return weighted_sum(mul(a, b), probe); });
    }
    {
        auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 2}, rng);
        check("concat_cols", {a, b}, [=] { return weighted_sum(concat_cols(a, b), probe); });
    }
    {
        auto a = random_tensor({3, 4}, rng), row = random_tensor({1, 4}, rng), col = random_tensor({3, 1}, rng);
        auto pos = random_tensor({3, 4}, rng, 0.5, 2.0), pcol = random_tensor({3, 1}, rng, 0.5, 2.0);
        check("add_row", {a, row}, [=] { return weighted_sum(add_row(a, row), probe); });
        check("sub_col", {a, col}, [=] { return weighted_sum(sub_col(a, col), probe); });
        check("div_col", {a, pcol}, [=] { return weighted_sum(div_col(a, pcol), probe); });
        check("reciprocal", {pos}, [=] { return weighted_sum(reciprocal(pos), probe); });
        check("row_normalize", {pos}, [=] { return weighted_sum(row_normalize(pos), probe); });
    }
    {
        auto x = random_tensor({5, 3}, rng), y = random_tensor({4, 3}, rng);
        check("pairwise_distance", {x, y}, [=] { return weighted_sum(pairwise_distance(x, y), probe); });
        check("pairwise_sq_distance", {x, y}, [=] { return weighted_sum(pairwise_sq_distance(x, y), probe); });
        check("similarity", {x, y}, [=] { return weighted_sum(similarity(x, y), probe); });
    }
    {
        auto s = random_tensor({6, 6}, rng, 0.5, 2.0);
        check("desmooth", {s}, [=] { return weighted_sum(desmooth(s).soft, probe); });
        check("sinkhorn", {s}, [=] { return weighted_sum(sinkhorn(s, 5).soft, probe); });
    }
    {
        auto features = random_tensor({12, 4}, rng);
        auto w = random_tensor({8, 5}, rng), b = random_tensor({1, 5}, rng);
        const EdgeConvLayer layer{w, b, 4};
        check("edgeconv", {features, w, b}, [=] { return weighted_sum(layer.forward(features), probe); });
    }
    {
        ParamStore params;
        Rng init(seed + 11);
        const FeatureEmbedding embedding({2, 8, 6, 4}, params, init);
        auto coords = random_tensor({12, 3}, rng);
        std::vector<Tensor> inputs{coords};
        for (auto& e : params.entries()) inputs.push_back(e.value);
        check("embedding", inputs, [=, &embedding] {
            const auto fs = embedding.embed(coords);
            return add(weighted_sum(fs.pointwise, probe), weighted_sum(fs.global, probe + 1));
        }, 12);
    }
    for (auto mode : {DeformerMode::shared, DeformerMode::unshared, DeformerMode::fully_connected, DeformerMode::no_global}) {
        ParamStore params;
        Rng init(seed + 13);
        const SymmetricDeformer deformer({mode, 8, 6}, 5, params, init);
        auto a = random_tensor({6, 3}, rng), b = random_tensor({6, 3}, rng);
        auto p = random_tensor({6, 6}, rng, 0.0, 1.0), va = random_tensor({1, 5}, rng), vb = random_tensor({1, 5}, rng);
        std::vector<Tensor> inputs{a, b, p, va, vb};
        for (auto& e : params.entries()) inputs.push_back(e.value);
        const char* names[] = {"deformer/shared", "deformer/unshared", "deformer/fully_connected", "deformer/no_global"};
        check(names[static_cast<int>(mode)], inputs, [=, &deformer] {
            auto [ar, br] = deformer.reconstruct_both(a, b, p, va, vb);
            return add(weighted_sum(ar, probe), weighted_sum(br, probe + 1));
        }, 16);
    }
    {
        auto a = random_tensor({8, 3}, rng), b = random_tensor({8, 3}, rng);
        auto ar = random_tensor({8, 3}, rng), br = random_tensor({8, 3}, rng);
        auto p = random_tensor({8, 8}, rng, 0.0, 1.0);
        std::vector<std::size_t> gt{3, 1, 4, 0, 7, 5, 2, 6};
        check("loss_rec", {a, ar, b, br}, [=] { return loss_rec(a, ar, b, br); });
        check("loss_perm", {p}, [=] { return loss_perm(p); });
        check("loss_mfd", {p}, [=] { return loss_mfd(p, a, b, 3); });
        check("loss_chamfer", {a, b}, [=] { return loss_chamfer(a, b); });
        check("loss_supervised", {p}, [=] { return loss_supervised(p, gt); });
        check("loss_total", {ar, br, p}, [=] { return loss_total(a, b, ar, br, p, {0.1, 0.01, 3}); });
    }
    {
        // Composed objective through the default network on a random 16-point pair.
        ModelConfig cfg;
        cfg.deformer.points = 16;
        const CorrNet model(cfg, seed);
        const auto base = synth_base_shape(16, seed + 101);
        const auto pair = synth_nonrigid_pair(base, 0.3, seed + 202);
        const Tensor a = pair.source.to_tensor(), b = pair.target.to_tensor();
        std::vector<Tensor> inputs;
        for (const auto& e : model.params().entries()) inputs.push_back(e.value);
        check("total_loss/network", inputs, [&model, a, b] {
            const auto r = model.forward(a, b);
            return loss_total(a, b, r.a_rec, r.b_rec, r.p, {});
        }, 8);
    }
    return out;
}

}  // namespace corrnet3d::testing
