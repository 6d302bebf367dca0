#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "corrnet3d/losses.hpp"
#include "corrnet3d/model.hpp"
#include "corrnet3d/synth.hpp"

namespace corrnet3d {

enum class TrainMode { unsupervised, supervised, chamfer, rec_only };

struct TrainConfig {
    TrainMode mode = TrainMode::unsupervised;
    std::size_t epochs = 50;
    std::size_t batch_size = 10;
    double learning_rate = 1e-4;
    std::uint64_t seed = 0;
    LossWeights weights;
    ModelConfig model;
    bool calibrate_t = false;
    std::size_t checkpoint_every = 0;  // epochs; 0 disables
    AdamOptions adam;

    void validate() const {
        if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (weights.lambda1 < 0.0 || weights.lambda2 < 0.0) throw ConfigError("loss weights must be non-negative");
        if (!(model.desmooth.t > 0.0)) throw ConfigError("desmooth_t must be positive");
        if (model.embedding.k == 0 || weights.k_mfd == 0) throw ConfigError("neighbour counts must be >= 1");
    }
};

inline std::string to_string(TrainMode m) {
    switch (m) {
        case TrainMode::unsupervised: return "unsupervised";
        case TrainMode::supervised: return "supervised";
        case TrainMode::chamfer: return "chamfer";
        case TrainMode::rec_only: return "rec_only";
    }
    return "?";
}

namespace detail {

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream is(value);
    T out{};
    if (!(is >> out) || !is.eof()) throw ConfigError("config: invalid value '" + value + "' for '" + key + "'");
    if constexpr (std::is_unsigned_v<T>)
        if (value.find('-') != std::string::npos) throw ConfigError("config: '" + key + "' must be non-negative");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: invalid boolean '" + value + "' for '" + key + "'");
}

}  // namespace detail

/// "key = value" lines; '#' starts a comment line. Unknown keys are errors.
inline TrainConfig parse_train_config(std::string_view text) {
    TrainConfig cfg;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto size_field = [](std::size_t& f) -> Setter {
        return [&f](const std::string& k, const std::string& v) { f = detail::parse_number<std::size_t>(k, v); };
    };
    auto double_field = [](double& f) -> Setter {
        return [&f](const std::string& k, const std::string& v) { f = detail::parse_number<double>(k, v); };
    };
    const std::map<std::string, Setter> setters{
        {"mode",
         [&](const std::string& k, const std::string& v) {
             if (v == "unsupervised") cfg.mode = TrainMode::unsupervised;
             else if (v == "supervised") cfg.mode = TrainMode::supervised;
             else if (v == "chamfer") cfg.mode = TrainMode::chamfer;
             else if (v == "rec_only") cfg.mode = TrainMode::rec_only;
             else throw ConfigError("config: unknown " + k + " '" + v + "'");
         }},
        {"epochs", size_field(cfg.epochs)},
        {"batch_size", size_field(cfg.batch_size)},
        {"learning_rate", double_field(cfg.learning_rate)},
        {"seed", [&](const std::string& k, const std::string& v) { cfg.seed = detail::parse_number<std::uint64_t>(k, v); }},
        {"lambda1", double_field(cfg.weights.lambda1)},
        {"lambda2", double_field(cfg.weights.lambda2)},
        {"k_mfd", size_field(cfg.weights.k_mfd)},
        {"layers", size_field(cfg.model.embedding.layers)},
        {"edge_width", size_field(cfg.model.embedding.edge_width)},
        {"feature_dim", size_field(cfg.model.embedding.feature_dim)},
        {"k", size_field(cfg.model.embedding.k)},
        {"deformer_hidden", size_field(cfg.model.deformer.hidden)},
        {"points", size_field(cfg.model.deformer.points)},
        {"deformer",
         [&](const std::string& k, const std::string& v) {
             if (v == "shared") cfg.model.deformer.mode = DeformerMode::shared;
             else if (v == "unshared") cfg.model.deformer.mode = DeformerMode::unshared;
             else if (v == "fully_connected") cfg.model.deformer.mode = DeformerMode::fully_connected;
             else if (v == "no_global") cfg.model.deformer.mode = DeformerMode::no_global;
             else throw ConfigError("config: unknown " + k + " '" + v + "'");
         }},
        {"normalizer",
         [&](const std::string& k, const std::string& v) {
             if (v == "desmooth") cfg.model.normalizer = Normalizer::desmooth;
             else if (v == "sinkhorn") cfg.model.normalizer = Normalizer::sinkhorn;
             else throw ConfigError("config: unknown " + k + " '" + v + "'");
         }},
        {"sinkhorn_iterations", size_field(cfg.model.sinkhorn_iterations)},
        {"desmooth_t", double_field(cfg.model.desmooth.t)},
        {"desmooth_tau", double_field(cfg.model.desmooth.tau)},
        {"calibrate_t", [&](const std::string& k, const std::string& v) { cfg.calibrate_t = detail::parse_bool(k, v); }},
        {"checkpoint_every", size_field(cfg.checkpoint_every)},
        {"adam_beta1", double_field(cfg.adam.beta1)},
        {"adam_beta2", double_field(cfg.adam.beta2)},
        {"adam_epsilon", double_field(cfg.adam.epsilon)},
    };

    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = detail::trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        it->second(key, value);
    }
    cfg.validate();
    return cfg;
}

struct TrainResult {
    CorrNet model;
    std::vector<double> epoch_loss;  // mean per-pair loss of each epoch
    std::vector<double> step_loss;   // mean per-pair loss of each optimizer step
    double desmooth_t = 0.0;         // prior ratio actually used
};

/// Scalar training objective for one (normalized) pair under `cfg.mode`.
inline Tensor pair_loss(const CorrNet& model, const ShapePair& pair, const Tensor& a, const Tensor& b,
                        const TrainConfig& cfg) {
    switch (cfg.mode) {
        case TrainMode::supervised:
            return loss_supervised(model.correspond(a, b).p, *pair.ground_truth);
        case TrainMode::rec_only: {
            const auto r = model.forward(a, b);
            return loss_total(a, b, r.a_rec, r.b_rec, r.p, {0.0, 0.0, cfg.weights.k_mfd});
        }
        case TrainMode::chamfer: {
            const auto r = model.forward(a, b);
            Tensor total = add(loss_chamfer(a, r.a_rec), loss_chamfer(b, r.b_rec));
            if (cfg.weights.lambda1 != 0.0) total = add(total, scale(loss_perm(r.p), cfg.weights.lambda1));
            if (cfg.weights.lambda2 != 0.0) total = add(total, scale(loss_mfd(r.p, a, b, cfg.weights.k_mfd), cfg.weights.lambda2));
            return total;
        }
        case TrainMode::unsupervised:
        default: {
            const auto r = model.forward(a, b);
            return loss_total(a, b, r.a_rec, r.b_rec, r.p, cfg.weights);
        }
    }
}

using EpochCallback = std::function<void(std::size_t epoch, const CorrNet& model, double loss)>;

/// Mini-batch Adam training. Pairs are normalized to the unit ball, the pair
/// order is reshuffled every epoch from the run seed, and gradients of a batch
/// are accumulated sequentially before one optimizer step.
inline TrainResult train(const std::vector<ShapePair>& pairs, TrainConfig cfg, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (pairs.empty()) throw ContractError("train: no training pairs");
    const std::size_t n = pairs.front().size();
    std::vector<std::pair<Tensor, Tensor>> clouds;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        pairs[i].validate();
        if (pairs[i].size() != n)
            throw ShapeError("train: pair " + std::to_string(i) + " has " + std::to_string(pairs[i].size()) + " points, expected " +
                             std::to_string(n));
        if (cfg.mode == TrainMode::supervised && !pairs[i].ground_truth)
            throw ConfigError("train: supervised mode needs ground truth for pair " + std::to_string(i));
        clouds.emplace_back(normalize_unit(pairs[i].source).to_tensor(), normalize_unit(pairs[i].target).to_tensor());
    }
    if (n <= cfg.model.embedding.k || n <= cfg.weights.k_mfd)
        throw ContractError("train: clouds of " + std::to_string(n) + " points are too small for the neighbour counts");

    if (cfg.model.deformer.points != 0 && cfg.model.deformer.points != n)
        throw ConfigError("train: config fixes points = " + std::to_string(cfg.model.deformer.points) + " but the clouds have " +
                          std::to_string(n));
    cfg.model.deformer.points = n;
    if (cfg.calibrate_t) {
        CorrNet probe(cfg.model, cfg.seed);
        std::vector<Tensor> sims;
        for (std::size_t i = 0; i < std::min(cfg.batch_size, pairs.size()); ++i)
            sims.push_back(probe.correspond(clouds[i].first, clouds[i].second).similarity.detach());
        std::vector<double> candidates;
        for (int t = 1; t <= 20; ++t) candidates.push_back(t);
        if (auto t = calibrate_t(sims, cfg.model.desmooth.tau, candidates)) cfg.model.desmooth.t = *t;
    }

    TrainResult result{CorrNet(cfg.model, cfg.seed), {}, {}, cfg.model.desmooth.t};
    CorrNet& model = result.model;
    AdamOptions adam = cfg.adam;
    adam.learning_rate = cfg.learning_rate;
    Rng order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = order_rng.permutation(pairs.size());
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(stop - start);
            double batch_sum = 0.0;
            for (std::size_t s = start; s < stop; ++s) {
                const std::size_t idx = order[s];
                const Tensor loss = pair_loss(model, pairs[idx], clouds[idx].first, clouds[idx].second, cfg);
                const double value = loss.item();
                if (!std::isfinite(value))
                    throw NumericError("train: non-finite loss " + std::to_string(value) + " at epoch " + std::to_string(epoch + 1) +
                                       ", pair " + std::to_string(idx) + " (mode " + to_string(cfg.mode) + ", step " +
                                       std::to_string(model.params().step_count + 1) + ")");
                backward(scale(loss, inv));
                batch_sum += value;
            }
            adam_step(model.params(), adam);
            result.step_loss.push_back(batch_sum * inv);
            epoch_sum += batch_sum;
        }
        result.epoch_loss.push_back(epoch_sum / static_cast<double>(pairs.size()));
        if (on_epoch) on_epoch(epoch + 1, model, result.epoch_loss.back());
    }
    return result;
}

}  // namespace corrnet3d
