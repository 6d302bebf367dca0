#pragma once

// Named parameter store with Adam state and the binary checkpoint format:
//
//   "C3DCKPT1\n"
//   one manifest line per tensor: "<name> <rank> <dim>..."
//   "\n"
//   little-endian float32 payloads, manifest order, row-major
//
// Parameters are kept float32-representable (rounded at init and after every
// optimizer step) so a save/load round trip reproduces them bit for bit.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "corrnet3d/errors.hpp"
#include "corrnet3d/random.hpp"
#include "corrnet3d/tensor.hpp"

namespace corrnet3d {

inline double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

class ParamStore {
  public:
    struct Entry {
        std::string name;
        Tensor value;
        std::vector<double> m;  // Adam first moment
        std::vector<double> v;  // Adam second moment
    };

    /// Glorot-uniform weight of shape [fan_in x fan_out].
    Tensor add_weight(const std::string& name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::vector<double> w(fan_in * fan_out);
        for (auto& x : w) x = round_to_float(rng.uniform(-limit, limit));
        return add(name, Tensor({fan_in, fan_out}, std::move(w), true));
    }

    Tensor add_bias(const std::string& name, std::size_t width) {
        return add(name, Tensor::zeros({1, width}, true));
    }

    Tensor add(const std::string& name, Tensor value) {
        if (index_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
        if (!value.requires_grad()) value.set_requires_grad(true);
        index_[name] = entries_.size();
        entries_.push_back({name, value, std::vector<double>(value.size(), 0.0), std::vector<double>(value.size(), 0.0)});
        return value;
    }

    const Tensor& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
        return entries_[it->second].value;
    }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    void zero_grad() {
        for (auto& e : entries_) e.value.zero_grad();
    }

    /// Exact equality of names, shapes and values.
    bool same_values(const ParamStore& other) const {
        if (entries_.size() != other.entries_.size()) return false;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const auto& a = entries_[i];
            const auto& b = other.entries_[i];
            if (a.name != b.name || a.value.shape() != b.value.shape()) return false;
            if (!std::equal(a.value.data().begin(), a.value.data().end(), b.value.data().begin())) return false;
        }
        return true;
    }

    std::uint64_t step_count = 0;

  private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

struct AdamOptions {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// One bias-corrected Adam update on every parameter, then zeroes gradients.
inline void adam_step(ParamStore& params, const AdamOptions& opt) {
    ++params.step_count;
    const double t = static_cast<double>(params.step_count);
    const double c1 = 1.0 - std::pow(opt.beta1, t);
    const double c2 = 1.0 - std::pow(opt.beta2, t);
    for (auto& e : params.entries()) {
        if (!e.value.requires_grad() || e.value.grad().size() != e.value.size())
            throw ContractError("adam_step: parameter '" + e.name + "' has no gradient buffer");
        auto w = e.value.mutable_data();
        auto g = e.value.grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            e.m[i] = opt.beta1 * e.m[i] + (1.0 - opt.beta1) * g[i];
            e.v[i] = opt.beta2 * e.v[i] + (1.0 - opt.beta2) * g[i] * g[i];
            const double m_hat = e.m[i] / c1;
            const double v_hat = e.v[i] / c2;
            w[i] = round_to_float(w[i] - opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon));
        }
        e.value.zero_grad();
    }
}

inline constexpr std::string_view kCheckpointMagic = "C3DCKPT1";

inline std::string serialize_checkpoint(const ParamStore& params) {
    std::string out(kCheckpointMagic);
    out += '\n';
    for (const auto& e : params.entries()) {
        out += e.name + ' ' + std::to_string(e.value.rank());
        for (auto d : e.value.shape()) out += ' ' + std::to_string(d);
        out += '\n';
    }
    out += '\n';
    for (const auto& e : params.entries())
        for (double v : e.value.data()) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, sizeof bits);
            for (int b = 0; b < 4; ++b) out += static_cast<char>((bits >> (8 * b)) & 0xFFu);
        }
    return out;
}

/// Loads values into an already-built store. Every manifest entry must name an
/// existing parameter of the same shape and every parameter must be present.
inline void deserialize_checkpoint(ParamStore& params, std::string_view bytes) {
    if (bytes.size() < kCheckpointMagic.size() + 1 || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic ||
        bytes[kCheckpointMagic.size()] != '\n')
        throw CheckpointError("not a checkpoint: bad magic");
    std::size_t pos = kCheckpointMagic.size() + 1;

    struct Item {
        std::string name;
        Shape shape;
    };
    std::vector<Item> manifest;
    while (true) {
        const auto end = bytes.find('\n', pos);
        if (end == std::string_view::npos) throw CheckpointError("truncated checkpoint manifest");
        const std::string line(bytes.substr(pos, end - pos));
        pos = end + 1;
        if (line.empty()) break;
        std::istringstream ls(line);
        Item item;
        std::size_t rank = 0;
        if (!(ls >> item.name >> rank) || rank == 0) throw CheckpointError("malformed manifest line '" + line + "'");
        item.shape.resize(rank);
        for (auto& d : item.shape)
            if (!(ls >> d) || d == 0) throw CheckpointError("malformed manifest line '" + line + "'");
        manifest.push_back(std::move(item));
    }

    std::size_t floats = 0;
    for (const auto& item : manifest) {
        if (!params.contains(item.name)) throw CheckpointError("checkpoint parameter '" + item.name + "' is not part of this model");
        const auto& have = params.at(item.name).shape();
        if (have != item.shape)
            throw CheckpointError("shape mismatch for parameter '" + item.name + "': checkpoint " + shape_string(item.shape) +
                                  ", model " + shape_string(have));
        floats += shape_size(item.shape);
    }
    if (manifest.size() != params.size()) throw CheckpointError("checkpoint is missing model parameters");
    if (bytes.size() - pos != floats * 4)
        throw CheckpointError("checkpoint payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                              std::to_string(floats * 4));

    for (const auto& item : manifest) {
        Tensor t = params.at(item.name);
        auto w = t.mutable_data();
        for (auto& x : w) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * b);
            float f;
            std::memcpy(&f, &bits, sizeof f);
            x = static_cast<double>(f);
        }
    }
}

inline void save_checkpoint(const ParamStore& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
    const auto bytes = serialize_checkpoint(params);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write to '" + path + "' failed");
}

inline void load_checkpoint(ParamStore& params, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    deserialize_checkpoint(params, ss.str());
}

}  // namespace corrnet3d
