#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "corrnet3d/errors.hpp"
#include "corrnet3d/tensor.hpp"

namespace corrnet3d {

using Point3 = std::array<double, 3>;

/// Ordered set of n >= 2 finite points; row order is meaningful.
struct PointCloud {
    std::vector<Point3> points;
    std::string name;

    std::size_t size() const { return points.size(); }
    const Point3& operator[](std::size_t i) const { return points[i]; }

    void validate() const {
        if (points.size() < 2) throw GeometryError("point cloud needs at least 2 points, got " + std::to_string(points.size()));
        for (std::size_t i = 0; i < points.size(); ++i)
            for (double c : points[i])
                if (!std::isfinite(c)) throw GeometryError("non-finite coordinate at point " + std::to_string(i));
    }

    /// Flat row-major [n x 3] coordinates.
    std::vector<double> flat() const {
        std::vector<double> out;
        out.reserve(points.size() * 3);
        for (const auto& p : points) out.insert(out.end(), p.begin(), p.end());
        return out;
    }

    Tensor to_tensor() const { return Tensor({points.size(), 3}, flat()); }

    static PointCloud from_flat(std::span<const double> xyz, std::string name = {}) {
        if (xyz.size() % 3 != 0) throw ShapeError("flat coordinates must come in triples");
        PointCloud pc;
        pc.name = std::move(name);
        pc.points.resize(xyz.size() / 3);
        for (std::size_t i = 0; i < pc.points.size(); ++i) pc.points[i] = {xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]};
        return pc;
    }

    PointCloud subset(std::span<const std::size_t> indices) const {
        PointCloud out;
        out.name = name;
        out.points.reserve(indices.size());
        for (auto i : indices) out.points.push_back(points.at(i));
        return out;
    }
};

inline double squared_distance(const Point3& a, const Point3& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

inline double distance(const Point3& a, const Point3& b) { return std::sqrt(squared_distance(a, b)); }

/// A source/target pair of equal size with an optional ground truth:
/// `ground_truth[i] == j` means source point i corresponds to target point j.
struct ShapePair {
    PointCloud source;
    PointCloud target;
    std::optional<std::vector<std::size_t>> ground_truth;

    ShapePair() = default;
    ShapePair(PointCloud s, PointCloud t, std::optional<std::vector<std::size_t>> gt = std::nullopt)
        : source(std::move(s)), target(std::move(t)), ground_truth(std::move(gt)) {
        validate();
    }

    std::size_t size() const { return source.size(); }

    void validate() const;
};

inline bool is_bijection(std::span<const std::size_t> perm) {
    std::vector<char> hit(perm.size(), 0);
    for (auto j : perm) {
        if (j >= perm.size() || hit[j]) return false;
        hit[j] = 1;
    }
    return true;
}

inline void ShapePair::validate() const {
    if (source.size() != target.size())
        throw ShapeError("shape pair clouds differ in size: " + std::to_string(source.size()) + " vs " +
                         std::to_string(target.size()));
    if (ground_truth) {
        if (ground_truth->size() != source.size())
            throw ShapeError("ground truth has " + std::to_string(ground_truth->size()) + " entries for " +
                             std::to_string(source.size()) + " points");
        if (!is_bijection(*ground_truth)) throw ContractError("ground truth is not a bijection");
    }
}

// ---------------------------------------------------------------------------
// Parsers and writers
// ---------------------------------------------------------------------------

namespace detail {

class LineReader {
  public:
    explicit LineReader(std::string_view text) : text_(text) {}

    // Next line with '\r' stripped; false at end of input.
    bool next(std::string_view& line) {
        if (pos_ >= text_.size()) return false;
        auto end = text_.find('\n', pos_);
        if (end == std::string_view::npos) end = text_.size();
        line = text_.substr(pos_, end - pos_);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos_ = end + 1;
        ++line_no_;
        return true;
    }

    std::size_t line_no() const { return line_no_; }

  private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_no_ = 0;
};

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string_view trim_view(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline double parse_double(std::string_view tok, std::size_t line) {
    double v = 0.0;
    const char* first = tok.data();
    if (!tok.empty() && tok.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("non-numeric token '" + std::string(tok) + "'", line);
    return v;
}

inline std::size_t parse_count(std::string_view tok, std::size_t line) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("expected a non-negative integer, got '" + std::string(tok) + "'", line);
    return v;
}

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline bool blank_or_comment(std::string_view line) {
    auto toks = split_ws(line);
    return toks.empty() || toks.front().front() == '#';
}

}  // namespace detail

/// One "x y z" triple per line; blank and '#' lines are skipped.
inline PointCloud parse_xyz(std::string_view text) {
    PointCloud pc;
    detail::LineReader reader(text);
    std::string_view line;
    while (reader.next(line)) {
        if (detail::blank_or_comment(line)) continue;
        auto toks = detail::split_ws(line);
        if (toks.size() != 3)
            throw ParseError("expected 3 coordinates, found " + std::to_string(toks.size()), reader.line_no());
        pc.points.push_back({detail::parse_double(toks[0], reader.line_no()),
                             detail::parse_double(toks[1], reader.line_no()),
                             detail::parse_double(toks[2], reader.line_no())});
    }
    return pc;
}

/// ASCII PLY 1.0. Only the vertex element is read; x, y, z must be present
/// and every other property (of any scalar type) is skipped.
inline PointCloud parse_ply_ascii(std::string_view text) {
    detail::LineReader reader(text);
    std::string_view line;
    if (!reader.next(line) || line != "ply") throw ParseError("missing 'ply' magic", reader.line_no());
    if (!reader.next(line)) throw ParseError("truncated header", reader.line_no());
    {
        auto toks = detail::split_ws(line);
        if (toks.size() != 3 || toks[0] != "format") throw ParseError("expected format line", reader.line_no());
        if (toks[1] != "ascii") throw ParseError("only ascii PLY is supported, got '" + std::string(toks[1]) + "'", reader.line_no());
        if (toks[2] != "1.0") throw ParseError("unsupported PLY version '" + std::string(toks[2]) + "'", reader.line_no());
    }

    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<std::string> props;
        bool has_list = false;
    };
    std::vector<Element> elements;
    bool header_done = false;
    while (reader.next(line)) {
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks[0] == "comment" || toks[0] == "obj_info") continue;
        if (toks[0] == "end_header") {
            header_done = true;
            break;
        }
        if (toks[0] == "element") {
            if (toks.size() != 3) throw ParseError("malformed element line", reader.line_no());
            elements.push_back({std::string(toks[1]), detail::parse_count(toks[2], reader.line_no()), {}, false});
        } else if (toks[0] == "property") {
            if (elements.empty()) throw ParseError("property before any element", reader.line_no());
            if (toks.size() >= 2 && toks[1] == "list") {
                if (toks.size() != 5) throw ParseError("malformed list property", reader.line_no());
                elements.back().has_list = true;
                elements.back().props.emplace_back(toks[4]);
            } else {
                if (toks.size() != 3) throw ParseError("malformed property line", reader.line_no());
                elements.back().props.emplace_back(toks[2]);
            }
        } else {
            throw ParseError("unexpected header keyword '" + std::string(toks[0]) + "'", reader.line_no());
        }
    }
    if (!header_done) throw ParseError("truncated header: no end_header", reader.line_no());

    PointCloud pc;
    bool saw_vertex = false;
    for (const auto& el : elements) {
        if (el.name != "vertex") {
            // Non-vertex elements (faces, edges) are skipped line by line.
            for (std::size_t r = 0; r < el.count; ++r)
                if (!reader.next(line)) throw ParseError("truncated " + el.name + " data", reader.line_no());
            continue;
        }
        saw_vertex = true;
        if (el.has_list) throw ParseError("list properties on vertex are not supported", 0);
        std::optional<std::size_t> ix, iy, iz;
        for (std::size_t p = 0; p < el.props.size(); ++p) {
            if (el.props[p] == "x") ix = p;
            if (el.props[p] == "y") iy = p;
            if (el.props[p] == "z") iz = p;
        }
        if (!ix || !iy || !iz) throw ParseError("vertex element lacks x, y or z", 0);
        pc.points.reserve(el.count);
        for (std::size_t r = 0; r < el.count; ++r) {
            if (!reader.next(line)) throw ParseError("truncated vertex data", reader.line_no());
            auto toks = detail::split_ws(line);
            if (toks.size() != el.props.size())
                throw ParseError("expected " + std::to_string(el.props.size()) + " vertex values, found " +
                                     std::to_string(toks.size()),
                                 reader.line_no());
            for (const auto& tok : toks) detail::parse_double(tok, reader.line_no());
            pc.points.push_back({detail::parse_double(toks[*ix], reader.line_no()),
                                 detail::parse_double(toks[*iy], reader.line_no()),
                                 detail::parse_double(toks[*iz], reader.line_no())});
        }
    }
    if (!saw_vertex) throw ParseError("no vertex element", 0);
    return pc;
}

/// OFF: "OFF" header, "V F E" counts, V vertex lines. Faces are not read.
inline PointCloud parse_off(std::string_view text) {
    detail::LineReader reader(text);
    std::string_view line;
    auto next_content = [&]() -> bool {
        while (reader.next(line))
            if (!detail::blank_or_comment(line)) return true;
        return false;
    };
    if (!next_content()) throw ParseError("empty OFF file", reader.line_no());
    auto head = detail::split_ws(line);
    std::vector<std::string_view> counts;
    if (head[0] == "OFF") {
        counts.assign(head.begin() + 1, head.end());
        if (counts.empty()) {
            if (!next_content()) throw ParseError("truncated OFF: missing counts", reader.line_no());
            counts = detail::split_ws(line);
        }
    } else {
        throw ParseError("missing 'OFF' header", reader.line_no());
    }
    if (counts.size() != 3) throw ParseError("expected 'V F E' counts", reader.line_no());
    const std::size_t nv = detail::parse_count(counts[0], reader.line_no());
    detail::parse_count(counts[1], reader.line_no());
    detail::parse_count(counts[2], reader.line_no());

    PointCloud pc;
    pc.points.reserve(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        if (!next_content()) throw ParseError("truncated OFF: expected " + std::to_string(nv) + " vertices", reader.line_no());
        auto toks = detail::split_ws(line);
        if (toks.size() != 3)
            throw ParseError("expected 3 vertex coordinates, found " + std::to_string(toks.size()), reader.line_no());
        pc.points.push_back({detail::parse_double(toks[0], reader.line_no()),
                             detail::parse_double(toks[1], reader.line_no()),
                             detail::parse_double(toks[2], reader.line_no())});
    }
    return pc;
}

// Writers emit the canonical form the parsers accept: shortest round-trip
// decimal representation, single spaces, '\n' line ends.

inline std::string write_xyz(const PointCloud& pc) {
    std::string out;
    for (const auto& p : pc.points)
        out += detail::format_double(p[0]) + ' ' + detail::format_double(p[1]) + ' ' + detail::format_double(p[2]) + '\n';
    return out;
}

inline std::string write_ply_ascii(const PointCloud& pc) {
    std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(pc.size()) +
                      "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    return out + write_xyz(pc);
}

inline std::string write_off(const PointCloud& pc) {
    return "OFF\n" + std::to_string(pc.size()) + " 0 0\n" + write_xyz(pc);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write to '" + path + "' failed");
}

/// Dispatches on the file extension (.xyz, .ply, .off).
inline PointCloud load_point_cloud(const std::string& path) {
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    const std::string text = read_text_file(path);
    PointCloud pc;
    try {
        if (ext == "xyz" || ext == "txt")
            pc = parse_xyz(text);
        else if (ext == "ply")
            pc = parse_ply_ascii(text);
        else if (ext == "off")
            pc = parse_off(text);
        else
            throw ParseError("unknown point-cloud extension '." + ext + "'", 0);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
    pc.name = path;
    return pc;
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

inline Point3 centroid(const PointCloud& pc) {
    Point3 c{0, 0, 0};
    for (const auto& p : pc.points)
        for (int k = 0; k < 3; ++k) c[k] += p[k];
    for (auto& v : c) v /= static_cast<double>(pc.size());
    return c;
}

/// Translates the centroid to the origin and scales so the farthest point has
/// norm 1.
inline PointCloud normalize_unit(const PointCloud& pc) {
    pc.validate();
    const Point3 c = centroid(pc);
    PointCloud out = pc;
    double max_norm = 0.0;
    for (auto& p : out.points) {
        for (int k = 0; k < 3; ++k) p[k] -= c[k];
        max_norm = std::max(max_norm, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
    }
    if (!(max_norm > 1e-300)) throw GeometryError("cannot normalize a cloud whose points are all identical");
    for (auto& p : out.points)
        for (auto& v : p) v /= max_norm;
    return out;
}

/// k nearest rows of `base` for every row of `query` (both row-major with
/// `dim` columns), ascending by distance, ties to the lower index. With
/// `same_set` the query row itself is excluded. Returns a flat [rows x k]
/// table.
inline std::vector<std::size_t> knn_indices(std::span<const double> query, std::span<const double> base,
                                            std::size_t dim, std::size_t k, bool same_set) {
    const std::size_t nq = query.size() / dim, nb = base.size() / dim;
    const std::size_t available = same_set ? nb - 1 : nb;
    if (k == 0 || k > available || (same_set && k >= nb))
        throw ContractError("knn: k = " + std::to_string(k) + " must be in [1, " + std::to_string(available) +
                            "] for " + std::to_string(nb) + " base points");
    std::vector<std::size_t> out(nq * k);
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(nb);
    for (std::size_t i = 0; i < nq; ++i) {
        cand.clear();
        const double* q = query.data() + i * dim;
        for (std::size_t j = 0; j < nb; ++j) {
            if (same_set && j == i) continue;
            const double* b = base.data() + j * dim;
            double s = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double d = q[c] - b[c];
                s += d * d;
            }
            cand.emplace_back(s, j);
        }
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
        for (std::size_t r = 0; r < k; ++r) out[i * k + r] = cand[r].second;
    }
    return out;
}

inline std::vector<std::size_t> knn_indices(const PointCloud& pc, std::size_t k) {
    const auto flat = pc.flat();
    return knn_indices(flat, flat, 3, k, true);
}

/// Farthest point sampling seeded at index 0; ties go to the lower index.
inline std::vector<std::size_t> fps_sample(const PointCloud& pc, std::size_t m) {
    const std::size_t n = pc.size();
    if (m == 0 || m > n)
        throw ContractError("fps: m = " + std::to_string(m) + " must be in [1, " + std::to_string(n) + "]");
    std::vector<std::size_t> chosen{0};
    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
    std::vector<char> taken(n, 0);
    taken[0] = 1;
    while (chosen.size() < m) {
        const auto& last = pc[chosen.back()];
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i) {
            min_d[i] = std::min(min_d[i], squared_distance(pc[i], last));
            if (taken[i]) continue;
            if (best == n || min_d[i] > min_d[best]) best = i;
        }
        chosen.push_back(best);
        taken[best] = 1;
    }
    return chosen;
}

}  // namespace corrnet3d
