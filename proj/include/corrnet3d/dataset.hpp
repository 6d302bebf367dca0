#pragma once

// On-disk pair datasets: one directory per pair holding source.xyz,
// target.xyz and (optionally) gt.csv, listed one per line in manifest.txt.

#include <filesystem>
#include <string>
#include <vector>

#include "corrnet3d/csv.hpp"
#include "corrnet3d/pointcloud.hpp"

namespace corrnet3d {

inline constexpr const char* kManifestName = "manifest.txt";

inline void write_pair_dir(const std::filesystem::path& dir, const ShapePair& pair) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    write_text_file((dir / "source.xyz").string(), write_xyz(pair.source));
    write_text_file((dir / "target.xyz").string(), write_xyz(pair.target));
    if (pair.ground_truth) write_text_file((dir / "gt.csv").string(), write_correspondence_csv(*pair.ground_truth));
}

inline ShapePair load_pair_dir(const std::filesystem::path& dir) {
    auto source = load_point_cloud((dir / "source.xyz").string());
    auto target = load_point_cloud((dir / "target.xyz").string());
    const auto gt_path = dir / "gt.csv";
    if (!std::filesystem::exists(gt_path)) return ShapePair(std::move(source), std::move(target));
    std::vector<std::size_t> gt;
    try {
        gt = parse_correspondence_csv(read_text_file(gt_path.string()));
    } catch (const ParseError& e) {
        throw ParseError(gt_path.string() + ": " + e.what(), 0);
    }
    if (gt.size() != source.size())
        throw ShapeError(gt_path.string() + ": " + std::to_string(gt.size()) + " rows for " + std::to_string(source.size()) + " points");
    if (!is_bijection(gt)) throw ShapeError(gt_path.string() + ": ground truth is not a bijection");
    return ShapePair(std::move(source), std::move(target), std::move(gt));
}

/// Entries are directory names relative to the manifest's directory; blank
/// lines and '#' comments are skipped.
inline std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& data_dir) {
    const auto text = read_text_file((data_dir / kManifestName).string());
    std::vector<std::filesystem::path> out;
    detail::LineReader reader(text);
    std::string_view line;
    while (reader.next(line)) {
        const auto entry = detail::trim_view(line);
        if (entry.empty() || entry.front() == '#') continue;
        const std::filesystem::path p(entry);
        out.push_back(p.is_absolute() ? p : data_dir / p);
    }
    if (out.empty()) throw ParseError("manifest in '" + data_dir.string() + "' lists no pairs", 0);
    return out;
}

inline std::vector<ShapePair> load_dataset(const std::filesystem::path& data_dir) {
    std::vector<ShapePair> pairs;
    for (const auto& dir : read_manifest(data_dir)) pairs.push_back(load_pair_dir(dir));
    return pairs;
}

inline void write_manifest(const std::filesystem::path& data_dir, const std::vector<std::string>& entries) {
    std::string text;
    for (const auto& e : entries) text += e + '\n';
    write_text_file((data_dir / kManifestName).string(), text);
}

}  // namespace corrnet3d
