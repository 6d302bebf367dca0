#pragma once

// CSV files exchanged by the command-line tool:
//   correspondence / ground truth: "source_index,target_index"
//   tolerance curve:               "tolerance,corr"
//   normalizer benchmark:          "method,n,median_seconds"
//   training loss log:             "epoch,loss"

#include <string>
#include <string_view>
#include <vector>

#include "corrnet3d/evaluation.hpp"
#include "corrnet3d/pointcloud.hpp"

namespace corrnet3d {

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

// Yields the data rows after checking the header; blank lines are skipped.
inline std::vector<std::pair<std::size_t, std::vector<std::string_view>>> csv_rows(std::string_view text,
                                                                                    std::string_view header,
                                                                                    std::size_t columns) {
    LineReader reader(text);
    std::string_view line;
    if (!reader.next(line) || line != header) throw ParseError("expected CSV header '" + std::string(header) + "'", 1);
    std::vector<std::pair<std::size_t, std::vector<std::string_view>>> rows;
    while (reader.next(line)) {
        if (line.empty()) continue;
        auto cells = split_commas(line);
        if (cells.size() != columns)
            throw ParseError("expected " + std::to_string(columns) + " columns, found " + std::to_string(cells.size()),
                             reader.line_no());
        rows.emplace_back(reader.line_no(), std::move(cells));
    }
    return rows;
}

}  // namespace detail

inline constexpr std::string_view kCorrespondenceHeader = "source_index,target_index";
inline constexpr std::string_view kCurveHeader = "tolerance,corr";
inline constexpr std::string_view kBenchHeader = "method,n,median_seconds";
inline constexpr std::string_view kLossHeader = "epoch,loss";

inline std::string write_correspondence_csv(std::span<const std::size_t> corr) {
    std::string out(kCorrespondenceHeader);
    out += '\n';
    for (std::size_t i = 0; i < corr.size(); ++i) out += std::to_string(i) + ',' + std::to_string(corr[i]) + '\n';
    return out;
}

/// Rows may come in any order but must cover source indices 0..n-1 exactly once.
inline std::vector<std::size_t> parse_correspondence_csv(std::string_view text) {
    const auto rows = detail::csv_rows(text, kCorrespondenceHeader, 2);
    std::vector<std::size_t> out(rows.size());
    std::vector<char> seen(rows.size(), 0);
    for (const auto& [line, cells] : rows) {
        const auto src = detail::parse_count(cells[0], line);
        const auto dst = detail::parse_count(cells[1], line);
        if (src >= rows.size() || seen[src]) throw ParseError("source index " + std::to_string(src) + " repeated or out of range", line);
        seen[src] = 1;
        out[src] = dst;
    }
    return out;
}

inline std::string write_curve_csv(std::span<const CurvePoint> curve) {
    std::string out(kCurveHeader);
    out += '\n';
    for (const auto& p : curve) out += detail::format_double(p.tolerance) + ',' + detail::format_double(p.corr) + '\n';
    return out;
}

inline std::vector<CurvePoint> parse_curve_csv(std::string_view text) {
    std::vector<CurvePoint> out;
    for (const auto& [line, cells] : detail::csv_rows(text, kCurveHeader, 2))
        out.push_back({detail::parse_double(cells[0], line), detail::parse_double(cells[1], line)});
    return out;
}

inline bool curve_is_monotone(std::span<const CurvePoint> curve) {
    for (std::size_t i = 1; i < curve.size(); ++i)
        if (curve[i].tolerance < curve[i - 1].tolerance || curve[i].corr < curve[i - 1].corr) return false;
    return true;
}

inline std::string write_bench_csv(std::span<const BenchRow> rows) {
    std::string out(kBenchHeader);
    out += '\n';
    for (const auto& r : rows) out += r.method + ',' + std::to_string(r.n) + ',' + detail::format_double(r.median_seconds) + '\n';
    return out;
}

inline std::vector<BenchRow> parse_bench_csv(std::string_view text) {
    std::vector<BenchRow> out;
    for (const auto& [line, cells] : detail::csv_rows(text, kBenchHeader, 3))
        out.push_back({std::string(cells[0]), detail::parse_count(cells[1], line), detail::parse_double(cells[2], line)});
    return out;
}

inline std::string write_loss_csv(std::span<const double> epoch_loss) {
    std::string out(kLossHeader);
    out += '\n';
    for (std::size_t e = 0; e < epoch_loss.size(); ++e) out += std::to_string(e + 1) + ',' + detail::format_double(epoch_loss[e]) + '\n';
    return out;
}

inline std::vector<double> parse_loss_csv(std::string_view text) {
    std::vector<double> out;
    for (const auto& [line, cells] : detail::csv_rows(text, kLossHeader, 2)) {
        if (detail::parse_count(cells[0], line) != out.size() + 1) throw ParseError("epochs must be consecutive from 1", line);
        out.push_back(detail::parse_double(cells[1], line));
    }
    return out;
}

}  // namespace corrnet3d
