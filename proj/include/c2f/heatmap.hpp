#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "c2f/error.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

enum class HeatmapFormat { pgm, csv };

/// Min-max normalizes to 0..255; a constant map becomes all zeros.
inline std::vector<int> heatmap_levels(const Tensor& values) {
    const auto v = values.values();
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    std::vector<int> out(v.size(), 0);
    if (v.empty() || *hi == *lo) return out;
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = static_cast<int>(std::lround((v[i] - *lo) / range * 255.0));
    return out;
}

/// Shortest decimal that parses back to the same double; locale independent.
inline std::string format_real(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string render_heatmap(const Tensor& values, HeatmapFormat format) {
    detail::require(values.rank() == 2, Errc::dimension_mismatch, "heatmap expects an H x W tensor");
    const std::size_t h = values.dim(0), w = values.dim(1);
    std::ostringstream os;
    if (format == HeatmapFormat::pgm) {
        const auto levels = heatmap_levels(values);
        os << "P2\n" << w << ' ' << h << "\n255\n";
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) os << (x ? " " : "") << levels[y * w + x];
            os << '\n';
        }
    } else {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) os << (x ? "," : "") << format_real(values(y, x));
            os << '\n';
        }
    }
    return os.str();
}

inline void export_heatmap(const Tensor& values, HeatmapFormat format, const std::filesystem::path& path) {
    const auto text = render_heatmap(values, format);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    detail::require(static_cast<bool>(os), Errc::io_failure, "cannot open " + path.string() + " for writing");
    os << text;
    detail::require(static_cast<bool>(os), Errc::io_failure, "write failed: " + path.string());
}

/// Parses a CSV heatmap back into an H x W tensor.
inline Tensor parse_heatmap_csv(const std::string& text) {
    std::vector<double> data;
    std::size_t rows = 0, cols = 0;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::size_t n = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end) {
            double v = 0.0;
            const auto res = std::from_chars(p, end, v);
            detail::require(res.ec == std::errc(), Errc::invalid_argument, "malformed CSV value");
            data.push_back(v);
            ++n;
            p = res.ptr;
            if (p < end) {
                detail::require(*p == ',', Errc::invalid_argument, "malformed CSV separator");
                ++p;
            }
        }
        detail::require(rows == 0 || n == cols, Errc::dimension_mismatch, "ragged CSV rows");
        cols = n;
        ++rows;
    }
    return Tensor({rows, cols}, std::move(data));
}

}  // namespace c2f
