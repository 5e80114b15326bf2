#pragma once

// Image carriers: raw integer slices, real-valued planes and binary masks.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "xaudit/error.hpp"

namespace xaudit {

// One grayscale image as stored on disk.
struct ImageSlice {
    std::string id;
    int width = 0;
    int height = 0;
    std::uint32_t max_value = 255;
    std::vector<std::uint16_t> pixels;  // row-major, width * height

    std::uint16_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint16_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return pixels.size(); }

    friend bool operator==(const ImageSlice&, const ImageSlice&) = default;
};

inline void validate(const ImageSlice& slice) {
    require(slice.width > 0 && slice.height > 0, ErrorKind::InvalidArgument,
            "image '" + slice.id + "' has non-positive dimensions");
    require(slice.max_value == 255 || slice.max_value == 65535, ErrorKind::UnsupportedMaxVal,
            "image '" + slice.id + "' max value " + std::to_string(slice.max_value));
    require(slice.pixels.size() == static_cast<std::size_t>(slice.width) * slice.height, ErrorKind::InvalidArgument,
            "image '" + slice.id + "' pixel count does not match dimensions");
    for (auto p : slice.pixels)
        require(p <= slice.max_value, ErrorKind::ValueOverflow,
                "image '" + slice.id + "' has sample " + std::to_string(p) + " above max value");
}

// Real-valued plane (calibrated values, model inputs, attributions).
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    Plane() = default;
    Plane(int w, int h, double fill = 0.0) : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return values.size(); }

    friend bool operator==(const Plane&, const Plane&) = default;
};

// Binary mask, one byte per pixel (0 or 1).
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    Mask() = default;
    Mask(int w, int h, bool fill = false) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v = true) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t size() const { return bits.size(); }
    std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }
    bool empty() const { return count() == 0; }

    friend bool operator==(const Mask&, const Mask&) = default;
};

inline Mask mask_union(const Mask& a, const Mask& b) {
    require(a.width == b.width && a.height == b.height, ErrorKind::ShapeMismatch, "mask union of differing dims");
    Mask out = a;
    for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = (a.bits[i] | b.bits[i]) ? 1 : 0;
    return out;
}

inline std::size_t mask_overlap(const Mask& a, const Mask& b) {
    require(a.width == b.width && a.height == b.height, ErrorKind::ShapeMismatch, "mask overlap of differing dims");
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) n += (a.bits[i] && b.bits[i]) ? 1 : 0;
    return n;
}

// Intersection over union; two empty masks have IoU 1.
inline double mask_iou(const Mask& a, const Mask& b) {
    const std::size_t inter = mask_overlap(a, b);
    const std::size_t uni = a.count() + b.count() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline Plane to_plane(const ImageSlice& slice) {
    Plane p(slice.width, slice.height);
    std::transform(slice.pixels.begin(), slice.pixels.end(), p.values.begin(),
                   [](std::uint16_t v) { return static_cast<double>(v); });
    return p;
}

// Bilinear resample to (w, h) using pixel-centre alignment.
inline Plane resample_bilinear(const Plane& src, int w, int h) {
    if (src.width == w && src.height == h) return src;
    Plane out(w, h);
    const double sx = static_cast<double>(src.width) / w;
    const double sy = static_cast<double>(src.height) / h;
    for (int y = 0; y < h; ++y) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, src.height - 1);
        double ty = fy - y0;
        for (int x = 0; x < w; ++x) {
            double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, src.width - 1);
            double tx = fx - x0;
            double top = src.at(x0, y0) * (1 - tx) + src.at(x1, y0) * tx;
            double bot = src.at(x0, y1) * (1 - tx) + src.at(x1, y1) * tx;
            out.at(x, y) = top * (1 - ty) + bot * ty;
        }
    }
    return out;
}

}  // namespace xaudit
