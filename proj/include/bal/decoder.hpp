#pragma once

// Parametric stand-in for a trained image generator. The first latent
// coordinate morphs a filled disc into a cross, the second sets the size and
// the remaining ones nudge stroke thickness and rotation. Everything is
// smooth in z so neighbouring line samples give neighbouring images.

#include "bal/common.hpp"
#include "bal/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace bal {

struct GlyphImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y * width + x)]; }
};

struct RenderOptions {
    int size = 32;
    /// Box-blur radius in pixels; degrades recognisability on purpose.
    int blur = 0;
};

/// 0 for the disc family, 1 for the cross family.
inline double morph_weight(double z1) {
    const double x = std::clamp((std::clamp(z1, -4.0, 4.0) + 3.0) / 6.0, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

namespace detail {

/// Anti-aliased coverage of a signed distance (positive inside).
inline double coverage(double signed_dist, double edge) { return std::clamp(0.5 + signed_dist / edge, 0.0, 1.0); }

inline std::vector<double> box_blur(const std::vector<double>& img, int n, int radius) {
    if (radius <= 0) return img;
    std::vector<double> tmp(img.size()), out(img.size());
    auto pass = [&](const std::vector<double>& src, std::vector<double>& dst, bool horizontal) {
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                double sum = 0.0;
                int count = 0;
                for (int d = -radius; d <= radius; ++d) {
                    const int xx = horizontal ? x + d : x;
                    const int yy = horizontal ? y : y + d;
                    if (xx < 0 || yy < 0 || xx >= n || yy >= n) continue;
                    sum += src[static_cast<std::size_t>(yy * n + xx)];
                    ++count;
                }
                dst[static_cast<std::size_t>(y * n + x)] = sum / count;
            }
        }
    };
    pass(img, tmp, true);
    pass(tmp, out, false);
    return out;
}

}  // namespace detail

/// Intensities in [0, 1] before quantisation.
inline std::vector<double> render_glyph_intensity(const Vec& z, const RenderOptions& opt = {}) {
    if (z.size() < 2) throw Error("decoder needs at least two latent dimensions");
    const int n = opt.size;
    auto coord = [&](Eigen::Index i) { return i < z.size() ? std::clamp(z[i], -4.0, 4.0) : 0.0; };

    const double alpha = morph_weight(coord(0));
    const double radius = 0.62 + 0.18 * std::tanh(coord(1) / 2.0);
    double thick_drive = 0.0, rot_drive = 0.0;
    for (Eigen::Index i = 2; i < z.size(); ++i) (i % 2 == 0 ? thick_drive : rot_drive) += coord(i);
    const double dims = std::max<double>(1.0, static_cast<double>(z.size() - 2));
    const double half_width = 0.17 + 0.06 * std::tanh(thick_drive / dims);
    const double angle = 0.35 * std::tanh(rot_drive / dims);
    const double c = std::cos(angle), s = std::sin(angle);
    const double edge = 3.0 / n;

    std::vector<double> img(static_cast<std::size_t>(n * n));
    for (int py = 0; py < n; ++py) {
        for (int px = 0; px < n; ++px) {
            const double x = (px + 0.5) / n * 2.0 - 1.0;
            const double y = (py + 0.5) / n * 2.0 - 1.0;
            const double disc = detail::coverage(radius - std::hypot(x, y), edge);
            const double u = c * x + s * y;
            const double v = -s * x + c * y;
            const double bar1 = std::min(half_width - std::abs(v), radius - std::abs(u));
            const double bar2 = std::min(half_width - std::abs(u), radius - std::abs(v));
            const double cross = detail::coverage(std::max(bar1, bar2), edge);
            img[static_cast<std::size_t>(py * n + px)] = (1.0 - alpha) * disc + alpha * cross;
        }
    }
    return detail::box_blur(img, n, opt.blur);
}

inline GlyphImage render_glyph(const Vec& z, const RenderOptions& opt = {}) {
    const auto intensity = render_glyph_intensity(z, opt);
    GlyphImage g{opt.size, opt.size, {}};
    g.pixels.reserve(intensity.size());
    for (double v : intensity) g.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    return g;
}

struct StripSlot {
    std::size_t index = 0;
    int x_begin = 0;  // inclusive
    int x_end = 0;    // exclusive
};

struct ImageStrip {
    GlyphImage image;
    std::vector<StripSlot> slots;

    /// Sample under pixel column x; separators and out-of-range give nullopt.
    std::optional<std::size_t> sample_at(int x) const {
        if (slots.empty() || x < 0 || x >= image.width) return std::nullopt;
        const int pitch = slots.size() > 1 ? slots[1].x_begin - slots[0].x_begin : image.width;
        const auto i = static_cast<std::size_t>(x / pitch);
        if (i >= slots.size() || x >= slots[i].x_end) return std::nullopt;
        return slots[i].index;
    }
};

inline constexpr int kStripSeparator = 2;

/// Glyphs side by side in line order with 2-px white separators.
inline ImageStrip render_strip(const std::vector<LineSample>& samples, const RenderOptions& opt = {}) {
    if (samples.empty()) throw Error("strip needs at least one sample");
    const int n = opt.size;
    const int count = static_cast<int>(samples.size());
    ImageStrip strip;
    strip.image.width = count * n + (count - 1) * kStripSeparator;
    strip.image.height = n;
    strip.image.pixels.assign(static_cast<std::size_t>(strip.image.width * n), 255);
    for (int i = 0; i < count; ++i) {
        const auto glyph = render_glyph(samples[static_cast<std::size_t>(i)].point, opt);
        const int x0 = i * (n + kStripSeparator);
        for (int y = 0; y < n; ++y)
            std::copy_n(glyph.pixels.begin() + y * n, n,
                        strip.image.pixels.begin() + static_cast<std::ptrdiff_t>(y * strip.image.width + x0));
        strip.slots.push_back({samples[static_cast<std::size_t>(i)].index, x0, x0 + n});
    }
    return strip;
}

}  // namespace bal
