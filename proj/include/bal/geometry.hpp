#pragma once

// Latent-space geometry for line queries: the bounding hypersphere, projection
// onto a hyperplane, perpendicular query lines clipped to the sphere, and
// uniform sampling along them.

#include "bal/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace bal {

struct Hypersphere {
    Vec center;
    double radius = 0.0;

    bool contains(const Vec& p, double rel_slack = 1e-9) const {
        return (p - center).norm() <= radius * (1.0 + rel_slack) + rel_slack;
    }
};

/// Mean-centered sphere enclosing every point (not the minimum enclosing ball).
inline Hypersphere fit_hypersphere(std::span<const Vec> points) {
    if (points.empty()) throw Error("no points");
    const auto dim = points.front().size();
    Vec center = Vec::Zero(dim);
    for (const auto& p : points) {
        if (p.size() != dim) throw Error("dimension mismatch");
        center += p;
    }
    center /= static_cast<double>(points.size());
    double radius = 0.0;
    for (const auto& p : points) radius = std::max(radius, (p - center).norm());
    return {std::move(center), radius};
}

inline Vec project_onto_boundary(const Vec& z, const Vec& w, double b) {
    require_same_dim(z, w);
    const double ww = w.squaredNorm();
    if (!(ww > 0.0)) throw Error("degenerate boundary");
    return z - ((w.dot(z) + b) / ww) * w;
}

/// q(t) = base + t * direction, with t = 1 at the query sample and
/// [t_lo, t_hi] the part of the line inside the sphere.
struct QueryLine {
    Vec base;
    Vec query;
    Vec direction;
    double t_lo = 0.0;
    double t_hi = 0.0;
    double resolution = 0.25;

    Vec at(double t) const { return base + t * direction; }
    double length() const { return (t_hi - t_lo) * direction.norm(); }
};

struct LineSample {
    double t = 0.0;
    Vec point;
    std::size_t index = 0;
};

/// Roots of ||origin + t*dir - center||^2 = radius^2, ascending.
/// Nullopt when the line misses the sphere.
inline std::optional<std::pair<double, double>> clip_to_sphere(const Vec& origin, const Vec& dir,
                                                                const Hypersphere& sphere) {
    const Vec offset = origin - sphere.center;
    const double a = dir.squaredNorm();
    const double half_b = dir.dot(offset);
    const double c = offset.squaredNorm() - sphere.radius * sphere.radius;
    double disc = half_b * half_b - a * c;
    if (disc < 0.0) {
        const double scale = std::max(half_b * half_b, std::abs(a * c));
        if (disc < -1e-12 * scale) return std::nullopt;
        disc = 0.0;
    }
    const double root = std::sqrt(disc);
    // q carries the sign of half_b so that no cancellation happens.
    const double q = -(half_b + std::copysign(root, half_b));
    double t1, t2;
    if (q == 0.0) {
        t1 = t2 = 0.0;
    } else {
        t1 = q / a;
        t2 = c / q;
    }
    if (t1 > t2) std::swap(t1, t2);
    return std::make_pair(t1, t2);
}

inline QueryLine build_query_line(const Vec& z_star, const Vec& w, double b, const Hypersphere& sphere,
                                  double resolution = 0.25) {
    if (!(resolution > 0.0)) throw Error("resolution must be positive");
    require_same_dim(z_star, sphere.center);
    QueryLine line;
    line.base = project_onto_boundary(z_star, w, b);
    line.query = z_star;
    line.direction = z_star - line.base;
    line.resolution = resolution;
    if (!(line.direction.squaredNorm() > 0.0)) throw Error("degenerate query");
    const auto roots = clip_to_sphere(line.base, line.direction, sphere);
    if (!roots) throw Error("query outside domain");
    line.t_lo = roots->first;
    line.t_hi = roots->second;
    return line;
}

inline QueryLine build_query_line(const Vec& z_star, const LinearBoundary& boundary, const Hypersphere& sphere,
                                  double resolution = 0.25) {
    return build_query_line(z_star, boundary.w, boundary.b, sphere, resolution);
}

/// Number of samples a line yields at its resolution. The t_lo endpoint is
/// always a sample; a trailing partial step is dropped.
inline std::size_t sample_count(const QueryLine& line) {
    const double steps = line.length() / line.resolution;
    double whole = std::floor(steps);
    // absorb rounding noise when the length is an exact multiple
    if (steps - whole > 1.0 - 1e-10 * std::max(1.0, steps)) whole += 1.0;
    return static_cast<std::size_t>(whole) + 1;
}

inline double sample_step(const QueryLine& line) { return line.resolution / line.direction.norm(); }

inline double sample_t(const QueryLine& line, std::size_t index) {
    return std::min(line.t_lo + static_cast<double>(index) * sample_step(line), line.t_hi);
}

inline std::vector<LineSample> sample_line(const QueryLine& line) {
    const std::size_t count = sample_count(line);
    std::vector<LineSample> samples;
    samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = sample_t(line, i);
        samples.push_back({t, line.at(t), i});
    }
    return samples;
}

/// Parameter where the line crosses w.z + b = 0, if that lies in [t_lo, t_hi].
inline std::optional<double> intersect_line_hyperplane(const QueryLine& line, const Vec& w, double b) {
    require_same_dim(line.base, w);
    const double denom = w.dot(line.direction);
    if (denom == 0.0) return std::nullopt;
    const double t = -(w.dot(line.base) + b) / denom;
    if (!(t >= line.t_lo && t <= line.t_hi)) return std::nullopt;
    return t;
}

}  // namespace bal
