#pragma once

// Oracles answer a line query with the point where the class changes along
// the line (or "no change") plus the label of the query sample.

#include "bal/common.hpp"
#include "bal/geometry.hpp"
#include "bal/model.hpp"
#include "bal/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

namespace bal {

enum class OracleKind { svm, noisy, human };

inline std::string oracle_name(OracleKind k) {
    switch (k) {
        case OracleKind::svm: return "svm";
        case OracleKind::noisy: return "noisy";
        case OracleKind::human: return "human";
    }
    return "?";
}

inline OracleKind parse_oracle(const std::string& s) {
    if (s == "svm") return OracleKind::svm;
    if (s == "noisy") return OracleKind::noisy;
    if (s == "human") return OracleKind::human;
    throw ConfigError("unknown oracle '" + s + "'");
}

struct AnnotationRecord {
    std::uint64_t line_id = 0;
    /// Empty when the oracle saw no class change on the line.
    std::optional<Vec> boundary_point;
    /// Line parameter of boundary_point.
    std::optional<double> t;
    Label query_label = 1;
    OracleKind source = OracleKind::svm;
    double sigma = 0.0;
    /// Grid steps added by the noise model.
    long noise_offset = 0;

    bool no_change() const { return !boundary_point.has_value(); }
};

/// Index of the grid sample closest to parameter t.
inline std::size_t nearest_sample(const QueryLine& line, double t) {
    const std::size_t count = sample_count(line);
    const double pos = std::round((t - line.t_lo) / sample_step(line));
    if (!(pos > 0.0)) return 0;
    return std::min(static_cast<std::size_t>(pos), count - 1);
}

namespace detail {

inline AnnotationRecord snapped(const QueryLine& line, std::optional<double> t_true, Label label, long offset,
                                OracleKind source, double sigma) {
    AnnotationRecord rec;
    rec.query_label = label;
    rec.source = source;
    rec.sigma = sigma;
    if (!t_true) return rec;
    const long count = static_cast<long>(sample_count(line));
    const long k = std::clamp(static_cast<long>(nearest_sample(line, *t_true)) + offset, 0L, count - 1);
    const double t = sample_t(line, static_cast<std::size_t>(k));
    rec.t = t;
    rec.boundary_point = line.at(t);
    rec.noise_offset = offset;
    return rec;
}

}  // namespace detail

/// Perfect oracle: the crossing of the oracle plane, snapped to the sample grid.
inline AnnotationRecord svm_oracle_annotate(const QueryLine& line, const LinearBoundary& oracle) {
    const auto t = intersect_line_hyperplane(line, oracle.w, oracle.b);
    return detail::snapped(line, t, predict(oracle, line.query), 0, OracleKind::svm, 0.0);
}

/// Perfect oracle displaced by round(N(0, sigma^2)) grid steps, clamped to
/// the line. No draw is made when sigma is 0 or the line has no crossing.
inline AnnotationRecord noisy_oracle_annotate(const QueryLine& line, const LinearBoundary& oracle, double sigma,
                                              Xoshiro256& rng) {
    if (!(sigma >= 0.0)) throw Error("sigma must be non-negative");
    const auto t = intersect_line_hyperplane(line, oracle.w, oracle.b);
    long offset = 0;
    if (t && sigma > 0.0) offset = std::lround(sigma * rng.gaussian());
    auto rec = detail::snapped(line, t, predict(oracle, line.query), offset, OracleKind::noisy, sigma);
    if (t) {
        // report the offset actually applied after clamping
        const long k0 = static_cast<long>(nearest_sample(line, *t));
        const long k = static_cast<long>(nearest_sample(line, *rec.t));
        rec.noise_offset = k - k0;
    }
    return rec;
}

/// Human response: `first_new` is the first sample showing the new class; the
/// stored point sits halfway (in t) between it and its predecessor.
inline AnnotationRecord human_oracle_annotate(const QueryLine& line, std::optional<std::size_t> first_new,
                                              Label label) {
    if (!is_label(label)) throw Error("label must be -1 or +1");
    AnnotationRecord rec;
    rec.query_label = label;
    rec.source = OracleKind::human;
    if (!first_new) return rec;
    const std::size_t count = sample_count(line);
    if (*first_new >= count) throw Error("sample index out of range");
    const double t = *first_new == 0 ? sample_t(line, 0)
                                     : 0.5 * (sample_t(line, *first_new - 1) + sample_t(line, *first_new));
    rec.t = t;
    rec.boundary_point = line.at(t);
    return rec;
}

}  // namespace bal
