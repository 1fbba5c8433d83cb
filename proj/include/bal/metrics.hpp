#pragma once

// Learning-curve metrics and the statistics used to compare runs.

#include "bal/common.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace bal {

/// Area under the accuracy curve by the trapezoidal rule, one unit per query.
inline double aulc(std::span<const double> accuracies) {
    if (accuracies.size() < 2) throw Error("learning curve needs at least two points");
    double area = 0.0;
    for (std::size_t i = 1; i < accuracies.size(); ++i) area += 0.5 * (accuracies[i - 1] + accuracies[i]);
    return area;
}

/// Mean of precision@rank over the positives, ranking by descending score.
/// Equal scores keep input order.
inline double average_precision(std::span<const double> scores, std::span<const Label> labels) {
    if (scores.size() != labels.size()) throw Error("scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (labels[order[rank]] > 0) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    if (hits == 0) throw Error("average precision needs at least one positive");
    return sum / static_cast<double>(hits);
}

inline double accuracy(std::span<const double> scores, std::span<const Label> labels) {
    if (scores.size() != labels.size() || scores.empty()) throw Error("scores and labels differ in length");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) correct += ((scores[i] >= 0.0 ? 1 : -1) == labels[i]);
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
inline double stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Two-sided paired t-test. With zero variance of the differences the
/// p-value is 1 when the mean difference is 0 and 0 otherwise.
inline double paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw Error("paired t-test needs two equal-length samples of size >= 2");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    const double m = mean(diff);
    const double sd = stddev(diff);
    if (!(sd > 0.0)) return m == 0.0 ? 1.0 : 0.0;
    const double n = static_cast<double>(diff.size());
    const double t = m / (sd / std::sqrt(n));
    const boost::math::students_t dist(n - 1.0);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

/// Spearman rank correlation; 0 when either side is constant.
inline double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("spearman needs two equal-length samples of size >= 2");
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double mx = mean(rx), my = mean(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace bal
