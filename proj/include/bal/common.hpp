#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace bal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Binary class label, always -1 or +1.
using Label = int;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or invalid input data (CLI exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

inline bool is_label(long v) { return v == -1 || v == 1; }

inline bool all_finite(const Vec& v) { return v.allFinite(); }

/// Hyperplane w.z + b = 0. Serves as the current estimate and as the oracle.
struct LinearBoundary {
    Vec w;
    double b = 0.0;

    static LinearBoundary zero(Eigen::Index dim) { return {Vec::Zero(dim), 0.0}; }
    Eigen::Index dim() const { return w.size(); }

    friend bool operator==(const LinearBoundary& x, const LinearBoundary& y) {
        return x.b == y.b && x.w.size() == y.w.size() && x.w == y.w;
    }
};

inline void require_same_dim(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw Error("dimension mismatch");
}

}  // namespace bal
