#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace po2nc {

// Dense real vector used for iterates, displacements and gradient estimates.
using ParamVector = std::vector<double>;

inline ParamVector zeros(std::size_t dim) { return ParamVector(dim, 0.0); }

inline void check_same_dim(const ParamVector& a, const ParamVector& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("dimension mismatch: " + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()));
}

inline double dot(const ParamVector& a, const ParamVector& b) {
    check_same_dim(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_sq(const ParamVector& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return s;
}

inline double norm(const ParamVector& a) { return std::sqrt(norm_sq(a)); }

// y += alpha * x
inline void axpy(double alpha, const ParamVector& x, ParamVector& y) {
    check_same_dim(x, y);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(ParamVector& x, double alpha) {
    for (double& v : x) v *= alpha;
}

inline ParamVector scaled(const ParamVector& x, double alpha) {
    ParamVector y = x;
    scale(y, alpha);
    return y;
}

inline ParamVector add(const ParamVector& a, const ParamVector& b) {
    ParamVector c = a;
    axpy(1.0, b, c);
    return c;
}

inline ParamVector sub(const ParamVector& a, const ParamVector& b) {
    ParamVector c = a;
    axpy(-1.0, b, c);
    return c;
}

inline double dist(const ParamVector& a, const ParamVector& b) {
    check_same_dim(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double di = a[i] - b[i];
        s += di * di;
    }
    return std::sqrt(s);
}

}  // namespace po2nc
