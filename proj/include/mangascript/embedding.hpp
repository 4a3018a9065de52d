#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mangascript/error.hpp"

namespace mangascript {

using Embedding = std::vector<double>;

inline double squared_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("embedding dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

// Unit-norm copy. Vectors already within 1e-12 of unit norm are returned
// unchanged so that normalization is idempotent bit-for-bit.
inline Embedding normalized(std::span<const double> v) {
    const double n = norm(v);
    if (!(n > 0.0) || !std::isfinite(n)) throw Error("cannot normalize zero or non-finite embedding");
    Embedding out(v.begin(), v.end());
    if (std::abs(n - 1.0) <= 1e-12) return out;
    for (double& x : out) x /= n;
    return out;
}

}  // namespace mangascript
