#pragma once

#include <algorithm>
#include <cmath>

namespace textlens {

// Numerically stable logistic function.
inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// ln(p / (1 - p)), inverse of sigmoid on (0, 1).
inline double logit(double p) {
    return std::log(p) - std::log1p(-p);
}

inline double clamp_proba(double p, double eps) {
    return std::clamp(p, eps, 1.0 - eps);
}

}  // namespace textlens
