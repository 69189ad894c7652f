#pragma once

#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

namespace sbsde {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0; // standard error of the mean; 0 for a single sample
};

inline MeanSe mean_and_se(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const std::size_t n = static_cast<std::size_t>(v.size());
    if (n == 0) return {};
    MeanSe out;
    out.mean = v.mean();
    if (n > 1) {
        const double ss = (v.array() - out.mean).square().sum();
        out.se = std::sqrt(ss / (static_cast<double>(n) * static_cast<double>(n - 1)));
    }
    return out;
}

} // namespace sbsde
