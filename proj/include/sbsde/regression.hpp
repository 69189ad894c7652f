#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "sbsde/forward.hpp"

namespace sbsde {

/* Cross-sectional least squares for conditional expectations: polynomial
   features of the node state (x, xi) up to the given total degree, optional
   ridge. Feature order is fixed (degree block by degree block, x-power
   descending): 1; x, u; x^2, xu, u^2; ... Changing it would silently change
   every regression output, so treat it as part of the contract. */
struct RegressionBasis {
    int degree = 3;
    double ridge = 1e-8;
};

std::size_t feature_count(int degree);

/* Features + factorization prepared once per node and reused for any number
   of target vectors (the expensive part depends only on the state, not the
   targets). ridge > 0 solves (F'F + ridge I) w = F'y by LDLT; ridge = 0 uses
   column-pivoted QR and refuses rank-deficient designs. */
class NodeRegression {
public:
    NodeRegression() = default;
    NodeRegression(const Eigen::VectorXd& x, double xi_value, const RegressionBasis& basis);

    Eigen::VectorXd coefficients(const Eigen::VectorXd& targets) const;
    Eigen::VectorXd fitted(const Eigen::VectorXd& targets) const;

    double condition() const noexcept { return condition_; }
    std::size_t n_features() const noexcept { return static_cast<std::size_t>(features_.cols()); }

private:
    Eigen::MatrixXd features_; // paths x k
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
    double ridge_ = 0.0;
    double condition_ = 0.0;
};

struct FitDiagnostics {
    double condition = 0.0;
    std::size_t n_features = 0;
};

/* Fitted cross-sectional E[targets | x, xi] at one node. */
Eigen::VectorXd estimate_conditional_expectation(const Eigen::VectorXd& targets,
                                                 const Eigen::VectorXd& x, double xi_value,
                                                 const RegressionBasis& basis,
                                                 FitDiagnostics* diagnostics = nullptr);

} // namespace sbsde
