#include "sbsde/regression.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sbsde/errors.hpp"
#include "sbsde/threading.hpp"

namespace sbsde {

std::size_t feature_count(int degree) {
    if (degree < 0) throw std::invalid_argument("feature_count: degree must be >= 0");
    const std::size_t d = static_cast<std::size_t>(degree);
    return (d + 1) * (d + 2) / 2; // bivariate monomials of total degree <= d
}

namespace {

/* Monomials x^a u^b with a + b <= degree, degree block by degree block,
   x-power descending inside a block: 1; x, u; x^2, xu, u^2; ... */
void fill_feature_row(double x, double u, int degree, double* out) {
    std::size_t k = 0;
    for (int g = 0; g <= degree; ++g) {
        for (int a = g; a >= 0; --a) {
            const int b = g - a;
            double v = 1.0;
            for (int i = 0; i < a; ++i) v *= x;
            for (int i = 0; i < b; ++i) v *= u;
            out[k++] = v;
        }
    }
}

} // namespace

NodeRegression::NodeRegression(const Eigen::VectorXd& x, double xi_value,
                               const RegressionBasis& basis)
    : ridge_(basis.ridge) {
    if (basis.ridge < 0.0 || !std::isfinite(basis.ridge))
        throw std::invalid_argument("NodeRegression: ridge must be >= 0 and finite");
    const std::size_t n = static_cast<std::size_t>(x.size());
    const std::size_t k = feature_count(basis.degree);
    if (n <= k)
        throw UnsupportedInput("NodeRegression: need more paths than features (" +
                               std::to_string(n) + " paths, " + std::to_string(k) +
                               " features)");

    features_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    parallel_for_blocks(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> row(k);
        for (std::size_t p = begin; p < end; ++p) {
            fill_feature_row(x[static_cast<Eigen::Index>(p)], xi_value, basis.degree, row.data());
            for (std::size_t j = 0; j < k; ++j)
                features_(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = row[j];
        }
    });

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                                 static_cast<Eigen::Index>(k));
    gram.selfadjointView<Eigen::Lower>().rankUpdate(features_.transpose());
    gram = gram.selfadjointView<Eigen::Lower>();

    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram,
                                                           Eigen::EigenvaluesOnly);
        const double lo = std::max(eig.eigenvalues().minCoeff(), 0.0);
        const double hi = std::max(eig.eigenvalues().maxCoeff(), 0.0);
        condition_ = lo > 0.0 ? std::sqrt(hi / lo) : std::numeric_limits<double>::infinity();
    }

    if (ridge_ > 0.0) {
        gram.diagonal().array() += ridge_;
        ldlt_.compute(gram);
        if (ldlt_.info() != Eigen::Success)
            throw std::runtime_error("NodeRegression: LDLT factorization failed");
    } else {
        qr_.compute(features_);
        if (qr_.rank() < static_cast<Eigen::Index>(k))
            throw UnsupportedInput(
                "NodeRegression: rank-deficient design matrix with zero ridge; collinear "
                "features (a constant state, say) need ridge > 0");
    }
}

Eigen::VectorXd NodeRegression::coefficients(const Eigen::VectorXd& targets) const {
    if (targets.size() != features_.rows())
        throw std::invalid_argument("NodeRegression: target size does not match path count");
    if (ridge_ > 0.0) return ldlt_.solve(features_.transpose() * targets);
    return qr_.solve(targets);
}

Eigen::VectorXd NodeRegression::fitted(const Eigen::VectorXd& targets) const {
    return features_ * coefficients(targets);
}

Eigen::VectorXd estimate_conditional_expectation(const Eigen::VectorXd& targets,
                                                 const Eigen::VectorXd& x, double xi_value,
                                                 const RegressionBasis& basis,
                                                 FitDiagnostics* diagnostics) {
    if (targets.size() != x.size())
        throw std::invalid_argument(
            "estimate_conditional_expectation: targets and state differ in size");
    const NodeRegression reg(x, xi_value, basis);
    if (diagnostics) {
        diagnostics->condition = reg.condition();
        diagnostics->n_features = reg.n_features();
    }
    return reg.fitted(targets);
}

} // namespace sbsde
