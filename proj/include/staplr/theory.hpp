#pragma once

#include "staplr/core.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace staplr::theory {

// All variances and covariances here use the (n - 1) divisor.

double sample_mean(const Vector& x);
double sample_variance(const Vector& x);
double sample_covariance(const Vector& a, const Vector& b);
/// Throws UndefinedCorrelation when either vector is constant.
double pearson(const Vector& a, const Vector& b);

/// Cross-validated predictor of the intercept-only linear model:
/// z_i = mean of y over rows outside the fold containing i.
Vector intercept_cv_predictor(const Vector& y, const FoldPartition& folds);

struct CorrelationReport {
    double closed_form_rho = 0.0;
    double empirical_rho = 0.0;
    int K = 0;
    bool equal_folds = false;
};

/// Closed-form correlation between y and its intercept-only cross-validated
/// predictor, -sum_k (sum_{j in S_k} (y_j - ybar))^2 / (n - |S_k|) / ((n-1) sd(y) sd(z)),
/// next to the directly computed Pearson correlation.
CorrelationReport lemma1_rho(const Vector& y, const FoldPartition& folds);

/// -(K - 1) sd(z) / sd(y), valid when all folds have size n / K.
double equal_fold_rho(const Vector& y, const Vector& z, int K);

struct TwoPredictorFit {
    double intercept = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
};

/// Closed-form least squares of y on (1, z1, z2) written with empirical
/// variances and covariances.  Throws Collinearity when |rho(z1, z2)| = 1.
TwoPredictorFit ols_two_predictor(const Vector& y, const Vector& z1, const Vector& z2);

/// (variance of the leave-one-out intercept predictor, var(y) / (n - 1)^2).
std::pair<double, double> loo_variance_identity(const Vector& y);

struct LemmaCheck {
    std::string name;
    int trials = 0;
    int passed = 0;
    double max_error = 0.0;
    double tolerance = 0.0;

    bool ok() const { return trials > 0 && passed == trials; }
};

/// Randomized checks of the correlation identities, the leave-one-out variance
/// identity and the two-predictor degeneracy over `trials` draws.
std::vector<LemmaCheck> run_lemma_checks(int trials, std::uint64_t seed);

}  // namespace staplr::theory
