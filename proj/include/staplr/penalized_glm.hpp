#pragma once

#include "staplr/core.hpp"

#include <vector>

namespace staplr {

struct SolverSettings {
    /// Convergence threshold on max_j (weighted squared coefficient change); the
    /// KKT residual at a converged fit is at most 10x this value.
    double coef_tolerance = 1e-7;
    int max_outer_iterations = 100;
    /// Total coordinate sweeps allowed across one fit.
    long max_inner_iterations = 100000;
    double weight_floor = 1e-5;

    void validate() const;
};

/// Decreasing, log-equispaced grid of penalty strengths.
struct LambdaPath {
    std::vector<double> values;
    double lambda_max = 0.0;
    double epsilon = 0.0;

    std::size_t size() const { return values.size(); }
};

/// sign(z) * max(|z| - gamma, 0).
double soft_threshold(double z, double gamma);
/// Soft-thresholding followed by clamping negative results to zero.
double coordinate_update_nonneg(double z, double gamma);

/// 1e-4 when n > m, 1e-2 otherwise.
double default_path_epsilon(Index n, Index m);

/// max_j |x_j^T (y - ybar)| / n, the smallest lasso penalty with an all-zero fit.
double lasso_lambda_max(const Matrix& X, const Labels& y);

LambdaPath log_spaced_path(double lambda_max, int n_lambda, double epsilon);

/// Path for the lasso, elastic net or ridge family.  The ridge path starts at
/// 1000x the lasso lambda_max since ridge never produces an exactly zero fit.
LambdaPath lambda_path(const Matrix& X, const Labels& y, const PenaltySpec& penalty,
                       int n_lambda = 100, double epsilon = -1.0);

/// Optional per-fit diagnostics.
struct FitTrace {
    /// Penalized objective (to be maximized) after every outer iteration,
    /// starting with the value at the initial point.
    std::vector<double> objective;
};

struct FitOptions {
    /// Standardize columns internally and store the parameters in the model.
    bool standardize = true;
    FitTrace* trace = nullptr;
};

/// Maximizes (1/n) sum_i [y_i eta_i - log(1 + exp(eta_i))] - penalty(beta) with an
/// unpenalized intercept, using IRLS with coordinate-wise inner updates.
FittedLinearModel fit_logistic(const Matrix& X, const Labels& y, const PenaltySpec& penalty,
                               const SolverSettings& settings = {},
                               const FitOptions& options = {});

/// Fits every value of the path in order, warm-starting each from the previous.
std::vector<FittedLinearModel> fit_logistic_path(const Matrix& X, const Labels& y,
                                                 const PenaltySpec& penalty,
                                                 const LambdaPath& path,
                                                 const SolverSettings& settings = {},
                                                 bool standardize = true);

/// Intercept-only maximum likelihood fit: intercept logit(ybar), no features used.
FittedLinearModel fit_intercept_only(const Labels& y, Index n_features);

/// Ordinary least squares with an unconstrained intercept, optionally with all
/// slopes constrained to be nonnegative.  Used by the identity-link combiner.
FittedLinearModel fit_least_squares(const Matrix& X, const Vector& y, bool nonnegative);

Vector predict_proba(const FittedLinearModel& model, const Matrix& X);

/// Penalized objective value at (intercept, beta) on X as given.
double logistic_objective(const Matrix& X, const Labels& y, double intercept,
                          const Vector& beta, const PenaltySpec& penalty);

/// Largest violation of the stationarity conditions at (intercept, beta) on X as
/// given, including the intercept's score.
double logistic_kkt_residual(const Matrix& X, const Labels& y, double intercept,
                             const Vector& beta, const PenaltySpec& penalty);

}  // namespace staplr
