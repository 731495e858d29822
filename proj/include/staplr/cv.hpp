#pragma once

#include "staplr/core.hpp"
#include "staplr/group_lasso.hpp"
#include "staplr/penalized_glm.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace staplr {

/// -(2/n) sum_i [y_i log p_i + (1 - y_i) log(1 - p_i)], with p clipped to
/// [1e-15, 1 - 1e-15].
double binomial_deviance(const Vector& p, const Labels& y);

struct CvResult {
    LambdaPath path;
    /// Held-out deviance per lambda, averaged over all held-out rows.
    std::vector<double> mean_deviance;
    std::size_t selected_index = 0;
    double selected_lambda = 0.0;
};

enum class Link { logistic, identity };

/// Configuration of one learner: penalty, tuning and preprocessing.
struct LearnerSpec {
    PenaltyFamily family = PenaltyFamily::ridge;
    double alpha = 0.5;  // elastic net only
    bool nonnegative = false;
    int n_lambda = 100;
    int K = 10;
    double epsilon = -1.0;  // <= 0 selects the n/m dependent default
    bool standardize = true;
    /// Re-select lambda inside every outer fold when producing cross-validated
    /// predictions; otherwise reuse the lambda selected on all rows.
    bool nested_tuning = true;
    bool stratify_tuning = false;
    /// Forces the intercept-only model (no features used).
    bool intercept_only = false;
    /// Skips tuning and fits this lambda directly.
    std::optional<double> fixed_lambda;
    /// identity: unpenalized least squares (optionally nonnegative); logistic otherwise.
    Link link = Link::logistic;
    SolverSettings solver;

    PenaltySpec penalty(double lambda) const;
    void validate() const;

    /// Ridge, standardized inputs: the per-view learner.
    static LearnerSpec ridge_base();
    /// Lasso on unstandardized cross-validated predictions: the combiner.
    static LearnerSpec lasso_meta(bool nonnegative);
};

/// Builds the path on all rows, fits it on each fold's training rows, and
/// selects the lambda with the lowest mean held-out deviance.  Deviances within
/// a relative 1e-10 of each other are ties, which go to the larger lambda.
CvResult cv_select_lambda(const Matrix& X, const Labels& y, const PenaltySpec& penalty,
                          const FoldPartition& folds, int n_lambda = 100, double epsilon = -1.0,
                          const SolverSettings& settings = {}, bool standardize = true);

CvResult cv_select_group_lambda(const Matrix& X, const Labels& y, const GroupStructure& groups,
                                const FoldPartition& folds, int n_lambda = 100,
                                double epsilon = -1.0, const SolverSettings& settings = {},
                                bool standardize = true);

struct TrainedLearner {
    FittedLinearModel model;
    std::optional<CvResult> tuning;
};

/// Trains a learner on (X, y) including its own lambda selection by K-fold CV
/// over folds drawn from tuning_seed.
TrainedLearner train_learner(const Matrix& X, const Labels& y, const LearnerSpec& spec,
                             std::uint64_t tuning_seed);

/// Group lasso with lambda chosen by K-fold CV over folds drawn from tuning_seed,
/// refit on all rows.
TrainedLearner train_group_lasso(const Matrix& X, const Labels& y, const GroupStructure& groups,
                                 int K, std::uint64_t tuning_seed, int n_lambda = 100,
                                 double epsilon = -1.0, const SolverSettings& settings = {},
                                 bool standardize = true);

/// Probabilities (logistic) or fitted values (identity link) of a trained model.
Vector learner_predict(const FittedLinearModel& model, const Matrix& X, Link link);

/// Out-of-fold predictions: for each fold k the learner is trained on rows
/// outside S_k and its predictions fill the rows of S_k.  With nested tuning,
/// fold k tunes lambda with seed derive_seed(tuning_seed, {k}); otherwise
/// fixed_lambda (or the lambda selected on all rows) is reused.
Vector cv_predictor(const Matrix& X, const Labels& y, const LearnerSpec& spec,
                    const FoldPartition& folds, std::uint64_t tuning_seed);

}  // namespace staplr
