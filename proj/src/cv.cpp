#include "staplr/cv.hpp"

#include "staplr/error.hpp"
#include "staplr/rng.hpp"

#include <algorithm>
#include <cmath>

namespace staplr {

namespace {

constexpr double kProbClip = 1e-15;
constexpr double kTieTolerance = 1e-10;

Labels training_labels(const Labels& y, const FoldPartition& folds, int k) {
    const auto rows = folds.complement(k);
    Labels out = select_rows(y, rows);
    const Index ones = out.sum();
    if (ones == 0 || ones == out.size())
        throw DegenerateFold("fold " + std::to_string(k + 1) +
                             ": training rows contain a single class");
    return out;
}

void check_folds(const Matrix& X, const Labels& y, const FoldPartition& folds) {
    if (X.rows() != y.size()) throw InvalidArgument("X and y row counts differ");
    if (folds.n() != y.size())
        throw InvalidArgument("fold partition covers " + std::to_string(folds.n()) +
                              " rows, data has " + std::to_string(y.size()));
    require_binary(y);
}

// Shared driver for the logistic and group penalties.
template <class PathFit>
CvResult cross_validate(const Matrix& X, const Labels& y, const FoldPartition& folds,
                        LambdaPath path, PathFit&& fit_path) {
    CvResult result;
    result.path = std::move(path);
    const std::size_t L = result.path.size();
    std::vector<double> total(L, 0.0);
    for (int k = 0; k < folds.K(); ++k) {
        const auto train = folds.complement(k);
        const auto test = folds.members(k);
        const Labels y_train = training_labels(y, folds, k);
        const Matrix X_train = select_rows(X, train);
        const Matrix X_test = select_rows(X, test);
        const Labels y_test = select_rows(y, test);
        const auto models = fit_path(X_train, y_train, result.path);
        const double weight = static_cast<double>(test.size());
        for (std::size_t l = 0; l < L; ++l)
            total[l] += weight * binomial_deviance(predict_proba(models[l], X_test), y_test);
    }
    result.mean_deviance.resize(L);
    for (std::size_t l = 0; l < L; ++l)
        result.mean_deviance[l] = total[l] / static_cast<double>(y.size());
    // Deviances within a relative kTieTolerance count as tied; the first
    // (largest) lambda among ties wins.
    std::size_t best = 0;
    for (std::size_t l = 1; l < L; ++l) {
        const double margin = kTieTolerance * std::abs(result.mean_deviance[best]);
        if (result.mean_deviance[l] < result.mean_deviance[best] - margin) best = l;
    }
    result.selected_index = best;
    result.selected_lambda = result.path.values[best];
    return result;
}

LambdaPath truncated(const LambdaPath& path, std::size_t last) {
    LambdaPath out = path;
    out.values.resize(last + 1);
    return out;
}

}  // namespace

double binomial_deviance(const Vector& p, const Labels& y) {
    if (p.size() != y.size())
        throw InvalidArgument("deviance: " + std::to_string(p.size()) + " probabilities for " +
                              std::to_string(y.size()) + " labels");
    if (y.size() == 0) throw InvalidArgument("deviance of an empty sample");
    double s = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        const double pi = std::clamp(p[i], kProbClip, 1.0 - kProbClip);
        s += y[i] == 1 ? std::log(pi) : std::log1p(-pi);
    }
    return -2.0 * s / static_cast<double>(y.size());
}

CvResult cv_select_lambda(const Matrix& X, const Labels& y, const PenaltySpec& penalty,
                          const FoldPartition& folds, int n_lambda, double epsilon,
                          const SolverSettings& settings, bool standardize) {
    check_folds(X, y, folds);
    require_both_classes(y);
    LambdaPath path;
    if (X.cols() == 0) {
        path = log_spaced_path(1.0, 1, 0.5);
    } else if (standardize) {
        path = lambda_path(standardize_columns(X, ConstantColumns::passthrough).values, y, penalty,
                           n_lambda, epsilon);
    } else {
        path = lambda_path(X, y, penalty, n_lambda, epsilon);
    }
    return cross_validate(X, y, folds, std::move(path),
                          [&](const Matrix& Xt, const Labels& yt, const LambdaPath& p) {
                              return fit_logistic_path(Xt, yt, penalty, p, settings, standardize);
                          });
}

CvResult cv_select_group_lambda(const Matrix& X, const Labels& y, const GroupStructure& groups,
                                const FoldPartition& folds, int n_lambda, double epsilon,
                                const SolverSettings& settings, bool standardize) {
    check_folds(X, y, folds);
    require_both_classes(y);
    LambdaPath path =
        standardize
            ? group_lambda_path(standardize_columns(X, ConstantColumns::passthrough).values, y,
                                groups, n_lambda, epsilon)
            : group_lambda_path(X, y, groups, n_lambda, epsilon);
    return cross_validate(X, y, folds, std::move(path),
                          [&](const Matrix& Xt, const Labels& yt, const LambdaPath& p) {
                              return fit_group_lasso_path(Xt, yt, groups, p, settings, standardize);
                          });
}

PenaltySpec LearnerSpec::penalty(double lambda) const {
    switch (family) {
        case PenaltyFamily::lasso: return PenaltySpec::lasso(lambda, nonnegative);
        case PenaltyFamily::ridge: return PenaltySpec::ridge(lambda, nonnegative);
        case PenaltyFamily::elastic_net: return PenaltySpec::elastic_net(alpha, lambda, nonnegative);
        case PenaltyFamily::group_lasso: break;
    }
    throw InvalidArgument("learners use the lasso, ridge or elastic net family");
}

void LearnerSpec::validate() const {
    if (family == PenaltyFamily::group_lasso)
        throw InvalidArgument("learners use the lasso, ridge or elastic net family");
    if (family == PenaltyFamily::elastic_net && !(alpha > 0 && alpha < 1))
        throw InvalidArgument("elastic net alpha must lie in (0, 1)");
    if (n_lambda < 1) throw InvalidArgument("n_lambda must be positive");
    if (K < 2) throw InvalidArgument("tuning fold count must be at least 2");
    if (fixed_lambda && !(*fixed_lambda >= 0)) throw InvalidArgument("fixed lambda must be >= 0");
    solver.validate();
}

LearnerSpec LearnerSpec::ridge_base() {
    LearnerSpec spec;
    spec.family = PenaltyFamily::ridge;
    spec.standardize = true;
    return spec;
}

LearnerSpec LearnerSpec::lasso_meta(bool nonnegative) {
    LearnerSpec spec;
    spec.family = PenaltyFamily::lasso;
    spec.nonnegative = nonnegative;
    spec.standardize = false;
    spec.nested_tuning = false;
    return spec;
}

TrainedLearner train_learner(const Matrix& X, const Labels& y, const LearnerSpec& spec,
                             std::uint64_t tuning_seed) {
    spec.validate();
    require_binary(y);
    TrainedLearner out;
    if (spec.link == Link::identity) {
        if (spec.intercept_only) {
            out.model = fit_least_squares(Matrix(X.rows(), 0), y.cast<double>(), false);
            out.model.coefficients = Vector::Zero(X.cols());
        } else {
            out.model = fit_least_squares(X, y.cast<double>(), spec.nonnegative);
        }
        return out;
    }
    require_both_classes(y);
    if (spec.intercept_only) {
        out.model = fit_intercept_only(y, X.cols());
        return out;
    }
    if (spec.fixed_lambda) {
        FitOptions options;
        options.standardize = spec.standardize;
        out.model = fit_logistic(X, y, spec.penalty(*spec.fixed_lambda), spec.solver, options);
        return out;
    }
    const Index n = X.rows();
    const int K = static_cast<int>(std::min<Index>(spec.K, n));
    std::vector<int> labels(y.data(), y.data() + y.size());
    const FoldPartition folds =
        spec.stratify_tuning
            ? make_folds(n, K, tuning_seed, std::span<const int>(labels))
            : make_folds(n, K, tuning_seed);
    CvResult cv = cv_select_lambda(X, y, spec.penalty(0.0), folds, spec.n_lambda, spec.epsilon,
                                   spec.solver, spec.standardize);
    auto models = fit_logistic_path(X, y, spec.penalty(0.0), truncated(cv.path, cv.selected_index),
                                    spec.solver, spec.standardize);
    out.model = std::move(models.back());
    out.tuning = std::move(cv);
    return out;
}

TrainedLearner train_group_lasso(const Matrix& X, const Labels& y, const GroupStructure& groups,
                                 int K, std::uint64_t tuning_seed, int n_lambda, double epsilon,
                                 const SolverSettings& settings, bool standardize) {
    require_binary(y);
    require_both_classes(y);
    if (K < 2) throw InvalidArgument("tuning fold count must be at least 2");
    const FoldPartition folds =
        make_folds(X.rows(), static_cast<int>(std::min<Index>(K, X.rows())), tuning_seed);
    CvResult cv = cv_select_group_lambda(X, y, groups, folds, n_lambda, epsilon, settings,
                                         standardize);
    auto models = fit_group_lasso_path(X, y, groups, truncated(cv.path, cv.selected_index),
                                       settings, standardize);
    TrainedLearner out;
    out.model = std::move(models.back());
    out.tuning = std::move(cv);
    return out;
}

Vector learner_predict(const FittedLinearModel& model, const Matrix& X, Link link) {
    if (link == Link::identity) return model.linear_predictor(X);
    return predict_proba(model, X);
}

Vector cv_predictor(const Matrix& X, const Labels& y, const LearnerSpec& spec,
                    const FoldPartition& folds, std::uint64_t tuning_seed) {
    check_folds(X, y, folds);
    spec.validate();
    LearnerSpec fold_spec = spec;
    if (!spec.nested_tuning && !spec.fixed_lambda && !spec.intercept_only &&
        spec.link == Link::logistic) {
        fold_spec.fixed_lambda = train_learner(X, y, spec, tuning_seed).model.penalty.lambda;
    }
    Vector z(y.size());
    for (int k = 0; k < folds.K(); ++k) {
        const auto train = folds.complement(k);
        const auto test = folds.members(k);
        const Labels y_train = spec.link == Link::logistic ? training_labels(y, folds, k)
                                                           : select_rows(y, train);
        TrainedLearner learner;
        try {
            learner = train_learner(select_rows(X, train), y_train, fold_spec,
                                    derive_seed(tuning_seed, {static_cast<std::uint64_t>(k)}));
        } catch (const DegenerateFold& e) {
            throw DegenerateFold("fold " + std::to_string(k + 1) + " (inner tuning): " + e.what());
        }
        const Vector zk = learner_predict(learner.model, select_rows(X, test), spec.link);
        for (std::size_t r = 0; r < test.size(); ++r) z[test[r]] = zk[static_cast<Index>(r)];
    }
    return z;
}

}  // namespace staplr
