#include "staplr/penalized_glm.hpp"

#include "staplr/error.hpp"

#include <algorithm>
#include <cmath>

namespace staplr {

namespace {

double softplus(double eta) {
    return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

Vector to_real(const Labels& y) { return y.cast<double>(); }

void check_inputs(const Matrix& X, const Labels& y) {
    if (X.rows() != y.size())
        throw InvalidArgument("X has " + std::to_string(X.rows()) + " rows but y has " +
                              std::to_string(y.size()));
    if (y.size() < 2) throw InvalidArgument("at least two observations are required");
    if (!X.allFinite()) throw InvalidArgument("X contains non-finite values");
    require_binary(y);
    require_both_classes(y);
}

double mean_loglik(const Vector& y, const Vector& eta) {
    double s = 0.0;
    for (Index i = 0; i < y.size(); ++i) s += y[i] * eta[i] - softplus(eta[i]);
    return s / static_cast<double>(y.size());
}

double penalty_value(const Vector& beta, const PenaltySpec& penalty) {
    const double a = penalty.l1_share();
    return penalty.lambda * (a * beta.lpNorm<1>() + 0.5 * (1.0 - a) * beta.squaredNorm());
}

// KKT residual given the score vector X^T (y - p) / n.
double kkt_from_score(const Vector& score, double intercept_score, const Vector& beta,
                      const PenaltySpec& penalty) {
    const double l1 = penalty.lambda * penalty.l1_share();
    const double l2 = penalty.lambda * (1.0 - penalty.l1_share());
    double worst = std::abs(intercept_score);
    for (Index j = 0; j < beta.size(); ++j) {
        const double g = score[j] - l2 * beta[j];
        double v;
        if (beta[j] > 0) v = std::abs(g - l1);
        else if (beta[j] < 0) v = std::abs(g + l1);
        else if (penalty.nonnegative) v = std::max(g - l1, 0.0);
        else v = std::max(std::abs(g) - l1, 0.0);
        worst = std::max(worst, v);
    }
    return worst;
}

// Widest design for which ridge fits use dense Newton steps.
constexpr Index kNewtonMaxFeatures = 400;
// Widest active set for which lasso fits try an exact sign-constrained solve.
constexpr Index kActiveSolveMaxFeatures = 64;
// Largest relative weight change for which a cached X^T W X is reused.
constexpr double kGramReuseDrift = 0.05;
// A fit is accepted once its KKT residual is below this multiple of the
// coefficient tolerance; inner sweeps are tightened until then.
constexpr double kKktFactor = 0.1;

// IRLS + coordinate descent state for one design matrix.  Successive calls to
// solve() warm-start from the previous solution.
class LogisticSolver {
public:
    LogisticSolver(const Matrix& X, const Labels& y, const SolverSettings& settings)
        : X_(X), y_(to_real(y)), settings_(settings), n_(static_cast<double>(X.rows())) {
        const double ybar = y_.mean();
        intercept_ = std::log(ybar / (1.0 - ybar));
        beta_ = Vector::Zero(X.cols());
        eta_ = Vector::Constant(X.rows(), intercept_);
    }

    FittedLinearModel solve(const PenaltySpec& penalty, FitTrace* trace);

private:
    double objective(const Vector& eta, const Vector& beta, const PenaltySpec& penalty) const {
        return mean_loglik(y_, eta) - penalty_value(beta, penalty);
    }
    double coordinate_sweep(const std::vector<Index>& coords, double l1, double l2, bool nonneg,
                            Vector& r, const Vector& w, double w_sum, const Vector& xv);
    bool newton_step(double l2, Vector& r, const Vector& w);
    bool active_set_step(std::vector<Index> active, double l1, double l2, Vector& r,
                         const Vector& w);

    const Matrix& X_;
    Vector y_;
    SolverSettings settings_;
    double n_;
    double intercept_;
    Vector beta_;
    Vector eta_;
    Matrix gram_;
    Vector gram_weights_;
};

double LogisticSolver::coordinate_sweep(const std::vector<Index>& coords, double l1, double l2,
                                        bool nonneg, Vector& r, const Vector& w, double w_sum,
                                        const Vector& xv) {
    double max_change = 0.0;
    for (Index j : coords) {
        if (xv[j] <= 0.0) continue;
        const auto xj = X_.col(j);
        const double grad = xj.cwiseProduct(w).dot(r) / n_;
        const double old = beta_[j];
        const double u = grad + xv[j] * old;
        const double denom = xv[j] + l2;
        const double updated =
            nonneg ? coordinate_update_nonneg(u, l1) / denom : soft_threshold(u, l1) / denom;
        const double delta = updated - old;
        if (delta != 0.0) {
            r.noalias() -= delta * xj;
            beta_[j] = updated;
            max_change = std::max(max_change, xv[j] * delta * delta);
        }
    }
    const double d0 = w.dot(r) / (w_sum * n_);
    if (d0 != 0.0) {
        r.array() -= d0;
        intercept_ += d0;
        max_change = std::max(max_change, w_sum * d0 * d0);
    }
    return max_change;
}

// Exact minimizer of the weighted ridge quadratic for the current weights:
// (Xc^T W Xc / n + l2 I) d = X^T W rc / n - l2 beta, with Xc and rc centered by
// their weighted means.  Returns false if the system is not positive definite.
bool LogisticSolver::newton_step(double l2, Vector& r, const Vector& w) {
    const Index m = X_.cols();
    const double sw = w.sum();
    const Vector xbar = X_.transpose() * w / sw;
    const double rbar = w.dot(r) / sw;
    const Vector wr = w.cwiseProduct(r.array().matrix() - Vector::Constant(r.size(), rbar));
    // X^T W X is reused while the weights stay within a small relative distance
    // of those it was built with; the quadratic model is then inexact but the
    // outer convergence test is unchanged.
    bool rebuild = gram_weights_.size() != w.size();
    if (!rebuild) {
        const double drift = ((w - gram_weights_).array().abs() / gram_weights_.array()).maxCoeff();
        rebuild = drift > kGramReuseDrift;
    }
    if (rebuild) {
        const Matrix Xs = X_.array().colwise() * w.array().sqrt();
        gram_ = Matrix::Zero(m, m);
        gram_.selfadjointView<Eigen::Lower>().rankUpdate(Xs.transpose());
        gram_weights_ = w;
    }
    const double sw_gram = gram_weights_.sum();
    const Vector xbar_gram = X_.transpose() * gram_weights_ / sw_gram;
    Matrix H = gram_;
    H.selfadjointView<Eigen::Lower>().rankUpdate(xbar_gram, -sw_gram);
    H /= n_;
    H.diagonal().array() += l2;
    const Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success) return false;
    const Vector rhs = X_.transpose() * wr / n_ - l2 * beta_;
    const Vector d = llt.solve(rhs);
    if (!d.allFinite()) return false;
    const double d0 = rbar - xbar.dot(d);
    beta_ += d;
    intercept_ += d0;
    r.noalias() -= X_ * d;
    r.array() -= d0;
    return true;
}

// Moves toward the minimizer of the weighted quadratic model over the active
// coordinates with their signs held fixed.  If a coefficient would change sign
// the step stops where it reaches zero, that coordinate leaves the active set,
// and the solve is repeated.  Every step lowers the quadratic model.  Returns
// false if no step was taken.
bool LogisticSolver::active_set_step(std::vector<Index> active, double l1, double l2, Vector& r,
                                     const Vector& w) {
    const Index n = X_.rows();
    const double sw = w.sum();
    bool moved = false;
    while (!active.empty()) {
        const Index k = static_cast<Index>(active.size());
        Matrix XA(n, k);
        Vector b(k), s(k);
        for (Index a = 0; a < k; ++a) {
            const Index j = active[static_cast<std::size_t>(a)];
            XA.col(a) = X_.col(j);
            b[a] = beta_[j];
            s[a] = b[a] > 0.0 ? 1.0 : -1.0;
        }
        const Vector xbar = XA.transpose() * w / sw;
        const double rbar = w.dot(r) / sw;
        const Matrix Xc = XA.rowwise() - xbar.transpose();
        Matrix H = Xc.transpose() * (Xc.array().colwise() * w.array()).matrix() / n_;
        H.diagonal().array() += l2;
        const Eigen::LLT<Matrix> llt(H);
        if (llt.info() != Eigen::Success) return moved;
        const Vector rhs =
            Xc.transpose() * (w.array() * (r.array() - rbar)).matrix() / n_ - l2 * b - l1 * s;
        const Vector d = llt.solve(rhs);
        if (!d.allFinite()) return moved;
        double step = 1.0;
        Index blocking = -1;
        for (Index a = 0; a < k; ++a)
            if ((b[a] + d[a]) * s[a] <= 0.0) {
                const double t = -b[a] / d[a];
                if (t < step) {
                    step = t;
                    blocking = a;
                }
            }
        const Vector dd = step * d;
        const double d0 = step * rbar - xbar.dot(dd);
        for (Index a = 0; a < k; ++a) beta_[active[static_cast<std::size_t>(a)]] += dd[a];
        intercept_ += d0;
        r.noalias() -= XA * dd;
        r.array() -= d0;
        moved = true;
        if (blocking < 0) return true;
        beta_[active[static_cast<std::size_t>(blocking)]] = 0.0;
        // The exact zero shifts r by the rounding in the step.
        r.noalias() += XA.col(blocking) * (b[blocking] + dd[blocking]);
        active.erase(active.begin() + blocking);
    }
    return moved;
}

FittedLinearModel LogisticSolver::solve(const PenaltySpec& penalty, FitTrace* trace) {
    const Index n = X_.rows();
    const Index m = X_.cols();
    const double l1 = penalty.lambda * penalty.l1_share();
    const double l2 = penalty.lambda * (1.0 - penalty.l1_share());
    const double tol = settings_.coef_tolerance;
    const double floor = settings_.weight_floor;
    if (penalty.lambda == 0.0 && m > 0 && m >= n)
        throw InvalidArgument("unpenalized fit refused: " + std::to_string(m) +
                              " features with only " + std::to_string(n) + " observations");

    std::vector<Index> all(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j) all[static_cast<std::size_t>(j)] = j;

    FittedLinearModel model;
    model.penalty = penalty;
    model.converged = false;

    double obj = objective(eta_, beta_, penalty);
    if (trace) trace->objective.push_back(obj);

    double inner_tol = tol;
    long sweeps = 0;
    const bool use_newton =
        l1 == 0.0 && !penalty.nonnegative && m > 0 && m <= kNewtonMaxFeatures && m < n;
    Vector w(n), r(n), r0(n), xv(m);
    int outer = 0;
    while (outer < settings_.max_outer_iterations) {
        ++outer;
        bool clipped = false;
        for (Index i = 0; i < n; ++i) {
            const double p = inverse_logit(eta_[i]);
            const double pc = std::clamp(p, floor, 1.0 - floor);
            clipped = clipped || pc != p;
            w[i] = std::max(pc * (1.0 - pc), floor);
            r[i] = (y_[i] - pc) / w[i];
        }
        r0 = r;
        const double w_sum = w.sum() / n_;
        if (m > 0) xv.noalias() = X_.cwiseAbs2().transpose() * w / n_;

        const Vector beta_old = beta_;
        const double intercept_old = intercept_;

        // Full sweeps interleaved with sweeps restricted to the nonzero set.  Ridge
        // fits on moderate widths take exact Newton steps instead.
        bool inner_exhausted = false;
        const bool newton = use_newton && newton_step(l2, r, w);
        while (!newton) {
            const double full = coordinate_sweep(all, l1, l2, penalty.nonnegative, r, w, w_sum, xv);
            ++sweeps;
            if (full < inner_tol) break;
            std::vector<Index> active;
            for (Index j = 0; j < m; ++j)
                if (beta_[j] != 0.0) active.push_back(j);
            const Index n_active = static_cast<Index>(active.size());
            if (l1 > 0.0 && n_active > 0 && n_active <= kActiveSolveMaxFeatures && n_active < n &&
                active_set_step(active, l1, l2, r, w)) {
                if (sweeps >= settings_.max_inner_iterations) {
                    inner_exhausted = true;
                    break;
                }
                continue;
            }
            if (n_active < m) {
                while (sweeps < settings_.max_inner_iterations) {
                    ++sweeps;
                    if (coordinate_sweep(active, l1, l2, penalty.nonnegative, r, w, w_sum, xv) <
                        inner_tol)
                        break;
                }
            }
            if (sweeps >= settings_.max_inner_iterations) {
                inner_exhausted = true;
                break;
            }
        }

        // New linear predictor from the change in the working residual.
        const Vector eta_old = eta_;
        const Vector d_eta = r0 - r;
        eta_ = eta_old + d_eta;
        double obj_new = objective(eta_, beta_, penalty);

        // Step-halving keeps the objective monotone when the quadratic model overshoots.
        const Vector d_beta = beta_ - beta_old;
        const double d_intercept = intercept_ - intercept_old;
        const double slack = 1e-13 * std::max(1.0, std::abs(obj));
        double step = 1.0;
        for (int h = 0; h < 40 && obj_new < obj - slack; ++h) {
            step *= 0.5;
            beta_ = beta_old + step * d_beta;
            intercept_ = intercept_old + step * d_intercept;
            eta_ = eta_old + step * d_eta;
            obj_new = objective(eta_, beta_, penalty);
        }
        if (obj_new < obj - slack) {
            beta_ = beta_old;
            intercept_ = intercept_old;
            eta_ = eta_old;
            obj_new = obj;
        }
        if (trace) trace->objective.push_back(obj_new);

        double change = w_sum * (intercept_ - intercept_old) * (intercept_ - intercept_old);
        for (Index j = 0; j < m; ++j) {
            const double d = beta_[j] - beta_old[j];
            change = std::max(change, xv[j] * d * d);
        }
        obj = obj_new;
        if (inner_exhausted) break;

        if (change < tol) {
            Vector resid(n);
            for (Index i = 0; i < n; ++i) resid[i] = y_[i] - inverse_logit(eta_[i]);
            const Vector score = m > 0 ? Vector(X_.transpose() * resid / n_) : Vector();
            const double kkt = kkt_from_score(score, resid.sum() / n_, beta_, penalty);
            if (kkt <= kKktFactor * tol || clipped) {
                model.converged = true;
                break;
            }
            if (inner_tol <= 1e-30) break;
            inner_tol = std::max(inner_tol * 1e-2, 1e-30);
        }
    }
    model.intercept = intercept_;
    model.coefficients = beta_;
    model.n_iterations = outer;
    return model;
}

}  // namespace

void SolverSettings::validate() const {
    if (!(coef_tolerance > 0) || max_outer_iterations <= 0 || max_inner_iterations <= 0 ||
        !(weight_floor > 0 && weight_floor < 0.25))
        throw InvalidArgument("solver settings must be positive (weight floor below 0.25)");
}

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

double coordinate_update_nonneg(double z, double gamma) {
    return std::max(soft_threshold(z, gamma), 0.0);
}

double default_path_epsilon(Index n, Index m) { return n > m ? 1e-4 : 1e-2; }

double lasso_lambda_max(const Matrix& X, const Labels& y) {
    if (X.cols() == 0) return 0.0;
    const Vector yd = to_real(y);
    const Vector centered = yd.array() - yd.mean();
    return (X.transpose() * centered).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
}

LambdaPath log_spaced_path(double lambda_max, int n_lambda, double epsilon) {
    if (n_lambda < 1) throw InvalidArgument("path needs at least one lambda");
    if (!(epsilon > 0 && epsilon < 1)) throw InvalidArgument("path epsilon must lie in (0, 1)");
    // A zero score at the null model means the null fit is optimal for every lambda.
    if (!(lambda_max > 0) || !std::isfinite(lambda_max)) lambda_max = 1.0;
    LambdaPath path;
    path.lambda_max = lambda_max;
    path.epsilon = epsilon;
    path.values.resize(static_cast<std::size_t>(n_lambda));
    const double log_max = std::log(lambda_max);
    const double log_ratio = std::log(epsilon);
    for (int k = 0; k < n_lambda; ++k) {
        const double t = n_lambda == 1 ? 0.0 : static_cast<double>(k) / (n_lambda - 1);
        path.values[static_cast<std::size_t>(k)] = std::exp(log_max + t * log_ratio);
    }
    path.values.front() = lambda_max;
    if (n_lambda > 1) path.values.back() = lambda_max * epsilon;
    return path;
}

LambdaPath lambda_path(const Matrix& X, const Labels& y, const PenaltySpec& penalty,
                       int n_lambda, double epsilon) {
    check_inputs(X, y);
    if (epsilon <= 0) epsilon = default_path_epsilon(X.rows(), X.cols());
    const double lasso_max = lasso_lambda_max(X, y);
    double lambda_max = lasso_max;
    switch (penalty.family) {
        case PenaltyFamily::lasso: break;
        case PenaltyFamily::elastic_net: lambda_max = lasso_max / penalty.alpha; break;
        case PenaltyFamily::ridge: lambda_max = 1000.0 * lasso_max; break;
        case PenaltyFamily::group_lasso:
            throw InvalidArgument("use group_lambda_path for the group lasso");
    }
    return log_spaced_path(lambda_max, n_lambda, epsilon);
}

FittedLinearModel fit_logistic(const Matrix& X, const Labels& y, const PenaltySpec& penalty,
                               const SolverSettings& settings, const FitOptions& options) {
    check_inputs(X, y);
    settings.validate();
    penalty.validate(X.cols());
    if (penalty.family == PenaltyFamily::group_lasso)
        throw InvalidArgument("use fit_group_lasso for the group penalty");
    if (!options.standardize) {
        LogisticSolver solver(X, y, settings);
        return solver.solve(penalty, options.trace);
    }
    const StandardizedMatrix s = standardize_columns(X, ConstantColumns::passthrough);
    LogisticSolver solver(s.values, y, settings);
    FittedLinearModel model = solver.solve(penalty, options.trace);
    model.standardization = s.params;
    return model;
}

std::vector<FittedLinearModel> fit_logistic_path(const Matrix& X, const Labels& y,
                                                 const PenaltySpec& penalty,
                                                 const LambdaPath& path,
                                                 const SolverSettings& settings,
                                                 bool standardize) {
    check_inputs(X, y);
    settings.validate();
    penalty.validate(X.cols());
    std::vector<FittedLinearModel> models;
    models.reserve(path.size());
    auto run = [&](const Matrix& design, const Standardization& params) {
        LogisticSolver solver(design, y, settings);
        for (double lambda : path.values) {
            models.push_back(solver.solve(penalty.with_lambda(lambda), nullptr));
            models.back().standardization = params;
        }
    };
    if (standardize) {
        const StandardizedMatrix s = standardize_columns(X, ConstantColumns::passthrough);
        run(s.values, s.params);
    } else {
        run(X, Standardization{});
    }
    return models;
}

FittedLinearModel fit_intercept_only(const Labels& y, Index n_features) {
    require_binary(y);
    require_both_classes(y);
    const double ybar = y.cast<double>().mean();
    FittedLinearModel model;
    model.intercept = std::log(ybar / (1.0 - ybar));
    model.coefficients = Vector::Zero(n_features);
    model.penalty = PenaltySpec::lasso(0.0);
    model.n_iterations = 0;
    return model;
}

Vector predict_proba(const FittedLinearModel& model, const Matrix& X) {
    const Vector eta = model.linear_predictor(X);
    return eta.unaryExpr([](double e) { return inverse_logit(e); });
}

double logistic_objective(const Matrix& X, const Labels& y, double intercept, const Vector& beta,
                          const PenaltySpec& penalty) {
    Vector eta = Vector::Constant(X.rows(), intercept);
    if (beta.size() > 0) eta.noalias() += X * beta;
    return mean_loglik(to_real(y), eta) - penalty_value(beta, penalty);
}

double logistic_kkt_residual(const Matrix& X, const Labels& y, double intercept,
                             const Vector& beta, const PenaltySpec& penalty) {
    Vector eta = Vector::Constant(X.rows(), intercept);
    if (beta.size() > 0) eta.noalias() += X * beta;
    Vector resid(X.rows());
    for (Index i = 0; i < X.rows(); ++i) resid[i] = y[i] - inverse_logit(eta[i]);
    const double n = static_cast<double>(X.rows());
    const Vector score = beta.size() > 0 ? Vector(X.transpose() * resid / n) : Vector();
    return kkt_from_score(score, resid.sum() / n, beta, penalty);
}

}  // namespace staplr

namespace staplr {

namespace {

// Exact least squares on centered data restricted to the given columns.
Vector centered_ls(const Matrix& Xc, const Vector& yc, const std::vector<Index>& cols) {
    Vector beta = Vector::Zero(Xc.cols());
    if (cols.empty()) return beta;
    Matrix sub(Xc.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Index>(k)) = Xc.col(cols[k]);
    const Eigen::ColPivHouseholderQR<Matrix> qr(sub);
    if (qr.rank() < sub.cols())
        throw InvalidArgument("least squares design is rank deficient");
    const Vector b = qr.solve(yc);
    for (std::size_t k = 0; k < cols.size(); ++k) beta[cols[k]] = b[static_cast<Index>(k)];
    return beta;
}

}  // namespace

FittedLinearModel fit_least_squares(const Matrix& X, const Vector& y, bool nonnegative) {
    if (X.rows() != y.size()) throw InvalidArgument("X and y row counts differ");
    if (X.rows() < 2) throw InvalidArgument("at least two observations are required");
    if (!X.allFinite() || !y.allFinite()) throw InvalidArgument("non-finite least squares input");
    const Index m = X.cols();
    const Vector means = X.colwise().mean();
    const Matrix Xc = X.rowwise() - means.transpose();
    const double ybar = y.mean();
    const Vector yc = y.array() - ybar;

    std::vector<Index> all(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j) all[static_cast<std::size_t>(j)] = j;
    Vector beta;
    if (!nonnegative) {
        beta = centered_ls(Xc, yc, all);
    } else {
        // Lawson-Hanson active set method.
        beta = Vector::Zero(m);
        std::vector<bool> passive(static_cast<std::size_t>(m), false);
        const double scale = std::max(1.0, (Xc.transpose() * yc).cwiseAbs().maxCoeff());
        for (int outer = 0; outer < 3 * m + 10; ++outer) {
            const Vector grad = Xc.transpose() * (yc - Xc * beta);
            Index best = -1;
            double best_val = 1e-12 * scale;
            for (Index j = 0; j < m; ++j)
                if (!passive[static_cast<std::size_t>(j)] && grad[j] > best_val) {
                    best_val = grad[j];
                    best = j;
                }
            if (best < 0) break;
            passive[static_cast<std::size_t>(best)] = true;
            while (true) {
                std::vector<Index> cols;
                for (Index j = 0; j < m; ++j)
                    if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
                const Vector trial = centered_ls(Xc, yc, cols);
                bool feasible = true;
                for (Index j : cols) feasible = feasible && trial[j] > 0;
                if (feasible) {
                    beta = trial;
                    break;
                }
                double step = 1.0;
                for (Index j : cols)
                    if (trial[j] <= 0) step = std::min(step, beta[j] / (beta[j] - trial[j]));
                beta += step * (trial - beta);
                for (Index j : cols)
                    if (beta[j] <= 1e-15 * scale) {
                        beta[j] = 0.0;
                        passive[static_cast<std::size_t>(j)] = false;
                    }
            }
        }
    }
    FittedLinearModel model;
    model.coefficients = beta;
    model.intercept = ybar - means.dot(beta);
    model.penalty = PenaltySpec::lasso(0.0, nonnegative);
    model.n_iterations = 1;
    return model;
}

}  // namespace staplr
