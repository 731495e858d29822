#include "staplr/group_lasso.hpp"

#include "staplr/error.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace staplr {

namespace {

// Blocks up to this size are minimized exactly on their quadratic model via an
// eigendecomposition of the block Gram matrix; larger blocks take a single
// majorized proximal step per visit.
constexpr Index kGramBlockLimit = 64;

// Block caches are rebuilt once any weight moves by more than this factor.
constexpr double kWeightDrift = 1.1;
// A fit is accepted once its KKT residual is below this multiple of the
// coefficient tolerance; inner sweeps are tightened until then.
constexpr double kKktFactor = 0.1;

struct BlockCache {
    Matrix H;
    Matrix Q;
    Vector evals;
};

// Maximizer of c^T b - b^T H b / 2 - t |b| for positive semidefinite H = Q diag(e) Q^T
// and |c| > t: b = (H + mu I)^{-1} c where mu |b| = t, found by safeguarded Newton
// iteration on the increasing function mu |(H + mu I)^{-1} c|.
Vector exact_block_solution(const BlockCache& cache, double kappa, const Vector& c, double t) {
    const Vector ch = cache.Q.transpose() * c;
    const Vector e = (kappa * cache.evals).cwiseMax(1e-12);
    const double cn = c.norm();
    auto f = [&](double mu, double& slope) {
        const Vector q = ch.array() / (e.array() + mu);
        const double psi = q.norm();
        const double dpsi = -(q.array().square() / (e.array() + mu)).sum() / psi;
        slope = psi + mu * dpsi;
        return mu * psi - t;
    };
    double lo = 0.0;
    double hi = t * e.maxCoeff() / (cn - t) * (1.0 + 1e-12) + 1e-300;
    double slope = 0.0;
    while (f(hi, slope) < 0) hi *= 2.0;
    double mu = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double value = f(mu, slope);
        if (value == 0.0) break;
        if (value < 0)
            lo = mu;
        else
            hi = mu;
        double next = slope > 0 ? mu - value / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - mu) <= 1e-15 * mu || hi - lo <= 1e-15 * hi) {
            mu = next;
            break;
        }
        mu = next;
    }
    return cache.Q * Vector(ch.array() / (e.array() + mu));
}

double softplus(double eta) {
    return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double mean_loglik(const Vector& y, const Vector& eta) {
    double s = 0.0;
    for (Index i = 0; i < y.size(); ++i) s += y[i] * eta[i] - softplus(eta[i]);
    return s / static_cast<double>(y.size());
}

void check_inputs(const Matrix& X, const Labels& y, const GroupStructure& groups) {
    if (X.rows() != y.size()) throw InvalidArgument("X and y row counts differ");
    if (y.size() < 2) throw InvalidArgument("at least two observations are required");
    if (!X.allFinite()) throw InvalidArgument("X contains non-finite values");
    require_binary(y);
    require_both_classes(y);
    groups.validate(X.cols());
}

// Largest eigenvalue of X^T X / n by power iteration, inflated slightly since
// the estimate approaches the true value from below.
double top_eigenvalue_estimate(const Eigen::Ref<const Matrix>& Xg) {
    const double n = static_cast<double>(Xg.rows());
    Vector v = Vector::Ones(Xg.cols()).normalized();
    double value = 0.0;
    for (int it = 0; it < 200; ++it) {
        const Vector Av = Xg.transpose() * (Xg * v) / n;
        const double next = v.dot(Av);
        const double norm = Av.norm();
        if (norm == 0.0) return 0.0;
        v = Av / norm;
        if (std::abs(next - value) <= 1e-10 * std::abs(next)) {
            value = next;
            break;
        }
        value = next;
    }
    return 1.05 * value;
}

// Score-based KKT residual for the group penalty.
double block_kkt(const Vector& score, double intercept_score, const Vector& beta,
                 const GroupStructure& groups, double lambda) {
    double worst = std::abs(intercept_score);
    for (std::size_t g = 0; g < groups.n_groups(); ++g) {
        const auto& idx = groups.groups[g];
        Vector sg(static_cast<Index>(idx.size())), bg(static_cast<Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            sg[static_cast<Index>(k)] = score[idx[k]];
            bg[static_cast<Index>(k)] = beta[idx[k]];
        }
        const double bn = bg.norm();
        const double thr = lambda * groups.weights[g];
        const double v = bn > 0 ? (sg - thr * bg / bn).norm() : std::max(sg.norm() - thr, 0.0);
        worst = std::max(worst, v);
    }
    return worst;
}

// Solver state on a column-permuted copy of X in which every group is contiguous.
class GroupSolver {
public:
    GroupSolver(const Matrix& X, const Labels& y, const GroupStructure& groups,
                const SolverSettings& settings)
        : groups_(groups), settings_(settings), y_(y.cast<double>()),
          n_(static_cast<double>(X.rows())) {
        const std::size_t G = groups.n_groups();
        Xp_.resize(X.rows(), X.cols());
        Index offset = 0;
        for (std::size_t g = 0; g < G; ++g) {
            starts_.push_back(offset);
            for (Index j : groups.groups[g]) Xp_.col(offset++) = X.col(j);
            sizes_.push_back(static_cast<Index>(groups.groups[g].size()));
        }
        unweighted_bound_.assign(G, 0.0);
        for (std::size_t g = 0; g < G; ++g)
            if (sizes_[g] > kGramBlockLimit)
                unweighted_bound_[g] = top_eigenvalue_estimate(Xp_.middleCols(starts_[g], sizes_[g]));
        const double ybar = y_.mean();
        intercept_ = std::log(ybar / (1.0 - ybar));
        beta_ = Vector::Zero(X.cols());
        eta_ = Vector::Constant(X.rows(), intercept_);
    }

    FittedLinearModel solve(double lambda, FitTrace* trace);

private:
    double objective(const Vector& eta, const Vector& beta, double lambda) const {
        double pen = 0.0;
        for (std::size_t g = 0; g < sizes_.size(); ++g)
            pen += groups_.weights[g] * beta.segment(starts_[g], sizes_[g]).norm();
        return mean_loglik(y_, eta) - lambda * pen;
    }
    double block_sweep(const std::vector<std::size_t>& blocks, double lambda, Vector& r,
                       const Vector& w, double w_sum);
    void prepare_block(std::size_t g);

    const GroupStructure& groups_;
    SolverSettings settings_;
    Vector y_;
    double n_;
    Matrix Xp_;
    std::vector<Index> starts_;
    std::vector<Index> sizes_;
    std::vector<double> unweighted_bound_;
    double intercept_;
    Vector beta_;
    Vector eta_;

    // Block decompositions built with weights w_ref_.  For current weights w,
    // kappa_ = max_i w_i / w_ref_i makes kappa_ * H a majorizer of the true block
    // curvature, so caches survive small weight changes across iterations.
    std::vector<std::optional<BlockCache>> cache_;
    Vector w_ref_;
    double kappa_ = 1.0;
    std::vector<double> lipschitz_;
    double max_weight_ = 0.25;
};

void GroupSolver::prepare_block(std::size_t g) {
    if (lipschitz_[g] > 0) return;
    const auto Xg = Xp_.middleCols(starts_[g], sizes_[g]);
    if (sizes_[g] <= kGramBlockLimit) {
        if (cache_[g]) {
            lipschitz_[g] = std::max(kappa_ * cache_[g]->evals.maxCoeff(), 1e-12);
            return;
        }
        const Matrix Wx = w_ref_.cwiseSqrt().asDiagonal() * Xg;
        BlockCache cache;
        cache.H = Matrix::Zero(sizes_[g], sizes_[g]);
        cache.H.selfadjointView<Eigen::Lower>().rankUpdate(Wx.transpose(), 1.0 / n_);
        cache.H.triangularView<Eigen::StrictlyUpper>() = cache.H.transpose();
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(cache.H);
        cache.Q = eig.eigenvectors();
        cache.evals = eig.eigenvalues();
        lipschitz_[g] = std::max(kappa_ * cache.evals.maxCoeff(), 1e-12);
        cache_[g] = std::move(cache);
    } else {
        lipschitz_[g] = std::max(unweighted_bound_[g] * max_weight_, 1e-12);
    }
}

double GroupSolver::block_sweep(const std::vector<std::size_t>& blocks, double lambda, Vector& r,
                                const Vector& w, double w_sum) {
    double max_change = 0.0;
    Vector wr = w.cwiseProduct(r);
    for (std::size_t g : blocks) {
        const Index s = starts_[g];
        const Index size = sizes_[g];
        const auto Xg = Xp_.middleCols(s, size);
        Vector grad = Xg.transpose() * wr / n_;
        const double thr_base = lambda * groups_.weights[g];
        auto bg = beta_.segment(s, size);
        if (bg.squaredNorm() == 0.0 && grad.norm() <= thr_base) continue;

        prepare_block(g);
        const double L = lipschitz_[g];
        const Vector start = bg;
        if (cache_[g]) {
            const Vector c = kappa_ * (cache_[g]->H * bg) + grad;
            if (c.norm() <= thr_base)
                bg.setZero();
            else
                bg = exact_block_solution(*cache_[g], kappa_, c, thr_base);
        } else {
            const Vector u = bg + grad / L;
            const double un = u.norm();
            const double thr = thr_base / L;
            bg = un > thr ? Vector(u * (1.0 - thr / un)) : Vector::Zero(size);
        }
        const Vector total = bg - start;
        const double change = L * total.squaredNorm();
        if (change > 0.0) {
            const Vector shift = Xg * total;
            r.noalias() -= shift;
            wr.noalias() -= w.cwiseProduct(shift);
            max_change = std::max(max_change, change);
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

FittedLinearModel GroupSolver::solve(double lambda, FitTrace* trace) {
    const Index n = Xp_.rows();
    const Index m = Xp_.cols();
    const std::size_t G = sizes_.size();
    const double tol = settings_.coef_tolerance;
    const double floor = settings_.weight_floor;
    if (lambda == 0.0 && m > 0 && m >= n)
        throw InvalidArgument("unpenalized group fit refused: more features than observations");

    std::vector<std::size_t> all(G);
    for (std::size_t g = 0; g < G; ++g) all[g] = g;

    FittedLinearModel model;
    model.converged = false;
    double obj = objective(eta_, beta_, lambda);
    if (trace) trace->objective.push_back(obj);

    double inner_tol = tol;
    long sweeps = 0;
    Vector w(n), r(n), r0(n);
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
        max_weight_ = w.maxCoeff();
        lipschitz_.assign(G, 0.0);
        if (w_ref_.size() != n || (w.array() / w_ref_.array()).maxCoeff() > kWeightDrift ||
            (w_ref_.array() / w.array()).maxCoeff() > kWeightDrift) {
            cache_.assign(G, std::nullopt);
            w_ref_ = w;
        }
        kappa_ = (w.array() / w_ref_.array()).maxCoeff();

        const Vector beta_old = beta_;
        const double intercept_old = intercept_;
        bool inner_exhausted = false;
        while (true) {
            const double full = block_sweep(all, lambda, r, w, w_sum);
            ++sweeps;
            if (full < inner_tol) break;
            std::vector<std::size_t> active;
            for (std::size_t g = 0; g < G; ++g)
                if (beta_.segment(starts_[g], sizes_[g]).squaredNorm() > 0) active.push_back(g);
            if (active.size() < G) {
                while (sweeps < settings_.max_inner_iterations) {
                    ++sweeps;
                    if (block_sweep(active, lambda, r, w, w_sum) < inner_tol) break;
                }
            }
            if (sweeps >= settings_.max_inner_iterations) {
                inner_exhausted = true;
                break;
            }
        }

        const Vector eta_old = eta_;
        const Vector d_eta = r0 - r;
        eta_ = eta_old + d_eta;
        double obj_new = objective(eta_, beta_, lambda);
        const Vector d_beta = beta_ - beta_old;
        const double d_intercept = intercept_ - intercept_old;
        const double slack = 1e-13 * std::max(1.0, std::abs(obj));
        double step = 1.0;
        for (int h = 0; h < 40 && obj_new < obj - slack; ++h) {
            step *= 0.5;
            beta_ = beta_old + step * d_beta;
            intercept_ = intercept_old + step * d_intercept;
            eta_ = eta_old + step * d_eta;
            obj_new = objective(eta_, beta_, lambda);
        }
        if (obj_new < obj - slack) {
            beta_ = beta_old;
            intercept_ = intercept_old;
            eta_ = eta_old;
            obj_new = obj;
        }
        if (trace) trace->objective.push_back(obj_new);

        double change = w_sum * d_intercept * d_intercept * step * step;
        for (std::size_t g = 0; g < G; ++g) {
            const double L = lipschitz_[g] > 0 ? lipschitz_[g] : 0.25;
            change = std::max(change, L * (beta_ - beta_old).segment(starts_[g], sizes_[g]).squaredNorm());
        }
        obj = obj_new;
        if (inner_exhausted) break;

        if (change < tol) {
            Vector resid(n);
            for (Index i = 0; i < n; ++i) resid[i] = y_[i] - inverse_logit(eta_[i]);
            const Vector score = Xp_.transpose() * resid / n_;
            GroupStructure contiguous;
            contiguous.weights = groups_.weights;
            for (std::size_t g = 0; g < G; ++g) {
                std::vector<Index> idx(static_cast<std::size_t>(sizes_[g]));
                for (Index k = 0; k < sizes_[g]; ++k) idx[static_cast<std::size_t>(k)] = starts_[g] + k;
                contiguous.groups.push_back(std::move(idx));
            }
            const double kkt = block_kkt(score, resid.sum() / n_, beta_, contiguous, lambda);
            if (kkt <= kKktFactor * tol || clipped) {
                model.converged = true;
                break;
            }
            if (inner_tol <= 1e-30) break;
            inner_tol = std::max(inner_tol * 1e-2, 1e-30);
        }
    }

    // Undo the column permutation.
    model.coefficients = Vector::Zero(m);
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t k = 0; k < groups_.groups[g].size(); ++k)
            model.coefficients[groups_.groups[g][k]] = beta_[starts_[g] + static_cast<Index>(k)];
    model.intercept = intercept_;
    model.n_iterations = outer;
    model.penalty = PenaltySpec::group(groups_.to_map(m), lambda);
    return model;
}

}  // namespace

GroupStructure GroupStructure::from_map(const std::vector<int>& group_map, bool unit_weights) {
    GroupStructure gs;
    int max_id = -1;
    for (int g : group_map) {
        if (g < 0) throw InvalidArgument("group ids must be nonnegative");
        max_id = std::max(max_id, g);
    }
    gs.groups.resize(static_cast<std::size_t>(max_id + 1));
    for (std::size_t j = 0; j < group_map.size(); ++j)
        gs.groups[static_cast<std::size_t>(group_map[j])].push_back(static_cast<Index>(j));
    for (std::size_t g = 0; g < gs.groups.size(); ++g) {
        if (gs.groups[g].empty())
            throw InvalidArgument("group " + std::to_string(g) + " has no features");
        gs.weights.push_back(unit_weights ? 1.0 : std::sqrt(static_cast<double>(gs.groups[g].size())));
    }
    return gs;
}

std::vector<int> GroupStructure::to_map(Index n_features) const {
    std::vector<int> map(static_cast<std::size_t>(n_features), -1);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (Index j : groups[g]) map[static_cast<std::size_t>(j)] = static_cast<int>(g);
    return map;
}

void GroupStructure::validate(Index n_features) const {
    if (weights.size() != groups.size())
        throw InvalidArgument("one weight per group is required");
    std::vector<int> seen(static_cast<std::size_t>(n_features), 0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw InvalidArgument("empty group");
        if (!(weights[g] > 0)) throw InvalidArgument("group weights must be positive");
        for (Index j : groups[g]) {
            if (j < 0 || j >= n_features) throw InvalidArgument("group feature index out of range");
            if (seen[static_cast<std::size_t>(j)]++)
                throw InvalidArgument("feature " + std::to_string(j) + " appears in two groups");
        }
    }
    for (std::size_t j = 0; j < seen.size(); ++j)
        if (!seen[j]) throw InvalidArgument("feature " + std::to_string(j) + " is not in any group");
}

FittedLinearModel fit_group_lasso(const Matrix& X, const Labels& y, const GroupStructure& groups,
                                  double lambda, const SolverSettings& settings,
                                  const FitOptions& options) {
    check_inputs(X, y, groups);
    settings.validate();
    if (!(lambda >= 0) || !std::isfinite(lambda))
        throw InvalidArgument("lambda must be a finite nonnegative number");
    if (!options.standardize) {
        GroupSolver solver(X, y, groups, settings);
        return solver.solve(lambda, options.trace);
    }
    const StandardizedMatrix s = standardize_columns(X, ConstantColumns::passthrough);
    GroupSolver solver(s.values, y, groups, settings);
    FittedLinearModel model = solver.solve(lambda, options.trace);
    model.standardization = s.params;
    return model;
}

std::vector<FittedLinearModel> fit_group_lasso_path(const Matrix& X, const Labels& y,
                                                    const GroupStructure& groups,
                                                    const LambdaPath& path,
                                                    const SolverSettings& settings,
                                                    bool standardize) {
    check_inputs(X, y, groups);
    settings.validate();
    std::vector<FittedLinearModel> models;
    models.reserve(path.size());
    auto run = [&](const Matrix& design, const Standardization& params) {
        GroupSolver solver(design, y, groups, settings);
        for (double lambda : path.values) {
            models.push_back(solver.solve(lambda, nullptr));
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

LambdaPath group_lambda_path(const Matrix& X, const Labels& y, const GroupStructure& groups,
                             int n_lambda, double epsilon) {
    check_inputs(X, y, groups);
    if (epsilon <= 0) epsilon = default_path_epsilon(X.rows(), X.cols());
    const Vector yd = y.cast<double>();
    const Vector centered = yd.array() - yd.mean();
    const Vector score = X.transpose() * centered;
    const double n = static_cast<double>(X.rows());
    double lambda_max = 0.0;
    for (std::size_t g = 0; g < groups.n_groups(); ++g) {
        double sq = 0.0;
        for (Index j : groups.groups[g]) sq += score[j] * score[j];
        lambda_max = std::max(lambda_max, std::sqrt(sq) / (n * groups.weights[g]));
    }
    return log_spaced_path(lambda_max, n_lambda, epsilon);
}

std::vector<int> selected_groups(const FittedLinearModel& model, const GroupStructure& groups) {
    std::vector<int> out;
    for (std::size_t g = 0; g < groups.n_groups(); ++g) {
        double sq = 0.0;
        for (Index j : groups.groups[g]) sq += model.coefficients[j] * model.coefficients[j];
        if (sq > 0.0) out.push_back(static_cast<int>(g));
    }
    return out;
}

double group_lasso_objective(const Matrix& X, const Labels& y, double intercept,
                             const Vector& beta, const GroupStructure& groups, double lambda) {
    Vector eta = Vector::Constant(X.rows(), intercept);
    eta.noalias() += X * beta;
    double pen = 0.0;
    for (std::size_t g = 0; g < groups.n_groups(); ++g) {
        double sq = 0.0;
        for (Index j : groups.groups[g]) sq += beta[j] * beta[j];
        pen += groups.weights[g] * std::sqrt(sq);
    }
    return mean_loglik(y.cast<double>(), eta) - lambda * pen;
}

double group_lasso_kkt_residual(const Matrix& X, const Labels& y, double intercept,
                                const Vector& beta, const GroupStructure& groups, double lambda) {
    Vector eta = Vector::Constant(X.rows(), intercept);
    eta.noalias() += X * beta;
    Vector resid(X.rows());
    for (Index i = 0; i < X.rows(); ++i) resid[i] = y[i] - inverse_logit(eta[i]);
    const double n = static_cast<double>(X.rows());
    const Vector score = X.transpose() * resid / n;
    return block_kkt(score, resid.sum() / n, beta, groups, lambda);
}

}  // namespace staplr
