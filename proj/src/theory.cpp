#include "staplr/theory.hpp"

#include "staplr/error.hpp"
#include "staplr/rng.hpp"

#include <algorithm>
#include <cmath>

namespace staplr::theory {

double sample_mean(const Vector& x) { return x.mean(); }

double sample_variance(const Vector& x) {
    if (x.size() < 2) throw InvalidArgument("variance needs at least two values");
    return (x.array() - x.mean()).square().sum() / static_cast<double>(x.size() - 1);
}

double sample_covariance(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw InvalidArgument("covariance of vectors of different length");
    if (a.size() < 2) throw InvalidArgument("covariance needs at least two values");
    return ((a.array() - a.mean()) * (b.array() - b.mean())).sum() /
           static_cast<double>(a.size() - 1);
}

double pearson(const Vector& a, const Vector& b) {
    const double va = sample_variance(a);
    const double vb = sample_variance(b);
    if (!(va > 0) || !(vb > 0))
        throw UndefinedCorrelation("correlation with a constant vector is undefined");
    return sample_covariance(a, b) / std::sqrt(va * vb);
}

Vector intercept_cv_predictor(const Vector& y, const FoldPartition& folds) {
    if (folds.n() != y.size()) throw InvalidArgument("fold partition does not match y");
    const double total = y.sum();
    const double n = static_cast<double>(y.size());
    std::vector<double> fold_sum(static_cast<std::size_t>(folds.K()), 0.0);
    std::vector<double> fold_size(static_cast<std::size_t>(folds.K()), 0.0);
    for (Index i = 0; i < y.size(); ++i) {
        fold_sum[static_cast<std::size_t>(folds.fold_of(i))] += y[i];
        fold_size[static_cast<std::size_t>(folds.fold_of(i))] += 1.0;
    }
    Vector z(y.size());
    for (Index i = 0; i < y.size(); ++i) {
        const auto k = static_cast<std::size_t>(folds.fold_of(i));
        if (fold_size[k] >= n) throw InvalidArgument("a fold may not contain every row");
        z[i] = (total - fold_sum[k]) / (n - fold_size[k]);
    }
    return z;
}

CorrelationReport lemma1_rho(const Vector& y, const FoldPartition& folds) {
    const Vector z = intercept_cv_predictor(y, folds);
    const double sy = std::sqrt(sample_variance(y));
    const double sz = std::sqrt(sample_variance(z));
    if (!(sy > 0)) throw UndefinedCorrelation("y is constant");
    if (!(sz > 0)) throw UndefinedCorrelation("cross-validated predictor is constant");
    const double n = static_cast<double>(y.size());
    const double ybar = y.mean();
    std::vector<double> dev(static_cast<std::size_t>(folds.K()), 0.0);
    for (Index i = 0; i < y.size(); ++i) dev[static_cast<std::size_t>(folds.fold_of(i))] += y[i] - ybar;
    double numer = 0.0;
    for (int k = 0; k < folds.K(); ++k)
        numer += dev[static_cast<std::size_t>(k)] * dev[static_cast<std::size_t>(k)] /
                 (n - static_cast<double>(folds.size(k)));
    CorrelationReport report;
    report.closed_form_rho = -numer / ((n - 1.0) * sy * sz);
    report.empirical_rho = pearson(y, z);
    report.K = folds.K();
    report.equal_folds = folds.equal_sized();
    return report;
}

double equal_fold_rho(const Vector& y, const Vector& z, int K) {
    return -(K - 1.0) * std::sqrt(sample_variance(z)) / std::sqrt(sample_variance(y));
}

TwoPredictorFit ols_two_predictor(const Vector& y, const Vector& z1, const Vector& z2) {
    if (y.size() != z1.size() || y.size() != z2.size())
        throw InvalidArgument("y, z1 and z2 must have equal length");
    const double v1 = sample_variance(z1);
    const double v2 = sample_variance(z2);
    const double c12 = sample_covariance(z1, z2);
    if (!(v1 > 0) || !(v2 > 0)) throw Collinearity("a predictor is constant");
    const double rho2 = c12 * c12 / (v1 * v2);
    if (1.0 - rho2 <= 1e-14) throw Collinearity("z1 and z2 are perfectly correlated");
    const double gamma = (1.0 - rho2) * v1 * v2;
    const double cy1 = sample_covariance(y, z1);
    const double cy2 = sample_covariance(y, z2);
    TwoPredictorFit fit;
    fit.beta1 = (v2 * cy1 - c12 * cy2) / gamma;
    fit.beta2 = (v1 * cy2 - c12 * cy1) / gamma;
    fit.intercept = y.mean() - fit.beta1 * z1.mean() - fit.beta2 * z2.mean();
    return fit;
}

std::pair<double, double> loo_variance_identity(const Vector& y) {
    if (y.size() < 3) throw InvalidArgument("the identity needs n >= 3");
    const Vector z = intercept_cv_predictor(y, FoldPartition::leave_one_out(y.size()));
    const double n = static_cast<double>(y.size());
    return {sample_variance(z), sample_variance(y) / ((n - 1.0) * (n - 1.0))};
}

namespace {

Vector random_outcome(Rng& rng, Index n) {
    Vector y(n);
    const bool binary = rng.bernoulli(0.5);
    do {
        for (Index i = 0; i < n; ++i) y[i] = binary ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : rng.normal();
    } while (sample_variance(y) == 0.0);
    return y;
}

// Arbitrary (generally unequal) partition with every fold nonempty.
FoldPartition random_partition(Rng& rng, Index n, int K) {
    std::vector<int> a(static_cast<std::size_t>(n));
    for (int k = 0; k < K; ++k) a[static_cast<std::size_t>(k)] = k;
    for (Index i = K; i < n; ++i) a[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_index(K));
    rng.shuffle(a);
    return FoldPartition(std::move(a), K);
}

void record(LemmaCheck& check, double error) {
    ++check.trials;
    if (error <= check.tolerance) ++check.passed;
    check.max_error = std::max(check.max_error, error);
}

}  // namespace

std::vector<LemmaCheck> run_lemma_checks(int trials, std::uint64_t seed) {
    LemmaCheck closed{"lemma1_closed_form", 0, 0, 0.0, 1e-12};
    LemmaCheck sign{"lemma1_nonpositive", 0, 0, 0.0, 0.0};
    LemmaCheck equal{"corollary_equal_folds", 0, 0, 0.0, 1e-12};
    LemmaCheck loo{"corollary_leave_one_out", 0, 0, 0.0, 1e-12};
    LemmaCheck variance{"loo_variance_identity", 0, 0, 0.0, 1e-12};
    LemmaCheck lemma2{"two_predictor_degeneracy", 0, 0, 0.0, 1e-8};
    LemmaCheck lstsq{"two_predictor_closed_form", 0, 0, 0.0, 1e-10};

    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
        const Index n = 4 + static_cast<Index>(rng.uniform_index(57));
        const Vector y = random_outcome(rng, n);

        // Arbitrary partition.
        const int K = 2 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n - 1)));
        const FoldPartition folds = random_partition(rng, n, K);
        if (sample_variance(intercept_cv_predictor(y, folds)) > 0) {
            const auto r = lemma1_rho(y, folds);
            record(closed, std::abs(r.closed_form_rho - r.empirical_rho));
            record(sign, std::max(r.closed_form_rho, 0.0));
        }

        // Equal-sized folds.
        std::vector<int> divisors;
        for (int d = 2; d <= n; ++d)
            if (n % d == 0) divisors.push_back(d);
        const int Ke = divisors[rng.uniform_index(divisors.size())];
        const FoldPartition eq = make_folds(n, Ke, rng.next_u64());
        const Vector ze = intercept_cv_predictor(y, eq);
        if (sample_variance(ze) > 0) {
            const auto r = lemma1_rho(y, eq);
            record(equal, std::max(std::abs(r.closed_form_rho - equal_fold_rho(y, ze, Ke)),
                                   std::abs(r.empirical_rho - equal_fold_rho(y, ze, Ke))));
        }

        // Leave-one-out.
        const auto rl = lemma1_rho(y, FoldPartition::leave_one_out(n));
        record(loo, std::max(std::abs(rl.closed_form_rho + 1.0), std::abs(rl.empirical_rho + 1.0)));
        const auto [vz, vy] = loo_variance_identity(y);
        record(variance, std::abs(vz - vy));

        // Two-predictor regression with a leave-one-out intercept predictor.
        const Vector z1 = intercept_cv_predictor(y, FoldPartition::leave_one_out(n));
        Vector z2(n);
        const double signal = 0.2 + rng.uniform();
        do {
            for (Index i = 0; i < n; ++i) z2[i] = signal * y[i] + rng.normal();
        } while (pearson(y, z2) <= 0.0);
        const auto fit = ols_two_predictor(y, z1, z2);
        record(lemma2, std::max(std::abs(fit.beta1 - (1.0 - static_cast<double>(n))),
                                std::abs(fit.beta2)));
        Matrix D(n, 3);
        D.col(0).setOnes();
        D.col(1) = z1;
        D.col(2) = z2;
        const Vector b = D.colPivHouseholderQr().solve(y);
        record(lstsq, std::max({std::abs(b[0] - fit.intercept), std::abs(b[1] - fit.beta1),
                                std::abs(b[2] - fit.beta2)}) /
                          std::max(1.0, std::abs(fit.beta1)));
    }
    return {closed, sign, equal, loo, variance, lemma2, lstsq};
}

}  // namespace staplr::theory
