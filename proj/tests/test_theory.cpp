#include "staplr/error.hpp"
#include "staplr/theory.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace staplr;
using namespace staplr::theory;
using Catch::Approx;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST_CASE("intercept predictor examples", "[theory]") {
    const Vector y = vec({1, 0, 1, 0});
    const FoldPartition two({0, 0, 1, 1}, 2);
    REQUIRE(intercept_cv_predictor(y, two) == vec({0.5, 0.5, 0.5, 0.5}));

    const Vector c = Vector::Constant(5, 0.3);
    const Vector zc = intercept_cv_predictor(c, make_folds(5, 2, 1));
    REQUIRE((zc.array() - 0.3).abs().maxCoeff() < 1e-15);

    const Vector z = intercept_cv_predictor(vec({1, 0, 0}), FoldPartition::leave_one_out(3));
    REQUIRE(z == vec({0.0, 0.5, 0.5}));
}

TEST_CASE("closed-form correlation equals Pearson and is nonpositive", "[theory][property]") {
    std::mt19937_64 gen(41);
    for (int t = 0; t < 300; ++t) {
        const Index n = 5 + t % 40;
        const Vector y = t % 2 ? support::coin_labels(n, gen).cast<double>().eval()
                               : support::normal_vector(n, gen);
        std::uniform_int_distribution<int> kd(2, static_cast<int>(n));
        const int K = kd(gen);
        std::vector<int> a(static_cast<std::size_t>(n));
        for (int k = 0; k < K; ++k) a[static_cast<std::size_t>(k)] = k;
        std::uniform_int_distribution<int> fd(0, K - 1);
        for (Index i = K; i < n; ++i) a[static_cast<std::size_t>(i)] = fd(gen);
        std::shuffle(a.begin(), a.end(), gen);
        const FoldPartition folds(a, K);
        const Vector z = intercept_cv_predictor(y, folds);
        if (theory::sample_variance(z) == 0.0 || theory::sample_variance(y) == 0.0) continue;
        const auto r = lemma1_rho(y, folds);
        REQUIRE(std::abs(r.empirical_rho - support::pearson(y, z)) < 1e-12);
        REQUIRE(std::abs(r.closed_form_rho - r.empirical_rho) < 1e-12);
        REQUIRE(r.closed_form_rho <= 0.0);
        REQUIRE(r.K == K);
    }
}

TEST_CASE("leave-one-out correlation is -1", "[theory]") {
    std::mt19937_64 gen(42);
    for (int t = 0; t < 50; ++t) {
        const Vector y = support::normal_vector(3 + t, gen);
        const auto r = lemma1_rho(y, FoldPartition::leave_one_out(y.size()));
        REQUIRE(std::abs(r.closed_form_rho + 1.0) < 1e-12);
        REQUIRE(std::abs(r.empirical_rho + 1.0) < 1e-12);
    }
}

TEST_CASE("equal folds: rho = -(K-1) sd(z) / sd(y)", "[theory]") {
    std::mt19937_64 gen(43);
    for (int K : {2, 3, 4, 6}) {
        const Index n = 12 * K;
        const Vector y = support::coin_labels(n, gen).cast<double>();
        const auto folds = make_folds(n, K, static_cast<std::uint64_t>(K));
        REQUIRE(folds.equal_sized());
        const Vector z = intercept_cv_predictor(y, folds);
        if (theory::sample_variance(z) == 0.0) continue;
        const auto r = lemma1_rho(y, folds);
        REQUIRE(r.equal_folds);
        REQUIRE(std::abs(r.closed_form_rho - equal_fold_rho(y, z, K)) < 1e-12);
    }
}

TEST_CASE("fold means equal to the overall mean make z constant", "[theory]") {
    const Vector y = vec({1, 0, 0, 1});
    const FoldPartition folds({0, 0, 1, 1}, 2);
    REQUIRE_THROWS_AS(lemma1_rho(y, folds), UndefinedCorrelation);
    REQUIRE_THROWS_AS(lemma1_rho(Vector::Ones(4), folds), UndefinedCorrelation);
}

TEST_CASE("two-predictor closed form", "[theory]") {
    std::mt19937_64 gen(44);
    SECTION("matches a generic least-squares solve") {
        for (int t = 0; t < 30; ++t) {
            const Vector y = support::normal_vector(25, gen);
            const Vector z1 = support::normal_vector(25, gen);
            const Vector z2 = support::normal_vector(25, gen) + 0.5 * z1;
            const auto fit = ols_two_predictor(y, z1, z2);
            Matrix D(25, 3);
            D << Vector::Ones(25), z1, z2;
            const Vector b = D.colPivHouseholderQr().solve(y);
            REQUIRE(std::abs(fit.intercept - b[0]) < 1e-10);
            REQUIRE(std::abs(fit.beta1 - b[1]) < 1e-10);
            REQUIRE(std::abs(fit.beta2 - b[2]) < 1e-10);
        }
    }
    SECTION("degenerate regime: beta = (1 - n, 0)") {
        for (Index n : {10, 37, 200}) {
            const Vector y = support::coin_labels(n, gen).cast<double>();
            const Vector z1 = intercept_cv_predictor(y, FoldPartition::leave_one_out(n));
            Vector z2 = 0.8 * y + support::normal_vector(n, gen);
            const double r = support::pearson(y, z2);
            REQUIRE(r > 0);
            REQUIRE(r < 1);
            const auto fit = ols_two_predictor(y, z1, z2);
            REQUIRE(std::abs(fit.beta1 - (1.0 - static_cast<double>(n))) < 1e-8);
            REQUIRE(std::abs(fit.beta2) < 1e-8);
            if (n == 10) REQUIRE(fit.beta1 == Approx(-9.0).margin(1e-8));
        }
    }
    SECTION("predictors uncorrelated with y") {
        const Vector y = vec({1, -1, 1, -1});
        const Vector z1 = vec({1, 1, -1, -1});
        const Vector z2 = vec({1, -1, -1, 1});
        const auto fit = ols_two_predictor(y, z1, z2);
        REQUIRE(std::abs(fit.beta1) < 1e-15);
        REQUIRE(std::abs(fit.beta2) < 1e-15);
    }
    SECTION("collinear predictors") {
        const Vector z = support::normal_vector(10, gen);
        REQUIRE_THROWS_AS(ols_two_predictor(z, z, 2.0 * z), Collinearity);
        REQUIRE_THROWS_AS(ols_two_predictor(z, z, Vector::Ones(10)), Collinearity);
    }
}

TEST_CASE("leave-one-out variance identity", "[theory]") {
    const auto [vz, vy] = loo_variance_identity(vec({1, 0, 0, 1}));
    REQUIRE(vz == Approx(vy).epsilon(1e-14));
    REQUIRE(vy == Approx((1.0 / 3.0) / 9.0));
    const auto [cz, cy] = loo_variance_identity(Vector::Constant(5, 2.0));
    REQUIRE(cz == 0.0);
    REQUIRE(cy == 0.0);
    std::mt19937_64 gen(45);
    for (int t = 0; t < 20; ++t) {
        const auto [z, y] = loo_variance_identity(support::normal_vector(100, gen));
        REQUIRE(std::abs(z - y) < 1e-12);
    }
}

TEST_CASE("randomized lemma checks all pass", "[theory]") {
    const auto checks = run_lemma_checks(200, 7);
    REQUIRE(checks.size() == 7);
    for (const auto& c : checks) {
        INFO(c.name << " " << c.passed << "/" << c.trials << " max error " << c.max_error);
        REQUIRE(c.ok());
    }
}

TEST_CASE("sample statistics use the n-1 divisor", "[theory]") {
    const Vector x = vec({1, 2, 3, 4});
    REQUIRE(sample_mean(x) == 2.5);
    REQUIRE(sample_variance(x) == Approx(5.0 / 3.0));
    REQUIRE(sample_covariance(x, 2.0 * x) == Approx(10.0 / 3.0));
    REQUIRE(pearson(x, -x) == Approx(-1.0));
    REQUIRE_THROWS_AS(pearson(x, Vector::Ones(4)), UndefinedCorrelation);
}
