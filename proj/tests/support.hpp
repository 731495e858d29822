#pragma once

// Test fixtures and independent oracles.  Nothing here calls the solvers under
// test.

#include "staplr/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace support {

using staplr::Index;
using staplr::Labels;
using staplr::Matrix;
using staplr::Vector;

inline Matrix normal_matrix(Index n, Index m, std::mt19937_64& gen) {
    std::normal_distribution<double> dist;
    Matrix X(n, m);
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < n; ++i) X(i, j) = dist(gen);
    return X;
}

inline Vector normal_vector(Index n, std::mt19937_64& gen) {
    return normal_matrix(n, 1, gen).col(0);
}

/// Labels drawn from a logistic model; redrawn until both classes appear.
inline Labels logistic_labels(const Matrix& X, const Vector& beta, double intercept,
                              std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u;
    Labels y(X.rows());
    while (true) {
        for (Index i = 0; i < X.rows(); ++i) {
            const double eta = intercept + X.row(i).dot(beta);
            y[i] = u(gen) < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
        }
        if (y.sum() > 0 && y.sum() < y.size()) return y;
    }
}

inline Labels coin_labels(Index n, std::mt19937_64& gen) {
    std::bernoulli_distribution b(0.5);
    Labels y(n);
    while (true) {
        for (Index i = 0; i < n; ++i) y[i] = b(gen) ? 1 : 0;
        if (y.sum() > 0 && y.sum() < n) return y;
    }
}

struct Solution {
    double intercept = 0.0;
    Vector beta;
};

/// Mean log-likelihood (1/n) sum [y eta - log(1 + e^eta)].
inline double loglik(const Matrix& X, const Labels& y, double b0, const Vector& b) {
    double s = 0.0;
    for (Index i = 0; i < X.rows(); ++i) {
        const double eta = b0 + X.row(i).dot(b);
        const double sp = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
        s += y[i] * eta - sp;
    }
    return s / static_cast<double>(X.rows());
}

/// Accelerated proximal gradient with adaptive restart on the negative mean
/// log-likelihood plus a separable penalty described by `prox` (applied to the
/// slopes only, with step size t).
inline Solution proximal_oracle(const Matrix& X, const Labels& y, double l2,
                                const std::function<void(Vector&, double)>& prox,
                                int max_iter = 400000) {
    const Index n = X.rows();
    const Index m = X.cols();
    Matrix A(n, m + 1);
    A.col(0).setOnes();
    A.rightCols(m) = X;
    const Eigen::JacobiSVD<Matrix> svd(A);
    const double smax = svd.singularValues()(0);
    const double L = 0.25 * smax * smax / static_cast<double>(n) + l2;
    const double t = 1.0 / L;
    const Vector yd = y.cast<double>();

    auto grad = [&](const Vector& theta) {
        Vector eta = A * theta;
        Vector p = eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
        Vector g = A.transpose() * (p - yd) / static_cast<double>(n);
        g.tail(m) += l2 * theta.tail(m);
        return g;
    };

    Vector x = Vector::Zero(m + 1);
    Vector x_prev = x;
    Vector v = x;
    double tk = 1.0;
    for (int it = 0; it < max_iter; ++it) {
        Vector next = v - t * grad(v);
        Vector slopes = next.tail(m);
        prox(slopes, t);
        next.tail(m) = slopes;
        const double tk1 = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        // Restart the momentum when it points uphill.
        if ((v - next).dot(next - x) > 0) {
            tk = 1.0;
            v = next;
        } else {
            v = next + ((tk - 1.0) / tk1) * (next - x);
            tk = tk1;
        }
        x_prev = x;
        x = next;
        if (it > 50 && (x - x_prev).lpNorm<Eigen::Infinity>() < 1e-14) break;
    }
    return Solution{x[0], x.tail(m)};
}

/// Maximizer of loglik - l1 |b|_1 - l2 / 2 |b|^2, optionally with b >= 0.
inline Solution elastic_net_oracle(const Matrix& X, const Labels& y, double l1, double l2,
                                   bool nonnegative) {
    return proximal_oracle(X, y, l2, [&](Vector& b, double t) {
        for (Index j = 0; j < b.size(); ++j) {
            double z = std::copysign(std::max(std::abs(b[j]) - t * l1, 0.0), b[j]);
            if (nonnegative) z = std::max(z, 0.0);
            b[j] = z;
        }
    });
}

/// Maximizer of loglik - lambda sum_g w_g |b_g|_2.
inline Solution group_lasso_oracle(const Matrix& X, const Labels& y,
                                   const std::vector<std::vector<Index>>& groups,
                                   const std::vector<double>& weights, double lambda) {
    return proximal_oracle(X, y, 0.0, [&](Vector& b, double t) {
        for (std::size_t g = 0; g < groups.size(); ++g) {
            double norm = 0.0;
            for (Index j : groups[g]) norm += b[j] * b[j];
            norm = std::sqrt(norm);
            const double thr = t * lambda * weights[g];
            const double scale = norm > thr ? 1.0 - thr / norm : 0.0;
            for (Index j : groups[g]) b[j] *= scale;
        }
    });
}

/// AUC by enumerating every (positive, negative) pair.
inline double brute_force_auc(const Vector& s, const Labels& y) {
    double hits = 0.0;
    long pairs = 0;
    for (Index i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (Index j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            ++pairs;
            if (s[i] > s[j])
                hits += 1.0;
            else if (s[i] == s[j])
                hits += 0.5;
        }
    }
    return hits / static_cast<double>(pairs);
}

inline double pearson(const Vector& a, const Vector& b) {
    const Vector ac = a.array() - a.mean();
    const Vector bc = b.array() - b.mean();
    return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const { return path_ + "/" + name; }

private:
    std::string path_;
};

}  // namespace support
