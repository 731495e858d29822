#pragma once

#include "staplr/core.hpp"
#include "staplr/penalized_glm.hpp"

#include <vector>

namespace staplr {

/// Disjoint feature groups with positive penalty weights.
struct GroupStructure {
    std::vector<std::vector<Index>> groups;
    std::vector<double> weights;

    /// Builds groups from a feature -> group id map (ids 0..G-1), with weights
    /// sqrt(group size) unless unit_weights is set.
    static GroupStructure from_map(const std::vector<int>& group_map, bool unit_weights = false);

    std::size_t n_groups() const { return groups.size(); }
    std::vector<int> to_map(Index n_features) const;
    /// Throws InvalidArgument unless the groups partition 0..n_features-1.
    void validate(Index n_features) const;
};

/// Maximizes (1/n) loglik - lambda * sum_g w_g |beta_g|_2 by IRLS with
/// block-wise majorized proximal updates.
FittedLinearModel fit_group_lasso(const Matrix& X, const Labels& y, const GroupStructure& groups,
                                  double lambda, const SolverSettings& settings = {},
                                  const FitOptions& options = {});

std::vector<FittedLinearModel> fit_group_lasso_path(const Matrix& X, const Labels& y,
                                                    const GroupStructure& groups,
                                                    const LambdaPath& path,
                                                    const SolverSettings& settings = {},
                                                    bool standardize = true);

/// lambda_max = max_g |X_g^T (y - ybar)|_2 / (n w_g).
LambdaPath group_lambda_path(const Matrix& X, const Labels& y, const GroupStructure& groups,
                             int n_lambda = 100, double epsilon = -1.0);

/// Group ids (0-based, ascending) whose coefficient block is nonzero.
std::vector<int> selected_groups(const FittedLinearModel& model, const GroupStructure& groups);

double group_lasso_objective(const Matrix& X, const Labels& y, double intercept,
                             const Vector& beta, const GroupStructure& groups, double lambda);

double group_lasso_kkt_residual(const Matrix& X, const Labels& y, double intercept,
                                const Vector& beta, const GroupStructure& groups, double lambda);

}  // namespace staplr
