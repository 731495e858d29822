#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace staplr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = Eigen::VectorXi;
using Index = Eigen::Index;

/// Column centering and scaling learned on training data.  An empty
/// Standardization is the identity.
struct Standardization {
    Vector means;
    Vector scales;

    bool empty() const { return means.size() == 0; }
    Matrix apply(const Matrix& X) const;
    Matrix invert(const Matrix& Z) const;
};

struct StandardizedMatrix {
    Matrix values;
    Standardization params;
};

enum class ConstantColumns { reject, passthrough };

/// Centers each column and divides by its population (n-denominator) standard
/// deviation.  With ConstantColumns::passthrough a constant column is centered
/// and given scale 1, i.e. it becomes all zeros.
StandardizedMatrix standardize_columns(const Matrix& X,
                                       ConstantColumns policy = ConstantColumns::reject);

/// V feature blocks measured on the same n observations plus binary outcomes.
class MultiViewDataset {
public:
    MultiViewDataset(std::vector<Matrix> views, Labels outcomes,
                     std::vector<std::string> view_names = {},
                     std::vector<std::vector<std::string>> feature_names = {});

    Index n_rows() const { return outcomes_.size(); }
    std::size_t n_views() const { return views_.size(); }
    const Matrix& view(std::size_t v) const { return views_.at(v); }
    const std::vector<Matrix>& views() const { return views_; }
    const Labels& outcomes() const { return outcomes_; }
    const std::vector<std::string>& view_names() const { return view_names_; }
    const std::vector<std::string>& feature_names(std::size_t v) const {
        return feature_names_.at(v);
    }
    std::vector<Index> view_sizes() const;
    Index total_features() const;

    /// All views side by side, in view order.
    Matrix concatenated() const;
    /// View index of every column of concatenated().
    std::vector<int> feature_groups() const;

    MultiViewDataset subset_rows(std::span<const Index> rows) const;

private:
    std::vector<Matrix> views_;
    Labels outcomes_;
    std::vector<std::string> view_names_;
    std::vector<std::vector<std::string>> feature_names_;
};

/// Assignment of n rows to K folds.  Fold ids are 0-based in the API and
/// 1-based in serialized documents.
class FoldPartition {
public:
    FoldPartition(std::vector<int> assignments, int K);

    Index n() const { return static_cast<Index>(assignments_.size()); }
    int K() const { return K_; }
    int fold_of(Index i) const { return assignments_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& assignments() const { return assignments_; }

    std::vector<Index> members(int k) const;
    std::vector<Index> complement(int k) const;
    Index size(int k) const;
    bool equal_sized() const;

    static FoldPartition leave_one_out(Index n);

private:
    std::vector<int> assignments_;
    int K_;
};

/// Shuffles 0..n-1 with a seeded generator and deals round-robin into K folds.
/// With stratify_labels, each class is shuffled and dealt separately so that
/// class counts per fold differ by at most one.
FoldPartition make_folds(Index n, int K, std::uint64_t seed,
                         std::optional<std::span<const int>> stratify_labels = std::nullopt);

enum class PenaltyFamily { lasso, ridge, elastic_net, group_lasso };

std::string to_string(PenaltyFamily family);
PenaltyFamily penalty_family_from_string(const std::string& name);

/// Penalty of the form lambda * (alpha * |b|_1 + (1 - alpha) / 2 * |b|_2^2), or
/// lambda * sum_g w_g |b_g|_2 for the group family.
struct PenaltySpec {
    PenaltyFamily family = PenaltyFamily::ridge;
    double alpha = 0.0;
    double lambda = 0.0;
    bool nonnegative = false;
    std::optional<std::vector<int>> group_map;

    static PenaltySpec lasso(double lambda, bool nonnegative = false);
    static PenaltySpec ridge(double lambda, bool nonnegative = false);
    static PenaltySpec elastic_net(double alpha, double lambda, bool nonnegative = false);
    static PenaltySpec group(std::vector<int> group_map, double lambda);

    /// Share of the penalty that is L1: 1 for lasso, 0 for ridge.
    double l1_share() const;
    PenaltySpec with_lambda(double value) const;
    void validate(Index n_features = -1) const;
};

/// Intercept plus coefficients on the (possibly standardized) training scale.
struct FittedLinearModel {
    double intercept = 0.0;
    Vector coefficients;
    PenaltySpec penalty;
    bool converged = true;
    int n_iterations = 0;
    Standardization standardization;

    Index n_features() const { return coefficients.size(); }
    /// beta0 + x^T beta after applying the stored standardization.
    Vector linear_predictor(const Matrix& X) const;
};

/// Logistic sigmoid that stays accurate for large |eta|.
inline double inverse_logit(double eta) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

/// Checks that labels are all 0/1, throwing InvalidArgument otherwise.
void require_binary(const Labels& y);
/// Throws DegenerateOutcome when only one class is present.
void require_both_classes(const Labels& y, const std::string& context = {});

Matrix select_rows(const Matrix& X, std::span<const Index> rows);
Labels select_rows(const Labels& y, std::span<const Index> rows);

}  // namespace staplr
