#include "staplr/core.hpp"

#include "staplr/error.hpp"
#include "staplr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace staplr {

Matrix Standardization::apply(const Matrix& X) const {
    if (empty()) return X;
    if (X.cols() != means.size())
        throw InvalidArgument("standardization expects " + std::to_string(means.size()) +
                              " columns, got " + std::to_string(X.cols()));
    Matrix Z(X.rows(), X.cols());
    for (Index j = 0; j < X.cols(); ++j)
        Z.col(j) = (X.col(j).array() - means[j]) / scales[j];
    return Z;
}

Matrix Standardization::invert(const Matrix& Z) const {
    if (empty()) return Z;
    Matrix X(Z.rows(), Z.cols());
    for (Index j = 0; j < Z.cols(); ++j)
        X.col(j) = Z.col(j).array() * scales[j] + means[j];
    return X;
}

StandardizedMatrix standardize_columns(const Matrix& X, ConstantColumns policy) {
    const Index n = X.rows();
    if (n < 1) throw InvalidArgument("cannot standardize a matrix with no rows");
    StandardizedMatrix out;
    out.params.means.resize(X.cols());
    out.params.scales.resize(X.cols());
    out.values.resize(n, X.cols());
    for (Index j = 0; j < X.cols(); ++j) {
        const double mean = X.col(j).mean();
        const double var = (X.col(j).array() - mean).square().sum() / static_cast<double>(n);
        double sd = std::sqrt(var);
        // Treat columns whose spread is pure rounding noise as constant.
        const double floor = 1e-14 * std::max(1.0, std::abs(mean));
        if (!(sd > floor)) {
            if (policy == ConstantColumns::reject)
                throw ZeroVariance("column " + std::to_string(j) + " has zero variance");
            sd = 1.0;
        }
        out.params.means[j] = mean;
        out.params.scales[j] = sd;
        out.values.col(j) = (X.col(j).array() - mean) / sd;
    }
    return out;
}

MultiViewDataset::MultiViewDataset(std::vector<Matrix> views, Labels outcomes,
                                   std::vector<std::string> view_names,
                                   std::vector<std::vector<std::string>> feature_names)
    : views_(std::move(views)),
      outcomes_(std::move(outcomes)),
      view_names_(std::move(view_names)),
      feature_names_(std::move(feature_names)) {
    if (views_.empty()) throw InvalidArgument("dataset needs at least one view");
    const Index n = outcomes_.size();
    if (n < 1) throw InvalidArgument("dataset needs at least one row");
    for (std::size_t v = 0; v < views_.size(); ++v) {
        if (views_[v].rows() != n)
            throw InvalidArgument("view " + std::to_string(v + 1) + " has " +
                                  std::to_string(views_[v].rows()) + " rows, expected " +
                                  std::to_string(n));
        if (views_[v].cols() < 1)
            throw InvalidArgument("view " + std::to_string(v + 1) + " has no features");
        if (!views_[v].allFinite())
            throw InvalidArgument("view " + std::to_string(v + 1) + " has non-finite values");
    }
    require_binary(outcomes_);
    if (view_names_.empty())
        for (std::size_t v = 0; v < views_.size(); ++v)
            view_names_.push_back("view" + std::to_string(v + 1));
    if (view_names_.size() != views_.size())
        throw InvalidArgument("view name count does not match view count");
    if (feature_names_.empty()) {
        for (std::size_t v = 0; v < views_.size(); ++v) {
            std::vector<std::string> names;
            for (Index j = 0; j < views_[v].cols(); ++j)
                names.push_back(view_names_[v] + "_f" + std::to_string(j + 1));
            feature_names_.push_back(std::move(names));
        }
    }
    if (feature_names_.size() != views_.size())
        throw InvalidArgument("feature name lists do not match view count");
    for (std::size_t v = 0; v < views_.size(); ++v)
        if (static_cast<Index>(feature_names_[v].size()) != views_[v].cols())
            throw InvalidArgument("feature names of view " + std::to_string(v + 1) +
                                  " do not match its column count");
}

std::vector<Index> MultiViewDataset::view_sizes() const {
    std::vector<Index> sizes;
    for (const auto& X : views_) sizes.push_back(X.cols());
    return sizes;
}

Index MultiViewDataset::total_features() const {
    Index total = 0;
    for (const auto& X : views_) total += X.cols();
    return total;
}

Matrix MultiViewDataset::concatenated() const {
    Matrix X(n_rows(), total_features());
    Index offset = 0;
    for (const auto& V : views_) {
        X.middleCols(offset, V.cols()) = V;
        offset += V.cols();
    }
    return X;
}

std::vector<int> MultiViewDataset::feature_groups() const {
    std::vector<int> groups;
    for (std::size_t v = 0; v < views_.size(); ++v)
        groups.insert(groups.end(), static_cast<std::size_t>(views_[v].cols()),
                      static_cast<int>(v));
    return groups;
}

MultiViewDataset MultiViewDataset::subset_rows(std::span<const Index> rows) const {
    std::vector<Matrix> views;
    for (const auto& X : views_) views.push_back(select_rows(X, rows));
    return MultiViewDataset(std::move(views), select_rows(outcomes_, rows), view_names_,
                            feature_names_);
}

FoldPartition::FoldPartition(std::vector<int> assignments, int K)
    : assignments_(std::move(assignments)), K_(K) {
    if (K < 1) throw InvalidArgument("fold count must be positive");
    std::vector<Index> counts(static_cast<std::size_t>(K), 0);
    for (int a : assignments_) {
        if (a < 0 || a >= K) throw InvalidArgument("fold id out of range");
        ++counts[static_cast<std::size_t>(a)];
    }
    for (int k = 0; k < K; ++k)
        if (counts[static_cast<std::size_t>(k)] == 0)
            throw InvalidArgument("fold " + std::to_string(k + 1) + " is empty");
}

std::vector<Index> FoldPartition::members(int k) const {
    std::vector<Index> rows;
    for (std::size_t i = 0; i < assignments_.size(); ++i)
        if (assignments_[i] == k) rows.push_back(static_cast<Index>(i));
    return rows;
}

std::vector<Index> FoldPartition::complement(int k) const {
    std::vector<Index> rows;
    for (std::size_t i = 0; i < assignments_.size(); ++i)
        if (assignments_[i] != k) rows.push_back(static_cast<Index>(i));
    return rows;
}

Index FoldPartition::size(int k) const {
    return std::count(assignments_.begin(), assignments_.end(), k);
}

bool FoldPartition::equal_sized() const {
    const Index first = size(0);
    for (int k = 1; k < K_; ++k)
        if (size(k) != first) return false;
    return true;
}

FoldPartition FoldPartition::leave_one_out(Index n) {
    std::vector<int> a(static_cast<std::size_t>(n));
    std::iota(a.begin(), a.end(), 0);
    return FoldPartition(std::move(a), static_cast<int>(n));
}

FoldPartition make_folds(Index n, int K, std::uint64_t seed,
                         std::optional<std::span<const int>> stratify_labels) {
    if (K < 2) throw InvalidArgument("fold count K must be at least 2");
    if (K > n) throw InvalidArgument("fold count K=" + std::to_string(K) +
                                     " exceeds row count n=" + std::to_string(n));
    Rng rng(seed);
    std::vector<int> assignments(static_cast<std::size_t>(n), 0);
    if (!stratify_labels) {
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        for (std::size_t pos = 0; pos < order.size(); ++pos)
            assignments[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % K);
        return FoldPartition(std::move(assignments), K);
    }

    const auto labels = *stratify_labels;
    if (static_cast<Index>(labels.size()) != n)
        throw InvalidArgument("stratification labels must have length n");
    std::vector<Index> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw InvalidArgument("stratification labels must be binary");
        by_class[labels[i]].push_back(static_cast<Index>(i));
    }
    for (int c = 0; c < 2; ++c)
        if (static_cast<Index>(by_class[c].size()) < K)
            throw DegenerateStratification("class " + std::to_string(c) + " has " +
                                           std::to_string(by_class[c].size()) +
                                           " rows, fewer than K=" + std::to_string(K));
    // Continue dealing where the previous class stopped so total sizes stay balanced.
    std::size_t pos = 0;
    for (auto& members : by_class) {
        rng.shuffle(members);
        for (Index i : members) assignments[static_cast<std::size_t>(i)] = static_cast<int>(pos++ % K);
    }
    return FoldPartition(std::move(assignments), K);
}

std::string to_string(PenaltyFamily family) {
    switch (family) {
        case PenaltyFamily::lasso: return "lasso";
        case PenaltyFamily::ridge: return "ridge";
        case PenaltyFamily::elastic_net: return "elastic_net";
        case PenaltyFamily::group_lasso: return "group_lasso";
    }
    return "unknown";
}

PenaltyFamily penalty_family_from_string(const std::string& name) {
    if (name == "lasso") return PenaltyFamily::lasso;
    if (name == "ridge") return PenaltyFamily::ridge;
    if (name == "elastic_net") return PenaltyFamily::elastic_net;
    if (name == "group_lasso") return PenaltyFamily::group_lasso;
    throw InvalidArgument("unknown penalty family '" + name + "'");
}

PenaltySpec PenaltySpec::lasso(double lambda, bool nonnegative) {
    return {PenaltyFamily::lasso, 1.0, lambda, nonnegative, std::nullopt};
}

PenaltySpec PenaltySpec::ridge(double lambda, bool nonnegative) {
    return {PenaltyFamily::ridge, 0.0, lambda, nonnegative, std::nullopt};
}

PenaltySpec PenaltySpec::elastic_net(double alpha, double lambda, bool nonnegative) {
    PenaltySpec p{PenaltyFamily::elastic_net, alpha, lambda, nonnegative, std::nullopt};
    p.validate();
    return p;
}

PenaltySpec PenaltySpec::group(std::vector<int> group_map, double lambda) {
    return {PenaltyFamily::group_lasso, 0.0, lambda, false, std::move(group_map)};
}

double PenaltySpec::l1_share() const {
    switch (family) {
        case PenaltyFamily::lasso: return 1.0;
        case PenaltyFamily::ridge: return 0.0;
        case PenaltyFamily::elastic_net: return alpha;
        case PenaltyFamily::group_lasso: return 0.0;
    }
    return 0.0;
}

PenaltySpec PenaltySpec::with_lambda(double value) const {
    PenaltySpec p = *this;
    p.lambda = value;
    return p;
}

void PenaltySpec::validate(Index n_features) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw InvalidArgument("lambda must be a finite nonnegative number");
    if (family == PenaltyFamily::elastic_net && !(alpha > 0.0 && alpha < 1.0))
        throw InvalidArgument("elastic net alpha must lie in (0, 1)");
    if ((family == PenaltyFamily::group_lasso) != group_map.has_value())
        throw InvalidArgument("a group map is required for, and only for, the group lasso");
    if (group_map && n_features >= 0 && static_cast<Index>(group_map->size()) != n_features)
        throw InvalidArgument("group map does not cover every feature exactly once");
}

Vector FittedLinearModel::linear_predictor(const Matrix& X) const {
    if (X.cols() != coefficients.size())
        throw InvalidArgument("model expects " + std::to_string(coefficients.size()) +
                              " features, got " + std::to_string(X.cols()));
    Vector eta = Vector::Constant(X.rows(), intercept);
    if (coefficients.size() == 0) return eta;
    if (standardization.empty()) {
        eta.noalias() += X * coefficients;
    } else {
        // Fold the scaling into the coefficients instead of copying X.
        const Vector b = coefficients.cwiseQuotient(standardization.scales);
        eta.array() -= standardization.means.dot(b);
        eta.noalias() += X * b;
    }
    return eta;
}

void require_binary(const Labels& y) {
    for (Index i = 0; i < y.size(); ++i)
        if (y[i] != 0 && y[i] != 1)
            throw InvalidArgument("label at row " + std::to_string(i + 1) + " is " +
                                  std::to_string(y[i]) + ", expected 0 or 1");
}

void require_both_classes(const Labels& y, const std::string& context) {
    const Index ones = y.sum();
    if (ones == 0 || ones == y.size())
        throw DegenerateOutcome((context.empty() ? std::string() : context + ": ") +
                                "outcome has a single class");
}

Matrix select_rows(const Matrix& X, std::span<const Index> rows) {
    Matrix out(static_cast<Index>(rows.size()), X.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = X.row(rows[r]);
    return out;
}

Labels select_rows(const Labels& y, std::span<const Index> rows) {
    Labels out(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Index>(r)] = y[rows[r]];
    return out;
}

}  // namespace staplr
