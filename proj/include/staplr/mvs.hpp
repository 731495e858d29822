#pragma once

#include "staplr/core.hpp"
#include "staplr/cv.hpp"

#include <cstdint>
#include <vector>

namespace staplr {

/// Output of the per-view level: full-data base models and the n x V matrix of
/// cross-validated base predictions.
struct BaseLevelFit {
    std::vector<FittedLinearModel> base_models;
    std::vector<LearnerSpec> base_specs;
    Matrix z_matrix;
    FoldPartition fold_partition;
    std::uint64_t seed = 0;
};

/// Two-level multi-view stack with one base learner per view.
struct StackedModel {
    std::vector<FittedLinearModel> base_models;
    FittedLinearModel meta_model;
    Matrix z_matrix;
    FoldPartition fold_partition;
    std::vector<LearnerSpec> base_specs;
    LearnerSpec meta_spec;
    std::uint64_t seed = 0;
    std::vector<std::string> view_names;
    std::vector<std::vector<std::string>> feature_names;
};

/// Fits one base learner per view on all rows and builds the cross-validated
/// prediction matrix over a K-fold partition drawn from `seed`.  Views are
/// processed on up to `threads` workers; results do not depend on the count.
BaseLevelFit fit_base_level(const MultiViewDataset& data, const std::vector<LearnerSpec>& base_specs,
                            int K, std::uint64_t seed, int threads = 1);

/// Trains the combiner on the cross-validated predictions (inputs not standardized).
StackedModel fit_meta_level(const BaseLevelFit& base, const MultiViewDataset& data,
                            const LearnerSpec& meta_spec);

/// Full stacked fit.  The defaults give ridge per view and a lasso combiner.
StackedModel fit_staplr(const MultiViewDataset& data,
                        const LearnerSpec& base_spec = LearnerSpec::ridge_base(),
                        const LearnerSpec& meta_spec = LearnerSpec::lasso_meta(true), int K = 10,
                        std::uint64_t seed = 1, int threads = 1);

/// Per-view base specs, e.g. to force individual views to intercept-only models.
StackedModel fit_staplr(const MultiViewDataset& data, const std::vector<LearnerSpec>& base_specs,
                        const LearnerSpec& meta_spec, int K, std::uint64_t seed, int threads = 1);

/// n x V matrix of full-data base predictions for new rows.
Matrix base_predictions(const StackedModel& model, const MultiViewDataset& data);

Vector predict_stacked(const StackedModel& model, const MultiViewDataset& data);

/// 0-based ids of views with a nonzero combiner coefficient.
std::vector<int> selected_views(const StackedModel& model);

/// Nonzero base coefficients summed over the selected views.
Index selected_feature_count(const StackedModel& model);

}  // namespace staplr
