#include "staplr/mvs.hpp"

#include "staplr/error.hpp"
#include "staplr/parallel.hpp"
#include "staplr/rng.hpp"

namespace staplr {

namespace {

[[noreturn]] void rethrow_for_view(const Error& e, const std::string& view) {
    throw Error(e.kind(), "view '" + view + "': " + e.what());
}

}  // namespace

BaseLevelFit fit_base_level(const MultiViewDataset& data, const std::vector<LearnerSpec>& base_specs,
                            int K, std::uint64_t seed, int threads) {
    const std::size_t V = data.n_views();
    if (base_specs.size() != V)
        throw InvalidArgument("expected " + std::to_string(V) + " base learner specs, got " +
                              std::to_string(base_specs.size()));
    const Labels& y = data.outcomes();
    require_both_classes(y);
    for (const auto& spec : base_specs) spec.validate();

    FoldPartition folds = make_folds(data.n_rows(), K, derive_seed(seed, {stream::outer_folds}));
    std::vector<FittedLinearModel> models(V);
    Matrix Z(data.n_rows(), static_cast<Index>(V));

    // Every view tunes over the same folds, so permuting views permutes Z.
    const std::uint64_t tuning_seed = derive_seed(seed, {stream::tuning_folds});
    parallel_for(V, threads, [&](std::size_t v) {
        try {
            models[v] = train_learner(data.view(v), y, base_specs[v], tuning_seed).model;
            Z.col(static_cast<Index>(v)) =
                cv_predictor(data.view(v), y, base_specs[v], folds, tuning_seed);
        } catch (const Error& e) {
            rethrow_for_view(e, data.view_names()[v]);
        }
    });
    return BaseLevelFit{std::move(models), base_specs, std::move(Z), std::move(folds), seed};
}

StackedModel fit_meta_level(const BaseLevelFit& base, const MultiViewDataset& data,
                            const LearnerSpec& meta_spec) {
    if (meta_spec.standardize)
        throw InvalidArgument("the combiner works on unstandardized base predictions");
    TrainedLearner meta = train_learner(base.z_matrix, data.outcomes(), meta_spec,
                                        derive_seed(base.seed, {stream::meta_folds}));
    StackedModel model{base.base_models,
                       std::move(meta.model),
                       base.z_matrix,
                       base.fold_partition,
                       base.base_specs,
                       meta_spec,
                       base.seed,
                       data.view_names(),
                       {}};
    for (std::size_t v = 0; v < data.n_views(); ++v)
        model.feature_names.push_back(data.feature_names(v));
    return model;
}

StackedModel fit_staplr(const MultiViewDataset& data, const LearnerSpec& base_spec,
                        const LearnerSpec& meta_spec, int K, std::uint64_t seed, int threads) {
    return fit_staplr(data, std::vector<LearnerSpec>(data.n_views(), base_spec), meta_spec, K, seed,
                      threads);
}

StackedModel fit_staplr(const MultiViewDataset& data, const std::vector<LearnerSpec>& base_specs,
                        const LearnerSpec& meta_spec, int K, std::uint64_t seed, int threads) {
    meta_spec.validate();
    return fit_meta_level(fit_base_level(data, base_specs, K, seed, threads), data, meta_spec);
}

Matrix base_predictions(const StackedModel& model, const MultiViewDataset& data) {
    const std::size_t V = model.base_models.size();
    if (data.n_views() != V)
        throw InvalidArgument("model has " + std::to_string(V) + " views, data has " +
                              std::to_string(data.n_views()));
    Matrix Z(data.n_rows(), static_cast<Index>(V));
    for (std::size_t v = 0; v < V; ++v) {
        const auto& X = data.view(v);
        if (X.cols() != model.base_models[v].n_features())
            throw InvalidArgument("view '" + model.view_names[v] + "' has " +
                                  std::to_string(X.cols()) + " features, model expects " +
                                  std::to_string(model.base_models[v].n_features()));
        Z.col(static_cast<Index>(v)) = learner_predict(model.base_models[v], X, model.base_specs[v].link);
    }
    return Z;
}

Vector predict_stacked(const StackedModel& model, const MultiViewDataset& data) {
    return learner_predict(model.meta_model, base_predictions(model, data), model.meta_spec.link);
}

std::vector<int> selected_views(const StackedModel& model) {
    std::vector<int> out;
    for (Index v = 0; v < model.meta_model.coefficients.size(); ++v)
        if (model.meta_model.coefficients[v] != 0.0) out.push_back(static_cast<int>(v));
    return out;
}

Index selected_feature_count(const StackedModel& model) {
    Index count = 0;
    for (int v : selected_views(model)) {
        const auto& b = model.base_models[static_cast<std::size_t>(v)].coefficients;
        count += (b.array() != 0.0).count();
    }
    return count;
}

}  // namespace staplr
