#pragma once

#include "staplr/core.hpp"
#include "staplr/cv.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace staplr {

enum class BetaRule { fixed, inverse_sqrt_view_size };

/// Generative parameters of one simulation condition.
struct SimulationConfig {
    std::string name;
    Index n = 200;
    std::vector<Index> view_sizes;
    double rho_w = 0.0;
    double rho_b = 0.0;
    std::vector<double> signal_probs;
    BetaRule beta_rule = BetaRule::fixed;
    double beta_magnitude = 0.04;
    double intercept = 0.0;
    std::uint64_t seed = 1;
    int replications = 100;
    Index test_n = 0;

    std::size_t n_views() const { return view_sizes.size(); }
    Index total_features() const;
    void validate() const;
};

struct GroundTruth {
    Vector beta;
    double intercept = 0.0;
    std::vector<bool> signal_mask;
    std::vector<bool> view_has_signal;
};

/// Block-correlated standard normal features, one matrix per view:
/// x = sqrt(rho_b) g + sqrt(rho_w - rho_b) h_v + sqrt(1 - rho_w) e, then every
/// column standardized in-sample.
std::vector<Matrix> gen_block_gaussian(const SimulationConfig& config, Index n, std::uint64_t seed);

/// Draws which features carry signal (Bernoulli(signal prob of the view)) and
/// their signs; magnitudes follow the beta rule.
GroundTruth draw_ground_truth(const SimulationConfig& config, std::uint64_t seed);

/// y_i ~ Bernoulli(1 / (1 + exp(-b0 - beta^T x_i))).
Labels draw_outcome(const std::vector<Matrix>& views, const GroundTruth& truth, std::uint64_t seed);

struct GeneratedOutcome {
    Labels y;
    GroundTruth truth;
};

/// Ground truth and outcome from one seed.
GeneratedOutcome gen_outcome(const std::vector<Matrix>& views, const SimulationConfig& config,
                             std::uint64_t seed);

/// Presets "main", "sample_sweep" and "view_size_sweep" at full size.
std::vector<SimulationConfig> preset_configs(const std::string& name, std::uint64_t seed = 1);

/// Shrinks view sizes and replication counts by `scale` (0 < scale <= 1).  Fixed
/// effect sizes grow by sqrt(original / scaled size) so that the L2 signal per
/// view is preserved.
std::vector<SimulationConfig> scale_configs(std::vector<SimulationConfig> configs, double scale);

/// Training data, optional test set and ground truth of one replication, drawn
/// from the replication's own sub-stream (see run_experiment).
struct SimulatedReplication {
    std::vector<Matrix> views;
    Labels y;
    std::vector<Matrix> test_views;
    Labels test_y;
    GroundTruth truth;
    std::uint64_t seed = 0;
};

SimulatedReplication simulate_replication(const SimulationConfig& config, int replication);

enum class Method { staplr_nn, staplr_unconstrained, group_lasso };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct ExperimentOptions {
    std::vector<Method> methods = {Method::staplr_nn, Method::staplr_unconstrained,
                                   Method::group_lasso};
    int workers = 1;
    int K = 10;
    LearnerSpec base_spec = LearnerSpec::ridge_base();
    /// Overrides each config's replication count when set.
    std::optional<int> replications;
};

struct ExperimentRow {
    std::size_t condition = 0;
    std::string condition_name;
    int replication = 0;
    Method method = Method::staplr_nn;
    std::vector<int> selected_views;
    Index selected_features = 0;
    /// NaN without a test set.
    double auc = 0.0;
    double accuracy = 0.0;
    double fit_seconds = 0.0;
    std::string error;
};

struct ExperimentResult {
    std::vector<SimulationConfig> configs;
    /// Ordered by (condition, replication, method).
    std::vector<ExperimentRow> rows;
    /// truths[c][r] for condition c, replication r.
    std::vector<std::vector<GroundTruth>> truths;
};

/// Runs every replication of every condition on a worker pool.  Replication r
/// of a condition draws all randomness from derive_seed(config.seed,
/// {replication stream, hash(config.name), r}), so results do not depend on
/// the worker count or on which other conditions are run.  Condition names
/// must be unique.
ExperimentResult run_experiment(const std::vector<SimulationConfig>& configs,
                                const ExperimentOptions& options);

}  // namespace staplr
