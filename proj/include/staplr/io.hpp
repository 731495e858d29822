#pragma once

#include "staplr/core.hpp"
#include "staplr/group_lasso.hpp"
#include "staplr/metrics.hpp"
#include "staplr/mvs.hpp"
#include "staplr/simulation.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace staplr {

inline constexpr int kSchemaVersion = 1;

/// Software version string baked in at build time.
std::string software_version();

// ---------------------------------------------------------------- CSV

/// Shortest decimal text that parses back to exactly `x`; "NA" for NaN.
std::string format_double(double x);
/// Parses a decimal number, accepting "NA"/"NaN" as NaN.  Throws ParseError.
double parse_double(const std::string& text);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    /// 1-based file line of every row, for error messages.
    std::vector<std::size_t> lines;
};

/// Comma-separated text with optional double-quoted fields.  Every row must
/// have as many fields as the first row.
CsvTable read_csv(const std::string& path, bool has_header = true);
void write_csv(const std::string& path, const CsvTable& table);

/// Rows as observations, the header as feature names.
struct FeatureTable {
    std::vector<std::string> names;
    Matrix values;
};

FeatureTable read_features_csv(const std::string& path);
void write_features_csv(const std::string& path, const std::vector<std::string>& names,
                        const Matrix& values);

/// One binary label per row.  A non-numeric first line is taken as a header.
Labels read_labels_csv(const std::string& path);
void write_labels_csv(const std::string& path, const Labels& y);

/// Single column of real scores; a non-numeric first line is a header.
Vector read_scores_csv(const std::string& path);
void write_scores_csv(const std::string& path, const std::string& column, const Vector& scores);

/// (feature, view) pairs in file order.  A first line equal to "feature,view"
/// is a header.
std::vector<std::pair<std::string, std::string>> read_viewmap_csv(const std::string& path);

struct LoadOptions {
    /// Features absent from the view map are dropped instead of rejected.
    bool drop_unmapped = false;
    /// Standardize every feature to zero mean and unit variance after loading.
    bool standardize = false;
};

/// Views appear in order of first mention in the view map, features within a
/// view in view-map order.
MultiViewDataset load_multiview_csv(const std::string& features_path,
                                    const std::string& labels_path,
                                    const std::string& viewmap_path,
                                    const LoadOptions& options = {});

/// Writes the three files read by load_multiview_csv.
void save_multiview_csv(const MultiViewDataset& data, const std::string& features_path,
                        const std::string& labels_path, const std::string& viewmap_path);

/// Assembles the views named in `view_names`/`feature_names` from a feature
/// table, selecting columns by name.  Labels are set to zero.
MultiViewDataset select_views(const FeatureTable& table,
                              const std::vector<std::string>& view_names,
                              const std::vector<std::vector<std::string>>& feature_names);

// ---------------------------------------------------------------- models

/// Group lasso fitted on concatenated views, one group per view.
struct GroupLassoModel {
    FittedLinearModel model;
    GroupStructure groups;
    std::vector<std::string> view_names;
    std::vector<std::vector<std::string>> feature_names;
};

GroupLassoModel fit_group_lasso_model(const MultiViewDataset& data, int K, std::uint64_t seed,
                                      int n_lambda = 100, const SolverSettings& settings = {});
Vector predict_group_lasso(const GroupLassoModel& model, const MultiViewDataset& data);
std::vector<int> selected_views(const GroupLassoModel& model);

/// A serialized model of either kind.
struct ModelDocument {
    std::optional<StackedModel> staplr;
    std::optional<GroupLassoModel> group_lasso;

    const std::vector<std::string>& view_names() const;
    const std::vector<std::vector<std::string>>& feature_names() const;
    Vector predict(const MultiViewDataset& data) const;
};

std::string model_to_json(const ModelDocument& model);
ModelDocument model_from_json(const std::string& text);
void save_model(const std::string& path, const ModelDocument& model);
ModelDocument load_model(const std::string& path);

// ---------------------------------------------------------------- experiments

std::string configs_to_json(const std::vector<SimulationConfig>& configs);
std::vector<SimulationConfig> configs_from_json(const std::string& text);

/// Tidy CSV, one row per replication x method.  Selected views are 1-based ids
/// separated by ';'.  Wall-times are not included so that reruns are
/// byte-identical.
std::string results_to_csv(const ExperimentResult& result);

/// SelectionRecords of all rows without an error.
std::vector<SelectionRecord> selection_records(const ExperimentResult& result);

/// Inclusion probabilities per signal-probability group, per condition and method.
std::string summary_to_json(const ExperimentResult& result);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

// ---------------------------------------------------------------- manifest

/// Provenance written next to every artifact.  Timestamps and wall-times live
/// only here.
class RunManifest {
public:
    RunManifest(std::string command, std::string config_text, std::uint64_t seed);

    void add_stage(const std::string& name, double seconds);
    void add_output(const std::string& path);
    /// FNV-1a 64 of the canonical config text, as 16 hex digits.
    std::string config_hash() const;
    std::string to_json() const;
    void write(const std::string& path) const;

private:
    std::string command_;
    std::string config_text_;
    std::uint64_t seed_;
    std::chrono::system_clock::time_point started_;
    std::vector<std::pair<std::string, double>> stages_;
    std::vector<std::string> outputs_;
};

std::string fnv1a_hex(const std::string& text);

// ---------------------------------------------------------------- evaluation

struct SplitRow {
    int repeat = 0;
    int fold = 0;
    Method method = Method::staplr_nn;
    double auc = 0.0;
    double accuracy = 0.0;
    std::size_t selected_views = 0;
    Index selected_features = 0;
    std::string error;
};

struct SplitProtocolOptions {
    int repeats = 50;
    int folds = 2;
    std::vector<Method> methods = {Method::staplr_nn, Method::staplr_unconstrained,
                                   Method::group_lasso};
    int K = 10;
    LearnerSpec base_spec = LearnerSpec::ridge_base();
    int threads = 1;
};

struct SplitProtocolResult {
    std::vector<SplitRow> rows;
    /// Per method, the share of fitted models that selected no view.
    std::vector<std::pair<Method, double>> fraction_zero_views;
    /// Repeats whose split could not be formed, with the reason.
    std::vector<std::pair<int, std::string>> skipped;
};

/// Repeatedly splits the rows into `folds` stratified parts; every method is
/// fit on all parts but one and evaluated on the held-out part.
SplitProtocolResult repeated_split_protocol(const MultiViewDataset& data,
                                            const SplitProtocolOptions& options,
                                            std::uint64_t seed);

std::string split_rows_to_csv(const SplitProtocolResult& result);

}  // namespace staplr
