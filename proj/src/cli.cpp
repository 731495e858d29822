#include "staplr/cli.hpp"

#include "staplr/error.hpp"
#include "staplr/io.hpp"
#include "staplr/metrics.hpp"
#include "staplr/mvs.hpp"
#include "staplr/simulation.hpp"
#include "staplr/theory.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace staplr {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> out;
    for (const auto& name : names) {
        const Method m = method_from_string(name);
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    if (out.empty()) throw InvalidArgument("at least one method is required");
    return out;
}

std::string join_path(const std::string& dir, const std::string& file) {
    return (fs::path(dir) / file).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InvalidArgument("cannot create directory '" + dir + "': " + ec.message());
}

struct DataFlags {
    std::string features;
    std::string labels;
    std::string viewmap;
    bool drop_unmapped = false;
    bool standardize = false;

    void add(CLI::App* app) {
        app->add_option("--features", features, "Features CSV with a header row")->required();
        app->add_option("--labels", labels, "Labels CSV, one 0/1 value per row")->required();
        app->add_option("--viewmap", viewmap, "View map CSV of feature,view pairs")->required();
        app->add_flag("--drop-unmapped", drop_unmapped, "Drop features absent from the view map");
        app->add_flag("--standardize", standardize,
                      "Standardize every feature to zero mean and unit variance on load");
    }

    MultiViewDataset load() const {
        LoadOptions options;
        options.drop_unmapped = drop_unmapped;
        options.standardize = standardize;
        return load_multiview_csv(features, labels, viewmap, options);
    }

    json describe() const {
        return {{"features", features},
                {"labels", labels},
                {"viewmap", viewmap},
                {"drop_unmapped", drop_unmapped},
                {"standardize", standardize}};
    }
};

std::vector<SimulationConfig> resolve_configs(const std::string& preset, const std::string& config,
                                              double scale, std::optional<std::uint64_t> seed) {
    if (preset.empty() == config.empty())
        throw InvalidArgument("give exactly one of --preset or --config");
    auto configs = preset.empty() ? configs_from_json(read_text(config)) : preset_configs(preset);
    configs = scale_configs(std::move(configs), scale);
    if (seed)
        for (auto& c : configs) c.seed = *seed;
    return configs;
}

// ---------------------------------------------------------------- commands

int cmd_simulate(const std::string& preset, const std::string& config, const std::string& condition,
                 double scale, int replication, std::optional<std::uint64_t> seed,
                 const std::string& out_dir, std::ostream& out) {
    const auto start = Clock::now();
    const auto configs = resolve_configs(preset, config, scale, seed);
    const SimulationConfig* chosen = &configs.front();
    if (!condition.empty()) {
        const auto it = std::find_if(configs.begin(), configs.end(),
                                     [&](const SimulationConfig& c) { return c.name == condition; });
        if (it == configs.end()) throw InvalidArgument("no condition named '" + condition + "'");
        chosen = &*it;
    }
    if (replication < 1) throw InvalidArgument("--replication is 1-based");
    const auto sim = simulate_replication(*chosen, replication - 1);
    ensure_dir(out_dir);

    RunManifest manifest("simulate", configs_to_json({*chosen}), chosen->seed);
    const MultiViewDataset train(sim.views, sim.y);
    save_multiview_csv(train, join_path(out_dir, "features.csv"), join_path(out_dir, "labels.csv"),
                       join_path(out_dir, "viewmap.csv"));
    for (const char* f : {"features.csv", "labels.csv", "viewmap.csv"})
        manifest.add_output(join_path(out_dir, f));
    if (chosen->test_n > 0) {
        const MultiViewDataset test(sim.test_views, sim.test_y);
        std::vector<std::string> names;
        for (std::size_t v = 0; v < test.n_views(); ++v)
            for (const auto& f : test.feature_names(v)) names.push_back(f);
        write_features_csv(join_path(out_dir, "test_features.csv"), names, test.concatenated());
        write_labels_csv(join_path(out_dir, "test_labels.csv"), test.outcomes());
        manifest.add_output(join_path(out_dir, "test_features.csv"));
        manifest.add_output(join_path(out_dir, "test_labels.csv"));
    }
    json truth = {{"schema_version", kSchemaVersion},
                  {"condition", chosen->name},
                  {"replication", replication},
                  {"intercept", sim.truth.intercept},
                  {"beta", std::vector<double>(sim.truth.beta.data(),
                                               sim.truth.beta.data() + sim.truth.beta.size())},
                  {"view_has_signal", sim.truth.view_has_signal},
                  {"signal_probs", chosen->signal_probs}};
    write_text(join_path(out_dir, "truth.json"), truth.dump(1) + "\n");
    manifest.add_output(join_path(out_dir, "truth.json"));
    manifest.add_stage("simulate", seconds_since(start));
    manifest.write(join_path(out_dir, "manifest.json"));
    out << "wrote replication " << replication << " of '" << chosen->name << "' to " << out_dir
        << "\n";
    return 0;
}

struct FitFlags {
    DataFlags data;
    std::string method = "staplr";
    bool nonneg = true;
    int k_folds = 10;
    int n_lambda = 100;
    std::uint64_t seed = 1;
    int threads = 0;
    std::string out;
    std::string manifest;
};

int cmd_fit(const FitFlags& f, std::ostream& out) {
    if (f.k_folds < 2) throw InvalidArgument("--k-folds must be at least 2");
    if (f.n_lambda < 1) throw InvalidArgument("--n-lambda must be positive");
    json config = {{"command", "fit"},
                   {"data", f.data.describe()},
                   {"method", f.method},
                   {"nonneg", f.nonneg},
                   {"k_folds", f.k_folds},
                   {"n_lambda", f.n_lambda}};
    RunManifest manifest("fit", config.dump(), f.seed);
    auto start = Clock::now();
    const MultiViewDataset data = f.data.load();
    manifest.add_stage("load", seconds_since(start));

    start = Clock::now();
    ModelDocument doc;
    std::size_t n_selected = 0;
    if (f.method == "staplr") {
        LearnerSpec base = LearnerSpec::ridge_base();
        base.n_lambda = f.n_lambda;
        base.K = f.k_folds;
        LearnerSpec meta = LearnerSpec::lasso_meta(f.nonneg);
        meta.n_lambda = f.n_lambda;
        meta.K = f.k_folds;
        doc.staplr = fit_staplr(data, base, meta, f.k_folds, f.seed, f.threads);
        n_selected = selected_views(*doc.staplr).size();
    } else if (f.method == "group_lasso") {
        doc.group_lasso = fit_group_lasso_model(data, f.k_folds, f.seed, f.n_lambda);
        n_selected = selected_views(*doc.group_lasso).size();
    } else {
        throw InvalidArgument("unknown method '" + f.method + "' (expected staplr or group_lasso)");
    }
    manifest.add_stage("fit", seconds_since(start));
    save_model(f.out, doc);
    manifest.add_output(f.out);
    manifest.write(f.manifest.empty() ? f.out + ".manifest.json" : f.manifest);
    out << "fitted " << f.method << " on " << data.n_rows() << " rows and " << data.n_views()
        << " views; " << n_selected << " views selected; model written to " << f.out << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& features,
                const std::string& out_path, std::ostream& out) {
    const ModelDocument doc = load_model(model_path);
    const FeatureTable table = read_features_csv(features);
    const MultiViewDataset data = select_views(table, doc.view_names(), doc.feature_names());
    const Vector p = doc.predict(data);
    if (out_path.empty() || out_path == "-") {
        out << "probability\n";
        for (Index i = 0; i < p.size(); ++i) out << format_double(p[i]) << "\n";
    } else {
        write_scores_csv(out_path, "probability", p);
    }
    return 0;
}

int cmd_evaluate(const std::string& scores_path, const std::string& labels_path, double cutoff,
                 const std::string& out_path, std::ostream& out) {
    const Vector s = read_scores_csv(scores_path);
    const Labels y = read_labels_csv(labels_path);
    if (s.size() != y.size())
        throw InvalidArgument(scores_path + " has " + std::to_string(s.size()) + " scores but " +
                              labels_path + " has " + std::to_string(y.size()) + " labels");
    json j = {{"schema_version", kSchemaVersion},
              {"n", s.size()},
              {"positives", y.sum()},
              {"cutoff", cutoff},
              {"accuracy", accuracy(s, y, cutoff)},
              {"auc", auc(s, y)}};
    const std::string text = j.dump(1) + "\n";
    if (out_path.empty() || out_path == "-")
        out << text;
    else
        write_text(out_path, text);
    return 0;
}

struct ExperimentFlags {
    std::string preset;
    std::string config;
    double scale = 1.0;
    std::optional<int> replications;
    std::vector<std::string> methods = {"staplr_nn", "staplr_unconstrained", "group_lasso"};
    int threads = 0;
    int k_folds = 10;
    int n_lambda = 100;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

int cmd_experiment(const ExperimentFlags& f, std::ostream& out) {
    auto start = Clock::now();
    const auto configs = resolve_configs(f.preset, f.config, f.scale, f.seed);
    ExperimentOptions options;
    options.methods = parse_methods(f.methods);
    options.workers = f.threads;
    options.K = f.k_folds;
    options.base_spec.K = f.k_folds;
    options.base_spec.n_lambda = f.n_lambda;
    options.replications = f.replications;

    std::vector<SimulationConfig> resolved = configs;
    if (f.replications)
        for (auto& c : resolved) c.replications = *f.replications;
    const std::string config_text = configs_to_json(resolved);
    json run = {{"methods", f.methods}, {"k_folds", f.k_folds}, {"n_lambda", f.n_lambda}};
    RunManifest manifest("experiment", config_text + run.dump(), configs.front().seed);
    manifest.add_stage("configure", seconds_since(start));

    start = Clock::now();
    const ExperimentResult result = run_experiment(configs, options);
    manifest.add_stage("run", seconds_since(start));
    double fit_total = 0.0;
    for (const auto& row : result.rows) fit_total += row.fit_seconds;
    manifest.add_stage("fit_total_cpu", fit_total);
    for (Method m : options.methods) {
        double t = 0.0;
        for (const auto& row : result.rows)
            if (row.method == m) t += row.fit_seconds;
        manifest.add_stage("fit_" + to_string(m), t);
    }

    ensure_dir(f.out_dir);
    const std::string results = join_path(f.out_dir, "results.csv");
    const std::string summary = join_path(f.out_dir, "summary.json");
    const std::string config = join_path(f.out_dir, "config.json");
    write_text(results, results_to_csv(result));
    write_text(summary, summary_to_json(result));
    write_text(config, config_text);
    for (const auto& p : {results, summary, config}) manifest.add_output(p);
    manifest.write(join_path(f.out_dir, "manifest.json"));

    std::size_t failed = 0;
    for (const auto& row : result.rows) failed += row.error.empty() ? 0 : 1;
    out << "ran " << result.configs.size() << " conditions, " << result.rows.size()
        << " fits (" << failed << " failed); results in " << f.out_dir << "\n";
    return 0;
}

int cmd_verify_lemmas(int trials, std::uint64_t seed, std::ostream& out) {
    if (trials < 1) throw InvalidArgument("--trials must be positive");
    const auto checks = theory::run_lemma_checks(trials, seed);
    bool ok = true;
    json list = json::array();
    for (const auto& c : checks) {
        ok = ok && c.ok();
        list.push_back({{"check", c.name},
                        {"trials", c.trials},
                        {"passed", c.passed},
                        {"max_error", c.max_error},
                        {"tolerance", c.tolerance},
                        {"ok", c.ok()}});
    }
    json j = {{"schema_version", kSchemaVersion}, {"seed", seed}, {"ok", ok}, {"checks", list}};
    out << j.dump(1) << "\n";
    return ok ? 0 : 1;
}

struct SplitFlags {
    DataFlags data;
    int repeats = 50;
    int folds = 2;
    std::vector<std::string> methods = {"staplr_nn", "staplr_unconstrained", "group_lasso"};
    int k_folds = 10;
    int n_lambda = 100;
    std::uint64_t seed = 1;
    int threads = 0;
    std::string out_dir;
};

int cmd_repeated_split(const SplitFlags& f, std::ostream& out) {
    json config = {{"command", "repeated-split"},
                   {"data", f.data.describe()},
                   {"repeats", f.repeats},
                   {"folds", f.folds},
                   {"methods", f.methods},
                   {"k_folds", f.k_folds},
                   {"n_lambda", f.n_lambda}};
    RunManifest manifest("repeated-split", config.dump(), f.seed);
    auto start = Clock::now();
    const MultiViewDataset data = f.data.load();
    manifest.add_stage("load", seconds_since(start));

    SplitProtocolOptions options;
    options.repeats = f.repeats;
    options.folds = f.folds;
    options.methods = parse_methods(f.methods);
    options.K = f.k_folds;
    options.base_spec.K = f.k_folds;
    options.base_spec.n_lambda = f.n_lambda;
    options.threads = f.threads;
    start = Clock::now();
    const auto result = repeated_split_protocol(data, options, f.seed);
    manifest.add_stage("evaluate", seconds_since(start));

    ensure_dir(f.out_dir);
    const std::string rows = join_path(f.out_dir, "splits.csv");
    const std::string summary = join_path(f.out_dir, "summary.json");
    write_text(rows, split_rows_to_csv(result));
    json zero = json::object();
    for (const auto& [m, frac] : result.fraction_zero_views)
        zero[to_string(m)] = std::isnan(frac) ? json(nullptr) : json(frac);
    json skipped = json::array();
    for (const auto& [r, why] : result.skipped) skipped.push_back({{"repeat", r + 1}, {"reason", why}});
    json s = {{"schema_version", kSchemaVersion},
              {"fraction_selecting_no_views", zero},
              {"skipped_repeats", skipped}};
    write_text(summary, s.dump(1) + "\n");
    manifest.add_output(rows);
    manifest.add_output(summary);
    manifest.write(join_path(f.out_dir, "manifest.json"));
    out << "evaluated " << result.rows.size() << " fits; results in " << f.out_dir << "\n";
    return 0;
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message) {
    err << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stacked penalized logistic regression for multi-view data", "staplr"};
    app.require_subcommand(1);
    app.set_version_flag("--version", software_version());

    // simulate
    auto* sim = app.add_subcommand("simulate", "Write one simulated dataset as CSV files");
    std::string sim_preset, sim_config, sim_condition, sim_out;
    double sim_scale = 1.0;
    int sim_replication = 1;
    std::optional<std::uint64_t> sim_seed;
    sim->add_option("--preset", sim_preset, "main, sample_sweep or view_size_sweep");
    sim->add_option("--config", sim_config, "Experiment config JSON");
    sim->add_option("--condition", sim_condition, "Condition name (default: the first)");
    sim->add_option("--scale", sim_scale, "Shrink view sizes by this factor")->check(CLI::Range(0.0, 1.0));
    sim->add_option("--replication", sim_replication, "1-based replication index");
    sim->add_option("--seed", sim_seed, "Override the configured seed");
    sim->add_option("--out-dir", sim_out, "Output directory")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "Fit StaPLR or the group lasso on CSV inputs");
    FitFlags fit_flags;
    fit_flags.data.add(fit);
    fit->add_option("--method", fit_flags.method, "staplr or group_lasso")
        ->check(CLI::IsMember({"staplr", "group_lasso"}));
    fit->add_flag("--nonneg,!--no-nonneg", fit_flags.nonneg,
                  "Constrain combiner weights to be nonnegative (default on)");
    fit->add_option("--k-folds", fit_flags.k_folds, "Folds for stacking and tuning");
    fit->add_option("--n-lambda", fit_flags.n_lambda, "Lambda path length");
    fit->add_option("--seed", fit_flags.seed, "Random seed");
    fit->add_option("--threads", fit_flags.threads, "Worker threads (0: all available)");
    fit->add_option("--out", fit_flags.out, "Model JSON output")->required();
    fit->add_option("--manifest", fit_flags.manifest, "Manifest path (default: <out>.manifest.json)");

    // predict
    auto* pred = app.add_subcommand("predict", "Predict probabilities with a saved model");
    std::string pred_model, pred_features, pred_out;
    pred->add_option("--model", pred_model, "Model JSON")->required();
    pred->add_option("--features", pred_features, "Features CSV with a header row")->required();
    pred->add_option("--out", pred_out, "Probabilities CSV (default: stdout)");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "AUC and accuracy of scores against labels");
    std::string eval_scores, eval_labels, eval_out;
    double eval_cutoff = 0.5;
    eval->add_option("--scores", eval_scores, "Scores CSV, one column")->required();
    eval->add_option("--labels", eval_labels, "Labels CSV, one column")->required();
    eval->add_option("--cutoff", eval_cutoff, "Scores at or above the cutoff count as positive");
    eval->add_option("--out", eval_out, "Metrics JSON (default: stdout)");

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run a simulation experiment");
    ExperimentFlags exp_flags;
    exp->add_option("--preset", exp_flags.preset, "main, sample_sweep or view_size_sweep")
        ->check(CLI::IsMember({"main", "sample_sweep", "view_size_sweep"}));
    exp->add_option("--config", exp_flags.config, "Experiment config JSON");
    exp->add_option("--scale", exp_flags.scale, "Shrink view sizes and replications")
        ->check(CLI::Range(0.0, 1.0));
    exp->add_option("--replications", exp_flags.replications, "Replications per condition");
    exp->add_option("--methods", exp_flags.methods, "staplr_nn, staplr_unconstrained, group_lasso")
        ->delimiter(',');
    exp->add_option("--threads", exp_flags.threads, "Worker threads (0: all available)");
    exp->add_option("--k-folds", exp_flags.k_folds, "Folds for stacking and tuning");
    exp->add_option("--n-lambda", exp_flags.n_lambda, "Lambda path length");
    exp->add_option("--seed", exp_flags.seed, "Override the configured seed");
    exp->add_option("--out-dir", exp_flags.out_dir, "Output directory")->required();

    // verify-lemmas
    auto* ver = app.add_subcommand("verify-lemmas", "Randomized checks of the correlation identities");
    int ver_trials = 1000;
    std::uint64_t ver_seed = 1;
    ver->add_option("--trials", ver_trials, "Number of random trials");
    ver->add_option("--seed", ver_seed, "Random seed");

    // repeated-split
    auto* split = app.add_subcommand("repeated-split", "Repeated stratified split evaluation");
    SplitFlags split_flags;
    split_flags.data.add(split);
    split->add_option("--repeats", split_flags.repeats, "Number of random splits");
    split->add_option("--folds", split_flags.folds, "Parts per split");
    split->add_option("--methods", split_flags.methods, "staplr_nn, staplr_unconstrained, group_lasso")
        ->delimiter(',');
    split->add_option("--k-folds", split_flags.k_folds, "Folds for stacking and tuning");
    split->add_option("--n-lambda", split_flags.n_lambda, "Lambda path length");
    split->add_option("--seed", split_flags.seed, "Random seed");
    split->add_option("--threads", split_flags.threads, "Worker threads (0: all available)");
    split->add_option("--out-dir", split_flags.out_dir, "Output directory")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(sim_preset, sim_config, sim_condition, sim_scale, sim_replication,
                                sim_seed, sim_out, out);
        if (fit->parsed()) return cmd_fit(fit_flags, out);
        if (pred->parsed()) return cmd_predict(pred_model, pred_features, pred_out, out);
        if (eval->parsed()) return cmd_evaluate(eval_scores, eval_labels, eval_cutoff, eval_out, out);
        if (exp->parsed()) return cmd_experiment(exp_flags, out);
        if (ver->parsed()) return cmd_verify_lemmas(ver_trials, ver_seed, out);
        if (split->parsed()) return cmd_repeated_split(split_flags, out);
    } catch (const Error& e) {
        report_error(err, e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        report_error(err, "internal", e.what());
        return 1;
    }
    return 2;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace staplr
