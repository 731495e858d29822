#include "staplr/simulation.hpp"

#include "staplr/error.hpp"
#include "staplr/group_lasso.hpp"
#include "staplr/metrics.hpp"
#include "staplr/mvs.hpp"
#include "staplr/parallel.hpp"
#include "staplr/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace staplr {

namespace {

// FNV-1a, so a condition's random streams depend on its name only.
std::uint64_t name_hash(const std::string& name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string format_number(double x) {
    std::ostringstream out;
    out << x;
    return out.str();
}

struct CorrelationPair {
    double rho_w;
    double rho_b;
};

constexpr CorrelationPair kCorrelations[] = {{0.1, 0.0}, {0.4, 0.0}, {0.4, 0.2}};

std::string correlation_label(const CorrelationPair& c) {
    return "rw" + format_number(c.rho_w) + "_rb" + format_number(c.rho_b);
}

}  // namespace

Index SimulationConfig::total_features() const {
    Index total = 0;
    for (Index m : view_sizes) total += m;
    return total;
}

void SimulationConfig::validate() const {
    if (n < 2) throw InvalidArgument("simulation needs n >= 2");
    if (view_sizes.empty()) throw InvalidArgument("simulation needs at least one view");
    for (Index m : view_sizes)
        if (m < 1) throw InvalidArgument("every view needs at least one feature");
    if (signal_probs.size() != view_sizes.size())
        throw InvalidArgument("expected " + std::to_string(view_sizes.size()) +
                              " signal probabilities, got " + std::to_string(signal_probs.size()));
    for (double p : signal_probs)
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("signal probabilities must lie in [0, 1]");
    if (!(rho_b >= 0.0 && rho_b <= rho_w && rho_w < 1.0))
        throw InvalidArgument("correlations must satisfy 0 <= rho_b <= rho_w < 1");
    if (beta_rule == BetaRule::fixed && !(beta_magnitude >= 0.0 && std::isfinite(beta_magnitude)))
        throw InvalidArgument("effect size must be finite and nonnegative");
    if (!std::isfinite(intercept)) throw InvalidArgument("intercept must be finite");
    if (replications < 1) throw InvalidArgument("replications must be at least 1");
    if (test_n < 0 || test_n == 1) throw InvalidArgument("test_n must be 0 or at least 2");
}

std::vector<Matrix> gen_block_gaussian(const SimulationConfig& config, Index n, std::uint64_t seed) {
    config.validate();
    if (n < 2) throw InvalidArgument("need at least two rows");
    const std::size_t V = config.n_views();
    const double a = std::sqrt(config.rho_b);
    const double b = std::sqrt(config.rho_w - config.rho_b);
    const double c = std::sqrt(1.0 - config.rho_w);
    std::vector<Matrix> views(V);
    for (std::size_t v = 0; v < V; ++v) views[v].resize(n, config.view_sizes[v]);
    Rng rng(seed);
    for (Index i = 0; i < n; ++i) {
        const double g = rng.normal();
        for (std::size_t v = 0; v < V; ++v) {
            const double h = rng.normal();
            Matrix& X = views[v];
            for (Index j = 0; j < X.cols(); ++j) X(i, j) = a * g + b * h + c * rng.normal();
        }
    }
    for (auto& X : views) X = standardize_columns(X, ConstantColumns::passthrough).values;
    return views;
}

GroundTruth draw_ground_truth(const SimulationConfig& config, std::uint64_t seed) {
    config.validate();
    GroundTruth truth;
    truth.intercept = config.intercept;
    truth.beta = Vector::Zero(config.total_features());
    truth.signal_mask.assign(static_cast<std::size_t>(config.total_features()), false);
    truth.view_has_signal.assign(config.n_views(), false);
    Rng rng(seed);
    Index offset = 0;
    for (std::size_t v = 0; v < config.n_views(); ++v) {
        const Index m = config.view_sizes[v];
        const double magnitude = config.beta_rule == BetaRule::fixed
                                     ? config.beta_magnitude
                                     : 1.0 / std::sqrt(static_cast<double>(m));
        for (Index j = 0; j < m; ++j) {
            const bool signal = rng.bernoulli(config.signal_probs[v]);
            const bool negative = rng.bernoulli(0.5);
            if (signal && magnitude > 0.0) {
                truth.beta[offset + j] = negative ? -magnitude : magnitude;
                truth.signal_mask[static_cast<std::size_t>(offset + j)] = true;
                truth.view_has_signal[v] = true;
            }
        }
        offset += m;
    }
    return truth;
}

Labels draw_outcome(const std::vector<Matrix>& views, const GroundTruth& truth, std::uint64_t seed) {
    if (views.empty()) throw InvalidArgument("no views supplied");
    const Index n = views.front().rows();
    Vector eta = Vector::Constant(n, truth.intercept);
    Index offset = 0;
    for (const auto& X : views) {
        if (X.rows() != n) throw InvalidArgument("views differ in row count");
        if (offset + X.cols() > truth.beta.size())
            throw InvalidArgument("views have more features than the coefficient vector");
        eta.noalias() += X * truth.beta.segment(offset, X.cols());
        offset += X.cols();
    }
    if (offset != truth.beta.size())
        throw InvalidArgument("views have fewer features than the coefficient vector");
    Rng rng(seed);
    Labels y(n);
    for (Index i = 0; i < n; ++i) y[i] = rng.bernoulli(inverse_logit(eta[i])) ? 1 : 0;
    return y;
}

GeneratedOutcome gen_outcome(const std::vector<Matrix>& views, const SimulationConfig& config,
                             std::uint64_t seed) {
    if (views.size() != config.n_views())
        throw InvalidArgument("config describes " + std::to_string(config.n_views()) +
                              " views, got " + std::to_string(views.size()));
    for (std::size_t v = 0; v < views.size(); ++v)
        if (views[v].cols() != config.view_sizes[v])
            throw InvalidArgument("view " + std::to_string(v) + " size does not match the config");
    GeneratedOutcome out;
    out.truth = draw_ground_truth(config, seed);
    out.y = draw_outcome(views, out.truth, mix64(seed));
    return out;
}

std::vector<SimulationConfig> preset_configs(const std::string& name, std::uint64_t seed) {
    std::vector<SimulationConfig> configs;
    if (name == "main") {
        std::vector<double> probs;
        probs.insert(probs.end(), 5, 1.0);
        probs.insert(probs.end(), 5, 0.5);
        probs.insert(probs.end(), 20, 0.0);
        for (Index n : {200, 2000})
            for (Index m : {250, 2500})
                for (const auto& c : kCorrelations) {
                    SimulationConfig cfg;
                    cfg.name = "main_n" + std::to_string(n) + "_m" + std::to_string(m) + "_" +
                               correlation_label(c);
                    cfg.n = n;
                    cfg.view_sizes.assign(30, m);
                    cfg.signal_probs = probs;
                    cfg.rho_w = c.rho_w;
                    cfg.rho_b = c.rho_b;
                    cfg.beta_magnitude = 0.04;
                    cfg.seed = seed;
                    cfg.replications = 100;
                    cfg.test_n = 1000;
                    configs.push_back(std::move(cfg));
                }
    } else if (name == "sample_sweep") {
        std::vector<double> probs;
        probs.insert(probs.end(), 5, 1.0);
        probs.insert(probs.end(), 5, 0.5);
        probs.insert(probs.end(), 20, 0.0);
        for (const auto& c : kCorrelations)
            for (Index n : {50, 100, 200, 300, 500, 750, 1000, 2000, 5000, 10000}) {
                SimulationConfig cfg;
                cfg.name = "sweep_n" + std::to_string(n) + "_" + correlation_label(c);
                cfg.n = n;
                cfg.view_sizes.assign(30, 25);
                cfg.signal_probs = probs;
                cfg.rho_w = c.rho_w;
                cfg.rho_b = c.rho_b;
                cfg.beta_magnitude = 0.12;
                cfg.seed = seed;
                cfg.replications = 100;
                configs.push_back(std::move(cfg));
            }
    } else if (name == "view_size_sweep") {
        for (const auto& c : kCorrelations) {
            SimulationConfig cfg;
            cfg.name = "viewsize_" + correlation_label(c);
            cfg.n = 2000;
            for (Index m : {10, 50, 250, 750, 2500}) {
                for (double p : {1.0, 0.5, 0.0, 0.0, 0.0, 0.0}) {
                    cfg.view_sizes.push_back(m);
                    cfg.signal_probs.push_back(p);
                }
            }
            cfg.rho_w = c.rho_w;
            cfg.rho_b = c.rho_b;
            cfg.beta_rule = BetaRule::inverse_sqrt_view_size;
            cfg.seed = seed;
            cfg.replications = 100;
            configs.push_back(std::move(cfg));
        }
    } else {
        throw InvalidArgument("unknown preset '" + name +
                              "' (expected main, sample_sweep or view_size_sweep)");
    }
    return configs;
}

std::vector<SimulationConfig> scale_configs(std::vector<SimulationConfig> configs, double scale) {
    if (!(scale > 0.0 && scale <= 1.0)) throw InvalidArgument("scale must lie in (0, 1]");
    if (scale == 1.0) return configs;
    for (auto& cfg : configs) {
        double signal_ratio_sum = 0.0;
        for (auto& m : cfg.view_sizes) {
            const Index scaled = std::max<Index>(2, std::llround(static_cast<double>(m) * scale));
            signal_ratio_sum += static_cast<double>(m) / static_cast<double>(scaled);
            m = scaled;
        }
        if (cfg.beta_rule == BetaRule::fixed)
            cfg.beta_magnitude *=
                std::sqrt(signal_ratio_sum / static_cast<double>(cfg.view_sizes.size()));
        cfg.replications =
            std::max(1, static_cast<int>(std::lround(static_cast<double>(cfg.replications) * scale)));
    }
    return configs;
}

std::string to_string(Method method) {
    switch (method) {
        case Method::staplr_nn: return "staplr_nn";
        case Method::staplr_unconstrained: return "staplr_unconstrained";
        case Method::group_lasso: return "group_lasso";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    if (name == "staplr_nn") return Method::staplr_nn;
    if (name == "staplr_unconstrained") return Method::staplr_unconstrained;
    if (name == "group_lasso") return Method::group_lasso;
    throw InvalidArgument("unknown method '" + name +
                          "' (expected staplr_nn, staplr_unconstrained or group_lasso)");
}

SimulatedReplication simulate_replication(const SimulationConfig& config, int replication) {
    config.validate();
    if (replication < 0) throw InvalidArgument("replication index must be nonnegative");
    SimulatedReplication out;
    out.seed = derive_seed(config.seed, {stream::replication, name_hash(config.name),
                                         static_cast<std::uint64_t>(replication)});
    out.views = gen_block_gaussian(config, config.n, derive_seed(out.seed, {stream::features}));
    auto generated = gen_outcome(out.views, config, derive_seed(out.seed, {stream::outcome}));
    out.y = std::move(generated.y);
    out.truth = std::move(generated.truth);
    if (config.test_n > 0) {
        const std::uint64_t test_seed = derive_seed(out.seed, {stream::test_set});
        out.test_views =
            gen_block_gaussian(config, config.test_n, derive_seed(test_seed, {stream::features}));
        out.test_y = draw_outcome(out.test_views, out.truth, derive_seed(test_seed, {stream::outcome}));
    }
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct TestSet {
    std::vector<Matrix> views;
    Labels y;
};

void score(ExperimentRow& row, const Vector& p, const std::optional<TestSet>& test) {
    row.auc = std::numeric_limits<double>::quiet_NaN();
    row.accuracy = std::numeric_limits<double>::quiet_NaN();
    if (!test) return;
    row.accuracy = accuracy(p, test->y);
    const Index pos = test->y.sum();
    if (pos > 0 && pos < test->y.size()) row.auc = auc(p, test->y);
}

std::vector<ExperimentRow> run_replication(const SimulationConfig& cfg, std::size_t condition,
                                           int replication, const ExperimentOptions& options,
                                           GroundTruth& truth_out) {
    SimulatedReplication sim = simulate_replication(cfg, replication);
    const std::uint64_t seed = sim.seed;
    truth_out = sim.truth;
    std::optional<TestSet> test;
    if (cfg.test_n > 0) test = TestSet{std::move(sim.test_views), std::move(sim.test_y)};

    std::vector<ExperimentRow> rows;
    auto new_row = [&](Method m) {
        ExperimentRow row;
        row.condition = condition;
        row.condition_name = cfg.name;
        row.replication = replication;
        row.method = m;
        row.auc = std::numeric_limits<double>::quiet_NaN();
        row.accuracy = std::numeric_limits<double>::quiet_NaN();
        return row;
    };

    const MultiViewDataset data(std::move(sim.views), std::move(sim.y));
    const auto wants = [&](Method m) {
        return std::find(options.methods.begin(), options.methods.end(), m) != options.methods.end();
    };

    // The two stacked variants share the per-view level.
    std::optional<BaseLevelFit> base;
    double base_seconds = 0.0;
    std::string base_error;
    if (wants(Method::staplr_nn) || wants(Method::staplr_unconstrained)) {
        const auto start = Clock::now();
        try {
            base = fit_base_level(data, std::vector<LearnerSpec>(data.n_views(), options.base_spec),
                                  options.K, seed, 1);
        } catch (const std::exception& e) {
            base_error = e.what();
        }
        base_seconds = seconds_since(start);
    }

    for (Method m : options.methods) {
        ExperimentRow row = new_row(m);
        const auto start = Clock::now();
        try {
            if (m == Method::group_lasso) {
                const Matrix X = data.concatenated();
                const auto groups = GroupStructure::from_map(data.feature_groups());
                const auto fit =
                    train_group_lasso(X, data.outcomes(), groups, options.K,
                                      derive_seed(seed, {stream::group_lasso}),
                                      options.base_spec.n_lambda, -1.0, options.base_spec.solver);
                row.fit_seconds = seconds_since(start);
                row.selected_views = selected_groups(fit.model, groups);
                row.selected_features = (fit.model.coefficients.array() != 0.0).count();
                if (test) {
                    const MultiViewDataset test_data(test->views, test->y);
                    score(row, predict_proba(fit.model, test_data.concatenated()), test);
                }
            } else {
                if (!base) throw std::runtime_error(base_error);
                const auto model =
                    fit_meta_level(*base, data, LearnerSpec::lasso_meta(m == Method::staplr_nn));
                row.fit_seconds = base_seconds + seconds_since(start);
                row.selected_views = selected_views(model);
                row.selected_features = selected_feature_count(model);
                if (test) score(row, predict_stacked(model, MultiViewDataset(test->views, test->y)), test);
            }
        } catch (const std::exception& e) {
            row.selected_views.clear();
            row.selected_features = 0;
            row.error = e.what();
            if (row.error.empty()) row.error = "unknown failure";
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

ExperimentResult run_experiment(const std::vector<SimulationConfig>& configs,
                                const ExperimentOptions& options) {
    if (configs.empty()) throw InvalidArgument("no simulation conditions given");
    if (options.methods.empty()) throw InvalidArgument("at least one method is required");
    if (options.replications && *options.replications < 1)
        throw InvalidArgument("replications must be at least 1");
    if (options.K < 2) throw InvalidArgument("fold count must be at least 2");
    options.base_spec.validate();
    std::set<std::string> names;
    for (const auto& cfg : configs) {
        cfg.validate();
        if (!names.insert(cfg.name).second)
            throw InvalidArgument("duplicate condition name '" + cfg.name + "'");
    }

    ExperimentResult result;
    result.configs = configs;
    std::vector<std::pair<std::size_t, int>> tasks;
    for (std::size_t c = 0; c < configs.size(); ++c) {
        const int reps = options.replications.value_or(configs[c].replications);
        result.configs[c].replications = reps;
        result.truths.emplace_back(static_cast<std::size_t>(reps));
        for (int r = 0; r < reps; ++r) tasks.emplace_back(c, r);
    }

    std::vector<std::vector<ExperimentRow>> slots(tasks.size());
    parallel_for(tasks.size(), options.workers, [&](std::size_t t) {
        const auto [c, r] = tasks[t];
        try {
            slots[t] = run_replication(configs[c], c, r, options,
                                       result.truths[c][static_cast<std::size_t>(r)]);
        } catch (const std::exception& e) {
            // Data generation failed: one error row per method.
            for (Method m : options.methods) {
                ExperimentRow row;
                row.condition = c;
                row.condition_name = configs[c].name;
                row.replication = r;
                row.method = m;
                row.auc = std::numeric_limits<double>::quiet_NaN();
                row.accuracy = std::numeric_limits<double>::quiet_NaN();
                row.error = e.what();
                slots[t].push_back(std::move(row));
            }
        }
    });
    for (auto& s : slots)
        for (auto& row : s) result.rows.push_back(std::move(row));
    return result;
}

}  // namespace staplr
