// Acceptance suite: one PASS/FAIL line per criterion.
//
//   staplr_acceptance fast         criteria 1-4 and 7-9
//   staplr_acceptance simulation   criteria 5-6 (long; --replications, --workers)
//   staplr_acceptance all

#include "staplr/cli.hpp"
#include "staplr/error.hpp"
#include "staplr/group_lasso.hpp"
#include "staplr/io.hpp"
#include "staplr/metrics.hpp"
#include "staplr/mvs.hpp"
#include "staplr/penalized_glm.hpp"
#include "staplr/simulation.hpp"
#include "staplr/theory.hpp"
#include "support.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

using namespace staplr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o) {
    std::printf("%s criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

template <class Fn>
void run(int id, const std::string& title, Fn&& fn) {
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    report(id, title, o);
}

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(3);
    s << x;
    return s.str();
}

double sample_sd(const Vector& x) {
    const double mean = x.mean();
    return std::sqrt((x.array() - mean).square().sum() / static_cast<double>(x.size() - 1));
}

// Out-of-fold mean of y, computed directly.
Vector fold_means(const Vector& y, const std::vector<int>& fold, int K) {
    std::vector<double> sum(static_cast<std::size_t>(K), 0.0);
    std::vector<double> count(static_cast<std::size_t>(K), 0.0);
    for (Index i = 0; i < y.size(); ++i) {
        sum[static_cast<std::size_t>(fold[static_cast<std::size_t>(i)])] += y[i];
        count[static_cast<std::size_t>(fold[static_cast<std::size_t>(i)])] += 1.0;
    }
    const double total = y.sum();
    const double n = static_cast<double>(y.size());
    Vector z(y.size());
    for (Index i = 0; i < y.size(); ++i) {
        const auto k = static_cast<std::size_t>(fold[static_cast<std::size_t>(i)]);
        z[i] = (total - sum[k]) / (n - count[k]);
    }
    return z;
}

// ------------------------------------------------------------------ 1

Outcome criterion_lemma_oracles() {
    const auto start = Clock::now();
    std::mt19937_64 gen(2024);
    double worst_rho = 0.0, worst_equal = 0.0, worst_loo = 0.0, max_rho = -1.0;
    int trials = 0, equal_cases = 0, loo_cases = 0, skipped = 0;
    for (int t = 0; t < 1000; ++t) {
        std::uniform_int_distribution<int> nd(4, 60);
        const Index n = nd(gen);
        const Vector y = t % 2 ? support::coin_labels(n, gen).cast<double>().eval()
                               : support::normal_vector(n, gen);
        std::vector<int> fold(static_cast<std::size_t>(n));
        int K;
        const int kind = t % 3;
        if (kind == 0) {
            K = static_cast<int>(n);  // leave-one-out
            for (Index i = 0; i < n; ++i) fold[static_cast<std::size_t>(i)] = static_cast<int>(i);
        } else if (kind == 1) {
            // Equal folds: n rounded down to a multiple of K.
            std::uniform_int_distribution<int> kd(2, static_cast<int>(std::min<Index>(n / 2, 10)));
            K = kd(gen);
            const Index used = (n / K) * K;
            fold.resize(static_cast<std::size_t>(used));
            for (Index i = 0; i < used; ++i) fold[static_cast<std::size_t>(i)] = static_cast<int>(i % K);
        } else {
            std::uniform_int_distribution<int> kd(2, static_cast<int>(n));
            K = kd(gen);
            for (int k = 0; k < K; ++k) fold[static_cast<std::size_t>(k)] = k;
            std::uniform_int_distribution<int> fd(0, K - 1);
            for (Index i = K; i < n; ++i) fold[static_cast<std::size_t>(i)] = fd(gen);
        }
        std::shuffle(fold.begin(), fold.end(), gen);
        const Vector yy = y.head(static_cast<Index>(fold.size()));
        const Vector z = fold_means(yy, fold, K);
        if (sample_sd(z) < 1e-12 || sample_sd(yy) == 0.0) {
            ++skipped;
            continue;
        }
        const auto r = theory::lemma1_rho(yy, FoldPartition(fold, K));
        const double pearson = support::pearson(yy, z);
        worst_rho = std::max(worst_rho, std::abs(r.closed_form_rho - pearson));
        max_rho = std::max(max_rho, r.closed_form_rho);
        if (kind == 1) {
            const double expected = -(K - 1) * sample_sd(z) / sample_sd(yy);
            worst_equal = std::max(worst_equal, std::abs(r.closed_form_rho - expected));
            ++equal_cases;
        }
        if (kind == 0) {
            worst_loo = std::max(worst_loo, std::abs(r.closed_form_rho + 1.0));
            ++loo_cases;
        }
        ++trials;
    }
    const double secs = seconds_since(start);
    Outcome o;
    o.pass = trials >= 950 && worst_rho <= 1e-12 && max_rho <= 0.0 && worst_equal <= 1e-12 &&
             worst_loo <= 1e-12 && secs < 10.0;
    o.detail = std::to_string(trials) + " trials (" + std::to_string(skipped) +
               " with constant z skipped), max |closed form - Pearson| " + fmt(worst_rho) +
               ", max rho " + fmt(max_rho) + ", equal folds " + std::to_string(equal_cases) +
               " max err " + fmt(worst_equal) + ", LOO " + std::to_string(loo_cases) +
               " max err " + fmt(worst_loo) + ", " + fmt(secs) + " s";
    return o;
}

// ------------------------------------------------------------------ 2

Outcome criterion_lemma2() {
    const auto start = Clock::now();
    std::mt19937_64 gen(7);
    double worst = 0.0;
    bool nonneg_ok = true, rho_ok = true;
    std::string nn_detail;
    LearnerSpec intercept;
    intercept.intercept_only = true;
    intercept.link = Link::identity;
    LearnerSpec signal = LearnerSpec::ridge_base();
    signal.fixed_lambda = 0.05;
    LearnerSpec meta;
    meta.link = Link::identity;
    meta.standardize = false;
    for (Index n : {10, 50, 200}) {
        const int K = static_cast<int>(n);
        // Redraw until the out-of-fold signal column meets 0 < rho < 1.
        std::optional<MultiViewDataset> data;
        std::optional<StackedModel> model;
        for (int attempt = 0; attempt < 50 && !model; ++attempt) {
            Matrix x2 = support::normal_matrix(n, 2, gen);
            const Labels y = support::logistic_labels(x2, Vector::Constant(2, 1.5), 0, gen);
            if (y.sum() < 2 || y.sum() > n - 2) continue;
            MultiViewDataset candidate({support::normal_matrix(n, 2, gen), x2}, y);
            auto fit = fit_staplr(candidate, {intercept, signal}, meta, K, 1);
            const double rho = support::pearson(y.cast<double>(), fit.z_matrix.col(1));
            if (rho > 0.0 && rho < 1.0) {
                data = std::move(candidate);
                model = std::move(fit);
            }
        }
        if (!model) {
            rho_ok = false;
            continue;
        }
        worst = std::max({worst,
                          std::abs(model->meta_model.coefficients[0] - (1.0 - static_cast<double>(n))),
                          std::abs(model->meta_model.coefficients[1])});

        LearnerSpec nonneg = meta;
        nonneg.nonnegative = true;
        const auto nn = fit_staplr(*data, {intercept, signal}, nonneg, K, 1);
        nonneg_ok = nonneg_ok && nn.meta_model.coefficients[0] == 0.0 &&
                    nn.meta_model.coefficients[1] > 0.0;
        nn_detail += (nn_detail.empty() ? "" : ", ") + std::string("n=") + std::to_string(n) +
                     " nonneg beta=(" + fmt(nn.meta_model.coefficients[0]) + ", " +
                     fmt(nn.meta_model.coefficients[1]) + ")";
    }
    const double secs = seconds_since(start);
    Outcome o;
    o.pass = rho_ok && worst <= 1e-8 && nonneg_ok && secs < 5.0;
    o.detail = "max |beta - (1-n, 0)| " + fmt(worst) + ", 0<rho<1: " + (rho_ok ? "yes" : "no") +
               ", " + nn_detail + ", " + fmt(secs) + " s";
    return o;
}

// ------------------------------------------------------------------ 3

double independent_kkt(const Matrix& X, const Labels& y, double b0, const Vector& b, double l1,
                       double l2, bool nonneg) {
    const Index n = X.rows();
    Vector resid(n);
    for (Index i = 0; i < n; ++i)
        resid[i] = y[i] - 1.0 / (1.0 + std::exp(-(b0 + X.row(i).dot(b))));
    double worst = std::abs(resid.mean());
    for (Index j = 0; j < X.cols(); ++j) {
        const double g = X.col(j).dot(resid) / static_cast<double>(n) - l2 * b[j];
        double v;
        if (b[j] != 0)
            v = std::abs(g - l1 * (b[j] > 0 ? 1.0 : -1.0));
        else
            v = nonneg ? std::max(g - l1, 0.0) : std::max(std::abs(g) - l1, 0.0);
        worst = std::max(worst, v);
    }
    return worst;
}

Outcome criterion_solvers() {
    const auto start = Clock::now();
    std::mt19937_64 gen(99);
    std::uniform_int_distribution<int> nd(20, 50), md(1, 5);
    std::uniform_real_distribution<double> frac(0.02, 0.6);
    FitOptions raw;
    raw.standardize = false;
    double worst_glm = 0.0, worst_kkt = 0.0;
    int fits = 0;
    for (int t = 0; t < 24; ++t) {
        const Index n = nd(gen), m = md(gen);
        const Matrix X = standardize_columns(support::normal_matrix(n, m, gen)).values;
        const Labels y = support::logistic_labels(X, support::normal_vector(m, gen), 0.3, gen);
        const double lmax = lasso_lambda_max(X, y);
        const bool nonneg = t % 2 == 1;
        for (const auto& spec : {PenaltySpec::lasso(frac(gen) * lmax, nonneg),
                                 PenaltySpec::ridge(frac(gen) * lmax, nonneg),
                                 PenaltySpec::elastic_net(0.5, frac(gen) * lmax, nonneg)}) {
            const double l1 = spec.lambda * spec.l1_share();
            const double l2 = spec.lambda * (1.0 - spec.l1_share());
            const auto fit = fit_logistic(X, y, spec, {}, raw);
            const auto oracle = support::elastic_net_oracle(X, y, l1, l2, nonneg);
            worst_glm = std::max({worst_glm, std::abs(fit.intercept - oracle.intercept),
                                  (fit.coefficients - oracle.beta).cwiseAbs().maxCoeff()});
            worst_kkt = std::max(worst_kkt,
                                 independent_kkt(X, y, fit.intercept, fit.coefficients, l1, l2, nonneg));
            ++fits;
        }
    }

    double worst_group = 0.0;
    int group_fits = 0;
    const std::vector<std::vector<int>> maps{{0, 0, 1, 1, 1}, {0, 1, 0, 1}, {0, 0, 0}, {1, 0, 2, 2}};
    for (int t = 0; t < 20; ++t) {
        const auto& map = maps[static_cast<std::size_t>(t) % maps.size()];
        const Index m = static_cast<Index>(map.size());
        const Matrix X = standardize_columns(support::normal_matrix(nd(gen), m, gen)).values;
        const Labels y = support::logistic_labels(X, support::normal_vector(m, gen), -0.2, gen);
        const auto groups = GroupStructure::from_map(map);
        const double lambda = frac(gen) * group_lambda_path(X, y, groups, 1).lambda_max;
        const auto fit = fit_group_lasso(X, y, groups, lambda, {}, raw);
        const auto oracle = support::group_lasso_oracle(X, y, groups.groups, groups.weights, lambda);
        worst_group = std::max({worst_group, std::abs(fit.intercept - oracle.intercept),
                                (fit.coefficients - oracle.beta).cwiseAbs().maxCoeff()});
        ++group_fits;
    }

    // The identity is exact for the unclamped objective, so instances whose
    // path end pushes fitted probabilities into the weight floor are redrawn.
    const double floor = SolverSettings{}.weight_floor;
    const double eta_limit = std::log((1.0 - floor) / floor);
    double worst_reduction = 0.0;
    int reductions = 0, redrawn = 0;
    for (int t = 0; reductions < 10 && t < 100; ++t) {
        const Index m = 1 + reductions % 5;
        const Matrix X = standardize_columns(support::normal_matrix(40, m, gen)).values;
        const Labels y = support::logistic_labels(X, 0.5 * support::normal_vector(m, gen), 0, gen);
        std::vector<int> map(static_cast<std::size_t>(m));
        for (Index j = 0; j < m; ++j) map[static_cast<std::size_t>(j)] = static_cast<int>(j);
        const auto groups = GroupStructure::from_map(map, true);
        const auto path = group_lambda_path(X, y, groups, 20);
        const auto end = support::elastic_net_oracle(X, y, path.values.back(), 0.0, false);
        if (((X * end.beta).array() + end.intercept).abs().maxCoeff() > eta_limit) {
            ++redrawn;
            continue;
        }
        for (std::size_t l : {3ul, 10ul, 19ul}) {
            const auto g = fit_group_lasso(X, y, groups, path.values[l], {}, raw);
            const auto s = fit_logistic(X, y, PenaltySpec::lasso(path.values[l]), {}, raw);
            worst_reduction = std::max({worst_reduction, std::abs(g.intercept - s.intercept),
                                        (g.coefficients - s.coefficients).cwiseAbs().maxCoeff()});
        }
        ++reductions;
    }
    const double secs = seconds_since(start);
    Outcome o;
    o.pass = fits >= 20 && worst_glm <= 1e-4 && worst_kkt < 1e-5 && worst_group <= 1e-4 &&
             reductions == 10 && worst_reduction <= 1e-5 && secs < 120.0;
    o.detail = std::to_string(fits) + " penalized fits max |fit - oracle| " + fmt(worst_glm) +
               ", max KKT " + fmt(worst_kkt) + "; " + std::to_string(group_fits) +
               " group fits max err " + fmt(worst_group) + "; singleton reduction on " +
               std::to_string(reductions) + " instances (" + std::to_string(redrawn) +
               " redrawn at the weight floor) max err " + fmt(worst_reduction) + ", " + fmt(secs) + " s";
    return o;
}

// ------------------------------------------------------------------ 4

Outcome criterion_variance_identity() {
    std::mt19937_64 gen(4);
    double worst = 0.0, worst_lib = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Index n = 3 + t;
        const Vector y = t % 2 ? support::coin_labels(n, gen).cast<double>().eval()
                               : support::normal_vector(n, gen);
        const Vector z = (Vector::Constant(n, y.sum()) - y) / static_cast<double>(n - 1);
        const double vz = sample_sd(z) * sample_sd(z);
        const double vy = sample_sd(y) * sample_sd(y) / static_cast<double>((n - 1) * (n - 1));
        worst = std::max(worst, std::abs(vz - vy));
        const auto [lz, ly] = theory::loo_variance_identity(y);
        worst_lib = std::max({worst_lib, std::abs(lz - vz), std::abs(ly - vy)});
    }
    Outcome o;
    o.pass = worst <= 1e-12 && worst_lib <= 1e-12;
    o.detail = "100 random y, max |var(z) - var(y)/(n-1)^2| " + fmt(worst) +
               ", library vs direct " + fmt(worst_lib);
    return o;
}

// ------------------------------------------------------------------ 5, 6

struct SimulationOptions {
    int replications = 30;
    int workers = 0;
};

void criteria_simulation(const SimulationOptions& opt) {
    const std::vector<std::string> names{"sweep_n200_rw0.4_rb0", "sweep_n1000_rw0.4_rb0"};
    std::vector<SimulationConfig> configs;
    for (const auto& c : preset_configs("sample_sweep"))
        if (std::find(names.begin(), names.end(), c.name) != names.end()) configs.push_back(c);

    ExperimentOptions options;
    options.replications = opt.replications;
    options.workers = opt.workers > 0 ? opt.workers
                                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const auto start = Clock::now();
    ExperimentResult result;
    std::string failure;
    try {
        result = run_experiment(configs, options);
    } catch (const std::exception& e) {
        failure = e.what();
    }
    const double secs = seconds_since(start);
    if (!failure.empty()) {
        report(5, "sample-size sweep ordering", {false, "exception: " + failure});
        report(6, "nonnegativity lowers noise inclusion", {false, "exception: " + failure});
        return;
    }
    int failed = 0;
    for (const auto& row : result.rows) failed += row.error.empty() ? 0 : 1;
    const auto summary = selection_summary(selection_records(result));
    auto inclusion = [&](const std::string& cond, Method m, double p) {
        return summary.cells.at({cond, to_string(m)}).inclusion.at(p).mean;
    };

    std::string detail;
    bool noise_ok = true, gl_ok = true;
    for (const auto& name : names) {
        const double nn = inclusion(name, Method::staplr_nn, 0.0);
        const double gl = inclusion(name, Method::group_lasso, 0.0);
        noise_ok = noise_ok && nn <= 0.10;
        gl_ok = gl_ok && gl > nn;
        detail += name + ": StaPLR+ noise " + fmt(nn) + ", group lasso noise " + fmt(gl) +
                  ", StaPLR+ signal " + fmt(inclusion(name, Method::staplr_nn, 1.0)) + "; ";
    }
    const double sig200 = inclusion(names[0], Method::staplr_nn, 1.0);
    const double sig1000 = inclusion(names[1], Method::staplr_nn, 1.0);
    const bool growth_ok = sig1000 >= sig200;
    detail += std::to_string(options.replications.value()) + " replications, " +
              std::to_string(failed) + " failed fits, " + std::to_string(options.workers) +
              " workers, " + fmt(secs / 60.0) + " min";
    report(5, "sample-size sweep ordering", {noise_ok && gl_ok && growth_ok, detail});

    int holds = 0;
    std::string detail6;
    for (const auto& name : names) {
        const double minus = inclusion(name, Method::staplr_unconstrained, 0.0);
        const double plus = inclusion(name, Method::staplr_nn, 0.0);
        holds += minus >= plus ? 1 : 0;
        detail6 += name + ": StaPLR- noise " + fmt(minus) + " vs StaPLR+ " + fmt(plus) + "; ";
    }
    const double share = static_cast<double>(holds) / static_cast<double>(names.size());
    detail6 += "holds in " + std::to_string(holds) + "/" + std::to_string(names.size()) + " conditions";
    report(6, "nonnegativity lowers noise inclusion", {share >= 0.9, detail6});
}

// ------------------------------------------------------------------ 7

Outcome criterion_auc() {
    std::mt19937_64 gen(7);
    double worst = 0.0;
    int tied_sets = 0;
    for (int t = 0; t < 100; ++t) {
        const Index n = 2 + 3 * t;
        Labels y = support::coin_labels(n, gen);
        y[0] = 0;
        y[1] = 1;
        Vector s = support::normal_vector(n, gen);
        if (t % 2 == 0) {
            for (auto& v : s) v = std::round(v * 2.0);
            ++tied_sets;
        }
        worst = std::max(worst, std::abs(auc(s, y) - support::brute_force_auc(s, y)));
    }
    Outcome o;
    o.pass = worst <= 1e-12;
    o.detail = "100 sets (" + std::to_string(tied_sets) + " with heavy ties), max error " + fmt(worst);
    return o;
}

// ------------------------------------------------------------------ 8, 9

MultiViewDataset fixture(Index n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    const Matrix signal = support::normal_matrix(n, 4, gen);
    const Labels y = support::logistic_labels(signal, Vector::Constant(4, 1.0), 0, gen);
    return MultiViewDataset({support::normal_matrix(n, 3, gen), signal, support::normal_matrix(n, 5, gen)},
                            y, {"clinical", "expression", "imaging"});
}

int cli(const std::vector<std::string>& args, std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (err_text) *err_text = err.str();
    return code;
}

Outcome criterion_determinism() {
    const auto start = Clock::now();
    support::TempDir dir("accept8");
    const auto data = fixture(100, 8);
    save_multiview_csv(data, dir.file("x.csv"), dir.file("y.csv"), dir.file("map.csv"));

    auto configs = scale_configs(preset_configs("sample_sweep"), 0.2);
    std::vector<SimulationConfig> small{configs[1], configs[12]};
    write_text(dir.file("cfg.json"), configs_to_json(small));

    std::vector<std::string> fit_models, gl_models, results, summaries;
    std::string err;
    for (const std::string threads : {"1", "4", "8", "1"}) {
        const std::string tag = std::to_string(fit_models.size());
        for (const std::string method : {"staplr", "group_lasso"}) {
            const std::string out = dir.file(method + tag + ".json");
            if (cli({"fit", "--method", method, "--features", dir.file("x.csv"), "--labels",
                     dir.file("y.csv"), "--viewmap", dir.file("map.csv"), "--seed", "17", "--k-folds",
                     "5", "--threads", threads, "--out", out},
                    &err) != 0)
                return {false, "fit failed: " + err};
            (method == "staplr" ? fit_models : gl_models).push_back(read_text(out));
        }
        const std::string out_dir = dir.file("exp" + tag);
        if (cli({"experiment", "--config", dir.file("cfg.json"), "--replications", "2", "--k-folds",
                 "5", "--n-lambda", "30", "--threads", threads, "--seed", "5", "--out-dir", out_dir},
                &err) != 0)
            return {false, "experiment failed: " + err};
        results.push_back(read_text(out_dir + "/results.csv"));
        summaries.push_back(read_text(out_dir + "/summary.json"));
    }
    auto all_same = [](const std::vector<std::string>& v) {
        return std::all_of(v.begin(), v.end(), [&](const std::string& s) { return s == v.front(); });
    };
    Outcome o;
    o.pass = all_same(fit_models) && all_same(gl_models) && all_same(results) && all_same(summaries);
    o.detail = std::string("fit (StaPLR ") + (all_same(fit_models) ? "identical" : "DIFFERS") +
               ", group lasso " + (all_same(gl_models) ? "identical" : "DIFFERS") +
               "), experiment (results " + (all_same(results) ? "identical" : "DIFFERS") +
               ", summary " + (all_same(summaries) ? "identical" : "DIFFERS") +
               ") across --threads 1, 4, 8 and a rerun, " + fmt(seconds_since(start)) + " s";
    return o;
}

Outcome criterion_pipeline() {
    support::TempDir dir("accept9");
    const auto original = fixture(100, 9);
    save_multiview_csv(original, dir.file("x.csv"), dir.file("y.csv"), dir.file("map.csv"));
    const auto data = load_multiview_csv(dir.file("x.csv"), dir.file("y.csv"), dir.file("map.csv"));
    bool loaded_exact = data.n_views() == 3;
    for (std::size_t v = 0; loaded_exact && v < 3; ++v)
        loaded_exact = data.view(v) == original.view(v);

    ModelDocument staplr;
    staplr.staplr = fit_staplr(data, LearnerSpec::ridge_base(), LearnerSpec::lasso_meta(true), 10, 3);
    ModelDocument gl;
    gl.group_lasso = fit_group_lasso_model(data, 10, 3);

    bool exact = loaded_exact;
    std::string detail = std::string("CSV load ") + (loaded_exact ? "bit-exact" : "DIFFERS");
    for (const auto& [name, doc] : {std::pair<std::string, const ModelDocument&>{"staplr", staplr},
                                    std::pair<std::string, const ModelDocument&>{"group_lasso", gl}}) {
        const Vector in_memory = doc.predict(data);
        save_model(dir.file(name + ".json"), doc);
        const auto reloaded = load_model(dir.file(name + ".json"));
        const FeatureTable table = read_features_csv(dir.file("x.csv"));
        const Vector from_disk =
            reloaded.predict(select_views(table, reloaded.view_names(), reloaded.feature_names()));
        std::string err;
        const int code = cli({"predict", "--model", dir.file(name + ".json"), "--features",
                              dir.file("x.csv"), "--out", dir.file(name + "_p.csv")},
                             &err);
        const bool cli_ok = code == 0 && read_scores_csv(dir.file(name + "_p.csv")) == in_memory;
        const bool ok = from_disk == in_memory && cli_ok;
        exact = exact && ok;
        detail += "; " + name + " reload " + (from_disk == in_memory ? "bit-exact" : "DIFFERS") +
                  ", CLI predict " + (cli_ok ? "bit-exact" : "DIFFERS " + err);
    }
    return {exact, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"StaPLR acceptance suite"};
    std::string mode = "fast";
    SimulationOptions sim;
    app.add_option("mode", mode, "fast, simulation or all")
        ->check(CLI::IsMember({"fast", "simulation", "all"}));
    app.add_option("--replications", sim.replications, "Replications per condition (criteria 5-6)");
    app.add_option("--workers", sim.workers, "Worker threads (0: all available)");
    CLI11_PARSE(app, argc, argv);

    const bool fast = mode == "fast" || mode == "all";
    const bool slow = mode == "simulation" || mode == "all";
    if (fast) {
        run(1, "lemma oracles", criterion_lemma_oracles);
        run(2, "degenerate linear stacking regime", criterion_lemma2);
        run(3, "solver correctness", criterion_solvers);
        run(4, "leave-one-out variance identity", criterion_variance_identity);
    }
    if (slow) criteria_simulation(sim);
    if (fast) {
        run(7, "AUC oracle", criterion_auc);
        run(8, "determinism across thread counts", criterion_determinism);
        run(9, "end-to-end CSV pipeline", criterion_pipeline);
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
