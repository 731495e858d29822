#include "staplr/io.hpp"

#include "staplr/error.hpp"
#include "staplr/rng.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#ifndef STAPLR_VERSION
#define STAPLR_VERSION "0.0.0"
#endif

namespace staplr {

using nlohmann::json;

std::string software_version() { return STAPLR_VERSION; }

// ---------------------------------------------------------------- text files

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open '" + path + "' for reading");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw InvalidArgument("failed writing '" + path + "'");
}

// ---------------------------------------------------------------- CSV

std::string format_double(double x) {
    if (std::isnan(x)) return "NA";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

bool try_parse_double(const std::string& raw, double& out) {
    const std::string text = trim(raw);
    if (text == "NA" || text == "NaN" || text == "nan") {
        out = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    if (text.empty()) return false;
    const char* begin = text.data();
    if (*begin == '+') ++begin;
    const auto res = std::from_chars(begin, text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

std::vector<std::string> split_csv_line(const std::string& line, const std::string& path,
                                        std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted)
        throw ParseError(path + " line " + std::to_string(line_no) + ": unterminated quote");
    fields.push_back(std::move(field));
    return fields;
}

std::string quote_field(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string join_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += quote_field(fields[i]);
    }
    return out;
}

}  // namespace

double parse_double(const std::string& text) {
    double value = 0.0;
    if (!try_parse_double(text, value)) throw ParseError("cannot parse '" + text + "' as a number");
    return value;
}

CsvTable read_csv(const std::string& path, bool has_header) {
    std::istringstream in(read_text(path));
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line, path, line_no);
        if (first) {
            width = fields.size();
            first = false;
            if (has_header) {
                for (auto& f : fields) f = trim(f);
                table.header = std::move(fields);
                continue;
            }
        }
        if (fields.size() != width)
            throw ParseError(path + " line " + std::to_string(line_no) + ": expected " +
                             std::to_string(width) + " fields, found " +
                             std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
        table.lines.push_back(line_no);
    }
    if (first) throw ParseError(path + ": file is empty");
    return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::string out;
    if (!table.header.empty()) out += join_row(table.header) + "\n";
    for (const auto& row : table.rows) out += join_row(row) + "\n";
    write_text(path, out);
}

FeatureTable read_features_csv(const std::string& path) {
    const CsvTable table = read_csv(path, true);
    FeatureTable out;
    out.names = table.header;
    std::set<std::string> seen;
    for (const auto& name : out.names) {
        if (name.empty()) throw ParseError(path + " line 1: empty feature name");
        if (!seen.insert(name).second)
            throw ParseError(path + " line 1: duplicate feature name '" + name + "'");
    }
    out.values.resize(static_cast<Index>(table.rows.size()), static_cast<Index>(out.names.size()));
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        for (std::size_t j = 0; j < out.names.size(); ++j) {
            double value = 0.0;
            if (!try_parse_double(table.rows[i][j], value) || !std::isfinite(value))
                throw ParseError(path + " line " + std::to_string(table.lines[i]) + ", column '" +
                                 out.names[j] + "': '" + table.rows[i][j] +
                                 "' is not a finite number");
            out.values(static_cast<Index>(i), static_cast<Index>(j)) = value;
        }
    return out;
}

void write_features_csv(const std::string& path, const std::vector<std::string>& names,
                        const Matrix& values) {
    if (static_cast<Index>(names.size()) != values.cols())
        throw InvalidArgument("feature names do not match the column count");
    std::string out = join_row(names) + "\n";
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index j = 0; j < values.cols(); ++j) {
            if (j) out += ',';
            out += format_double(values(i, j));
        }
        out += '\n';
    }
    write_text(path, out);
}

namespace {

// Single-column file; a first line that is not a number is treated as a header.
std::vector<std::pair<std::size_t, std::string>> read_single_column(const std::string& path) {
    const CsvTable table = read_csv(path, false);
    std::vector<std::pair<std::size_t, std::string>> values;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (table.rows[i].size() != 1)
            throw ParseError(path + " line " + std::to_string(table.lines[i]) +
                             ": expected a single column");
        double ignored = 0.0;
        if (i == 0 && !try_parse_double(table.rows[i][0], ignored)) continue;
        values.emplace_back(table.lines[i], trim(table.rows[i][0]));
    }
    return values;
}

}  // namespace

Labels read_labels_csv(const std::string& path) {
    const auto values = read_single_column(path);
    Labels y(static_cast<Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = 0.0;
        if (!try_parse_double(values[i].second, v) || !(v == 0.0 || v == 1.0))
            throw ParseError(path + " line " + std::to_string(values[i].first) + ": label '" +
                             values[i].second + "' is not binary (expected 0 or 1)");
        y[static_cast<Index>(i)] = static_cast<int>(v);
    }
    return y;
}

void write_labels_csv(const std::string& path, const Labels& y) {
    std::string out = "label\n";
    for (Index i = 0; i < y.size(); ++i) out += std::to_string(y[i]) + "\n";
    write_text(path, out);
}

Vector read_scores_csv(const std::string& path) {
    const auto values = read_single_column(path);
    Vector s(static_cast<Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = 0.0;
        if (!try_parse_double(values[i].second, v) || !std::isfinite(v))
            throw ParseError(path + " line " + std::to_string(values[i].first) + ": score '" +
                             values[i].second + "' is not a finite number");
        s[static_cast<Index>(i)] = v;
    }
    return s;
}

void write_scores_csv(const std::string& path, const std::string& column, const Vector& scores) {
    std::string out = column + "\n";
    for (Index i = 0; i < scores.size(); ++i) out += format_double(scores[i]) + "\n";
    write_text(path, out);
}

std::vector<std::pair<std::string, std::string>> read_viewmap_csv(const std::string& path) {
    const CsvTable table = read_csv(path, false);
    std::vector<std::pair<std::string, std::string>> out;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string line = path + " line " + std::to_string(table.lines[i]);
        if (row.size() != 2) throw ParseError(line + ": expected two columns (feature,view)");
        const std::string feature = trim(row[0]);
        const std::string view = trim(row[1]);
        if (i == 0 && feature == "feature" && view == "view") continue;
        if (feature.empty() || view.empty()) throw ParseError(line + ": empty feature or view name");
        if (!seen.insert(feature).second)
            throw ParseError(line + ": feature '" + feature + "' is mapped more than once");
        out.emplace_back(feature, view);
    }
    if (out.empty()) throw ParseError(path + ": view map is empty");
    return out;
}

MultiViewDataset load_multiview_csv(const std::string& features_path,
                                    const std::string& labels_path,
                                    const std::string& viewmap_path, const LoadOptions& options) {
    const FeatureTable table = read_features_csv(features_path);
    const Labels y = read_labels_csv(labels_path);
    if (table.values.rows() != y.size())
        throw InvalidArgument(features_path + " has " + std::to_string(table.values.rows()) +
                              " rows but " + labels_path + " has " + std::to_string(y.size()) +
                              " labels");
    const auto mapping = read_viewmap_csv(viewmap_path);

    std::unordered_map<std::string, std::size_t> mapped;
    for (const auto& [feature, view] : mapping) mapped.emplace(feature, 0);
    for (const auto& name : table.names)
        if (!mapped.count(name) && !options.drop_unmapped)
            throw InvalidArgument(features_path + ": feature '" + name +
                                  "' is not in the view map " + viewmap_path);

    std::vector<std::string> view_names;
    std::vector<std::vector<std::string>> feature_names;
    std::unordered_map<std::string, std::size_t> view_index;
    for (const auto& [feature, view] : mapping) {
        auto [it, inserted] = view_index.emplace(view, view_names.size());
        if (inserted) {
            view_names.push_back(view);
            feature_names.emplace_back();
        }
        feature_names[it->second].push_back(feature);
    }
    MultiViewDataset selected = select_views(table, view_names, feature_names);
    std::vector<Matrix> views = selected.views();
    if (options.standardize)
        for (std::size_t v = 0; v < views.size(); ++v) {
            try {
                views[v] = standardize_columns(views[v]).values;
            } catch (const ZeroVariance& e) {
                throw ZeroVariance("view '" + view_names[v] + "': " + e.what());
            }
        }
    return MultiViewDataset(std::move(views), y, std::move(view_names), std::move(feature_names));
}

void save_multiview_csv(const MultiViewDataset& data, const std::string& features_path,
                        const std::string& labels_path, const std::string& viewmap_path) {
    std::vector<std::string> names;
    std::string viewmap = "feature,view\n";
    for (std::size_t v = 0; v < data.n_views(); ++v)
        for (const auto& f : data.feature_names(v)) {
            names.push_back(f);
            viewmap += join_row({f, data.view_names()[v]}) + "\n";
        }
    write_features_csv(features_path, names, data.concatenated());
    write_labels_csv(labels_path, data.outcomes());
    write_text(viewmap_path, viewmap);
}

MultiViewDataset select_views(const FeatureTable& table,
                              const std::vector<std::string>& view_names,
                              const std::vector<std::vector<std::string>>& feature_names) {
    std::unordered_map<std::string, Index> column;
    for (std::size_t j = 0; j < table.names.size(); ++j)
        column.emplace(table.names[j], static_cast<Index>(j));
    std::vector<Matrix> views;
    for (std::size_t v = 0; v < feature_names.size(); ++v) {
        Matrix X(table.values.rows(), static_cast<Index>(feature_names[v].size()));
        for (std::size_t j = 0; j < feature_names[v].size(); ++j) {
            const auto it = column.find(feature_names[v][j]);
            if (it == column.end())
                throw InvalidArgument("feature '" + feature_names[v][j] + "' of view '" +
                                      view_names[v] + "' is missing from the feature table");
            X.col(static_cast<Index>(j)) = table.values.col(it->second);
        }
        views.push_back(std::move(X));
    }
    return MultiViewDataset(std::move(views), Labels::Zero(table.values.rows()), view_names,
                            feature_names);
}

// ---------------------------------------------------------------- JSON helpers

namespace {

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

json matrix_json(const Matrix& M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) rows.push_back(vector_json(M.row(i).transpose()));
    return rows;
}

Matrix matrix_from(const json& j, Index cols) {
    Matrix M(static_cast<Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Vector row = vector_from(j[i]);
        if (row.size() != cols) throw ParseError("matrix row has the wrong length");
        M.row(static_cast<Index>(i)) = row.transpose();
    }
    return M;
}

json penalty_json(const PenaltySpec& p) {
    return {{"family", to_string(p.family)},
            {"alpha", p.alpha},
            {"lambda", p.lambda},
            {"nonnegative", p.nonnegative}};
}

PenaltySpec penalty_from(const json& j) {
    PenaltySpec p;
    p.family = penalty_family_from_string(j.at("family").get<std::string>());
    p.alpha = j.at("alpha").get<double>();
    p.lambda = j.at("lambda").get<double>();
    p.nonnegative = j.at("nonnegative").get<bool>();
    return p;
}

json linear_model_json(const FittedLinearModel& m) {
    json j = {{"intercept", m.intercept},
              {"coefficients", vector_json(m.coefficients)},
              {"penalty", penalty_json(m.penalty)},
              {"converged", m.converged},
              {"n_iterations", m.n_iterations}};
    if (m.standardization.empty())
        j["standardization"] = nullptr;
    else
        j["standardization"] = {{"means", vector_json(m.standardization.means)},
                                {"scales", vector_json(m.standardization.scales)}};
    return j;
}

FittedLinearModel linear_model_from(const json& j) {
    FittedLinearModel m;
    m.intercept = j.at("intercept").get<double>();
    m.coefficients = vector_from(j.at("coefficients"));
    m.penalty = penalty_from(j.at("penalty"));
    m.converged = j.at("converged").get<bool>();
    m.n_iterations = j.at("n_iterations").get<int>();
    const auto& s = j.at("standardization");
    if (!s.is_null()) {
        m.standardization.means = vector_from(s.at("means"));
        m.standardization.scales = vector_from(s.at("scales"));
        if (m.standardization.means.size() != m.coefficients.size() ||
            m.standardization.scales.size() != m.coefficients.size())
            throw ParseError("standardization does not match the coefficient count");
    }
    return m;
}

json learner_spec_json(const LearnerSpec& s) {
    return {{"family", to_string(s.family)},
            {"alpha", s.alpha},
            {"nonnegative", s.nonnegative},
            {"n_lambda", s.n_lambda},
            {"K", s.K},
            {"epsilon", s.epsilon},
            {"standardize", s.standardize},
            {"nested_tuning", s.nested_tuning},
            {"stratify_tuning", s.stratify_tuning},
            {"intercept_only", s.intercept_only},
            {"fixed_lambda", s.fixed_lambda ? json(*s.fixed_lambda) : json(nullptr)},
            {"link", s.link == Link::identity ? "identity" : "logistic"},
            {"solver",
             {{"coef_tolerance", s.solver.coef_tolerance},
              {"max_outer_iterations", s.solver.max_outer_iterations},
              {"max_inner_iterations", s.solver.max_inner_iterations},
              {"weight_floor", s.solver.weight_floor}}}};
}

LearnerSpec learner_spec_from(const json& j) {
    LearnerSpec s;
    s.family = penalty_family_from_string(j.at("family").get<std::string>());
    s.alpha = j.at("alpha").get<double>();
    s.nonnegative = j.at("nonnegative").get<bool>();
    s.n_lambda = j.at("n_lambda").get<int>();
    s.K = j.at("K").get<int>();
    s.epsilon = j.at("epsilon").get<double>();
    s.standardize = j.at("standardize").get<bool>();
    s.nested_tuning = j.at("nested_tuning").get<bool>();
    s.stratify_tuning = j.at("stratify_tuning").get<bool>();
    s.intercept_only = j.at("intercept_only").get<bool>();
    if (!j.at("fixed_lambda").is_null()) s.fixed_lambda = j.at("fixed_lambda").get<double>();
    const auto link = j.at("link").get<std::string>();
    if (link == "identity")
        s.link = Link::identity;
    else if (link == "logistic")
        s.link = Link::logistic;
    else
        throw ParseError("unknown link '" + link + "'");
    const auto& solver = j.at("solver");
    s.solver.coef_tolerance = solver.at("coef_tolerance").get<double>();
    s.solver.max_outer_iterations = solver.at("max_outer_iterations").get<int>();
    s.solver.max_inner_iterations = solver.at("max_inner_iterations").get<long>();
    s.solver.weight_floor = solver.at("weight_floor").get<double>();
    return s;
}

void check_schema(const json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("schema_version"))
        throw ParseError(what + ": missing schema_version");
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion)
        throw ParseError(what + ": unsupported schema_version " + std::to_string(version));
}

}  // namespace

// ---------------------------------------------------------------- models

GroupLassoModel fit_group_lasso_model(const MultiViewDataset& data, int K, std::uint64_t seed,
                                      int n_lambda, const SolverSettings& settings) {
    GroupLassoModel out;
    out.groups = GroupStructure::from_map(data.feature_groups());
    out.model = train_group_lasso(data.concatenated(), data.outcomes(), out.groups, K,
                                  derive_seed(seed, {stream::group_lasso}), n_lambda, -1.0,
                                  settings, true)
                    .model;
    out.view_names = data.view_names();
    for (std::size_t v = 0; v < data.n_views(); ++v) out.feature_names.push_back(data.feature_names(v));
    return out;
}

Vector predict_group_lasso(const GroupLassoModel& model, const MultiViewDataset& data) {
    const Matrix X = data.concatenated();
    if (X.cols() != model.model.n_features())
        throw InvalidArgument("data has " + std::to_string(X.cols()) + " features, model expects " +
                              std::to_string(model.model.n_features()));
    return predict_proba(model.model, X);
}

std::vector<int> selected_views(const GroupLassoModel& model) {
    return selected_groups(model.model, model.groups);
}

const std::vector<std::string>& ModelDocument::view_names() const {
    if (staplr) return staplr->view_names;
    if (group_lasso) return group_lasso->view_names;
    throw InvalidArgument("empty model document");
}

const std::vector<std::vector<std::string>>& ModelDocument::feature_names() const {
    if (staplr) return staplr->feature_names;
    if (group_lasso) return group_lasso->feature_names;
    throw InvalidArgument("empty model document");
}

Vector ModelDocument::predict(const MultiViewDataset& data) const {
    if (staplr) return predict_stacked(*staplr, data);
    if (group_lasso) return predict_group_lasso(*group_lasso, data);
    throw InvalidArgument("empty model document");
}

std::string model_to_json(const ModelDocument& doc) {
    json j;
    j["schema_version"] = kSchemaVersion;
    if (doc.staplr) {
        const StackedModel& m = *doc.staplr;
        j["kind"] = "staplr";
        j["seed"] = m.seed;
        json views = json::array();
        for (std::size_t v = 0; v < m.base_models.size(); ++v)
            views.push_back({{"name", m.view_names[v]},
                             {"features", m.feature_names[v]},
                             {"spec", learner_spec_json(m.base_specs[v])},
                             {"model", linear_model_json(m.base_models[v])}});
        j["views"] = std::move(views);
        j["meta"] = {{"spec", learner_spec_json(m.meta_spec)},
                     {"model", linear_model_json(m.meta_model)}};
        std::vector<int> folds;
        for (int a : m.fold_partition.assignments()) folds.push_back(a + 1);
        j["folds"] = folds;
        j["cv_predictions"] = matrix_json(m.z_matrix);
    } else if (doc.group_lasso) {
        const GroupLassoModel& m = *doc.group_lasso;
        j["kind"] = "group_lasso";
        json views = json::array();
        for (std::size_t v = 0; v < m.view_names.size(); ++v)
            views.push_back({{"name", m.view_names[v]},
                             {"features", m.feature_names[v]},
                             {"weight", m.groups.weights[v]}});
        j["views"] = std::move(views);
        j["model"] = linear_model_json(m.model);
    } else {
        throw InvalidArgument("empty model document");
    }
    return j.dump(1) + "\n";
}

ModelDocument model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("model document is not valid JSON: ") + e.what());
    }
    check_schema(j, "model document");
    ModelDocument doc;
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "staplr") {
            StackedModel m{{}, {}, {}, FoldPartition({0}, 1), {}, {}, 0, {}, {}};
            m.seed = j.at("seed").get<std::uint64_t>();
            for (const auto& v : j.at("views")) {
                m.view_names.push_back(v.at("name").get<std::string>());
                m.feature_names.push_back(v.at("features").get<std::vector<std::string>>());
                m.base_specs.push_back(learner_spec_from(v.at("spec")));
                m.base_models.push_back(linear_model_from(v.at("model")));
                if (m.base_models.back().n_features() !=
                    static_cast<Index>(m.feature_names.back().size()))
                    throw ParseError("view '" + m.view_names.back() +
                                     "': coefficient count does not match feature names");
            }
            m.meta_spec = learner_spec_from(j.at("meta").at("spec"));
            m.meta_model = linear_model_from(j.at("meta").at("model"));
            if (m.meta_model.n_features() != static_cast<Index>(m.base_models.size()))
                throw ParseError("combiner coefficient count does not match the view count");
            auto folds = j.at("folds").get<std::vector<int>>();
            int K = 0;
            for (int& a : folds) {
                a -= 1;
                K = std::max(K, a + 1);
            }
            m.fold_partition = FoldPartition(std::move(folds), K);
            m.z_matrix = matrix_from(j.at("cv_predictions"), static_cast<Index>(m.base_models.size()));
            doc.staplr = std::move(m);
        } else if (kind == "group_lasso") {
            GroupLassoModel m;
            Index offset = 0;
            for (const auto& v : j.at("views")) {
                m.view_names.push_back(v.at("name").get<std::string>());
                m.feature_names.push_back(v.at("features").get<std::vector<std::string>>());
                std::vector<Index> group;
                for (std::size_t f = 0; f < m.feature_names.back().size(); ++f)
                    group.push_back(offset++);
                m.groups.groups.push_back(std::move(group));
                m.groups.weights.push_back(v.at("weight").get<double>());
            }
            m.model = linear_model_from(j.at("model"));
            if (m.model.n_features() != offset)
                throw ParseError("coefficient count does not match the feature names");
            m.groups.validate(offset);
            m.model.penalty.group_map = m.groups.to_map(offset);
            doc.group_lasso = std::move(m);
        } else {
            throw ParseError("unknown model kind '" + kind + "'");
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed model document: ") + e.what());
    }
    return doc;
}

void save_model(const std::string& path, const ModelDocument& model) {
    write_text(path, model_to_json(model));
}

ModelDocument load_model(const std::string& path) { return model_from_json(read_text(path)); }

// ---------------------------------------------------------------- experiments

std::string configs_to_json(const std::vector<SimulationConfig>& configs) {
    json list = json::array();
    for (const auto& c : configs)
        list.push_back({{"name", c.name},
                        {"n", c.n},
                        {"view_sizes", c.view_sizes},
                        {"rho_w", c.rho_w},
                        {"rho_b", c.rho_b},
                        {"signal_probs", c.signal_probs},
                        {"beta_rule", c.beta_rule == BetaRule::fixed ? "fixed" : "inverse_sqrt_view_size"},
                        {"beta_magnitude", c.beta_magnitude},
                        {"intercept", c.intercept},
                        {"seed", c.seed},
                        {"replications", c.replications},
                        {"test_n", c.test_n}});
    json j = {{"schema_version", kSchemaVersion}, {"conditions", std::move(list)}};
    return j.dump(1) + "\n";
}

std::vector<SimulationConfig> configs_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    check_schema(j, "experiment config");
    std::vector<SimulationConfig> out;
    try {
        std::size_t index = 0;
        for (const auto& c : j.at("conditions")) {
            SimulationConfig cfg;
            ++index;
            cfg.name = c.value("name", "condition" + std::to_string(index));
            cfg.n = c.at("n").get<Index>();
            cfg.view_sizes = c.at("view_sizes").get<std::vector<Index>>();
            cfg.rho_w = c.value("rho_w", 0.0);
            cfg.rho_b = c.value("rho_b", 0.0);
            cfg.signal_probs = c.at("signal_probs").get<std::vector<double>>();
            const auto rule = c.value("beta_rule", std::string("fixed"));
            if (rule == "fixed")
                cfg.beta_rule = BetaRule::fixed;
            else if (rule == "inverse_sqrt_view_size")
                cfg.beta_rule = BetaRule::inverse_sqrt_view_size;
            else
                throw ParseError("condition '" + cfg.name + "': unknown beta_rule '" + rule + "'");
            cfg.beta_magnitude = c.value("beta_magnitude", 0.04);
            cfg.intercept = c.value("intercept", 0.0);
            cfg.seed = c.value("seed", std::uint64_t{1});
            cfg.replications = c.value("replications", 100);
            cfg.test_n = c.value("test_n", Index{0});
            try {
                cfg.validate();
            } catch (const Error& e) {
                throw ParseError("condition '" + cfg.name + "': " + e.what());
            }
            out.push_back(std::move(cfg));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed experiment config: ") + e.what());
    }
    if (out.empty()) throw ParseError("experiment config lists no conditions");
    return out;
}

namespace {

std::string join_ids(const std::vector<int>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(ids[i] + 1);
    }
    return out;
}

}  // namespace

std::string results_to_csv(const ExperimentResult& result) {
    std::string out =
        "condition,replication,method,selected_views,n_selected_views,selected_features,auc,"
        "accuracy,error\n";
    for (const auto& r : result.rows) {
        out += join_row({r.condition_name, std::to_string(r.replication + 1), to_string(r.method),
                         join_ids(r.selected_views),
                         r.error.empty() ? std::to_string(r.selected_views.size()) : "NA",
                         r.error.empty() ? std::to_string(r.selected_features) : "NA",
                         format_double(r.auc), format_double(r.accuracy), r.error});
        out += '\n';
    }
    return out;
}

std::vector<SelectionRecord> selection_records(const ExperimentResult& result) {
    std::vector<SelectionRecord> records;
    for (const auto& r : result.rows) {
        if (!r.error.empty()) continue;
        SelectionRecord rec;
        rec.method = to_string(r.method);
        rec.condition = r.condition_name;
        rec.replication = r.replication;
        rec.selected_views = r.selected_views;
        rec.selected_features = r.selected_features;
        rec.view_signal_probs = result.configs[r.condition].signal_probs;
        records.push_back(std::move(rec));
    }
    return records;
}

std::string summary_to_json(const ExperimentResult& result) {
    const SelectionSummary summary = selection_summary(selection_records(result));
    // Failures and mean test metrics per (condition, method).
    struct Extra {
        int failed = 0;
        double auc_sum = 0.0;
        int auc_count = 0;
        double acc_sum = 0.0;
        int acc_count = 0;
    };
    std::map<std::pair<std::string, std::string>, Extra> extra;
    for (const auto& r : result.rows) {
        auto& e = extra[{r.condition_name, to_string(r.method)}];
        if (!r.error.empty()) {
            ++e.failed;
            continue;
        }
        if (!std::isnan(r.auc)) {
            e.auc_sum += r.auc;
            ++e.auc_count;
        }
        if (!std::isnan(r.accuracy)) {
            e.acc_sum += r.accuracy;
            ++e.acc_count;
        }
    }
    json conditions = json::array();
    for (const auto& cfg : result.configs) {
        json methods = json::object();
        for (const auto& [key, e] : extra) {
            if (key.first != cfg.name) continue;
            json m = {{"failed", e.failed}};
            const auto it = summary.cells.find(key);
            if (it != summary.cells.end()) {
                const MethodSummary& s = it->second;
                m["models"] = s.models;
                m["mean_selected_views"] = s.mean_selected_views;
                m["mean_selected_features"] = s.mean_selected_features;
                m["fraction_selecting_none"] = s.fraction_selecting_none;
                json groups = json::array();
                for (auto g = s.inclusion.rbegin(); g != s.inclusion.rend(); ++g)
                    groups.push_back({{"signal_prob", g->first},
                                      {"views", g->second.views_in_group},
                                      {"mean", g->second.mean},
                                      {"q25", g->second.q25},
                                      {"median", g->second.median},
                                      {"q75", g->second.q75}});
                m["inclusion"] = std::move(groups);
            } else {
                m["models"] = 0;
            }
            m["mean_auc"] = e.auc_count ? json(e.auc_sum / e.auc_count) : json(nullptr);
            m["mean_accuracy"] = e.acc_count ? json(e.acc_sum / e.acc_count) : json(nullptr);
            methods[key.second] = std::move(m);
        }
        conditions.push_back({{"name", cfg.name},
                              {"n", cfg.n},
                              {"rho_w", cfg.rho_w},
                              {"rho_b", cfg.rho_b},
                              {"replications", cfg.replications},
                              {"methods", std::move(methods)}});
    }
    json j = {{"schema_version", kSchemaVersion}, {"conditions", std::move(conditions)}};
    return j.dump(1) + "\n";
}

// ---------------------------------------------------------------- manifest

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

namespace {

std::string iso_utc(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

RunManifest::RunManifest(std::string command, std::string config_text, std::uint64_t seed)
    : command_(std::move(command)),
      config_text_(std::move(config_text)),
      seed_(seed),
      started_(std::chrono::system_clock::now()) {}

void RunManifest::add_stage(const std::string& name, double seconds) {
    stages_.emplace_back(name, seconds);
}

void RunManifest::add_output(const std::string& path) { outputs_.push_back(path); }

std::string RunManifest::config_hash() const { return fnv1a_hex(config_text_); }

std::string RunManifest::to_json() const {
    json stages = json::array();
    for (const auto& [name, seconds] : stages_) stages.push_back({{"stage", name}, {"seconds", seconds}});
    json j = {{"schema_version", kSchemaVersion},
              {"command", command_},
              {"config_hash", config_hash()},
              {"seed", seed_},
              {"version", software_version()},
              {"started_at", iso_utc(started_)},
              {"finished_at", iso_utc(std::chrono::system_clock::now())},
              {"stages", std::move(stages)},
              {"outputs", outputs_}};
    return j.dump(1) + "\n";
}

void RunManifest::write(const std::string& path) const { write_text(path, to_json()); }

// ---------------------------------------------------------------- evaluation

SplitProtocolResult repeated_split_protocol(const MultiViewDataset& data,
                                            const SplitProtocolOptions& options,
                                            std::uint64_t seed) {
    if (options.repeats < 1) throw InvalidArgument("repeats must be at least 1");
    if (options.folds < 2) throw InvalidArgument("folds must be at least 2");
    if (options.methods.empty()) throw InvalidArgument("at least one method is required");
    const Labels& y = data.outcomes();
    require_both_classes(y);
    const std::vector<int> labels(y.data(), y.data() + y.size());
    const auto wants = [&](Method m) {
        return std::find(options.methods.begin(), options.methods.end(), m) != options.methods.end();
    };

    SplitProtocolResult result;
    for (int r = 0; r < options.repeats; ++r) {
        const std::uint64_t split_seed =
            derive_seed(seed, {stream::split, static_cast<std::uint64_t>(r)});
        std::optional<FoldPartition> folds;
        try {
            folds = make_folds(data.n_rows(), options.folds, split_seed,
                               std::span<const int>(labels));
        } catch (const Error& e) {
            result.skipped.emplace_back(r, e.what());
            continue;
        }
        for (int k = 0; k < folds->K(); ++k) {
            const auto train_rows = folds->complement(k);
            const auto test_rows = folds->members(k);
            const MultiViewDataset train = data.subset_rows(train_rows);
            const MultiViewDataset test = data.subset_rows(test_rows);
            const std::uint64_t fit_seed = derive_seed(split_seed, {static_cast<std::uint64_t>(k)});

            std::optional<BaseLevelFit> base;
            std::string base_error;
            if (wants(Method::staplr_nn) || wants(Method::staplr_unconstrained)) {
                try {
                    base = fit_base_level(
                        train, std::vector<LearnerSpec>(train.n_views(), options.base_spec),
                        options.K, fit_seed, options.threads);
                } catch (const std::exception& e) {
                    base_error = e.what();
                }
            }
            for (Method m : options.methods) {
                SplitRow row;
                row.repeat = r;
                row.fold = k;
                row.method = m;
                row.auc = std::numeric_limits<double>::quiet_NaN();
                row.accuracy = std::numeric_limits<double>::quiet_NaN();
                try {
                    Vector p;
                    if (m == Method::group_lasso) {
                        const auto model = fit_group_lasso_model(
                            train, options.K, fit_seed, options.base_spec.n_lambda,
                            options.base_spec.solver);
                        p = predict_group_lasso(model, test);
                        row.selected_views = selected_views(model).size();
                        row.selected_features = (model.model.coefficients.array() != 0.0).count();
                    } else {
                        if (!base) throw std::runtime_error(base_error);
                        const auto model = fit_meta_level(
                            *base, train, LearnerSpec::lasso_meta(m == Method::staplr_nn));
                        p = predict_stacked(model, test);
                        row.selected_views = selected_views(model).size();
                        row.selected_features = selected_feature_count(model);
                    }
                    row.accuracy = accuracy(p, test.outcomes());
                    row.auc = auc(p, test.outcomes());
                } catch (const std::exception& e) {
                    row.error = e.what();
                    if (row.error.empty()) row.error = "unknown failure";
                }
                result.rows.push_back(std::move(row));
            }
        }
    }
    for (Method m : options.methods) {
        int fitted = 0, none = 0;
        for (const auto& row : result.rows)
            if (row.method == m && row.error.empty()) {
                ++fitted;
                none += row.selected_views == 0 ? 1 : 0;
            }
        result.fraction_zero_views.emplace_back(
            m, fitted ? static_cast<double>(none) / fitted : std::numeric_limits<double>::quiet_NaN());
    }
    return result;
}

std::string split_rows_to_csv(const SplitProtocolResult& result) {
    std::string out = "repeat,fold,method,auc,accuracy,selected_views,selected_features,error\n";
    for (const auto& r : result.rows) {
        out += join_row({std::to_string(r.repeat + 1), std::to_string(r.fold + 1),
                         to_string(r.method), format_double(r.auc), format_double(r.accuracy),
                         r.error.empty() ? std::to_string(r.selected_views) : "NA",
                         r.error.empty() ? std::to_string(r.selected_features) : "NA", r.error});
        out += '\n';
    }
    return out;
}

}  // namespace staplr
