#include "fedps/prep.hpp"

#include <json.hpp>

#include "fedps/errors.hpp"

namespace fedps {

namespace {

const std::map<std::string, PrepKind>& kind_table() {
    static const std::map<std::string, PrepKind> table = {
        {"MaxAbsScaler", PrepKind::MaxAbsScaler},
        {"MinMaxScaler", PrepKind::MinMaxScaler},
        {"StandardScaler", PrepKind::StandardScaler},
        {"RobustScaler", PrepKind::RobustScaler},
        {"Normalizer", PrepKind::Normalizer},
        {"LabelBinarizer", PrepKind::LabelBinarizer},
        {"MultiLabelBinarizer", PrepKind::MultiLabelBinarizer},
        {"LabelEncoder", PrepKind::LabelEncoder},
        {"OneHotEncoder", PrepKind::OneHotEncoder},
        {"OrdinalEncoder", PrepKind::OrdinalEncoder},
        {"TargetEncoder", PrepKind::TargetEncoder},
        {"PowerTransformer", PrepKind::PowerTransformer},
        {"QuantileTransformer", PrepKind::QuantileTransformer},
        {"SplineTransformer", PrepKind::SplineTransformer},
        {"Binarizer", PrepKind::Binarizer},
        {"KBinsDiscretizer", PrepKind::KBinsDiscretizer},
        {"SimpleImputer", PrepKind::SimpleImputer},
        {"KNNImputer", PrepKind::KNNImputer},
        {"IterativeImputer", PrepKind::IterativeImputer},
    };
    return table;
}

void put_opt(nlohmann::json& j, const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
}

std::optional<double> get_opt(const nlohmann::json& j, const char* key) {
    if (j.contains(key)) return j.at(key).get<double>();
    return std::nullopt;
}

}  // namespace

std::string prep_kind_name(PrepKind kind) {
    for (const auto& [name, k] : kind_table())
        if (k == kind) return name;
    throw InvalidValue("unknown preprocessor kind");
}

PrepKind prep_kind_from_name(const std::string& name) {
    auto it = kind_table().find(name);
    if (it == kind_table().end()) throw InvalidValue("unknown preprocessor name '" + name + "'");
    return it->second;
}

void PreprocessorSpec::validate() const {
    auto expect = [&](bool ok, const std::string& msg) {
        if (!ok) throw InvalidValue(name() + ": " + msg);
    };
    expect(n_bins >= 2, "n_bins must be >= 2");
    expect(degree >= 1, "degree must be >= 1");
    expect(k >= 1, "k must be >= 1");
    expect(n_quantiles >= 2, "n_quantiles must be >= 2");
    expect(n_knots >= 2, "n_knots must be >= 2");
    expect(max_iter >= 1, "max_iter must be >= 1");
    expect(fi_capacity >= 1, "frequent-items capacity must be >= 1");
    if (kind == PrepKind::Normalizer)
        expect(norm == "l1" || norm == "l2" || norm == "max", "norm must be l1, l2, or max");
    if (kind == PrepKind::PowerTransformer)
        expect(method == "yeo-johnson" || method == "box-cox",
               "method must be yeo-johnson or box-cox");
    if (kind == PrepKind::QuantileTransformer)
        expect(output == "uniform" || output == "normal", "output must be uniform or normal");
    if (kind == PrepKind::SplineTransformer)
        expect(knots == "uniform" || knots == "quantile", "knots must be uniform or quantile");
    if (kind == PrepKind::KBinsDiscretizer)
        expect(strategy == "uniform" || strategy == "quantile" || strategy == "kmeans",
               "strategy must be uniform, quantile, or kmeans");
    if (kind == PrepKind::SimpleImputer)
        expect(strategy == "mean" || strategy == "median" || strategy == "most_frequent",
               "strategy must be mean, median, or most_frequent");
    if (kind == PrepKind::KNNImputer)
        expect(weights == "uniform" || weights == "distance",
               "weights must be uniform or distance");
}

std::string PreprocessorSpec::to_json() const {
    nlohmann::json j;
    j["kind"] = name();
    if (!columns.empty()) j["columns"] = columns;
    if (!label_column.empty()) j["label_column"] = label_column;
    j["norm"] = norm;
    if (min_count) j["min_count"] = *min_count;
    j["method"] = method;
    j["standardize"] = standardize;
    j["output"] = output;
    j["n_quantiles"] = n_quantiles;
    j["knots"] = knots;
    j["degree"] = degree;
    j["n_knots"] = n_knots;
    j["threshold"] = threshold;
    j["strategy"] = strategy;
    j["n_bins"] = n_bins;
    j["k"] = k;
    j["weights"] = weights;
    j["max_iter"] = max_iter;
    j["sketch_k"] = sketch_k;
    j["fi_capacity"] = fi_capacity;
    j["seed"] = seed;
    return j.dump(2);
}

PreprocessorSpec PreprocessorSpec::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    PreprocessorSpec s;
    s.kind = prep_kind_from_name(j.at("kind").get<std::string>());
    s.columns = j.value("columns", std::vector<std::string>{});
    s.label_column = j.value("label_column", std::string{});
    s.norm = j.value("norm", s.norm);
    if (j.contains("min_count")) s.min_count = j.at("min_count").get<std::uint64_t>();
    s.method = j.value("method", s.method);
    s.standardize = j.value("standardize", s.standardize);
    s.output = j.value("output", s.output);
    s.n_quantiles = j.value("n_quantiles", s.n_quantiles);
    s.knots = j.value("knots", s.knots);
    s.degree = j.value("degree", s.degree);
    s.n_knots = j.value("n_knots", s.n_knots);
    s.threshold = j.value("threshold", s.threshold);
    s.strategy = j.value("strategy", s.strategy);
    s.n_bins = j.value("n_bins", s.n_bins);
    s.k = j.value("k", s.k);
    s.weights = j.value("weights", s.weights);
    s.max_iter = j.value("max_iter", s.max_iter);
    s.sketch_k = j.value("sketch_k", s.sketch_k);
    s.fi_capacity = j.value("fi_capacity", s.fi_capacity);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
}

std::string FitParameters::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["spec"] = nlohmann::json::parse(spec.to_json());
    nlohmann::json cols = nlohmann::json::object();
    for (const auto& [name, p] : columns) {
        nlohmann::json c;
        put_opt(c, "mu", p.mu);
        put_opt(c, "sigma", p.sigma);
        put_opt(c, "min", p.min);
        put_opt(c, "max", p.max);
        put_opt(c, "maxabs", p.maxabs);
        put_opt(c, "q1", p.q1);
        put_opt(c, "q2", p.q2);
        put_opt(c, "q3", p.q3);
        if (p.constant) c["constant"] = true;
        if (!p.categories.empty()) c["categories"] = p.categories;
        if (!p.infrequent.empty())
            c["infrequent"] = std::vector<std::string>(p.infrequent.begin(), p.infrequent.end());
        if (!p.encoding.empty()) {
            c["encoding"] = p.encoding;
            c["default_encoding"] = p.default_encoding;
        }
        put_opt(c, "lambda", p.lambda);
        if (!p.quantile_grid.empty()) c["quantile_grid"] = p.quantile_grid;
        if (!p.knot_vector.empty()) c["knot_vector"] = p.knot_vector;
        if (!p.edges.empty()) c["edges"] = p.edges;
        put_opt(c, "fill_value", p.fill_value);
        if (p.fill_category) c["fill_category"] = *p.fill_category;
        cols[name] = std::move(c);
    }
    j["columns"] = std::move(cols);
    if (!row_norms.empty()) j["row_norms"] = row_norms;
    if (!feature_models.empty()) {
        nlohmann::json models = nlohmann::json::array();
        for (const auto& fm : feature_models) {
            nlohmann::json m;
            m["target"] = fm.target;
            m["predictors"] = fm.predictors;
            m["weights"] = fm.weights;
            m["predictor_means"] = fm.predictor_means;
            m["target_mean"] = fm.target_mean;
            models.push_back(std::move(m));
        }
        j["feature_models"] = std::move(models);
        j["sweeps"] = sweeps;
    }
    if (!client_fills.empty()) {
        nlohmann::json fills = nlohmann::json::array();
        for (const auto& per_client : client_fills) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& f : per_client)
                arr.push_back({{"row", f.row}, {"column", f.column}, {"value", f.value}});
            fills.push_back(std::move(arr));
        }
        j["client_fills"] = std::move(fills);
    }
    if (!warnings.empty()) j["warnings"] = warnings;
    return j.dump(2);
}

FitParameters FitParameters::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid parameters document: ") + e.what());
    }
    FitParameters p;
    try {
        p.spec = PreprocessorSpec::from_json(j.at("spec").dump());
        for (const auto& [name, c] : j.at("columns").items()) {
            ColumnParams cp;
            cp.mu = get_opt(c, "mu");
            cp.sigma = get_opt(c, "sigma");
            cp.min = get_opt(c, "min");
            cp.max = get_opt(c, "max");
            cp.maxabs = get_opt(c, "maxabs");
            cp.q1 = get_opt(c, "q1");
            cp.q2 = get_opt(c, "q2");
            cp.q3 = get_opt(c, "q3");
            cp.constant = c.value("constant", false);
            cp.categories = c.value("categories", std::vector<std::string>{});
            auto infreq = c.value("infrequent", std::vector<std::string>{});
            cp.infrequent.insert(infreq.begin(), infreq.end());
            if (c.contains("encoding")) {
                cp.encoding = c.at("encoding").get<std::map<std::string, double>>();
                cp.default_encoding = c.value("default_encoding", 0.0);
            }
            cp.lambda = get_opt(c, "lambda");
            cp.quantile_grid = c.value("quantile_grid", std::vector<double>{});
            cp.knot_vector = c.value("knot_vector", std::vector<double>{});
            cp.edges = c.value("edges", std::vector<double>{});
            cp.fill_value = get_opt(c, "fill_value");
            if (c.contains("fill_category"))
                cp.fill_category = c.at("fill_category").get<std::string>();
            p.columns[name] = std::move(cp);
        }
        p.row_norms = j.value("row_norms", std::vector<double>{});
        if (j.contains("feature_models")) {
            for (const auto& m : j.at("feature_models")) {
                FeatureModel fm;
                fm.target = m.at("target").get<std::string>();
                fm.predictors = m.at("predictors").get<std::vector<std::string>>();
                fm.weights = m.at("weights").get<std::vector<double>>();
                fm.predictor_means = m.at("predictor_means").get<std::vector<double>>();
                fm.target_mean = m.at("target_mean").get<double>();
                p.feature_models.push_back(std::move(fm));
            }
            p.sweeps = j.value("sweeps", 0);
        }
        if (j.contains("client_fills")) {
            for (const auto& per_client : j.at("client_fills")) {
                std::vector<CellFill> fills;
                for (const auto& f : per_client)
                    fills.push_back({f.at("row").get<std::size_t>(),
                                     f.at("column").get<std::string>(),
                                     f.at("value").get<double>()});
                p.client_fills.push_back(std::move(fills));
            }
        }
        p.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid parameters document: ") + e.what());
    }
    return p;
}

}  // namespace fedps
