#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedps/dataset.hpp"

namespace fedps {

enum class PrepKind {
    MaxAbsScaler,
    MinMaxScaler,
    StandardScaler,
    RobustScaler,
    Normalizer,
    LabelBinarizer,
    MultiLabelBinarizer,
    LabelEncoder,
    OneHotEncoder,
    OrdinalEncoder,
    TargetEncoder,
    PowerTransformer,
    QuantileTransformer,
    SplineTransformer,
    Binarizer,
    KBinsDiscretizer,
    SimpleImputer,
    KNNImputer,
    IterativeImputer,
};

std::string prep_kind_name(PrepKind kind);
PrepKind prep_kind_from_name(const std::string& name);

struct PreprocessorSpec {
    PrepKind kind = PrepKind::StandardScaler;
    std::vector<std::string> columns;  // empty = all applicable columns
    std::string label_column;          // label encoders / TargetEncoder

    std::string norm = "l2";                    // Normalizer: l1|l2|max
    std::optional<std::uint64_t> min_count;     // encoders: infrequent threshold
    std::string method = "yeo-johnson";         // PowerTransformer: yeo-johnson|box-cox
    bool standardize = true;                    // PowerTransformer
    std::string output = "uniform";             // QuantileTransformer: uniform|normal
    int n_quantiles = 100;                      // QuantileTransformer
    std::string knots = "uniform";              // SplineTransformer: uniform|quantile
    int degree = 3;                             // SplineTransformer
    int n_knots = 5;                            // SplineTransformer
    double threshold = 0.0;                     // Binarizer
    std::string strategy = "uniform";           // KBins: uniform|quantile|kmeans;
                                                // SimpleImputer: mean|median|most_frequent
    int n_bins = 5;                             // KBinsDiscretizer
    int k = 5;                                  // KNNImputer neighbors
    std::string weights = "uniform";            // KNNImputer: uniform|distance
    int max_iter = 10;                          // IterativeImputer sweeps / k-means cap
    std::uint16_t sketch_k = 200;               // KLL size parameter
    std::size_t fi_capacity = 64;               // frequent-items counters
    std::uint64_t seed = 0;

    void validate() const;
    std::string name() const { return prep_kind_name(kind); }

    std::string to_json() const;
    static PreprocessorSpec from_json(const std::string& text);
};

/// Fitted per-column state; only the fields relevant to the spec's kind are
/// populated.
struct ColumnParams {
    std::optional<double> mu, sigma, min, max, maxabs, q1, q2, q3;
    bool constant = false;

    std::vector<std::string> categories;       // kept categories, global sort order
    std::set<std::string> infrequent;          // collapsed into one bucket
    std::map<std::string, double> encoding;    // TargetEncoder values
    double default_encoding = 0.0;             // TargetEncoder global mean

    std::optional<double> lambda;              // PowerTransformer
    std::vector<double> quantile_grid;         // QuantileTransformer references
    std::vector<double> knot_vector;           // SplineTransformer base knots
    std::vector<double> edges;                 // KBinsDiscretizer bin edges

    std::optional<double> fill_value;          // imputers (numeric)
    std::optional<std::string> fill_category;  // most-frequent on categoricals
};

struct CellFill {
    std::size_t row = 0;
    std::string column;
    double value = 0.0;
};

/// Per-feature regression used by the iterative imputer; prediction is
/// target_mean + (x - predictor_means) . weights.
struct FeatureModel {
    std::string target;
    std::vector<std::string> predictors;
    std::vector<double> weights;
    std::vector<double> predictor_means;
    double target_mean = 0.0;
};

struct FitParameters {
    PreprocessorSpec spec;
    std::map<std::string, ColumnParams> columns;
    std::vector<double> row_norms;                    // vertical Normalizer
    std::vector<FeatureModel> feature_models;         // IterativeImputer, visit order
    int sweeps = 0;                                   // IterativeImputer sweeps run
    std::vector<std::vector<CellFill>> client_fills;  // KNN/Iterative training fills
    std::vector<std::string> warnings;

    std::string to_json() const;
    static FitParameters from_json(const std::string& text);
};

}  // namespace fedps
