#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fedps/prep.hpp"

namespace fedps {

/// Centralized reference fit over the pooled table. Shares no code with the
/// federated path: quantiles come from full sorts, counts are exact, and the
/// iterative models run on the pooled matrix directly.
FitParameters central_fit(const PreprocessorSpec& spec, const ColumnarDataset& full);

struct OracleCheck {
    std::string name;
    bool pass = false;
    double error = 0.0;
    std::string detail;
};

struct OracleReport {
    std::vector<OracleCheck> checks;
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return !checks.empty();
    }
    std::string to_json() const;
};

/// Field-by-field comparison of federated and centralized parameters.
/// Exact statistics are held to 1e-12 relative error; sketch-backed
/// quantities are checked by rank error against the pooled sort; the
/// imputers are compared on their filled values.
/// `shard_rows` gives per-client row counts for horizontally pooled data so
/// client-local fill indices can be mapped onto the pooled table; leave it
/// empty for vertical fits, where row indices are already global.
OracleReport compare(const FitParameters& fed, const FitParameters& central,
                     const ColumnarDataset& full,
                     const std::vector<std::size_t>& shard_rows = {});

/// Exact quantile under the same rank convention the sketch targets:
/// the smallest retained value whose rank reaches max(1, q*n).
double exact_quantile(std::vector<double> values, double q);

// ---------------------------------------------------------------------------
// separability demonstration

/// Two 2-d point clouds where the second class is an affine copy of the
/// first. Pooled standardization keeps them linearly separable; per-client
/// standardization (each client holding one class) collapses both classes
/// onto the same point set, so no classifier can beat chance.
struct SeparabilityFixture {
    Eigen::MatrixXd points_a;  // class -1, client 0
    Eigen::MatrixXd points_b;  // class +1, client 1
};

SeparabilityFixture separability_fixture(std::uint64_t seed = 7);

/// Training accuracy of a unit-rate perceptron after `epochs` passes;
/// labels are -1/+1.
double perceptron_accuracy(const Eigen::MatrixXd& X, const std::vector<int>& y, int epochs);

/// Column-wise standardization of a dense matrix (population variance).
Eigen::MatrixXd standardize_matrix(const Eigen::MatrixXd& X);

}  // namespace fedps
