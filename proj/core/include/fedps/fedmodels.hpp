#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fedps/federation.hpp"

namespace fedps {

// ---------------------------------------------------------------------------
// k-Means

struct KMeansState {
    Eigen::MatrixXd centroids;  // k x dim
    std::vector<std::uint64_t> counts;
    double inertia = 0.0;
    int iter = 0;
    bool converged = false;
    std::vector<Eigen::MatrixXd> trajectory;  // centroids after each update
};

/// Lloyd iterations over horizontally partitioned data. Clients assign points
/// to the closest centroid (ties to the lowest cluster index) and report
/// per-cluster sums and counts; empty clusters keep their previous centroid.
KMeansState h_fed_kmeans(ProtocolContext& ctx, const std::vector<Eigen::MatrixXd>& data,
                         const Eigen::MatrixXd& init_centroids, int max_iter, double tol);

// ---------------------------------------------------------------------------
// k-NN regression

enum class KnnWeights { Uniform, Distance };

/// A point with an explicit per-coordinate missing mask.
struct MaskedPoint {
    Eigen::VectorXd values;
    std::vector<std::uint8_t> missing;  // empty means fully present
    bool is_missing(Eigen::Index j) const { return !missing.empty() && missing[j] != 0; }
};

/// Missing-aware squared distance pieces between two points: the sum of
/// squared differences over mutually present coordinates and their count.
struct PartialDistance {
    double sum_sq = 0.0;
    std::size_t valid = 0;
};

PartialDistance partial_distance(const MaskedPoint& a, const MaskedPoint& b);

/// d(x,y) = sqrt(m_total / m_valid * sum_valid (x_j - y_j)^2); infinity when
/// no coordinate is present in both points.
double masked_distance(const MaskedPoint& a, const MaskedPoint& b, std::size_t m_total);

struct KnnTrainClient {
    std::vector<MaskedPoint> points;
    std::vector<double> targets;
    std::vector<std::uint8_t> target_missing;  // empty means all present
};

/// Horizontal federated k-NN regression: clients report local top-k
/// (distance, index) candidates, the server selects the global top-k (ties by
/// (distance, client id, local index)) and requests the matching targets.
double h_fed_knn_predict(ProtocolContext& ctx, const std::vector<KnnTrainClient>& train,
                         const MaskedPoint& query, int k, KnnWeights weights);

struct KnnVerticalClient {
    std::vector<MaskedPoint> points;  // aligned rows, this client's features only
    MaskedPoint query;
};

/// Vertical federated k-NN regression: clients report per-row partial
/// squared distances and valid-coordinate counts; the label holder returns
/// the targets of the selected rows.
double v_fed_knn_predict(ProtocolContext& ctx, const std::vector<KnnVerticalClient>& clients,
                         std::size_t label_holder, const std::vector<double>& targets,
                         const std::vector<std::uint8_t>& target_missing, std::size_t m_total,
                         int k, KnnWeights weights);

// ---------------------------------------------------------------------------
// Bayesian linear regression

struct BlrHyper {
    double a1 = 1e-6;
    double a2 = 1e-6;
    double b1 = 1e-6;
    double b2 = 1e-6;
    double init_alpha = 1.0;
    double init_beta = 1.0;
    int max_iter = 300;
    double tol = 1e-4;  // on |d log alpha| + |d log beta|
};

struct BlrState {
    double alpha = 1.0;
    double beta = 1.0;
    Eigen::VectorXd omega;      // posterior mean, full feature order
    Eigen::VectorXd eigvals;    // clamped at 0
    Eigen::MatrixXd eigvecs;    // V (horizontal) or U (vertical)
    double gamma = 0.0;
    double epsilon = 0.0;
    int iter = 0;
    bool converged = false;
    std::vector<Eigen::VectorXd> omega_trace;  // omega after each iteration
};

/// Aggregates X'Y and X'X across row-partitioned clients (Gram matrices are
/// shipped as thin eigenfactors of rank <= min(n_c, m)), eigendecomposes the
/// aggregate once, then iterates the evidence updates for alpha and beta.
BlrState h_fed_blr_fit(ProtocolContext& ctx, const std::vector<Eigen::MatrixXd>& X,
                       const std::vector<Eigen::VectorXd>& Y, const BlrHyper& hyper = {});

/// Feature-partitioned variant working through X*X' so no cross-client
/// feature products are ever formed; yields the same posterior mean.
BlrState v_fed_blr_fit(ProtocolContext& ctx, const std::vector<Eigen::MatrixXd>& blocks,
                       std::size_t label_holder, const Eigen::VectorXd& Y,
                       const BlrHyper& hyper = {});

Eigen::VectorXd blr_predict(const BlrState& state, const Eigen::MatrixXd& X_new);

/// Thin factor F with F * F' == A for a symmetric PSD matrix, rank columns.
Eigen::MatrixXd thin_gram_factor(const Eigen::MatrixXd& A);

}  // namespace fedps
