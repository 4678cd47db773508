#include "fedps/fedmodels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "fedps/bytes.hpp"

namespace fedps {

namespace {

std::string pack_matrix(const Eigen::MatrixXd& m) {
    ByteWriter w;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) w.f64(m(i, j));
    return w.take();
}

std::string pack_vector(const Eigen::VectorXd& v) {
    ByteWriter w;
    for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v(i));
    return w.take();
}

Eigen::VectorXd unpack_vector(const std::string& s) {
    auto d = unpack_doubles(s);
    return Eigen::Map<Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
}

Eigen::MatrixXd unpack_matrix(const std::string& s, Eigen::Index rows) {
    auto d = unpack_doubles(s);
    if (rows == 0) return Eigen::MatrixXd(0, 0);
    if (d.size() % static_cast<std::size_t>(rows) != 0)
        throw ParseError("matrix payload size mismatch");
    Eigen::Index cols = static_cast<Eigen::Index>(d.size()) / rows;
    return Eigen::Map<Eigen::MatrixXd>(d.data(), rows, cols);
}

double weighted_target_mean(const std::vector<double>& values,
                            const std::vector<double>& distances, KnnWeights weights) {
    if (values.empty()) throw PredictError("no neighbors found");
    if (weights == KnnWeights::Uniform) {
        double s = 0.0;
        for (double v : values) s += v;
        return s / static_cast<double>(values.size());
    }
    // distance weighting: exact matches dominate
    bool any_zero = false;
    for (double d : distances)
        if (d == 0.0) any_zero = true;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (any_zero) {
            if (distances[i] == 0.0) {
                num += values[i];
                den += 1.0;
            }
        } else {
            double w = 1.0 / distances[i];
            num += w * values[i];
            den += w;
        }
    }
    return num / den;
}

}  // namespace

// ---------------------------------------------------------------------------
// k-Means

KMeansState h_fed_kmeans(ProtocolContext& ctx, const std::vector<Eigen::MatrixXd>& data,
                         const Eigen::MatrixXd& init_centroids, int max_iter, double tol) {
    const Eigen::Index k = init_centroids.rows();
    const Eigen::Index dim = init_centroids.cols();
    if (k < 1) throw FitError("k must be >= 1");
    std::size_t total = 0;
    for (const auto& d : data) total += static_cast<std::size_t>(d.rows());
    if (static_cast<std::size_t>(k) > total)
        throw FitError("k exceeds total sample count");

    KMeansState state;
    state.centroids = init_centroids;
    state.counts.assign(static_cast<std::size_t>(k), 0);

    for (int it = 0; it < max_iter; ++it) {
        ProtocolContext::RoundScope round(ctx);
        ctx.broadcast("centroids", pack_matrix(state.centroids));

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, dim);
        std::vector<std::uint64_t> counts(static_cast<std::size_t>(k), 0);
        double inertia = 0.0;

        auto payloads = ctx.gather("cluster_stats", [&](std::size_t c) {
            Eigen::MatrixXd local_sums = Eigen::MatrixXd::Zero(k, dim);
            Eigen::VectorXd local_counts = Eigen::VectorXd::Zero(k);
            double local_inertia = 0.0;
            for (Eigen::Index r = 0; r < data[c].rows(); ++r) {
                Eigen::RowVectorXd x = data[c].row(r);
                Eigen::Index best = 0;
                double best_d = (x - state.centroids.row(0)).squaredNorm();
                for (Eigen::Index j = 1; j < k; ++j) {
                    double dj = (x - state.centroids.row(j)).squaredNorm();
                    if (dj < best_d) {  // ties stay with the lowest index
                        best_d = dj;
                        best = j;
                    }
                }
                local_sums.row(best) += x;
                local_counts(best) += 1.0;
                local_inertia += best_d;
            }
            ByteWriter w;
            w.raw(pack_matrix(local_sums));
            w.raw(pack_vector(local_counts));
            w.f64(local_inertia);
            return w.take();
        });

        for (const auto& p : payloads) {
            auto d = unpack_doubles(p);
            std::size_t off = 0;
            for (Eigen::Index j = 0; j < dim; ++j)
                for (Eigen::Index i = 0; i < k; ++i) sums(i, j) += d[off++];
            for (Eigen::Index i = 0; i < k; ++i)
                counts[static_cast<std::size_t>(i)] += static_cast<std::uint64_t>(d[off++]);
            inertia += d[off++];
        }

        Eigen::MatrixXd next = state.centroids;
        for (Eigen::Index j = 0; j < k; ++j)
            if (counts[static_cast<std::size_t>(j)] > 0)
                next.row(j) = sums.row(j) / static_cast<double>(counts[static_cast<std::size_t>(j)]);

        double movement = (next - state.centroids).rowwise().norm().maxCoeff();
        state.centroids = next;
        state.counts = counts;
        state.inertia = inertia;
        state.iter = it + 1;
        state.trajectory.push_back(next);
        if (movement < tol) {
            state.converged = true;
            break;
        }
    }
    return state;
}

// ---------------------------------------------------------------------------
// k-NN

PartialDistance partial_distance(const MaskedPoint& a, const MaskedPoint& b) {
    PartialDistance pd;
    for (Eigen::Index j = 0; j < a.values.size(); ++j) {
        if (a.is_missing(j) || b.is_missing(j)) continue;
        double d = a.values(j) - b.values(j);
        pd.sum_sq += d * d;
        ++pd.valid;
    }
    return pd;
}

double masked_distance(const MaskedPoint& a, const MaskedPoint& b, std::size_t m_total) {
    PartialDistance pd = partial_distance(a, b);
    if (pd.valid == 0) return std::numeric_limits<double>::infinity();
    return std::sqrt(static_cast<double>(m_total) / static_cast<double>(pd.valid) * pd.sum_sq);
}

double h_fed_knn_predict(ProtocolContext& ctx, const std::vector<KnnTrainClient>& train,
                         const MaskedPoint& query, int k, KnnWeights weights) {
    if (k < 1) throw PredictError("k must be >= 1");
    const std::size_t m_total = static_cast<std::size_t>(query.values.size());

    ProtocolContext::RoundScope round(ctx);
    ctx.broadcast("query", pack_vector(query.values));

    // local top-k candidates: (distance, local index)
    struct Candidate {
        double distance;
        std::size_t client;
        std::size_t index;
    };
    std::vector<Candidate> pool;
    auto payloads = ctx.gather("topk_distances", [&](std::size_t c) {
        std::vector<std::pair<double, std::size_t>> local;
        for (std::size_t i = 0; i < train[c].points.size(); ++i) {
            if (!train[c].target_missing.empty() && train[c].target_missing[i]) continue;
            double d = masked_distance(query, train[c].points[i], m_total);
            if (std::isfinite(d)) local.emplace_back(d, i);
        }
        std::sort(local.begin(), local.end());
        if (local.size() > static_cast<std::size_t>(k)) local.resize(static_cast<std::size_t>(k));
        ByteWriter w;
        for (const auto& [d, i] : local) {
            w.f64(d);
            w.u64(i);
        }
        return w.take();
    });
    for (std::size_t c = 0; c < payloads.size(); ++c) {
        ByteReader r(payloads[c]);
        while (!r.done()) {
            double d = r.f64();
            std::size_t i = r.u64();
            pool.push_back({d, c, i});
        }
    }
    if (pool.empty()) throw PredictError("no valid training sample shares a coordinate with the query");

    std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.distance, a.client, a.index) < std::tie(b.distance, b.client, b.index);
    });
    if (pool.size() > static_cast<std::size_t>(k)) pool.resize(static_cast<std::size_t>(k));

    // request the matching target values from their owners
    std::vector<double> values, distances;
    for (const auto& cand : pool) {
        ByteWriter idx;
        idx.u64(cand.index);
        ctx.send_to(cand.client, "neighbor_index", idx.bytes());
        ByteWriter val;
        val.f64(train[cand.client].targets[cand.index]);
        ctx.collect_from(cand.client, "neighbor_target", val.bytes());
        values.push_back(train[cand.client].targets[cand.index]);
        distances.push_back(cand.distance);
    }
    return weighted_target_mean(values, distances, weights);
}

double v_fed_knn_predict(ProtocolContext& ctx, const std::vector<KnnVerticalClient>& clients,
                         std::size_t label_holder, const std::vector<double>& targets,
                         const std::vector<std::uint8_t>& target_missing, std::size_t m_total,
                         int k, KnnWeights weights) {
    if (k < 1) throw PredictError("k must be >= 1");
    if (clients.empty()) throw PredictError("no clients");
    const std::size_t n = clients[0].points.size();
    for (const auto& c : clients)
        if (c.points.size() != n) throw PredictError("misaligned rows across clients");

    ProtocolContext::RoundScope round(ctx);

    std::vector<double> sum_sq(n, 0.0);
    std::vector<std::uint64_t> valid(n, 0);
    auto payloads = ctx.gather("partial_distances", [&](std::size_t c) {
        ByteWriter w;
        for (std::size_t i = 0; i < n; ++i) {
            PartialDistance pd = partial_distance(clients[c].query, clients[c].points[i]);
            w.f64(pd.sum_sq);
            w.u64(pd.valid);
        }
        return w.take();
    });
    for (const auto& p : payloads) {
        ByteReader r(p);
        for (std::size_t i = 0; i < n; ++i) {
            sum_sq[i] += r.f64();
            valid[i] += r.u64();
        }
    }

    struct Candidate {
        double distance;
        std::size_t index;
    };
    std::vector<Candidate> pool;
    for (std::size_t i = 0; i < n; ++i) {
        if (!target_missing.empty() && target_missing[i]) continue;
        if (valid[i] == 0) continue;
        double d = std::sqrt(static_cast<double>(m_total) / static_cast<double>(valid[i]) *
                             sum_sq[i]);
        pool.push_back({d, i});
    }
    if (pool.empty()) throw PredictError("no valid training sample shares a coordinate with the query");
    std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.distance, a.index) < std::tie(b.distance, b.index);
    });
    if (pool.size() > static_cast<std::size_t>(k)) pool.resize(static_cast<std::size_t>(k));

    ByteWriter idx;
    for (const auto& cand : pool) idx.u64(cand.index);
    ctx.send_to(label_holder, "neighbor_indices", idx.bytes());

    std::vector<double> values, distances;
    ByteWriter vals;
    for (const auto& cand : pool) {
        values.push_back(targets[cand.index]);
        distances.push_back(cand.distance);
        vals.f64(targets[cand.index]);
    }
    ctx.collect_from(label_holder, "neighbor_targets", vals.bytes());
    return weighted_target_mean(values, distances, weights);
}

// ---------------------------------------------------------------------------
// BLR

Eigen::MatrixXd thin_gram_factor(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    const auto& vals = es.eigenvalues();
    double vmax = vals.size() ? std::max(0.0, vals.maxCoeff()) : 0.0;
    double cutoff = vmax * 1e-12;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < vals.size(); ++i)
        if (vals(i) > cutoff && vals(i) > 0.0) keep.push_back(i);
    Eigen::MatrixXd F(A.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
        F.col(static_cast<Eigen::Index>(j)) =
            es.eigenvectors().col(keep[j]) * std::sqrt(vals(keep[j]));
    return F;
}

namespace {

struct EvidenceUpdate {
    double alpha;
    double beta;
    double gamma;
};

EvidenceUpdate evidence_update(const Eigen::VectorXd& eigvals, double alpha, double beta,
                               double epsilon, double omega_sq, double n, const BlrHyper& h) {
    double gamma = 0.0;
    for (Eigen::Index i = 0; i < eigvals.size(); ++i)
        if (eigvals(i) > 0.0) gamma += beta * eigvals(i) / (alpha + beta * eigvals(i));
    double denom_a = std::max(omega_sq + 2.0 * h.a2, 1e-300);
    double new_alpha = (gamma + 2.0 * h.a1) / denom_a;
    double denom_b = std::max(epsilon + 2.0 * h.b2, 1e-300);
    double new_beta = (n - gamma + 2.0 * h.b1) / denom_b;
    return {new_alpha, new_beta, gamma};
}

Eigen::VectorXd clamp_eigvals(const Eigen::VectorXd& vals) {
    Eigen::VectorXd out = vals;
    double vmax = vals.size() ? std::max(0.0, vals.maxCoeff()) : 0.0;
    double cutoff = vmax * 1e-12;
    for (Eigen::Index i = 0; i < out.size(); ++i)
        if (out(i) < cutoff) out(i) = 0.0;
    return out;
}

}  // namespace

BlrState h_fed_blr_fit(ProtocolContext& ctx, const std::vector<Eigen::MatrixXd>& X,
                       const std::vector<Eigen::VectorXd>& Y, const BlrHyper& hyper) {
    if (X.empty() || X.size() != Y.size()) throw FitError("client data mismatch");
    const Eigen::Index m = X[0].cols();
    std::size_t n_total = 0;
    for (std::size_t c = 0; c < X.size(); ++c) {
        if (X[c].cols() != m) throw FitError("feature dimension mismatch across clients");
        if (X[c].rows() != Y[c].size()) throw FitError("X/Y row mismatch on client");
        n_total += static_cast<std::size_t>(X[c].rows());
    }
    if (n_total < 1) throw FitError("no samples");

    Eigen::VectorXd xty = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(m, m);
    {
        ProtocolContext::RoundScope round(ctx);
        auto xty_payloads =
            ctx.gather("xty", [&](std::size_t c) { return pack_vector(X[c].transpose() * Y[c]); });
        for (const auto& p : xty_payloads) xty += unpack_vector(p);
        // Gram matrices travel as thin eigenfactors, rank <= min(n_c, m)
        auto gram_payloads = ctx.gather("gram_factor", [&](std::size_t c) {
            return pack_matrix(thin_gram_factor(X[c].transpose() * X[c]));
        });
        for (const auto& p : gram_payloads) {
            Eigen::MatrixXd F = unpack_matrix(p, m);
            xtx += F * F.transpose();
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(xtx);
    BlrState state;
    state.eigvals = clamp_eigvals(es.eigenvalues());
    state.eigvecs = es.eigenvectors();
    state.alpha = hyper.init_alpha;
    state.beta = hyper.init_beta;

    Eigen::VectorXd vt_xty = state.eigvecs.transpose() * xty;
    for (int it = 0; it < hyper.max_iter; ++it) {
        Eigen::VectorXd diag =
            (state.alpha + state.beta * state.eigvals.array()).inverse().matrix();
        state.omega = state.beta * (state.eigvecs * diag.asDiagonal() * vt_xty);

        ProtocolContext::RoundScope round(ctx);
        ctx.broadcast("omega", pack_vector(state.omega));
        double epsilon = 0.0;
        auto err_payloads = ctx.gather("residual", [&](std::size_t c) {
            ByteWriter w;
            w.f64((Y[c] - X[c] * state.omega).squaredNorm());
            return w.take();
        });
        for (const auto& p : err_payloads) epsilon += ByteReader(p).f64();
        state.epsilon = epsilon;
        state.omega_trace.push_back(state.omega);

        auto upd = evidence_update(state.eigvals, state.alpha, state.beta, epsilon,
                                   state.omega.squaredNorm(), static_cast<double>(n_total), hyper);
        state.gamma = upd.gamma;
        double delta =
            std::abs(std::log(upd.alpha) - std::log(state.alpha)) +
            std::abs(std::log(upd.beta) - std::log(state.beta));
        state.alpha = upd.alpha;
        state.beta = upd.beta;
        state.iter = it + 1;
        if (delta < hyper.tol) {
            state.converged = true;
            break;
        }
    }
    return state;
}

BlrState v_fed_blr_fit(ProtocolContext& ctx, const std::vector<Eigen::MatrixXd>& blocks,
                       std::size_t label_holder, const Eigen::VectorXd& Y,
                       const BlrHyper& hyper) {
    if (blocks.empty()) throw FitError("no feature blocks");
    const Eigen::Index n = blocks[0].rows();
    Eigen::Index m = 0;
    for (const auto& b : blocks) {
        if (b.rows() != n) throw FitError("misaligned rows across feature blocks");
        m += b.cols();
    }
    if (Y.size() != n) throw FitError("target length mismatch");
    if (label_holder >= blocks.size()) throw FitError("label holder out of range");

    Eigen::MatrixXd k_mat = Eigen::MatrixXd::Zero(n, n);
    {
        ProtocolContext::RoundScope round(ctx);
        ctx.collect_from(label_holder, "target", pack_vector(Y));
        auto gram_payloads = ctx.gather("gram_factor", [&](std::size_t c) {
            return pack_matrix(thin_gram_factor(blocks[c] * blocks[c].transpose()));
        });
        for (const auto& p : gram_payloads) {
            Eigen::MatrixXd F = unpack_matrix(p, n);
            k_mat += F * F.transpose();
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k_mat);
    BlrState state;
    state.eigvals = clamp_eigvals(es.eigenvalues());
    state.eigvecs = es.eigenvectors();
    state.alpha = hyper.init_alpha;
    state.beta = hyper.init_beta;

    Eigen::VectorXd ut_y = state.eigvecs.transpose() * Y;
    std::vector<Eigen::VectorXd> omega_blocks(blocks.size());
    for (int it = 0; it < hyper.max_iter; ++it) {
        ProtocolContext::RoundScope round(ctx);
        Eigen::VectorXd diag =
            (state.alpha + state.beta * state.eigvals.array()).inverse().matrix();
        Eigen::VectorXd z = state.beta * (state.eigvecs * diag.asDiagonal() * ut_y);
        ctx.broadcast("scaled_target", pack_vector(z));

        Eigen::VectorXd y_hat = Eigen::VectorXd::Zero(n);
        double omega_sq = 0.0;
        auto payloads = ctx.gather("prediction", [&](std::size_t c) {
            omega_blocks[c] = blocks[c].transpose() * z;
            ByteWriter w;
            w.raw(pack_vector(blocks[c] * omega_blocks[c]));
            w.f64(omega_blocks[c].squaredNorm());
            return w.take();
        });
        for (const auto& p : payloads) {
            auto d = unpack_doubles(p);
            for (Eigen::Index i = 0; i < n; ++i) y_hat(i) += d[static_cast<std::size_t>(i)];
            omega_sq += d[static_cast<std::size_t>(n)];
        }
        state.epsilon = (Y - y_hat).squaredNorm();

        // stacked coefficients in block order
        state.omega.resize(m);
        Eigen::Index off = 0;
        for (const auto& ob : omega_blocks) {
            state.omega.segment(off, ob.size()) = ob;
            off += ob.size();
        }
        state.omega_trace.push_back(state.omega);

        auto upd = evidence_update(state.eigvals, state.alpha, state.beta, state.epsilon,
                                   omega_sq, static_cast<double>(n), hyper);
        state.gamma = upd.gamma;
        double delta =
            std::abs(std::log(upd.alpha) - std::log(state.alpha)) +
            std::abs(std::log(upd.beta) - std::log(state.beta));
        state.alpha = upd.alpha;
        state.beta = upd.beta;
        state.iter = it + 1;
        if (delta < hyper.tol) {
            state.converged = true;
            break;
        }
    }
    return state;
}

Eigen::VectorXd blr_predict(const BlrState& state, const Eigen::MatrixXd& X_new) {
    if (X_new.rows() == 0) return Eigen::VectorXd(0);
    if (X_new.cols() != state.omega.size())
        throw PredictError("feature dimension mismatch in prediction");
    return X_new * state.omega;
}

}  // namespace fedps
