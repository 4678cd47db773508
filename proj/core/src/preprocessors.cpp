#include "fedps/preprocessors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "fedps/bytes.hpp"
#include "fedps/fedmodels.hpp"
#include "fedps/special_math.hpp"
#include "fedps/summaries.hpp"

namespace fedps {

namespace {

bool is_encoder(PrepKind kind) {
    switch (kind) {
        case PrepKind::LabelBinarizer:
        case PrepKind::MultiLabelBinarizer:
        case PrepKind::LabelEncoder:
        case PrepKind::OneHotEncoder:
        case PrepKind::OrdinalEncoder:
        case PrepKind::TargetEncoder:
            return true;
        default:
            return false;
    }
}

bool is_label_encoder(PrepKind kind) {
    return kind == PrepKind::LabelBinarizer || kind == PrepKind::MultiLabelBinarizer ||
           kind == PrepKind::LabelEncoder;
}

std::string numeric_key(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t sketch_seed(const PreprocessorSpec& spec, std::size_t client, std::size_t col) {
    std::uint64_t s = spec.seed;
    s ^= 0x9e3779b97f4a7c15ull * (client + 1);
    s ^= 0xc2b2ae3d27d4eb4full * (col + 1);
    return s;
}

/// Owner client of a column under vertical partitioning.
std::size_t find_owner(const std::vector<ColumnarDataset>& shards, const std::string& name) {
    for (std::size_t c = 0; c < shards.size(); ++c)
        if (shards[c].has_column(name)) return c;
    throw FitError("no client holds column '" + name + "'");
}

std::vector<std::string> numeric_columns(const ColumnarDataset& d) {
    std::vector<std::string> out;
    for (const auto& c : d.columns())
        if (c.kind == ColumnKind::Numeric) out.push_back(c.name);
    return out;
}

std::vector<std::string> categorical_columns(const ColumnarDataset& d) {
    std::vector<std::string> out;
    for (const auto& c : d.columns())
        if (c.kind == ColumnKind::Categorical) out.push_back(c.name);
    return out;
}

// per-column moments across horizontal shards, all in the caller's round
std::map<std::string, MomentsSummary> gather_moments(ProtocolContext& ctx,
                                                     const std::vector<ColumnarDataset>& shards,
                                                     const std::vector<std::string>& cols) {
    std::map<std::string, MomentsSummary> out;
    for (const auto& name : cols) {
        out[name] = gather_merge<MomentsSummary>(ctx, [&](std::size_t c) {
            MomentsSummary s;
            const Column& col = shards[c].column(name);
            for (std::size_t r = 0; r < col.numeric.size(); ++r)
                if (!col.is_missing(r)) s.update(col.numeric[r]);
            return s;
        });
    }
    return out;
}

std::map<std::string, KllSketch> gather_kll(ProtocolContext& ctx,
                                            const std::vector<ColumnarDataset>& shards,
                                            const std::vector<std::string>& cols,
                                            const PreprocessorSpec& spec) {
    std::map<std::string, KllSketch> out;
    for (std::size_t ci = 0; ci < cols.size(); ++ci) {
        const std::string& name = cols[ci];
        out.emplace(name, gather_merge<KllSketch>(ctx, [&](std::size_t c) {
                        KllSketch s(spec.sketch_k, sketch_seed(spec, c, ci));
                        const Column& col = shards[c].column(name);
                        for (std::size_t r = 0; r < col.numeric.size(); ++r)
                            if (!col.is_missing(r)) s.update(col.numeric[r]);
                        return s;
                    }));
    }
    return out;
}

std::map<std::string, CategorySet> gather_categories(ProtocolContext& ctx,
                                                     const std::vector<ColumnarDataset>& shards,
                                                     const std::vector<std::string>& cols) {
    std::map<std::string, CategorySet> out;
    for (const auto& name : cols) {
        out[name] = gather_merge<CategorySet>(ctx, [&](std::size_t c) {
            CategorySet s;
            const Column& col = shards[c].column(name);
            for (std::size_t r = 0; r < col.categories.size(); ++r)
                if (!col.is_missing(r)) s.update(col.categories[r]);
            return s;
        });
    }
    return out;
}

std::map<std::string, FrequentItemsSketch> gather_frequent(
    ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
    const std::vector<std::string>& cols, const PreprocessorSpec& spec) {
    std::map<std::string, FrequentItemsSketch> out;
    for (const auto& name : cols) {
        out.emplace(name, gather_merge<FrequentItemsSketch>(ctx, [&](std::size_t c) {
                        FrequentItemsSketch s(spec.fi_capacity);
                        const Column& col = shards[c].column(name);
                        for (std::size_t r = 0; r < col.size(); ++r) {
                            if (col.is_missing(r)) continue;
                            if (col.kind == ColumnKind::Categorical) s.update(col.categories[r]);
                            else s.update(numeric_key(col.numeric[r]));
                        }
                        return s;
                    }));
    }
    return out;
}

void require_present(const MomentsSummary& s, const std::string& col) {
    if (s.n == 0) throw FitError("column '" + col + "' has no present values");
}

// --------------------------------------------------------------------------
// scalers

void fit_maxabs(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
                const std::vector<std::string>& cols, FitParameters& params) {
    ProtocolContext::RoundScope round(ctx);
    auto moments = gather_moments(ctx, shards, cols);
    for (const auto& name : cols) {
        const auto& s = moments.at(name);
        require_present(s, name);
        ColumnParams p;
        p.maxabs = std::max(std::abs(s.min), std::abs(s.max));
        p.constant = *p.maxabs == 0.0;
        params.columns[name] = std::move(p);
    }
}

void fit_minmax(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
                const std::vector<std::string>& cols, FitParameters& params) {
    ProtocolContext::RoundScope round(ctx);
    auto moments = gather_moments(ctx, shards, cols);
    for (const auto& name : cols) {
        const auto& s = moments.at(name);
        require_present(s, name);
        ColumnParams p;
        p.min = s.min;
        p.max = s.max;
        p.constant = s.min == s.max;
        params.columns[name] = std::move(p);
    }
}

void fit_standard(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
                  const std::vector<std::string>& cols, FitParameters& params) {
    ProtocolContext::RoundScope round(ctx);
    auto moments = gather_moments(ctx, shards, cols);
    for (const auto& name : cols) {
        const auto& s = moments.at(name);
        require_present(s, name);
        ColumnParams p;
        p.mu = s.mean();
        p.sigma = std::sqrt(s.variance());
        p.constant = *p.sigma == 0.0;
        params.columns[name] = std::move(p);
    }
}

void fit_robust(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
                const std::vector<std::string>& cols, const PreprocessorSpec& spec,
                FitParameters& params) {
    ProtocolContext::RoundScope round(ctx);
    auto sketches = gather_kll(ctx, shards, cols, spec);
    for (const auto& name : cols) {
        const auto& s = sketches.at(name);
        if (s.empty()) throw FitError("column '" + name + "' has no present values");
        ColumnParams p;
        p.q1 = s.quantile(0.25);
        p.q2 = s.quantile(0.5);
        p.q3 = s.quantile(0.75);
        p.constant = *p.q3 == *p.q1;
        params.columns[name] = std::move(p);
    }
}

void fit_normalizer_vertical(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
                             const PreprocessorSpec& spec, FitParameters& params) {
    const std::size_t n = shards[0].n_rows();
    for (const auto& s : shards)
        if (s.n_rows() != n) throw FitError("misaligned rows across vertical shards");

    ProtocolContext::RoundScope round(ctx);
    std::vector<double> combined(n, spec.norm == "max" ? 0.0 : 0.0);
    auto payloads = ctx.gather("row_norm_partials", [&](std::size_t c) {
        std::vector<double> partial(n, 0.0);
        for (const auto& col : shards[c].columns()) {
            if (col.kind != ColumnKind::Numeric) continue;
            if (!spec.columns.empty() &&
                std::find(spec.columns.begin(), spec.columns.end(), col.name) ==
                    spec.columns.end())
                continue;
            for (std::size_t r = 0; r < n; ++r) {
                if (col.is_missing(r)) continue;
                double v = col.numeric[r];
                if (spec.norm == "l1") partial[r] += std::abs(v);
                else if (spec.norm == "l2") partial[r] += v * v;
                else partial[r] = std::max(partial[r], std::abs(v));
            }
        }
        return pack_doubles(partial);
    });
    for (const auto& p : payloads) {
        auto vals = unpack_doubles(p);
        for (std::size_t r = 0; r < n; ++r) {
            if (spec.norm == "max") combined[r] = std::max(combined[r], vals[r]);
            else combined[r] += vals[r];
        }
    }
    if (spec.norm == "l2")
        for (auto& v : combined) v = std::sqrt(v);
    params.row_norms = std::move(combined);
    ctx.broadcast("row_norms", pack_doubles(params.row_norms));
}

// --------------------------------------------------------------------------
// encoders

void fit_set_union_encoder(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
                           const std::vector<std::string>& cols, const PreprocessorSpec& spec,
                           FitParameters& params) {
    ProtocolContext::RoundScope round(ctx);
    std::map<std::string, CategorySet> sets;
    if (spec.kind == PrepKind::MultiLabelBinarizer) {
        // cells hold '|'-separated label lists
        for (const auto& name : cols) {
            sets[name] = gather_merge<CategorySet>(ctx, [&](std::size_t c) {
                CategorySet s;
                const Column& col = shards[c].column(name);
                for (std::size_t r = 0; r < col.categories.size(); ++r) {
                    if (col.is_missing(r)) continue;
                    const std::string& cell = col.categories[r];
                    std::size_t start = 0;
                    while (start <= cell.size()) {
                        std::size_t end = cell.find('|', start);
                        if (end == std::string::npos) end = cell.size();
                        if (end > start) s.update(cell.substr(start, end - start));
                        start = end + 1;
                    }
                }
                return s;
            });
        }
    } else {
        sets = gather_categories(ctx, shards, cols);
    }

    std::map<std::string, FrequentItemsSketch> freq;
    const bool filter_infrequent =
        spec.min_count.has_value() &&
        (spec.kind == PrepKind::OneHotEncoder || spec.kind == PrepKind::OrdinalEncoder);
    if (filter_infrequent) freq = gather_frequent(ctx, shards, cols, spec);

    for (const auto& name : cols) {
        ColumnParams p;
        auto all = sets.at(name).sorted();
        if (filter_infrequent) {
            const auto& fi = freq.at(name);
            for (const auto& cat : all) {
                auto [lower, upper] = fi.estimate(cat);
                (void)upper;
                if (lower >= *spec.min_count) p.categories.push_back(cat);
                else p.infrequent.insert(cat);
            }
        } else {
            p.categories = std::move(all);
        }
        params.columns[name] = std::move(p);
    }
}

/// 0/1 view of the label column; throws unless the label is binary.
std::vector<std::pair<bool, double>> binary_label(const Column& col) {
    std::vector<std::pair<bool, double>> out(col.size(), {false, 0.0});
    if (col.kind == ColumnKind::Categorical) {
        std::set<std::string> cats;
        for (std::size_t r = 0; r < col.size(); ++r)
            if (!col.is_missing(r)) cats.insert(col.categories[r]);
        if (cats.size() > 2) throw FitError("target encoder requires a binary label");
        std::string positive = cats.empty() ? "" : *cats.rbegin();
        for (std::size_t r = 0; r < col.size(); ++r)
            if (!col.is_missing(r))
                out[r] = {true, col.categories[r] == positive && cats.size() == 2 ? 1.0 : 0.0};
        return out;
    }
    for (std::size_t r = 0; r < col.size(); ++r) {
        if (col.is_missing(r)) continue;
        double v = col.numeric[r];
        if (v != 0.0 && v != 1.0) throw FitError("target encoder requires a binary (0/1) label");
        out[r] = {true, v};
    }
    return out;
}

void fit_target_encoder(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
                        const std::vector<std::string>& cols, const PreprocessorSpec& spec,
                        FitParameters& params) {
    if (spec.label_column.empty()) throw FitError("target encoder requires a label column");
    ProtocolContext::RoundScope round(ctx);

    for (const auto& name : cols) {
        // per-category (count, positives) plus global (count, positives)
        std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> stats;
        std::uint64_t n_total = 0, n_pos = 0;
        auto payloads = ctx.gather("category_target_stats", [&](std::size_t c) {
            const Column& col = shards[c].column(name);
            auto labels = binary_label(shards[c].column(spec.label_column));
            std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> local;
            std::uint64_t ln = 0, lp = 0;
            for (std::size_t r = 0; r < col.size(); ++r) {
                if (col.is_missing(r) || !labels[r].first) continue;
                auto& [cnt, pos] = local[col.categories[r]];
                ++cnt;
                if (labels[r].second > 0.5) ++pos;
                ++ln;
                if (labels[r].second > 0.5) ++lp;
            }
            ByteWriter w;
            w.u64(ln);
            w.u64(lp);
            w.u64(local.size());
            for (const auto& [cat, cp] : local) {
                w.str(cat);
                w.u64(cp.first);
                w.u64(cp.second);
            }
            return w.take();
        });
        for (const auto& pl : payloads) {
            ByteReader r(pl);
            n_total += r.u64();
            n_pos += r.u64();
            std::uint64_t entries = r.u64();
            for (std::uint64_t i = 0; i < entries; ++i) {
                std::string cat = r.str();
                auto& [cnt, pos] = stats[cat];
                cnt += r.u64();
                pos += r.u64();
            }
        }
        if (n_total == 0) throw FitError("no labeled rows for target encoding");

        const double global_mean = static_cast<double>(n_pos) / static_cast<double>(n_total);
        const double tau_sq = global_mean * (1.0 - global_mean);
        ColumnParams p;
        p.default_encoding = global_mean;
        for (const auto& [cat, cp] : stats) {
            const double n_i = static_cast<double>(cp.first);
            const double p_i = static_cast<double>(cp.second) / n_i;
            const double sigma_i_sq = p_i * (1.0 - p_i);
            double lambda;
            if (tau_sq == 0.0) {
                lambda = 1.0;  // constant label: pure category mean
            } else {
                double m = sigma_i_sq / tau_sq;
                lambda = n_i / (m + n_i);
            }
            p.encoding[cat] = lambda * p_i + (1.0 - lambda) * global_mean;
            p.categories.push_back(cat);
        }
        params.columns[name] = std::move(p);
    }
}

// --------------------------------------------------------------------------
// transformers

double power_transform_value(const std::string& method, double lambda, double x) {
    return method == "box-cox" ? box_cox(lambda, x) : yeo_johnson(lambda, x);
}

void fit_power(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
               const std::vector<std::string>& cols, const PreprocessorSpec& spec,
               FitParameters& params) {
    const bool boxcox = spec.method == "box-cox";
    const double lo_init = boxcox ? -2.0 : -4.0;
    const double hi_init = boxcox ? 2.0 : 4.0;
    const int gs_iters = 30;
    const double inv_phi = 0.6180339887498949;

    // round 1: raw moments plus the lambda-independent log-likelihood term
    std::map<std::string, MomentsSummary> raw;
    std::map<std::string, double> log_term;
    {
        ProtocolContext::RoundScope round(ctx);
        raw = gather_moments(ctx, shards, cols);
        for (const auto& name : cols) {
            double total = 0.0;
            auto payloads = ctx.gather("log_term", [&](std::size_t c) {
                const Column& col = shards[c].column(name);
                double t = 0.0;
                for (std::size_t r = 0; r < col.numeric.size(); ++r) {
                    if (col.is_missing(r)) continue;
                    double x = col.numeric[r];
                    if (boxcox) {
                        if (x <= 0.0) t = std::numeric_limits<double>::quiet_NaN();
                        else t += std::log(x);
                    } else {
                        t += (x >= 0.0 ? 1.0 : -1.0) * std::log1p(std::abs(x));
                    }
                }
                ByteWriter w;
                w.f64(t);
                return w.take();
            });
            for (const auto& p : payloads) total += ByteReader(p).f64();
            log_term[name] = total;
        }
    }
    for (const auto& name : cols) {
        require_present(raw.at(name), name);
        if (boxcox && raw.at(name).min <= 0.0)
            throw FitError("box-cox requires strictly positive values in column '" + name + "'");
    }

    // one aggregation round per candidate lambda; all columns share the round
    auto evaluate = [&](const std::map<std::string, double>& lambdas)
        -> std::map<std::string, double> {
        ProtocolContext::RoundScope round(ctx);
        std::map<std::string, double> ll;
        for (const auto& name : cols) {
            double lambda = lambdas.at(name);
            MomentsSummary merged = gather_merge<MomentsSummary>(ctx, [&](std::size_t c) {
                MomentsSummary s;
                const Column& col = shards[c].column(name);
                for (std::size_t r = 0; r < col.numeric.size(); ++r)
                    if (!col.is_missing(r))
                        s.update(power_transform_value(spec.method, lambda, col.numeric[r]));
                return s;
            });
            double var = merged.variance();
            double n = static_cast<double>(merged.n);
            ll[name] = var <= 0.0 ? -std::numeric_limits<double>::infinity()
                                  : -0.5 * n * std::log(var) + (lambda - 1.0) * log_term.at(name);
        }
        return ll;
    };

    struct Bracket {
        double lo, hi, x1, x2, f1, f2;
    };
    std::map<std::string, Bracket> brackets;
    for (const auto& name : cols)
        brackets[name] = {lo_init, hi_init, hi_init - (hi_init - lo_init) * inv_phi,
                          lo_init + (hi_init - lo_init) * inv_phi, 0.0, 0.0};

    std::map<std::string, double> cand;
    for (const auto& name : cols) cand[name] = brackets[name].x1;
    auto f1 = evaluate(cand);
    for (const auto& name : cols) brackets[name].f1 = f1.at(name);
    for (const auto& name : cols) cand[name] = brackets[name].x2;
    auto f2 = evaluate(cand);
    for (const auto& name : cols) brackets[name].f2 = f2.at(name);

    for (int it = 0; it < gs_iters; ++it) {
        for (auto& [name, b] : brackets) {
            if (b.f1 > b.f2) {
                b.hi = b.x2;
                b.x2 = b.x1;
                b.f2 = b.f1;
                b.x1 = b.hi - (b.hi - b.lo) * inv_phi;
                cand[name] = b.x1;
            } else {
                b.lo = b.x1;
                b.x1 = b.x2;
                b.f1 = b.f2;
                b.x2 = b.lo + (b.hi - b.lo) * inv_phi;
                cand[name] = b.x2;
            }
        }
        auto f = evaluate(cand);
        for (auto& [name, b] : brackets) {
            if (cand.at(name) == b.x1) b.f1 = f.at(name);
            else b.f2 = f.at(name);
        }
    }

    std::map<std::string, double> lambda_star;
    for (const auto& [name, b] : brackets) lambda_star[name] = 0.5 * (b.lo + b.hi);

    std::map<std::string, MomentsSummary> post;
    if (spec.standardize) {
        ProtocolContext::RoundScope round(ctx);
        for (const auto& name : cols) {
            double lambda = lambda_star.at(name);
            post[name] = gather_merge<MomentsSummary>(ctx, [&](std::size_t c) {
                MomentsSummary s;
                const Column& col = shards[c].column(name);
                for (std::size_t r = 0; r < col.numeric.size(); ++r)
                    if (!col.is_missing(r))
                        s.update(power_transform_value(spec.method, lambda, col.numeric[r]));
                return s;
            });
        }
    }

    for (const auto& name : cols) {
        ColumnParams p;
        p.lambda = lambda_star.at(name);
        if (spec.standardize) {
            const auto& s = post.at(name);
            p.mu = s.mean();
            p.sigma = std::sqrt(s.variance());
            p.constant = *p.sigma == 0.0;
        }
        params.columns[name] = std::move(p);
    }
}

void fit_quantile_transformer(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
                              const std::vector<std::string>& cols, const PreprocessorSpec& spec,
                              FitParameters& params) {
    ProtocolContext::RoundScope round(ctx);
    auto sketches = gather_kll(ctx, shards, cols, spec);
    for (const auto& name : cols) {
        const auto& s = sketches.at(name);
        if (s.empty()) throw FitError("column '" + name + "' has no present values");
        int nq = std::min<std::uint64_t>(spec.n_quantiles, s.n());
        nq = std::max(nq, 2);
        ColumnParams p;
        p.quantile_grid.reserve(nq);
        for (int j = 0; j < nq; ++j)
            p.quantile_grid.push_back(
                s.quantile(static_cast<double>(j) / static_cast<double>(nq - 1)));
        std::sort(p.quantile_grid.begin(), p.quantile_grid.end());
        params.columns[name] = std::move(p);
    }
}

void fit_spline(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
                const std::vector<std::string>& cols, const PreprocessorSpec& spec,
                FitParameters& params) {
    ProtocolContext::RoundScope round(ctx);
    if (spec.knots == "uniform") {
        auto moments = gather_moments(ctx, shards, cols);
        for (const auto& name : cols) {
            const auto& s = moments.at(name);
            require_present(s, name);
            ColumnParams p;
            for (int j = 0; j < spec.n_knots; ++j)
                p.knot_vector.push_back(s.min + (s.max - s.min) * static_cast<double>(j) /
                                                    static_cast<double>(spec.n_knots - 1));
            params.columns[name] = std::move(p);
        }
    } else {
        auto sketches = gather_kll(ctx, shards, cols, spec);
        for (const auto& name : cols) {
            const auto& s = sketches.at(name);
            if (s.empty()) throw FitError("column '" + name + "' has no present values");
            ColumnParams p;
            for (int j = 0; j < spec.n_knots; ++j)
                p.knot_vector.push_back(
                    s.quantile(static_cast<double>(j) / static_cast<double>(spec.n_knots - 1)));
            std::sort(p.knot_vector.begin(), p.knot_vector.end());
            params.columns[name] = std::move(p);
        }
    }
}

// --------------------------------------------------------------------------
// discretizers

void fit_kbins(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
               const std::vector<std::string>& cols, const PreprocessorSpec& spec,
               FitParameters& params) {
    auto dedupe_edges = [&](std::vector<double> edges, const std::string& name) {
        std::vector<double> unique;
        for (double e : edges)
            if (unique.empty() || e > unique.back()) unique.push_back(e);
        if (unique.size() < edges.size())
            params.warnings.push_back("column '" + name +
                                      "': duplicate bin edges dropped, bin count reduced");
        return unique;
    };

    if (spec.strategy == "uniform") {
        ProtocolContext::RoundScope round(ctx);
        auto moments = gather_moments(ctx, shards, cols);
        for (const auto& name : cols) {
            const auto& s = moments.at(name);
            require_present(s, name);
            ColumnParams p;
            for (int j = 0; j <= spec.n_bins; ++j)
                p.edges.push_back(s.min + (s.max - s.min) * static_cast<double>(j) /
                                              static_cast<double>(spec.n_bins));
            p.edges = dedupe_edges(std::move(p.edges), name);
            params.columns[name] = std::move(p);
        }
        return;
    }
    if (spec.strategy == "quantile") {
        ProtocolContext::RoundScope round(ctx);
        auto sketches = gather_kll(ctx, shards, cols, spec);
        for (const auto& name : cols) {
            const auto& s = sketches.at(name);
            if (s.empty()) throw FitError("column '" + name + "' has no present values");
            ColumnParams p;
            for (int j = 0; j <= spec.n_bins; ++j)
                p.edges.push_back(
                    s.quantile(static_cast<double>(j) / static_cast<double>(spec.n_bins)));
            p.edges = dedupe_edges(std::move(p.edges), name);
            params.columns[name] = std::move(p);
        }
        return;
    }

    // kmeans strategy: one min/max round, then federated Lloyd per column
    std::map<std::string, MomentsSummary> moments;
    {
        ProtocolContext::RoundScope round(ctx);
        moments = gather_moments(ctx, shards, cols);
    }
    for (const auto& name : cols) {
        const auto& s = moments.at(name);
        require_present(s, name);
        const double width = s.max - s.min;

        Eigen::MatrixXd init(spec.n_bins, 1);
        for (int j = 0; j < spec.n_bins; ++j)
            init(j, 0) = s.min + width * (static_cast<double>(j) + 0.5) /
                                     static_cast<double>(spec.n_bins);

        std::vector<Eigen::MatrixXd> data(shards.size());
        for (std::size_t c = 0; c < shards.size(); ++c) {
            const Column& col = shards[c].column(name);
            std::vector<double> vals;
            for (std::size_t r = 0; r < col.numeric.size(); ++r)
                if (!col.is_missing(r)) vals.push_back(col.numeric[r]);
            data[c] = Eigen::Map<Eigen::MatrixXd>(vals.data(),
                                                  static_cast<Eigen::Index>(vals.size()), 1);
        }
        double tol = width > 0.0 ? width * 1e-9 : 1e-12;
        KMeansState km = h_fed_kmeans(ctx, data, init, spec.max_iter, tol);

        std::vector<double> centers(km.centroids.data(),
                                    km.centroids.data() + km.centroids.rows());
        std::sort(centers.begin(), centers.end());
        ColumnParams p;
        p.edges.push_back(s.min);
        for (std::size_t j = 0; j + 1 < centers.size(); ++j)
            p.edges.push_back(0.5 * (centers[j] + centers[j + 1]));
        p.edges.push_back(s.max);
        p.edges = dedupe_edges(std::move(p.edges), name);
        params.columns[name] = std::move(p);
    }
}

// --------------------------------------------------------------------------
// imputers

void fit_simple_imputer(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
                        const std::vector<std::string>& cols, const PreprocessorSpec& spec,
                        FitParameters& params) {
    ProtocolContext::RoundScope round(ctx);
    if (spec.strategy == "mean") {
        auto moments = gather_moments(ctx, shards, cols);
        for (const auto& name : cols) {
            require_present(moments.at(name), name);
            ColumnParams p;
            p.fill_value = moments.at(name).mean();
            params.columns[name] = std::move(p);
        }
    } else if (spec.strategy == "median") {
        auto sketches = gather_kll(ctx, shards, cols, spec);
        for (const auto& name : cols) {
            if (sketches.at(name).empty())
                throw FitError("column '" + name + "' has no present values");
            ColumnParams p;
            p.fill_value = sketches.at(name).quantile(0.5);
            params.columns[name] = std::move(p);
        }
    } else {  // most_frequent
        auto freq = gather_frequent(ctx, shards, cols, spec);
        for (const auto& name : cols) {
            const auto& fi = freq.at(name);
            if (fi.n() == 0) throw FitError("column '" + name + "' has no present values");
            auto hitters = fi.heavy_hitters(0);
            if (hitters.empty()) throw FitError("column '" + name + "' has no tracked items");
            ColumnParams p;
            bool numeric = false;
            for (const auto& sh : shards)
                if (sh.has_column(name) && sh.column(name).kind == ColumnKind::Numeric)
                    numeric = true;
            if (numeric) p.fill_value = std::stod(hitters.front().item);
            else p.fill_category = hitters.front().item;
            params.columns[name] = std::move(p);
        }
    }
}

struct NumericView {
    std::vector<std::string> cols;       // column names in view order
    std::vector<Eigen::MatrixXd> value;  // per client, n_c x m
    std::vector<std::vector<std::vector<std::uint8_t>>> miss;  // [client][row][col]
};

NumericView make_numeric_view(const std::vector<ColumnarDataset>& shards,
                              const std::vector<std::string>& cols) {
    NumericView v;
    v.cols = cols;
    for (const auto& sh : shards) {
        Eigen::MatrixXd m(sh.n_rows(), static_cast<Eigen::Index>(cols.size()));
        std::vector<std::vector<std::uint8_t>> mm(sh.n_rows(),
                                                  std::vector<std::uint8_t>(cols.size(), 0));
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const Column& col = sh.column(cols[j]);
            for (std::size_t r = 0; r < sh.n_rows(); ++r) {
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                    col.is_missing(r) ? 0.0 : col.numeric[r];
                mm[r][j] = col.missing[r];
            }
        }
        v.value.push_back(std::move(m));
        v.miss.push_back(std::move(mm));
    }
    return v;
}

void fit_knn_imputer_horizontal(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
                                const std::vector<std::string>& cols,
                                const PreprocessorSpec& spec, FitParameters& params) {
    ProtocolContext::RoundScope round(ctx);
    auto moments = gather_moments(ctx, shards, cols);
    for (const auto& name : cols) {
        require_present(moments.at(name), name);
        ColumnParams p;
        p.fill_value = moments.at(name).mean();
        params.columns[name] = p;
    }

    NumericView view = make_numeric_view(shards, cols);
    const KnnWeights weights =
        spec.weights == "distance" ? KnnWeights::Distance : KnnWeights::Uniform;
    params.client_fills.resize(shards.size());

    for (std::size_t j = 0; j < cols.size(); ++j) {
        // training pool for feature j: every row where it is present
        std::vector<KnnTrainClient> train(shards.size());
        for (std::size_t c = 0; c < shards.size(); ++c) {
            for (std::size_t r = 0; r < static_cast<std::size_t>(view.value[c].rows()); ++r) {
                MaskedPoint pt{view.value[c].row(static_cast<Eigen::Index>(r)).transpose(),
                               view.miss[c][r]};
                train[c].points.push_back(std::move(pt));
                train[c].targets.push_back(
                    view.value[c](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)));
                train[c].target_missing.push_back(view.miss[c][r][j]);
            }
        }
        for (std::size_t c = 0; c < shards.size(); ++c) {
            for (std::size_t r = 0; r < static_cast<std::size_t>(view.value[c].rows()); ++r) {
                if (!view.miss[c][r][j]) continue;
                MaskedPoint query{view.value[c].row(static_cast<Eigen::Index>(r)).transpose(),
                                  view.miss[c][r]};
                double fill;
                try {
                    fill = h_fed_knn_predict(ctx, train, query, spec.k, weights);
                } catch (const PredictError&) {
                    fill = *params.columns.at(cols[j]).fill_value;
                }
                params.client_fills[c].push_back({r, cols[j], fill});
            }
        }
    }
}

void fit_knn_imputer_vertical(ProtocolContext& ctx, const std::vector<ColumnarDataset>& shards,
                              const PreprocessorSpec& spec, FitParameters& params) {
    ProtocolContext::RoundScope round(ctx);
    const std::size_t n = shards[0].n_rows();
    for (const auto& s : shards)
        if (s.n_rows() != n) throw FitError("misaligned rows across vertical shards");

    // per-client numeric blocks
    std::vector<std::vector<std::string>> block_cols(shards.size());
    std::size_t m_total = 0;
    for (std::size_t c = 0; c < shards.size(); ++c) {
        block_cols[c] = numeric_columns(shards[c]);
        if (!spec.columns.empty()) {
            std::vector<std::string> kept;
            for (const auto& name : block_cols[c])
                if (std::find(spec.columns.begin(), spec.columns.end(), name) !=
                    spec.columns.end())
                    kept.push_back(name);
            block_cols[c] = kept;
        }
        m_total += block_cols[c].size();
    }

    // means for fallback fills
    for (std::size_t c = 0; c < shards.size(); ++c) {
        for (const auto& name : block_cols[c]) {
            MomentsSummary s;
            const Column& col = shards[c].column(name);
            for (std::size_t r = 0; r < col.numeric.size(); ++r)
                if (!col.is_missing(r)) s.update(col.numeric[r]);
            ctx.collect_from(c, "column_moments", s.serialize());
            require_present(s, name);
            ColumnParams p;
            p.fill_value = s.mean();
            params.columns[name] = p;
        }
    }

    const KnnWeights weights =
        spec.weights == "distance" ? KnnWeights::Distance : KnnWeights::Uniform;
    params.client_fills.resize(shards.size());

    auto block_points = [&](std::size_t c) {
        std::vector<MaskedPoint> pts(n);
        for (std::size_t r = 0; r < n; ++r) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(block_cols[c].size()));
            std::vector<std::uint8_t> mm(block_cols[c].size(), 0);
            for (std::size_t j = 0; j < block_cols[c].size(); ++j) {
                const Column& col = shards[c].column(block_cols[c][j]);
                v(static_cast<Eigen::Index>(j)) = col.is_missing(r) ? 0.0 : col.numeric[r];
                mm[j] = col.missing[r];
            }
            pts[r] = {std::move(v), std::move(mm)};
        }
        return pts;
    };
    std::vector<std::vector<MaskedPoint>> points(shards.size());
    for (std::size_t c = 0; c < shards.size(); ++c) points[c] = block_points(c);

    for (std::size_t owner = 0; owner < shards.size(); ++owner) {
        for (const auto& name : block_cols[owner]) {
            const Column& col = shards[owner].column(name);
            std::vector<double> targets(n, 0.0);
            for (std::size_t r = 0; r < n; ++r)
                targets[r] = col.is_missing(r) ? 0.0 : col.numeric[r];
            std::vector<std::uint8_t> target_missing(col.missing.begin(), col.missing.end());

            for (std::size_t r = 0; r < n; ++r) {
                if (!col.is_missing(r)) continue;
                std::vector<KnnVerticalClient> clients(shards.size());
                for (std::size_t c = 0; c < shards.size(); ++c) {
                    clients[c].points = points[c];
                    clients[c].query = points[c][r];
                }
                double fill;
                try {
                    fill = v_fed_knn_predict(ctx, clients, owner, targets, target_missing,
                                             m_total, spec.k, weights);
                } catch (const PredictError&) {
                    fill = *params.columns.at(name).fill_value;
                }
                params.client_fills[owner].push_back({r, name, fill});
            }
        }
    }
}

void fit_iterative_imputer_horizontal(ProtocolContext& ctx,
                                      const std::vector<ColumnarDataset>& shards,
                                      const std::vector<std::string>& cols,
                                      const PreprocessorSpec& spec, FitParameters& params) {
    std::map<std::string, MomentsSummary> moments;
    {
        ProtocolContext::RoundScope round(ctx);
        moments = gather_moments(ctx, shards, cols);
    }
    std::map<std::string, double> means;
    std::map<std::string, std::uint64_t> missing_counts;
    std::size_t n_total = 0;
    for (std::size_t c = 0; c < shards.size(); ++c) n_total += shards[c].n_rows();
    for (const auto& name : cols) {
        require_present(moments.at(name), name);
        means[name] = moments.at(name).mean();
        missing_counts[name] = n_total - moments.at(name).n;
        ColumnParams p;
        p.fill_value = means[name];
        params.columns[name] = p;
    }

    // visit incomplete features by ascending missing count, dataset order ties
    std::vector<std::string> visit;
    for (const auto& name : cols)
        if (missing_counts[name] > 0) visit.push_back(name);
    std::stable_sort(visit.begin(), visit.end(), [&](const std::string& a, const std::string& b) {
        return missing_counts[a] < missing_counts[b];
    });
    if (visit.empty()) {
        params.sweeps = 0;
        return;
    }

    NumericView view = make_numeric_view(shards, cols);
    // mean initialization
    for (std::size_t c = 0; c < shards.size(); ++c)
        for (std::size_t r = 0; r < static_cast<std::size_t>(view.value[c].rows()); ++r)
            for (std::size_t j = 0; j < cols.size(); ++j)
                if (view.miss[c][r][j])
                    view.value[c](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                        means[cols[j]];

    std::map<std::string, std::size_t> col_index;
    for (std::size_t j = 0; j < cols.size(); ++j) col_index[cols[j]] = j;

    std::map<std::string, FeatureModel> models;
    int sweeps_done = 0;
    for (int sweep = 0; sweep < spec.max_iter; ++sweep) {
        double max_change = 0.0;
        for (const auto& target : visit) {
            ProtocolContext::RoundScope round(ctx);
            const std::size_t tj = col_index[target];
            std::vector<std::string> predictors;
            std::vector<double> pred_means;
            for (const auto& name : cols)
                if (name != target) {
                    predictors.push_back(name);
                    pred_means.push_back(means[name]);
                }

            // rows with the target observed, centered by the init means
            std::vector<Eigen::MatrixXd> X(shards.size());
            std::vector<Eigen::VectorXd> Y(shards.size());
            for (std::size_t c = 0; c < shards.size(); ++c) {
                std::vector<std::size_t> rows;
                for (std::size_t r = 0; r < static_cast<std::size_t>(view.value[c].rows()); ++r)
                    if (!view.miss[c][r][tj]) rows.push_back(r);
                X[c].resize(static_cast<Eigen::Index>(rows.size()),
                            static_cast<Eigen::Index>(predictors.size()));
                Y[c].resize(static_cast<Eigen::Index>(rows.size()));
                for (std::size_t ri = 0; ri < rows.size(); ++ri) {
                    Eigen::Index col_out = 0;
                    for (std::size_t j = 0; j < cols.size(); ++j) {
                        if (j == tj) continue;
                        X[c](static_cast<Eigen::Index>(ri), col_out++) =
                            view.value[c](static_cast<Eigen::Index>(rows[ri]),
                                          static_cast<Eigen::Index>(j)) -
                            means[cols[j]];
                    }
                    Y[c](static_cast<Eigen::Index>(ri)) =
                        view.value[c](static_cast<Eigen::Index>(rows[ri]),
                                      static_cast<Eigen::Index>(tj)) -
                        means[target];
                }
            }
            BlrHyper hyper;
            hyper.max_iter = 50;
            BlrState blr = h_fed_blr_fit(ctx, X, Y, hyper);

            // predictions for the missing rows, applied locally
            double local_max = 0.0;
            for (std::size_t c = 0; c < shards.size(); ++c) {
                for (std::size_t r = 0; r < static_cast<std::size_t>(view.value[c].rows()); ++r) {
                    if (!view.miss[c][r][tj]) continue;
                    double pred = means[target];
                    Eigen::Index col_out = 0;
                    for (std::size_t j = 0; j < cols.size(); ++j) {
                        if (j == tj) continue;
                        pred += blr.omega(col_out++) *
                                (view.value[c](static_cast<Eigen::Index>(r),
                                               static_cast<Eigen::Index>(j)) -
                                 means[cols[j]]);
                    }
                    double old = view.value[c](static_cast<Eigen::Index>(r),
                                               static_cast<Eigen::Index>(tj));
                    view.value[c](static_cast<Eigen::Index>(r),
                                  static_cast<Eigen::Index>(tj)) = pred;
                    local_max = std::max(local_max, std::abs(pred - old));
                }
            }
            max_change = std::max(max_change, local_max);

            FeatureModel fm;
            fm.target = target;
            fm.predictors = predictors;
            fm.predictor_means = pred_means;
            fm.target_mean = means[target];
            fm.weights.assign(blr.omega.data(), blr.omega.data() + blr.omega.size());
            models[target] = std::move(fm);
        }
        sweeps_done = sweep + 1;
        // convergence signal is itself a metered gather
        {
            ProtocolContext::RoundScope round(ctx);
            ctx.gather("imputation_delta", [&](std::size_t) {
                ByteWriter w;
                w.f64(max_change);
                return w.take();
            });
        }
        if (max_change < 1e-3) break;
    }

    params.sweeps = sweeps_done;
    for (const auto& name : visit) params.feature_models.push_back(models[name]);
    params.client_fills.resize(shards.size());
    for (std::size_t c = 0; c < shards.size(); ++c)
        for (std::size_t r = 0; r < static_cast<std::size_t>(view.value[c].rows()); ++r)
            for (std::size_t j = 0; j < cols.size(); ++j)
                if (view.miss[c][r][j])
                    params.client_fills[c].push_back(
                        {r, cols[j],
                         view.value[c](static_cast<Eigen::Index>(r),
                                       static_cast<Eigen::Index>(j))});
}

void fit_iterative_imputer_vertical(ProtocolContext& ctx,
                                    const std::vector<ColumnarDataset>& shards,
                                    const PreprocessorSpec& spec, FitParameters& params) {
    const std::size_t n = shards[0].n_rows();
    for (const auto& s : shards)
        if (s.n_rows() != n) throw FitError("misaligned rows across vertical shards");

    // block columns per client, in client order
    std::vector<std::vector<std::string>> block_cols(shards.size());
    std::vector<std::string> all_cols;
    for (std::size_t c = 0; c < shards.size(); ++c) {
        block_cols[c] = numeric_columns(shards[c]);
        if (!spec.columns.empty()) {
            std::vector<std::string> kept;
            for (const auto& name : block_cols[c])
                if (std::find(spec.columns.begin(), spec.columns.end(), name) !=
                    spec.columns.end())
                    kept.push_back(name);
            block_cols[c] = kept;
        }
        for (const auto& name : block_cols[c]) all_cols.push_back(name);
    }

    // imputed working copies per client block
    std::vector<Eigen::MatrixXd> value(shards.size());
    std::vector<std::vector<std::vector<std::uint8_t>>> miss(shards.size());
    std::map<std::string, double> means;
    std::map<std::string, std::uint64_t> missing_counts;
    {
        ProtocolContext::RoundScope round(ctx);
        for (std::size_t c = 0; c < shards.size(); ++c) {
            for (const auto& name : block_cols[c]) {
                MomentsSummary s;
                const Column& col = shards[c].column(name);
                for (std::size_t r = 0; r < col.numeric.size(); ++r)
                    if (!col.is_missing(r)) s.update(col.numeric[r]);
                ctx.collect_from(c, "column_moments", s.serialize());
                require_present(s, name);
                means[name] = s.mean();
                missing_counts[name] = n - s.n;
                ColumnParams p;
                p.fill_value = means[name];
                params.columns[name] = p;
            }
        }
    }
    for (std::size_t c = 0; c < shards.size(); ++c) {
        value[c].resize(static_cast<Eigen::Index>(n),
                        static_cast<Eigen::Index>(block_cols[c].size()));
        miss[c].assign(n, std::vector<std::uint8_t>(block_cols[c].size(), 0));
        for (std::size_t j = 0; j < block_cols[c].size(); ++j) {
            const Column& col = shards[c].column(block_cols[c][j]);
            for (std::size_t r = 0; r < n; ++r) {
                miss[c][r][j] = col.missing[r];
                value[c](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                    col.is_missing(r) ? means[block_cols[c][j]] : col.numeric[r];
            }
        }
    }

    std::vector<std::string> visit;
    for (const auto& name : all_cols)
        if (missing_counts[name] > 0) visit.push_back(name);
    std::stable_sort(visit.begin(), visit.end(), [&](const std::string& a, const std::string& b) {
        return missing_counts[a] < missing_counts[b];
    });
    if (visit.empty()) {
        params.sweeps = 0;
        return;
    }

    auto owner_of = [&](const std::string& name) -> std::pair<std::size_t, std::size_t> {
        for (std::size_t c = 0; c < shards.size(); ++c)
            for (std::size_t j = 0; j < block_cols[c].size(); ++j)
                if (block_cols[c][j] == name) return {c, j};
        throw FitError("column not found: " + name);
    };

    std::map<std::string, FeatureModel> models;
    int sweeps_done = 0;
    for (int sweep = 0; sweep < spec.max_iter; ++sweep) {
        double max_change = 0.0;
        for (const auto& target : visit) {
            ProtocolContext::RoundScope round(ctx);
            auto [oc, oj] = owner_of(target);

            std::vector<std::size_t> obs_rows, miss_rows;
            for (std::size_t r = 0; r < n; ++r)
                (miss[oc][r][oj] ? miss_rows : obs_rows).push_back(r);

            // predictor blocks exclude the target column, centered
            std::vector<Eigen::MatrixXd> blocks(shards.size());
            std::vector<Eigen::MatrixXd> blocks_miss(shards.size());
            std::vector<std::vector<std::string>> block_preds(shards.size());
            for (std::size_t c = 0; c < shards.size(); ++c) {
                std::vector<std::size_t> keep;
                for (std::size_t j = 0; j < block_cols[c].size(); ++j)
                    if (!(c == oc && j == oj)) {
                        keep.push_back(j);
                        block_preds[c].push_back(block_cols[c][j]);
                    }
                blocks[c].resize(static_cast<Eigen::Index>(obs_rows.size()),
                                 static_cast<Eigen::Index>(keep.size()));
                blocks_miss[c].resize(static_cast<Eigen::Index>(miss_rows.size()),
                                      static_cast<Eigen::Index>(keep.size()));
                for (std::size_t ji = 0; ji < keep.size(); ++ji) {
                    double mean = means[block_cols[c][keep[ji]]];
                    for (std::size_t ri = 0; ri < obs_rows.size(); ++ri)
                        blocks[c](static_cast<Eigen::Index>(ri), static_cast<Eigen::Index>(ji)) =
                            value[c](static_cast<Eigen::Index>(obs_rows[ri]),
                                     static_cast<Eigen::Index>(keep[ji])) -
                            mean;
                    for (std::size_t ri = 0; ri < miss_rows.size(); ++ri)
                        blocks_miss[c](static_cast<Eigen::Index>(ri),
                                       static_cast<Eigen::Index>(ji)) =
                            value[c](static_cast<Eigen::Index>(miss_rows[ri]),
                                     static_cast<Eigen::Index>(keep[ji])) -
                            mean;
                }
            }
            Eigen::VectorXd Y(static_cast<Eigen::Index>(obs_rows.size()));
            for (std::size_t ri = 0; ri < obs_rows.size(); ++ri)
                Y(static_cast<Eigen::Index>(ri)) =
                    value[oc](static_cast<Eigen::Index>(obs_rows[ri]),
                              static_cast<Eigen::Index>(oj)) -
                    means[target];

            BlrHyper hyper;
            hyper.max_iter = 50;
            BlrState blr = v_fed_blr_fit(ctx, blocks, oc, Y, hyper);

            // aggregate the per-client prediction contributions for missing rows
            Eigen::VectorXd pred = Eigen::VectorXd::Constant(
                static_cast<Eigen::Index>(miss_rows.size()), means[target]);
            Eigen::Index off = 0;
            auto payloads = ctx.gather("imputation_prediction", [&](std::size_t c) {
                Eigen::VectorXd contrib =
                    blocks_miss[c] * blr.omega.segment(off, blocks_miss[c].cols());
                off += blocks_miss[c].cols();
                return pack_doubles(
                    std::vector<double>(contrib.data(), contrib.data() + contrib.size()));
            });
            for (const auto& pl : payloads) {
                auto d = unpack_doubles(pl);
                for (std::size_t ri = 0; ri < miss_rows.size(); ++ri)
                    pred(static_cast<Eigen::Index>(ri)) += d[ri];
            }
            for (std::size_t ri = 0; ri < miss_rows.size(); ++ri) {
                double old = value[oc](static_cast<Eigen::Index>(miss_rows[ri]),
                                       static_cast<Eigen::Index>(oj));
                value[oc](static_cast<Eigen::Index>(miss_rows[ri]),
                          static_cast<Eigen::Index>(oj)) = pred(static_cast<Eigen::Index>(ri));
                max_change =
                    std::max(max_change, std::abs(pred(static_cast<Eigen::Index>(ri)) - old));
            }

            FeatureModel fm;
            fm.target = target;
            fm.target_mean = means[target];
            for (std::size_t c = 0; c < shards.size(); ++c)
                for (const auto& name : block_preds[c]) {
                    fm.predictors.push_back(name);
                    fm.predictor_means.push_back(means[name]);
                }
            fm.weights.assign(blr.omega.data(), blr.omega.data() + blr.omega.size());
            models[target] = std::move(fm);
        }
        sweeps_done = sweep + 1;
        if (max_change < 1e-3) break;
    }

    params.sweeps = sweeps_done;
    for (const auto& name : visit) params.feature_models.push_back(models[name]);
    params.client_fills.resize(shards.size());
    for (std::size_t c = 0; c < shards.size(); ++c)
        for (std::size_t j = 0; j < block_cols[c].size(); ++j)
            for (std::size_t r = 0; r < n; ++r)
                if (miss[c][r][j])
                    params.client_fills[c].push_back(
                        {r, block_cols[c][j],
                         value[c](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j))});
}

}  // namespace

// --------------------------------------------------------------------------

bool supports_partition(PrepKind kind, PartitionMode mode) {
    if (mode == PartitionMode::Horizontal) return true;
    switch (kind) {
        case PrepKind::Normalizer:
        case PrepKind::Binarizer:
        case PrepKind::KNNImputer:
        case PrepKind::IterativeImputer:
            return true;
        default:
            return false;
    }
}

std::vector<std::string> applicable_columns(const PreprocessorSpec& spec,
                                            const std::vector<ColumnarDataset>& shards,
                                            PartitionMode mode) {
    if (is_label_encoder(spec.kind)) {
        std::string label = !spec.label_column.empty()
                                ? spec.label_column
                                : (spec.columns.size() == 1 ? spec.columns[0] : "");
        if (label.empty()) throw FitError(spec.name() + " requires a label column");
        return {label};
    }
    if (!spec.columns.empty()) return spec.columns;

    std::vector<std::string> out;
    auto add_from = [&](const ColumnarDataset& d) {
        bool want_categorical = is_encoder(spec.kind);
        bool want_both =
            spec.kind == PrepKind::SimpleImputer && spec.strategy == "most_frequent";
        for (const auto& c : d.columns()) {
            if (c.name == spec.label_column) continue;
            bool numeric = c.kind == ColumnKind::Numeric;
            if (want_both || (want_categorical ? !numeric : numeric)) out.push_back(c.name);
        }
    };
    if (mode == PartitionMode::Vertical) {
        for (const auto& sh : shards) add_from(sh);
    } else {
        add_from(shards.at(0));
    }
    return out;
}

FitParameters fit(ProtocolContext& ctx, const PreprocessorSpec& spec,
                  const std::vector<ColumnarDataset>& shards) {
    spec.validate();
    if (shards.empty()) throw FitError("no client shards");
    if (!supports_partition(spec.kind, ctx.mode()))
        throw UnsupportedPartition(
            spec.name() + " has no defined semantics under " +
            (ctx.mode() == PartitionMode::Vertical ? std::string("vertical")
                                                   : std::string("horizontal")) +
            " partitioning; supported combinations follow the per-statistic cost table");

    FitParameters params;
    params.spec = spec;
    const bool vertical = ctx.mode() == PartitionMode::Vertical;
    auto cols = [&] { return applicable_columns(spec, shards, ctx.mode()); };

    switch (spec.kind) {
        case PrepKind::MaxAbsScaler:
            fit_maxabs(ctx, shards, cols(), params);
            break;
        case PrepKind::MinMaxScaler:
            fit_minmax(ctx, shards, cols(), params);
            break;
        case PrepKind::StandardScaler:
            fit_standard(ctx, shards, cols(), params);
            break;
        case PrepKind::RobustScaler:
            fit_robust(ctx, shards, cols(), spec, params);
            break;
        case PrepKind::Normalizer:
            if (vertical) {
                fit_normalizer_vertical(ctx, shards, spec, params);
            } else {
                // horizontal: each client normalizes its own rows; nothing to share
                for (const auto& name : cols()) params.columns[name] = ColumnParams{};
            }
            break;
        case PrepKind::LabelBinarizer:
        case PrepKind::MultiLabelBinarizer:
        case PrepKind::LabelEncoder:
        case PrepKind::OneHotEncoder:
        case PrepKind::OrdinalEncoder:
            fit_set_union_encoder(ctx, shards, cols(), spec, params);
            break;
        case PrepKind::TargetEncoder:
            fit_target_encoder(ctx, shards, cols(), spec, params);
            break;
        case PrepKind::PowerTransformer:
            fit_power(ctx, shards, cols(), spec, params);
            break;
        case PrepKind::QuantileTransformer:
            fit_quantile_transformer(ctx, shards, cols(), spec, params);
            break;
        case PrepKind::SplineTransformer:
            fit_spline(ctx, shards, cols(), spec, params);
            break;
        case PrepKind::Binarizer:
            // fixed threshold; no statistics and no communication
            for (const auto& name : cols()) params.columns[name] = ColumnParams{};
            break;
        case PrepKind::KBinsDiscretizer:
            fit_kbins(ctx, shards, cols(), spec, params);
            break;
        case PrepKind::SimpleImputer:
            fit_simple_imputer(ctx, shards, cols(), spec, params);
            break;
        case PrepKind::KNNImputer:
            if (vertical) fit_knn_imputer_vertical(ctx, shards, spec, params);
            else fit_knn_imputer_horizontal(ctx, shards, cols(), spec, params);
            break;
        case PrepKind::IterativeImputer:
            if (vertical) fit_iterative_imputer_vertical(ctx, shards, spec, params);
            else fit_iterative_imputer_horizontal(ctx, shards, cols(), spec, params);
            break;
    }
    return params;
}

namespace {

double interp_uniform_rank(const std::vector<double>& grid, double x) {
    const std::size_t g = grid.size();
    if (x <= grid.front()) return 0.0;
    if (x >= grid.back()) return 1.0;
    auto it = std::upper_bound(grid.begin(), grid.end(), x);
    std::size_t i = static_cast<std::size_t>(it - grid.begin());  // grid[i-1] <= x < grid[i]
    double lo = grid[i - 1], hi = grid[i];
    double frac = hi > lo ? (x - lo) / (hi - lo) : 0.0;
    return (static_cast<double>(i - 1) + frac) / static_cast<double>(g - 1);
}

std::size_t bin_index(const std::vector<double>& edges, double x) {
    const std::size_t bins = edges.size() - 1;
    for (std::size_t j = 1; j < bins; ++j)
        if (x < edges[j]) return j - 1;
    return bins - 1;
}

void transform_numeric_inplace(const FitParameters& params, Column& col) {
    const auto& spec = params.spec;
    const ColumnParams& p = params.columns.at(col.name);
    for (std::size_t r = 0; r < col.numeric.size(); ++r) {
        if (col.is_missing(r)) continue;
        double& x = col.numeric[r];
        switch (spec.kind) {
            case PrepKind::MaxAbsScaler:
                x = p.constant ? 0.0 : x / *p.maxabs;
                break;
            case PrepKind::MinMaxScaler:
                x = p.constant ? 0.0 : (x - *p.min) / (*p.max - *p.min);
                break;
            case PrepKind::StandardScaler:
                x = p.constant ? 0.0 : (x - *p.mu) / *p.sigma;
                break;
            case PrepKind::RobustScaler:
                x = p.constant ? 0.0 : (x - *p.q2) / (*p.q3 - *p.q1);
                break;
            case PrepKind::PowerTransformer: {
                double y = power_transform_value(spec.method, *p.lambda, x);
                if (spec.standardize) y = p.constant ? 0.0 : (y - *p.mu) / *p.sigma;
                x = y;
                break;
            }
            case PrepKind::QuantileTransformer: {
                double u = interp_uniform_rank(p.quantile_grid, x);
                x = spec.output == "normal" ? norm_ppf(u) : u;
                break;
            }
            case PrepKind::Binarizer:
                x = x > spec.threshold ? 1.0 : 0.0;
                break;
            case PrepKind::KBinsDiscretizer:
                x = p.edges.size() < 2 ? 0.0 : static_cast<double>(bin_index(p.edges, x));
                break;
            default:
                throw TransformError("not a cell-wise numeric transform");
        }
    }
}

std::string infrequent_category_token() { return "__infrequent__"; }

void append_encoded(const FitParameters& params, const Column& col, ColumnarDataset& out) {
    const auto& spec = params.spec;
    const ColumnParams& p = params.columns.at(col.name);
    const std::size_t n = col.size();

    auto split_cell = [](const std::string& cell) {
        std::vector<std::string> toks;
        std::size_t start = 0;
        while (start <= cell.size()) {
            std::size_t end = cell.find('|', start);
            if (end == std::string::npos) end = cell.size();
            if (end > start) toks.push_back(cell.substr(start, end - start));
            start = end + 1;
        }
        return toks;
    };

    switch (spec.kind) {
        case PrepKind::LabelEncoder:
        case PrepKind::OrdinalEncoder: {
            // kept categories get their sorted index; a reserved bucket code
            // follows for infrequent items, then one more for unseen items
            std::map<std::string, double> codes;
            for (std::size_t i = 0; i < p.categories.size(); ++i)
                codes[p.categories[i]] = static_cast<double>(i);
            const double infrequent_code = static_cast<double>(p.categories.size());
            const double unknown_code =
                static_cast<double>(p.categories.size() + (p.infrequent.empty() ? 0 : 1));
            std::vector<double> vals(n, 0.0);
            for (std::size_t r = 0; r < n; ++r) {
                if (col.is_missing(r)) continue;
                auto it = codes.find(col.categories[r]);
                if (it != codes.end()) vals[r] = it->second;
                else if (p.infrequent.count(col.categories[r])) vals[r] = infrequent_code;
                else vals[r] = unknown_code;
            }
            out.add_column(make_numeric_column(col.name, std::move(vals),
                                               {col.missing.begin(), col.missing.end()}));
            break;
        }
        case PrepKind::LabelBinarizer: {
            if (p.categories.size() <= 2) {
                std::string positive = p.categories.empty() ? "" : p.categories.back();
                std::vector<double> vals(n, 0.0);
                for (std::size_t r = 0; r < n; ++r)
                    if (!col.is_missing(r) && col.categories[r] == positive) vals[r] = 1.0;
                out.add_column(make_numeric_column(col.name, std::move(vals),
                                                   {col.missing.begin(), col.missing.end()}));
            } else {
                for (const auto& cat : p.categories) {
                    std::vector<double> vals(n, 0.0);
                    for (std::size_t r = 0; r < n; ++r)
                        if (!col.is_missing(r) && col.categories[r] == cat) vals[r] = 1.0;
                    out.add_column(make_numeric_column(col.name + "=" + cat, std::move(vals),
                                                       {col.missing.begin(), col.missing.end()}));
                }
            }
            break;
        }
        case PrepKind::MultiLabelBinarizer: {
            for (const auto& cat : p.categories) {
                std::vector<double> vals(n, 0.0);
                for (std::size_t r = 0; r < n; ++r) {
                    if (col.is_missing(r)) continue;
                    auto toks = split_cell(col.categories[r]);
                    if (std::find(toks.begin(), toks.end(), cat) != toks.end()) vals[r] = 1.0;
                }
                out.add_column(make_numeric_column(col.name + "=" + cat, std::move(vals),
                                                   {col.missing.begin(), col.missing.end()}));
            }
            break;
        }
        case PrepKind::OneHotEncoder: {
            std::vector<std::string> slots = p.categories;
            if (!p.infrequent.empty()) slots.push_back(infrequent_category_token());
            for (const auto& cat : slots) {
                std::vector<double> vals(n, 0.0);
                bool infrequent_slot = cat == infrequent_category_token();
                for (std::size_t r = 0; r < n; ++r) {
                    if (col.is_missing(r)) continue;
                    if (infrequent_slot ? p.infrequent.count(col.categories[r]) > 0
                                        : col.categories[r] == cat)
                        vals[r] = 1.0;
                }
                out.add_column(make_numeric_column(col.name + "=" + cat, std::move(vals),
                                                   {col.missing.begin(), col.missing.end()}));
            }
            break;
        }
        case PrepKind::TargetEncoder: {
            std::vector<double> vals(n, 0.0);
            for (std::size_t r = 0; r < n; ++r) {
                if (col.is_missing(r)) continue;
                auto it = p.encoding.find(col.categories[r]);
                vals[r] = it != p.encoding.end() ? it->second : p.default_encoding;
            }
            out.add_column(make_numeric_column(col.name, std::move(vals),
                                               {col.missing.begin(), col.missing.end()}));
            break;
        }
        default:
            throw TransformError("not a categorical encoder");
    }
}

void append_spline(const FitParameters& params, const Column& col, ColumnarDataset& out) {
    const ColumnParams& p = params.columns.at(col.name);
    const int degree = params.spec.degree;
    std::vector<double> knots = clamped_knots(p.knot_vector, degree);
    const std::size_t n_basis = knots.size() - static_cast<std::size_t>(degree) - 1;
    std::vector<std::vector<double>> basis(n_basis, std::vector<double>(col.size(), 0.0));
    for (std::size_t r = 0; r < col.size(); ++r) {
        if (col.is_missing(r)) continue;
        auto values = bspline_basis(knots, degree, col.numeric[r]);
        for (std::size_t j = 0; j < n_basis; ++j) basis[j][r] = values[j];
    }
    for (std::size_t j = 0; j < n_basis; ++j)
        out.add_column(make_numeric_column(col.name + "_sp" + std::to_string(j),
                                           std::move(basis[j]),
                                           {col.missing.begin(), col.missing.end()}));
}

void apply_imputation(const FitParameters& params, ColumnarDataset& out, int client_id) {
    // cell fills recorded at fit time take precedence for the matching shard
    if (client_id >= 0 && static_cast<std::size_t>(client_id) < params.client_fills.size()) {
        for (const auto& fill : params.client_fills[static_cast<std::size_t>(client_id)]) {
            if (!out.has_column(fill.column)) continue;
            Column& col = out.column(fill.column);
            if (fill.row >= col.size()) throw TransformError("cell fill out of range");
            col.numeric[fill.row] = fill.value;
            col.missing[fill.row] = 0;
        }
    }

    if (params.spec.kind == PrepKind::IterativeImputer && client_id < 0) {
        // unseen data: mean-initialize, then run the recorded regression
        // sweeps in the fit-time visit order
        for (auto& [name, p] : params.columns) {
            if (!out.has_column(name) || !p.fill_value) continue;
            Column& col = out.column(name);
            for (std::size_t r = 0; r < col.size(); ++r)
                if (col.is_missing(r)) col.numeric[r] = *p.fill_value;
        }
        for (int sweep = 0; sweep < std::max(params.sweeps, 1); ++sweep) {
            for (const auto& fm : params.feature_models) {
                if (!out.has_column(fm.target)) continue;
                Column& target = out.column(fm.target);
                for (std::size_t r = 0; r < target.size(); ++r) {
                    if (!target.is_missing(r)) continue;
                    double pred = fm.target_mean;
                    bool ok = true;
                    for (std::size_t j = 0; j < fm.predictors.size(); ++j) {
                        if (!out.has_column(fm.predictors[j])) {
                            ok = false;
                            break;
                        }
                        pred += fm.weights[j] * (out.column(fm.predictors[j]).numeric[r] -
                                                 fm.predictor_means[j]);
                    }
                    if (ok) target.numeric[r] = pred;
                }
            }
        }
        for (auto& [name, p] : params.columns) {
            (void)p;
            if (!out.has_column(name)) continue;
            Column& col = out.column(name);
            std::fill(col.missing.begin(), col.missing.end(), 0);
        }
        return;
    }

    // remaining holes (unseen data for KNN, simple fills, leftovers) use the
    // per-column fallback
    for (const auto& [name, p] : params.columns) {
        if (!out.has_column(name)) continue;
        Column& col = out.column(name);
        for (std::size_t r = 0; r < col.size(); ++r) {
            if (!col.is_missing(r)) continue;
            if (col.kind == ColumnKind::Numeric && p.fill_value) {
                col.numeric[r] = *p.fill_value;
                col.missing[r] = 0;
            } else if (col.kind == ColumnKind::Categorical && p.fill_category) {
                col.categories[r] = *p.fill_category;
                col.missing[r] = 0;
            }
        }
    }
}

}  // namespace

ColumnarDataset transform(const FitParameters& params, const ColumnarDataset& local,
                          int client_id) {
    const PreprocessorSpec& spec = params.spec;
    ColumnarDataset out;

    const bool expands = is_encoder(spec.kind) || spec.kind == PrepKind::SplineTransformer;
    const bool imputer = spec.kind == PrepKind::SimpleImputer ||
                         spec.kind == PrepKind::KNNImputer ||
                         spec.kind == PrepKind::IterativeImputer;

    if (spec.kind == PrepKind::Normalizer) {
        out = local;
        std::vector<std::string> targets;
        for (const auto& c : local.columns()) {
            if (c.kind != ColumnKind::Numeric) continue;
            if (!spec.columns.empty() &&
                std::find(spec.columns.begin(), spec.columns.end(), c.name) ==
                    spec.columns.end())
                continue;
            targets.push_back(c.name);
        }
        std::vector<double> norms(local.n_rows(), 0.0);
        if (!params.row_norms.empty()) {
            if (params.row_norms.size() != local.n_rows())
                throw TransformError("row norms were fitted for a different row count");
            norms = params.row_norms;
        } else {
            for (const auto& name : targets) {
                const Column& c = local.column(name);
                for (std::size_t r = 0; r < c.size(); ++r) {
                    if (c.is_missing(r)) continue;
                    double v = c.numeric[r];
                    if (spec.norm == "l1") norms[r] += std::abs(v);
                    else if (spec.norm == "l2") norms[r] += v * v;
                    else norms[r] = std::max(norms[r], std::abs(v));
                }
            }
            if (spec.norm == "l2")
                for (auto& v : norms) v = std::sqrt(v);
        }
        for (const auto& name : targets) {
            Column& c = out.column(name);
            for (std::size_t r = 0; r < c.size(); ++r) {
                if (c.is_missing(r)) continue;
                c.numeric[r] = norms[r] > 0.0 ? c.numeric[r] / norms[r] : 0.0;
            }
        }
        return out;
    }

    if (imputer) {
        out = local;
        apply_imputation(params, out, client_id);
        return out;
    }

    if (!expands) {
        out = local;
        for (auto& c : out.columns())
            if (params.columns.count(c.name) && c.kind == ColumnKind::Numeric)
                transform_numeric_inplace(params, c);
        return out;
    }

    // expanding transforms rebuild the table, replacing each handled column
    for (const auto& c : local.columns()) {
        if (!params.columns.count(c.name)) {
            out.add_column(c);
            continue;
        }
        if (spec.kind == PrepKind::SplineTransformer) append_spline(params, c, out);
        else append_encoded(params, c, out);
    }
    return out;
}

FitResult run_fit(const PreprocessorSpec& spec, const std::vector<ColumnarDataset>& shards,
                  PartitionMode mode) {
    ProtocolContext ctx(shards.size(), mode, spec.seed);
    FitResult result;
    result.params = fit(ctx, spec, shards);
    result.report.preprocessor = spec.name();
    result.report.mode = mode == PartitionMode::Vertical ? "vertical" : "horizontal";
    result.report.rounds = ctx.meter().rounds();
    result.report.per_client_uplink_bytes = ctx.meter().uplink_all();
    result.report.per_client_downlink_bytes = ctx.meter().downlink_all();
    result.report.total_bytes = ctx.meter().total_bytes();
    return result;
}

}  // namespace fedps
