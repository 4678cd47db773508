#include "fedps/partition.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

namespace fedps {

std::vector<std::size_t> PartitionPlan::client_indices(std::size_t client) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == client) out.push_back(i);
    return out;
}

std::string PartitionPlan::to_json() const {
    nlohmann::json j;
    j["n_clients"] = n_clients;
    j["mode"] = mode == PartitionMode::Horizontal ? "horizontal" : "vertical";
    j["seed"] = seed;
    j["assignments"] = assignments;
    if (label_holder >= 0) j["label_holder"] = label_holder;
    return j.dump(2);
}

PartitionPlan PartitionPlan::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    PartitionPlan p;
    p.n_clients = j.at("n_clients").get<std::size_t>();
    p.mode = j.at("mode").get<std::string>() == "vertical" ? PartitionMode::Vertical
                                                           : PartitionMode::Horizontal;
    p.seed = j.at("seed").get<std::uint64_t>();
    p.assignments = j.at("assignments").get<std::vector<std::size_t>>();
    p.label_holder = j.value("label_holder", -1);
    return p;
}

PartitionPlan partition_iid(const ColumnarDataset& data, std::size_t n_clients,
                            std::uint64_t seed) {
    const std::size_t n = data.n_rows();
    if (n_clients < 1) throw PartitionError("n_clients must be >= 1");
    if (n_clients > n)
        throw PartitionError("n_clients (" + std::to_string(n_clients) + ") exceeds row count (" +
                             std::to_string(n) + ")");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    PartitionPlan plan;
    plan.mode = PartitionMode::Horizontal;
    plan.n_clients = n_clients;
    plan.seed = seed;
    plan.assignments.assign(n, 0);
    // contiguous chunks of the shuffled order; sizes differ by at most 1
    const std::size_t base = n / n_clients;
    const std::size_t extra = n % n_clients;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < n_clients; ++c) {
        std::size_t count = base + (c < extra ? 1 : 0);
        for (std::size_t i = 0; i < count; ++i) plan.assignments[perm[pos++]] = c;
    }
    return plan;
}

PartitionPlan partition_dirichlet_label_skew(const ColumnarDataset& data,
                                             const std::string& label,
                                             std::size_t n_clients, double alpha,
                                             std::uint64_t seed) {
    if (n_clients < 1) throw PartitionError("n_clients must be >= 1");
    if (alpha <= 0.0) throw PartitionError("alpha must be positive");
    const Column& lab = data.column(label);
    if (lab.kind != ColumnKind::Categorical)
        throw PartitionError("label column '" + label + "' must be categorical");

    std::map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t r = 0; r < data.n_rows(); ++r)
        if (!lab.is_missing(r)) by_label[lab.categories[r]].push_back(r);
    for (std::size_t r = 0; r < data.n_rows(); ++r)
        if (lab.is_missing(r)) by_label[""].push_back(r);  // missing labels form their own group
    if (by_label.empty()) throw PartitionError("no labeled rows");

    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gamma(alpha, 1.0);

    PartitionPlan plan;
    plan.mode = PartitionMode::Horizontal;
    plan.n_clients = n_clients;
    plan.seed = seed;
    plan.assignments.assign(data.n_rows(), 0);

    auto assign_label = [&](const std::vector<std::size_t>& rows, bool round_robin) {
        std::vector<std::size_t> shuffled = rows;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        if (round_robin) {
            for (std::size_t i = 0; i < shuffled.size(); ++i)
                plan.assignments[shuffled[i]] = i % n_clients;
            return;
        }
        std::vector<double> p(n_clients);
        double total = 0.0;
        for (auto& v : p) {
            v = gamma(rng);
            total += v;
        }
        if (total <= 0.0) total = 1.0;
        // cumulative-proportion cut points over the shuffled rows
        std::size_t start = 0;
        double cum = 0.0;
        for (std::size_t c = 0; c < n_clients; ++c) {
            cum += p[c] / total;
            std::size_t end = (c + 1 == n_clients)
                                  ? shuffled.size()
                                  : static_cast<std::size_t>(cum * shuffled.size() + 0.5);
            end = std::min(end, shuffled.size());
            for (std::size_t i = start; i < std::max(start, end); ++i)
                plan.assignments[shuffled[i]] = c;
            start = std::max(start, end);
        }
    };

    // Draw per-label proportions; if some client ends up empty overall,
    // resample the whole set of draws up to 10 times, then fall back to
    // round-robin for every label.
    for (int attempt = 0; attempt <= 10; ++attempt) {
        bool round_robin = attempt == 10;
        std::fill(plan.assignments.begin(), plan.assignments.end(), 0);
        for (const auto& [name, rows] : by_label) assign_label(rows, round_robin);
        std::vector<std::size_t> counts(n_clients, 0);
        for (auto a : plan.assignments) ++counts[a];
        if (std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; })) break;
    }
    return plan;
}

PartitionPlan vertical_split(const ColumnarDataset& data,
                             const std::vector<std::vector<std::string>>& column_groups,
                             int label_holder, const std::string& label_column) {
    if (column_groups.empty()) throw PartitionError("at least one column group required");
    std::map<std::string, std::size_t> owner;
    for (std::size_t g = 0; g < column_groups.size(); ++g) {
        for (const auto& name : column_groups[g]) {
            if (!data.has_column(name))
                throw PartitionError("unknown column '" + name + "' in group " + std::to_string(g));
            if (!owner.emplace(name, g).second)
                throw PartitionError("column '" + name + "' appears in multiple groups");
        }
    }
    if (owner.size() != data.n_cols())
        throw PartitionError("column groups do not cover all columns");
    if (!label_column.empty()) {
        if (label_holder < 0) throw PartitionError("label column given but no label holder");
        if (owner.at(label_column) != static_cast<std::size_t>(label_holder))
            throw PartitionError("label column '" + label_column +
                                 "' is not in the label holder's group");
    }

    PartitionPlan plan;
    plan.mode = PartitionMode::Vertical;
    plan.n_clients = column_groups.size();
    plan.label_holder = label_holder;
    plan.assignments.resize(data.n_cols());
    for (std::size_t i = 0; i < data.n_cols(); ++i)
        plan.assignments[i] = owner.at(data.columns()[i].name);
    return plan;
}

ColumnarDataset client_view(const ColumnarDataset& data, const PartitionPlan& plan,
                            std::size_t client) {
    if (client >= plan.n_clients) throw PartitionError("client index out of range");
    if (plan.mode == PartitionMode::Horizontal)
        return data.take_rows(plan.client_indices(client));
    std::vector<std::string> names;
    for (std::size_t i = 0; i < data.n_cols(); ++i)
        if (plan.assignments[i] == client) names.push_back(data.columns()[i].name);
    return data.take_columns(names);
}

ColumnarDataset reassemble(const std::vector<ColumnarDataset>& views,
                           const PartitionPlan& plan) {
    if (views.size() != plan.n_clients)
        throw PartitionError("view count does not match plan");
    if (plan.mode == PartitionMode::Vertical) {
        ColumnarDataset out;
        std::vector<std::size_t> next(plan.n_clients, 0);
        for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
            std::size_t c = plan.assignments[i];
            out.add_column(views[c].columns()[next[c]++]);
        }
        return out;
    }
    // horizontal: inverse-permute rows back into original order
    const std::size_t n = plan.assignments.size();
    std::vector<std::size_t> position(n);  // original row -> index within its client view
    std::vector<std::size_t> seen(plan.n_clients, 0);
    for (std::size_t i = 0; i < n; ++i) position[i] = seen[plan.assignments[i]]++;

    if (views.empty()) throw PartitionError("no client views");
    ColumnarDataset out;
    const ColumnarDataset& proto = views[0];
    for (std::size_t ci = 0; ci < proto.n_cols(); ++ci) {
        Column nc;
        nc.name = proto.columns()[ci].name;
        nc.kind = proto.columns()[ci].kind;
        nc.missing.resize(n);
        if (nc.kind == ColumnKind::Numeric) nc.numeric.resize(n);
        else nc.categories.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Column& src = views[plan.assignments[i]].columns()[ci];
            std::size_t p = position[i];
            nc.missing[i] = src.missing[p];
            if (nc.kind == ColumnKind::Numeric) nc.numeric[i] = src.numeric[p];
            else nc.categories[i] = src.categories[p];
        }
        out.add_column(std::move(nc));
    }
    return out;
}

}  // namespace fedps
