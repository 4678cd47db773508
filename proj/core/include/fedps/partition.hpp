#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedps/dataset.hpp"

namespace fedps {

enum class PartitionMode { Horizontal, Vertical };

/// Horizontal: assignments[i] = client index of row i.
/// Vertical: assignments[i] = client index of column i.
struct PartitionPlan {
    PartitionMode mode = PartitionMode::Horizontal;
    std::size_t n_clients = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> assignments;
    int label_holder = -1;  // vertical only; -1 when no label column

    std::vector<std::size_t> client_indices(std::size_t client) const;
    std::string to_json() const;
    static PartitionPlan from_json(const std::string& text);
};

PartitionPlan partition_iid(const ColumnarDataset& data, std::size_t n_clients,
                            std::uint64_t seed);

PartitionPlan partition_dirichlet_label_skew(const ColumnarDataset& data,
                                             const std::string& label,
                                             std::size_t n_clients, double alpha,
                                             std::uint64_t seed);

PartitionPlan vertical_split(const ColumnarDataset& data,
                             const std::vector<std::vector<std::string>>& column_groups,
                             int label_holder = -1,
                             const std::string& label_column = "");

/// Materialize one client's view of the data under the plan.
ColumnarDataset client_view(const ColumnarDataset& data, const PartitionPlan& plan,
                            std::size_t client);

/// Inverse of partitioning: reassemble the original dataset from client views.
ColumnarDataset reassemble(const std::vector<ColumnarDataset>& views,
                           const PartitionPlan& plan);

}  // namespace fedps
