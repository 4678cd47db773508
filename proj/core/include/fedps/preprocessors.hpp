#pragma once

#include "fedps/federation.hpp"
#include "fedps/prep.hpp"

namespace fedps {

/// True when Table-style support exists for the (kind, mode) combination.
bool supports_partition(PrepKind kind, PartitionMode mode);

/// Run the five-step fit protocol over per-client shards. Throws
/// UnsupportedPartition when the combination has no defined semantics.
FitParameters fit(ProtocolContext& ctx, const PreprocessorSpec& spec,
                  const std::vector<ColumnarDataset>& shards);

struct FitResult {
    FitParameters params;
    CommReport report;
};

/// fit() plus a communication report taken from a fresh meter.
FitResult run_fit(const PreprocessorSpec& spec, const std::vector<ColumnarDataset>& shards,
                  PartitionMode mode);

/// Pure local application of fitted parameters. `client_id` selects
/// fit-time cell fills for the imputers; pass -1 for previously unseen data.
ColumnarDataset transform(const FitParameters& params, const ColumnarDataset& local,
                          int client_id = -1);

/// Columns a spec applies to when its column list is empty.
std::vector<std::string> applicable_columns(const PreprocessorSpec& spec,
                                            const std::vector<ColumnarDataset>& shards,
                                            PartitionMode mode);

}  // namespace fedps
