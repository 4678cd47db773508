#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>

#include "fedps/dataset.hpp"

namespace fedps {

/// Dialect: comma separator, first row is the header, no quoting.
struct CsvOptions {
    /// Optional per-column kind hints; unhinted columns are inferred
    /// (numeric if every present cell parses as a double).
    std::map<std::string, ColumnKind> schema;
    std::set<std::string> missing_tokens = {"", "?", "NA"};
};

ColumnarDataset load_csv(const std::string& path, const CsvOptions& opts = {});
ColumnarDataset parse_csv(const std::string& text, const CsvOptions& opts = {});

void write_csv(const ColumnarDataset& data, const std::string& path,
               const std::string& missing_token = "NA");
std::string format_csv(const ColumnarDataset& data, const std::string& missing_token = "NA");

}  // namespace fedps
