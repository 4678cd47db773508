#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedps/errors.hpp"

namespace fedps {

enum class ColumnKind { Numeric, Categorical };

/// A single typed column with an explicit per-cell missing flag.
/// Missingness is a flag, not a sentinel value, so NaN payloads in source
/// data stay distinguishable from missing cells.
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<double> numeric;         // valid iff kind == Numeric
    std::vector<std::string> categories; // valid iff kind == Categorical
    std::vector<std::uint8_t> missing;   // 1 = missing

    std::size_t size() const {
        return kind == ColumnKind::Numeric ? numeric.size() : categories.size();
    }
    bool is_missing(std::size_t row) const { return missing[row] != 0; }
    std::size_t present_count() const;
    std::size_t missing_count() const;
};

/// Row-aligned columnar table; the unit a client holds locally.
class ColumnarDataset {
public:
    ColumnarDataset() = default;

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return columns_.size(); }
    const std::vector<Column>& columns() const { return columns_; }
    std::vector<Column>& columns() { return columns_; }

    void add_column(Column col);
    bool has_column(const std::string& name) const;
    const Column& column(const std::string& name) const;
    Column& column(const std::string& name);
    std::size_t column_index(const std::string& name) const;

    /// Row subset in the given order; used by horizontal partitioning.
    ColumnarDataset take_rows(const std::vector<std::size_t>& rows) const;
    /// Column subset by name; used by vertical partitioning.
    ColumnarDataset take_columns(const std::vector<std::string>& names) const;

    bool operator==(const ColumnarDataset& other) const;

private:
    std::vector<Column> columns_;
    std::size_t n_rows_ = 0;
};

Column make_numeric_column(std::string name, std::vector<double> values,
                           std::vector<std::uint8_t> missing = {});
Column make_categorical_column(std::string name, std::vector<std::string> values,
                               std::vector<std::uint8_t> missing = {});

}  // namespace fedps
