#include "fedps/dataset.hpp"

#include <algorithm>

namespace fedps {

std::size_t Column::present_count() const {
    std::size_t n = 0;
    for (auto m : missing)
        if (!m) ++n;
    return n;
}

std::size_t Column::missing_count() const { return size() - present_count(); }

void ColumnarDataset::add_column(Column col) {
    if (col.missing.empty()) col.missing.assign(col.size(), 0);
    if (col.missing.size() != col.size())
        throw InvalidValue("column '" + col.name + "': missing mask length mismatch");
    if (!columns_.empty() && col.size() != n_rows_)
        throw InvalidValue("column '" + col.name + "': row count mismatch");
    if (has_column(col.name))
        throw InvalidValue("duplicate column name '" + col.name + "'");
    if (columns_.empty()) n_rows_ = col.size();
    columns_.push_back(std::move(col));
}

bool ColumnarDataset::has_column(const std::string& name) const {
    for (const auto& c : columns_)
        if (c.name == name) return true;
    return false;
}

std::size_t ColumnarDataset::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    throw InvalidValue("no such column '" + name + "'");
}

const Column& ColumnarDataset::column(const std::string& name) const {
    return columns_[column_index(name)];
}

Column& ColumnarDataset::column(const std::string& name) {
    return columns_[column_index(name)];
}

ColumnarDataset ColumnarDataset::take_rows(const std::vector<std::size_t>& rows) const {
    ColumnarDataset out;
    for (const auto& c : columns_) {
        Column nc;
        nc.name = c.name;
        nc.kind = c.kind;
        nc.missing.reserve(rows.size());
        if (c.kind == ColumnKind::Numeric) nc.numeric.reserve(rows.size());
        else nc.categories.reserve(rows.size());
        for (auto r : rows) {
            if (r >= n_rows_) throw InvalidValue("row index out of range");
            if (c.kind == ColumnKind::Numeric) nc.numeric.push_back(c.numeric[r]);
            else nc.categories.push_back(c.categories[r]);
            nc.missing.push_back(c.missing[r]);
        }
        out.add_column(std::move(nc));
    }
    return out;
}

ColumnarDataset ColumnarDataset::take_columns(const std::vector<std::string>& names) const {
    ColumnarDataset out;
    for (const auto& n : names) out.add_column(column(n));
    return out;
}

bool ColumnarDataset::operator==(const ColumnarDataset& other) const {
    if (n_rows_ != other.n_rows_ || columns_.size() != other.columns_.size()) return false;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        const auto& a = columns_[i];
        const auto& b = other.columns_[i];
        if (a.name != b.name || a.kind != b.kind || a.missing != b.missing) return false;
        if (a.kind == ColumnKind::Numeric) {
            // bit-exact comparison, NaN payloads included
            if (a.numeric.size() != b.numeric.size()) return false;
            for (std::size_t r = 0; r < a.numeric.size(); ++r) {
                std::uint64_t x, y;
                static_assert(sizeof(double) == sizeof(std::uint64_t));
                std::copy_n(reinterpret_cast<const char*>(&a.numeric[r]), 8,
                            reinterpret_cast<char*>(&x));
                std::copy_n(reinterpret_cast<const char*>(&b.numeric[r]), 8,
                            reinterpret_cast<char*>(&y));
                if (x != y) return false;
            }
        } else if (a.categories != b.categories) {
            return false;
        }
    }
    return true;
}

Column make_numeric_column(std::string name, std::vector<double> values,
                           std::vector<std::uint8_t> missing) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::Numeric;
    c.numeric = std::move(values);
    c.missing = missing.empty() ? std::vector<std::uint8_t>(c.numeric.size(), 0)
                                : std::move(missing);
    return c;
}

Column make_categorical_column(std::string name, std::vector<std::string> values,
                               std::vector<std::uint8_t> missing) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::Categorical;
    c.categories = std::move(values);
    c.missing = missing.empty() ? std::vector<std::uint8_t>(c.categories.size(), 0)
                                : std::move(missing);
    return c;
}

}  // namespace fedps
