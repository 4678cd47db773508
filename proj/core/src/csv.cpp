#include "fedps/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fedps {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

ColumnarDataset parse_csv(const std::string& text, const CsvOptions& opts) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty input: no header row");
    std::vector<std::string> header = split_line(line);
    for (auto& h : header) h = trim(h);
    const std::size_t n_cols = header.size();

    std::vector<std::vector<std::string>> raw(n_cols);
    std::vector<std::vector<std::uint8_t>> miss(n_cols);
    std::size_t row_idx = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = split_line(line);
        if (cells.size() != n_cols)
            throw ParseError("ragged row " + std::to_string(row_idx + 1) + ": expected " +
                             std::to_string(n_cols) + " cells, got " +
                             std::to_string(cells.size()));
        for (std::size_t c = 0; c < n_cols; ++c) {
            std::string cell = trim(cells[c]);
            bool is_missing = opts.missing_tokens.count(cell) > 0;
            miss[c].push_back(is_missing ? 1 : 0);
            raw[c].push_back(is_missing ? "" : cell);
        }
        ++row_idx;
    }

    ColumnarDataset data;
    for (std::size_t c = 0; c < n_cols; ++c) {
        ColumnKind kind;
        auto hint = opts.schema.find(header[c]);
        if (hint != opts.schema.end()) {
            kind = hint->second;
        } else {
            kind = ColumnKind::Numeric;
            for (std::size_t r = 0; r < raw[c].size(); ++r) {
                double v;
                if (!miss[c][r] && !parse_double(raw[c][r], v)) {
                    kind = ColumnKind::Categorical;
                    break;
                }
            }
        }
        if (kind == ColumnKind::Numeric) {
            std::vector<double> vals(raw[c].size(), 0.0);
            for (std::size_t r = 0; r < raw[c].size(); ++r) {
                if (miss[c][r]) continue;
                if (!parse_double(raw[c][r], vals[r]))
                    throw ParseError("unparseable numeric cell at row " + std::to_string(r + 1) +
                                     ", column '" + header[c] + "': '" + raw[c][r] + "'");
            }
            data.add_column(make_numeric_column(header[c], std::move(vals), std::move(miss[c])));
        } else {
            data.add_column(
                make_categorical_column(header[c], std::move(raw[c]), std::move(miss[c])));
        }
    }
    return data;
}

ColumnarDataset load_csv(const std::string& path, const CsvOptions& opts) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str(), opts);
}

std::string format_csv(const ColumnarDataset& data, const std::string& missing_token) {
    std::ostringstream out;
    const auto& cols = data.columns();
    for (std::size_t c = 0; c < cols.size(); ++c)
        out << (c ? "," : "") << cols[c].name;
    out << "\n";
    char buf[64];
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (c) out << ",";
            if (cols[c].is_missing(r)) {
                out << missing_token;
            } else if (cols[c].kind == ColumnKind::Numeric) {
                std::snprintf(buf, sizeof(buf), "%.17g", cols[c].numeric[r]);
                out << buf;
            } else {
                out << cols[c].categories[r];
            }
        }
        out << "\n";
    }
    return out.str();
}

void write_csv(const ColumnarDataset& data, const std::string& path,
               const std::string& missing_token) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open file for writing: " + path);
    f << format_csv(data, missing_token);
}

}  // namespace fedps
