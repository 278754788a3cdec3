#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spdckit/common.hpp"

namespace spdckit {

enum class output_format { csv, json };

/**
 * A small column-ordered table that can be serialized as CSV or as a JSON
 * array of objects. Cells are JSON values so that numbers stay numbers in the
 * JSON output; null cells stand for missing values and render as "nan" in CSV.
 * Double cells are formatted with the shortest round-trip representation,
 * which keeps reruns byte-identical.
 */
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<nlohmann::ordered_json>> rows;

    void add_row(std::vector<nlohmann::ordered_json> row) {
        if (row.size() != columns.size())
            throw argument_error("table row has " + format_int(static_cast<long long>(row.size())) +
                                 " cells, expected " + format_int(static_cast<long long>(columns.size())));
        rows.push_back(std::move(row));
    }
};

namespace detail {

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string csv_cell(const nlohmann::ordered_json& cell) {
    if (cell.is_null()) return "nan";
    if (cell.is_string()) return csv_escape(cell.get<std::string>());
    if (cell.is_boolean()) return cell.get<bool>() ? "true" : "false";
    if (cell.is_number_float()) return format_double(cell.get<double>());
    if (cell.is_number_unsigned()) return std::to_string(cell.get<std::uint64_t>());
    if (cell.is_number_integer()) return std::to_string(cell.get<std::int64_t>());
    throw argument_error("unsupported CSV cell type: " + cell.dump());
}

} // namespace detail

/// Numeric cell helper: maps NaN onto the null (missing) cell.
inline nlohmann::ordered_json num_cell(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

inline void write_table_csv(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary); // binary: no platform newline translation
    if (!out) throw computation_error("cannot open '" + path + "' for writing");
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        out << (c ? "," : "") << detail::csv_escape(table.columns[c]);
    out << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << detail::csv_cell(row[c]);
        out << "\n";
    }
    if (!out) throw computation_error("failed writing table to '" + path + "'");
}

inline void write_table_json(const std::string& path, const Table& table) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (std::size_t c = 0; c < row.size(); ++c) obj[table.columns[c]] = row[c];
        arr.push_back(std::move(obj));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw computation_error("cannot open '" + path + "' for writing");
    out << arr.dump(2) << "\n";
    if (!out) throw computation_error("failed writing table to '" + path + "'");
}

inline void write_json_file(const std::string& path, const nlohmann::ordered_json& value) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw computation_error("cannot open '" + path + "' for writing");
    out << value.dump(2) << "\n";
    if (!out) throw computation_error("failed writing JSON to '" + path + "'");
}

} // namespace spdckit
