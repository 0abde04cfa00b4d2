#include "medgmm/csv.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <vector>

#include "medgmm/errors.hpp"

namespace medgmm {

namespace {

// Splits one logical CSV record, honoring quoted fields. Reads additional
// physical lines when a quoted field spans a newline.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int ch;
    while ((ch = in.get()) != EOF) {
        any = true;
        const char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool is_missing_token(std::string t) {
    for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return t.empty() || t == "na" || t == "nan" || t == "null";
}

double parse_cell(const std::string& raw, Eigen::Index row, const std::string& column) {
    const std::string t = trim(raw);
    if (is_missing_token(t)) return std::numeric_limits<double>::quiet_NaN();
    double value = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw ParseError("non-numeric cell '" + t + "' in column '" + column + "', data row " +
                         std::to_string(row + 1));
    }
    return value;
}

}  // namespace

Table read_csv(std::istream& in) {
    std::vector<std::string> fields;
    if (!read_record(in, fields) || fields.empty()) {
        throw ParseError("empty CSV input: expected a header row");
    }
    Table table;
    for (auto& name : fields) table.names.push_back(trim(name));
    const std::size_t width = table.names.size();

    std::vector<std::vector<double>> cols(width);
    Eigen::Index row = 0;
    while (read_record(in, fields)) {
        if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
        if (fields.size() != width) {
            throw ParseError("data row " + std::to_string(row + 1) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(width));
        }
        for (std::size_t c = 0; c < width; ++c) {
            cols[c].push_back(parse_cell(fields[c], row, table.names[c]));
        }
        ++row;
    }

    table.columns.reserve(width);
    for (auto& col : cols) {
        table.columns.push_back(
            Eigen::Map<const Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(col.size())));
    }
    return table;
}

Table read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open file '" + path + "'");
    }
    return read_csv(in);
}

}  // namespace medgmm
