#include "qlink/table_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "qlink/errors.hpp"

namespace qlink {

std::size_t Table::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw ValidationError("table has no column named '" + name + "'");
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_table(std::ostream& os, const Table& table) {
    for (const auto& c : table.comments) os << "# " << c << "\n";
    os << "# ";
    for (std::size_t i = 0; i < table.columns.size(); ++i)
        os << table.columns[i] << (i + 1 < table.columns.size() ? "\t" : "\n");
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size())
            throw ValidationError("table row width does not match column count");
        for (std::size_t i = 0; i < row.size(); ++i)
            os << format_double(row[i]) << (i + 1 < row.size() ? "\t" : "\n");
    }
}

Table read_table(std::istream& is) {
    Table t;
    std::string line;
    std::vector<std::string> comment_lines;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            comment_lines.push_back(line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1));
            continue;
        }
        std::istringstream ss(line);
        std::vector<double> row;
        double v;
        while (ss >> v) row.push_back(v);
        if (!row.empty()) t.rows.push_back(std::move(row));
    }
    if (!comment_lines.empty()) {
        // Last comment line carries the column names.
        std::istringstream ss(comment_lines.back());
        std::string name;
        while (ss >> name) t.columns.push_back(name);
        comment_lines.pop_back();
        t.comments = std::move(comment_lines);
    }
    for (const auto& row : t.rows)
        if (!t.columns.empty() && row.size() != t.columns.size())
            throw ValidationError("table row width does not match header");
    return t;
}

void write_table_file(const std::string& path, const Table& table) {
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open '" + path + "' for writing");
    write_table(os, table);
}

Table read_table_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open '" + path + "' for reading");
    return read_table(is);
}

void write_records(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& kv,
                   const std::vector<std::string>& comments) {
    for (const auto& c : comments) os << "# " << c << "\n";
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
}

} // namespace qlink
