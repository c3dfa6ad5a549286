#ifndef QLINK_TABLE_IO_HPP
#define QLINK_TABLE_IO_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace qlink {

/// Headered delimiter-separated numeric table. Lines starting with '#' are
/// comments; the last comment line before the data names the columns.
struct Table {
    std::vector<std::string> comments;      // without leading '#'
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // row-major, rows[i].size() == columns.size()

    std::size_t column_index(const std::string& name) const;
};

void write_table(std::ostream& os, const Table& table);
Table read_table(std::istream& is);

void write_table_file(const std::string& path, const Table& table);
Table read_table_file(const std::string& path);

/// Flat key-value record ("key = value" per line, '#' comments).
void write_records(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& kv,
                   const std::vector<std::string>& comments = {});

std::string format_double(double v);

} // namespace qlink

#endif
