#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sbsde {

/* Shortest round-trip decimal rendering (std::to_chars), '.' separator,
   locale-independent: equal doubles always render to equal bytes. */
std::string format_double(double v);

/* Column-ordered CSV builder. Every statistic column is immediately followed
   by its standard-error twin "<name>_se"; quantities that are exact by
   construction are published as "<name>_exact" instead, so a reader can tell
   the two apart from the header alone. Column order is insertion order. */
class CsvTable {
public:
    void exact_column(const std::string& name, std::vector<double> values);
    void stat_column(const std::string& name, std::vector<double> mean, std::vector<double> se);
    void label_column(const std::string& name, std::vector<std::string> values);

    std::size_t n_rows() const;
    std::string render() const;                     // header + rows, '\n' endings
    void write_file(const std::string& path) const; // throws std::runtime_error on I/O failure

private:
    struct Column {
        std::string header;
        std::vector<std::string> cells;
    };
    std::vector<Column> columns_;
};

} // namespace sbsde
