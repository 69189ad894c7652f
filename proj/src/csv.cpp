#include "sbsde/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <system_error>
#include <utility>

namespace sbsde {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> render_cells(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    return cells;
}

} // namespace

void CsvTable::exact_column(const std::string& name, std::vector<double> values) {
    columns_.push_back(Column{name + "_exact", render_cells(values)});
}

void CsvTable::stat_column(const std::string& name, std::vector<double> mean,
                           std::vector<double> se) {
    if (mean.size() != se.size())
        throw std::invalid_argument("stat_column: mean and se differ in length");
    columns_.push_back(Column{name, render_cells(mean)});
    columns_.push_back(Column{name + "_se", render_cells(se)});
}

void CsvTable::label_column(const std::string& name, std::vector<std::string> values) {
    columns_.push_back(Column{name, std::move(values)});
}

std::size_t CsvTable::n_rows() const {
    std::size_t n = 0;
    for (const Column& c : columns_) n = std::max(n, c.cells.size());
    return n;
}

std::string CsvTable::render() const {
    if (columns_.empty()) return "";
    for (const Column& c : columns_)
        if (c.cells.size() != columns_.front().cells.size())
            throw std::runtime_error("CsvTable: ragged columns");
    std::string out;
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        if (j) out += ',';
        out += columns_[j].header;
    }
    out += '\n';
    const std::size_t rows = n_rows();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < columns_.size(); ++j) {
            if (j) out += ',';
            out += columns_[j].cells[i];
        }
        out += '\n';
    }
    return out;
}

void CsvTable::write_file(const std::string& path) const {
    const std::string body = render();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("CsvTable: cannot open " + path);
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) throw std::runtime_error("CsvTable: write failed for " + path);
}

} // namespace sbsde
