#include "evarport/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace evarport {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string strip(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r");
    auto end = s.find_last_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    return s.substr(begin, end - begin + 1);
}

struct RawTable {
    std::vector<std::string> names;
    // date -> row of optional prices (missing cells stay unset)
    std::map<std::string, std::vector<std::optional<double>>> rows;
};

RawTable read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
    RawTable table;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip(line);
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (line_no == 1) {
            if (fields.size() < 2 || strip(fields[0]) != "date")
                throw Error(ErrorCode::ParseError,
                            path + " line 1: header must be 'date,<asset>,...'");
            for (std::size_t i = 1; i < fields.size(); ++i) table.names.push_back(strip(fields[i]));
            continue;
        }
        if (fields.size() != table.names.size() + 1)
            throw Error(ErrorCode::ParseError, path + " line " + std::to_string(line_no) +
                                                   ": expected " +
                                                   std::to_string(table.names.size() + 1) +
                                                   " fields, got " + std::to_string(fields.size()));
        std::string date = strip(fields[0]);
        if (date.empty())
            throw Error(ErrorCode::ParseError,
                        path + " line " + std::to_string(line_no) + ": empty date");
        if (table.rows.count(date))
            throw Error(ErrorCode::ParseError,
                        path + " line " + std::to_string(line_no) + ": duplicate date " + date);
        std::vector<std::optional<double>> row(table.names.size());
        for (std::size_t i = 1; i < fields.size(); ++i) {
            std::string cell = strip(fields[i]);
            if (cell.empty()) continue; // missing cell; the whole row is dropped later
            std::size_t pos = 0;
            double value = 0;
            try {
                value = std::stod(cell, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != cell.size() || !std::isfinite(value))
                throw Error(ErrorCode::ParseError, path + " line " + std::to_string(line_no) +
                                                       ", column " + std::to_string(i + 1) +
                                                       ": cannot parse '" + cell + "'");
            if (value <= 0.0)
                throw Error(ErrorCode::NonPositivePrice,
                            path + " line " + std::to_string(line_no) + ": price " + cell);
            row[i - 1] = value;
        }
        table.rows.emplace(std::move(date), std::move(row));
    }
    if (table.names.empty())
        throw Error(ErrorCode::ParseError, path + ": no header found");
    return table;
}

PriceSeries assemble(const std::vector<RawTable>& tables) {
    PriceSeries series;
    for (const auto& t : tables)
        for (const auto& name : t.names) series.asset_names.push_back(name);

    // Dates present in every file.
    std::vector<std::string> dates;
    for (const auto& [date, row] : tables.front().rows) {
        bool everywhere = true;
        for (std::size_t t = 1; t < tables.size(); ++t)
            if (!tables[t].rows.count(date)) everywhere = false;
        if (everywhere) dates.push_back(date);
    }

    std::vector<std::string> kept;
    std::vector<std::vector<double>> values;
    long dropped = 0;
    for (const auto& date : dates) {
        std::vector<double> row;
        bool complete = true;
        for (const auto& t : tables) {
            for (const auto& cell : t.rows.at(date)) {
                if (!cell) {
                    complete = false;
                    break;
                }
                row.push_back(*cell);
            }
            if (!complete) break;
        }
        if (!complete) {
            ++dropped;
            continue;
        }
        kept.push_back(date);
        values.push_back(std::move(row));
    }
    if (kept.empty())
        throw Error(ErrorCode::EmptyIntersection, "no complete row across all inputs");

    series.dates = std::move(kept); // std::map iteration already sorted the dates
    series.dropped_rows = dropped;
    series.closes.resize(static_cast<Eigen::Index>(values.size()),
                         static_cast<Eigen::Index>(series.asset_names.size()));
    for (std::size_t r = 0; r < values.size(); ++r)
        for (std::size_t c = 0; c < values[r].size(); ++c)
            series.closes(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                values[r][c];
    return series;
}

} // namespace

PriceSeries load_prices(const std::string& path) {
    return load_prices(std::vector<std::string>{path});
}

PriceSeries load_prices(const std::vector<std::string>& paths) {
    if (paths.empty()) throw Error(ErrorCode::InvalidArgument, "no input files");
    std::vector<RawTable> tables;
    tables.reserve(paths.size());
    for (const auto& path : paths) tables.push_back(read_table(path));
    return assemble(tables);
}

ReturnSample to_log_returns(const PriceSeries& prices) {
    if (prices.closes.rows() < 2)
        throw Error(ErrorCode::TooFewRows, "need at least two price rows");
    ReturnSample sample;
    sample.asset_names = prices.asset_names;
    const auto rows = prices.closes.rows();
    sample.returns = prices.closes.bottomRows(rows - 1).array().log().matrix() -
                     prices.closes.topRows(rows - 1).array().log().matrix();
    return sample;
}

std::string returns_to_csv(const ReturnSample& sample, const std::vector<std::string>& dates) {
    std::string out = "date";
    for (const auto& name : sample.asset_names) out += ",r_" + name;
    out += "\n";
    char buf[64];
    for (Eigen::Index r = 0; r < sample.returns.rows(); ++r) {
        if (!dates.empty() && static_cast<std::size_t>(r) < dates.size())
            out += dates[static_cast<std::size_t>(r)];
        else
            out += std::to_string(r + 1);
        for (Eigen::Index c = 0; c < sample.returns.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), ",%.12g", sample.returns(r, c));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

} // namespace evarport
