#pragma once

#include <string>
#include <vector>

#include "evarport/errors.hpp"
#include "evarport/types.hpp"

namespace evarport {

/// Aligned close-price panel: strictly increasing ISO-8601 dates, positive
/// prices, no missing cells.
struct PriceSeries {
    std::vector<std::string> asset_names;
    std::vector<std::string> dates;
    Matrix closes; // rows = dates, cols = assets
    long dropped_rows = 0; // rows discarded for missing cells during loading
};

/// Loads a CSV with header `date,<asset1>,<asset2>,...`. Rows are sorted by
/// date; rows with any missing cell are dropped (counted in dropped_rows).
/// Throws Error{ParseError} (with line/column), Error{NonPositivePrice},
/// Error{EmptyIntersection}.
PriceSeries load_prices(const std::string& path);

/// Merges several single- or multi-asset CSVs on the intersection of their
/// dates. Throws Error{EmptyIntersection} if no date survives.
PriceSeries load_prices(const std::vector<std::string>& paths);

/// r_{t,i} = ln close_{t+1,i} - ln close_{t,i}. Throws Error{TooFewRows}
/// for fewer than two price rows.
ReturnSample to_log_returns(const PriceSeries& prices);

/// CSV with header `date,r_<asset>...`; `dates` falls back to the row index
/// when empty (simulated samples carry no calendar).
std::string returns_to_csv(const ReturnSample& sample, const std::vector<std::string>& dates = {});

} // namespace evarport
