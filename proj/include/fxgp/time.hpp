#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fxgp {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

/// Trading-day label: days since 1970-01-01 of the US-Eastern calendar date
/// on which the 17:00 ET session closes.
using TradingDay = std::int32_t;

inline constexpr Timestamp kBarSeconds = 300;

/// Parses `YYYY-MM-DDTHH:MM:SS` followed by `Z` or `±HH:MM`, or a bare
/// `YYYY-MM-DD` (midnight UTC). Throws DataError on malformed input.
Timestamp parse_rfc3339(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_rfc3339(Timestamp ts);

/// UTC offset of US-Eastern time at `ts`, in seconds (-18000 or -14400).
std::int32_t us_eastern_offset(Timestamp ts);

/// Bars closing in (17:00, 17:00] ET of consecutive days share a label.
TradingDay trading_day(Timestamp bar_close);

/// True for bars inside the Sunday 17:00 to Friday 17:00 ET trading week.
bool in_trading_week(Timestamp bar_close);

/// `YYYY-MM-DD` for a trading-day label.
std::string format_day(TradingDay day);

}  // namespace fxgp
