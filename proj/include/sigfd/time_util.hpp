#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "sigfd/errors.hpp"

// Civil-calendar helpers for naive local timestamps. All timestamps in this
// project are seconds since 1970-01-01 00:00:00 with no timezone attached:
// the input feeds are already in local time and are never converted.

namespace sigfd {

// Days from 1970-01-01 to y-m-d (proleptic Gregorian).
// Algorithm by Howard Hinnant (chrono-compatible days_from_civil).
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) noexcept {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);             // [0, 399]
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;   // [0, 365]
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;            // [0, 146096]
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
    int year;
    unsigned month;  // [1, 12]
    unsigned day;    // [1, 31]
};

constexpr CivilDate civil_from_days(std::int64_t z) noexcept {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);          // [0, 146096]
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);          // [0, 365]
    const unsigned mp = (5 * doy + 2) / 153;                               // [0, 11]
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;                       // [1, 31]
    const unsigned m = mp + (mp < 10 ? 3 : -9);                            // [1, 12]
    return {static_cast<int>(y + (m <= 2)), m, d};
}

// 0 = Sunday .. 6 = Saturday.
constexpr unsigned weekday_from_days(std::int64_t z) noexcept {
    return static_cast<unsigned>(z >= -4 ? (z + 4) % 7 : (z + 5) % 7 + 6);
}

inline std::int64_t epoch_seconds(int y, unsigned mo, unsigned d,
                                  unsigned h = 0, unsigned mi = 0, unsigned s = 0) {
    return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

inline bool is_weekday(std::int64_t t) noexcept {
    const std::int64_t day = t >= 0 ? t / 86400 : (t - 86399) / 86400;
    const unsigned wd = weekday_from_days(day);
    return wd >= 1 && wd <= 5;  // Mon..Fri
}

inline unsigned hour_of_day(std::int64_t t) noexcept {
    std::int64_t sec = t % 86400;
    if (sec < 0) sec += 86400;
    return static_cast<unsigned>(sec / 3600);
}

inline std::int64_t align_to_hour(std::int64_t t) noexcept {
    std::int64_t r = t % 3600;
    if (r < 0) r += 3600;
    return t - r;
}

// Strict "YYYY-MM-DDTHH:MM:SS" ("T" or space separator). Fractional seconds
// and timezone suffixes are rejected: the feeds are naive local time.
inline std::int64_t parse_iso_datetime(std::string_view sv) {
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char sep = 0;
    char tail = 0;
    const std::string buf(sv);
    const int n = std::sscanf(buf.c_str(), "%d-%2u-%2u%c%2u:%2u:%2u%c",
                              &y, &mo, &d, &sep, &h, &mi, &s, &tail);
    if (n != 7 || (sep != 'T' && sep != ' '))
        throw DataError("invalid ISO-8601 timestamp: '" + buf + "'");
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 59)
        throw DataError("timestamp field out of range: '" + buf + "'");
    return epoch_seconds(y, mo, d, h, mi, s);
}

inline std::string format_iso_datetime(std::int64_t t) {
    const std::int64_t day = t >= 0 ? t / 86400 : (t - 86399) / 86400;
    const CivilDate cd = civil_from_days(day);
    std::int64_t sec = t - day * 86400;
    char out[64];
    std::snprintf(out, sizeof(out), "%04d-%02u-%02uT%02lld:%02lld:%02lld",
                  cd.year, cd.month, cd.day,
                  static_cast<long long>(sec / 3600),
                  static_cast<long long>((sec / 60) % 60),
                  static_cast<long long>(sec % 60));
    return out;
}

}  // namespace sigfd
