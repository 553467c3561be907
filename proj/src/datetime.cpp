#include "tcf/datetime.hpp"

#include <array>
#include <cstdio>

#include "tcf/error.hpp"

namespace tcf {
namespace {

// Howard Hinnant's civil-date algorithms.
std::int64_t days_from_civil(std::int64_t y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u + static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::array<int, 3> civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t positive_mod(std::int64_t a, std::int64_t b) { return ((a % b) + b) % b; }

bool valid_civil(int year, int month, int day) {
    if (month < 1 || month > 12 || day < 1) return false;
    static const int mdays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int dmax = mdays[month - 1];
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if (month == 2 && leap) dmax = 29;
    return day <= dmax;
}

}  // namespace

DateTime::DateTime(int year, int month, int day, int hour) {
    if (!valid_civil(year, month, day) || hour < 0 || hour > 23)
        throw ValidationError("invalid date/time " + std::to_string(year) + "-" + std::to_string(month) + "-" +
                              std::to_string(day) + " " + std::to_string(hour) + "Z");
    hours_ = days_from_civil(year, month, day) * 24 + hour;
}

DateTime DateTime::parse_ymdh(const std::string& s) {
    if (s.size() != 10) throw ParseError("timestamp '" + s + "' is not YYYYMMDDHH");
    for (char c : s)
        if (c < '0' || c > '9') throw ParseError("timestamp '" + s + "' contains a non-digit");
    const int year = std::stoi(s.substr(0, 4));
    const int month = std::stoi(s.substr(4, 2));
    const int day = std::stoi(s.substr(6, 2));
    const int hour = std::stoi(s.substr(8, 2));
    try {
        return DateTime(year, month, day, hour);
    } catch (const ValidationError& e) {
        throw ParseError(e.what());
    }
}

int DateTime::year() const { return civil_from_days(floor_div(hours_, 24))[0]; }
int DateTime::month() const { return civil_from_days(floor_div(hours_, 24))[1]; }
int DateTime::day() const { return civil_from_days(floor_div(hours_, 24))[2]; }
int DateTime::hour() const { return static_cast<int>(positive_mod(hours_, 24)); }

std::string DateTime::to_ymdh() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d%02d%02d%02d", year(), month(), day(), hour());
    return buf;
}

std::string DateTime::to_iso() const {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:00Z", year(), month(), day(), hour());
    return buf;
}

}  // namespace tcf
