#pragma once

#include <cstdint>
#include <string>

namespace tcf {

// UTC timestamp with whole-hour resolution, stored as hours since
// 1970-01-01T00Z. Best-track fixes live on the 00/06/12/18 UTC grid;
// helpers below expose that grid.
class DateTime {
  public:
    DateTime() : hours_(0) {}
    explicit DateTime(std::int64_t hours_since_epoch) : hours_(hours_since_epoch) {}
    DateTime(int year, int month, int day, int hour);

    static DateTime parse_ymdh(const std::string& s);  // "YYYYMMDDHH"

    std::int64_t hours_since_epoch() const { return hours_; }
    int year() const;
    int month() const;  // 1..12
    int day() const;
    int hour() const;  // 0..23

    bool on_six_hour_grid() const { return ((hours_ % 6) + 6) % 6 == 0; }

    std::string to_ymdh() const;
    std::string to_iso() const;  // "YYYY-MM-DDTHH:00Z"

    DateTime plus_hours(std::int64_t h) const { return DateTime(hours_ + h); }

    friend bool operator==(const DateTime& a, const DateTime& b) { return a.hours_ == b.hours_; }
    friend bool operator!=(const DateTime& a, const DateTime& b) { return a.hours_ != b.hours_; }
    friend bool operator<(const DateTime& a, const DateTime& b) { return a.hours_ < b.hours_; }
    friend bool operator<=(const DateTime& a, const DateTime& b) { return a.hours_ <= b.hours_; }
    friend bool operator>(const DateTime& a, const DateTime& b) { return a.hours_ > b.hours_; }
    friend bool operator>=(const DateTime& a, const DateTime& b) { return a.hours_ >= b.hours_; }

  private:
    std::int64_t hours_;
};

}  // namespace tcf
