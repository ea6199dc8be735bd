#pragma once

#include <cstdint>
#include <string>

#include "pyrocast/common.hpp"

namespace pyrocast {

// Calendar date as a count of days since 1970-01-01 (proleptic Gregorian).
class Date {
  public:
    Date() = default;
    explicit Date(std::int64_t days_since_epoch) : days_(days_since_epoch) {}
    static Date from_ymd(int year, int month, int day);
    static Date parse(const std::string& iso);  // "YYYY-MM-DD"

    std::int64_t days() const { return days_; }
    int year() const;
    void to_ymd(int& year, int& month, int& day) const;
    std::string to_string() const;

    Date operator+(std::int64_t d) const { return Date(days_ + d); }
    Date operator-(std::int64_t d) const { return Date(days_ - d); }
    std::int64_t operator-(const Date& o) const { return days_ - o.days_; }
    auto operator<=>(const Date&) const = default;

  private:
    std::int64_t days_ = 0;
};

}  // namespace pyrocast
