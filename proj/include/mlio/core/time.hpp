#pragma once

#include <cstdint>
#include <cmath>
#include <compare>

namespace mlio {

// Signed time span in integer nanoseconds. Stream bookkeeping (window
// membership, partitioning) never goes through floating point.
class Duration {
 public:
  constexpr Duration() = default;
  constexpr explicit Duration(int64_t nanos) : nanos_(nanos) {}

  static Duration from_sec(double sec) {
    return Duration(std::llround(sec * 1e9));
  }
  static constexpr Duration from_nanos(int64_t n) { return Duration(n); }

  constexpr int64_t nanos() const { return nanos_; }
  constexpr double to_sec() const { return static_cast<double>(nanos_) * 1e-9; }

  constexpr Duration operator+(Duration o) const { return Duration(nanos_ + o.nanos_); }
  constexpr Duration operator-(Duration o) const { return Duration(nanos_ - o.nanos_); }
  constexpr Duration operator-() const { return Duration(-nanos_); }
  constexpr Duration operator*(int64_t k) const { return Duration(nanos_ * k); }
  constexpr Duration operator/(int64_t k) const { return Duration(nanos_ / k); }
  constexpr auto operator<=>(const Duration&) const = default;

 private:
  int64_t nanos_ = 0;
};

// Absolute time as (seconds, nanoseconds), nanos always in [0, 1e9).
// Total order and exact subtraction.
class Timestamp {
 public:
  constexpr Timestamp() = default;
  constexpr Timestamp(int64_t sec, uint32_t nsec) : sec_(sec), nsec_(nsec) {
    normalize();
  }

  static Timestamp from_sec(double sec) {
    double whole = std::floor(sec);
    int64_t s = static_cast<int64_t>(whole);
    int64_t ns = static_cast<int64_t>(std::llround((sec - whole) * 1e9));
    if (ns >= 1000000000) { s += 1; ns -= 1000000000; }
    return Timestamp(s, static_cast<uint32_t>(ns));
  }

  constexpr int64_t sec() const { return sec_; }
  constexpr uint32_t nsec() const { return nsec_; }
  constexpr double to_sec() const {
    return static_cast<double>(sec_) + static_cast<double>(nsec_) * 1e-9;
  }

  constexpr Duration operator-(const Timestamp& o) const {
    return Duration((sec_ - o.sec_) * 1000000000 +
                    (static_cast<int64_t>(nsec_) - static_cast<int64_t>(o.nsec_)));
  }
  constexpr Timestamp operator+(Duration d) const {
    Timestamp t;
    int64_t total = static_cast<int64_t>(nsec_) + d.nanos();
    t.sec_ = sec_ + total / 1000000000;
    int64_t rem = total % 1000000000;
    if (rem < 0) { t.sec_ -= 1; rem += 1000000000; }
    t.nsec_ = static_cast<uint32_t>(rem);
    return t;
  }
  constexpr Timestamp operator-(Duration d) const { return *this + (-d); }

  constexpr auto operator<=>(const Timestamp&) const = default;

 private:
  constexpr void normalize() {
    if (nsec_ >= 1000000000) {
      sec_ += nsec_ / 1000000000;
      nsec_ %= 1000000000;
    }
  }

  int64_t sec_ = 0;
  uint32_t nsec_ = 0;
};

// Half-open interval membership test used for sweep windows and IMU
// partitioning; exact by construction.
constexpr bool in_half_open(const Timestamp& t, const Timestamp& lo, const Timestamp& hi) {
  return lo <= t && t < hi;
}

}  // namespace mlio
