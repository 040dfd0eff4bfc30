#pragma once

#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

#include "pedmix/error.hpp"

namespace pedmix {

/// Exact non-negative rational with a power-of-two denominator.
///
/// Every meiosis contributes a factor 1/2, so pedigree-derived probabilities
/// (IBD pattern probabilities, kinship coefficients) are exactly
/// representable. The value is `numerator / 2^exponent` and is kept reduced.
class Dyadic {
public:
  using uint128 = unsigned __int128;
  static constexpr int kMaxExponent = 124;

  constexpr Dyadic() = default;

  static Dyadic one() { return Dyadic(1, 0); }
  static Dyadic zero() { return Dyadic(); }
  /// 1 / 2^k
  static Dyadic inverse_pow2(int k) { return Dyadic(1, k); }
  /// numerator / 2^k
  static Dyadic fraction(std::uint64_t numerator, int k) { return Dyadic(numerator, k); }

  bool is_zero() const noexcept { return num_ == 0; }
  int exponent() const noexcept { return exp_; }

  /// Divide by 2^k.
  Dyadic halved(int k = 1) const { return Dyadic(num_, exp_ + k); }

  Dyadic& operator+=(const Dyadic& other) {
    if (other.num_ == 0) return *this;
    if (num_ == 0) return *this = other;
    int e = exp_ > other.exp_ ? exp_ : other.exp_;
    uint128 a = shift_up(num_, e - exp_);
    uint128 b = shift_up(other.num_, e - other.exp_);
    uint128 sum = a + b;
    if (sum < a) throw CapExceeded("dyadic rational overflow");
    num_ = sum;
    exp_ = e;
    normalize();
    return *this;
  }

  friend Dyadic operator+(Dyadic a, const Dyadic& b) { return a += b; }

  friend bool operator==(const Dyadic& a, const Dyadic& b) noexcept {
    return a.num_ == b.num_ && a.exp_ == b.exp_;
  }

  friend std::strong_ordering operator<=>(const Dyadic& a, const Dyadic& b) {
    int e = a.exp_ > b.exp_ ? a.exp_ : b.exp_;
    uint128 x = shift_up(a.num_, e - a.exp_);
    uint128 y = shift_up(b.num_, e - b.exp_);
    if (x < y) return std::strong_ordering::less;
    if (x > y) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  double to_double() const {
    return std::ldexp(static_cast<double>(num_), -exp_);
  }

  /// "n/2^k", or "n" when the denominator is 1.
  std::string to_string() const {
    std::string digits;
    uint128 v = num_;
    do {
      digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
      v /= 10;
    } while (v != 0);
    if (exp_ == 0) return digits;
    return digits + "/2^" + std::to_string(exp_);
  }

private:
  Dyadic(uint128 num, int exp) : num_(num), exp_(exp) {
    normalize();
    if (exp_ > kMaxExponent)
      throw CapExceeded("dyadic denominator exceeds 2^" + std::to_string(kMaxExponent) +
                        "; use Monte-Carlo mode for pedigrees this deep");
  }

  static uint128 shift_up(uint128 v, int k) {
    if (k == 0 || v == 0) return v;
    if (k >= 128 || (v >> (128 - k)) != 0) throw CapExceeded("dyadic rational overflow");
    return v << k;
  }

  void normalize() {
    if (num_ == 0) {
      exp_ = 0;
      return;
    }
    while (exp_ > 0 && (num_ & 1) == 0) {
      num_ >>= 1;
      --exp_;
    }
  }

  uint128 num_ = 0;
  int exp_ = 0;
};

} // namespace pedmix
