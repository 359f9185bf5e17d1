#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <string>

namespace charlab {

inline constexpr double pi = std::numbers::pi;

// Euler-Mascheroni constant to 30 digits.
inline constexpr long double euler_gamma = 0.577215664901532860606512090082L;

// Meissel-Mertens constant B = lim (sum_{p<=x} 1/p - log log x).
inline constexpr long double mertens_constant = 0.261497212847642783755426838608L;

// Neumaier's variant of Kahan summation.
class NeumaierSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  NeumaierSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

class ComplexNeumaierSum {
 public:
  void add(std::complex<double> z) {
    re_.add(z.real());
    im_.add(z.imag());
  }
  ComplexNeumaierSum& operator+=(std::complex<double> z) {
    add(z);
    return *this;
  }
  std::complex<double> value() const { return {re_.value(), im_.value()}; }

 private:
  NeumaierSum re_;
  NeumaierSum im_;
};

// Floor division and non-negative remainder for signed operands, b > 0.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

constexpr std::int64_t mod_floor(std::int64_t a, std::int64_t b) {
  const std::int64_t r = a % b;
  return r < 0 ? r + b : r;
}

// e(num/den) = exp(2 pi i num/den), evaluated on the reduced angle in
// (-1/2, 1/2] so large numerators do not lose precision.
inline std::complex<double> unit_root(std::int64_t num, std::int64_t den) {
  std::int64_t r = mod_floor(num, den);
  if (2 * r > den) r -= den;
  const double theta = 2.0 * pi * static_cast<double>(r) / static_cast<double>(den);
  return {std::cos(theta), std::sin(theta)};
}

// ||t||: distance from t to the nearest integer, for t = num/den.
// Returned as the numerator over den (so the value is exact).
constexpr std::int64_t nearest_int_distance_num(std::int64_t num, std::int64_t den) {
  const std::int64_t r = mod_floor(num, den);
  return r <= den - r ? r : den - r;
}

// Fixed 12-significant-digit rendering used in every CSV.
inline std::string format_sig12(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) x = 0.0;  // drop the sign of -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  std::string s(buf);
  if (s == "-0") s = "0";
  return s;
}

}  // namespace charlab
