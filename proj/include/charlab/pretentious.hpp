#pragma once

// Odd-order correlation quantities: delta_g, the maximizers z_l, the
// correlation sum S(y; psi, g), pretentious distances, and the Fourier
// coefficients S_j of l -> cos((2 pi/g)||g* l/k*||).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "charlab/character.hpp"
#include "charlab/errors.hpp"
#include "charlab/numeric.hpp"
#include "charlab/parallel.hpp"
#include "charlab/primes.hpp"

namespace charlab {

// delta_g = 1 - (g/pi) sin(pi/g), for odd g >= 3.
inline double delta_g(std::uint64_t g) {
  if (g < 3 || g % 2 == 0) throw domain_error("delta_g: g must be odd and >= 3, got " + std::to_string(g));
  const double gd = static_cast<double>(g);
  return 1.0 - gd / pi * std::sin(pi / gd);
}

struct OddOrderParams {
  std::uint64_t g = 3;
  std::uint64_t k = 1;
  std::uint64_t k_star = 1;
  std::uint64_t g_star = 3;
  double delta = 0.0;
};

inline OddOrderParams odd_order_params(std::uint64_t g, std::uint64_t k) {
  if (k == 0) throw domain_error("odd_order_params: k must be >= 1");
  OddOrderParams p;
  p.g = g;
  p.k = k;
  p.delta = delta_g(g);
  const std::uint64_t d = std::gcd(g, k);
  p.k_star = k / d;
  p.g_star = g / d;
  return p;
}

// cos((2 pi/g) ||g* l / k*||).
inline double cos_weight(std::int64_t ell, std::uint64_t g, std::uint64_t k_star, std::uint64_t g_star) {
  const auto ks = static_cast<std::int64_t>(k_star);
  const std::int64_t r = mod_floor(ell, ks);
  const std::int64_t d = nearest_int_distance_num(static_cast<std::int64_t>(g_star % k_star) * r, ks);
  return std::cos(2.0 * pi * static_cast<double>(d) / (static_cast<double>(g) * static_cast<double>(k_star)));
}

struct ZChoice {
  std::uint64_t n = 0;     // z = e(n/g)
  UnitValue z;
  double cos_value = 1.0;  // via the ||g* l/k*|| formula
  double direct = 1.0;     // Re(z e(-l/k)) evaluated from the angle n/g - l/k
  bool tie = false;        // l g / k sits halfway between two integers
};

/// z_l in mu_g maximizing Re(z e(-l/k)); n_l is the nearest integer to
/// l g/k, rounding halves down.
inline ZChoice select_z(std::uint64_t ell, std::uint64_t k, std::uint64_t g) {
  if (g < 3 || g % 2 == 0) throw domain_error("select_z: g must be odd and >= 3");
  if (k == 0 || ell >= k) throw domain_error("select_z: need 0 <= l < k");
  const auto kk = static_cast<std::int64_t>(k);
  const auto gg = static_cast<std::int64_t>(g);
  const auto ll = static_cast<std::int64_t>(ell);
  // ceil((2 l g - k) / (2k))
  const std::int64_t num = 2 * ll * gg - kk;
  const std::int64_t n = floor_div(num + 2 * kk - 1, 2 * kk);
  ZChoice out;
  out.n = static_cast<std::uint64_t>(mod_floor(n, gg));
  out.z = UnitValue::root(out.n, g);
  out.tie = mod_floor(2 * ll * gg, 2 * kk) == kk;
  const OddOrderParams p = odd_order_params(g, k);
  out.cos_value = cos_weight(ll, g, p.k_star, p.g_star);
  out.direct = unit_root(static_cast<std::int64_t>(out.n) * kk - ll * gg, gg * kk).real();
  return out;
}

// G(x) = x / tan x on (0, pi).
inline double taylor_G(double x) {
  if (!(x > 0.0) || !(x < pi)) throw domain_error("taylor_G: x must lie in (0, pi)");
  return x * std::cos(x) / std::sin(x);
}

/// c in G(x) = 1 - c x^2 + O(x^4), by Richardson extrapolation of
/// (1 - G(x))/x^2 along x = x0 / 2^i.
inline double g_coefficient() {
  constexpr int levels = 5;
  double table[levels][levels];
  double x = 0.2;
  for (int i = 0; i < levels; ++i, x /= 2.0) {
    // 1 - x cot x, with sin and cos expanded to avoid cancellation.
    const double s = std::sin(x), c = std::cos(x);
    const double one_minus_g = (s - x * c) / s;
    table[i][0] = one_minus_g / (x * x);
  }
  for (int j = 1; j < levels; ++j) {
    const double f = std::pow(4.0, j);
    for (int i = j; i < levels; ++i) table[i][j] = (f * table[i][j - 1] - table[i - 1][j - 1]) / (f - 1.0);
  }
  return table[levels - 1][levels - 1];
}

struct MeanIdentity {
  std::uint64_t g = 0, k = 0, k_star = 0;
  double lhs = 0.0;    // (1/k) sum_l cos((2 pi/g)||g* l/k*||)
  double rhs = 0.0;    // (1 - delta_g) G(pi/(g k*))
  double exact = 0.0;  // closed form of lhs for either parity of k*
  double abs_err() const { return std::abs(lhs - rhs); }
};

inline MeanIdentity mean_identity(std::uint64_t g, std::uint64_t k) {
  const OddOrderParams p = odd_order_params(g, k);
  MeanIdentity m;
  m.g = g;
  m.k = k;
  m.k_star = p.k_star;
  NeumaierSum s;
  for (std::uint64_t ell = 0; ell < k; ++ell) s.add(cos_weight(static_cast<std::int64_t>(ell), g, p.k_star, p.g_star));
  m.lhs = s.value() / static_cast<double>(k);
  const double x = pi / (static_cast<double>(g) * static_cast<double>(p.k_star));
  m.rhs = (1.0 - p.delta) * taylor_G(x);
  // Dirichlet-kernel evaluation: the x/tan x form holds for even k*, and
  // x/sin x replaces it for odd k*.
  m.exact = (1.0 - p.delta) * (p.k_star % 2 == 0 ? taylor_G(x) : x / std::sin(x));
  return m;
}

/// Values at primes of a completely multiplicative function with |f| <= 1.
struct PrimeFunction {
  std::function<std::complex<double>(std::uint64_t)> at;
  std::string name;

  std::complex<double> operator()(std::uint64_t p) const { return at(p); }

  static PrimeFunction from_character(const DirichletCharacter& chi) {
    return {[chi](std::uint64_t p) { return chi.value_complex(p); }, chi.id()};
  }
  // n^{it}
  static PrimeFunction archimedean(double t) {
    return {[t](std::uint64_t p) { return std::polar(1.0, t * std::log(static_cast<double>(p))); },
            "n^{i" + format_sig12(t) + "}"};
  }
  static PrimeFunction constant_one() {
    return {[](std::uint64_t) { return std::complex<double>(1.0, 0.0); }, "1"};
  }
  // f(p) p^{-it}
  static PrimeFunction twisted(PrimeFunction f, double t) {
    const std::string name = f.name + "*n^{-i" + format_sig12(t) + "}";
    return {[f = std::move(f), t](std::uint64_t p) {
              return f(p) * std::polar(1.0, -t * std::log(static_cast<double>(p)));
            },
            name};
  }
  static PrimeFunction product(PrimeFunction f, PrimeFunction h) {
    const std::string name = f.name + "*" + h.name;
    return {[f = std::move(f), h = std::move(h)](std::uint64_t p) { return f(p) * h(p); }, name};
  }
  static PrimeFunction conjugate(PrimeFunction f) {
    const std::string name = "conj(" + f.name + ")";
    return {[f = std::move(f)](std::uint64_t p) { return std::conj(f(p)); }, name};
  }
};

/// D(f, h; x)^2 = sum_{p <= x} (1 - Re f(p) conj(h(p))) / p.
inline double distance2(const PrimeFunction& f, const PrimeFunction& h, double x, const PrimeTable& table) {
  if (x < 2.0) return 0.0;
  const auto bound = static_cast<std::uint64_t>(std::floor(x));
  if (bound > table.limit()) throw resource_error("distance2: prime table too short for x");
  const auto ps = table.primes_up_to(bound);
  return blocked_sum<double>(ps.size(), [&](std::size_t i) {
    const std::uint64_t p = ps[i];
    return (1.0 - (f(p) * std::conj(h(p))).real()) / static_cast<double>(p);
  });
}

struct DistanceParams {
  double Q = 0.0;
  double x = 0.0;
  double T = 0.0;
  double alpha = 7.0 / 11.0;
  double z_cut = 0.0;  // exp((log Q)^alpha)

  static DistanceParams from_Q(double Q) {
    DistanceParams d;
    d.Q = Q;
    d.x = Q;
    d.T = std::pow(std::log(Q), -d.alpha);
    d.z_cut = std::exp(std::pow(std::log(Q), d.alpha));
    return d;
  }
};

struct MinDistance {
  double t = 0.0;
  double value = 0.0;
  double value_at_zero = 0.0;
  double grid_spacing = 0.0;
  double resolution = 0.0;  // spacing of the last refinement round
};

/// min over |t| <= T of D(f, n^{it}; x)^2: grid of spacing 1/(10 log x)
/// through t = 0, then three rounds of 10x refinement around the best point.
inline MinDistance min_distance_t(const PrimeFunction& f, double x, double T, const PrimeTable& table) {
  if (x < 2.0) throw domain_error("min_distance_t: x must be >= 2");
  if (!(T >= 0.0)) throw domain_error("min_distance_t: T must be >= 0");
  const auto bound = static_cast<std::uint64_t>(std::floor(x));
  if (bound > table.limit()) throw resource_error("min_distance_t: prime table too short for x");
  const auto ps = table.primes_up_to(bound);
  std::vector<double> fr(ps.size()), fi(ps.size()), lg(ps.size()), inv(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto v = f(ps[i]);
    fr[i] = v.real();
    fi[i] = v.imag();
    lg[i] = std::log(static_cast<double>(ps[i]));
    inv[i] = 1.0 / static_cast<double>(ps[i]);
  }
  auto eval = [&](double t) {
    // Re(f(p) p^{-it}) = fr cos(t log p) + fi sin(t log p)
    return blocked_sum<double>(ps.size(), [&](std::size_t i) {
      const double th = t * lg[i];
      return (1.0 - (fr[i] * std::cos(th) + fi[i] * std::sin(th))) * inv[i];
    });
  };
  MinDistance out;
  const double h = 1.0 / (10.0 * std::log(x));
  out.grid_spacing = h;
  const auto n = static_cast<std::int64_t>(std::floor(T / h));
  out.value_at_zero = eval(0.0);
  out.t = 0.0;
  out.value = out.value_at_zero;
  for (std::int64_t i = -n; i <= n; ++i) {
    if (i == 0) continue;
    const double t = static_cast<double>(i) * h;
    const double v = eval(t);
    if (v < out.value) {
      out.value = v;
      out.t = t;
    }
  }
  double step = h;
  for (int round = 0; round < 3; ++round) {
    step /= 10.0;
    const double centre = out.t;
    for (int i = -10; i <= 10; ++i) {
      if (i == 0) continue;
      const double t = std::clamp(centre + i * step, -T, T);
      const double v = eval(t);
      if (v < out.value) {
        out.value = v;
        out.t = t;
      }
    }
  }
  out.resolution = step;
  return out;
}

/// Cos weights w(l) for l in [0, k), for a character of order k.
inline std::vector<double> weight_table(std::uint64_t g, std::uint64_t k) {
  const OddOrderParams p = odd_order_params(g, k);
  std::vector<double> w(k);
  for (std::uint64_t ell = 0; ell < k; ++ell) w[ell] = cos_weight(static_cast<std::int64_t>(ell), g, p.k_star, p.g_star);
  return w;
}

/// S(y; psi, g) = sum_{p <= y} (1/p) max_{z in mu_g u {0}} Re(z conj(psi(p))).
inline double corr_sum(double y, const DirichletCharacter& psi, std::uint64_t g, const PrimeTable& table) {
  if (y < 2.0) return 0.0;
  const auto bound = static_cast<std::uint64_t>(std::floor(y));
  if (bound > table.limit()) throw resource_error("corr_sum: prime table too short for y");
  const auto w = weight_table(g, psi.order());
  const auto ps = table.primes_up_to(bound);
  return blocked_sum<double>(ps.size(), [&](std::size_t i) {
    const std::int64_t ell = psi.angle_in_order(ps[i]);
    if (ell < 0) return 0.0;
    return w[static_cast<std::size_t>(ell)] / static_cast<double>(ps[i]);
  });
}

struct SjTable {
  std::uint64_t g = 0, k_star = 0, g_star = 0;
  std::vector<double> dft;     // empty when the DFT was skipped
  double dft_imag_max = 0.0;   // the coefficients are real; imaginary residue of the DFT
  std::vector<double> closed;  // empty when gcd(g*, k*) > 1
  double max_discrepancy = 0.0;
  double l1_tail = 0.0;        // sum_{j != 0} |S_j|

  const std::vector<double>& values() const { return closed.empty() ? dft : closed; }
};

namespace detail {
// sum over w in W of cos(2 pi w N / D), where W = [-n, n] plus, when
// `endpoint`, the extra point w = n + 1. All angles are reduced exactly.
inline double kernel_sum(std::int64_t N, std::int64_t D, std::int64_t n, bool endpoint) {
  // D_n(2 pi N/D) = sin((2n+1) pi N/D) / sin(pi N/D)
  const std::int64_t two_d = 2 * D;
  auto sin_pi = [&](std::int64_t num) {
    std::int64_t r = mod_floor(num, two_d);
    if (r > D) r -= two_d;
    return std::sin(pi * static_cast<double>(r) / static_cast<double>(D));
  };
  auto cos_pi = [&](std::int64_t num) {
    std::int64_t r = mod_floor(num, two_d);
    if (r > D) r -= two_d;
    return std::cos(pi * static_cast<double>(r) / static_cast<double>(D));
  };
  const std::int64_t top = mod_floor(static_cast<std::int64_t>(
                                         static_cast<__int128>(2 * n + 1) * N % static_cast<__int128>(two_d)),
                                     two_d);
  double s = sin_pi(top) / sin_pi(N);
  if (endpoint) {
    const std::int64_t e = static_cast<std::int64_t>(static_cast<__int128>(2 * (n + 1)) * N % static_cast<__int128>(two_d));
    s += cos_pi(e);
  }
  return s;
}
}  // namespace detail

/// S_j = (1/k*) sum_{l mod k*} cos((2 pi/g)||g* l/k*||) e(-j l/k*), by direct
/// DFT and by the Dirichlet-kernel closed form
///   S_j = (C(phi+) + C(phi-)) / (2k*),  phi+- = 1/(g k*) +- J/k*,  J = a j,
/// with a = (g*)^{-1} mod k* and C(phi) = sum_{-k*/2 < w <= k*/2} cos(2 pi phi w).
inline SjTable sj_table(std::uint64_t g, std::uint64_t k_star, std::uint64_t g_star = 0, bool with_dft = true) {
  if (g < 3 || g % 2 == 0) throw domain_error("sj_table: g must be odd and >= 3");
  if (k_star == 0) throw domain_error("sj_table: k* must be >= 1");
  if (g_star == 0) g_star = g;
  SjTable t;
  t.g = g;
  t.k_star = k_star;
  t.g_star = g_star;
  const auto ks = static_cast<std::int64_t>(k_star);
  std::vector<double> w(k_star);
  for (std::int64_t ell = 0; ell < ks; ++ell) w[ell] = cos_weight(ell, g, k_star, g_star);
  if (with_dft) {
    std::vector<std::complex<double>> tw(k_star);
    for (std::int64_t a = 0; a < ks; ++a) tw[a] = unit_root(-a, ks);
    t.dft.resize(k_star);
    for (std::int64_t j = 0; j < ks; ++j) {
      ComplexNeumaierSum s;
      for (std::int64_t ell = 0; ell < ks; ++ell) s.add(w[ell] * tw[(j * ell) % ks]);
      const auto v = s.value() / static_cast<double>(ks);
      t.dft[j] = v.real();
      t.dft_imag_max = std::max(t.dft_imag_max, std::abs(v.imag()));
    }
  }
  if (std::gcd(g_star, k_star) == 1) {
    const std::int64_t a = k_star == 1 ? 0 : static_cast<std::int64_t>(inverse_mod(g_star % k_star, k_star));
    const auto gd = static_cast<std::int64_t>(g);
    const std::int64_t D = gd * ks;
    const bool even = ks % 2 == 0;
    const std::int64_t n = even ? ks / 2 - 1 : (ks - 1) / 2;
    t.closed.resize(k_star);
    for (std::int64_t j = 0; j < ks; ++j) {
      const std::int64_t J = (a * j) % ks;
      // phi+- = (1 +- g J) / (g k*)
      const double c = detail::kernel_sum(1 + gd * J, D, n, even) + detail::kernel_sum(1 - gd * J, D, n, even);
      t.closed[j] = c / (2.0 * static_cast<double>(ks));
    }
  }
  if (!t.dft.empty() && !t.closed.empty()) {
    for (std::size_t j = 0; j < k_star; ++j) {
      t.max_discrepancy = std::max(t.max_discrepancy, std::abs(t.dft[j] - t.closed[j]));
    }
  }
  const auto& v = t.values();
  NeumaierSum l1;
  for (std::size_t j = 1; j < v.size(); ++j) l1.add(std::abs(v[j]));
  t.l1_tail = l1.value();
  return t;
}

struct OptimalM {
  double c = 0.0;     // Taylor coefficient of G
  double c1 = 0.0;    // alpha c pi^2 (1 - delta_g) / g*^2
  double loglogQ = 0.0;
  double m_real = 0.0;
  std::uint64_t m_prime = 0;
  std::vector<std::pair<double, double>> curve;  // (m, objective)

  double objective(double m) const { return 0.5 * std::log(m) + c1 * loglogQ / (m * m); }
};

/// Minimizer of (1/2) log m + c1 loglog Q / m^2 over real m > 1, with the
/// nearest prime and a sampled objective curve.
inline OptimalM optimal_m(double Q, std::uint64_t g, std::uint64_t k = 0, std::size_t curve_points = 64) {
  if (!(Q > std::exp(1.0))) throw domain_error("optimal_m: need loglog Q > 0");
  const double delta = delta_g(g);
  const std::uint64_t g_star = k == 0 ? g : g / std::gcd(g, k);
  OptimalM o;
  o.c = g_coefficient();
  o.c1 = (7.0 / 11.0) * o.c * pi * pi * (1.0 - delta) / static_cast<double>(g_star * g_star);
  o.loglogQ = std::log(std::log(Q));
  o.m_real = std::sqrt(4.0 * o.c1 * o.loglogQ);
  // nearest prime, preferring the smaller one on a tie
  const auto base = static_cast<std::uint64_t>(std::floor(o.m_real));
  std::uint64_t lo = std::max<std::uint64_t>(base, 2);
  while (lo > 2 && !is_prime_u64(lo)) --lo;
  if (!is_prime_u64(lo)) lo = 2;
  std::uint64_t hi = std::max<std::uint64_t>(base + 1, 2);
  while (!is_prime_u64(hi)) ++hi;
  o.m_prime = (o.m_real - static_cast<double>(lo) <= static_cast<double>(hi) - o.m_real || o.m_real < 2.0) ? lo : hi;
  const double a = std::max(1.0 + 1e-6, o.m_real / 4.0), b = std::max(a * 2.0, o.m_real * 4.0);
  for (std::size_t i = 0; i < curve_points; ++i) {
    const double m = a + (b - a) * static_cast<double>(i) / static_cast<double>(curve_points - 1);
    o.curve.emplace_back(m, o.objective(m));
  }
  return o;
}

}  // namespace charlab
