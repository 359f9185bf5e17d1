#pragma once

// Truncated Euler products for K(1, xi) and L(1, xi), the constants C_m(a),
// and the prime-sum identities built from them.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "charlab/character.hpp"
#include "charlab/errors.hpp"
#include "charlab/numeric.hpp"
#include "charlab/parallel.hpp"
#include "charlab/pretentious.hpp"
#include "charlab/primes.hpp"

namespace charlab {

using cplx = std::complex<double>;

namespace detail {
// log(1 + w), accurate for small |w|.
inline cplx clog1p(cplx w) {
  const double re = 0.5 * std::log1p(2.0 * w.real() + std::norm(w));
  return {re, std::atan2(w.imag(), 1.0 + w.real())};
}

// exp(w) - 1, accurate for small |w|.
inline cplx cexpm1(cplx w) {
  const double a = w.real(), b = w.imag();
  const double s = std::sin(0.5 * b);
  return {std::expm1(a) * std::cos(b) - 2.0 * s * s, std::exp(a) * std::sin(b)};
}
}  // namespace detail

/// k_xi(p)/p = 1 - (1 - z/p)(1 - 1/p)^{-z} for z = xi(p); the power uses the
/// real logarithm of 1 - 1/p.
inline cplx k_over_p(cplx z, std::uint64_t p) {
  if (z == cplx(0.0, 0.0)) return 0.0;
  const double pd = static_cast<double>(p);
  const double L = std::log1p(-1.0 / pd);
  const cplx e = -z * L;
  // 1 - (1 - z/p) exp(e) = -(exp(e) - 1) + (z/p) exp(e)
  return -detail::cexpm1(e) + (z / pd) * std::exp(e);
}

inline cplx k_xi_at_prime(cplx z, std::uint64_t p) { return static_cast<double>(p) * k_over_p(z, p); }

inline cplx k_xi_at_prime(const DirichletCharacter& xi, std::uint64_t p) {
  return k_xi_at_prime(xi.value_complex(p), p);
}

/// Residual of -log(1 - k/p) + log(1 - z/p) = z log(1 - 1/p) at one prime.
inline double comb_kl_error(cplx z, std::uint64_t p) {
  const double pd = static_cast<double>(p);
  const cplx lhs = -detail::clog1p(-k_over_p(z, p)) + detail::clog1p(-z / pd);
  const cplx rhs = z * std::log1p(-1.0 / pd);
  return std::abs(lhs - rhs);
}

struct EulerProductValue {
  std::string id;
  double X = 0.0;
  cplx log_value;
  double error_estimate = 0.0;
  cplx half_value;  // truncation at X/2, for the convergence monitor
};

namespace detail {
inline std::span<const std::uint32_t> primes_for(double X, const PrimeTable& table, const char* who) {
  if (X < 3.0) throw domain_error(std::string(who) + ": X must be >= 3");
  const auto bound = static_cast<std::uint64_t>(std::floor(X));
  if (bound > table.limit()) throw resource_error(std::string(who) + ": prime table too short for X");
  return table.primes_up_to(bound);
}

// Ordered sums of term(p) over p <= X and over p <= X/2.
template <typename Fn>
std::pair<cplx, cplx> euler_sums(std::span<const std::uint32_t> ps, double X, Fn&& term) {
  const auto half_bound = static_cast<std::uint64_t>(std::floor(X / 2.0));
  const std::size_t h = static_cast<std::size_t>(std::upper_bound(ps.begin(), ps.end(), half_bound) - ps.begin());
  const cplx lo = blocked_sum<cplx>(h, [&](std::size_t i) { return term(ps[i]); });
  const cplx hi = blocked_sum<cplx>(ps.size() - h, [&](std::size_t i) { return term(ps[h + i]); });
  return {lo + hi, lo};
}
}  // namespace detail

/// log K(1, xi) ~ -sum_{p <= X} log(1 - k_xi(p)/p), error taken as 10/X.
inline EulerProductValue log_K(const DirichletCharacter& xi, double X, const PrimeTable& table) {
  const auto ps = detail::primes_for(X, table, "log_K");
  if (!xi.value(2).zero) {
    const cplx u = k_over_p(xi.value_complex(2), 2);
    if (std::abs(u) >= 1.0) throw domain_error("log_K: |k(2)/2| >= 1 for " + xi.id());
  }
  const auto [full, half] = detail::euler_sums(ps, X, [&](std::uint64_t p) {
    const UnitValue v = xi.value(p);
    if (v.zero || v.is_one()) return cplx(0.0, 0.0);
    return -detail::clog1p(-k_over_p(v.to_complex(), p));
  });
  return {xi.id(), X, full, 10.0 / X, half};
}

/// log L(1, xi) ~ -sum_{p <= X} log(1 - xi(p)/p); error monitored as the
/// change from X/2 to X.
inline EulerProductValue log_L(const DirichletCharacter& xi, double X, const PrimeTable& table) {
  if (xi.is_principal()) throw domain_error("log_L: principal character has a pole at s = 1");
  const auto ps = detail::primes_for(X, table, "log_L");
  const auto [full, half] = detail::euler_sums(ps, X, [&](std::uint64_t p) {
    const UnitValue v = xi.value(p);
    if (v.zero) return cplx(0.0, 0.0);
    return -detail::clog1p(-v.to_complex() / static_cast<double>(p));
  });
  return {xi.id(), X, full, std::abs(full - half), half};
}

struct CmaValue {
  std::uint64_t m = 0, a = 0;
  double value = 0.0;
  cplx xi_term;           // (1/phi(m)) sum_{xi != xi0} conj(xi(a)) log(K/L)
  double principal_term = 0.0;  // -(gamma + log(phi(m)/m)) / phi(m)
  double imag_residue() const { return std::abs(xi_term.imag()); }
};

/// C_m(a) for all a mod m, with log K/L of every non-principal character
/// computed once at truncation X.
class CmaCalculator {
 public:
  CmaCalculator(std::uint64_t m, double X, const PrimeTable& table) : m_(m), X_(X) {
    if (m < 3) throw domain_error("c_m_a: m must be >= 3");
    group_ = build_group(m, table);
    CharacterFilter f;
    f.non_principal = true;
    chars_ = enumerate_characters(group_, f);
    log_kl_.resize(chars_.size());
    log_k_.resize(chars_.size());
    log_l_.resize(chars_.size());
    for (std::size_t i = 0; i < chars_.size(); ++i) {
      log_k_[i] = log_K(chars_[i], X, table);
      log_l_[i] = log_L(chars_[i], X, table);
      log_kl_[i] = log_k_[i].log_value - log_l_[i].log_value;
      index_.emplace(chars_[i].index(), i);
    }
  }

  std::uint64_t m() const { return m_; }
  double X() const { return X_; }
  const GroupPtr& group() const { return group_; }
  const std::vector<DirichletCharacter>& characters() const { return chars_; }
  const EulerProductValue& K(std::size_t i) const { return log_k_[i]; }
  const EulerProductValue& L(std::size_t i) const { return log_l_[i]; }

  // log K(1, xi) - log L(1, xi) for a non-principal xi mod m.
  cplx log_kl(const DirichletCharacter& xi) const {
    if (xi.modulus() != m_ || xi.is_principal()) throw domain_error("log_kl: need a non-principal character mod m");
    return log_kl_[index_.at(xi.index())];
  }

  double principal_term() const {
    const double phi = static_cast<double>(group_->phi());
    return -(static_cast<double>(euler_gamma) + std::log(phi / static_cast<double>(m_))) / phi;
  }

  CmaValue c_m_a(std::uint64_t a) const {
    if (std::gcd(a % m_, m_) != 1) throw domain_error("c_m_a: gcd(a, m) must be 1");
    const double phi = static_cast<double>(group_->phi());
    ComplexNeumaierSum s;
    for (std::size_t i = 0; i < chars_.size(); ++i) s.add(chars_[i].value(a).conj().to_complex() * log_kl_[i]);
    CmaValue v;
    v.m = m_;
    v.a = a % m_;
    v.xi_term = s.value() / phi;
    v.principal_term = principal_term();
    v.value = v.xi_term.real() + v.principal_term;
    return v;
  }

  // -(gamma + log(phi(m)/m)), the value every row sum must reach.
  double row_sum_target() const { return principal_term() * static_cast<double>(group_->phi()); }

 private:
  std::uint64_t m_;
  double X_;
  GroupPtr group_;
  std::vector<DirichletCharacter> chars_;
  std::vector<EulerProductValue> log_k_, log_l_;
  std::vector<cplx> log_kl_;
  std::map<std::uint64_t, std::size_t> index_;
};

inline CmaValue c_m_a(std::uint64_t m, std::uint64_t a, double X, const PrimeTable& table) {
  return CmaCalculator(m, X, table).c_m_a(a);
}

struct LzResidual {
  std::uint64_t m = 0, a = 0;
  double y = 0.0;
  double prime_sum = 0.0;   // sum_{p <= y, p = a (m)} 1/p
  double main = 0.0;        // loglog y / phi(m) - C_m(a)
  double residual = 0.0;    // prime_sum - main
  double power_terms = 0.0; // sum_{p <= y, p = a (m)} (-log(1 - 1/p) - 1/p)
  double corrected = 0.0;   // residual + power_terms
};

/// Residual of sum_{p <= y, p = a mod m} 1/p against loglog y/phi(m) - C_m(a).
/// `corrected` adds the prime-power terms that C_m(a) absorbs through K.
inline LzResidual lz_residual(const CmaCalculator& cma, std::uint64_t a, double y, const PrimeTable& table) {
  const std::uint64_t m = cma.m();
  if (y < 100.0) throw domain_error("lz_residual: y must be >= 100");
  const auto bound = static_cast<std::uint64_t>(std::floor(y));
  if (bound > table.limit()) throw resource_error("lz_residual: prime table too short for y");
  const auto ps = table.primes_up_to(bound);
  NeumaierSum s, pw;
  for (const auto p : ps) {
    if (p % m != a % m) continue;
    const double pd = static_cast<double>(p);
    s.add(1.0 / pd);
    pw.add(-std::log1p(-1.0 / pd) - 1.0 / pd);
  }
  LzResidual r;
  r.m = m;
  r.a = a % m;
  r.y = y;
  r.prime_sum = s.value();
  r.main = std::log(std::log(y)) / static_cast<double>(cma.group()->phi()) - cma.c_m_a(a).value;
  r.residual = r.prime_sum - r.main;
  r.power_terms = pw.value();
  r.corrected = r.residual + r.power_terms;
  return r;
}

inline LzResidual lz_residual(std::uint64_t m, std::uint64_t a, double y, double X, const PrimeTable& table) {
  return lz_residual(CmaCalculator(m, X, table), a, y, table);
}

struct CosetCheck {
  std::uint64_t ell = 0;
  double lhs = 0.0, rhs = 0.0, abs_err = 0.0;
  double rhs_imag = 0.0;
  std::uint64_t coset_size = 0, expected_size = 0;
  bool cardinality_ok() const { return coset_size == expected_size; }
};

/// sum_{a: psi(a) = e(l/k)} C_m(a) against
/// (1/k) sum_{j != 0} e(-l j/k) log(K/L)(psi^j) - (gamma + log(phi(m)/m))/k.
inline CosetCheck coset_identity_check(const DirichletCharacter& psi, std::uint64_t ell, const CmaCalculator& cma) {
  if (psi.modulus() != cma.m()) throw domain_error("coset_identity_check: modulus mismatch");
  const std::uint64_t k = psi.order();
  if (ell >= k) throw domain_error("coset_identity_check: need 0 <= l < k");
  const std::uint64_t m = cma.m();
  CosetCheck c;
  c.ell = ell;
  NeumaierSum lhs;
  for (std::uint64_t a = 1; a < m; ++a) {
    if (std::gcd(a, m) != 1) continue;
    if (psi.angle_in_order(a) != static_cast<std::int64_t>(ell)) continue;
    ++c.coset_size;
    lhs.add(cma.c_m_a(a).value);
  }
  c.expected_size = cma.group()->phi() / k;
  ComplexNeumaierSum rhs;
  for (std::uint64_t j = 1; j < k; ++j) {
    const auto jl = static_cast<std::int64_t>((ell * j) % k);
    rhs.add(unit_root(-jl, static_cast<std::int64_t>(k)) * cma.log_kl(psi.pow(static_cast<std::int64_t>(j))));
  }
  const cplx r = rhs.value() / static_cast<double>(k) + cma.principal_term() * static_cast<double>(cma.group()->phi()) /
                                                            static_cast<double>(k);
  c.lhs = lhs.value();
  c.rhs = r.real();
  c.rhs_imag = r.imag();
  c.abs_err = std::abs(c.lhs - c.rhs);
  return c;
}

struct ControlErrCheck {
  std::uint64_t k = 0, k_star = 0, g_star = 0;
  double P = 0.0;
  double lhs = 0.0, rhs = 0.0, abs_err = 0.0;
  double lhs_imag = 0.0;
};

// Right-hand side of the small-prime control: -sum_{p <= P, p !| m} (w(l_p) - S_0)/p
// for psi~ of order k*.
inline double control_err_rhs(const DirichletCharacter& psi_tilde, std::uint64_t g, std::uint64_t g_star, double P,
                              const PrimeTable& table) {
  const std::uint64_t ks = psi_tilde.order();
  if (ks <= 1 || P < 2.0) return 0.0;
  const auto bound = static_cast<std::uint64_t>(std::floor(P));
  if (bound > table.limit()) throw resource_error("control_err: prime table too short for P");
  std::vector<double> w(ks);
  NeumaierSum mean;
  for (std::uint64_t ell = 0; ell < ks; ++ell) {
    w[ell] = cos_weight(static_cast<std::int64_t>(ell), g, ks, g_star);
    mean.add(w[ell]);
  }
  const double s0 = mean.value() / static_cast<double>(ks);
  NeumaierSum s;
  for (const auto p : table.primes_up_to(bound)) {
    const std::int64_t ell = psi_tilde.angle_in_order(p);
    if (ell < 0) continue;
    s.add((w[static_cast<std::size_t>(ell)] - s0) / static_cast<double>(p));
  }
  return -s.value();
}

/// sum_{j != 0 mod k*} S_j log(K/L)(psi~^j) against the cos-weighted sum
/// over primes p <= P, with psi~ = psi^{(k, g)}.
inline ControlErrCheck control_err_check(const DirichletCharacter& psi, std::uint64_t g, double P,
                                         const CmaCalculator& cma, const PrimeTable& table) {
  if (psi.modulus() != cma.m()) throw domain_error("control_err_check: modulus mismatch");
  const OddOrderParams op = odd_order_params(g, psi.order());
  ControlErrCheck c;
  c.k = op.k;
  c.k_star = op.k_star;
  c.g_star = op.g_star;
  c.P = P;
  if (op.k_star == 1) return c;
  const DirichletCharacter tilde = psi.pow(static_cast<std::int64_t>(std::gcd(op.k, g)));
  const SjTable sj = sj_table(g, op.k_star, op.g_star, false);
  const auto& S = sj.values();
  ComplexNeumaierSum lhs;
  for (std::uint64_t j = 1; j < op.k_star; ++j) lhs.add(S[j] * cma.log_kl(tilde.pow(static_cast<std::int64_t>(j))));
  c.lhs = lhs.value().real();
  c.lhs_imag = lhs.value().imag();
  c.rhs = control_err_rhs(tilde, g, op.g_star, P, table);
  c.abs_err = std::abs(c.lhs - c.rhs);
  return c;
}

struct MertensRestricted {
  std::uint64_t m = 0;
  double P = 0.0;
  double lhs = 0.0;         // sum_{p <= P, p !| m} 1/p
  double rhs = 0.0;         // loglog P - log(m/phi(m)) + B
  double subtracted = 0.0;  // sum_{p | m, p <= P} 1/p
  double abs_err = 0.0;
};

inline MertensRestricted mertens_restricted(std::uint64_t m, double P, const PrimeTable& table) {
  if (P < 3.0) throw domain_error("mertens_restricted: P must be >= 3");
  if (m == 0) throw domain_error("mertens_restricted: m must be >= 1");
  const auto bound = static_cast<std::uint64_t>(std::floor(P));
  if (bound > table.limit()) throw resource_error("mertens_restricted: prime table too short for P");
  const auto ps = table.primes_up_to(bound);
  const double all = blocked_sum<double>(ps.size(), [&](std::size_t i) { return 1.0 / static_cast<double>(ps[i]); });
  MertensRestricted r;
  r.m = m;
  r.P = P;
  const Factorization f = factorize(m, table);
  NeumaierSum sub;
  for (const auto& [p, e] : f.factors) {
    if (p <= bound) sub.add(1.0 / static_cast<double>(p));
  }
  r.subtracted = sub.value();
  r.lhs = all - r.subtracted;
  const double md = static_cast<double>(m);
  r.rhs = std::log(std::log(P)) - std::log(md / static_cast<double>(f.phi())) + static_cast<double>(mertens_constant);
  r.abs_err = std::abs(r.lhs - r.rhs);
  return r;
}

}  // namespace charlab
