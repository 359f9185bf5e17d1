#include <gtest/gtest.h>

#include <random>

#include "charlab/lfunc.hpp"
#include "oracles.hpp"

using namespace charlab;

namespace {
const PrimeTable& table() {
  static const PrimeTable t(10'000'000);
  return t;
}

DirichletCharacter nontrivial_of_order(std::uint64_t q, std::uint64_t k) {
  CharacterFilter f;
  f.exact_order = k;
  return enumerate_characters(build_group(q, table()), f).at(0);
}

// sum_{n <= N} chi(n)/n for a real character.
double real_l_series(const DirichletCharacter& chi, std::uint64_t N) {
  const std::uint64_t q = chi.modulus();
  std::vector<double> val(q);
  for (std::uint64_t n = 0; n < q; ++n) val[n] = chi.value(n).zero ? 0.0 : chi.value_complex(n).real();
  double s = 0.0;
  for (std::uint64_t n = 1; n <= N; ++n) s += val[n % q] / static_cast<double>(n);
  return s;
}

// sum_{n <= N} k(n)/n with k completely multiplicative from its prime values,
// built on a trial-division smallest-factor table.
double k_series(const DirichletCharacter& xi, std::uint64_t N) {
  std::vector<std::uint32_t> lpf(N + 1, 0);
  for (std::uint64_t i = 2; i <= N; ++i) {
    if (lpf[i]) continue;
    for (std::uint64_t j = i; j <= N; j += i) {
      if (!lpf[j]) lpf[j] = static_cast<std::uint32_t>(i);
    }
  }
  std::vector<double> k(N + 1, 0.0);
  k[1] = 1.0;
  double s = 1.0;
  for (std::uint64_t n = 2; n <= N; ++n) {
    const std::uint64_t p = lpf[n];
    const double kp = xi.value(p).zero ? 0.0 : k_xi_at_prime(xi.value_complex(p), p).real();
    k[n] = kp * k[n / p];
    s += k[n] / static_cast<double>(n);
  }
  return s;
}
}  // namespace

TEST(KXi, PrimeValues) {
  EXPECT_NEAR(k_xi_at_prime(cplx(-1.0, 0.0), 2).real(), 0.5, 1e-15);
  EXPECT_NEAR(std::abs(k_xi_at_prime(cplx(1.0, 0.0), 7)), 0.0, 1e-15);
  EXPECT_EQ(k_xi_at_prime(cplx(0.0, 0.0), 3), cplx(0.0, 0.0));
  // k(p) ~ (z^2 - z)/(2p) for large p.
  const cplx z = std::polar(1.0, 2.0 * M_PI / 3.0);
  const std::uint64_t p = 1'000'003;
  EXPECT_NEAR(std::abs(k_xi_at_prime(z, p) * static_cast<double>(p) - (z * z - z) / 2.0), 0.0, 1e-5);
}

TEST(KXi, CombinedLogIdentityAtPrimes) {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    const std::uint64_t q = 3 + rng() % 500;
    CharacterFilter f;
    f.non_principal = true;
    const auto chars = enumerate_characters(build_group(q, table()), f);
    if (chars.empty()) continue;
    const auto& xi = chars[rng() % chars.size()];
    for (const auto p : table().primes_up_to(100000)) {
      const UnitValue v = xi.value(p);
      if (v.zero) continue;
      worst = std::max(worst, comb_kl_error(v.to_complex(), p));
    }
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(EulerProduct, PrincipalValuedKIsZero) {
  const auto g = build_group(15, table());
  const auto k = log_K(DirichletCharacter::principal(g), 1e5, table());
  EXPECT_EQ(k.log_value, cplx(0.0, 0.0));
  EXPECT_THROW(log_L(DirichletCharacter::principal(g), 1e5, table()), domain_error);
  EXPECT_THROW(log_K(DirichletCharacter::principal(g), 2.0, table()), domain_error);
  EXPECT_THROW(log_K(DirichletCharacter::principal(g), 2e7, table()), resource_error);
}

TEST(EulerProduct, LogKStableUnderDoubling) {
  for (std::uint64_t q : {4u, 5u, 7u, 12u}) {
    CharacterFilter f;
    f.non_principal = true;
    for (const auto& xi : enumerate_characters(build_group(q, table()), f)) {
      const auto a = log_K(xi, 1e5, table()), b = log_K(xi, 2e5, table());
      EXPECT_LE(std::abs(a.log_value - b.log_value), 1e-4) << xi.id();
    }
  }
}

TEST(EulerProduct, LogKMatchesDirichletSeries) {
  for (std::uint64_t q : {3u, 4u, 5u, 8u}) {
    const auto xi = nontrivial_of_order(q, 2);
    const double series = k_series(xi, 1'000'000);
    const auto k = log_K(xi, 1e6, table());
    EXPECT_NEAR(std::exp(k.log_value.real()), series, 1e-6) << xi.id();
    EXPECT_NEAR(k.log_value.imag(), 0.0, 1e-15);
  }
}

TEST(EulerProduct, LogLKnownValues) {
  const auto chi4 = nontrivial_of_order(4, 2);
  const auto chi3 = nontrivial_of_order(3, 2);
  const auto l4 = log_L(chi4, 1e7, table());
  const auto l3 = log_L(chi3, 1e7, table());
  EXPECT_NEAR(l4.log_value.real(), std::log(M_PI / 4.0), 1e-4);
  EXPECT_NEAR(l3.log_value.real(), std::log(M_PI / (3.0 * std::sqrt(3.0))), 1e-4);
  EXPECT_NEAR(l4.log_value.real(), std::log(real_l_series(chi4, 10'000'000)), 1e-4);
  EXPECT_NEAR(l3.log_value.real(), std::log(real_l_series(chi3, 10'000'000)), 1e-4);
  EXPECT_LE(l4.error_estimate, 1e-3);
}

TEST(EulerProduct, ConjugatePairing) {
  for (std::uint64_t q : {7u, 13u, 21u}) {
    CharacterFilter f;
    f.non_principal = true;
    for (const auto& xi : enumerate_characters(build_group(q, table()), f)) {
      const auto a = log_L(xi, 1e5, table()), b = log_L(xi.conj(), 1e5, table());
      EXPECT_LE(std::abs(a.log_value - std::conj(b.log_value)), 1e-12);
      const auto c = log_K(xi, 1e5, table()), d = log_K(xi.conj(), 1e5, table());
      EXPECT_LE(std::abs(c.log_value - std::conj(d.log_value)), 1e-12);
    }
  }
}

TEST(Cma, RowSumsAndRealnessUpTo30) {
  for (std::uint64_t m = 3; m <= 30; ++m) {
    const CmaCalculator cma(m, 1e5, table());
    NeumaierSum s;
    for (std::uint64_t a = 1; a < m; ++a) {
      if (std::gcd(a, m) != 1) continue;
      const auto v = cma.c_m_a(a);
      EXPECT_LE(v.imag_residue(), 1e-8) << m << " " << a;
      s.add(v.value);
    }
    const double target = -(0.5772156649015329 + std::log(static_cast<double>(oracle::phi(m)) / static_cast<double>(m)));
    EXPECT_NEAR(s.value(), target, 1e-8) << m;
    EXPECT_NEAR(cma.row_sum_target(), target, 1e-12);
  }
}

TEST(Cma, Errors) {
  EXPECT_THROW(CmaCalculator(2, 1e4, table()), domain_error);
  const CmaCalculator cma(12, 1e4, table());
  EXPECT_THROW(cma.c_m_a(4), domain_error);
  EXPECT_THROW(cma.log_kl(DirichletCharacter::principal(cma.group())), domain_error);
  EXPECT_NEAR(c_m_a(12, 5, 1e4, table()).value, cma.c_m_a(5).value, 1e-15);
}

TEST(Lz, AdditivityMod3) {
  const CmaCalculator cma(3, 1e6, table());
  for (double y : {1e4, 1e6}) {
    const auto r1 = lz_residual(cma, 1, y, table()), r2 = lz_residual(cma, 2, y, table());
    NeumaierSum all;
    for (const auto p : table().primes_up_to(static_cast<std::uint64_t>(y))) all.add(1.0 / p);
    const double expect = all.value() - 1.0 / 3.0 - std::log(std::log(y)) - 0.5772156649015329 - std::log(2.0 / 3.0);
    EXPECT_NEAR(r1.residual + r2.residual, expect, 1e-9);
  }
}

// The prime-power terms carried by K make the plain residual settle on a
// nonzero constant; with them added back it decays.
TEST(Lz, CorrectedResidualDecaysMod4) {
  const CmaCalculator cma(4, 1e7, table());
  for (std::uint64_t a : {1u, 3u}) {
    const auto lo = lz_residual(cma, a, 1e4, table()), hi = lz_residual(cma, a, 1e7, table());
    EXPECT_LT(std::abs(hi.corrected), std::abs(lo.corrected));
    EXPECT_LE(std::abs(hi.corrected), 1e-4);
    EXPECT_NEAR(hi.corrected, hi.residual + hi.power_terms, 1e-15);
    const auto mid = lz_residual(cma, a, 1e6, table());
    EXPECT_LE(std::abs(hi.residual - mid.residual), 1e-4);
  }
  EXPECT_THROW(lz_residual(cma, 1, 50.0, table()), domain_error);
}

TEST(Mertens, Restricted) {
  const auto r1 = mertens_restricted(1, 1e7, table());
  EXPECT_LE(r1.abs_err, 1e-3);
  EXPECT_EQ(r1.subtracted, 0.0);
  const auto r30 = mertens_restricted(30, 1e6, table());
  EXPECT_NEAR(r30.subtracted, 0.5 + 1.0 / 3.0 + 0.2, 1e-15);
  const auto r1m = mertens_restricted(1, 1e6, table());
  EXPECT_NEAR(r30.lhs, r1m.lhs - r30.subtracted, 1e-12);
  // A prime factor beyond P removes nothing.
  const auto big = mertens_restricted(1'000'003, 1e6, table());
  EXPECT_EQ(big.subtracted, 0.0);
  EXPECT_NEAR(big.lhs, r1m.lhs, 1e-15);
  EXPECT_THROW(mertens_restricted(1, 2.0, table()), domain_error);
}

TEST(Coset, QuadraticMod5) {
  const CmaCalculator cma(5, 1e6, table());
  const auto psi = nontrivial_of_order(5, 2);
  for (std::uint64_t ell = 0; ell < 2; ++ell) {
    const auto c = coset_identity_check(psi, ell, cma);
    EXPECT_LE(c.abs_err, 1e-4);
    EXPECT_TRUE(c.cardinality_ok());
    EXPECT_EQ(c.coset_size, 2u);
  }
  EXPECT_THROW(coset_identity_check(psi, 2, cma), domain_error);
}

TEST(Coset, CardinalityAndSumOverCosets) {
  for (std::uint64_t m = 3; m <= 50; ++m) {
    const CmaCalculator cma(m, 1e3, table());
    for (const auto& psi : enumerate_characters(cma.group())) {
      NeumaierSum total;
      std::uint64_t count = 0;
      for (std::uint64_t ell = 0; ell < psi.order(); ++ell) {
        const auto c = coset_identity_check(psi, ell, cma);
        ASSERT_TRUE(c.cardinality_ok()) << psi.id() << " " << ell;
        ASSERT_LE(c.abs_err, 1e-9) << psi.id() << " " << ell;
        total.add(c.lhs);
        count += c.coset_size;
      }
      ASSERT_EQ(count, oracle::phi(m));
      ASSERT_NEAR(total.value(), cma.row_sum_target(), 1e-9) << psi.id();
    }
  }
}

TEST(ControlErr, TrivialKStarIsZero) {
  const CmaCalculator cma(7, 1e4, table());
  // A cubic character mod 7 has k* = 1 for g = 3.
  const auto c = control_err_check(nontrivial_of_order(7, 3), 3, 100.0, cma, table());
  EXPECT_EQ(c.k_star, 1u);
  EXPECT_EQ(c.lhs, 0.0);
  EXPECT_EQ(c.rhs, 0.0);
  EXPECT_EQ(c.abs_err, 0.0);
}

TEST(ControlErr, DoublingPAddsTheNewPrimes) {
  const CmaCalculator cma(11, 1e5, table());
  const auto psi = nontrivial_of_order(11, 10);
  const auto a = control_err_check(psi, 3, 500.0, cma, table());
  const auto b = control_err_check(psi, 3, 1000.0, cma, table());
  EXPECT_EQ(a.lhs, b.lhs);
  const auto tilde = psi.pow(static_cast<std::int64_t>(std::gcd(a.k, std::uint64_t{3})));
  const double direct = control_err_rhs(tilde, 3, a.g_star, 1000.0, table()) - control_err_rhs(tilde, 3, a.g_star, 500.0, table());
  EXPECT_NEAR(b.rhs - a.rhs, direct, 1e-15);
  EXPECT_NE(b.rhs, a.rhs);
}

// With P = X the two sides differ exactly by the prime-power part of
// log(K/L) = sum_p xi(p) log(1 - 1/p).
TEST(ControlErr, ExactAtFullTruncation) {
  for (std::uint64_t m : {11u, 23u, 31u}) {
    const double X = 1e6;
    const CmaCalculator cma(m, X, table());
    CharacterFilter f;
    f.parity = -1;
    f.primitive_only = true;
    for (const auto& psi : enumerate_characters(cma.group(), f)) {
      const auto lo = control_err_check(psi, 3, 100.0 * std::log(static_cast<double>(m)), cma, table());
      EXPECT_LE(std::abs(lo.lhs_imag), 1e-9);
      EXPECT_LE(lo.abs_err, 0.1) << psi.id();
      const auto c = control_err_check(psi, 3, X, cma, table());
      if (c.k_star == 1) continue;
      const auto tilde = psi.pow(static_cast<std::int64_t>(std::gcd(c.k, std::uint64_t{3})));
      std::vector<double> w(c.k_star);
      double s0 = 0.0;
      for (std::uint64_t l = 0; l < c.k_star; ++l) {
        w[l] = cos_weight(static_cast<std::int64_t>(l), 3, c.k_star, c.g_star);
        s0 += w[l] / static_cast<double>(c.k_star);
      }
      double direct = 0.0;
      for (const auto p : table().primes_up_to(static_cast<std::uint64_t>(X))) {
        const auto ell = tilde.angle_in_order(p);
        if (ell < 0) continue;
        direct += (w[static_cast<std::size_t>(ell)] - s0) * std::log1p(-1.0 / p);
      }
      EXPECT_NEAR(c.lhs, direct, 1e-10) << psi.id();
    }
  }
}
