#include <gtest/gtest.h>

#include <random>

#include "charlab/charsum.hpp"
#include "oracles.hpp"

using namespace charlab;

namespace {
const PrimeTable& table() {
  static const PrimeTable t(100000);
  return t;
}

DirichletCharacter of_order(std::uint64_t q, std::uint64_t k) {
  CharacterFilter f;
  f.exact_order = k;
  return enumerate_characters(build_group(q, table()), f).at(0);
}
}  // namespace

TEST(MaxPartialSum, QuadraticMod5) {
  const auto p = max_partial_sum(of_order(5, 2), true);
  EXPECT_NEAR(p.M, 1.0, 1e-12);
  EXPECT_EQ(p.argmax_t, 1u);
  ASSERT_EQ(p.partial_sums.size(), 5u);
  const double expect[] = {1, 0, -1, 0, 0};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(p.partial_sums[i].real(), expect[i], 1e-12);
}

TEST(MaxPartialSum, LegendreMod11) {
  const auto p = max_partial_sum(of_order(11, 2), true);
  EXPECT_NEAR(p.M, 3.0, 1e-12);
  EXPECT_EQ(p.argmax_t, 5u);
  const double expect[] = {1, 0, 1, 2, 3, 2, 1, 0, 1, 0};
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(p.partial_sums[i].real(), expect[i], 1e-12);
}

TEST(MaxPartialSum, CubicMod7) {
  const auto p = max_partial_sum(of_order(7, 3), true);
  EXPECT_NEAR(p.M, 1.0, 1e-12);
  for (const auto& s : p.partial_sums) EXPECT_LE(std::abs(s), 1.0 + 1e-12);
}

TEST(MaxPartialSum, Errors) {
  EXPECT_THROW(max_partial_sum(DirichletCharacter::principal(build_group(7, table()))), domain_error);
}

TEST(MaxPartialSum, AtLeastOneAndConjugationSymmetric) {
  for (std::uint64_t q = 3; q <= 500; ++q) {
    const auto g = build_group(q, table());
    const PeriodSummer summer(g);
    CharacterFilter f;
    f.non_principal = true;
    for (const auto& chi : enumerate_characters(g, f)) {
      const double m = summer.profile(chi).M;
      ASSERT_GE(m, 1.0 - 1e-12);
      ASSERT_NEAR(m, summer.profile(chi.conj()).M, 1e-9) << chi.id();
    }
  }
}

TEST(MaxPartialSum, RetainedPrefixMatchesWalkedOracle) {
  std::mt19937_64 rng(3);
  for (int s = 0; s < 1000; ++s) {
    const std::uint64_t q = 3 + rng() % 2000;
    const auto g = build_group(q, table());
    CharacterFilter f;
    f.non_principal = true;
    const auto chars = enumerate_characters(g, f);
    const auto& chi = chars[rng() % chars.size()];
    const auto p = max_partial_sum(chi, true);
    double best = 0.0;
    for (const auto& z : p.partial_sums) best = std::max(best, std::abs(z));
    ASSERT_NEAR(best, p.M, 1e-9);
    ASSERT_NEAR(oracle::max_partial_sum(chi), p.M, 1e-9) << chi.id();
    ASSERT_NEAR(std::abs(p.partial_sums[p.argmax_t - 1]), p.M, 1e-9);
  }
}

TEST(MaxPartialSum, EvenReflection) {
  for (std::uint64_t q = 3; q <= 300; ++q) {
    const auto g = build_group(q, table());
    CharacterFilter f;
    f.non_principal = true;
    f.parity = 1;
    for (const auto& chi : enumerate_characters(g, f)) {
      const auto p = max_partial_sum(chi, true);
      for (std::uint64_t t = 1; t + 1 < q; ++t) {
        ASSERT_NEAR(std::abs(p.partial_sums[q - 1 - t - 1]), std::abs(p.partial_sums[t - 1]), 1e-9) << chi.id();
      }
    }
  }
}

TEST(ScanFamily, CubicUpTo50) {
  const auto res = scan_family(3, 50, 3, false, table());
  std::vector<std::uint64_t> qs;
  for (const auto& r : res.records) {
    if (qs.empty() || qs.back() != r.q) qs.push_back(r.q);
    EXPECT_EQ(r.order, 3u);
  }
  std::vector<std::uint64_t> expect;
  for (std::uint64_t q = 3; q <= 50; ++q) {
    if (build_group(q, table())->exponent() % 3 == 0) expect.push_back(q);
  }
  EXPECT_EQ(qs, expect);
  EXPECT_EQ(qs.front(), 7u);
  EXPECT_EQ(qs[1], 9u);
  EXPECT_EQ(qs[2], 13u);
  double running = 0.0;
  for (const auto& r : res.records) {
    running = std::max(running, r.M_over_sqrtq);
    EXPECT_EQ(r.running_max, running);
  }
}

TEST(ScanFamily, QuinticBelow11IsEmpty) {
  EXPECT_TRUE(scan_family(3, 10, 5, true, table()).records.empty());
  EXPECT_THROW(scan_family(3, 10, 4, true, table()), domain_error);
}

TEST(ScanFamily, PrimeModuliAllPrimitive) {
  CharacterFilter prim, all;
  prim.primitive_only = true;
  const auto a = scan_all(97, 97, prim, table());
  const auto b = scan_all(97, 97, all, table());
  EXPECT_EQ(a.records.size(), 95u);
  EXPECT_EQ(b.records.size(), 95u);
}

TEST(ScanFamily, TruncatesOnWorkBudget) {
  ScanLimits lim;
  lim.max_work = 5000;
  const auto r = scan_family(3, 200, 3, false, table(), lim);
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.truncation_reason.empty());
  EXPECT_LT(r.last_complete_q, 200u);
}

TEST(ScanRecord, EnvelopeRatio) {
  const auto r = scan_family(7, 7, 3, true, table()).records.at(0);
  const double ll = std::log(std::log(7.0));
  EXPECT_NEAR(r.envelope_ratio, r.M / (std::sqrt(7.0) * std::pow(ll, 1.0 - delta_g(3))), 1e-12);
  EXPECT_TRUE(std::isnan(envelope_ratio(3.0, 11, 2)));
}

TEST(PolyaVinogradov, Examples) {
  CharacterFilter f;
  f.exact_order = 2;
  const auto r11 = scan_all(11, 11, f, table());
  const auto rep = polya_vinogradov_check(r11.records);
  EXPECT_TRUE(rep.ok());
  EXPECT_NEAR(r11.records.at(0).M, 3.0, 1e-12);
  EXPECT_LT(3.0, std::sqrt(11.0) * std::log(11.0));
  const auto r5 = scan_all(5, 5, f, table());
  EXPECT_TRUE(polya_vinogradov_check(r5.records).ok());
  const auto empty = polya_vinogradov_check({});
  EXPECT_EQ(empty.checked, 0u);
  EXPECT_TRUE(empty.ok());
  ScanRecord fake;
  fake.q = 5;
  fake.M = 100.0;
  EXPECT_FALSE(polya_vinogradov_check({fake}).ok());
}

TEST(Scan, DeterministicAcrossThreadCounts) {
  CharacterFilter f;
  set_max_threads(1);
  const auto a = scan_all(3, 150, f, table());
  set_max_threads(4);
  const auto b = scan_all(3, 150, f, table());
  set_max_threads(0);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    ASSERT_EQ(a.records[i].id, b.records[i].id);
    ASSERT_EQ(a.records[i].M, b.records[i].M);
  }
}
