#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

#include "charlab/construct.hpp"
#include "oracles.hpp"

using namespace charlab;

namespace {
const PrimeTable& table() {
  static const PrimeTable t(10'000'000);
  return t;
}

DirichletCharacter of_order(std::uint64_t q, std::uint64_t k, int parity = 0) {
  CharacterFilter f;
  f.exact_order = k;
  if (parity != 0) f.parity = parity;
  return enumerate_characters(build_group(q, table()), f).at(0);
}

// Is Re(chi(p) conj(psi(p))) the largest value over mu_g, compared in floating point.
bool maximizes(const DirichletCharacter& chi, const DirichletCharacter& psi, std::uint64_t g, std::uint64_t p) {
  const cplx pv = psi.value_complex(p);
  double best = -2.0;
  for (std::uint64_t n = 0; n < g; ++n) best = std::max(best, (unit_root(static_cast<std::int64_t>(n), static_cast<std::int64_t>(g)) * std::conj(pv)).real());
  return std::abs((chi.value_complex(p) * std::conj(pv)).real() - best) < 1e-12;
}
}  // namespace

TEST(Sifted, Examples) {
  const auto r = find_sifted_primes(2, 50, 0.2, table());
  std::vector<std::uint64_t> ms;
  for (const auto& s : r.passing) ms.push_back(s.m);
  EXPECT_NE(std::find(ms.begin(), ms.end(), 7u), ms.end());
  EXPECT_EQ(std::find(ms.begin(), ms.end(), 13u), ms.end());
  EXPECT_EQ(std::find(ms.begin(), ms.end(), 5u), ms.end());
  const auto s7 = classify_sifted(7, std::pow(50.0, 0.2), table());
  EXPECT_TRUE(s7.two_exact);
  EXPECT_EQ(s7.pminus, 3u);
  EXPECT_TRUE(s7.passes());
  EXPECT_FALSE(classify_sifted(13, 2.0, table()).two_exact);
  EXPECT_FALSE(classify_sifted(5, 2.0, table()).two_exact);
  const auto s3 = classify_sifted(3, 2.0, table());
  EXPECT_EQ(s3.pminus, 0u);
  EXPECT_TRUE(s3.passes());
  EXPECT_THROW(find_sifted_primes(2, 50, 0.5, table()), domain_error);
  EXPECT_THROW(find_sifted_primes(2, 50, 0.0, table()), domain_error);
  EXPECT_THROW(find_sifted_primes(2, 20'000'000, 0.2, table()), resource_error);
}

TEST(Sifted, MatchesTrialDivisionFilter) {
  for (std::uint64_t M : {50u, 1000u, 20000u, 100000u}) {
    const double delta = 0.2, thr = std::pow(static_cast<double>(M), delta);
    std::vector<std::uint64_t> expect;
    for (std::uint64_t m = 3; m <= M; ++m) {
      if (!oracle::is_prime(m) || (m - 1) % 4 != 2) continue;
      const std::uint64_t half = (m - 1) / 2;
      if (half == 1 || static_cast<double>(oracle::least_prime_factor(half)) > thr) expect.push_back(m);
    }
    const auto r = find_sifted_primes(0, M, delta, table());
    std::vector<std::uint64_t> got;
    for (const auto& s : r.passing) got.push_back(s.m);
    ASSERT_EQ(got, expect) << M;
    EXPECT_NEAR(r.prediction, M / std::pow(std::log(static_cast<double>(M)), 2), 1e-9);
  }
  const auto half = find_sifted_primes(10000, 20000, 0.2, table());
  EXPECT_EQ(half.passing.size(), 162u);
  for (const auto& s : half.passing) EXPECT_GT(s.m, 10000u);
}

TEST(SmallOrder, Examples) {
  EXPECT_EQ(count_small_order(7), 2u);
  EXPECT_EQ(count_small_order(3), 0u);
  EXPECT_EQ(count_small_order(11), 2u);
}

TEST(SmallOrder, ComplementAndInclusionExclusion) {
  for (std::uint64_t m = 3; m <= 10000; ++m) {
    if (!oracle::is_prime(m)) continue;
    const std::uint64_t n = m - 1;
    const auto c = count_small_order(m);
    ASSERT_EQ(count_small_order_inclusion_exclusion(m, table()), c) << m;
    std::uint64_t large = 0;
    for (std::uint64_t d = 1; d <= n; ++d) {
      if (2 * (n / std::gcd(d, n)) >= n) ++large;
    }
    ASSERT_EQ(c + large, n) << m;
    if (m <= 400) {
      std::uint64_t small = 0;
      for (std::uint64_t d = 1; d <= n; ++d) {
        if (2 * oracle::power_order(d, n) < n) ++small;
      }
      ASSERT_EQ(small, c) << m;
    }
  }
}

TEST(Bujold, NoConstraintsBelowTwo) {
  for (std::uint64_t m : {7u, 11u, 101u}) {
    const auto r = bujold_search(m, 1.5, 5.0, table());
    EXPECT_EQ(r.candidates.size(), (m - 1) / 2);
    for (const auto& c : r.candidates) EXPECT_EQ(c.psi->parity(), -1);
  }
  EXPECT_THROW(bujold_search(15, 10, 5, table()), domain_error);
  EXPECT_THROW(bujold_search(101, 10, 0, table()), domain_error);
  BujoldOptions tiny;
  tiny.exhaustive_limit = 10;
  EXPECT_THROW(bujold_search(101, 10, 5, table(), tiny), resource_error);
}

TEST(Bujold, Mod101MatchesDirectScan) {
  const auto r = bujold_search(101, 10, 5, table());
  std::vector<std::string> expect;
  for (const auto& psi : enumerate_characters(build_group(101, table()))) {
    if (psi.parity() != -1) continue;
    bool ok = true;
    for (std::uint64_t p : {2u, 3u, 5u, 7u}) ok = ok && std::abs(psi.value_complex(p) - 1.0) <= 0.2;
    if (ok) expect.push_back(psi.id());
  }
  std::vector<std::string> got;
  for (const auto& c : r.candidates) got.push_back(c.psi->id());
  std::sort(got.begin(), got.end());
  std::sort(expect.begin(), expect.end());
  EXPECT_EQ(got, expect);
  EXPECT_EQ(r.scanned, 50u);
}

TEST(Bujold, ChordAngleIdentity) {
  const std::uint64_t m = 10667;
  const auto r = bujold_search(m, 10, 3, table());
  ASSERT_FALSE(r.candidates.empty());
  for (const auto& c : r.candidates) {
    double worst = 0.0;
    for (const auto& v : c.small) {
      const double direct = std::abs(c.psi->value_complex(v.p) - 1.0);
      ASSERT_NEAR(v.chord, direct, 1e-12);
      ASSERT_NEAR(direct, 2.0 * std::abs(std::sin(M_PI * v.arg)), 1e-12);
      ASSERT_LE(direct, 1.0 / 3.0 + 1e-12);
      ASSERT_LE(std::abs(v.arg), std::asin(1.0 / 6.0) / M_PI + 1e-12);
      worst = std::max(worst, std::abs(v.arg));
    }
    ASSERT_NEAR(c.max_small_arg, worst, 1e-15);
    std::vector<std::uint64_t> ps;
    for (const auto& v : c.small) ps.push_back(v.p);
    ASSERT_EQ(ps, (std::vector<std::uint64_t>{2, 3, 5, 7}));
  }
}

TEST(Bujold, SamplingIsSeeded) {
  BujoldOptions o;
  o.sampling = true;
  o.sample_size = 200;
  o.seed = 9;
  const auto a = bujold_search(10667, 10, 3, table(), o), b = bujold_search(10667, 10, 3, table(), o);
  EXPECT_TRUE(a.sampled);
  ASSERT_EQ(a.candidates.size(), b.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i) EXPECT_EQ(a.candidates[i].exponent, b.candidates[i].exponent);
  EXPECT_LE(a.scanned, 200u);
}

TEST(PickPsi, Mod101) {
  const auto search = bujold_search(101, 10, 5, table());
  const PsiCandidate* expect = nullptr;
  for (const auto& c : search.candidates) {
    if (2 * c.k < 100) continue;
    if (!expect || c.max_small_arg < expect->max_small_arg) expect = &c;
  }
  if (!expect) {
    EXPECT_THROW(pick_psi(101, 10, 5, 3, table()), search_failure);
  } else {
    const auto c = pick_psi(101, 10, 5, 3, table());
    EXPECT_EQ(c.exponent, expect->exponent);
    EXPECT_TRUE(c.k == 50 || c.k == 100);
    EXPECT_EQ(c.psi->parity(), -1);
    EXPECT_TRUE(c.psi->value(100) == UnitValue::root(1, 2));
  }
  // Loose thresholds always leave a large-order odd character.
  const auto loose = pick_psi(101, 1.5, 5, 3, table());
  EXPECT_TRUE(loose.k == 50 || loose.k == 100);
  EXPECT_EQ(loose.exponent, 1u);
  EXPECT_THROW(pick_psi(7, 10, 5, 3, table()), domain_error);
}

TEST(BuildChi, PerfectAtSmallBudget) {
  const auto psi = of_order(11, 10, -1);
  const auto qs = default_q_candidates(3, 10000, false, table());
  for (const auto q : qs) ASSERT_EQ(q % 3, 1u);
  const auto c = build_chi(psi, 3, 10.0, qs, table());
  EXPECT_EQ(c.score.score(), 1.0);
  EXPECT_TRUE(c.score.perfect());
  const auto& chi = *c.chi;
  EXPECT_EQ(chi.order(), 3u);
  EXPECT_TRUE(chi.pow(3).is_principal());
  EXPECT_FALSE(chi.is_principal());
  EXPECT_EQ(chi.conductor(), c.q);
  for (std::uint64_t p : {2u, 3u, 5u, 7u}) {
    if (c.q % p == 0) continue;
    EXPECT_TRUE(maximizes(chi, psi, 3, p)) << p;
  }
  EXPECT_THROW(build_chi(psi, 3, 10.0, {}, table()), domain_error);
  EXPECT_THROW(build_chi(psi, 4, 10.0, qs, table()), domain_error);
}

TEST(BuildChi, ExactMaximizerTestMatchesFloatingPoint) {
  std::mt19937_64 rng(13);
  for (int s = 0; s < 40; ++s) {
    const std::uint64_t m = oracle::segmented_primes(200)[3 + rng() % 40];
    const auto psis = enumerate_characters(build_group(m, table()));
    const auto& psi = psis[rng() % psis.size()];
    CharacterFilter f;
    f.exact_order = 3;
    const std::uint64_t q = default_q_candidates(3, 500, false, table())[rng() % 10];
    for (const auto& chi : enumerate_characters(build_group(q, table()), f)) {
      for (const auto p : table().primes_up_to(200)) {
        if (q % p == 0 || m % p == 0) continue;
        ASSERT_EQ(is_maximizer(chi.angle_in_order(p), 3, psi.angle_in_order(p), psi.order()), maximizes(chi, psi, 3, p))
            << chi.id() << " " << psi.id() << " " << p;
      }
    }
  }
}

// A uniformly chosen cubic value at p is a maximizer with probability 1/3,
// or more on ties.
TEST(BuildChi, RandomAgreementBaseline) {
  const auto psi = of_order(101, 100, -1);
  const auto qs = default_q_candidates(3, 3000, false, table());
  double sum = 0.0;
  std::size_t count = 0;
  CharacterFilter f;
  f.exact_order = 3;
  for (const auto q : qs) {
    for (const auto& chi : enumerate_characters(build_group(q, table()), f)) {
      const auto a = agreement(chi, 3, psi, 1000.0, table());
      EXPECT_GE(a.score(), 0.0);
      EXPECT_LE(a.score(), 1.0);
      sum += a.score();
      ++count;
    }
  }
  EXPECT_NEAR(sum / static_cast<double>(count), 1.0 / 3.0, 0.05);
}

TEST(Spsig, ConjugateInvariance) {
  const auto psi = of_order(101, 100, -1);
  for (double y : {1e4, 1e5}) {
    const auto a = spsig_decomposition(y, psi, 3, 500.0, table());
    const auto b = spsig_decomposition(y, psi.conj(), 3, 500.0, table());
    EXPECT_NEAR(a.S_exact, b.S_exact, 1e-12);
    EXPECT_NEAR(a.residual, b.residual, 1e-12);
    EXPECT_TRUE(std::isfinite(a.residual));
    EXPECT_NEAR(a.residual, a.S_exact - a.main_term - a.small_prime_term, 1e-15);
  }
  EXPECT_THROW(spsig_decomposition(10.0, psi, 3, 500.0, table()), domain_error);
}

TEST(Spsig, TrivialKStar) {
  // A cubic character with g = 3 has k* = 1: every weight is 1.
  const auto psi = of_order(7, 3);
  const auto r = spsig_decomposition(1e5, psi, 3, 100.0, table());
  EXPECT_EQ(r.k_star, 1u);
  NeumaierSum s;
  for (const auto p : table().primes_up_to(100000)) {
    if (p != 7) s.add(1.0 / p);
  }
  EXPECT_NEAR(r.S_exact, s.value(), 1e-12);
  EXPECT_TRUE(std::isfinite(r.residual));
}

TEST(Spsig, WithSjForm) {
  const auto psi = of_order(11, 10, -1);
  const CmaCalculator cma(11, 1e6, table());
  const auto a = spsig_decomposition(1e5, psi, 3, 1000.0, table(), &cma);
  const auto b = spsig_decomposition(1e6, psi, 3, 1000.0, table(), &cma);
  EXPECT_TRUE(a.has_with_sj);
  EXPECT_TRUE(std::isfinite(a.with_sj_residual));
  // k* = 10 is even, so the leading coefficient is the mean weight and the
  // residual stops moving with y.
  EXPECT_LE(std::abs(a.with_sj_residual - b.with_sj_residual), 0.01);
  EXPECT_FALSE(spsig_decomposition(1e5, psi, 3, 1000.0, table()).has_with_sj);
}

TEST(Disagreement, BookkeepingOnHandBuiltPair) {
  const auto psi = of_order(11, 10, -1);
  const auto qs = default_q_candidates(3, 10000, false, table());
  const auto c = build_chi(psi, 3, 10.0, qs, table());
  double prev_bound = -1.0;
  for (double Y : {1e3, 1e4, 1e5}) {
    const auto b = disagreement_bookkeeping(*c.chi, psi, 3, Y, table());
    double d2 = 0.0, s = 0.0, all = 0.0, bound = 0.0;
    for (const auto p : table().primes_up_to(static_cast<std::uint64_t>(Y))) {
      const double inv = 1.0 / p;
      all += inv;
      d2 += (1.0 - (c.chi->value_complex(p) * std::conj(psi.value_complex(p))).real()) * inv;
      if (!psi.value(p).zero) s += oracle::best_cos(static_cast<std::uint64_t>(psi.angle_in_order(p)), psi.order(), 3) * inv;
      if (!maximizes(*c.chi, psi, 3, p)) bound += 2.0 * inv;
      if (c.q % p == 0 || 11 % p == 0) bound += inv;
    }
    EXPECT_NEAR(b.D2, d2, 1e-10);
    EXPECT_NEAR(b.S, s, 1e-10);
    EXPECT_NEAR(b.prime_sum, all, 1e-10);
    EXPECT_NEAR(b.bound, bound, 1e-10);
    EXPECT_GE(b.D2 - (b.prime_sum - b.S), -1e-12);
    EXPECT_LE(b.D2 - (b.prime_sum - b.S), b.bound + 1e-12);
    EXPECT_GE(b.bound, prev_bound);
    prev_bound = b.bound;
  }
}

// Replacing a disagreeing value by the maximizer at one prime cannot raise
// the distance and raises the agreement.
TEST(Disagreement, SubstitutionMonotonicity) {
  const auto psi = of_order(101, 100, -1);
  std::mt19937_64 rng(17);
  std::map<std::uint64_t, std::uint64_t> chi_n;
  const auto ps = table().primes_up_to(1000);
  for (const auto p : ps) chi_n[p] = rng() % 3;
  auto fn = [&]() {
    auto copy = chi_n;
    return PrimeFunction{[copy](std::uint64_t p) {
                           return unit_root(static_cast<std::int64_t>(copy.at(p)), 3);
                         },
                         "synthetic"};
  };
  const auto h = PrimeFunction::from_character(psi);
  auto agree = [&]() {
    double a = 0.0;
    for (const auto p : ps) {
      if (p == 101) continue;
      if (is_maximizer(static_cast<std::int64_t>(chi_n[p]), 3, psi.angle_in_order(p), psi.order())) a += 1.0 / p;
    }
    return a;
  };
  double d = distance2(fn(), h, 1000.0, table());
  double a = agree();
  int swaps = 0;
  for (const auto p : ps) {
    if (p == 101) continue;
    const auto ell = static_cast<std::uint64_t>(psi.angle_in_order(p));
    const auto z = select_z(ell, psi.order(), 3);
    if (is_maximizer(static_cast<std::int64_t>(chi_n[p]), 3, psi.angle_in_order(p), psi.order())) continue;
    chi_n[p] = z.n;
    const double d2 = distance2(fn(), h, 1000.0, table());
    const double a2 = agree();
    ASSERT_LE(d2, d + 1e-15) << p;
    ASSERT_GT(a2, a) << p;
    d = d2;
    a = a2;
    ++swaps;
  }
  EXPECT_GT(swaps, 10);
}

TEST(Config, ParseAndErrors) {
  PipelineConfig c;
  std::istringstream in(
      "# desk run\n"
      "M = 30000\n"
      "g=5   # order\n"
      "\n"
      "preset = paper\n"
      "T = 12.5\n"
      "products = true\n"
      "seed = 4\n");
  load_config(c, in);
  EXPECT_EQ(c.M, 30000u);
  EXPECT_EQ(c.g, 5u);
  EXPECT_EQ(c.preset, Preset::paper);
  EXPECT_EQ(c.T_for(10667), 12.5);
  EXPECT_TRUE(c.products);
  EXPECT_EQ(c.bujold.seed, 4u);
  EXPECT_EQ(c.low(), 15000u);
  EXPECT_THROW(apply_setting(c, "nope", "1"), domain_error);
  EXPECT_THROW(apply_setting(c, "M", "1e"), domain_error);
  EXPECT_THROW(apply_setting(c, "M", "2.5"), domain_error);
  EXPECT_THROW(apply_setting(c, "products", "maybe"), domain_error);
  EXPECT_THROW(apply_setting(c, "preset", "lab"), domain_error);
  std::istringstream bad("M 100\n");
  EXPECT_THROW(load_config(c, bad), domain_error);
}

TEST(Config, Presets) {
  PipelineConfig desk;
  const double lm = std::log(10667.0);
  EXPECT_EQ(desk.T_for(10667), std::max(10.0, lm));
  EXPECT_EQ(desk.N_for(), std::ceil(std::log(std::log(20000.0))));
  EXPECT_EQ(desk.P_for(10667), 100.0 * lm);
  PipelineConfig paper;
  paper.preset = Preset::paper;
  EXPECT_EQ(paper.T_for(10667), lm / 100.0);
  EXPECT_EQ(paper.N_for(), std::log(std::log(20000.0)));
  EXPECT_EQ(paper.P_for(10667), 3.0);
}

TEST(Pipeline, DeskRunPostconditions) {
  PipelineConfig cfg;
  const auto r = run_pipeline(cfg, table());
  ASSERT_TRUE(r.ok) << r.failed_stage << ": " << r.message;
  EXPECT_TRUE(oracle::is_prime(r.m));
  EXPECT_GT(r.m, 10000u);
  EXPECT_LE(r.m, 20000u);
  EXPECT_EQ((r.m - 1) % 4, 2u);
  EXPECT_NE((r.m - 1) % 3, 0u);
  const std::uint64_t half = (r.m - 1) / 2;
  EXPECT_GT(static_cast<double>(oracle::least_prime_factor(half)), std::pow(20000.0, 0.2));

  const auto group = build_group(r.m, table());
  const auto psi = parse_character(r.psi_id, group);
  EXPECT_EQ(psi.parity(), -1);
  EXPECT_EQ(psi.order(), r.k);
  EXPECT_GE(2 * r.k, r.m - 1);
  for (const auto p : table().primes_up_to(static_cast<std::uint64_t>(r.T))) {
    if (p == r.m) continue;
    EXPECT_LE(std::abs(psi.value_complex(p) - 1.0), 1.0 / r.N + 1e-12) << p;
  }
  const auto chi = parse_character(r.chi_id, table());
  EXPECT_EQ(chi.modulus(), r.q);
  EXPECT_EQ(chi.order(), 3u);
  EXPECT_EQ(chi.conductor(), r.q);
  EXPECT_GE(r.agreement, 0.9);
  EXPECT_TRUE(r.bookkeeping_consistent);
  EXPECT_LE(std::abs(r.distance_residual), r.bookkeeping_bound);
  EXPECT_EQ(r.small_order_count, count_small_order(r.m));
  ASSERT_TRUE(r.decomposition.has_value());
  EXPECT_TRUE(std::isfinite(r.decomposition->residual));
  EXPECT_NEAR(r.D2_Y,
              distance2(PrimeFunction::from_character(chi), PrimeFunction::from_character(psi), cfg.Y, table()),
              1e-9);
  const double Q = std::log(static_cast<double>(r.q));
  const double md = static_cast<double>(r.m);
  EXPECT_NEAR(r.lower_bound_proxy,
              std::sqrt(r.q * md) / (md - 1.0) * std::log(Q) * std::exp(-r.D2_Q) / std::sqrt(static_cast<double>(r.q)),
              1e-12);
  ASSERT_EQ(r.stages.size(), 6u);
  for (const auto& s : r.stages) EXPECT_TRUE(s.ok) << s.name;
}

TEST(Pipeline, TinyRangeFailsAtFirstStage) {
  PipelineConfig cfg;
  cfg.M = 10;
  const auto r = run_pipeline(cfg, table());
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.failed_stage, "sifted_primes");
  EXPECT_FALSE(r.message.empty());
  cfg.g = 4;
  EXPECT_THROW(run_pipeline(cfg, table()), domain_error);
}
