#pragma once

// Construction of a prime m, an odd character psi mod m of large order close
// to 1 on small primes, and an order-g character chi tracking the
// maximizers z_l of psi, with the resulting distance bookkeeping.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "charlab/character.hpp"
#include "charlab/errors.hpp"
#include "charlab/lfunc.hpp"
#include "charlab/numeric.hpp"
#include "charlab/pretentious.hpp"
#include "charlab/primes.hpp"

namespace charlab {

struct SiftedPrime {
  std::uint64_t m = 0;
  Factorization m_minus_1;
  std::uint64_t pminus = 0;  // P^-((m-1)/2); 0 stands for +infinity ((m-1)/2 = 1)
  bool two_exact = false;
  bool pminus_large = false;
  bool passes() const { return two_exact && pminus_large; }
};

inline SiftedPrime classify_sifted(std::uint64_t m, double threshold, const PrimeTable& table) {
  SiftedPrime s;
  s.m = m;
  s.m_minus_1 = factorize(m - 1, table);
  s.two_exact = (m - 1) % 4 == 2;
  if (s.two_exact) {
    const std::uint64_t half = (m - 1) / 2;
    s.pminus = half == 1 ? 0 : factorize(half, table).least_prime();
    s.pminus_large = s.pminus == 0 || static_cast<double>(s.pminus) > threshold;
  }
  return s;
}

struct SiftedReport {
  std::uint64_t M_low = 0, M_high = 0;
  double delta = 0.0;
  double threshold = 0.0;   // M_high^delta
  std::size_t primes_examined = 0;
  std::vector<SiftedPrime> passing;
  double prediction = 0.0;  // M/(log M)^2
};

/// Primes m in (M_low, M_high] with 2 || (m-1) and P^-((m-1)/2) > M_high^delta.
inline SiftedReport find_sifted_primes(std::uint64_t M_low, std::uint64_t M_high, double delta,
                                       const PrimeTable& table) {
  if (!(delta > 0.0 && delta < 0.5)) throw domain_error("find_sifted_primes: delta must lie in (0, 1/2)");
  if (M_high > table.limit()) throw resource_error("find_sifted_primes: prime table too short for M");
  SiftedReport r;
  r.M_low = M_low;
  r.M_high = M_high;
  r.delta = delta;
  r.threshold = std::pow(static_cast<double>(M_high), delta);
  const double Md = static_cast<double>(M_high);
  r.prediction = M_high >= 3 ? Md / (std::log(Md) * std::log(Md)) : 0.0;
  for (const auto p : table.primes_up_to(M_high)) {
    if (p <= M_low || p < 3) continue;
    ++r.primes_examined;
    SiftedPrime s = classify_sifted(p, r.threshold, table);
    if (s.passes()) r.passing.push_back(std::move(s));
  }
  return r;
}

/// #{d in [1, m-1] : gcd(d, m-1) > 2}, the characters mod m of order < (m-1)/2.
inline std::uint64_t count_small_order(std::uint64_t m) {
  if (m < 3) return 0;
  const std::uint64_t n = m - 1;
  std::uint64_t c = 0;
  for (std::uint64_t d = 1; d <= n; ++d) {
    if (std::gcd(d, n) > 2) ++c;
  }
  return c;
}

/// Same count by inclusion-exclusion over {odd p | m-1} u {4 if 4 | m-1}:
/// gcd(d, m-1) > 2 iff one of these divides d.
inline std::uint64_t count_small_order_inclusion_exclusion(std::uint64_t m, const PrimeTable& table) {
  if (m < 3) return 0;
  const std::uint64_t n = m - 1;
  std::vector<std::uint64_t> mods;
  for (const auto& [p, e] : factorize(n, table).factors) {
    if (p != 2) mods.push_back(p);
    else if (e >= 2) mods.push_back(4);
  }
  std::int64_t total = 0;
  const std::size_t r = mods.size();
  for (std::uint64_t mask = 1; mask < (1ULL << r); ++mask) {
    std::uint64_t prod = 1;
    int bits = 0;
    for (std::size_t i = 0; i < r; ++i) {
      if (mask >> i & 1) {
        prod *= mods[i];
        ++bits;
      }
    }
    const auto term = static_cast<std::int64_t>(n / prod);
    total += bits % 2 ? term : -term;
  }
  return static_cast<std::uint64_t>(total);
}

struct SmallPrimeValue {
  std::uint64_t p = 0;
  std::uint64_t angle = 0;  // psi(p) = e(angle / (m-1))
  double arg = 0.0;         // signed rotation in (-1/2, 1/2]
  double chord = 0.0;       // |psi(p) - 1|
};

struct PsiCandidate {
  std::shared_ptr<const DirichletCharacter> psi;
  std::uint64_t exponent = 0;  // psi = xi^exponent for the generator character xi
  std::uint64_t k = 0;
  int parity = -1;
  double max_small_arg = 0.0;  // max over p <= T, p != m of |arg psi(p)|
  std::vector<SmallPrimeValue> small;
};

struct BujoldOptions {
  bool sampling = false;
  std::uint64_t sample_size = 100000;
  std::uint64_t seed = 0;
  std::uint64_t exhaustive_limit = 20'000'000;
};

struct BujoldResult {
  std::uint64_t m = 0;
  double T = 0.0, N = 0.0;
  std::uint64_t scanned = 0;  // odd characters tested
  bool sampled = false;
  std::vector<PsiCandidate> candidates;
  double predicted = 0.0;  // m exp(-2T log N / log T)
};

/// Odd characters psi mod the prime m with |psi(p) - 1| <= 1/N for every
/// prime p <= T, p != m. Exhaustive unless sampling is requested.
inline BujoldResult bujold_search(std::uint64_t m, double T, double N, const PrimeTable& table,
                                  const BujoldOptions& opts = {}) {
  if (m < 3 || !is_prime_u64(m)) throw domain_error("bujold_search: m must be an odd prime");
  if (!(N > 0.0)) throw domain_error("bujold_search: N must be positive");
  const std::uint64_t n = m - 1;
  BujoldResult r;
  r.m = m;
  r.T = T;
  r.N = N;
  r.predicted = T > 1.0 ? static_cast<double>(m) * std::exp(-2.0 * T * std::log(N) / std::log(T)) : static_cast<double>(m);
  if (n / 2 > opts.exhaustive_limit && !opts.sampling) {
    throw resource_error("bujold_search: m = " + std::to_string(m) + " too large for an exhaustive scan");
  }
  const GroupPtr group = build_group(m, table);
  std::vector<std::uint64_t> ps, logs;
  if (T >= 2.0) {
    for (const auto p : table.primes_up_to(static_cast<std::uint64_t>(std::floor(T)))) {
      if (p == m) continue;
      ps.push_back(p);
      logs.push_back(group->log(0, p));
    }
  }
  const double bound = 1.0 / N;
  auto test = [&](std::uint64_t x) -> std::optional<PsiCandidate> {
    double worst = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::uint64_t a = mul_mod(x, logs[i], n);
      const std::uint64_t d = std::min(a, n - a);
      const double chord = 2.0 * std::sin(pi * static_cast<double>(d) / static_cast<double>(n));
      if (chord > bound) return std::nullopt;
      worst = std::max(worst, static_cast<double>(d) / static_cast<double>(n));
    }
    PsiCandidate c;
    c.exponent = x;
    c.k = n / std::gcd(x, n);
    c.parity = -1;
    c.max_small_arg = worst;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::uint64_t a = mul_mod(x, logs[i], n);
      SmallPrimeValue v;
      v.p = ps[i];
      v.angle = a;
      const double frac = static_cast<double>(a) / static_cast<double>(n);
      v.arg = 2 * a > n ? frac - 1.0 : frac;
      v.chord = 2.0 * std::sin(pi * std::abs(v.arg));
      c.small.push_back(v);
    }
    c.psi = std::make_shared<const DirichletCharacter>(group, std::vector<std::uint64_t>{x});
    return c;
  };
  if (n / 2 > opts.exhaustive_limit || (opts.sampling && opts.sample_size < n / 2)) {
    r.sampled = true;
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<std::uint64_t> pick(0, n / 2 - 1);
    std::vector<std::uint64_t> xs(opts.sample_size);
    for (auto& x : xs) x = 2 * pick(rng) + 1;
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    for (const auto x : xs) {
      ++r.scanned;
      if (auto c = test(x)) r.candidates.push_back(std::move(*c));
    }
  } else {
    // psi = xi^x is odd exactly when x is odd, xi(-1) = e(1/2).
    for (std::uint64_t x = 1; x < n; x += 2) {
      ++r.scanned;
      if (auto c = test(x)) r.candidates.push_back(std::move(*c));
    }
  }
  return r;
}

/// Candidate of order >= (m-1)/2 with the smallest max_small_arg, ties by exponent.
inline PsiCandidate pick_psi(const BujoldResult& search, std::uint64_t g) {
  const std::uint64_t n = search.m - 1;
  if (std::gcd(n, g) != 1) {
    throw domain_error("pick_psi: gcd(m-1, g) = " + std::to_string(std::gcd(n, g)) + " for m = " +
                       std::to_string(search.m));
  }
  const PsiCandidate* best = nullptr;
  for (const auto& c : search.candidates) {
    if (2 * c.k < n) continue;
    if (!best || c.max_small_arg < best->max_small_arg ||
        (c.max_small_arg == best->max_small_arg && c.exponent < best->exponent)) {
      best = &c;
    }
  }
  if (!best) throw search_failure("pick_psi: no odd candidate of order >= (m-1)/2 for m = " + std::to_string(search.m));
  return *best;
}

inline PsiCandidate pick_psi(std::uint64_t m, double T, double N, std::uint64_t g, const PrimeTable& table,
                             const BujoldOptions& opts = {}) {
  if (std::gcd(m - 1, g) != 1) throw domain_error("pick_psi: gcd(m-1, g) must be 1");
  return pick_psi(bujold_search(m, T, N, table, opts), g);
}

/// Primes q = 1 mod g up to the budget, ascending; with `products`, also
/// q1 q2 <= budget for two distinct such primes.
inline std::vector<std::uint64_t> default_q_candidates(std::uint64_t g, std::uint64_t budget, bool products,
                                                       const PrimeTable& table) {
  if (budget > table.limit()) throw resource_error("q candidates: prime table too short for the budget");
  std::vector<std::uint64_t> qs;
  for (const auto p : table.primes_up_to(budget)) {
    if (p % g == 1) qs.push_back(p);
  }
  if (products) {
    const std::size_t base = qs.size();
    for (std::size_t i = 0; i < base; ++i) {
      for (std::size_t j = i + 1; j < base && qs[i] * qs[j] <= budget; ++j) qs.push_back(qs[i] * qs[j]);
    }
    std::sort(qs.begin(), qs.end());
  }
  return qs;
}

struct Agreement {
  double agree = 0.0;  // sum of 1/p over agreeing primes
  double total = 0.0;  // sum of 1/p over p <= P, p !| qm
  double score() const { return total > 0.0 ? agree / total : 1.0; }
  bool perfect() const { return agree == total; }
};

// chi(p) maximizes Re(z conj(psi(p))) over z in mu_g: exact integer test.
inline bool is_maximizer(std::int64_t chi_angle, std::uint64_t g, std::int64_t psi_angle, std::uint64_t k) {
  if (psi_angle < 0) return true;  // psi(p) = 0: every z attains the max 0
  if (chi_angle < 0) return false;
  const auto gg = static_cast<std::int64_t>(g), kk = static_cast<std::int64_t>(k);
  const ZChoice z = select_z(static_cast<std::uint64_t>(psi_angle), k, g);
  const std::int64_t best = nearest_int_distance_num(static_cast<std::int64_t>(z.n) * kk - psi_angle * gg, gg * kk);
  const std::int64_t got = nearest_int_distance_num(chi_angle * kk - psi_angle * gg, gg * kk);
  return got == best;
}

inline Agreement agreement(const DirichletCharacter& chi, std::uint64_t g, const DirichletCharacter& psi, double P,
                           const PrimeTable& table) {
  Agreement a;
  const std::uint64_t q = chi.modulus(), m = psi.modulus(), k = psi.order();
  NeumaierSum agree, total;
  for (const auto p : table.primes_up_to(static_cast<std::uint64_t>(std::max(0.0, std::floor(P))))) {
    if (q % p == 0 || m % p == 0) continue;
    const double w = 1.0 / static_cast<double>(p);
    total.add(w);
    if (is_maximizer(chi.angle_in_order(p), g, psi.angle_in_order(p), k)) agree.add(w);
  }
  a.agree = agree.value();
  a.total = total.value();
  return a;
}

struct ChiChoice {
  std::uint64_t q = 0;
  std::shared_ptr<const DirichletCharacter> chi;
  Agreement score;
  std::size_t q_examined = 0;
  std::size_t characters_examined = 0;
};

/// Best order-g character over the candidate moduli by agreement with the
/// maximizers of psi at primes p <= P; ties go to smaller q, then index.
inline ChiChoice build_chi(const DirichletCharacter& psi, std::uint64_t g, double P,
                           const std::vector<std::uint64_t>& q_candidates, const PrimeTable& table,
                           bool primitive_only = true, bool stop_at_perfect = true) {
  if (g < 3 || g % 2 == 0) throw domain_error("build_chi: g must be odd and >= 3");
  if (q_candidates.empty()) throw domain_error("build_chi: empty candidate set");
  ChiChoice best;
  CharacterFilter f;
  f.exact_order = g;
  f.primitive_only = primitive_only;
  for (const auto q : q_candidates) {
    ++best.q_examined;
    const GroupPtr group = build_group(q, table);
    bool done = false;
    for_each_character(group, f, [&](const DirichletCharacter& chi) {
      ++best.characters_examined;
      const Agreement a = agreement(chi, g, psi, P, table);
      if (!best.chi || a.score() > best.score.score()) {
        best.q = q;
        best.chi = std::make_shared<const DirichletCharacter>(chi);
        best.score = a;
      }
      if (stop_at_perfect && a.perfect()) {
        done = true;
        return false;
      }
      return true;
    });
    if (done) break;
  }
  if (!best.chi) throw search_failure("build_chi: no order-" + std::to_string(g) + " character among candidates");
  return best;
}

struct DecompositionReport {
  double y = 0.0, P = 0.0;
  std::uint64_t m = 0, k = 0, k_star = 0, g_star = 0, g = 0;
  double S_exact = 0.0;
  double main_term = 0.0;         // (1 - delta_g) G(pi/(g k*)) log(log y / loglog m)
  double small_prime_term = 0.0;  // sum_{p <= P, p !| m} w(l_p)/p
  double residual = 0.0;
  bool has_with_sj = false;
  double with_sj_value = 0.0;     // (1-delta)G (loglog y + gamma + log(phi/m)) - sum_j S_j log(K/L)
  double with_sj_residual = 0.0;
};

inline double small_prime_term(const DirichletCharacter& psi, std::uint64_t g, double P, const PrimeTable& table) {
  const OddOrderParams op = odd_order_params(g, psi.order());
  const DirichletCharacter tilde = psi.pow(static_cast<std::int64_t>(std::gcd(op.k, g)));
  NeumaierSum s;
  for (const auto p : table.primes_up_to(static_cast<std::uint64_t>(std::max(0.0, std::floor(P))))) {
    const std::int64_t ell = tilde.angle_in_order(p);
    if (ell < 0) continue;
    s.add(cos_weight(ell, g, op.k_star, op.g_star) / static_cast<double>(p));
  }
  return s.value();
}

/// Exact S(y; psi, g) against the main term plus the small-prime term. With
/// `cma`, also evaluates the form with the S_j-weighted log(K/L) sum.
inline DecompositionReport spsig_decomposition(double y, const DirichletCharacter& psi, std::uint64_t g, double P,
                                               const PrimeTable& table, const CmaCalculator* cma = nullptr) {
  if (y < 16.0) throw domain_error("spsig_decomposition: y must be >= 16");
  const OddOrderParams op = odd_order_params(g, psi.order());
  DecompositionReport r;
  r.y = y;
  r.P = P;
  r.m = psi.modulus();
  r.k = op.k;
  r.k_star = op.k_star;
  r.g_star = op.g_star;
  r.g = g;
  r.S_exact = corr_sum(y, psi, g, table);
  const double x = pi / (static_cast<double>(g) * static_cast<double>(op.k_star));
  const double lead = (1.0 - op.delta) * taylor_G(x);
  const double md = static_cast<double>(r.m);
  r.main_term = lead * std::log(std::log(y) / std::log(std::log(md)));
  r.small_prime_term = small_prime_term(psi, g, P, table);
  r.residual = r.S_exact - r.main_term - r.small_prime_term;
  if (cma) {
    const DirichletCharacter tilde = psi.pow(static_cast<std::int64_t>(std::gcd(op.k, g)));
    const SjTable sj = sj_table(g, op.k_star, op.g_star, false);
    ComplexNeumaierSum s;
    for (std::uint64_t j = 1; j < op.k_star; ++j) {
      s.add(sj.values()[j] * cma->log_kl(tilde.pow(static_cast<std::int64_t>(j))));
    }
    const double phi = static_cast<double>(cma->group()->phi());
    r.has_with_sj = true;
    r.with_sj_value = lead * (std::log(std::log(y)) + static_cast<double>(euler_gamma) + std::log(phi / md)) -
                      s.value().real();
    r.with_sj_residual = r.S_exact - r.with_sj_value;
  }
  return r;
}

enum class Preset { desk, paper };

/// Pipeline knobs. Unset thresholds follow the preset as functions of m and M.
struct PipelineConfig {
  std::uint64_t M = 20000;
  std::optional<std::uint64_t> M_low;  // default M/2
  std::uint64_t g = 3;
  double delta = 0.2;
  Preset preset = Preset::desk;
  std::optional<double> T, N, P;
  double P_agree = 10.0;
  double Y = 1e6;
  std::uint64_t q_budget = 100000;
  bool products = false;
  bool primitive_only = true;
  double X = 0.0;  // > 0 adds the S_j form to the decomposition
  BujoldOptions bujold;

  std::uint64_t low() const { return M_low.value_or(M / 2); }

  // T: desk max(10, log m); paper (log m)/100.
  double T_for(std::uint64_t m) const {
    if (T) return *T;
    const double lm = std::log(static_cast<double>(m));
    return preset == Preset::desk ? std::max(10.0, lm) : lm / 100.0;
  }
  // N: desk ceil(loglog M); paper loglog M.
  double N_for() const {
    if (N) return *N;
    const double ll = std::log(std::log(static_cast<double>(M)));
    return preset == Preset::desk ? std::ceil(ll) : ll;
  }
  // P: desk 100 log m; paper max(3, (log m)/100).
  double P_for(std::uint64_t m) const {
    if (P) return *P;
    const double lm = std::log(static_cast<double>(m));
    return preset == Preset::desk ? 100.0 * lm : std::max(3.0, lm / 100.0);
  }

  std::uint64_t table_limit() const {
    const double need = std::max({static_cast<double>(M), Y, static_cast<double>(q_budget), P.value_or(0.0),
                                  100.0 * std::log(static_cast<double>(std::max<std::uint64_t>(M, 3))), P_agree, 100.0});
    return static_cast<std::uint64_t>(std::ceil(need));
  }
};

inline Preset parse_preset(const std::string& s) {
  if (s == "desk") return Preset::desk;
  if (s == "paper") return Preset::paper;
  throw domain_error("unknown preset '" + s + "' (expected desk or paper)");
}

inline std::string to_string(Preset p) { return p == Preset::desk ? "desk" : "paper"; }

/// Applies one key=value setting.
inline void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value) {
  auto num = [&](const std::string& v) {
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) throw domain_error("config: '" + key + "' needs a number, got '" + v + "'");
    return d;
  };
  auto whole = [&](const std::string& v) {
    const double d = num(v);
    if (d < 0 || d != std::floor(d)) throw domain_error("config: '" + key + "' needs a non-negative integer");
    return static_cast<std::uint64_t>(d);
  };
  auto flag = [&](const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw domain_error("config: '" + key + "' needs true/false");
  };
  if (key == "M") c.M = whole(value);
  else if (key == "M_low") c.M_low = whole(value);
  else if (key == "g") c.g = whole(value);
  else if (key == "delta") c.delta = num(value);
  else if (key == "preset") c.preset = parse_preset(value);
  else if (key == "T") c.T = num(value);
  else if (key == "N") c.N = num(value);
  else if (key == "P") c.P = num(value);
  else if (key == "P_agree") c.P_agree = num(value);
  else if (key == "Y") c.Y = num(value);
  else if (key == "q_budget") c.q_budget = whole(value);
  else if (key == "products") c.products = flag(value);
  else if (key == "primitive_only") c.primitive_only = flag(value);
  else if (key == "X") c.X = num(value);
  else if (key == "sampling") c.bujold.sampling = flag(value);
  else if (key == "sample_size") c.bujold.sample_size = whole(value);
  else if (key == "seed") c.bujold.seed = whole(value);
  else throw domain_error("config: unknown key '" + key + "'");
}

/// Reads "key = value" lines; '#' starts a comment.
inline void load_config(PipelineConfig& c, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw domain_error("config line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

struct StageRecord {
  std::string name;
  bool ok = false;
  std::string detail;
};

struct CandidateRow {
  std::string stage;
  std::string item;
  std::string metric;
  double value = 0.0;
};

struct ConstructionReport {
  PipelineConfig config;
  bool ok = false;
  std::string failed_stage;
  std::string message;
  std::vector<StageRecord> stages;
  std::vector<CandidateRow> candidates;

  // sifted primes
  std::size_t sifted_count = 0;
  std::size_t sifted_usable = 0;  // also gcd(m-1, g) = 1
  double sifted_prediction = 0.0;
  double sift_threshold = 0.0;

  // psi
  std::uint64_t m = 0;
  std::string m_minus_1;
  std::uint64_t pminus = 0;
  double T = 0.0, N = 0.0, P = 0.0;
  std::size_t bujold_count = 0;
  double bujold_predicted = 0.0;
  std::size_t m_attempts = 0;
  std::string psi_id;
  std::uint64_t k = 0;
  int psi_parity = 0;
  double max_small_arg = 0.0;
  std::uint64_t small_order_count = 0;

  // chi
  std::uint64_t q = 0;
  std::string chi_id;
  std::uint64_t chi_order = 0;
  std::uint64_t chi_conductor = 0;
  double agreement = 0.0;

  // distances
  std::optional<DecompositionReport> decomposition;
  double D2_Y = 0.0;
  double S_Y = 0.0;
  double prime_sum_Y = 0.0;      // sum_{p <= Y} 1/p
  double distance_residual = 0.0;   // D^2 - (loglog Y - S)
  double distance_exact_gap = 0.0;  // D^2 - (sum 1/p - S), >= 0
  double bookkeeping_bound = 0.0;
  bool bookkeeping_consistent = false;
  double Q = 0.0;
  double D2_Q = 0.0;
  double lower_bound_proxy = 0.0;
  double coupling_m_target = 0.0;  // sqrt(logloglog q), nan when undefined
};

struct DisagreementBookkeeping {
  double D2 = 0.0, S = 0.0, prime_sum = 0.0, bound = 0.0;
};

/// D(chi, psi; Y)^2 and S(Y; psi, g) with the disagreement bound
/// sum_{p <= Y, chi(p) not a maximizer} 2/p + sum_{p | qm} 1/p.
inline DisagreementBookkeeping disagreement_bookkeeping(const DirichletCharacter& chi, const DirichletCharacter& psi,
                                            std::uint64_t g, double Y, const PrimeTable& table) {
  const auto bound = static_cast<std::uint64_t>(std::floor(Y));
  if (bound > table.limit()) throw resource_error("disagreement_bookkeeping: prime table too short for Y");
  const auto w = weight_table(g, psi.order());
  const std::uint64_t k = psi.order(), q = chi.modulus(), m = psi.modulus();
  const auto ps = table.primes_up_to(bound);
  NeumaierSum d2, s, all, bnd;
  for (const auto p : ps) {
    const double inv = 1.0 / static_cast<double>(p);
    all.add(inv);
    const std::int64_t ell = psi.angle_in_order(p);
    const std::int64_t a = chi.angle_in_order(p);
    double re = 0.0;
    if (ell >= 0 && a >= 0) {
      // Re(chi(p) conj(psi(p))) = cos(2 pi (a/g - ell/k))
      re = unit_root(a * static_cast<std::int64_t>(k) - ell * static_cast<std::int64_t>(g),
                     static_cast<std::int64_t>(g * k)).real();
    }
    d2.add((1.0 - re) * inv);
    if (ell >= 0) s.add(w[static_cast<std::size_t>(ell)] * inv);
    if (!is_maximizer(a, g, ell, k)) bnd.add(2.0 * inv);
    if (q % p == 0 || m % p == 0) bnd.add(inv);
  }
  return {d2.value(), s.value(), all.value(), bnd.value()};
}

namespace detail {
inline void stage(ConstructionReport& r, const std::string& name, bool ok, const std::string& detail) {
  r.stages.push_back({name, ok, detail});
  if (!ok && r.failed_stage.empty()) {
    r.failed_stage = name;
    r.message = detail;
  }
}
}  // namespace detail

/// sifted primes -> Bujold search -> psi -> chi -> decomposition -> distance.
/// Stage failures are recorded in the report rather than thrown.
inline ConstructionReport run_pipeline(const PipelineConfig& cfg, const PrimeTable& table) {
  ConstructionReport r;
  r.config = cfg;
  if (cfg.g < 3 || cfg.g % 2 == 0) throw domain_error("run_pipeline: g must be odd and >= 3");
  // stage 1
  SiftedReport sifted;
  try {
    sifted = find_sifted_primes(cfg.low(), cfg.M, cfg.delta, table);
  } catch (const std::exception& e) {
    detail::stage(r, "sifted_primes", false, e.what());
    return r;
  }
  r.sifted_count = sifted.passing.size();
  r.sifted_prediction = sifted.prediction;
  r.sift_threshold = sifted.threshold;
  std::vector<const SiftedPrime*> usable;
  for (const auto& s : sifted.passing) {
    r.candidates.push_back({"sifted_primes", std::to_string(s.m), "pminus", static_cast<double>(s.pminus)});
    if (std::gcd(s.m - 1, cfg.g) == 1) usable.push_back(&s);
  }
  r.sifted_usable = usable.size();
  if (usable.empty()) {
    detail::stage(r, "sifted_primes", false,
                  "no prime m in (" + std::to_string(cfg.low()) + ", " + std::to_string(cfg.M) +
                      "] with 2||(m-1), P^-((m-1)/2) > M^delta and gcd(m-1, g) = 1");
    return r;
  }
  detail::stage(r, "sifted_primes", true,
                std::to_string(usable.size()) + " usable of " + std::to_string(r.sifted_count) + " sifted");

  // stages 2-3
  std::optional<PsiCandidate> psi;
  std::string last_error;
  for (const SiftedPrime* s : usable) {
    ++r.m_attempts;
    const double T = cfg.T_for(s->m), N = cfg.N_for();
    try {
      const BujoldResult search = bujold_search(s->m, T, N, table, cfg.bujold);
      r.candidates.push_back({"bujold", std::to_string(s->m), "count", static_cast<double>(search.candidates.size())});
      PsiCandidate c = pick_psi(search, cfg.g);
      psi = std::move(c);
      r.m = s->m;
      r.m_minus_1 = s->m_minus_1.to_string();
      r.pminus = s->pminus;
      r.T = T;
      r.N = N;
      r.P = cfg.P_for(s->m);
      r.bujold_count = search.candidates.size();
      r.bujold_predicted = search.predicted;
      break;
    } catch (const search_failure& e) {
      last_error = e.what();
    } catch (const resource_error& e) {
      last_error = e.what();
    }
  }
  if (!psi) {
    detail::stage(r, "bujold_search", false,
                  "no odd psi of large order passed the small-prime test in " + std::to_string(r.m_attempts) +
                      " sifted primes (last: " + last_error + ")");
    return r;
  }
  detail::stage(r, "bujold_search", true,
                "m=" + std::to_string(r.m) + " after " + std::to_string(r.m_attempts) + " attempt(s), " +
                    std::to_string(r.bujold_count) + " candidates");
  const DirichletCharacter& psi_chr = *psi->psi;
  r.psi_id = psi_chr.id();
  r.k = psi->k;
  r.psi_parity = psi_chr.parity();
  r.max_small_arg = psi->max_small_arg;
  r.small_order_count = count_small_order(r.m);
  detail::stage(r, "pick_psi", true, "psi=" + r.psi_id + " k=" + std::to_string(r.k));

  // stage 4
  std::optional<ChiChoice> chi;
  try {
    const auto qs = default_q_candidates(cfg.g, cfg.q_budget, cfg.products, table);
    chi = build_chi(psi_chr, cfg.g, cfg.P_agree, qs, table, cfg.primitive_only);
  } catch (const std::exception& e) {
    detail::stage(r, "build_chi", false, e.what());
    return r;
  }
  r.q = chi->q;
  r.chi_id = chi->chi->id();
  r.chi_order = chi->chi->order();
  r.chi_conductor = chi->chi->conductor();
  r.agreement = chi->score.score();
  r.candidates.push_back({"build_chi", r.chi_id, "agreement", r.agreement});
  detail::stage(r, "build_chi", true,
                "q=" + std::to_string(r.q) + " agreement=" + format_sig12(r.agreement) + " after " +
                    std::to_string(chi->q_examined) + " moduli");

  // stage 5
  try {
    std::unique_ptr<CmaCalculator> cma;
    if (cfg.X > 0.0) cma = std::make_unique<CmaCalculator>(r.m, cfg.X, table);
    r.decomposition = spsig_decomposition(cfg.Y, psi_chr, cfg.g, r.P, table, cma.get());
  } catch (const std::exception& e) {
    detail::stage(r, "spsig_decomposition", false, e.what());
    return r;
  }
  detail::stage(r, "spsig_decomposition", true, "residual=" + format_sig12(r.decomposition->residual));

  // stage 6
  try {
    const DirichletCharacter& chi_chr = *chi->chi;
    const DisagreementBookkeeping b = disagreement_bookkeeping(chi_chr, psi_chr, cfg.g, cfg.Y, table);
    r.D2_Y = b.D2;
    r.S_Y = b.S;
    r.prime_sum_Y = b.prime_sum;
    r.distance_residual = b.D2 - (std::log(std::log(cfg.Y)) - b.S);
    r.distance_exact_gap = b.D2 - (b.prime_sum - b.S);
    r.bookkeeping_bound = b.bound;
    r.bookkeeping_consistent = std::isfinite(r.distance_residual) && std::abs(r.distance_residual) <= b.bound &&
                         r.distance_exact_gap >= -1e-12 && r.distance_exact_gap <= b.bound + 1e-12;
    r.Q = std::log(static_cast<double>(r.q));
    const auto f = PrimeFunction::from_character(chi_chr), h = PrimeFunction::from_character(psi_chr);
    r.D2_Q = distance2(f, h, r.Q, table);
    const double md = static_cast<double>(r.m);
    r.lower_bound_proxy = std::sqrt(static_cast<double>(r.q) * md) / (md - 1.0) * std::log(r.Q) * std::exp(-r.D2_Q) /
                          std::sqrt(static_cast<double>(r.q));
    const double lll = std::log(std::log(std::log(static_cast<double>(r.q))));
    r.coupling_m_target = lll > 0.0 ? std::sqrt(lll) : std::numeric_limits<double>::quiet_NaN();
  } catch (const std::exception& e) {
    detail::stage(r, "distance", false, e.what());
    return r;
  }
  detail::stage(r, "distance", true, "D2(Y)=" + format_sig12(r.D2_Y));
  r.ok = true;
  return r;
}

inline ConstructionReport run_pipeline(const PipelineConfig& cfg) {
  const PrimeTable table(cfg.table_limit());
  return run_pipeline(cfg, table);
}

}  // namespace charlab
