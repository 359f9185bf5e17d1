#pragma once

// M(chi) = max_t |sum_{n<=t} chi(n)| over one period, plus bulk scans.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "charlab/character.hpp"
#include "charlab/errors.hpp"
#include "charlab/numeric.hpp"
#include "charlab/parallel.hpp"
#include "charlab/pretentious.hpp"
#include "charlab/primes.hpp"

namespace charlab {

// Magnitudes closer than this count as equal when locating argmax_t.
inline constexpr double argmax_tolerance = 1e-9;

struct SumProfile {
  std::uint64_t q = 0;
  std::string id;
  double M = 0.0;
  std::uint64_t argmax_t = 0;
  double normalized = 0.0;  // M / sqrt(q)
  std::vector<std::complex<double>> partial_sums;  // S(1..q), only when retained
};

/// Evaluates partial sums for many characters of one modulus. Discrete logs
/// of 1..q and the e(a/R) twiddles are computed once and shared.
class PeriodSummer {
 public:
  explicit PeriodSummer(GroupPtr group) : group_(std::move(group)) {
    const std::uint64_t q = group_->modulus();
    const std::size_t r = group_->generator_count();
    logs_.assign(q * r, 0);
    unit_.assign(q, 0);
    for (std::uint64_t n = 1; n <= q; ++n) {
      const std::uint64_t res = n % q;
      if (!group_->is_unit(res)) continue;
      unit_[n - 1] = 1;
      for (std::size_t i = 0; i < r; ++i) logs_[(n - 1) * r + i] = group_->log(i, res);
    }
    const std::uint64_t R = group_->exponent();
    twiddle_.resize(R);
    for (std::uint64_t a = 0; a < R; ++a) {
      twiddle_[a] = unit_root(static_cast<std::int64_t>(a), static_cast<std::int64_t>(R));
    }
  }

  const CharacterGroup& group() const { return *group_; }

  SumProfile profile(const DirichletCharacter& chi, bool retain = false) const {
    if (chi.modulus() != group_->modulus()) throw domain_error("PeriodSummer: character modulus mismatch");
    if (chi.is_principal() || group_->modulus() < 3) {
      throw domain_error("max_partial_sum: needs a non-principal character of modulus >= 3");
    }
    const std::uint64_t q = group_->modulus();
    const std::uint64_t R = group_->exponent();
    const std::size_t r = group_->generator_count();
    // Per-generator angle tables: angle contribution of log value l.
    std::vector<std::vector<std::uint32_t>> tables(r);
    const auto coef = chi.angle_coefficients();
    for (std::size_t i = 0; i < r; ++i) {
      const std::uint64_t ord = group_->generator_order(i);
      tables[i].resize(ord);
      std::uint64_t a = 0;
      for (std::uint64_t l = 0; l < ord; ++l) {
        tables[i][l] = static_cast<std::uint32_t>(a);
        a += coef[i];
        if (a >= R) a -= R;
      }
    }
    SumProfile out;
    out.q = q;
    out.id = chi.id();
    if (retain) out.partial_sums.reserve(q);
    // At most q unit terms, so plain accumulation stays within q * eps.
    double re = 0.0, im = 0.0;
    double best2 = -1.0, arg_mag = -1.0, arg_thr2 = 0.0;
    std::uint64_t argmax = 0;
    for (std::uint64_t n = 1; n <= q; ++n) {
      if (unit_[n - 1]) {
        std::uint64_t a = 0;
        const std::uint32_t* lg = &logs_[(n - 1) * r];
        for (std::size_t i = 0; i < r; ++i) {
          a += tables[i][lg[i]];
          if (a >= R) a -= R;
        }
        re += twiddle_[a].real();
        im += twiddle_[a].imag();
      }
      if (retain) out.partial_sums.emplace_back(re, im);
      const double mag2 = re * re + im * im;
      if (argmax == 0 || mag2 > arg_thr2) {
        arg_mag = std::sqrt(mag2);
        arg_thr2 = (arg_mag + argmax_tolerance) * (arg_mag + argmax_tolerance);
        argmax = n;
      }
      if (mag2 > best2) best2 = mag2;
    }
    const double best = std::sqrt(best2);
    out.M = best;
    out.argmax_t = argmax;
    out.normalized = best / std::sqrt(static_cast<double>(q));
    return out;
  }

 private:
  GroupPtr group_;
  std::vector<std::uint32_t> logs_;
  std::vector<unsigned char> unit_;
  std::vector<std::complex<double>> twiddle_;
};

inline SumProfile max_partial_sum(const DirichletCharacter& chi, bool retain = false) {
  if (chi.is_principal() || chi.modulus() < 3) {
    throw domain_error("max_partial_sum: needs a non-principal character of modulus >= 3");
  }
  return PeriodSummer(chi.group_ptr()).profile(chi, retain);
}

struct ScanRecord {
  std::uint64_t q = 0;
  std::string id;
  std::uint64_t order = 0;
  int parity = 1;
  std::uint64_t conductor = 0;
  double M = 0.0;
  double M_over_sqrtq = 0.0;
  double envelope_ratio = 0.0;  // nan unless the order is odd and >= 3
  double running_max = 0.0;     // running max of M_over_sqrtq over the scan so far
};

// M / (sqrt(q) (loglog q)^{1 - delta_g}) with g the order of chi.
inline double envelope_ratio(double M, std::uint64_t q, std::uint64_t order) {
  if (order < 3 || order % 2 == 0 || q < 3) return std::numeric_limits<double>::quiet_NaN();
  const double ll = std::log(std::log(static_cast<double>(q)));
  return M / (std::sqrt(static_cast<double>(q)) * std::pow(ll, 1.0 - delta_g(order)));
}

inline ScanRecord make_record(const DirichletCharacter& chi, const SumProfile& prof) {
  ScanRecord r;
  r.q = chi.modulus();
  r.id = prof.id;
  r.order = chi.order();
  r.parity = chi.parity();
  r.conductor = chi.conductor();
  r.M = prof.M;
  r.M_over_sqrtq = prof.normalized;
  r.envelope_ratio = envelope_ratio(prof.M, r.q, r.order);
  return r;
}

struct ScanLimits {
  std::uint64_t max_modulus = 10'000'000;
  // Cap on sum of q over scanned characters (the work of the scan).
  std::uint64_t max_work = 200'000'000'000ULL;
};

struct ScanResult {
  std::vector<ScanRecord> records;
  bool truncated = false;
  std::uint64_t last_complete_q = 0;
  std::string truncation_reason;
};

/// Scans every character passing `filter` for q in [q_lo, q_hi]. Work per q
/// runs in parallel over characters; records come out in (q, index) order.
inline ScanResult scan_all(std::uint64_t q_lo, std::uint64_t q_hi, const CharacterFilter& filter,
                           const PrimeTable& table, const ScanLimits& limits = {}) {
  ScanResult out;
  CharacterFilter f = filter;
  f.non_principal = true;
  std::uint64_t work = 0;
  double running = 0.0;
  for (std::uint64_t q = std::max<std::uint64_t>(q_lo, 3); q <= q_hi; ++q) {
    if (q > limits.max_modulus) {
      out.truncated = true;
      out.truncation_reason = "modulus " + std::to_string(q) + " above limit " + std::to_string(limits.max_modulus);
      break;
    }
    const GroupPtr group = build_group(q, table);
    const auto chars = enumerate_characters(group, f);
    if (chars.empty()) {
      out.last_complete_q = q;
      continue;
    }
    if (work + q * chars.size() > limits.max_work) {
      out.truncated = true;
      out.truncation_reason = "work budget " + std::to_string(limits.max_work) + " exhausted at q=" + std::to_string(q);
      break;
    }
    work += q * chars.size();
    const PeriodSummer summer(group);
    std::vector<ScanRecord> recs(chars.size());
    parallel_for(chars.size(), [&](std::size_t i) { recs[i] = make_record(chars[i], summer.profile(chars[i])); });
    for (auto& r : recs) {
      running = std::max(running, r.M_over_sqrtq);
      r.running_max = running;
      out.records.push_back(std::move(r));
    }
    out.last_complete_q = q;
  }
  return out;
}

/// Characters of exact order g (odd, >= 3) with q in [q_lo, q_hi].
inline ScanResult scan_family(std::uint64_t q_lo, std::uint64_t q_hi, std::uint64_t g, bool primitive_only,
                              const PrimeTable& table, const ScanLimits& limits = {}) {
  if (g < 3 || g % 2 == 0) throw domain_error("scan_family: g must be odd and >= 3");
  CharacterFilter f;
  f.exact_order = g;
  f.primitive_only = primitive_only;
  return scan_all(q_lo, q_hi, f, table, limits);
}

struct PolyaVinogradovReport {
  std::size_t checked = 0;
  std::vector<ScanRecord> violations;
  double max_ratio = 0.0;  // max of M / (sqrt(q) log q)
  bool ok() const { return violations.empty(); }
};

inline PolyaVinogradovReport polya_vinogradov_check(const std::vector<ScanRecord>& records) {
  PolyaVinogradovReport rep;
  for (const auto& r : records) {
    const double q = static_cast<double>(r.q);
    const double bound = std::sqrt(q) * std::log(q);
    ++rep.checked;
    rep.max_ratio = std::max(rep.max_ratio, r.M / bound);
    if (r.M > bound) rep.violations.push_back(r);
  }
  return rep;
}

}  // namespace charlab
