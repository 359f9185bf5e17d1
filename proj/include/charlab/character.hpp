#pragma once

// Dirichlet characters modulo q, represented by exponent vectors over the
// CRT generators of (Z/q)^*, with exact root-of-unity values.

#include <charconv>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "charlab/errors.hpp"
#include "charlab/numeric.hpp"
#include "charlab/primes.hpp"

namespace charlab {

inline std::uint64_t inverse_mod(std::uint64_t a, std::uint64_t m) {
  std::int64_t old_r = static_cast<std::int64_t>(a % m), r = static_cast<std::int64_t>(m);
  std::int64_t old_s = 1, s = 0;
  while (r != 0) {
    const std::int64_t quotient = old_r / r;
    std::int64_t tmp = old_r - quotient * r;
    old_r = r;
    r = tmp;
    tmp = old_s - quotient * s;
    old_s = s;
    s = tmp;
  }
  if (old_r != 1) throw domain_error("inverse_mod: " + std::to_string(a) + " not invertible mod " + std::to_string(m));
  return static_cast<std::uint64_t>(mod_floor(old_s, static_cast<std::int64_t>(m)));
}

/// A value in mu_infinity ∪ {0}: e(num/den) with num/den reduced, or zero.
struct UnitValue {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  bool zero = false;

  static UnitValue zero_value() { return {0, 1, true}; }
  static UnitValue one() { return {0, 1, false}; }
  static UnitValue root(std::uint64_t num, std::uint64_t den) {
    num %= den;
    const std::uint64_t g = std::gcd(num, den);
    return {num / g, den / g, false};
  }

  bool is_one() const { return !zero && num == 0; }
  // Multiplicative order of the root (0 for the zero value).
  std::uint64_t order() const { return zero ? 0 : den; }

  UnitValue conj() const { return zero ? *this : root(den - num, den); }

  friend UnitValue operator*(const UnitValue& a, const UnitValue& b) {
    if (a.zero || b.zero) return zero_value();
    const std::uint64_t l = std::lcm(a.den, b.den);
    return root(a.num * (l / a.den) + b.num * (l / b.den), l);
  }
  friend bool operator==(const UnitValue&, const UnitValue&) = default;

  std::complex<double> to_complex() const {
    if (zero) return {0.0, 0.0};
    return unit_root(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
  }

  std::string to_string() const {
    if (zero) return "0";
    if (num == 0) return "1";
    return "e(" + std::to_string(num) + "/" + std::to_string(den) + ")";
  }
};

/// Exact sum of roots of unity, for multisets that are a multiple of a full
/// group mu_d (the only shape character orthogonality sums take).
class RootOfUnityMultiset {
 public:
  void add(const UnitValue& v) {
    if (v.zero) return;
    ++counts_[{v.num, v.den}];
  }

  // c for c copies of 1, 0 for c copies of mu_d (d > 1), nullopt otherwise.
  std::optional<std::int64_t> exact_sum() const {
    if (counts_.empty()) return 0;
    std::uint64_t l = 1;
    for (const auto& [key, _] : counts_) l = std::lcm(l, key.second);
    const std::uint64_t d = counts_.size();
    if (l % d != 0) return std::nullopt;
    const std::uint64_t step = l / d;
    const std::uint64_t c = counts_.begin()->second;
    for (const auto& [key, count] : counts_) {
      const std::uint64_t scaled = key.first * (l / key.second);
      if (scaled % step != 0 || count != c) return std::nullopt;
    }
    if (d == 1) return static_cast<std::int64_t>(c);
    return 0;
  }

  std::complex<double> numeric_sum() const {
    ComplexNeumaierSum s;
    for (const auto& [key, count] : counts_) {
      s.add(static_cast<double>(count) * unit_root(static_cast<std::int64_t>(key.first), static_cast<std::int64_t>(key.second)));
    }
    return s.value();
  }

 private:
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> counts_;
};

struct GroupComponent {
  std::uint64_t prime;
  std::uint32_t exponent;
  std::uint64_t modulus;  // prime^exponent
  std::size_t first_generator;
  std::size_t generator_count;
};

/// (Z/q)^* decomposed by CRT into prime-power components, each with its
/// generators and full discrete-log tables.
class CharacterGroup {
 public:
  static constexpr std::uint64_t max_component_modulus = DiscreteLogTable::max_modulus;

  CharacterGroup(std::uint64_t q, const PrimeTable& table) : modulus_(q) {
    if (q == 0) throw domain_error("CharacterGroup: modulus must be >= 1");
    const Factorization f = factorize(q, table);
    phi_ = f.phi();
    for (const auto& [p, e] : f.factors) {
      std::uint64_t pe = 1;
      for (std::uint32_t i = 0; i < e; ++i) pe *= p;
      if (pe > max_component_modulus) {
        throw resource_error("CharacterGroup: component modulus " + std::to_string(pe) + " exceeds log-table cap");
      }
      const auto gens = unit_group_generators(pe, table);
      components_.push_back({p, e, pe, generators_.size(), gens.size()});
      const std::uint64_t cofactor = q / pe;
      const std::uint64_t inv = cofactor == 1 ? 0 : inverse_mod(cofactor % pe, pe);
      for (const auto& g : gens) {
        generators_.push_back(g);
        generator_component_.push_back(components_.size() - 1);
        // lift: G = g mod pe, G = 1 mod cofactor
        std::uint64_t lifted = g.value;
        if (cofactor != 1) {
          const std::uint64_t t = mul_mod((g.value + pe - 1) % pe, inv, pe);
          lifted = (1 + cofactor * t) % q;
        }
        lifted_.push_back(lifted);
      }
      build_logs(components_.back());
    }
    exponent_ = 1;
    for (const auto& g : generators_) exponent_ = std::lcm(exponent_, g.order);
  }

  std::uint64_t modulus() const { return modulus_; }
  std::uint64_t phi() const { return phi_; }
  // Exponent of the group: lcm of generator orders (common angle denominator).
  std::uint64_t exponent() const { return exponent_; }
  std::size_t generator_count() const { return generators_.size(); }
  std::span<const Generator> generators() const { return generators_; }
  std::uint64_t generator_order(std::size_t i) const { return generators_[i].order; }
  // Generator i lifted to Z/q (trivial on the other components).
  std::span<const std::uint64_t> lifted_generators() const { return lifted_; }
  std::span<const GroupComponent> components() const { return components_; }
  std::size_t component_of(std::size_t generator) const { return generator_component_[generator]; }

  bool is_unit(std::uint64_t n) const { return std::gcd(n % modulus_, modulus_) == 1 || modulus_ == 1; }

  // Discrete log of n along generator i (n must be a unit).
  std::uint32_t log(std::size_t generator, std::uint64_t n) const {
    const auto& comp = components_[generator_component_[generator]];
    return logs_[generator][n % comp.modulus];
  }

  // Writes all generator logs of n; false if n is not a unit.
  bool logs(std::uint64_t n, std::span<std::uint32_t> out) const {
    if (!is_unit(n)) return false;
    for (std::size_t i = 0; i < generators_.size(); ++i) out[i] = log(i, n);
    return true;
  }

 private:
  void build_logs(const GroupComponent& c) {
    const std::size_t base = c.first_generator;
    for (std::size_t i = 0; i < c.generator_count; ++i) logs_.emplace_back(c.modulus, 0u);
    if (c.generator_count == 1) {
      const std::uint64_t g = generators_[base].value;
      std::uint64_t x = 1;
      for (std::uint64_t j = 0; j < generators_[base].order; ++j) {
        logs_[base][x] = static_cast<std::uint32_t>(j);
        x = mul_mod(x, g, c.modulus);
      }
    } else if (c.generator_count == 2) {
      // 2^e: x = (-1)^a 5^b
      const std::uint64_t half = generators_[base + 1].order;
      std::uint64_t five = 1;
      for (std::uint64_t b = 0; b < half; ++b) {
        logs_[base][five] = 0;
        logs_[base + 1][five] = static_cast<std::uint32_t>(b);
        const std::uint64_t neg = c.modulus - five;
        logs_[base][neg] = 1;
        logs_[base + 1][neg] = static_cast<std::uint32_t>(b);
        five = mul_mod(five, 5, c.modulus);
      }
    }
  }

  std::uint64_t modulus_;
  std::uint64_t phi_ = 1;
  std::uint64_t exponent_ = 1;
  std::vector<GroupComponent> components_;
  std::vector<Generator> generators_;
  std::vector<std::size_t> generator_component_;
  std::vector<std::uint64_t> lifted_;
  std::vector<std::vector<std::uint32_t>> logs_;
};

using GroupPtr = std::shared_ptr<const CharacterGroup>;

inline GroupPtr build_group(std::uint64_t q, const PrimeTable& table) {
  return std::make_shared<const CharacterGroup>(q, table);
}

/// A Dirichlet character mod q: chi(prod G_i^{l_i}) = e(sum x_i l_i / ord_i).
class DirichletCharacter {
 public:
  DirichletCharacter(GroupPtr group, std::vector<std::uint64_t> exponents)
      : group_(std::move(group)), exps_(std::move(exponents)) {
    if (exps_.size() != group_->generator_count()) {
      throw domain_error("DirichletCharacter: expected " + std::to_string(group_->generator_count()) +
                         " exponents, got " + std::to_string(exps_.size()));
    }
    const std::uint64_t R = group_->exponent();
    coef_.resize(exps_.size());
    for (std::size_t i = 0; i < exps_.size(); ++i) {
      const std::uint64_t ord = group_->generator_order(i);
      exps_[i] %= ord;
      coef_[i] = exps_[i] * (R / ord) % R;
    }
  }

  static DirichletCharacter principal(GroupPtr group) {
    const std::size_t r = group->generator_count();
    return DirichletCharacter(std::move(group), std::vector<std::uint64_t>(r, 0));
  }

  const CharacterGroup& group() const { return *group_; }
  const GroupPtr& group_ptr() const { return group_; }
  std::uint64_t modulus() const { return group_->modulus(); }
  std::span<const std::uint64_t> exponents() const { return exps_; }
  // Per-generator angle coefficients over the group exponent R.
  std::span<const std::uint64_t> angle_coefficients() const { return coef_; }

  bool is_principal() const {
    for (auto x : exps_) {
      if (x != 0) return false;
    }
    return true;
  }

  std::uint64_t order() const {
    std::uint64_t o = 1;
    for (std::size_t i = 0; i < exps_.size(); ++i) {
      const std::uint64_t ord = group_->generator_order(i);
      o = std::lcm(o, ord / std::gcd(ord, exps_[i]));
    }
    return o;
  }

  // chi(-1) as +1 or -1.
  int parity() const {
    unsigned bit = 0;
    for (const auto& c : group_->components()) {
      if (c.generator_count == 0) continue;
      // -1 is g^{ord/2} for cyclic components and (-1)^1 5^0 for 2^e.
      bit ^= static_cast<unsigned>(exps_[c.first_generator] & 1u);
    }
    return bit ? -1 : 1;
  }
  bool is_odd() const { return parity() == -1; }
  bool is_even() const { return parity() == 1; }

  // Least f | q inducing chi, computed component-wise from the p-adic
  // valuation of the exponent's order.
  std::uint64_t conductor() const {
    std::uint64_t f = 1;
    for (const auto& c : group_->components()) {
      if (c.generator_count == 0) continue;
      const std::size_t i = c.first_generator;
      if (c.prime != 2) {
        const std::uint64_t ord = group_->generator_order(i);
        if (exps_[i] == 0) continue;
        std::uint64_t o = ord / std::gcd(ord, exps_[i]);
        f *= c.prime;
        while (o % c.prime == 0) {
          o /= c.prime;
          f *= c.prime;
        }
      } else if (c.generator_count == 1) {
        if (exps_[i] != 0) f *= 4;
      } else {
        const std::uint64_t ord5 = group_->generator_order(i + 1);
        const std::uint64_t b = exps_[i + 1];
        if (b != 0) {
          f *= 4 * (ord5 / std::gcd(ord5, b));
        } else if (exps_[i] != 0) {
          f *= 4;
        }
      }
    }
    return f;
  }
  bool is_primitive() const { return conductor() == modulus(); }

  // Angle numerator of chi(n) over the group exponent R, or -1 when
  // gcd(n, q) > 1.
  std::int64_t angle(std::uint64_t n) const {
    if (!group_->is_unit(n)) return -1;
    const std::uint64_t R = group_->exponent();
    std::uint64_t a = 0;
    for (std::size_t i = 0; i < exps_.size(); ++i) a = (a + coef_[i] * group_->log(i, n)) % R;
    return static_cast<std::int64_t>(a);
  }

  // Exponent l in chi(n) = e(l/k) with k = order(); -1 when chi(n) = 0.
  std::int64_t angle_in_order(std::uint64_t n) const {
    const std::int64_t a = angle(n);
    if (a < 0) return a;
    const std::uint64_t k = order();
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) / (group_->exponent() / k));
  }

  UnitValue value(std::uint64_t n) const {
    const std::int64_t a = angle(n);
    if (a < 0) return UnitValue::zero_value();
    return UnitValue::root(static_cast<std::uint64_t>(a), group_->exponent());
  }

  std::complex<double> value_complex(std::uint64_t n) const { return value(n).to_complex(); }

  DirichletCharacter pow(std::int64_t j) const {
    std::vector<std::uint64_t> e(exps_.size());
    for (std::size_t i = 0; i < exps_.size(); ++i) {
      const auto ord = static_cast<std::int64_t>(group_->generator_order(i));
      const std::int64_t jr = mod_floor(j, ord);
      e[i] = static_cast<std::uint64_t>(static_cast<unsigned __int128>(exps_[i]) * static_cast<std::uint64_t>(jr) %
                                        static_cast<std::uint64_t>(ord));
    }
    return DirichletCharacter(group_, std::move(e));
  }
  DirichletCharacter conj() const { return pow(-1); }

  friend DirichletCharacter operator*(const DirichletCharacter& a, const DirichletCharacter& b) {
    if (a.group_->modulus() != b.group_->modulus()) throw domain_error("character product across moduli");
    std::vector<std::uint64_t> e(a.exps_.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = a.exps_[i] + b.exps_[i];
    return DirichletCharacter(a.group_, std::move(e));
  }

  friend bool operator==(const DirichletCharacter& a, const DirichletCharacter& b) {
    return a.modulus() == b.modulus() && a.exps_ == b.exps_;
  }

  // Lexicographic rank of the exponent vector (first generator most significant).
  std::uint64_t index() const {
    std::uint64_t r = 0;
    for (std::size_t i = 0; i < exps_.size(); ++i) r = r * group_->generator_order(i) + exps_[i];
    return r;
  }

  // "q:e1,e2,..."
  std::string id() const {
    std::string s = std::to_string(modulus()) + ":";
    for (std::size_t i = 0; i < exps_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(exps_[i]);
    }
    return s;
  }

 private:
  GroupPtr group_;
  std::vector<std::uint64_t> exps_;
  std::vector<std::uint64_t> coef_;
};

namespace detail {
inline std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw domain_error("malformed " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}
}  // namespace detail

inline std::uint64_t parse_character_modulus(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw domain_error("character spec must look like q:e1,e2,...");
  return detail::parse_u64(text.substr(0, colon), "character modulus");
}

/// Parses "q:e1,e2,..." against a group of modulus q.
inline DirichletCharacter parse_character(std::string_view text, GroupPtr group) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw domain_error("character spec must look like q:e1,e2,...");
  if (detail::parse_u64(text.substr(0, colon), "character modulus") != group->modulus()) {
    throw domain_error("character spec modulus does not match group");
  }
  std::vector<std::uint64_t> exps;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    exps.push_back(detail::parse_u64(rest.substr(0, comma), "character exponent"));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
    if (rest.empty()) throw domain_error("character spec has a trailing comma");
  }
  for (std::size_t i = 0; i < exps.size() && i < group->generator_count(); ++i) {
    if (exps[i] >= group->generator_order(i)) throw domain_error("character exponent out of range");
  }
  return DirichletCharacter(std::move(group), std::move(exps));
}

inline DirichletCharacter parse_character(std::string_view text, const PrimeTable& table) {
  return parse_character(text, build_group(parse_character_modulus(text), table));
}

struct CharacterFilter {
  std::optional<std::uint64_t> order_divides;
  std::optional<std::uint64_t> exact_order;
  std::optional<int> parity;  // +1 even, -1 odd
  bool primitive_only = false;
  bool non_principal = false;
};

/// Visits every character passing the filter, in lexicographic order of
/// exponent vectors. Returning false from the visitor stops the walk.
template <typename Visitor>
void for_each_character(const GroupPtr& group, const CharacterFilter& filter, Visitor&& visit) {
  const std::size_t r = group->generator_count();
  std::vector<std::uint64_t> step(r, 1), count(r);
  std::optional<std::uint64_t> divides = filter.order_divides;
  if (filter.exact_order) {
    divides = divides ? std::gcd(*divides, *filter.exact_order) : *filter.exact_order;
  }
  for (std::size_t i = 0; i < r; ++i) {
    const std::uint64_t ord = group->generator_order(i);
    if (divides) {
      const std::uint64_t g = std::gcd(ord, *divides);
      step[i] = ord / g;
      count[i] = g;
    } else {
      count[i] = ord;
    }
  }
  // q = 1, 2 have only the principal character and no primitive non-principal one.
  std::vector<std::uint64_t> t(r, 0);
  for (;;) {
    std::vector<std::uint64_t> exps(r);
    for (std::size_t i = 0; i < r; ++i) exps[i] = t[i] * step[i];
    DirichletCharacter chi(group, std::move(exps));
    bool keep = true;
    if (filter.non_principal && chi.is_principal()) keep = false;
    if (keep && filter.exact_order && chi.order() != *filter.exact_order) keep = false;
    if (keep && filter.parity && chi.parity() != *filter.parity) keep = false;
    if (keep && filter.primitive_only && (!chi.is_primitive() || group->modulus() <= 2)) keep = false;
    if (keep) {
      if constexpr (std::is_same_v<std::invoke_result_t<Visitor, const DirichletCharacter&>, bool>) {
        if (!visit(static_cast<const DirichletCharacter&>(chi))) return;
      } else {
        visit(static_cast<const DirichletCharacter&>(chi));
      }
    }
    std::size_t i = r;
    while (i > 0) {
      --i;
      if (++t[i] < count[i]) break;
      t[i] = 0;
      if (i == 0) return;
    }
    if (r == 0) return;
  }
}

inline std::vector<DirichletCharacter> enumerate_characters(const GroupPtr& group,
                                                            const CharacterFilter& filter = {}) {
  std::vector<DirichletCharacter> out;
  for_each_character(group, filter, [&](const DirichletCharacter& chi) { out.push_back(chi); });
  return out;
}

}  // namespace charlab
