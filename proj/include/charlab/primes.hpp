#pragma once

// Prime sieving, factorization, primitive roots and discrete logarithms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "charlab/errors.hpp"

namespace charlab {

inline std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

inline std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  if (m == 1) return 0;
  std::uint64_t result = 1;
  base %= m;
  while (exp > 0) {
    if (exp & 1) result = mul_mod(result, base, m);
    base = mul_mod(base, base, m);
    exp >>= 1;
  }
  return result;
}

// Deterministic Miller-Rabin for all 64-bit n.
inline bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  for (std::uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    std::uint64_t x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < r; ++i) {
      x = mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

/// Primes up to an inclusive limit, with a least-prime-factor array.
///
/// The least-prime-factor array covers n <= min(limit, factor_array_cap);
/// smallest_factor() falls back to trial division by the listed primes above
/// that, so it is defined on the whole range.
class PrimeTable {
 public:
  static constexpr std::uint64_t default_ceiling = 1'000'000'000;
  static constexpr std::uint64_t factor_array_cap = 20'000'000;

  explicit PrimeTable(std::uint64_t limit, std::uint64_t ceiling = default_ceiling) : limit_(limit) {
    if (limit < 2) throw domain_error("sieve limit must be at least 2 (table would be empty)");
    if (limit > ceiling) {
      throw resource_error("sieve limit " + std::to_string(limit) + " exceeds ceiling " +
                           std::to_string(ceiling));
    }
    linear_sieve(std::min(limit, factor_array_cap));
    if (limit > factor_array_cap) segmented_extend(factor_array_cap, limit);
  }

  std::uint64_t limit() const { return limit_; }
  std::span<const std::uint32_t> primes() const { return primes_; }
  std::size_t size() const { return primes_.size(); }
  std::uint32_t operator[](std::size_t i) const { return primes_[i]; }

  // Number of primes <= x (x may exceed limit only up to the table's reach).
  std::size_t count_up_to(std::uint64_t x) const {
    return static_cast<std::size_t>(std::upper_bound(primes_.begin(), primes_.end(), x) - primes_.begin());
  }

  // Prefix of the prime list consisting of primes <= x.
  std::span<const std::uint32_t> primes_up_to(std::uint64_t x) const {
    return std::span<const std::uint32_t>(primes_).first(count_up_to(x));
  }

  bool is_prime(std::uint64_t n) const {
    if (n < 2) return false;
    if (n < lpf_.size()) return lpf_[n] == n;
    if (n <= limit_) return std::binary_search(primes_.begin(), primes_.end(), n);
    return is_prime_u64(n);
  }

  // Least prime factor of n, 2 <= n <= limit.
  std::uint64_t smallest_factor(std::uint64_t n) const {
    if (n < 2 || n > limit_) throw domain_error("smallest_factor: argument outside [2, limit]");
    if (n < lpf_.size()) return lpf_[n];
    for (std::uint32_t p : primes_) {
      if (static_cast<std::uint64_t>(p) * p > n) break;
      if (n % p == 0) return p;
    }
    return n;
  }

 private:
  void linear_sieve(std::uint64_t n) {
    lpf_.assign(n + 1, 0);
    primes_.reserve(static_cast<std::size_t>(1.1 * n / std::log(static_cast<double>(n) + 2.0)) + 16);
    for (std::uint64_t i = 2; i <= n; ++i) {
      if (lpf_[i] == 0) {
        lpf_[i] = static_cast<std::uint32_t>(i);
        primes_.push_back(static_cast<std::uint32_t>(i));
      }
      const std::uint32_t li = lpf_[i];
      for (std::uint32_t p : primes_) {
        if (p > li || i * p > n) break;
        lpf_[i * p] = p;
      }
    }
  }

  void segmented_extend(std::uint64_t from, std::uint64_t to) {
    constexpr std::uint64_t segment = 1u << 20;
    std::vector<char> composite(segment);
    const std::size_t base_count = count_up_to(static_cast<std::uint64_t>(std::sqrt(static_cast<double>(to))) + 1);
    for (std::uint64_t lo = from + 1; lo <= to; lo += segment) {
      const std::uint64_t hi = std::min(to, lo + segment - 1);
      std::fill(composite.begin(), composite.end(), 0);
      for (std::size_t i = 0; i < base_count; ++i) {
        const std::uint64_t p = primes_[i];
        if (p * p > hi) break;
        std::uint64_t start = std::max(p * p, (lo + p - 1) / p * p);
        for (std::uint64_t j = start; j <= hi; j += p) composite[j - lo] = 1;
      }
      for (std::uint64_t n = lo; n <= hi; ++n) {
        if (!composite[n - lo]) primes_.push_back(static_cast<std::uint32_t>(n));
      }
    }
  }

  std::uint64_t limit_;
  std::vector<std::uint32_t> primes_;
  std::vector<std::uint32_t> lpf_;
};

struct PrimePower {
  std::uint64_t prime;
  std::uint32_t exponent;
  friend bool operator==(const PrimePower&, const PrimePower&) = default;
};

struct Factorization {
  std::vector<PrimePower> factors;  // primes strictly increasing
  std::uint64_t value = 1;

  std::uint64_t phi() const {
    std::uint64_t r = 1;
    for (const auto& [p, e] : factors) {
      r *= p - 1;
      for (std::uint32_t i = 1; i < e; ++i) r *= p;
    }
    return r;
  }
  std::size_t omega() const { return factors.size(); }
  // P^-(n); 0 for n = 1.
  std::uint64_t least_prime() const { return factors.empty() ? 0 : factors.front().prime; }
  bool is_prime_power() const { return factors.size() == 1; }

  std::uint64_t reconstruct() const {
    std::uint64_t r = 1;
    for (const auto& [p, e] : factors) {
      for (std::uint32_t i = 0; i < e; ++i) r *= p;
    }
    return r;
  }

  std::string to_string() const {
    if (factors.empty()) return "1";
    std::string s;
    for (const auto& [p, e] : factors) {
      if (!s.empty()) s += "*";
      s += std::to_string(p);
      if (e > 1) s += "^" + std::to_string(e);
    }
    return s;
  }
};

/// Factorizes n using the least-prime-factor array where it reaches and trial
/// division by the table's primes otherwise. A leftover cofactor is accepted
/// only if it is provably prime.
inline Factorization factorize(std::uint64_t n, const PrimeTable& table) {
  if (n == 0) throw domain_error("factorize: n must be >= 1");
  Factorization f;
  f.value = n;
  auto push = [&f](std::uint64_t p) {
    if (!f.factors.empty() && f.factors.back().prime == p) {
      ++f.factors.back().exponent;
    } else {
      f.factors.push_back({p, 1});
    }
  };
  std::uint64_t rest = n;
  if (rest <= std::min(table.limit(), PrimeTable::factor_array_cap)) {
    while (rest > 1) {
      const std::uint64_t p = table.smallest_factor(rest);
      push(p);
      rest /= p;
    }
    return f;
  }
  bool exhausted = true;
  for (std::uint32_t p32 : table.primes()) {
    const std::uint64_t p = p32;
    if (p * p > rest) {
      exhausted = false;
      break;
    }
    while (rest % p == 0) {
      push(p);
      rest /= p;
    }
  }
  if (rest > 1) {
    const std::uint64_t last = table.primes().back();
    if (!exhausted || rest <= last || is_prime_u64(rest)) {
      push(rest);
    } else {
      throw incomplete_factorization("factorize: cofactor " + std::to_string(rest) + " of " +
                                     std::to_string(n) + " is composite with factors beyond the table");
    }
  }
  return f;
}

// Multiplicative order of a modulo n, given the factorization of the group
// order (any multiple of the true order).
inline std::uint64_t multiplicative_order(std::uint64_t a, std::uint64_t n, std::uint64_t group_order,
                                          const Factorization& group_order_factors) {
  std::uint64_t order = group_order;
  for (const auto& [r, e] : group_order_factors.factors) {
    for (std::uint32_t i = 0; i < e; ++i) {
      if (pow_mod(a, order / r, n) == 1) {
        order /= r;
      } else {
        break;
      }
    }
  }
  return order;
}

struct Generator {
  std::uint64_t value;
  std::uint64_t order;
  friend bool operator==(const Generator&, const Generator&) = default;
};

/// Generators of (Z/p^e)^*: none for 2, <3> for 4, <-1, 5> for 2^e (e >= 3),
/// and the smallest primitive root for odd p^e.
inline std::vector<Generator> unit_group_generators(std::uint64_t prime_power, const PrimeTable& table) {
  if (prime_power < 2) throw domain_error("unit_group_generators: modulus must be a prime power >= 2");
  const Factorization f = factorize(prime_power, table);
  if (!f.is_prime_power()) {
    throw domain_error("unit_group_generators: " + std::to_string(prime_power) + " is not a prime power");
  }
  const std::uint64_t p = f.factors[0].prime;
  const std::uint32_t e = f.factors[0].exponent;
  if (p == 2) {
    if (e == 1) return {};
    if (e == 2) return {{3, 2}};
    return {{prime_power - 1, 2}, {5, prime_power / 4}};
  }
  const std::uint64_t phi = f.phi();
  const Factorization phi_f = factorize(phi, table);
  for (std::uint64_t g = 2; g < prime_power; ++g) {
    if (g % p == 0) continue;
    bool generates = true;
    for (const auto& [r, _] : phi_f.factors) {
      if (pow_mod(g, phi / r, prime_power) == 1) {
        generates = false;
        break;
      }
    }
    if (generates) return {{g, phi}};
  }
  throw domain_error("unit_group_generators: no primitive root found");  // unreachable for odd p^e
}

/// Smallest primitive root of a cyclic prime-power modulus (2, 4 or odd p^e).
/// 2^e with e >= 3 is not cyclic; use unit_group_generators for it.
inline std::uint64_t primitive_root(std::uint64_t prime_power, const PrimeTable& table) {
  if (prime_power == 2) return 1;
  const auto gens = unit_group_generators(prime_power, table);
  if (gens.size() != 1) {
    throw domain_error("primitive_root: (Z/" + std::to_string(prime_power) +
                       ")^* is not cyclic; it is generated by <-1, 5>");
  }
  return gens[0].value;
}

/// Full discrete-log table for a cyclic subgroup <generator> mod modulus.
/// O(modulus) memory, O(1) lookups.
class DiscreteLogTable {
 public:
  static constexpr std::uint64_t max_modulus = 10'000'000;
  static constexpr std::uint32_t absent = 0xFFFFFFFFu;

  DiscreteLogTable(std::uint64_t modulus, std::uint64_t generator) : modulus_(modulus), generator_(generator % modulus) {
    if (modulus < 1) throw domain_error("DiscreteLogTable: modulus must be >= 1");
    if (modulus > max_modulus) {
      throw resource_error("DiscreteLogTable: modulus " + std::to_string(modulus) + " exceeds table cap");
    }
    table_.assign(modulus, absent);
    std::uint64_t x = 1 % modulus;
    std::uint64_t j = 0;
    do {
      table_[x] = static_cast<std::uint32_t>(j);
      x = mul_mod(x, generator_, modulus);
      ++j;
    } while (x != 1 % modulus && j < modulus);
    order_ = j;
  }

  std::uint64_t modulus() const { return modulus_; }
  std::uint64_t generator() const { return generator_; }
  std::uint64_t order() const { return order_; }

  bool contains(std::uint64_t a) const { return table_[a % modulus_] != absent; }

  std::uint64_t log(std::uint64_t a) const {
    const std::uint32_t v = table_[a % modulus_];
    if (v == absent) {
      throw domain_error("discrete_log: " + std::to_string(a) + " is not in the subgroup generated by " +
                         std::to_string(generator_) + " mod " + std::to_string(modulus_));
    }
    return v;
  }

 private:
  std::uint64_t modulus_;
  std::uint64_t generator_;
  std::uint64_t order_ = 0;
  std::vector<std::uint32_t> table_;
};

inline std::uint64_t discrete_log(std::uint64_t modulus, std::uint64_t generator, std::uint64_t a) {
  if (std::gcd(a, modulus) != 1) {
    throw domain_error("discrete_log: " + std::to_string(a) + " is not coprime to " + std::to_string(modulus));
  }
  return DiscreteLogTable(modulus, generator).log(a);
}

}  // namespace charlab
