#pragma once

#include <stdexcept>
#include <string>

namespace charlab {

// Input outside an operation's mathematical domain (even g, non-coprime
// residue, principal character where a non-principal one is required, ...).
struct domain_error : std::domain_error {
  using std::domain_error::domain_error;
};

// A configured size ceiling was exceeded.
struct resource_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct incomplete_factorization : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A search stage found no admissible object in its range.
struct search_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tabular input missing a required column or malformed.
struct schema_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace charlab
