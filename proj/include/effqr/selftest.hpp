#pragma once

#include "effqr/oracle.hpp"

#include <cstdint>
#include <vector>

namespace effqr {

/// Compares the production solver and score code against the oracles on small
/// random instances, plus two closed-form identities. One report per check.
std::vector<oracle::OracleReport> run_selftest(std::uint64_t seed);

}  // namespace effqr
