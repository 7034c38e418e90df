#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "dvi/rng.hpp"

namespace dvi {

// One logged solver iteration. wall_ms is environmental and excluded from
// the byte-determinism contract; everything else must reproduce exactly
// for a fixed argv + seed.
struct RunRecord {
  std::string run_id;
  std::string subcommand;
  std::string problem_id;
  std::optional<double> beta;
  std::size_t iteration = 0;
  double elbo = 0.0;
  double reward_term = 0.0;
  double kl_term = 0.0;
  std::int64_t wall_ms = 0;
  Seed seed;
};

// CSV with the exact header
// run_id,subcommand,problem_id,beta,iteration,elbo,reward_term,kl_term,wall_ms,seed
// Reals carry 17 significant digits; a missing beta renders as an empty
// field. Rows are written in the given (iteration) order.
void write_report(std::span<const RunRecord> records, const std::string& path);

// 17-significant-digit rendering shared by the CSV writer and tests.
std::string format_real(double x);

}  // namespace dvi
