#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cotlab/errors.hpp"

namespace cotlab {

// Knobs of the synthetic arithmetic benchmark. Defaults match the target
// regime: 5-15 operations, operands uniform on [1,100], every intermediate
// an integer.
struct GenerationConfig {
  int op_count_min = 5;
  int op_count_max = 15;
  std::int64_t operand_min = 1;
  std::int64_t operand_max = 100;
  std::int64_t magnitude_cap = 1'000'000;
  bool allow_negative_intermediates = true;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigInvalid
};

struct ProblemInstance {
  std::string id;
  std::string expression;
  std::int64_t answer = 0;
  int op_count = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const ProblemInstance&, const ProblemInstance&) = default;
};

// No operator admissible at some step. Unreachable for sane configs
// (dividing or multiplying by 1 is always legal when operand_min == 1);
// kept as a guard against pathological parameter combinations.
class GenerationStuck : public Error {
 public:
  using Error::Error;
};

// Deterministic for (config, seed): a left-deep chain of op_count steps,
// each drawing an operator uniformly from the admissible set and an
// operand that keeps the running value integral and within magnitude_cap.
ProblemInstance generate_problem(const GenerationConfig& config, std::uint64_t seed);

// n instances with zero-padded ids; per-instance seeds derived from
// config.seed by a splittable counter, so any prefix of the suite is stable.
std::vector<ProblemInstance> generate_suite(const GenerationConfig& config, int n);

// JSONL schema: {"id", "expression", "answer" (decimal string), "op_count",
// "seed"} per line.
void write_problems_jsonl(const std::vector<ProblemInstance>& problems,
                          const std::string& path);
std::vector<ProblemInstance> read_problems_jsonl(const std::string& path);

}  // namespace cotlab
