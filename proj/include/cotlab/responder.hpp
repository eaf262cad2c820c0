#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cotlab/answer_eval.hpp"
#include "cotlab/generator.hpp"

namespace cotlab {

// Text shape of the synthetic noisy responder.
struct ResponderTemplate {
  // Per-step probability of inserting a verification aside built from
  // reflection_phrases (empty list falls back to the detector's pool).
  double reflection_rate = 0.0;
  std::vector<std::string> reflection_phrases;
  std::string model_label = "synthetic";
};

// Executable stand-in for a model: walks the expression step by step and,
// with probability epsilon per step, corrupts that step's result by a
// nonzero offset in [-9, +9], propagating the corrupted running value. A
// deviated chain never re-converges to the true value, so the final answer
// is wrong iff at least one corruption fired and the realized accuracy is
// exactly (1 - epsilon)^op_count. Output ends with one "\boxed{...}".
ResponseRecord synthetic_respond(const ProblemInstance& problem, double epsilon,
                                 std::uint64_t seed,
                                 const ResponderTemplate& tmpl = {},
                                 int sample_index = 0);

}  // namespace cotlab
