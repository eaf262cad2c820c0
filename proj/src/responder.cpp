#include "cotlab/responder.hpp"

#include <utility>
#include <vector>

#include "cotlab/error_model.hpp"
#include "cotlab/expr.hpp"
#include "cotlab/reflection.hpp"
#include "cotlab/rng.hpp"

namespace cotlab {

namespace {

// What a sloppy solver writes for one operation: exact except that an
// off-track division truncates (or yields 0 on a zero divisor).
std::int64_t apply_sloppy(Operator op, std::int64_t a, std::int64_t b) {
  switch (op) {
    case Operator::add: return a + b;
    case Operator::sub: return a - b;
    case Operator::mul: return a * b;
    case Operator::div: return b == 0 ? 0 : a / b;
  }
  return 0;
}

std::int64_t nonzero_offset(SplitMix64& rng) {
  // 18 values: [-9, -1] then [+1, +9].
  const auto pick = static_cast<std::int64_t>(rng.below(18));
  return pick < 9 ? pick - 9 : pick - 8;
}

struct WalkedValue {
  std::int64_t truth;
  std::int64_t emulated;
};

}  // namespace

ResponseRecord synthetic_respond(const ProblemInstance& problem, double epsilon,
                                 std::uint64_t seed, const ResponderTemplate& tmpl,
                                 int sample_index) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw DomainError("epsilon must lie in [0, 1]");

  const Expr expr = parse(problem.expression);
  // Separate streams so the corruption pattern is independent of the
  // reflection flourishes.
  SplitMix64 corrupt_rng(mix_seed(seed, 0xC0FFEEull));
  SplitMix64 text_rng(mix_seed(seed, 0x7E47ull));

  const std::vector<std::string>* phrases = &tmpl.reflection_phrases;
  const KeywordPool default_pool = KeywordPool::default_pool();
  if (phrases->empty()) phrases = &default_pool.phrases;

  std::string body = "Working through the expression " + problem.expression +
                     " one operation at a time.\n";

  // Post-order walk carrying (true value, emulated value) per subtree.
  struct Frame {
    Expr node;
    bool expanded;
  };
  std::vector<Frame> frames{{expr, false}};
  std::vector<WalkedValue> values;
  int step_number = 0;
  while (!frames.empty()) {
    Frame frame = std::move(frames.back());
    frames.pop_back();
    if (frame.node.is_leaf()) {
      values.push_back({frame.node.value(), frame.node.value()});
      continue;
    }
    if (!frame.expanded) {
      frames.push_back({frame.node, true});
      frames.push_back({frame.node.right(), false});
      frames.push_back({frame.node.left(), false});
      continue;
    }
    const WalkedValue rhs = values.back();
    values.pop_back();
    const WalkedValue lhs = values.back();
    values.pop_back();
    const Operator op = frame.node.op();

    const std::int64_t truth = apply_sloppy(op, lhs.truth, rhs.truth);
    std::int64_t emulated = apply_sloppy(op, lhs.emulated, rhs.emulated);
    bool deviated = lhs.emulated != lhs.truth || rhs.emulated != rhs.truth;
    if (corrupt_rng.bernoulli(epsilon)) {
      emulated += nonzero_offset(corrupt_rng);
      deviated = true;
    }
    // Sticky deviation: an off-track chain never lands back on the true
    // value, so one corruption guarantees a changed final answer.
    if (deviated && emulated == truth) emulated += 1;
    values.push_back({truth, emulated});

    ++step_number;
    body += "Step " + std::to_string(step_number) + ": " +
            std::to_string(lhs.emulated) + ' ' + operator_symbol(op) + ' ' +
            std::to_string(rhs.emulated) + " = " + std::to_string(emulated) +
            ".\n";
    if (tmpl.reflection_rate > 0.0 && text_rng.bernoulli(tmpl.reflection_rate)) {
      const std::string& phrase = (*phrases)[text_rng.below(phrases->size())];
      body += "Let me " + phrase + " before continuing.\n";
    }
  }

  body += "The final result is \\boxed{" + std::to_string(values.back().emulated) +
          "}.\n";

  ResponseRecord record;
  record.problem_id = problem.id;
  record.sample_index = sample_index;
  record.text = std::move(body);
  long long tokens = 0;
  bool in_token = false;
  for (char c : record.text) {
    const bool space = c == ' ' || c == '\n' || c == '\t';
    if (!space && !in_token) ++tokens;
    in_token = !space;
  }
  record.completion_tokens = tokens;
  record.finish_reason = FinishReason::stop;
  record.model_label = tmpl.model_label;
  // No sampling actually happens; record neutral values rather than
  // echoing a protocol that was not followed.
  record.sampling = {0.0, 1.0, 0};
  return record;
}

}  // namespace cotlab
