#include "cotlab/generator.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>

#include "cotlab/expr.hpp"
#include "cotlab/jsonl.hpp"
#include "cotlab/rng.hpp"

namespace cotlab {

void GenerationConfig::validate() const {
  if (op_count_min < 1 || op_count_min > op_count_max)
    throw ConfigInvalid("op_count bounds must satisfy 1 <= min <= max");
  if (operand_min < 1 || operand_min > operand_max)
    throw ConfigInvalid("operand bounds must satisfy 1 <= min <= max");
  if (magnitude_cap < operand_max)
    throw ConfigInvalid("magnitude_cap must be >= operand_max");
  // Keeps running_value * operand inside checked int64 territory.
  if (magnitude_cap > 90'000'000'000'000'000LL)
    throw ConfigInvalid("magnitude_cap must be <= 9e16");
}

namespace {

constexpr Operator kOperatorOrder[4] = {Operator::add, Operator::sub,
                                        Operator::mul, Operator::div};

struct OperandChoice {
  // Either a contiguous inclusive range or an explicit list (divisors).
  std::int64_t lo = 0;
  std::int64_t hi = -1;
  std::vector<std::int64_t> values;

  bool empty() const { return values.empty() && lo > hi; }

  std::int64_t draw(SplitMix64& rng) const {
    if (!values.empty()) return values[rng.below(values.size())];
    return rng.range(lo, hi);
  }
};

// Operands d in [operand_min, operand_max] keeping |running op d| within the
// magnitude cap (and nonnegative when negatives are disallowed).
OperandChoice admissible_operands(const GenerationConfig& cfg, Operator op,
                                  std::int64_t running) {
  OperandChoice choice;
  choice.lo = cfg.operand_min;
  choice.hi = cfg.operand_max;
  switch (op) {
    case Operator::add:
      // Negative running values move toward zero; |r + d| <= max(|r|, d).
      if (running >= 0) choice.hi = std::min(choice.hi, cfg.magnitude_cap - running);
      return choice;
    case Operator::sub:
      if (!cfg.allow_negative_intermediates)
        choice.hi = std::min(choice.hi, running);
      else if (running <= 0)
        choice.hi = std::min(choice.hi, cfg.magnitude_cap + running);
      return choice;
    case Operator::mul:
      if (running != 0) {
        const std::int64_t mag = running < 0 ? -running : running;
        choice.hi = std::min(choice.hi, cfg.magnitude_cap / mag);
      }
      return choice;
    case Operator::div: {
      if (running == 0) return choice;  // 0 / d == 0 for any d
      const std::int64_t mag = running < 0 ? -running : running;
      choice.lo = 0;
      choice.hi = -1;
      for (std::int64_t d = cfg.operand_min;
           d <= std::min(cfg.operand_max, mag); ++d)
        if (mag % d == 0) choice.values.push_back(d);
      return choice;
    }
  }
  return choice;
}

std::int64_t apply_exact(Operator op, std::int64_t a, std::int64_t b) {
  switch (op) {
    case Operator::add: return a + b;
    case Operator::sub: return a - b;
    case Operator::mul: return a * b;
    case Operator::div: return b == 0 ? 0 : a / b;
  }
  return 0;
}

ProblemInstance generate_with_id(const GenerationConfig& cfg, std::uint64_t seed,
                                 std::string id) {
  SplitMix64 rng(seed);
  const int op_count =
      cfg.op_count_min +
      static_cast<int>(rng.below(
          static_cast<std::uint64_t>(cfg.op_count_max - cfg.op_count_min) + 1));

  std::int64_t running = rng.range(cfg.operand_min, cfg.operand_max);
  Expr tree = Expr::leaf(running);

  for (int step = 0; step < op_count; ++step) {
    Operator ops[4];
    OperandChoice choices[4];
    int n_admissible = 0;
    for (Operator op : kOperatorOrder) {
      OperandChoice c = admissible_operands(cfg, op, running);
      if (c.empty()) continue;
      ops[n_admissible] = op;
      choices[n_admissible] = std::move(c);
      ++n_admissible;
    }
    if (n_admissible == 0)
      throw GenerationStuck("no admissible operator at step " +
                            std::to_string(step));
    const auto pick = rng.below(static_cast<std::uint64_t>(n_admissible));
    const Operator op = ops[pick];
    const std::int64_t operand = choices[pick].draw(rng);
    running = apply_exact(op, running, operand);
    tree = Expr::node(op, std::move(tree), Expr::leaf(operand));
  }

  ProblemInstance instance;
  instance.id = std::move(id);
  instance.expression = render(tree);
  instance.answer = running;
  instance.op_count = op_count;
  instance.seed = seed;
  return instance;
}

std::string format_id(std::uint64_t suite_seed, int index, int width) {
  char seed_hex[17];
  std::snprintf(seed_hex, sizeof(seed_hex), "%016llx",
                static_cast<unsigned long long>(suite_seed));
  std::string padded = std::to_string(index);
  if (static_cast<int>(padded.size()) < width)
    padded.insert(0, static_cast<std::size_t>(width) - padded.size(), '0');
  return std::string(seed_hex) + "-" + padded;
}

}  // namespace

ProblemInstance generate_problem(const GenerationConfig& config, std::uint64_t seed) {
  config.validate();
  return generate_with_id(config, seed, format_id(seed, 0, 4));
}

std::vector<ProblemInstance> generate_suite(const GenerationConfig& config, int n) {
  config.validate();
  if (n < 1) throw ConfigInvalid("suite size must be >= 1");
  int width = 4;
  for (int limit = 10000; n > limit; limit *= 10) ++width;
  std::vector<ProblemInstance> suite;
  suite.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::uint64_t seed =
        derive_stream_seed(config.seed, static_cast<std::uint64_t>(i));
    suite.push_back(generate_with_id(config, seed, format_id(config.seed, i, width)));
  }
  return suite;
}

void write_problems_jsonl(const std::vector<ProblemInstance>& problems,
                          const std::string& path) {
  JsonlWriter out(path);
  for (const ProblemInstance& p : problems) {
    out.write({{"id", p.id},
               {"expression", p.expression},
               {"answer", std::to_string(p.answer)},
               {"op_count", p.op_count},
               {"seed", p.seed}});
  }
  out.flush();
}

std::vector<ProblemInstance> read_problems_jsonl(const std::string& path) {
  std::vector<ProblemInstance> problems;
  for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& j) {
    ProblemInstance p;
    try {
      p.id = j.at("id").get<std::string>();
      p.expression = j.value("expression", std::string{});
      const auto& answer = j.at("answer");
      p.answer = answer.is_string()
                     ? std::stoll(answer.get<std::string>())
                     : answer.get<std::int64_t>();
      p.op_count = j.value("op_count", 0);
      p.seed = j.value("seed", std::uint64_t{0});
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    problems.push_back(std::move(p));
  });
  return problems;
}

}  // namespace cotlab
