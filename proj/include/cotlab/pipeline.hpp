#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cotlab/answer_eval.hpp"
#include "cotlab/error_model.hpp"
#include "cotlab/errors.hpp"

namespace cotlab {

// Flat key-value configuration mirroring the CLI flags; CLI flags override
// file values. Unknown keys are rejected.
struct PipelineConfig {
  std::string out_dir = ".";
  std::string label = "run";

  // gen
  int n = 400;
  std::uint64_t seed = 0;
  std::string ops = "5..15";        // op count range "min..max"
  std::string operands = "1..100";  // operand range "min..max"
  std::int64_t magnitude_cap = 1'000'000;
  bool allow_negative_intermediates = true;
  std::string problems_file;  // externally supplied problems skip gen

  // respond
  std::string mode = "synthetic";  // "synthetic" or "endpoint"
  int k = 4;
  double epsilon = 0.05;
  double reflection_rate = 0.0;
  std::string endpoint;
  std::string model;
  std::string auth_env;
  int concurrency = 4;
  double temperature = 0.6;
  double top_p = 0.95;
  int max_tokens = 16384;
  double timeout_seconds = 120.0;
  int retries = 3;

  // score
  std::string answer_mode = "integer";  // or "exact-string"

  // reflect (optional stage)
  bool reflect = false;
  std::string policy = "keyword_only";
  std::string judge_endpoint;
  std::string judge_model;
  std::string keywords_file;

  // fit (optional stage)
  bool fit = true;
  std::string fit_method = "mle";  // or "least-squares"

  // report
  std::string format = "csv";

  static PipelineConfig from_json_file(const std::string& path);

  // Sets one field by its config key; rejects unknown keys. Used both by the
  // file loader and by CLI overrides so validation lives in one place.
  void apply_override(const std::string& key, const nlohmann::json& value);
};

// A stage failed; the stage name travels with the error so the CLI can put
// it on stderr and exit nonzero.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& message)
      : Error("stage '" + stage + "' failed: " + message), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// gen -> sample|simulate -> score -> reflect? -> fit? -> report. Every stage
// is skipped when its outputs are already complete, so a finished pipeline
// re-runs without performing new work. Stages communicate only through the
// JSONL/JSON files in out_dir.
void run_pipeline(const PipelineConfig& config);

// Scored responses grouped into per-length accuracy bins by op_count.
std::vector<ChainObservation> bin_by_op_count(
    const std::vector<ScoredResponse>& scored);

// Parses "lo..hi" range syntax used by --ops and --operands.
std::pair<std::int64_t, std::int64_t> parse_range(const std::string& text);

}  // namespace cotlab
