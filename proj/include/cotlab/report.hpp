#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotlab/answer_eval.hpp"
#include "cotlab/error_model.hpp"
#include "cotlab/errors.hpp"
#include "cotlab/reflection.hpp"

namespace cotlab {

// One point of a degradation-style curve: a labeled checkpoint with its
// benchmark stats and optional reflection/fit companions.
struct CheckpointRun {
  std::string label;  // e.g. a data-scale tag like "8k" or "64k"
  BenchmarkStats stats;
  std::optional<ReflectionStats> reflection;
  std::optional<ErrorModelFit> fit;
};

enum class ReportFormat { json, csv, markdown };

ReportFormat report_format_from_string(std::string_view text);

class EmptyRuns : public Error {
 public:
  using Error::Error;
};

class DuplicateLabel : public Error {
 public:
  using Error::Error;
};

// CSV columns: label, avg_at_k, mean_length, length_mode, reflection_ratio,
// reflective_mean_length, nonreflective_mean_length, epsilon_hat. Rows are
// ordered by the numeric prefix of the label when parseable, else lexically;
// absent optional fields render as empty cells. JSON and Markdown mirror the
// same fields. Byte-deterministic for identical inputs.
std::string emit_report(const std::vector<CheckpointRun>& runs, ReportFormat format);

// Fit documents carry the estimate plus fit metadata (method, binning).
struct FitDocument {
  ErrorModelFit fit;
  std::string method = "mle";            // or "least-squares"
  std::string bin_by = "op_count";
  std::string length_source = "problem_op_count";
};

nlohmann::json to_json(const ErrorModelFit& fit);
ErrorModelFit fit_from_json(const nlohmann::json& j);

void write_fit_json(const FitDocument& doc, const std::string& path);
FitDocument read_fit_json(const std::string& path);

void save_run_json(const CheckpointRun& run, const std::string& path);
CheckpointRun load_run_json(const std::string& path);

}  // namespace cotlab
