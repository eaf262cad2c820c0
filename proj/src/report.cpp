#include "cotlab/report.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>

namespace cotlab {

ReportFormat report_format_from_string(std::string_view text) {
  if (text == "json") return ReportFormat::json;
  if (text == "csv") return ReportFormat::csv;
  if (text == "markdown" || text == "md") return ReportFormat::markdown;
  throw DomainError("unknown report format: " + std::string(text));
}

namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::optional<long long> numeric_prefix(const std::string& label) {
  std::size_t i = 0;
  while (i < label.size() && i < 18 &&
         std::isdigit(static_cast<unsigned char>(label[i])))
    ++i;
  if (i == 0) return std::nullopt;
  return std::stoll(label.substr(0, i));
}

bool run_order(const CheckpointRun& a, const CheckpointRun& b) {
  const auto na = numeric_prefix(a.label);
  const auto nb = numeric_prefix(b.label);
  if (na && nb) return *na != *nb ? *na < *nb : a.label < b.label;
  if (na.has_value() != nb.has_value()) return na.has_value();
  return a.label < b.label;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

// The eight report fields of one run, as display strings (empty = absent).
struct Row {
  std::string cells[8];
};

Row make_row(const CheckpointRun& run) {
  Row row;
  row.cells[0] = run.label;
  row.cells[1] = format_number(run.stats.avg_at_k);
  row.cells[2] = format_number(run.stats.mean_length);
  row.cells[3] = to_string(run.stats.length_mode);
  if (run.reflection) {
    row.cells[4] = format_number(run.reflection->ratio);
    if (run.reflection->reflective_mean_length)
      row.cells[5] = format_number(*run.reflection->reflective_mean_length);
    if (run.reflection->nonreflective_mean_length)
      row.cells[6] = format_number(*run.reflection->nonreflective_mean_length);
  }
  if (run.fit) row.cells[7] = format_number(run.fit->epsilon_hat);
  return row;
}

constexpr const char* kColumns[8] = {
    "label",          "avg_at_k",
    "mean_length",    "length_mode",
    "reflection_ratio", "reflective_mean_length",
    "nonreflective_mean_length", "epsilon_hat"};

}  // namespace

std::string emit_report(const std::vector<CheckpointRun>& runs,
                        ReportFormat format) {
  if (runs.empty()) throw EmptyRuns("report requires at least one run");
  std::set<std::string> labels;
  for (const CheckpointRun& run : runs)
    if (!labels.insert(run.label).second)
      throw DuplicateLabel("duplicate run label: " + run.label);

  std::vector<CheckpointRun> ordered = runs;
  std::sort(ordered.begin(), ordered.end(), run_order);

  switch (format) {
    case ReportFormat::csv: {
      std::string out;
      for (int c = 0; c < 8; ++c) {
        out += kColumns[c];
        out += c + 1 < 8 ? ',' : '\n';
      }
      for (const CheckpointRun& run : ordered) {
        const Row row = make_row(run);
        for (int c = 0; c < 8; ++c) {
          out += csv_escape(row.cells[c]);
          out += c + 1 < 8 ? ',' : '\n';
        }
      }
      return out;
    }
    case ReportFormat::markdown: {
      std::string out = "|";
      for (const char* column : kColumns) out += std::string(" ") + column + " |";
      out += "\n|";
      for (int c = 0; c < 8; ++c) out += " --- |";
      out += "\n";
      for (const CheckpointRun& run : ordered) {
        const Row row = make_row(run);
        out += "|";
        for (int c = 0; c < 8; ++c) out += " " + row.cells[c] + " |";
        out += "\n";
      }
      return out;
    }
    case ReportFormat::json: {
      nlohmann::json arr = nlohmann::json::array();
      for (const CheckpointRun& run : ordered) {
        nlohmann::json j{{"label", run.label},
                         {"avg_at_k", run.stats.avg_at_k},
                         {"mean_length", run.stats.mean_length},
                         {"length_mode", to_string(run.stats.length_mode)}};
        if (run.reflection) {
          j["reflection_ratio"] = run.reflection->ratio;
          if (run.reflection->reflective_mean_length)
            j["reflective_mean_length"] = *run.reflection->reflective_mean_length;
          if (run.reflection->nonreflective_mean_length)
            j["nonreflective_mean_length"] =
                *run.reflection->nonreflective_mean_length;
        }
        if (run.fit) j["epsilon_hat"] = run.fit->epsilon_hat;
        arr.push_back(std::move(j));
      }
      return arr.dump(2) + "\n";
    }
  }
  throw DomainError("unknown report format");
}

nlohmann::json to_json(const ErrorModelFit& fit) {
  return {{"epsilon_hat", fit.epsilon_hat},
          {"log_likelihood", fit.log_likelihood},
          {"n_observations", fit.n_observations},
          {"confidence_low", fit.confidence_low},
          {"confidence_high", fit.confidence_high},
          {"degenerate", fit.degenerate},
          {"deviance", fit.deviance},
          {"deviance_dof", fit.deviance_dof}};
}

ErrorModelFit fit_from_json(const nlohmann::json& j) {
  ErrorModelFit fit;
  fit.epsilon_hat = j.at("epsilon_hat").get<double>();
  fit.log_likelihood = j.at("log_likelihood").get<double>();
  fit.n_observations = j.at("n_observations").get<long long>();
  fit.confidence_low = j.at("confidence_low").get<double>();
  fit.confidence_high = j.at("confidence_high").get<double>();
  fit.degenerate = j.value("degenerate", false);
  fit.deviance = j.value("deviance", 0.0);
  fit.deviance_dof = j.value("deviance_dof", 0);
  return fit;
}

void write_fit_json(const FitDocument& doc, const std::string& path) {
  nlohmann::json j = to_json(doc.fit);
  j["method"] = doc.method;
  j["bin_by"] = doc.bin_by;
  j["length_source"] = doc.length_source;
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

FitDocument read_fit_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  FitDocument doc;
  doc.fit = fit_from_json(j);
  doc.method = j.value("method", std::string{"mle"});
  doc.bin_by = j.value("bin_by", std::string{"op_count"});
  doc.length_source = j.value("length_source", std::string{"problem_op_count"});
  return doc;
}

void save_run_json(const CheckpointRun& run, const std::string& path) {
  nlohmann::json j{{"label", run.label}, {"stats", to_json(run.stats)}};
  if (run.reflection) j["reflection"] = to_json(*run.reflection);
  if (run.fit) j["fit"] = to_json(*run.fit);
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

CheckpointRun load_run_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  CheckpointRun run;
  run.label = j.at("label").get<std::string>();
  run.stats = benchmark_stats_from_json(j.at("stats"));
  if (j.contains("reflection"))
    run.reflection = reflection_stats_from_json(j.at("reflection"));
  if (j.contains("fit")) run.fit = fit_from_json(j.at("fit"));
  return run;
}

}  // namespace cotlab
