#pragma once

#include <fstream>
#include <functional>
#include <string>

#include "cotlab/errors.hpp"
#include "json.hpp"

namespace cotlab {

// One parsed line per callback: (line_number starting at 1, json value).
// Blank interior lines or parse failures raise Error with the line number.
void for_each_jsonl(const std::string& path,
                    const std::function<void(std::size_t, const nlohmann::json&)>& fn);

// Appends one value per line; creates the file if missing.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path, bool truncate = true);

  void write(const nlohmann::json& value);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  std::string path_;
};

std::size_t count_lines(const std::string& path);

}  // namespace cotlab
