#include "cotlab/jsonl.hpp"

namespace cotlab {

void for_each_jsonl(const std::string& path,
                    const std::function<void(std::size_t, const nlohmann::json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      // A final empty chunk only appears when the file ends in a blank line.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw Error(path + ":" + std::to_string(line_no) + ": blank line");
    }
    nlohmann::json value = nlohmann::json::parse(line, nullptr, false);
    if (value.is_discarded())
      throw Error(path + ":" + std::to_string(line_no) + ": malformed JSON");
    fn(line_no, value);
  }
}

JsonlWriter::JsonlWriter(const std::string& path, bool truncate)
    : out_(path, truncate ? std::ios::trunc : std::ios::app), path_(path) {
  if (!out_) throw Error("cannot open " + path + " for writing");
}

void JsonlWriter::write(const nlohmann::json& value) {
  out_ << value.dump() << '\n';
  if (!out_) throw Error("write failed on " + path_);
}

std::size_t count_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) return 0;
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    ++n;
  }
  return n;
}

}  // namespace cotlab
