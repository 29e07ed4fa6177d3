#include "mtae/token_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mtae/error.hpp"

namespace mtae {

std::vector<int> parse_tokens(std::string_view text) {
  std::vector<int> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    int v = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size() || v < 0) {
      throw ParseError(line_no, "malformed token id '" + std::string(line) + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::string write_tokens(const std::vector<int>& tokens) {
  std::string out;
  for (int t : tokens) {
    out += std::to_string(t);
    out += '\n';
  }
  return out;
}

std::vector<int> read_tokens_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_tokens(ss.str());
}

void write_tokens_file(const std::string& path, const std::vector<int>& tokens) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path);
  out << write_tokens(tokens);
}

}  // namespace mtae
