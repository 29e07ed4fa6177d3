#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mtae {

/// One decimal id per line; blank lines and `#` comments are skipped.
std::vector<int> parse_tokens(std::string_view text);
std::string write_tokens(const std::vector<int>& tokens);

std::vector<int> read_tokens_file(const std::string& path);
void write_tokens_file(const std::string& path, const std::vector<int>& tokens);

}  // namespace mtae
