#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eli/error.hpp"
#include "json.hpp"

namespace eli::jsonl {

/// Throws IoError when the file cannot be opened.
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::vector<std::string>& lines, const std::filesystem::path& path);
bool blank(const std::string& s);

/// Runs `f`, rethrowing JSON and parse errors as ParseError("line N: ...").
template <typename F>
auto with_line_context(std::size_t line_no, F&& f) {
  const std::string where = line_no > 0 ? "line " + std::to_string(line_no) + ": " : "";
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + e.what());
  } catch (const ParseError& e) {
    throw ParseError(where + e.what());
  }
}

}  // namespace eli::jsonl
