#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ttc/core_types.hpp"
#include "ttc/errors.hpp"

namespace ttc {

/// Writes `content` to `path` through a sibling temp file and a rename, so a
/// reader never observes a half-written artifact.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_text(const std::filesystem::path& path);

/// Splits JSONL text into parsed objects, skipping blank lines. Errors carry
/// the 1-based line number.
std::vector<json> parse_jsonl(std::string_view text, std::string_view source = "<memory>");

std::string dump_line(const json& j);

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::vector<T> out;
  std::size_t line = 0;
  for (const json& j : parse_jsonl(read_text(path), path.string())) {
    ++line;
    try {
      out.push_back(j.get<T>());
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": object " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

template <typename T>
std::string to_jsonl(const std::vector<T>& rows) {
  std::string out;
  for (const T& row : rows) {
    out += dump_line(json(row));
    out += '\n';
  }
  return out;
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& rows) {
  write_text_atomic(path, to_jsonl(rows));
}

}  // namespace ttc
