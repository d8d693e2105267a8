#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace fallacy {

using json = nlohmann::json;

namespace text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
/// Runs of ASCII whitespace become a single space; leading/trailing whitespace is dropped.
std::string collapse_whitespace(std::string_view s);
std::string join(std::span<const std::string> parts, std::string_view sep);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);

/// Half-up rounding to `decimals` places, formatted with exactly that many digits.
std::string fixed(double value, int decimals);

}  // namespace text

/// Reads a line-delimited JSON file. Blank lines and lines whose first non-space
/// character is '#' are skipped. Throws IngestionError if the file cannot be opened
/// and SchemaError (with the line number) on malformed lines.
std::vector<json> read_jsonl(const std::filesystem::path& path);

void write_jsonl(const std::filesystem::path& path, std::span<const json> records);
void write_text(const std::filesystem::path& path, std::string_view contents);
std::string read_text(const std::filesystem::path& path);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Default location of the shipped data files: $FALLACY_DATA_DIR if set, else the
/// directory configured at build time.
std::filesystem::path default_data_dir();

/// Writes one diagnostic line to stderr. Silenced when $FALLACY_QUIET is set.
void log_note(std::string_view message);

/// ISO-8601 UTC timestamp with second precision.
std::string utc_timestamp();

inline constexpr std::string_view kToolVersion = "0.3.0";

}  // namespace fallacy
