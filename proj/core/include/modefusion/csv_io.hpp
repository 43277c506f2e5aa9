#pragma once

#include "modefusion/labeled_matrix.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace modefusion {

/// Splits one CSV record. Supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote, or newline.
std::string csv_escape(std::string_view field);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict decimal parse; throws IoError on trailing garbage or empty input.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

/// Labeled matrix CSV: a header row `<row concept>,<col labels...>` followed by
/// one row per source label, `<row label>,<values...>`. UTF-8, decimal floats.
LabeledMatrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const LabeledMatrix& matrix);

/// Row-wise reader for long-format CSV files (events, towers, usage counts).
/// Rows whose field count differs from the header, or for which `on_row`
/// throws, are reported as malformed with their 1-based line number. When
/// more than `max_malformed_fraction` of data rows are malformed the read
/// aborts with IoError.
struct LongCsvStats {
  std::size_t rows = 0;
  std::size_t malformed = 0;
  std::vector<std::string> messages;
};

LongCsvStats read_long_csv(const std::filesystem::path& path,
                           const std::vector<std::string>& expected_header,
                           const std::function<void(const std::vector<std::string>&)>& on_row,
                           double max_malformed_fraction = 0.01);

/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace modefusion
