#include "modefusion/csv_io.hpp"

#include "modefusion/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace modefusion {

namespace fs = std::filesystem;

namespace {

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::string_view trim_spaces(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::ifstream open_for_read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::vector<std::size_t> permutation_for(const std::vector<std::string>& current,
                                         const std::vector<std::string>& order) {
  if (current.size() != order.size()) {
    throw ValidationError("label reorder: expected " + std::to_string(current.size()) +
                          " labels, got " + std::to_string(order.size()));
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < current.size(); ++i) index.emplace(current[i], i);
  std::vector<std::size_t> perm;
  perm.reserve(order.size());
  for (const auto& label : order) {
    auto it = index.find(label);
    if (it == index.end()) throw ValidationError("label reorder: unknown label '" + label + "'");
    perm.push_back(it->second);
  }
  return perm;
}

}  // namespace

void LabeledMatrix::check_shape() const {
  if (static_cast<Eigen::Index>(row_labels.size()) != values.rows() ||
      static_cast<Eigen::Index>(col_labels.size()) != values.cols()) {
    throw ValidationError("labeled matrix '" + row_concept + "': labels " +
                          std::to_string(row_labels.size()) + "x" +
                          std::to_string(col_labels.size()) + " vs values " +
                          std::to_string(values.rows()) + "x" + std::to_string(values.cols()));
  }
  for (const auto* labels : {&row_labels, &col_labels}) {
    std::set<std::string> seen(labels->begin(), labels->end());
    if (seen.size() != labels->size()) {
      throw ValidationError("labeled matrix '" + row_concept + "': duplicate labels");
    }
  }
}

LabeledMatrix LabeledMatrix::with_row_order(const std::vector<std::string>& order) const {
  const auto perm = permutation_for(row_labels, order);
  LabeledMatrix out = *this;
  out.row_labels = order;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(perm[i]));
  }
  return out;
}

LabeledMatrix LabeledMatrix::with_col_order(const std::vector<std::string>& order) const {
  const auto perm = permutation_for(col_labels, order);
  LabeledMatrix out = *this;
  out.col_labels = order;
  for (std::size_t j = 0; j < perm.size(); ++j) {
    out.values.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(perm[j]));
  }
  return out;
}

LabeledMatrix LabeledMatrix::transposed() const {
  return LabeledMatrix{col_concept, row_concept, col_labels, row_labels, values.transpose()};
}

std::vector<std::string> split_csv_line(std::string_view line) {
  line = trim_cr(line);
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw IoError("unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double value) {
  if (value == 0.0) return "0";  // folds -0 as well
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw IoError("cannot format double");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  text = trim_spaces(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw IoError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int(std::string_view text) {
  text = trim_spaces(text);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw IoError("not an integer: '" + std::string(text) + "'");
  }
  return value;
}

LabeledMatrix read_matrix_csv(const fs::path& path) {
  auto in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path.string() + "': empty matrix file");
  auto header = split_csv_line(line);
  if (header.size() < 2) throw IoError("'" + path.string() + "': header needs at least one column");

  LabeledMatrix out;
  out.row_concept = header.front();
  out.col_labels.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_cr(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw IoError("'" + path.string() + "' line " + std::to_string(line_no) + ": expected " +
                    std::to_string(header.size()) + " fields, got " +
                    std::to_string(fields.size()));
    }
    out.row_labels.push_back(fields.front());
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      try {
        row.push_back(parse_double(fields[j]));
      } catch (const IoError& e) {
        throw IoError("'" + path.string() + "' line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  out.values.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(out.col_labels.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  out.check_shape();
  return out;
}

void write_matrix_csv(const fs::path& path, const LabeledMatrix& matrix) {
  matrix.check_shape();
  std::ostringstream os;
  os << csv_escape(matrix.row_concept);
  for (const auto& label : matrix.col_labels) os << ',' << csv_escape(label);
  os << '\n';
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    os << csv_escape(matrix.row_labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) os << ',' << format_double(matrix.values(i, j));
    os << '\n';
  }
  write_text_file(path, os.str());
}

LongCsvStats read_long_csv(const fs::path& path, const std::vector<std::string>& expected_header,
                           const std::function<void(const std::vector<std::string>&)>& on_row,
                           double max_malformed_fraction) {
  auto in = open_for_read(path);
  LongCsvStats stats;
  std::string line;
  if (!std::getline(in, line)) return stats;
  auto header = split_csv_line(line);
  for (auto& h : header) h = std::string(trim_spaces(h));
  if (header != expected_header) {
    std::string want;
    for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
    throw IoError("'" + path.string() + "': expected header '" + want + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_cr(line).empty()) continue;
    ++stats.rows;
    try {
      auto fields = split_csv_line(line);
      if (fields.size() != expected_header.size()) {
        throw IoError("expected " + std::to_string(expected_header.size()) + " fields, got " +
                      std::to_string(fields.size()));
      }
      on_row(fields);
    } catch (const Error& e) {
      ++stats.malformed;
      stats.messages.push_back(path.filename().string() + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  if (stats.rows > 0 &&
      static_cast<double>(stats.malformed) > max_malformed_fraction * static_cast<double>(stats.rows)) {
    std::string msg = "'" + path.string() + "': " + std::to_string(stats.malformed) + " of " +
                      std::to_string(stats.rows) + " rows malformed";
    if (!stats.messages.empty()) msg += " (first: " + stats.messages.front() + ")";
    throw IoError(msg);
  }
  return stats;
}

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text_file(const fs::path& path) {
  auto in = open_for_read(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace modefusion
