#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "roadsurvey/error.hpp"
#include "roadsurvey/io.hpp"

namespace roadsurvey::csv {

/// Minimal reader for the unquoted, comma-separated files this project
/// exchanges. The first non-blank line is the header; columns are looked up
/// by name so extra columns are ignored. Cells are views into `text`, which
/// must outlive the table.
class Table {
 public:
  struct Row {
    std::size_t line;
    std::vector<std::string_view> cells;
  };

  explicit Table(std::string_view text) {
    const auto lines = io::split_lines(text);
    bool have_header = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (io::is_blank(lines[i])) continue;
      auto cells = split(lines[i]);
      if (!have_header) {
        header_ = std::move(cells);
        have_header = true;
      } else {
        if (cells.size() != header_.size())
          throw SchemaError("expected " + std::to_string(header_.size()) + " columns, found " +
                                std::to_string(cells.size()),
                            i + 1);
        rows_.push_back({i + 1, std::move(cells)});
      }
    }
    if (!have_header) throw SchemaError("missing header line", 1);
  }

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
      if (header_[i] == name) return i;
    throw SchemaError("header lacks required column '" + std::string(name) + "'", 1);
  }

  const std::vector<Row>& rows() const noexcept { return rows_; }

  static double number(const Row& r, std::size_t col, std::string_view what) {
    const auto cell = r.cells[col];
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size())
      throw SchemaError(std::string(what) + " '" + std::string(cell) + "' is not a number", r.line);
    return v;
  }

 private:
  static std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
      auto end = line.find(',', pos);
      auto cell = line.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      out.push_back(cell);
      if (end == std::string_view::npos) break;
      pos = end + 1;
    }
    return out;
  }

  std::vector<std::string_view> header_;
  std::vector<Row> rows_;
};

}  // namespace roadsurvey::csv
