#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ivbound/core.hpp"

namespace ivbound {

/// Full-precision, locale-independent decimal rendering ("%.17g").
std::string format_double(double v);

/// Dataset plus the optional per-row strata probabilities a generator knows.
struct StoredDataset {
  IvDataset data;
  std::optional<std::vector<std::array<double, kNumStrata>>> strata_probs;
};

/// Writes `foo.csv` (header x_0..x_{d-1},z,t,y) and the `foo.meta.json`
/// sidecar carrying seed, shape, outcome scale, labels and provenance.
void save_dataset(const StoredDataset& stored, const std::filesystem::path& csv_path);
StoredDataset load_dataset(const std::filesystem::path& csv_path);

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// Generic numeric CSV table with named columns (RCT inputs).
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<double> cells;  // row-major
  std::size_t n_rows = 0;

  double at(std::size_t row, std::size_t col) const { return cells[row * columns.size() + col]; }
  std::optional<std::size_t> column_index(const std::string& name) const;
  std::vector<double> column(std::size_t col) const;
};

CsvTable read_csv_table(const std::filesystem::path& path);
void write_csv_table(const CsvTable& table, const std::filesystem::path& path);

}  // namespace ivbound
