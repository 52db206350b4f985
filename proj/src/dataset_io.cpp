#include "ivbound/dataset_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ivbound/errors.hpp"

namespace ivbound {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

namespace {

double parse_double(std::string_view token, const std::filesystem::path& path, std::size_t line) {
  double out = 0.0;
  const auto* begin = token.data();
  const auto* end = token.data() + token.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc{} || res.ptr != end) {
    std::ostringstream msg;
    msg << path.string() << ":" << line << ": cannot parse number '" << token << "'";
    throw DataError(msg.str());
  }
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

}  // namespace

void save_dataset(const StoredDataset& stored, const std::filesystem::path& csv_path) {
  const IvDataset& ds = stored.data;
  ds.validate();
  std::ofstream out(csv_path);
  if (!out) throw DataError("cannot open for writing: " + csv_path.string());
  for (std::size_t j = 0; j < ds.d; ++j) out << "x_" << j << ",";
  out << "z,t,y\n";
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t j = 0; j < ds.d; ++j) out << format_double(ds.x[i * ds.d + j]) << ",";
    out << int(ds.z[i]) << "," << int(ds.t[i]) << "," << format_double(ds.y[i]) << "\n";
  }
  out.close();
  if (!out) throw DataError("write failed: " + csv_path.string());

  json meta;
  meta["seed"] = ds.seed;
  meta["d"] = ds.d;
  meta["n"] = ds.n;
  meta["y_scale"] = {{"min", ds.y_scale.min}, {"max", ds.y_scale.max}};
  meta["provenance"] = ds.provenance;
  if (ds.labels) {
    json labels;
    labels["sate"] = ds.labels->sate;
    if (ds.labels->lower) labels["lower"] = *ds.labels->lower;
    if (ds.labels->upper) labels["upper"] = *ds.labels->upper;
    meta["labels"] = labels;
  }
  if (stored.strata_probs) {
    json rows = json::array();
    for (const auto& row : *stored.strata_probs) {
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    meta["strata_probs"] = std::move(rows);
  }
  std::ofstream meta_out(sidecar_path(csv_path));
  if (!meta_out) throw DataError("cannot open for writing: " + sidecar_path(csv_path).string());
  meta_out << meta.dump(2) << "\n";
}

StoredDataset load_dataset(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open: " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + csv_path.string());
  const auto header = split_line(line);
  if (header.size() < 3 || header[header.size() - 3] != "z" || header[header.size() - 2] != "t" ||
      header.back() != "y")
    throw DataError(csv_path.string() + ": expected header x_0..x_{d-1},z,t,y");

  StoredDataset stored;
  IvDataset& ds = stored.data;
  ds.d = header.size() - 3;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << csv_path.string() << ":" << line_no << ": expected " << header.size() << " cells, got "
          << cells.size();
      throw DataError(msg.str());
    }
    for (std::size_t j = 0; j < ds.d; ++j) ds.x.push_back(parse_double(cells[j], csv_path, line_no));
    ds.z.push_back(static_cast<std::uint8_t>(parse_double(cells[ds.d], csv_path, line_no)));
    ds.t.push_back(static_cast<std::uint8_t>(parse_double(cells[ds.d + 1], csv_path, line_no)));
    ds.y.push_back(parse_double(cells[ds.d + 2], csv_path, line_no));
    ++ds.n;
  }

  const auto meta_path = sidecar_path(csv_path);
  if (std::filesystem::exists(meta_path)) {
    std::ifstream meta_in(meta_path);
    json meta;
    try {
      meta = json::parse(meta_in);
    } catch (const json::exception& e) {
      throw DataError(meta_path.string() + ": " + e.what());
    }
    ds.seed = meta.value("seed", std::uint64_t{0});
    ds.provenance = meta.value("provenance", std::string{});
    if (meta.contains("y_scale")) {
      ds.y_scale.min = meta["y_scale"].value("min", 0.0);
      ds.y_scale.max = meta["y_scale"].value("max", 1.0);
    }
    if (meta.contains("labels")) {
      DatasetLabels labels;
      labels.sate = meta["labels"].value("sate", 0.0);
      if (meta["labels"].contains("lower")) labels.lower = meta["labels"]["lower"].get<double>();
      if (meta["labels"].contains("upper")) labels.upper = meta["labels"]["upper"].get<double>();
      ds.labels = labels;
    }
    if (meta.contains("strata_probs")) {
      std::vector<std::array<double, kNumStrata>> probs;
      for (const auto& row : meta["strata_probs"]) {
        if (row.size() != kNumStrata)
          throw DataError(meta_path.string() + ": strata_probs rows must have 16 entries");
        std::array<double, kNumStrata> r{};
        for (int s = 0; s < kNumStrata; ++s) r[static_cast<std::size_t>(s)] = row[static_cast<std::size_t>(s)].get<double>();
        probs.push_back(r);
      }
      stored.strata_probs = std::move(probs);
    }
  }
  ds.validate();
  return stored;
}

std::optional<std::size_t> CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  return std::nullopt;
}

std::vector<double> CsvTable::column(std::size_t col) const {
  std::vector<double> out(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) out[i] = at(i, col);
  return out;
}

CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path.string());
  CsvTable table;
  table.columns = split_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != table.columns.size()) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << ": expected " << table.columns.size()
          << " cells, got " << cells.size();
      throw DataError(msg.str());
    }
    for (const auto& cell : cells) table.cells.push_back(parse_double(cell, path, line_no));
    ++table.n_rows;
  }
  return table;
}

void write_csv_table(const CsvTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    out << table.columns[j];
    out << (j + 1 == table.columns.size() ? '\n' : ',');
  }
  for (std::size_t i = 0; i < table.n_rows; ++i) {
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      out << format_double(table.at(i, j));
      out << (j + 1 == table.columns.size() ? '\n' : ',');
    }
  }
}

}  // namespace ivbound
