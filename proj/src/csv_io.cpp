#include "phocap/csv_io.hpp"

#include "phocap/dataset.hpp"
#include "phocap/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace phocap {

namespace {

std::string where(const CsvTable& t, std::size_t line) {
  return t.source + ":" + std::to_string(line);
}

// Splits one logical record; quoted fields may span lines.
bool next_record(std::istream& in, std::vector<std::string>& cells, std::size_t& line,
                 std::string_view source) {
  cells.clear();
  std::string raw;
  if (!std::getline(in, raw)) return false;
  ++line;
  const std::size_t start_line = line;
  std::string cell;
  bool quoted = false;
  std::size_t i = 0;
  for (;;) {
    if (i >= raw.size()) {
      if (!quoted) break;
      std::string more;
      if (!std::getline(in, more))
        throw Error(ErrorKind::Parse, std::string(source) + ":" + std::to_string(start_line) +
                                          ": unterminated quoted field");
      ++line;
      cell += '\n';
      raw = std::move(more);
      i = 0;
      continue;
    }
    const char c = raw[i++];
    if (quoted) {
      if (c == '"') {
        if (i < raw.size() && raw[i] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"' && cell.empty()) {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c == '\r' && i == raw.size()) {
      // CRLF line ending
    } else {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return true;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return in;
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw Error(ErrorKind::Schema, source + ": missing column '" + std::string(name) + "'");
}

CsvTable read_csv(std::istream& in, std::string_view source) {
  CsvTable t;
  t.source = source;
  std::size_t line = 0;
  if (!next_record(in, t.header, line, source))
    throw Error(ErrorKind::Schema, std::string(source) + ": empty file, expected a header row");
  std::vector<std::string> cells;
  for (;;) {
    const std::size_t before = line;
    if (!next_record(in, cells, line, source)) break;
    if (cells.size() == 1 && cells[0].empty()) continue;  // blank line
    if (cells.size() != t.header.size())
      throw Error(ErrorKind::Parse, where(t, before + 1) + ": expected " + std::to_string(t.header.size()) +
                                        " fields, found " + std::to_string(cells.size()));
    t.rows.push_back(cells);
    t.line.push_back(before + 1);
  }
  return t;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_csv(in, path.string());
}

double parse_number(std::string_view cell, const CsvTable& t, std::size_t row, std::size_t col) {
  auto s = cell;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) {
    const std::string colname = col < t.header.size() ? t.header[col] : "?";
    throw Error(ErrorKind::Parse, where(t, t.line[row]) + ": column " + std::to_string(col + 1) + " (" +
                                      colname + "): malformed number '" + std::string(cell) + "'");
  }
  return v;
}

std::string format_number(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    const auto& c = cells[i];
    if (c.find_first_of(",\"\n\r") == std::string::npos) {
      out << c;
    } else {
      out << '"';
      for (char ch : c) out << (ch == '"' ? "\"\"" : std::string(1, ch));
      out << '"';
    }
  }
  out << '\n';
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

namespace {

void check_ids(const CsvTable& t, const std::vector<std::string>& ids) {
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (id.empty()) throw Error(ErrorKind::Schema, t.source + ": empty sample id");
    if (!seen.insert(id).second) throw Error(ErrorKind::Schema, t.source + ": duplicate sample id '" + id + "'");
  }
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace

std::vector<std::pair<std::string, Spectrum>> SpectraTable::spectra(SpectrumKind kind) const {
  const WavelengthGrid grid(wavelengths);
  std::vector<std::pair<std::string, Spectrum>> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    try {
      out.emplace_back(ids[i], Spectrum(grid, values.row(static_cast<Index>(i)).transpose(), kind));
    } catch (const Error& e) {
      throw Error(e.kind(), "sample " + ids[i] + ": " + e.what());
    }
  }
  return out;
}

SpectraTable SpectraTable::resampled(const WavelengthGrid& grid, SpectrumKind kind) const {
  if (WavelengthGrid(wavelengths) == grid) return *this;
  SpectraTable out{grid.wavelengths(), ids, Eigen::MatrixXd(values.rows(), static_cast<Index>(grid.size()))};
  const auto specs = spectra(kind);
  for (std::size_t i = 0; i < specs.size(); ++i)
    out.values.row(static_cast<Index>(i)) = resample(specs[i].second, grid).values().transpose();
  return out;
}

SpectraTable read_spectra_csv(std::istream& in, std::string_view source) {
  const auto t = read_csv(in, source);
  if (t.header.empty() || t.header[0] != "wavelength_nm")
    throw Error(ErrorKind::Schema, t.source + ": first header cell must be 'wavelength_nm'");
  if (t.header.size() < 2) throw Error(ErrorKind::Schema, t.source + ": no sample columns");
  if (t.rows.size() < 2) throw Error(ErrorKind::Schema, t.source + ": need at least 2 wavelength rows");
  SpectraTable s;
  s.ids.assign(t.header.begin() + 1, t.header.end());
  check_ids(t, s.ids);
  s.values.resize(static_cast<Index>(s.ids.size()), static_cast<Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double nm = parse_number(t.rows[r][0], t, r, 0);
    if (!(nm > 0.0)) throw Error(ErrorKind::Schema, where(t, t.line[r]) + ": wavelength must be positive");
    if (!s.wavelengths.empty() && !(nm > s.wavelengths.back()))
      throw Error(ErrorKind::Schema, where(t, t.line[r]) + ": wavelengths must be strictly increasing (" +
                                         format_number(nm) + " after " + format_number(s.wavelengths.back()) + ")");
    s.wavelengths.push_back(nm);
    for (std::size_t c = 1; c < t.header.size(); ++c)
      s.values(static_cast<Index>(c - 1), static_cast<Index>(r)) = parse_number(t.rows[r][c], t, r, c);
  }
  return s;
}

SpectraTable load_spectra_table(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_spectra_csv(in, path.string());
}

std::vector<std::pair<std::string, Spectrum>> load_spectra_csv(const std::filesystem::path& path,
                                                                SpectrumKind kind) {
  return load_spectra_table(path).spectra(kind);
}

void write_spectra_csv(std::ostream& out, const SpectraTable& t, int digits) {
  std::vector<std::string> cells{"wavelength_nm"};
  cells.insert(cells.end(), t.ids.begin(), t.ids.end());
  write_csv_row(out, cells);
  for (std::size_t w = 0; w < t.wavelengths.size(); ++w) {
    cells.assign(1, format_number(t.wavelengths[w], 12));
    for (Index i = 0; i < t.values.rows(); ++i)
      cells.push_back(format_number(t.values(i, static_cast<Index>(w)), digits));
    write_csv_row(out, cells);
  }
}

void save_spectra_csv(const std::filesystem::path& path, const SpectraTable& t, int digits) {
  auto out = open_output(path);
  write_spectra_csv(out, t, digits);
  finish(out, path);
}

AciRecords read_aci_csv(std::istream& in, std::string_view source) {
  const auto t = read_csv(in, source);
  const auto c_id = t.column("sample_id");
  const auto c_ci = t.column("Ci");
  const auto c_a = t.column("A");
  const auto c_t = t.column("leaf_temp_C");
  const auto c_par = t.column("par");

  AciRecords out;
  std::set<std::string> closed;
  std::vector<double> temps, pars;
  auto close_curve = [&]() {
    if (out.empty()) return;
    auto& [id, curve] = out.back();
    double st = 0.0, sp = 0.0;
    for (double v : temps) st += v;
    for (double v : pars) sp += v;
    curve.leaf_temp_c = st / static_cast<double>(temps.size());
    curve.par = sp / static_cast<double>(pars.size());
    try {
      curve.validate();
    } catch (const Error& e) {
      throw Error(e.kind(), t.source + ": sample " + id + ": " + e.what());
    }
    closed.insert(id);
    temps.clear();
    pars.clear();
  };

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& id = t.rows[r][c_id];
    if (id.empty()) throw Error(ErrorKind::Schema, where(t, t.line[r]) + ": empty sample id");
    if (out.empty() || out.back().first != id) {
      close_curve();
      if (closed.count(id))
        throw Error(ErrorKind::Schema, where(t, t.line[r]) + ": rows of sample '" + id + "' are not contiguous");
      out.emplace_back(id, AciCurve{});
    }
    out.back().second.points.push_back({parse_number(t.rows[r][c_ci], t, r, c_ci),
                                        parse_number(t.rows[r][c_a], t, r, c_a)});
    temps.push_back(parse_number(t.rows[r][c_t], t, r, c_t));
    pars.push_back(parse_number(t.rows[r][c_par], t, r, c_par));
  }
  close_curve();
  return out;
}

AciRecords load_aci_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_aci_csv(in, path.string());
}

void write_aci_csv(std::ostream& out, const AciRecords& curves, int digits) {
  write_csv_row(out, {"sample_id", "Ci", "A", "leaf_temp_C", "par"});
  for (const auto& [id, c] : curves)
    for (const auto& p : c.points)
      write_csv_row(out, {id, format_number(p.ci, digits), format_number(p.a, digits),
                          format_number(c.leaf_temp_c, digits), format_number(c.par, digits)});
}

void save_aci_csv(const std::filesystem::path& path, const AciRecords& curves, int digits) {
  auto out = open_output(path);
  write_aci_csv(out, curves, digits);
  finish(out, path);
}

Eigen::VectorXd LabelTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values.col(static_cast<Index>(i));
  throw Error(ErrorKind::Schema, "labels have no column '" + std::string(name) + "'");
}

LabelTable read_labels_csv(std::istream& in, std::string_view source) {
  const auto t = read_csv(in, source);
  if (t.header.empty() || t.header[0] != "sample_id")
    throw Error(ErrorKind::Schema, t.source + ": first header cell must be 'sample_id'");
  LabelTable l;
  l.names.assign(t.header.begin() + 1, t.header.end());
  l.values.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(l.names.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    l.ids.push_back(t.rows[r][0]);
    for (std::size_t c = 1; c < t.header.size(); ++c) {
      const auto& cell = t.rows[r][c];
      l.values(static_cast<Index>(r), static_cast<Index>(c - 1)) =
          (cell.empty() || cell == "NA") ? std::numeric_limits<double>::quiet_NaN() : parse_number(cell, t, r, c);
    }
  }
  check_ids(t, l.ids);
  return l;
}

LabelTable load_labels_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_labels_csv(in, path.string());
}

void write_labels_csv(std::ostream& out, const LabelTable& t, int digits) {
  std::vector<std::string> cells{"sample_id"};
  cells.insert(cells.end(), t.names.begin(), t.names.end());
  write_csv_row(out, cells);
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    cells.assign(1, t.ids[i]);
    for (Index j = 0; j < t.values.cols(); ++j) {
      const double v = t.values(static_cast<Index>(i), j);
      cells.push_back(std::isfinite(v) ? format_number(v, digits) : "NA");
    }
    write_csv_row(out, cells);
  }
}

void save_labels_csv(const std::filesystem::path& path, const LabelTable& t, int digits) {
  auto out = open_output(path);
  write_labels_csv(out, t, digits);
  finish(out, path);
}

std::vector<SampleMeta> read_metadata_csv(std::istream& in, std::string_view source) {
  const auto t = read_csv(in, source);
  const auto c_id = t.column("sample_id");
  const auto c_cv = t.column("cultivar");
  const auto c_n = t.column("nitrogen");
  std::vector<SampleMeta> out;
  std::vector<std::string> ids;
  for (const auto& row : t.rows) {
    out.push_back({row[c_id], row[c_cv], row[c_n]});
    ids.push_back(row[c_id]);
  }
  check_ids(t, ids);
  return out;
}

std::vector<SampleMeta> load_metadata_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_metadata_csv(in, path.string());
}

void save_metadata_csv(const std::filesystem::path& path, const std::vector<SampleMeta>& meta) {
  auto out = open_output(path);
  write_csv_row(out, {"sample_id", "cultivar", "nitrogen"});
  for (const auto& m : meta) write_csv_row(out, {m.id, m.cultivar, m.nitrogen});
  finish(out, path);
}

}  // namespace phocap
