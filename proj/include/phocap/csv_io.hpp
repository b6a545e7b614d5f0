#pragma once

// CSV ingestion and export.
//
// Spectra (wide):  wavelength_nm,<id1>,<id2>,...   one row per wavelength
// A/Ci (long):     sample_id,Ci,A,leaf_temp_C,par  rows grouped by sample
// Labels:          sample_id,<name1>,<name2>,...   empty or NA = missing
// Metadata:        sample_id,cultivar,nitrogen

#include "phocap/aci.hpp"
#include "phocap/spectral.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phocap {

/// Raw rows of a CSV file with RFC 4180 quoting. Row numbers are 1-based file
/// lines and are kept for error messages.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line;  // file line of each row
  std::string source;             // file name used in messages

  std::size_t column(std::string_view name) const;  // schema error if absent
};

CsvTable read_csv(std::istream& in, std::string_view source);
CsvTable read_csv_file(const std::filesystem::path& path);

/// Parses a full cell as a finite double; parse error with location otherwise.
double parse_number(std::string_view cell, const CsvTable& t, std::size_t row, std::size_t col);

std::string format_number(double v, int digits = 9);
void write_csv_row(std::ostream& out, const std::vector<std::string>& cells);

struct SpectraTable {
  std::vector<double> wavelengths;
  std::vector<std::string> ids;
  Eigen::MatrixXd values;  // samples x wavelengths

  std::vector<std::pair<std::string, Spectrum>> spectra(SpectrumKind kind) const;
  /// Same table with values resampled onto a new grid.
  SpectraTable resampled(const WavelengthGrid& grid, SpectrumKind kind) const;
};

SpectraTable read_spectra_csv(std::istream& in, std::string_view source);
SpectraTable load_spectra_table(const std::filesystem::path& path);
std::vector<std::pair<std::string, Spectrum>> load_spectra_csv(const std::filesystem::path& path,
                                                                SpectrumKind kind);
void write_spectra_csv(std::ostream& out, const SpectraTable& t, int digits = 9);
void save_spectra_csv(const std::filesystem::path& path, const SpectraTable& t, int digits = 9);

using AciRecords = std::vector<std::pair<std::string, AciCurve>>;

/// leaf_temp_C and par of a curve are the means over its rows.
AciRecords read_aci_csv(std::istream& in, std::string_view source);
AciRecords load_aci_csv(const std::filesystem::path& path);
void write_aci_csv(std::ostream& out, const AciRecords& curves, int digits = 9);
void save_aci_csv(const std::filesystem::path& path, const AciRecords& curves, int digits = 9);

struct LabelTable {
  std::vector<std::string> ids;
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // samples x names, NaN = missing

  /// Column by name; schema error if absent.
  Eigen::VectorXd column(std::string_view name) const;
};

LabelTable read_labels_csv(std::istream& in, std::string_view source);
LabelTable load_labels_csv(const std::filesystem::path& path);
void write_labels_csv(std::ostream& out, const LabelTable& t, int digits = 9);
void save_labels_csv(const std::filesystem::path& path, const LabelTable& t, int digits = 9);

struct SampleMeta {
  std::string id;
  std::string cultivar;
  std::string nitrogen;

  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

std::vector<SampleMeta> read_metadata_csv(std::istream& in, std::string_view source);
std::vector<SampleMeta> load_metadata_csv(const std::filesystem::path& path);
void save_metadata_csv(const std::filesystem::path& path, const std::vector<SampleMeta>& meta);

/// Opens for writing, creating parent directories; I/O error on failure.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace phocap
