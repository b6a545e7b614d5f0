#pragma once

// Report emission: report.json (sorted keys) plus plot-ready CSV tables.

#include "phocap/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace phocap {

inline constexpr int kReportDigits = 17;

/// Version string captured at configure time, "unknown" outside a git checkout.
const char* git_describe() noexcept;

/// 16-digit lowercase hex.
std::string hex_hash(std::uint64_t h);

nlohmann::json report_json(const ExperimentResult& r);

/// Writes report.json and the CSV tables into out_dir (created if missing).
/// Returns the paths written. Throws an I/O error if the directory is unwritable.
std::vector<std::filesystem::path> emit_report(const ExperimentResult& r, const std::filesystem::path& out_dir);

}  // namespace phocap
