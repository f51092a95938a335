#pragma once

// Plain-text file formats.
//
// Matrix / lead-field file:   first line "rows cols", then `rows` lines of
//                             `cols` whitespace-separated decimal reals.
// Positions file:             n lines of "x y z" in meters.
// Time-series file:           first line "T d fs", then T lines of d reals.
// Cross-spectrum file (JSON): {"schema": "sparsecps.cross_spectrum/1",
//                              "frequency_hz": f, "n": n,
//                              "re": [[...] x n], "im": [[...] x n], "meta": {...}}
//                             with re/im given row-major.
// Reals are written with 17 significant digits so files round-trip exactly.

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "sparsecps/kron_ops.hpp"
#include "sparsecps/spectral.hpp"
#include "json.hpp"

namespace sparsecps::io {

namespace fs = std::filesystem;

inline constexpr const char* kCrossSpectrumSchema = "sparsecps.cross_spectrum/1";

// Write to a sibling temporary file, then rename over `path`.
void write_atomic(const fs::path& path, const std::string& contents);
std::string read_file(const fs::path& path);

std::string format_real(double value);

void write_matrix(const fs::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const fs::path& path);

void write_positions(const fs::path& path, const std::vector<Eigen::Vector3d>& positions);
std::vector<Eigen::Vector3d> read_positions(const fs::path& path);

// Positions are read from `positions_path` when it is non-empty.
LeadField read_leadfield(const fs::path& matrix_path, const fs::path& positions_path = {});
void write_leadfield(const fs::path& matrix_path, const fs::path& positions_path,
                     const LeadField& lf);

void write_time_series(const fs::path& path, const TimeSeriesSet& series);
TimeSeriesSet read_time_series(const fs::path& path);

nlohmann::json cross_spectrum_to_json(const CrossSpectrum& s,
                                      const nlohmann::json& meta = nlohmann::json::object());
CrossSpectrum cross_spectrum_from_json(const nlohmann::json& j);
void write_cross_spectrum(const fs::path& path, const CrossSpectrum& s,
                          const nlohmann::json& meta = nlohmann::json::object());
CrossSpectrum read_cross_spectrum(const fs::path& path, nlohmann::json* meta = nullptr);

nlohmann::json read_json(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);

}  // namespace sparsecps::io
