#include "sparsecps/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <system_error>

#include "sparsecps/errors.hpp"

namespace sparsecps::io {
namespace {

// Whitespace-separated numeric tokens of a text file.
class Tokens {
 public:
  Tokens(std::string text, fs::path origin) : text_(std::move(text)), origin_(std::move(origin)) {}

  bool at_end() {
    skip();
    return pos_ >= text_.size();
  }

  double real() {
    skip();
    double value = 0.0;
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) fail("expected a real number");
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return value;
  }

  Index integer() {
    const double v = real();
    if (v != std::floor(v) || v < 0) fail("expected a nonnegative integer");
    return static_cast<Index>(v);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(origin_.string() + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  std::string text_;
  fs::path origin_;
  std::size_t pos_ = 0;
};

void append_real(std::string& out, double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  out.append(buf, ptr);
}

nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd rows_matrix(const nlohmann::json& rows, Index n, const char* field) {
  if (!rows.is_array() || static_cast<Index>(rows.size()) != n)
    throw IoError(std::string("cross-spectrum field '") + field + "' must have n rows");
  Eigen::MatrixXd m(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != n)
      throw IoError(std::string("cross-spectrum field '") + field + "' must have n columns");
    for (Index j = 0; j < n; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

}  // namespace

void write_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::random_device rd;
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_real(double value) {
  std::string s;
  append_real(s, value);
  return s;
}

void write_matrix(const fs::path& path, const Eigen::MatrixXd& m) {
  std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 24);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out.push_back(' ');
      append_real(out, m(i, j));
    }
    out.push_back('\n');
  }
  write_atomic(path, out);
}

Eigen::MatrixXd read_matrix(const fs::path& path) {
  Tokens tok(read_file(path), path);
  const Index rows = tok.integer();
  const Index cols = tok.integer();
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = tok.real();
  if (!tok.at_end()) tok.fail("trailing data after matrix");
  return m;
}

void write_positions(const fs::path& path, const std::vector<Eigen::Vector3d>& positions) {
  std::string out;
  for (const auto& p : positions) {
    append_real(out, p.x());
    out.push_back(' ');
    append_real(out, p.y());
    out.push_back(' ');
    append_real(out, p.z());
    out.push_back('\n');
  }
  write_atomic(path, out);
}

std::vector<Eigen::Vector3d> read_positions(const fs::path& path) {
  Tokens tok(read_file(path), path);
  std::vector<Eigen::Vector3d> out;
  while (!tok.at_end()) {
    const double x = tok.real();
    const double y = tok.real();
    const double z = tok.real();
    out.emplace_back(x, y, z);
  }
  return out;
}

LeadField read_leadfield(const fs::path& matrix_path, const fs::path& positions_path) {
  LeadField lf;
  lf.entries = read_matrix(matrix_path);
  if (!positions_path.empty()) lf.source_positions = read_positions(positions_path);
  lf.validate();
  return lf;
}

void write_leadfield(const fs::path& matrix_path, const fs::path& positions_path,
                     const LeadField& lf) {
  write_matrix(matrix_path, lf.entries);
  if (!positions_path.empty() && lf.source_positions)
    write_positions(positions_path, *lf.source_positions);
}

void write_time_series(const fs::path& path, const TimeSeriesSet& series) {
  const Eigen::MatrixXd& s = series.samples;
  std::string out = std::to_string(s.rows()) + " " + std::to_string(s.cols()) + " ";
  append_real(out, series.sampling_rate);
  out.push_back('\n');
  out.reserve(out.size() + static_cast<std::size_t>(s.size()) * 24);
  for (Index t = 0; t < s.rows(); ++t) {
    for (Index c = 0; c < s.cols(); ++c) {
      if (c) out.push_back(' ');
      append_real(out, s(t, c));
    }
    out.push_back('\n');
  }
  write_atomic(path, out);
}

TimeSeriesSet read_time_series(const fs::path& path) {
  Tokens tok(read_file(path), path);
  const Index rows = tok.integer();
  const Index cols = tok.integer();
  TimeSeriesSet ts;
  ts.sampling_rate = tok.real();
  ts.samples.resize(rows, cols);
  for (Index t = 0; t < rows; ++t)
    for (Index c = 0; c < cols; ++c) ts.samples(t, c) = tok.real();
  if (!tok.at_end()) tok.fail("trailing data after time series");
  ts.validate();
  return ts;
}

nlohmann::json cross_spectrum_to_json(const CrossSpectrum& s, const nlohmann::json& meta) {
  return {{"schema", kCrossSpectrumSchema},
          {"frequency_hz", s.frequency_hz},
          {"n", s.channels()},
          {"re", matrix_rows(s.matrix.real())},
          {"im", matrix_rows(s.matrix.imag())},
          {"meta", meta}};
}

CrossSpectrum cross_spectrum_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("schema", std::string{}) != kCrossSpectrumSchema)
    throw IoError("unsupported cross-spectrum schema");
  try {
    const Index n = j.at("n").get<Index>();
    if (n < 1) throw IoError("cross-spectrum size must be positive");
    CrossSpectrum s;
    s.frequency_hz = j.at("frequency_hz").get<double>();
    const Eigen::MatrixXd re = rows_matrix(j.at("re"), n, "re");
    const Eigen::MatrixXd im = rows_matrix(j.at("im"), n, "im");
    s.matrix.resize(n, n);
    s.matrix.real() = re;
    s.matrix.imag() = im;
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed cross-spectrum: ") + e.what());
  }
}

void write_cross_spectrum(const fs::path& path, const CrossSpectrum& s,
                          const nlohmann::json& meta) {
  write_json(path, cross_spectrum_to_json(s, meta));
}

CrossSpectrum read_cross_spectrum(const fs::path& path, nlohmann::json* meta) {
  const nlohmann::json j = read_json(path);
  if (meta) *meta = j.value("meta", nlohmann::json::object());
  return cross_spectrum_from_json(j);
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_atomic(path, j.dump(1) + "\n");
}

}  // namespace sparsecps::io
