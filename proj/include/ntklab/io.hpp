#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ntklab/matrix.hpp"

namespace ntklab {

// Numeric CSV with a fixed header. Values are printed with %.17g so reruns
// of a deterministic computation produce byte-identical files.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);
  void append(std::span<const double> row);
  void close();

 private:
  std::ofstream out_;
  std::size_t width_;
  std::string path_;
};

std::string format_double(double v);

// Little-endian f64 row-major dump with an 8-byte header: n_rows then n_cols
// as 32-bit unsigned integers.
void write_matrix_bin(const std::string& path, const Matrix& m);
Matrix read_matrix_bin(const std::string& path);

// Binary PGM (P5), one byte per pixel.
void write_pgm(const std::string& path, const std::vector<unsigned char>& pixels,
               std::size_t width, std::size_t height);

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal standalone SVG line plot; log_y switches the y axis to log10.
void svg_line_plot(const std::string& path, const std::string& title, const std::string& x_label,
                   const std::string& y_label, const std::vector<SvgSeries>& series,
                   bool log_y = false);

// Montage of grayscale tiles (used for feature visualizations).
void svg_gray_montage(const std::string& path, const std::vector<std::vector<double>>& tiles,
                      std::size_t tile_w, std::size_t tile_h,
                      const std::vector<std::string>& captions);

// FNV-1a 64-bit hash of a file's bytes, as a 16-digit hex string.
std::string file_hash_hex(const std::string& path);

}  // namespace ntklab
