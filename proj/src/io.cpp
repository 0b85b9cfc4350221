#include "ntklab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ntklab {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns)
    : out_(path), width_(columns.size()), path_(path) {
  if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ << ',';
    out_ << columns[i];
  }
  out_ << '\n';
}

void CsvWriter::append(std::span<const double> row) {
  if (row.size() != width_) throw std::invalid_argument("CsvWriter: row width mismatch");
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out_ << ',';
    out_ << format_double(row[i]);
  }
  out_ << '\n';
}

void CsvWriter::close() {
  out_.close();
  if (out_.fail()) throw std::runtime_error("CsvWriter: write failed for " + path_);
}

void write_matrix_bin(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_matrix_bin: cannot open " + path);
  const std::uint32_t header[2] = {static_cast<std::uint32_t>(m.rows),
                                   static_cast<std::uint32_t>(m.cols)};
  out.write(reinterpret_cast<const char*>(header), 8);
  out.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write_matrix_bin: write failed for " + path);
}

Matrix read_matrix_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_matrix_bin: cannot open " + path);
  std::uint32_t header[2];
  if (!in.read(reinterpret_cast<char*>(header), 8))
    throw std::runtime_error("read_matrix_bin: truncated header in " + path);
  Matrix m(header[0], header[1]);
  if (!in.read(reinterpret_cast<char*>(m.data.data()),
               static_cast<std::streamsize>(m.data.size() * sizeof(double))))
    throw std::runtime_error("read_matrix_bin: truncated payload in " + path);
  return m;
}

void write_pgm(const std::string& path, const std::vector<unsigned char>& pixels,
               std::size_t width, std::size_t height) {
  if (pixels.size() != width * height) throw std::invalid_argument("write_pgm: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

namespace {

constexpr double kPlotW = 820.0, kPlotH = 520.0;
constexpr double kMarginL = 70.0, kMarginR = 150.0, kMarginT = 45.0, kMarginB = 55.0;

const char* series_color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

void svg_line_plot(const std::string& path, const std::string& title, const std::string& x_label,
                   const std::string& y_label, const std::vector<SvgSeries>& series, bool log_y) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double yv = s.y[i];
      if (log_y) {
        if (yv <= 0.0) continue;
        yv = std::log10(yv);
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, yv);
      ymax = std::max(ymax, yv);
    }
  }
  if (xmin > xmax) {
    xmin = 0.0;
    xmax = 1.0;
  }
  if (ymin > ymax) {
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;

  const double iw = kPlotW - kMarginL - kMarginR;
  const double ih = kPlotH - kMarginT - kMarginB;
  auto px = [&](double x) { return kMarginL + (x - xmin) / (xmax - xmin) * iw; };
  auto py = [&](double yv) {
    if (log_y) yv = std::log10(std::max(yv, 1e-300));
    return kMarginT + (1.0 - (yv - ymin) / (ymax - ymin)) * ih;
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg_line_plot: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kPlotW << "\" height=\"" << kPlotH
      << "\" viewBox=\"0 0 " << kPlotW << " " << kPlotH << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kPlotW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";
  // axes
  out << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT + ih << "\" x2=\"" << kMarginL + iw
      << "\" y2=\"" << kMarginT + ih << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT << "\" x2=\"" << kMarginL << "\" y2=\""
      << kMarginT + ih << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double fx = xmin + (xmax - xmin) * t / 5.0;
    const double fy = ymin + (ymax - ymin) * t / 5.0;
    out << "<text x=\"" << px(fx) << "\" y=\"" << kMarginT + ih + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt_tick(fx) << "</text>\n";
    const std::string ylab = log_y ? ("1e" + fmt_tick(fy)) : fmt_tick(fy);
    out << "<text x=\"" << kMarginL - 6 << "\" y=\"" << kMarginT + ih - ih * t / 5.0 + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << ylab << "</text>\n";
  }
  out << "<text x=\"" << kMarginL + iw / 2 << "\" y=\"" << kPlotH - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << kMarginT + ih / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << kMarginT + ih / 2 << ")\">" << y_label << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    out << "<polyline fill=\"none\" stroke=\"" << series_color(s) << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (log_y && series[s].y[i] <= 0.0) continue;
      out << px(series[s].x[i]) << "," << py(series[s].y[i]) << " ";
    }
    out << "\"/>\n";
    out << "<text x=\"" << kMarginL + iw + 10 << "\" y=\"" << kMarginT + 14 + 16.0 * s
        << "\" font-size=\"12\" fill=\"" << series_color(s) << "\">" << series[s].label
        << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("svg_line_plot: write failed for " + path);
}

void svg_gray_montage(const std::string& path, const std::vector<std::vector<double>>& tiles,
                      std::size_t tile_w, std::size_t tile_h,
                      const std::vector<std::string>& captions) {
  const std::size_t per_row = 8;
  const double cell = 96.0, pad = 10.0, cap_h = 16.0;
  const std::size_t rows = (tiles.size() + per_row - 1) / per_row;
  const double width = per_row * (cell + pad) + pad;
  const double height = rows * (cell + pad + cap_h) + pad;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg_gray_montage: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const auto& tile = tiles[t];
    if (tile.size() != tile_w * tile_h) throw std::invalid_argument("svg_gray_montage: tile size");
    double lo = *std::min_element(tile.begin(), tile.end());
    double hi = *std::max_element(tile.begin(), tile.end());
    if (hi - lo < 1e-300) hi = lo + 1.0;
    const double ox = pad + (t % per_row) * (cell + pad);
    const double oy = pad + (t / per_row) * (cell + pad + cap_h);
    const double sx = cell / tile_w, sy = cell / tile_h;
    for (std::size_t r = 0; r < tile_h; ++r) {
      for (std::size_t c = 0; c < tile_w; ++c) {
        const int g = static_cast<int>(std::lround(255.0 * (tile[r * tile_w + c] - lo) / (hi - lo)));
        out << "<rect x=\"" << ox + c * sx << "\" y=\"" << oy + r * sy << "\" width=\"" << sx + 0.1
            << "\" height=\"" << sy + 0.1 << "\" fill=\"rgb(" << g << "," << g << "," << g
            << ")\"/>\n";
      }
    }
    if (t < captions.size()) {
      out << "<text x=\"" << ox + cell / 2 << "\" y=\"" << oy + cell + 12
          << "\" text-anchor=\"middle\" font-size=\"10\">" << captions[t] << "</text>\n";
    }
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("svg_gray_montage: write failed for " + path);
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("file_hash_hex: cannot open " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[8192];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace ntklab
