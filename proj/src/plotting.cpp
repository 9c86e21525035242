// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/plotting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace pilotbench {

namespace {

struct Range {
  double lo = 0, hi = 1;
  double span() const { return hi - lo; }
};

Range axis_range(const std::vector<PlotSeries>& series, bool y_axis) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double v = y_axis ? s.y[i] : s.x[i];
      const double pad = y_axis && i < s.ci.size() ? s.ci[i] : 0.0;
      lo = std::min(lo, v - pad);
      hi = std::max(hi, v + pad);
    }
  }
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0, 1};
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double margin = 0.06 * (hi - lo);
  return {lo - margin, hi + margin};
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b"};
const std::uint8_t kPaletteRgb[][3] = {{31, 119, 180}, {214, 39, 40},
                                       {44, 160, 44},  {148, 103, 189},
                                       {255, 127, 14}, {140, 86, 75}};

std::string fmt_tick(double v) {
  char buf[32];
  if (std::abs(v) >= 1000 || (std::abs(v) < 0.01 && v != 0))
    std::snprintf(buf, sizeof(buf), "%.2g", v);
  else
    std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// --- 5x7 bitmap font (ASCII 32..126 subset used in labels) ---------------

// Each glyph is 5 columns x 7 rows, column-major bits (LSB = top row).
std::uint8_t glyph_col(char c, int col) {
  static const struct {
    char ch;
    std::uint8_t cols[5];
  } table[] = {
      {' ', {0, 0, 0, 0, 0}},
      {'-', {0x08, 0x08, 0x08, 0x08, 0x08}},
      {'.', {0x00, 0x60, 0x60, 0x00, 0x00}},
      {',', {0x00, 0xa0, 0x60, 0x00, 0x00}},
      {'+', {0x08, 0x08, 0x3e, 0x08, 0x08}},
      {'/', {0x40, 0x30, 0x08, 0x06, 0x01}},
      {'(', {0x00, 0x1c, 0x22, 0x41, 0x00}},
      {')', {0x00, 0x41, 0x22, 0x1c, 0x00}},
      {'=', {0x14, 0x14, 0x14, 0x14, 0x14}},
      {'_', {0x40, 0x40, 0x40, 0x40, 0x40}},
      {'0', {0x3e, 0x51, 0x49, 0x45, 0x3e}},
      {'1', {0x00, 0x42, 0x7f, 0x40, 0x00}},
      {'2', {0x42, 0x61, 0x51, 0x49, 0x46}},
      {'3', {0x21, 0x41, 0x45, 0x4b, 0x31}},
      {'4', {0x18, 0x14, 0x12, 0x7f, 0x10}},
      {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
      {'6', {0x3c, 0x4a, 0x49, 0x49, 0x30}},
      {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
      {'8', {0x36, 0x49, 0x49, 0x49, 0x36}},
      {'9', {0x06, 0x49, 0x49, 0x29, 0x1e}},
      {'a', {0x20, 0x54, 0x54, 0x54, 0x78}},
      {'b', {0x7f, 0x48, 0x44, 0x44, 0x38}},
      {'c', {0x38, 0x44, 0x44, 0x44, 0x20}},
      {'d', {0x38, 0x44, 0x44, 0x48, 0x7f}},
      {'e', {0x38, 0x54, 0x54, 0x54, 0x18}},
      {'f', {0x08, 0x7e, 0x09, 0x01, 0x02}},
      {'g', {0x0c, 0x52, 0x52, 0x52, 0x3e}},
      {'h', {0x7f, 0x08, 0x04, 0x04, 0x78}},
      {'i', {0x00, 0x44, 0x7d, 0x40, 0x00}},
      {'j', {0x20, 0x40, 0x44, 0x3d, 0x00}},
      {'k', {0x7f, 0x10, 0x28, 0x44, 0x00}},
      {'l', {0x00, 0x41, 0x7f, 0x40, 0x00}},
      {'m', {0x7c, 0x04, 0x18, 0x04, 0x78}},
      {'n', {0x7c, 0x08, 0x04, 0x04, 0x78}},
      {'o', {0x38, 0x44, 0x44, 0x44, 0x38}},
      {'p', {0x7c, 0x14, 0x14, 0x14, 0x08}},
      {'q', {0x08, 0x14, 0x14, 0x18, 0x7c}},
      {'r', {0x7c, 0x08, 0x04, 0x04, 0x08}},
      {'s', {0x48, 0x54, 0x54, 0x54, 0x20}},
      {'t', {0x04, 0x3f, 0x44, 0x40, 0x20}},
      {'u', {0x3c, 0x40, 0x40, 0x20, 0x7c}},
      {'v', {0x1c, 0x20, 0x40, 0x20, 0x1c}},
      {'w', {0x3c, 0x40, 0x30, 0x40, 0x3c}},
      {'x', {0x44, 0x28, 0x10, 0x28, 0x44}},
      {'y', {0x0c, 0x50, 0x50, 0x50, 0x3c}},
      {'z', {0x44, 0x64, 0x54, 0x4c, 0x44}},
      {'A', {0x7e, 0x11, 0x11, 0x11, 0x7e}},
      {'B', {0x7f, 0x49, 0x49, 0x49, 0x36}},
      {'C', {0x3e, 0x41, 0x41, 0x41, 0x22}},
      {'D', {0x7f, 0x41, 0x41, 0x22, 0x1c}},
      {'E', {0x7f, 0x49, 0x49, 0x49, 0x41}},
      {'F', {0x7f, 0x09, 0x09, 0x09, 0x01}},
      {'G', {0x3e, 0x41, 0x49, 0x49, 0x7a}},
      {'H', {0x7f, 0x08, 0x08, 0x08, 0x7f}},
      {'I', {0x00, 0x41, 0x7f, 0x41, 0x00}},
      {'J', {0x20, 0x40, 0x41, 0x3f, 0x01}},
      {'K', {0x7f, 0x08, 0x14, 0x22, 0x41}},
      {'L', {0x7f, 0x40, 0x40, 0x40, 0x40}},
      {'M', {0x7f, 0x02, 0x0c, 0x02, 0x7f}},
      {'N', {0x7f, 0x04, 0x08, 0x10, 0x7f}},
      {'O', {0x3e, 0x41, 0x41, 0x41, 0x3e}},
      {'P', {0x7f, 0x09, 0x09, 0x09, 0x06}},
      {'Q', {0x3e, 0x41, 0x51, 0x21, 0x5e}},
      {'R', {0x7f, 0x09, 0x19, 0x29, 0x46}},
      {'S', {0x46, 0x49, 0x49, 0x49, 0x31}},
      {'T', {0x01, 0x01, 0x7f, 0x01, 0x01}},
      {'U', {0x3f, 0x40, 0x40, 0x40, 0x3f}},
      {'V', {0x1f, 0x20, 0x40, 0x20, 0x1f}},
      {'W', {0x3f, 0x40, 0x38, 0x40, 0x3f}},
      {'X', {0x63, 0x14, 0x08, 0x14, 0x63}},
      {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}},
      {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
  };
  for (const auto& g : table)
    if (g.ch == c) return g.cols[col];
  return col == 2 ? 0x2a : 0;  // unknown chars render as a dotted column
}

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), pix_(3 * w * h, 255) {}

  void set(int x, int y, const std::uint8_t rgb[3]) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    std::uint8_t* p = &pix_[3 * (y * w_ + x)];
    p[0] = rgb[0];
    p[1] = rgb[1];
    p[2] = rgb[2];
  }

  void line(double x0, double y0, double x1, double y1,
            const std::uint8_t rgb[3]) {
    const int steps =
        std::max(2, static_cast<int>(std::hypot(x1 - x0, y1 - y0)) * 2);
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      set(static_cast<int>(std::lround(x0 + t * (x1 - x0))),
          static_cast<int>(std::lround(y0 + t * (y1 - y0))), rgb);
    }
  }

  void thick_line(double x0, double y0, double x1, double y1,
                  const std::uint8_t rgb[3]) {
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        if (dx == 0 || dy == 0) line(x0 + dx, y0 + dy, x1 + dx, y1 + dy, rgb);
  }

  void marker(int x, int y, const std::uint8_t rgb[3]) {
    for (int dx = -2; dx <= 2; ++dx)
      for (int dy = -2; dy <= 2; ++dy)
        if (dx * dx + dy * dy <= 4) set(x + dx, y + dy, rgb);
  }

  void text(int x, int y, const std::string& s, const std::uint8_t rgb[3]) {
    for (std::size_t i = 0; i < s.size(); ++i)
      for (int col = 0; col < 5; ++col) {
        const std::uint8_t bits = glyph_col(s[i], col);
        for (int row = 0; row < 7; ++row)
          if (bits & (1u << row))
            set(x + static_cast<int>(i) * 6 + col, y + row, rgb);
      }
  }

  int width() const { return w_; }
  int height() const { return h_; }
  const std::vector<std::uint8_t>& pixels() const { return pix_; }

 private:
  int w_, h_;
  std::vector<std::uint8_t> pix_;
};

// --- PNG encoding (stored deflate blocks; zlib wrapper; CRC32/Adler32) ----

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len,
                       std::uint32_t crc = 0xffffffffu) {
  static std::uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (std::uint32_t n = 0; n < 256; ++n) {
      std::uint32_t c = n;
      for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      table[n] = c;
    }
    init = true;
  }
  for (std::size_t i = 0; i < len; ++i)
    crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
  return crc;
}

void push_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void png_chunk(std::string& out, const char type[4], const std::string& data) {
  push_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  push_u32(out, ~crc32_of(reinterpret_cast<const std::uint8_t*>(body.data()),
                          body.size()));
}

std::string png_encode(const Canvas& canvas) {
  const int w = canvas.width(), h = canvas.height();
  // Filter-0 scanlines.
  std::string raw;
  raw.reserve(static_cast<std::size_t>(h) * (1 + 3 * w));
  for (int y = 0; y < h; ++y) {
    raw.push_back('\0');
    raw.append(reinterpret_cast<const char*>(&canvas.pixels()[3 * y * w]),
               3 * w);
  }

  // zlib stream with stored (uncompressed) deflate blocks.
  std::string z;
  z.push_back(0x78);
  z.push_back(0x01);
  std::size_t at = 0;
  while (at < raw.size()) {
    const std::size_t n = std::min<std::size_t>(65535, raw.size() - at);
    const bool last = at + n == raw.size();
    z.push_back(last ? 1 : 0);
    z.push_back(static_cast<char>(n & 0xff));
    z.push_back(static_cast<char>((n >> 8) & 0xff));
    z.push_back(static_cast<char>(~n & 0xff));
    z.push_back(static_cast<char>((~n >> 8) & 0xff));
    z.append(raw, at, n);
    at += n;
  }
  std::uint32_t s1 = 1, s2 = 0;
  for (unsigned char c : raw) {
    s1 = (s1 + c) % 65521;
    s2 = (s2 + s1) % 65521;
  }
  push_u32(z, (s2 << 16) | s1);

  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  push_u32(ihdr, static_cast<std::uint32_t>(w));
  push_u32(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  png_chunk(png, "IHDR", ihdr);
  png_chunk(png, "IDAT", z);
  png_chunk(png, "IEND", "");
  return png;
}

struct Layout {
  int left = 70, right = 20, top = 40, bottom = 55;
  int w, h;
  Range xr, yr;
  double sx(double x) const {
    return left + (x - xr.lo) / xr.span() * (w - left - right);
  }
  double sy(double y) const {
    return h - bottom - (y - yr.lo) / yr.span() * (h - top - bottom);
  }
};

std::vector<double> ticks_of(const Range& r, int target = 5) {
  const double raw_step = r.span() / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw_step)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (mag * m >= raw_step) {
      step = mag * m;
      break;
    }
  std::vector<double> ticks;
  for (double v = std::ceil(r.lo / step) * step; v <= r.hi + 1e-12 * step;
       v += step)
    ticks.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return ticks;
}

}  // namespace

std::string render_svg(const PlotSpec& spec, int width, int height) {
  Layout lay{70, 20, 40, 55, width, height, axis_range(spec.series, false),
             axis_range(spec.series, true)};
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "' viewBox='0 0 " << width << " " << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << width / 2 << "' y='22' text-anchor='middle' "
      << "font-family='sans-serif' font-size='15'>" << spec.title
      << "</text>\n";

  // Axes and grid.
  svg << "<g stroke='#888' stroke-width='1'>";
  svg << "<line x1='" << lay.left << "' y1='" << height - lay.bottom
      << "' x2='" << width - lay.right << "' y2='" << height - lay.bottom
      << "'/>";
  svg << "<line x1='" << lay.left << "' y1='" << lay.top << "' x2='"
      << lay.left << "' y2='" << height - lay.bottom << "'/></g>\n";
  svg << "<g font-family='sans-serif' font-size='11' fill='#333'>\n";
  for (double t : ticks_of(lay.xr)) {
    const double x = lay.sx(t);
    svg << "<line x1='" << x << "' y1='" << height - lay.bottom << "' x2='"
        << x << "' y2='" << height - lay.bottom + 4
        << "' stroke='#888'/><text x='" << x << "' y='"
        << height - lay.bottom + 16 << "' text-anchor='middle'>" << fmt_tick(t)
        << "</text>\n";
  }
  for (double t : ticks_of(lay.yr)) {
    const double y = lay.sy(t);
    svg << "<line x1='" << lay.left - 4 << "' y1='" << y << "' x2='"
        << lay.left << "' y2='" << y << "' stroke='#888'/><text x='"
        << lay.left - 8 << "' y='" << y + 4 << "' text-anchor='end'>"
        << fmt_tick(t) << "</text>\n";
  }
  svg << "<text x='" << (lay.left + width - lay.right) / 2 << "' y='"
      << height - 12 << "' text-anchor='middle'>" << spec.x_label
      << "</text>\n";
  svg << "<text x='16' y='" << (lay.top + height - lay.bottom) / 2
      << "' text-anchor='middle' transform='rotate(-90 16 "
      << (lay.top + height - lay.bottom) / 2 << ")'>" << spec.y_label
      << "</text>\n</g>\n";

  for (std::size_t s = 0; s < spec.series.size(); ++s) {
    const auto& ser = spec.series[s];
    const char* color = kPalette[s % 6];
    svg << "<g stroke='" << color << "' fill='none' stroke-width='2'><polyline points='";
    for (std::size_t i = 0; i < ser.x.size(); ++i)
      svg << lay.sx(ser.x[i]) << "," << lay.sy(ser.y[i]) << " ";
    svg << "'/></g>\n<g stroke='" << color << "' fill='" << color << "'>";
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      const double x = lay.sx(ser.x[i]), y = lay.sy(ser.y[i]);
      svg << "<circle cx='" << x << "' cy='" << y << "' r='3'/>";
      if (i < ser.ci.size() && std::isfinite(ser.ci[i]) && ser.ci[i] > 0) {
        const double y0 = lay.sy(ser.y[i] - ser.ci[i]);
        const double y1 = lay.sy(ser.y[i] + ser.ci[i]);
        svg << "<line x1='" << x << "' y1='" << y0 << "' x2='" << x
            << "' y2='" << y1 << "'/><line x1='" << x - 3 << "' y1='" << y0
            << "' x2='" << x + 3 << "' y2='" << y0 << "'/><line x1='" << x - 3
            << "' y1='" << y1 << "' x2='" << x + 3 << "' y2='" << y1 << "'/>";
      }
    }
    svg << "</g>\n";
    const int ly = lay.top + 14 + static_cast<int>(s) * 16;
    svg << "<line x1='" << width - lay.right - 150 << "' y1='" << ly
        << "' x2='" << width - lay.right - 126 << "' y2='" << ly
        << "' stroke='" << color << "' stroke-width='2'/>\n";
    svg << "<text x='" << width - lay.right - 120 << "' y='" << ly + 4
        << "' font-family='sans-serif' font-size='11'>" << ser.label
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_png(const PlotSpec& spec, int width, int height) {
  Canvas canvas(width, height);
  Layout lay{70, 20, 40, 55, width, height, axis_range(spec.series, false),
             axis_range(spec.series, true)};
  const std::uint8_t black[3] = {30, 30, 30};
  const std::uint8_t gray[3] = {140, 140, 140};

  canvas.line(lay.left, height - lay.bottom, width - lay.right,
              height - lay.bottom, gray);
  canvas.line(lay.left, lay.top, lay.left, height - lay.bottom, gray);
  for (double t : ticks_of(lay.xr)) {
    const int x = static_cast<int>(lay.sx(t));
    canvas.line(x, height - lay.bottom, x, height - lay.bottom + 4, gray);
    const std::string label = fmt_tick(t);
    canvas.text(x - static_cast<int>(label.size()) * 3,
                height - lay.bottom + 8, label, black);
  }
  for (double t : ticks_of(lay.yr)) {
    const int y = static_cast<int>(lay.sy(t));
    canvas.line(lay.left - 4, y, lay.left, y, gray);
    const std::string label = fmt_tick(t);
    canvas.text(lay.left - 8 - static_cast<int>(label.size()) * 6, y - 3,
                label, black);
  }
  canvas.text(width / 2 - static_cast<int>(spec.title.size()) * 3, 14,
              spec.title, black);
  canvas.text((lay.left + width - lay.right) / 2 -
                  static_cast<int>(spec.x_label.size()) * 3,
              height - 18, spec.x_label, black);
  canvas.text(6, lay.top - 14, spec.y_label, black);

  for (std::size_t s = 0; s < spec.series.size(); ++s) {
    const auto& ser = spec.series[s];
    const std::uint8_t* rgb = kPaletteRgb[s % 6];
    for (std::size_t i = 0; i + 1 < ser.x.size(); ++i)
      canvas.thick_line(lay.sx(ser.x[i]), lay.sy(ser.y[i]),
                        lay.sx(ser.x[i + 1]), lay.sy(ser.y[i + 1]), rgb);
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      const int x = static_cast<int>(lay.sx(ser.x[i]));
      const int y = static_cast<int>(lay.sy(ser.y[i]));
      canvas.marker(x, y, rgb);
      if (i < ser.ci.size() && std::isfinite(ser.ci[i]) && ser.ci[i] > 0) {
        const int y0 = static_cast<int>(lay.sy(ser.y[i] - ser.ci[i]));
        const int y1 = static_cast<int>(lay.sy(ser.y[i] + ser.ci[i]));
        canvas.line(x, y0, x, y1, rgb);
        canvas.line(x - 3, y0, x + 3, y0, rgb);
        canvas.line(x - 3, y1, x + 3, y1, rgb);
      }
    }
    const int ly = lay.top + 10 + static_cast<int>(s) * 14;
    canvas.line(width - lay.right - 150, ly, width - lay.right - 130, ly, rgb);
    canvas.text(width - lay.right - 124, ly - 3, ser.label, black);
  }
  return png_encode(canvas);
}

bool write_file_atomic(const std::string& path, const std::string& data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return false;
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) return false;
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  return !ec;
}

}  // namespace pilotbench
