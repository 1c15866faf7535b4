#include "tabcl/report/plot.hpp"

#include "tabcl/errors.hpp"
#include "tabcl/report/table.hpp"
#include "font5x7.hpp"

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace tabcl {

namespace {

using nlohmann::json;

struct Rgb {
  unsigned char r, g, b;
};

const std::vector<Rgb>& palette() {
  static const std::vector<Rgb> colors = {
      {31, 119, 180}, {255, 127, 14},  {44, 160, 44},   {214, 39, 40},
      {148, 103, 189}, {140, 86, 75},  {227, 119, 194}, {127, 127, 127},
      {188, 189, 34}, {23, 190, 207},  {174, 199, 232}, {255, 187, 120},
      {152, 223, 138}, {255, 152, 150}, {197, 176, 213}, {196, 156, 148},
  };
  return colors;
}

struct Layout {
  int width = 860, height = 520;
  int left = 70, right = 240, top = 40, bottom = 55;
  int plot_w() const { return width - left - right; }
  int plot_h() const { return height - top - bottom; }
};

struct Range {
  Scalar x_min = 0, x_max = 1, y_min = 0, y_max = 1;
};

Range data_range(const PlotSpec& spec) {
  Range r;
  bool first = true;
  for (const auto& s : spec.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      Scalar lo = s.y[i], hi = s.y[i];
      if (i < s.y_lo.size()) lo = std::min(lo, s.y_lo[i]);
      if (i < s.y_hi.size()) hi = std::max(hi, s.y_hi[i]);
      if (first) {
        r.x_min = r.x_max = s.x[i];
        r.y_min = lo;
        r.y_max = hi;
        first = false;
      } else {
        r.x_min = std::min(r.x_min, s.x[i]);
        r.x_max = std::max(r.x_max, s.x[i]);
        r.y_min = std::min(r.y_min, lo);
        r.y_max = std::max(r.y_max, hi);
      }
    }
  if (r.x_max <= r.x_min) r.x_max = r.x_min + 1;
  if (r.y_max <= r.y_min) r.y_max = r.y_min + 1;
  const Scalar pad = 0.05 * (r.y_max - r.y_min);
  r.y_min -= pad;
  r.y_max += pad;
  return r;
}

std::vector<Scalar> nice_ticks(Scalar lo, Scalar hi, int target) {
  const Scalar span = hi - lo;
  const Scalar raw = span / std::max(target, 2);
  const Scalar mag = std::pow(10.0, std::floor(std::log10(raw)));
  Scalar step = mag;
  for (const Scalar m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (mag * m >= raw) { step = mag * m; break; }
  std::vector<Scalar> ticks;
  for (Scalar t = std::ceil(lo / step) * step; t <= hi + 1e-12; t += step)
    ticks.push_back(t);
  return ticks;
}

std::string trim_number(Scalar v) {
  std::ostringstream out;
  out << std::setprecision(6) << v;
  return out.str();
}

json spec_metadata(const PlotSpec& spec) {
  json series = json::array();
  for (const auto& s : spec.series) {
    json item;
    item["label"] = s.label;
    item["x"] = s.x;
    item["y"] = s.y;
    if (!s.y_lo.empty()) item["y_lo"] = s.y_lo;
    if (!s.y_hi.empty()) item["y_hi"] = s.y_hi;
    series.push_back(std::move(item));
  }
  return {{"title", spec.title}, {"series", series}};
}

// ---- raster canvas ----

struct Canvas {
  int w, h;
  std::vector<unsigned char> rgb;

  Canvas(int width, int height) : w(width), h(height), rgb(static_cast<std::size_t>(width) * height * 3, 255) {}

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    const std::size_t at = (static_cast<std::size_t>(y) * w + x) * 3;
    rgb[at] = c.r;
    rgb[at + 1] = c.g;
    rgb[at + 2] = c.b;
  }

  void blend(int x, int y, Rgb c, Scalar alpha) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    const std::size_t at = (static_cast<std::size_t>(y) * w + x) * 3;
    rgb[at] = static_cast<unsigned char>(alpha * c.r + (1 - alpha) * rgb[at]);
    rgb[at + 1] = static_cast<unsigned char>(alpha * c.g + (1 - alpha) * rgb[at + 1]);
    rgb[at + 2] = static_cast<unsigned char>(alpha * c.b + (1 - alpha) * rgb[at + 2]);
  }

  void line(int x0, int y0, int x1, int y1, Rgb c, int thickness = 1) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      for (int ox = 0; ox < thickness; ++ox)
        for (int oy = 0; oy < thickness; ++oy) set(x0 + ox, y0 + oy, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  }

  void fill_rect(int x0, int y0, int x1, int y1, Rgb c, Scalar alpha = 1.0) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x)
        alpha >= 1.0 ? set(x, y, c) : blend(x, y, c, alpha);
  }

  void text(int x, int y, const std::string& s, Rgb c) {
    int cx = x;
    for (const char ch : s) {
      if (const Glyph5x7* g = font5x7_lookup(ch)) {
        for (int row = 0; row < 7; ++row)
          for (int col = 0; col < 5; ++col)
            if (g->rows[row] & (1 << (4 - col))) set(cx + col, y + row, c);
      }
      cx += 6;
    }
  }
};

void png_chunk(std::ofstream& out, const char* type, const std::vector<unsigned char>& data) {
  auto put_u32 = [&](std::uint32_t v) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
  };
  put_u32(static_cast<std::uint32_t>(data.size()));
  std::vector<unsigned char> payload(type, type + 4);
  payload.insert(payload.end(), data.begin(), data.end());
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  const auto crc = crc32(0L, payload.data(), static_cast<uInt>(payload.size()));
  put_u32(static_cast<std::uint32_t>(crc));
}

void write_canvas_png(const Canvas& canvas, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<unsigned char> ihdr(13);
  auto put_be = [&](std::size_t at, std::uint32_t v) {
    ihdr[at] = static_cast<unsigned char>(v >> 24);
    ihdr[at + 1] = static_cast<unsigned char>(v >> 16);
    ihdr[at + 2] = static_cast<unsigned char>(v >> 8);
    ihdr[at + 3] = static_cast<unsigned char>(v);
  };
  put_be(0, static_cast<std::uint32_t>(canvas.w));
  put_be(4, static_cast<std::uint32_t>(canvas.h));
  ihdr[8] = 8;  // bit depth
  ihdr[9] = 2;  // truecolor
  ihdr[10] = ihdr[11] = ihdr[12] = 0;
  png_chunk(out, "IHDR", ihdr);

  std::vector<unsigned char> raw;
  raw.reserve(static_cast<std::size_t>(canvas.h) * (canvas.w * 3 + 1));
  for (int y = 0; y < canvas.h; ++y) {
    raw.push_back(0); // filter: none
    const auto* row = canvas.rgb.data() + static_cast<std::size_t>(y) * canvas.w * 3;
    raw.insert(raw.end(), row, row + canvas.w * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("png: deflate failed for " + path);
  compressed.resize(bound);
  png_chunk(out, "IDAT", compressed);
  png_chunk(out, "IEND", {});
  if (!out) throw IoError("write failed for " + path);
}

} // namespace

PlotSpec accuracy_curves_spec(const std::vector<RunResult>& runs, const std::string& scenario) {
  std::map<std::string, std::vector<const RunResult*>> by_label;
  for (const auto& r : runs)
    if (r.scenario == scenario) by_label[r.strategy].push_back(&r);
  if (by_label.empty()) throw ConfigError("plot: no runs for scenario " + scenario);

  std::vector<std::string> order;
  for (const auto& [family, name] : method_order())
    if (by_label.count(name)) order.push_back(name);
  for (const auto& [label, rs] : by_label)
    if (std::find(order.begin(), order.end(), label) == order.end()) order.push_back(label);

  PlotSpec spec;
  spec.title = scenario + " accuracy";
  spec.x_label = scenario == "domain_il" ? "months learned"
                 : scenario == "class_il" ? "class increments learned"
                                          : "tasks learned";
  spec.y_label = "accuracy";
  for (const auto& label : order) {
    const auto& rs = by_label.at(label);
    std::size_t n_tasks = 0;
    for (const auto* r : rs) n_tasks = std::max(n_tasks, r->per_increment.size());
    PlotSeries s;
    s.label = label;
    for (std::size_t i = 0; i < n_tasks; ++i) {
      Scalar sum = 0, lo = 0, hi = 0;
      int n = 0;
      for (const auto* r : rs) {
        if (i >= r->per_increment.size()) continue;
        const Scalar v = r->per_increment[i];
        if (n == 0) { lo = hi = v; } else { lo = std::min(lo, v); hi = std::max(hi, v); }
        sum += v;
        ++n;
      }
      if (n == 0) continue;
      s.x.push_back(static_cast<Scalar>(i + 1));
      s.y.push_back(sum / n);
      s.y_lo.push_back(lo);
      s.y_hi.push_back(hi);
    }
    spec.series.push_back(std::move(s));
  }
  return spec;
}

PlotSpec time_curves_spec(const std::vector<RunResult>& runs, const std::string& scenario) {
  std::map<std::string, std::vector<const RunResult*>> by_label;
  for (const auto& r : runs)
    if (r.scenario == scenario) by_label[r.strategy].push_back(&r);
  if (by_label.empty()) throw ConfigError("plot: no runs for scenario " + scenario);

  PlotSpec spec;
  spec.title = scenario + " training time";
  spec.x_label = "tasks learned";
  spec.y_label = "cumulative seconds";
  for (const auto& [label, rs] : by_label) {
    std::size_t n_tasks = 0;
    for (const auto* r : rs) n_tasks = std::max(n_tasks, r->ledger.size());
    PlotSeries s;
    s.label = label;
    for (std::size_t i = 0; i < n_tasks; ++i) {
      Scalar sum = 0;
      int n = 0;
      for (const auto* r : rs) {
        if (i >= r->ledger.size()) continue;
        Scalar cum = 0;
        for (std::size_t k = 0; k <= i; ++k) cum += r->ledger[k].wall_seconds;
        sum += cum;
        ++n;
      }
      if (n == 0) continue;
      s.x.push_back(static_cast<Scalar>(i + 1));
      s.y.push_back(sum / n);
    }
    spec.series.push_back(std::move(s));
  }
  return spec;
}

void write_svg(const PlotSpec& spec, const std::string& path) {
  const Layout ly;
  const Range r = data_range(spec);
  auto px = [&](Scalar x) {
    return ly.left + (x - r.x_min) / (r.x_max - r.x_min) * ly.plot_w();
  };
  auto py = [&](Scalar y) {
    return ly.top + (1.0 - (y - r.y_min) / (r.y_max - r.y_min)) * ly.plot_h();
  };

  std::ostringstream svg;
  svg << std::setprecision(10);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << ly.width
      << "\" height=\"" << ly.height << "\">\n";
  svg << "<metadata id=\"series-data\">" << spec_metadata(spec).dump() << "</metadata>\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << ly.left << "\" y=\"22\" font-size=\"15\">" << spec.title
      << "</text>\n";

  // axes + ticks
  svg << "<line x1=\"" << ly.left << "\" y1=\"" << ly.top + ly.plot_h() << "\" x2=\""
      << ly.left + ly.plot_w() << "\" y2=\"" << ly.top + ly.plot_h()
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ly.left << "\" y1=\"" << ly.top << "\" x2=\"" << ly.left
      << "\" y2=\"" << ly.top + ly.plot_h() << "\" stroke=\"black\"/>\n";
  for (const Scalar t : nice_ticks(r.x_min, r.x_max, 8)) {
    svg << "<line x1=\"" << px(t) << "\" y1=\"" << ly.top + ly.plot_h() << "\" x2=\""
        << px(t) << "\" y2=\"" << ly.top + ly.plot_h() + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << px(t) << "\" y=\"" << ly.top + ly.plot_h() + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << trim_number(t) << "</text>\n";
  }
  for (const Scalar t : nice_ticks(r.y_min, r.y_max, 8)) {
    svg << "<line x1=\"" << ly.left - 5 << "\" y1=\"" << py(t) << "\" x2=\"" << ly.left
        << "\" y2=\"" << py(t) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ly.left - 8 << "\" y=\"" << py(t) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << trim_number(t) << "</text>\n";
  }
  svg << "<text x=\"" << ly.left + ly.plot_w() / 2 << "\" y=\"" << ly.height - 12
      << "\" font-size=\"12\" text-anchor=\"middle\">" << spec.x_label << "</text>\n";
  svg << "<text x=\"18\" y=\"" << ly.top + ly.plot_h() / 2
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << ly.top + ly.plot_h() / 2 << ")\">" << spec.y_label << "</text>\n";

  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    const Rgb c = palette()[k % palette().size()];
    std::ostringstream color;
    color << "rgb(" << int(c.r) << "," << int(c.g) << "," << int(c.b) << ")";
    if (!s.y_lo.empty() && s.y_lo.size() == s.x.size() && s.y_hi.size() == s.x.size()) {
      svg << "<polygon fill=\"" << color.str() << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        svg << px(s.x[i]) << "," << py(s.y_hi[i]) << " ";
      for (std::size_t i = s.x.size(); i-- > 0;)
        svg << px(s.x[i]) << "," << py(s.y_lo[i]) << " ";
      svg << "\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color.str() << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg << px(s.x[i]) << "," << py(s.y[i]) << " ";
    svg << "\"/>\n";
    // legend
    const int lx = ly.left + ly.plot_w() + 18;
    const int lyy = ly.top + 10 + static_cast<int>(k) * 18;
    svg << "<line x1=\"" << lx << "\" y1=\"" << lyy << "\" x2=\"" << lx + 22 << "\" y2=\""
        << lyy << "\" stroke=\"" << color.str() << "\" stroke-width=\"3\"/>\n";
    svg << "<text x=\"" << lx + 28 << "\" y=\"" << lyy + 4 << "\" font-size=\"12\">"
        << s.label << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << svg.str();
}

void write_png(const PlotSpec& spec, const std::string& path) {
  const Layout ly;
  const Range r = data_range(spec);
  Canvas canvas(ly.width, ly.height);
  auto px = [&](Scalar x) {
    return static_cast<int>(std::lround(
        ly.left + (x - r.x_min) / (r.x_max - r.x_min) * ly.plot_w()));
  };
  auto py = [&](Scalar y) {
    return static_cast<int>(std::lround(
        ly.top + (1.0 - (y - r.y_min) / (r.y_max - r.y_min)) * ly.plot_h()));
  };
  const Rgb black{0, 0, 0};
  canvas.text(ly.left, 16, spec.title, black);
  canvas.line(ly.left, ly.top + ly.plot_h(), ly.left + ly.plot_w(), ly.top + ly.plot_h(), black);
  canvas.line(ly.left, ly.top, ly.left, ly.top + ly.plot_h(), black);
  for (const Scalar t : nice_ticks(r.x_min, r.x_max, 8)) {
    canvas.line(px(t), ly.top + ly.plot_h(), px(t), ly.top + ly.plot_h() + 4, black);
    canvas.text(px(t) - 8, ly.top + ly.plot_h() + 8, trim_number(t), black);
  }
  for (const Scalar t : nice_ticks(r.y_min, r.y_max, 8)) {
    canvas.line(ly.left - 4, py(t), ly.left, py(t), black);
    canvas.text(ly.left - 52, py(t) - 3, trim_number(t), black);
  }
  canvas.text(ly.left + ly.plot_w() / 2 - 30, ly.height - 14, spec.x_label, black);
  canvas.text(6, 6, spec.y_label, black);

  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    const Rgb c = palette()[k % palette().size()];
    if (!s.y_lo.empty() && s.y_lo.size() == s.x.size())
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const int x = px(s.x[i]);
        canvas.fill_rect(x - 1, py(s.y_hi[i]), x + 1, py(s.y_lo[i]), c, 0.15);
      }
    for (std::size_t i = 1; i < s.x.size(); ++i)
      canvas.line(px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), c, 2);
    const int lx = ly.left + ly.plot_w() + 14;
    const int lyy = ly.top + 8 + static_cast<int>(k) * 14;
    canvas.fill_rect(lx, lyy, lx + 16, lyy + 2, c);
    canvas.text(lx + 22, lyy - 2, s.label, black);
  }
  write_canvas_png(canvas, path);
}

std::string read_svg_metadata(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const std::string open_tag = "<metadata id=\"series-data\">";
  const auto begin = text.find(open_tag);
  const auto end = text.find("</metadata>");
  if (begin == std::string::npos || end == std::string::npos)
    throw FormatError(path + ": no series metadata block");
  return text.substr(begin + open_tag.size(), end - begin - open_tag.size());
}

} // namespace tabcl
