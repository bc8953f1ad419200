#pragma once

// Plot data: tidy CSV (x,y,series) for any plotting tool, plus bare-bones SVG.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "emgesture/error.hpp"
#include "emgesture/ml/eval.hpp"
#include "emgesture/spectrum.hpp"
#include "emgesture/synth.hpp"
#include "emgesture/vmd.hpp"

namespace emg {

struct Series {
  std::string name;
  std::vector<std::string> x;  // numbers are stored formatted; categorical x is allowed
  std::vector<double> y;
};

enum class PlotKind { spectrum, confusion, convergence, decay };

inline PlotKind plot_kind_from_string(const std::string& s) {
  if (s == "spectrum") return PlotKind::spectrum;
  if (s == "confusion") return PlotKind::confusion;
  if (s == "convergence") return PlotKind::convergence;
  if (s == "decay") return PlotKind::decay;
  fail(ErrorKind::usage, "unknown_kind", "unknown plot kind '" + s + "' (spectrum, confusion, convergence, decay)");
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline void write_tidy_csv(const std::filesystem::path& path, std::span<const Series> series) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::data, "io", "cannot write " + path.string());
  out << "x,y,series\n";
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), ErrorKind::data, "bad_series", "series '" + s.name + "' has ragged x/y");
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << detail::csv_field(s.x[i]) << ',' << format_double(s.y[i]) << ',' << detail::csv_field(s.name) << '\n';
  }
  if (!out) fail(ErrorKind::data, "io", "failed writing " + path.string());
}

inline Series numeric_series(std::string name, std::span<const double> x, std::span<const double> y) {
  Series s{std::move(name), {}, {y.begin(), y.end()}};
  for (double v : x) s.x.push_back(format_double(v));
  return s;
}

/// Amplitude at d = 0, delta, 2 delta, ... for the given skin depth.
inline std::vector<Series> decay_series(double delta_m, int n_points = 4, double amplitude = 1.0) {
  require(n_points >= 2, ErrorKind::usage, "bad_argument", "decay plot needs at least two points");
  std::vector<double> d, a;
  for (int i = 0; i < n_points; ++i) {
    d.push_back(i * delta_m);
    a.push_back(distance_attenuation(amplitude, d.back(), delta_m));
  }
  return {numeric_series("amplitude", d, a)};
}

/// One series per spectrum, x in Hz.
inline std::vector<Series> spectrum_series(std::span<const AveragePowerSpectrum> spectra,
                                           std::span<const std::string> names) {
  require(spectra.size() == names.size(), ErrorKind::usage, "bad_argument", "one name per spectrum");
  std::vector<Series> out;
  for (std::size_t s = 0; s < spectra.size(); ++s) {
    const auto& aps = spectra[s];
    Series series{names[s], {}, aps.power};
    for (std::size_t k = 0; k < aps.size(); ++k) series.x.push_back(format_double(static_cast<double>(k) * aps.bin_width_hz));
    out.push_back(std::move(series));
  }
  return out;
}

/// Series per true class; x is the predicted class, y the count.
inline std::vector<Series> confusion_series(const ml::EvalReport& r) {
  std::vector<Series> out;
  for (std::size_t t = 0; t < r.confusion.size(); ++t) {
    Series s{r.class_names[t], {}, {}};
    for (std::size_t p = 0; p < r.confusion[t].size(); ++p) {
      s.x.push_back(r.class_names[p]);
      s.y.push_back(static_cast<double>(r.confusion[t][p]));
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Residual, reconstruction error and centre frequency of every mode per iteration.
inline std::vector<Series> convergence_series(std::span<const VmdIteration> trace) {
  std::vector<Series> out{{"residual", {}, {}}, {"reconstruction_error", {}, {}}};
  const std::size_t k = trace.empty() ? 0 : trace.front().center_freqs.size();
  for (std::size_t m = 0; m < k; ++m) out.push_back({"omega_" + std::to_string(m), {}, {}});
  for (const auto& it : trace) {
    const std::string x = std::to_string(it.iteration);
    out[0].x.push_back(x);
    out[0].y.push_back(it.residual);
    out[1].x.push_back(x);
    out[1].y.push_back(it.reconstruction_error);
    for (std::size_t m = 0; m < k; ++m) {
      out[2 + m].x.push_back(x);
      out[2 + m].y.push_back(it.center_freqs[m]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVG

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::data, "io", "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::data, "io", "failed writing " + path.string());
}

}  // namespace detail

/// Line chart of numeric series; y on a log10 axis when `log_y`.
inline void write_svg_lines(const std::filesystem::path& path, std::span<const Series> series, const std::string& title,
                            bool log_y = false) {
  constexpr double W = 800, H = 480, L = 70, R = 160, T = 40, B = 50;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  std::vector<std::vector<double>> xs(series.size());
  for (std::size_t s = 0; s < series.size(); ++s) {
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      double x = 0;
      try {
        x = std::stod(series[s].x[i]);
      } catch (const std::logic_error&) {
        fail(ErrorKind::data, "bad_series", "line plots need numeric x");
      }
      xs[s].push_back(x);
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      if ((log_y && series[s].y[i] <= 0) || !std::isfinite(series[s].y[i])) continue;
      y0 = std::min(y0, ty(series[s].y[i]));
      y1 = std::max(y1, ty(series[s].y[i]));
    }
  }
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y1 = y0 + 1;
  if (!std::isfinite(x0) || !std::isfinite(y0)) x0 = y0 = 0, x1 = y1 = 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << detail::xml_escape(title)
    << "</text>\n"
    << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << L << "\" y=\"" << H - B + 18 << "\" font-size=\"11\">" << format_double(x0) << "</text>\n"
    << "<text x=\"" << W - R << "\" y=\"" << H - B + 18 << "\" font-size=\"11\" text-anchor=\"end\">"
    << format_double(x1) << "</text>\n"
    << "<text x=\"" << L - 4 << "\" y=\"" << H - B << "\" font-size=\"11\" text-anchor=\"end\">"
    << (log_y ? "1e" : "") << format_double(y0) << "</text>\n"
    << "<text x=\"" << L - 4 << "\" y=\"" << T + 10 << "\" font-size=\"11\" text-anchor=\"end\">"
    << (log_y ? "1e" : "") << format_double(y1) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 6];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < xs[s].size(); ++i) {
      if ((log_y && series[s].y[i] <= 0) || !std::isfinite(series[s].y[i])) continue;
      o << px(xs[s][i]) << ',' << py(series[s].y[i]) << ' ';
    }
    o << "\"/>\n<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (s + 1) << "\" font-size=\"12\" fill=\"" << color
      << "\">" << detail::xml_escape(series[s].name) << "</text>\n";
  }
  o << "</svg>\n";
  detail::write_text_file(path, o.str());
}

/// Heat map of a confusion matrix, rows = true class.
inline void write_svg_confusion(const std::filesystem::path& path, const ml::EvalReport& r) {
  const std::size_t k = r.confusion.size();
  constexpr double cell = 48, left = 130, top = 40;
  std::size_t peak = 1;
  for (const auto& row : r.confusion)
    for (std::size_t v : row) peak = std::max(peak, v);
  std::ostringstream o;
  const double w = left + cell * static_cast<double>(k) + 20, h = top + cell * static_cast<double>(k) + 120;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << detail::xml_escape(r.model_name) << " accuracy "
    << format_double(r.accuracy) << "</text>\n";
  for (std::size_t t = 0; t < k; ++t) {
    const double y = top + cell * static_cast<double>(t);
    o << "<text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
      << detail::xml_escape(r.class_names[t]) << "</text>\n";
    for (std::size_t p = 0; p < k; ++p) {
      const double x = left + cell * static_cast<double>(p);
      const int shade = 255 - static_cast<int>(std::lround(200.0 * static_cast<double>(r.confusion[t][p]) / static_cast<double>(peak)));
      o << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb("
        << shade << ',' << shade << ",255)\" stroke=\"#ccc\"/>\n"
        << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
        << "\" font-size=\"12\" text-anchor=\"middle\">" << r.confusion[t][p] << "</text>\n";
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    const double x = left + cell * static_cast<double>(p) + cell / 2;
    const double y = top + cell * static_cast<double>(k) + 10;
    o << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"11\" transform=\"rotate(60 " << x << ' ' << y << ")\">"
      << detail::xml_escape(r.class_names[p]) << "</text>\n";
  }
  o << "</svg>\n";
  detail::write_text_file(path, o.str());
}

}  // namespace emg
