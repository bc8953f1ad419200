#pragma once

// Frequency-domain engine: O(N^2) DFT reference, radix-2 FFT and its inverse,
// an arbitrary-length transform (Bluestein) for internal use, per-bin
// frequencies, and the averaged short-window power spectrum feature.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "emgesture/error.hpp"
#include "emgesture/signal_io.hpp"

namespace emg {

struct Spectrum {
  std::vector<cplx> bins;
  double sample_rate_hz = 1.0;

  std::size_t n() const noexcept { return bins.size(); }
};

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

constexpr std::size_t next_power_of_two(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// X[k] = sum_n x[n] e^{-j 2 pi k n / N}, straight from the definition.
inline Spectrum dft_direct(std::span<const cplx> x, double sample_rate_hz = 1.0) {
  require(!x.empty(), ErrorKind::data, "empty_input", "dft of an empty sequence");
  const std::size_t n = x.size();
  Spectrum out{std::vector<cplx>(n), sample_rate_hz};
  // The n roots e^{-j 2 pi r / n}, each evaluated on its own; k*t is reduced mod n.
  std::vector<double> wr(n), wi(n);
  for (std::size_t r = 0; r < n; ++r) {
    const cplx w = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n));
    wr[r] = w.real();
    wi[r] = w.imag();
  }
  for (std::size_t k = 0; k < n; ++k) {
    double re = 0.0, im = 0.0;
    std::size_t r = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = x[t].real(), b = x[t].imag();
      re += a * wr[r] - b * wi[r];
      im += a * wi[r] + b * wr[r];
      r += k;
      if (r >= n) r -= n;
    }
    out.bins[k] = {re, im};
  }
  return out;
}

namespace detail {

// e^{-j 2 pi k / n} for k < n/2, cached per thread and per size.
inline const std::vector<cplx>& twiddles(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::vector<cplx>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<cplx> w(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k)
    w[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  if (cache.size() > 32) cache.clear();
  return cache.emplace(n, std::move(w)).first->second;
}

// Iterative radix-2 decimation in time: bit-reversal permutation followed by
// log2(N) butterfly passes combining even and odd half-length transforms.
inline void fft_radix2(std::span<cplx> a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto& w = twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        cplx tw = w[k * stride];
        if (inverse) tw = std::conj(tw);
        const cplx even = a[start + k];
        const cplx odd = a[start + k + half] * tw;
        a[start + k] = even + odd;
        a[start + k + half] = even - odd;
      }
    }
  }
}

}  // namespace detail

inline Spectrum fft(std::span<const cplx> x, double sample_rate_hz = 1.0) {
  require(is_power_of_two(x.size()), ErrorKind::data, "not_power_of_two",
          "fft length must be a power of two, got " + std::to_string(x.size()));
  Spectrum out{std::vector<cplx>(x.begin(), x.end()), sample_rate_hz};
  detail::fft_radix2(out.bins, false);
  return out;
}

/// x[n] = (1/N) sum_k X[k] e^{+j 2 pi k n / N}
inline std::vector<cplx> ifft(std::span<const cplx> bins) {
  require(is_power_of_two(bins.size()), ErrorKind::data, "not_power_of_two",
          "ifft length must be a power of two, got " + std::to_string(bins.size()));
  std::vector<cplx> out(bins.begin(), bins.end());
  detail::fft_radix2(out, true);
  const double scale = 1.0 / static_cast<double>(out.size());
  for (auto& v : out) v *= scale;
  return out;
}

inline std::vector<cplx> ifft(const Spectrum& spectrum) { return ifft(std::span<const cplx>(spectrum.bins)); }

/// Forward or inverse (unscaled) DFT of any length. Powers of two go straight
/// to radix-2; other lengths use Bluestein's chirp-z convolution.
inline std::vector<cplx> dft_any(std::span<const cplx> x, bool inverse = false) {
  const std::size_t n = x.size();
  std::vector<cplx> out(x.begin(), x.end());
  if (n <= 1) return out;
  if (is_power_of_two(n)) {
    detail::fft_radix2(out, inverse);
    return out;
  }
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cplx> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto r = static_cast<double>((k * k) % (2 * n));
    chirp[k] = std::polar(1.0, sign * std::numbers::pi * r / static_cast<double>(n));
  }
  const std::size_t m = next_power_of_two(2 * n - 1);
  std::vector<cplx> a(m), b(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);
  detail::fft_radix2(a, false);
  detail::fft_radix2(b, false);
  for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
  detail::fft_radix2(a, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * scale * chirp[k];
  return out;
}

inline double bin_frequency(std::size_t k, double sample_rate_hz, std::size_t n) {
  require(k < n, ErrorKind::data, "bounds", "bin index out of range");
  return static_cast<double>(k) * sample_rate_hz / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Averaged short-window power spectrum

enum class WindowKind { rectangular, hann };
enum class SpectrumSource { gesture, noise, denoised };

inline const char* to_string(SpectrumSource s) {
  switch (s) {
    case SpectrumSource::gesture:
      return "gesture";
    case SpectrumSource::noise:
      return "noise";
    case SpectrumSource::denoised:
      return "denoised";
  }
  return "gesture";
}

inline SpectrumSource source_from_string(const std::string& s) {
  if (s == "gesture") return SpectrumSource::gesture;
  if (s == "noise") return SpectrumSource::noise;
  if (s == "denoised") return SpectrumSource::denoised;
  fail(ErrorKind::data, "bad_source", "unknown spectrum source '" + s + "'");
}

struct AveragePowerSpectrum {
  std::vector<double> power;
  double bin_width_hz = 0.0;
  std::size_t n_subwindows = 0;
  SpectrumSource source = SpectrumSource::gesture;
  std::optional<std::string> label;

  std::size_t size() const noexcept { return power.size(); }
};

struct ApsOptions {
  WindowKind window = WindowKind::rectangular;
  // Sub-windows whose sample count is not a power of two are zero-padded to
  // the next power of two; the bin width then follows the padded length.
  bool pad_to_power_of_two = true;
};

/// Splits the segment into M = floor(len / sub_len) non-overlapping
/// sub-windows and returns power[k] = (1/M) sum_m |FFT(window_m)[k]|^2.
/// Sub-window spectra are summed in temporal order.
inline AveragePowerSpectrum average_power_spectrum(const Segment& seg, double subwindow_len_s,
                                                   const ApsOptions& options = {}) {
  require(subwindow_len_s > 0, ErrorKind::data, "bounds", "sub-window length must be positive");
  const double fs = seg.sample_rate_hz;
  const std::size_t sub = detail::seconds_to_samples(subwindow_len_s, fs);
  require(sub >= 2, ErrorKind::data, "bounds", "sub-window must hold at least two samples");
  require(sub <= seg.samples.size(), ErrorKind::data, "bounds", "sub-window longer than segment");

  std::size_t n = sub;
  if (!is_power_of_two(n)) {
    require(options.pad_to_power_of_two, ErrorKind::data, "not_power_of_two",
            "sub-window of " + std::to_string(sub) + " samples is not a power of two and padding is disabled");
    n = next_power_of_two(sub);
  }

  std::vector<double> window;
  if (options.window == WindowKind::hann) {
    window.resize(sub);
    for (std::size_t i = 0; i < sub; ++i)
      window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(sub));
  }

  const std::size_t m = seg.samples.size() / sub;
  std::vector<double> acc(n, 0.0);
  std::vector<cplx> buf(n);
  for (std::size_t w = 0; w < m; ++w) {
    const cplx* src = seg.samples.data() + w * sub;
    if (window.empty()) {
      std::copy(src, src + sub, buf.begin());
    } else {
      for (std::size_t i = 0; i < sub; ++i) buf[i] = src[i] * window[i];
    }
    std::fill(buf.begin() + static_cast<std::ptrdiff_t>(sub), buf.end(), cplx{});
    detail::fft_radix2(buf, false);
    for (std::size_t k = 0; k < n; ++k) acc[k] += std::norm(buf[k]);
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  for (auto& v : acc) v *= inv_m;

  return AveragePowerSpectrum{std::move(acc), fs / static_cast<double>(n), m, SpectrumSource::gesture, seg.label};
}

/// Mean of several spectra of identical geometry (used to build noise profiles).
inline AveragePowerSpectrum mean_spectrum(std::span<const AveragePowerSpectrum> spectra) {
  require(!spectra.empty(), ErrorKind::data, "empty_input", "no spectra to average");
  AveragePowerSpectrum out = spectra.front();
  std::size_t total_windows = out.n_subwindows;
  for (std::size_t i = 1; i < spectra.size(); ++i) {
    const auto& s = spectra[i];
    require(s.size() == out.size() && s.bin_width_hz == out.bin_width_hz, ErrorKind::data, "dimension_mismatch",
            "spectra with different geometry cannot be averaged");
    for (std::size_t k = 0; k < out.size(); ++k) out.power[k] += s.power[k];
    total_windows += s.n_subwindows;
  }
  const double inv = 1.0 / static_cast<double>(spectra.size());
  for (auto& v : out.power) v *= inv;
  out.n_subwindows = total_windows;
  return out;
}

/// Max-pools `power` into at most `target_bins` bins of width ceil(n / target).
inline std::vector<double> max_pool(std::span<const double> power, std::size_t target_bins,
                                    std::size_t* width_out = nullptr) {
  require(target_bins > 0, ErrorKind::usage, "bounds", "pool target must be positive");
  const std::size_t width = power.size() <= target_bins ? 1 : (power.size() + target_bins - 1) / target_bins;
  if (width_out) *width_out = width;
  std::vector<double> out((power.size() + width - 1) / width, 0.0);
  for (std::size_t i = 0; i < power.size(); ++i) {
    double& slot = out[i / width];
    slot = (i % width == 0) ? power[i] : std::max(slot, power[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV export.  Header: label,source,n_subwindows,bin_width_hz,p0,p1,...
// Values are written with 17 significant digits so reloading is exact.

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_aps_csv(const std::filesystem::path& path, std::span<const AveragePowerSpectrum> rows) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::data, "io", "cannot write " + path.string());
  const std::size_t dims = rows.empty() ? 0 : rows.front().size();
  out << "label,source,n_subwindows,bin_width_hz";
  for (std::size_t k = 0; k < dims; ++k) out << ",p" << k;
  out << '\n';
  std::string line;
  for (const auto& r : rows) {
    require(r.size() == dims, ErrorKind::data, "dimension_mismatch", "rows of a feature CSV must share a length");
    line.clear();
    line += r.label.value_or("");
    line += ',';
    line += to_string(r.source);
    line += ',';
    line += std::to_string(r.n_subwindows);
    line += ',';
    line += format_double(r.bin_width_hz);
    for (double v : r.power) {
      line += ',';
      line += format_double(v);
    }
    line += '\n';
    out << line;
  }
  if (!out) fail(ErrorKind::data, "io", "failed writing " + path.string());
}

inline std::vector<AveragePowerSpectrum> read_aps_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::data, "missing_file", "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("label,source,n_subwindows,bin_width_hz", 0) != 0)
    fail(ErrorKind::data, "bad_csv", path.string() + ": missing feature CSV header");

  std::vector<AveragePowerSpectrum> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    AveragePowerSpectrum aps;
    std::size_t field = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t next = line.find(',', pos);
      if (next == std::string::npos) next = line.size();
      const std::string cell = line.substr(pos, next - pos);
      try {
        switch (field) {
          case 0:
            if (!cell.empty()) aps.label = cell;
            break;
          case 1:
            aps.source = source_from_string(cell);
            break;
          case 2:
            aps.n_subwindows = static_cast<std::size_t>(std::stoull(cell));
            break;
          case 3:
            aps.bin_width_hz = std::stod(cell);
            break;
          default:
            aps.power.push_back(std::stod(cell));
        }
      } catch (const std::logic_error&) {
        fail(ErrorKind::data, "bad_csv", path.string() + ":" + std::to_string(line_no) + ": bad value '" + cell + "'");
      }
      ++field;
      pos = next + 1;
    }
    if (!rows.empty() && rows.front().size() != aps.size())
      fail(ErrorKind::data, "dimension_mismatch", path.string() + ":" + std::to_string(line_no) + ": row length differs");
    rows.push_back(std::move(aps));
  }
  return rows;
}

}  // namespace emg
