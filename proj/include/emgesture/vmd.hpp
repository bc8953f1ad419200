#pragma once

// Variational mode decomposition.
//
// The signal is mirrored (half its length on each side), transformed, and the
// positive half-spectrum is split into K modes by alternating
//   mode update:       u_k <- (f - sum_{i!=k} u_i + lambda/2) / (1 + 2 alpha (w - w_k)^2)
//   centre update:     w_k <- sum w |u_k(w)|^2 / sum |u_k(w)|^2        (w in [0, 0.5])
//   multiplier update: lambda <- lambda + tau (f - sum_k u_k)
// until sum_k |u_k^{n+1} - u_k^n|^2 / |u_k^n|^2 < tol. Modes are updated in
// order k = 0..K-1 and each update sees the modes already refreshed in this
// sweep. Time-domain modes are rebuilt with Hermitian symmetry (so they are
// real) and cropped back to the input support.
//
// Frequencies are in cycles per sample of the input axis. When the input is
// itself a spectrum the "frequency" is a rate of change across bins.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "emgesture/error.hpp"
#include "emgesture/spectrum.hpp"

namespace emg {

enum class VmdInit { zero, uniform_spread, random };

inline const char* to_string(VmdInit init) {
  switch (init) {
    case VmdInit::zero:
      return "zero";
    case VmdInit::uniform_spread:
      return "uniform_spread";
    case VmdInit::random:
      return "random";
  }
  return "uniform_spread";
}

inline VmdInit vmd_init_from_string(const std::string& s) {
  if (s == "zero") return VmdInit::zero;
  if (s == "uniform_spread") return VmdInit::uniform_spread;
  if (s == "random") return VmdInit::random;
  fail(ErrorKind::usage, "bad_config", "unknown VMD init '" + s + "'");
}

struct VmdConfig {
  int k_modes = 4;
  double alpha = 2000.0;
  double tau = 0.1;
  double tol = 1e-7;
  int max_iter = 500;
  VmdInit init = VmdInit::uniform_spread;
  std::uint64_t seed = 0;  // used by VmdInit::random only

  void validate() const {
    require(k_modes >= 1, ErrorKind::usage, "bad_config", "VMD needs at least one mode");
    require(alpha > 0, ErrorKind::usage, "bad_config", "VMD alpha must be positive");
    require(tau >= 0, ErrorKind::usage, "bad_config", "VMD tau must be non-negative");
    require(tol > 0, ErrorKind::usage, "bad_config", "VMD tol must be positive");
    require(max_iter >= 1, ErrorKind::usage, "bad_config", "VMD max_iter must be positive");
  }

  /// Half-width of the Wiener filter in cycles/sample.
  double bandwidth_estimate() const { return std::sqrt(1.0 / (2.0 * alpha)); }

  bool same_decomposition(const VmdConfig& o) const {
    return k_modes == o.k_modes && alpha == o.alpha && tol == o.tol;
  }
};

struct ModeSet {
  std::vector<std::vector<double>> modes;  // K modes, each the input length
  std::vector<double> center_freqs;        // ascending, cycles/sample in [0, 0.5]
  int n_iterations = 0;
  double final_residual = 0.0;
  bool converged = false;
  VmdConfig config;

  std::size_t k() const noexcept { return modes.size(); }
  std::size_t length() const noexcept { return modes.empty() ? 0 : modes.front().size(); }
};

/// Per-iteration diagnostics: centre frequencies (in internal mode order), the
/// convergence metric, and the relative reconstruction error of the half-spectrum.
struct VmdIteration {
  int iteration = 0;
  std::vector<double> center_freqs;
  double residual = 0.0;
  double reconstruction_error = 0.0;
};

using VmdObserver = std::function<void(const VmdIteration&)>;

inline ModeSet vmd_decompose(std::span<const double> signal, const VmdConfig& cfg,
                             const VmdObserver& observer = {}) {
  cfg.validate();
  const std::size_t n = signal.size();
  const auto k_modes = static_cast<std::size_t>(cfg.k_modes);
  require(n >= 2 * k_modes, ErrorKind::data, "too_many_modes",
          "VMD needs at least 2K samples (" + std::to_string(2 * k_modes) + "), got " + std::to_string(n));
  for (double v : signal) require(std::isfinite(v), ErrorKind::data, "non_finite", "VMD input is not finite");

  // Mirror half the signal onto each end.
  const std::size_t head = n / 2;
  const std::size_t tail = n - head;
  const std::size_t t_len = 2 * n;
  std::vector<cplx> mirrored(t_len);
  for (std::size_t i = 0; i < head; ++i) mirrored[i] = signal[head - 1 - i];
  for (std::size_t i = 0; i < n; ++i) mirrored[head + i] = signal[i];
  for (std::size_t i = 0; i < tail; ++i) mirrored[head + n + i] = signal[n - 1 - i];

  const std::vector<cplx> f_full = dft_any(mirrored, false);
  const std::size_t half = t_len / 2 + 1;  // bins 0 .. T/2 inclusive
  std::vector<cplx> f_hat(f_full.begin(), f_full.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<double> freqs(half);
  for (std::size_t j = 0; j < half; ++j) freqs[j] = static_cast<double>(j) / static_cast<double>(t_len);

  std::vector<double> omega(k_modes, 0.0);
  switch (cfg.init) {
    case VmdInit::zero:
      break;
    case VmdInit::uniform_spread:
      for (std::size_t k = 0; k < k_modes; ++k)
        omega[k] = 0.5 * static_cast<double>(k) / static_cast<double>(k_modes);
      break;
    case VmdInit::random: {
      std::mt19937_64 rng(cfg.seed);
      std::uniform_real_distribution<double> dist(0.0, 0.5);
      for (auto& w : omega) w = dist(rng);
      std::sort(omega.begin(), omega.end());
      break;
    }
  }

  std::vector<std::vector<cplx>> u(k_modes, std::vector<cplx>(half));
  std::vector<cplx> lambda(half);
  std::vector<cplx> total(half);  // sum_k u_k
  std::vector<cplx> previous(half);

  double f_energy = 0.0;
  for (const auto& v : f_hat) f_energy += std::norm(v);

  ModeSet result;
  result.config = cfg;
  int iter = 0;
  double residual = 0.0;
  bool converged = false;
  while (iter < cfg.max_iter) {
    ++iter;
    residual = 0.0;
    for (std::size_t k = 0; k < k_modes; ++k) {
      auto& uk = u[k];
      previous = uk;
      double num = 0.0, den = 0.0, diff = 0.0, prev_energy = 0.0;
      for (std::size_t j = 0; j < half; ++j) {
        const cplx others = total[j] - uk[j];
        const double d = freqs[j] - omega[k];
        const cplx updated = (f_hat[j] - others + 0.5 * lambda[j]) / (1.0 + 2.0 * cfg.alpha * d * d);
        total[j] = others + updated;
        uk[j] = updated;
        const double p = std::norm(updated);
        num += freqs[j] * p;
        den += p;
        diff += std::norm(updated - previous[j]);
        prev_energy += std::norm(previous[j]);
      }
      if (den > 0.0) omega[k] = std::clamp(num / den, 0.0, 0.5);
      if (prev_energy > 0.0) {
        residual += diff / prev_energy;
      } else if (diff > 0.0) {
        residual = std::numeric_limits<double>::infinity();
      }
    }
    double recon_err = 0.0;
    for (std::size_t j = 0; j < half; ++j) {
      const cplx gap = f_hat[j] - total[j];
      lambda[j] += cfg.tau * gap;
      recon_err += std::norm(gap);
    }
    if (observer) {
      observer(VmdIteration{iter, omega, residual, f_energy > 0 ? std::sqrt(recon_err / f_energy) : 0.0});
    }
    if (residual < cfg.tol) {
      converged = true;
      break;
    }
  }

  // Canonical order: ascending centre frequency, ties by original index.
  std::vector<std::size_t> order(k_modes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return omega[a] < omega[b]; });

  std::vector<cplx> full(t_len);
  for (std::size_t idx : order) {
    const auto& uk = u[idx];
    full[0] = {uk[0].real(), 0.0};
    for (std::size_t j = 1; j < half - 1; ++j) {
      full[j] = uk[j];
      full[t_len - j] = std::conj(uk[j]);
    }
    full[t_len / 2] = {uk[half - 1].real(), 0.0};
    const std::vector<cplx> time = dft_any(full, true);
    std::vector<double> mode(n);
    const double scale = 1.0 / static_cast<double>(t_len);
    for (std::size_t i = 0; i < n; ++i) mode[i] = time[head + i].real() * scale;
    result.modes.push_back(std::move(mode));
    result.center_freqs.push_back(omega[idx]);
  }
  result.n_iterations = iter;
  result.final_residual = residual;
  result.converged = converged;
  return result;
}

/// Element-wise sum of the modes.
inline std::vector<double> reconstruct(const ModeSet& ms) {
  require(!ms.modes.empty(), ErrorKind::data, "empty_input", "cannot reconstruct an empty mode set");
  std::vector<double> out(ms.length(), 0.0);
  for (const auto& mode : ms.modes)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += mode[i];
  return out;
}

}  // namespace emg
