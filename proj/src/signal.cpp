#include "rulkit/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>

namespace rulkit::signal {

namespace {

void require_window(const RawWindow& window, std::size_t min_samples, const char* who) {
  if (window.samples.size() < min_samples)
    throw std::invalid_argument(std::string(who) + ": window needs at least " +
                                std::to_string(min_samples) + " samples, got " +
                                std::to_string(window.samples.size()));
  if (!(window.sample_rate > 0.0))
    throw std::invalid_argument(std::string(who) + ": sample_rate must be positive");
}

// FFTW plan creation/destruction is not thread-safe; execution on private
// buffers is. One lock around the non-reentrant parts keeps callers free to
// parallelize over windows.
std::mutex fftw_plan_mutex;

}  // namespace

RawWindow detrend_linear(const RawWindow& window) {
  require_window(window, 2, "detrend_linear");
  const std::size_t n = window.samples.size();
  const double nd = static_cast<double>(n);
  const double x_mean = (nd - 1.0) / 2.0;
  double y_mean = 0.0;
  for (const double y : window.samples) y_mean += y;
  y_mean /= nd;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = static_cast<double>(k) - x_mean;
    sxy += dx * (window.samples[k] - y_mean);
    sxx += dx * dx;
  }
  const double slope = sxy / sxx;
  RawWindow out;
  out.sample_rate = window.sample_rate;
  out.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = static_cast<double>(k) - x_mean;
    out.samples[k] = window.samples[k] - (y_mean + slope * dx);
  }
  return out;
}

double bessel_i0(double x) {
  // Power series sum_m ((x/2)^(2m)) / (m!)^2 with term recurrence; converges
  // for every argument this toolkit produces (|x| <= shape <= ~100).
  const double q = x * x / 4.0;
  double term = 1.0;
  double sum = 1.0;
  for (int m = 1; m < 1000; ++m) {
    term *= q / (static_cast<double>(m) * static_cast<double>(m));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

std::vector<double> kaiser_window(std::size_t n, double shape) {
  if (n == 0) throw std::invalid_argument("kaiser_window: n must be positive");
  if (!(shape >= 0.0)) throw std::invalid_argument("kaiser_window: shape must be >= 0");
  std::vector<double> w(n, 1.0);
  if (n == 1) return w;
  const double denom = bessel_i0(shape);
  const double nm1 = static_cast<double>(n - 1);
  // Compute one half and mirror so symmetry is exact, not just close.
  for (std::size_t k = 0; k <= (n - 1) / 2; ++k) {
    const double r = 2.0 * static_cast<double>(k) / nm1 - 1.0;
    const double arg = 1.0 - r * r;
    w[k] = bessel_i0(shape * std::sqrt(arg < 0.0 ? 0.0 : arg)) / denom;
    w[n - 1 - k] = w[k];
  }
  return w;
}

std::vector<double> fft_magnitude(const RawWindow& window) {
  require_window(window, 1, "fft_magnitude");
  const std::size_t n = window.samples.size();
  const std::size_t out_len = n / 2 + 1;

  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(out_len);
  if (in == nullptr || out == nullptr) {
    fftw_free(in);
    fftw_free(out);
    throw std::runtime_error("fft_magnitude: allocation failed");
  }

  fftw_plan plan = nullptr;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  if (plan == nullptr) {
    fftw_free(in);
    fftw_free(out);
    throw std::runtime_error("fft_magnitude: planning failed for n=" + std::to_string(n));
  }

  std::copy(window.samples.begin(), window.samples.end(), in);
  fftw_execute(plan);

  std::vector<double> magnitude(out_len);
  for (std::size_t k = 0; k < out_len; ++k)
    magnitude[k] = std::hypot(out[k][0], out[k][1]);

  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return magnitude;
}

BinnedSpectrum bin_spectrum(std::span<const double> spectrum, std::size_t bin_count) {
  if (bin_count == 0) throw std::invalid_argument("bin_spectrum: bin_count must be positive");
  if (bin_count > spectrum.size())
    throw std::invalid_argument("bin_spectrum: bin_count " + std::to_string(bin_count) +
                                " exceeds spectrum length " + std::to_string(spectrum.size()));
  const std::size_t base = spectrum.size() / bin_count;
  const std::size_t remainder = spectrum.size() % bin_count;
  BinnedSpectrum out;
  out.values.reserve(bin_count);
  std::size_t start = 0;
  for (std::size_t b = 0; b < bin_count; ++b) {
    const std::size_t len = base + (b < remainder ? 1 : 0);
    out.values.push_back(*std::max_element(spectrum.begin() + static_cast<std::ptrdiff_t>(start),
                                           spectrum.begin() + static_cast<std::ptrdiff_t>(start + len)));
    start += len;
  }
  return out;
}

std::vector<BinnedSpectrum> build_spectrogram(std::span<const RawWindow> windows,
                                              std::size_t bin_count, double kaiser_shape) {
  std::vector<BinnedSpectrum> rows;
  rows.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    try {
      RawWindow detrended = detrend_linear(windows[i]);
      const std::vector<double> taper = kaiser_window(detrended.samples.size(), kaiser_shape);
      for (std::size_t k = 0; k < detrended.samples.size(); ++k)
        detrended.samples[k] *= taper[k];
      rows.push_back(bin_spectrum(fft_magnitude(detrended), bin_count));
    } catch (const std::exception& e) {
      throw std::runtime_error("build_spectrogram: window " + std::to_string(i) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace rulkit::signal
