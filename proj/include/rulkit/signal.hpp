#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rulkit::signal {

// One vibration snapshot: raw accelerometer samples at a fixed rate.
struct RawWindow {
  std::vector<double> samples;
  double sample_rate = 1.0;
};

// Per-bin maxima of a one-sided magnitude spectrum; the model's input row.
struct BinnedSpectrum {
  std::vector<double> values;
};

// Removes the least-squares line a + b*k from the samples. Residual mean and
// slope are zero up to rounding.
RawWindow detrend_linear(const RawWindow& window);

// Kaiser taper of length n: w[k] = I0(shape * sqrt(1 - (2k/(n-1) - 1)^2)) / I0(shape).
// Symmetric by construction (mirrored halves compare equal bit for bit).
std::vector<double> kaiser_window(std::size_t n, double shape);

// Modified Bessel function of the first kind, order zero, by power series.
double bessel_i0(double x);

// One-sided magnitude spectrum |X_k| for k = 0..floor(n/2); raw DFT scaling,
// DC bin included.
std::vector<double> fft_magnitude(const RawWindow& window);

// Splits the spectrum into bin_count contiguous segments whose sizes differ
// by at most one (the remainder goes to the leading bins) and keeps each
// segment's maximum.
BinnedSpectrum bin_spectrum(std::span<const double> spectrum, std::size_t bin_count);

// Full pipeline per window: detrend, taper (Kaiser with `shape`), FFT
// magnitude, bin. Windows are processed in order; a failure on window i is
// reported with that index.
std::vector<BinnedSpectrum> build_spectrogram(std::span<const RawWindow> windows,
                                              std::size_t bin_count, double kaiser_shape);

}  // namespace rulkit::signal
