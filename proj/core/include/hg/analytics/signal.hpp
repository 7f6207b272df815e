#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hg::analytics {

// One second-order section, normalized so a0 == 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

using SosFilter = std::vector<Biquad>;

// Digital Butterworth band-pass of the given prototype order (the resulting
// filter has order 2 * prototype_order), designed with the bilinear
// transform and frequency prewarping.
SosFilter butterworth_bandpass(int prototype_order, double low_hz, double high_hz,
                               double sample_rate_hz);

// Magnitude response |H(e^jw)| at a frequency in Hz.
double magnitude_response(const SosFilter& sos, double freq_hz, double sample_rate_hz);

// Causal filtering with zero initial state.
std::vector<double> sos_filter(const SosFilter& sos, std::span<const double> x);

// Forward-backward filtering with odd-extension padding and steady-state
// initial conditions; zero phase, squared magnitude response.
std::vector<double> sos_filtfilt(const SosFilter& sos, std::span<const double> x);

struct PeakOptions {
  std::size_t min_distance = 1;  // samples; closer peaks lose to taller ones
  double min_prominence = 0.0;
  // Samples around a peak searched for its bases; 0 searches the whole
  // signal.
  std::size_t prominence_window = 0;
};

// Indices of local maxima (plateaus resolve to their middle sample) that
// survive the distance and then the prominence filter. Ascending order.
std::vector<std::size_t> find_peaks(std::span<const double> x, const PeakOptions& options);

// Topographic prominence of each peak; a window >= 2 limits the base
// search to peak +/- window / 2.
std::vector<double> peak_prominences(std::span<const double> x,
                                     std::span<const std::size_t> peaks,
                                     std::size_t window = 0);

}  // namespace hg::analytics
