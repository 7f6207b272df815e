#include "hg/analytics/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "hg/common/error.hpp"

namespace hg::analytics {
namespace {

using Complex = std::complex<double>;

// Steady-state DF-II transposed state for a unit step through one section.
std::array<double, 2> step_state(const Biquad& s) {
  const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  const double z1 = s.b2 - s.a2 * gain;
  const double z0 = s.b1 + s.b2 - (s.a1 + s.a2) * gain;
  return {z0, z1};
}

void run_sections(const SosFilter& sos, std::vector<double>& x,
                  std::vector<std::array<double, 2>> state) {
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const Biquad& s = sos[k];
    double z0 = state[k][0];
    double z1 = state[k][1];
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z0;
      z0 = s.b1 * in - s.a1 * out + z1;
      z1 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

std::vector<std::array<double, 2>> initial_state(const SosFilter& sos, double level) {
  std::vector<std::array<double, 2>> state(sos.size());
  double scale = level;
  for (std::size_t k = 0; k < sos.size(); ++k) {
    auto zi = step_state(sos[k]);
    state[k] = {zi[0] * scale, zi[1] * scale};
    const Biquad& s = sos[k];
    scale *= (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  }
  return state;
}

}  // namespace

SosFilter butterworth_bandpass(int prototype_order, double low_hz, double high_hz,
                               double sample_rate_hz) {
  if (prototype_order < 1 || !(low_hz > 0) || !(high_hz > low_hz) ||
      !(high_hz < sample_rate_hz / 2)) {
    throw Error(ErrorCode::kValidation, "invalid band-pass design parameters");
  }
  const int n = prototype_order;
  const double fs2 = 2.0 * sample_rate_hz;
  // Prewarped analog band edges (rad/s).
  const double wl = fs2 * std::tan(std::numbers::pi * low_hz / sample_rate_hz);
  const double wh = fs2 * std::tan(std::numbers::pi * high_hz / sample_rate_hz);
  const double bw = wh - wl;
  const double w0 = std::sqrt(wl * wh);

  // Analog low-pass prototype poles on the left half of the unit circle.
  std::vector<Complex> poles;
  for (int k = 0; k < n; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n);
    const Complex p_lp = std::polar(1.0, theta) * (bw / 2.0);
    const Complex root = std::sqrt(p_lp * p_lp - Complex(w0 * w0, 0.0));
    poles.push_back(p_lp + root);
    poles.push_back(p_lp - root);
  }
  // Low-pass to band-pass: gain bw^n, n zeros at s = 0.
  double gain = std::pow(bw, n);

  // Bilinear transform. Analog zeros at 0 map to z = +1; the n zeros at
  // infinity map to z = -1.
  Complex denom(1.0, 0.0);
  std::vector<Complex> zpoles;
  for (const auto& p : poles) {
    zpoles.push_back((fs2 + p) / (fs2 - p));
    denom *= (fs2 - p);
  }
  gain *= std::real(std::pow(Complex(fs2, 0.0), n) / denom);

  // Pair conjugate poles into sections; each section gets one zero at +1
  // and one at -1, i.e. numerator 1 - z^-2.
  std::vector<Complex> upper;
  std::vector<double> real_poles;
  for (const auto& p : zpoles) {
    if (p.imag() > 1e-12) {
      upper.push_back(p);
    } else if (std::abs(p.imag()) <= 1e-12) {
      real_poles.push_back(p.real());
    }
  }
  std::sort(upper.begin(), upper.end(),
            [](const Complex& a, const Complex& b) { return std::abs(a) < std::abs(b); });
  std::sort(real_poles.begin(), real_poles.end());

  SosFilter sos;
  for (const auto& p : upper) {
    sos.push_back({1.0, 0.0, -1.0, -2.0 * p.real(), std::norm(p)});
  }
  for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2) {
    const double p1 = real_poles[i];
    const double p2 = real_poles[i + 1];
    sos.push_back({1.0, 0.0, -1.0, -(p1 + p2), p1 * p2});
  }
  if (static_cast<int>(sos.size()) != n) {
    throw Error(ErrorCode::kInternal, "band-pass design produced unpaired poles");
  }
  sos.front().b0 *= gain;
  sos.front().b1 *= gain;
  sos.front().b2 *= gain;
  return sos;
}

double magnitude_response(const SosFilter& sos, double freq_hz, double sample_rate_hz) {
  const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
  const Complex z1 = std::polar(1.0, -w);
  const Complex z2 = z1 * z1;
  Complex h(1.0, 0.0);
  for (const auto& s : sos) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return std::abs(h);
}

std::vector<double> sos_filter(const SosFilter& sos, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  run_sections(sos, y, std::vector<std::array<double, 2>>(sos.size(), {0.0, 0.0}));
  return y;
}

std::vector<double> sos_filtfilt(const SosFilter& sos, std::span<const double> x) {
  std::size_t trivial_b = 0, trivial_a = 0;
  for (const auto& s : sos) {
    trivial_b += s.b2 == 0.0;
    trivial_a += s.a2 == 0.0;
  }
  const std::size_t padlen = 3 * (2 * sos.size() + 1 - std::min(trivial_b, trivial_a));
  if (x.size() <= padlen) {
    throw Error(ErrorCode::kEmptyInput, "signal too short for zero-phase filtering");
  }
  const std::size_t n = x.size();

  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  run_sections(sos, ext, initial_state(sos, ext.front()));
  std::reverse(ext.begin(), ext.end());
  run_sections(sos, ext, initial_state(sos, ext.front()));
  std::reverse(ext.begin(), ext.end());

  return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(padlen),
                             ext.begin() + static_cast<std::ptrdiff_t>(padlen + n));
}

std::vector<double> peak_prominences(std::span<const double> x,
                                     std::span<const std::size_t> peaks, std::size_t window) {
  std::vector<double> out;
  out.reserve(peaks.size());
  for (std::size_t peak : peaks) {
    std::size_t lo = 0;
    std::size_t hi = x.size() - 1;
    if (window >= 2) {
      lo = peak >= window / 2 ? peak - window / 2 : 0;
      hi = std::min(hi, peak + window / 2);
    }
    const double height = x[peak];
    double left_min = height;
    for (std::size_t i = peak + 1; i-- > lo;) {
      if (x[i] > height) break;
      left_min = std::min(left_min, x[i]);
    }
    double right_min = height;
    for (std::size_t i = peak; i <= hi; ++i) {
      if (x[i] > height) break;
      right_min = std::min(right_min, x[i]);
    }
    out.push_back(height - std::max(left_min, right_min));
  }
  return out;
}

std::vector<std::size_t> find_peaks(std::span<const double> x, const PeakOptions& options) {
  std::vector<std::size_t> peaks;
  if (x.size() < 3) return peaks;

  // Local maxima, flat tops resolved to their middle sample.
  std::size_t i = 1;
  const std::size_t last = x.size() - 1;
  while (i < last) {
    if (x[i - 1] < x[i]) {
      std::size_t ahead = i + 1;
      while (ahead < last && x[ahead] == x[i]) ++ahead;
      if (x[ahead] < x[i]) {
        peaks.push_back((i + ahead - 1) / 2);
        i = ahead;
      }
    }
    ++i;
  }

  // Distance: visit peaks tallest first and suppress shorter neighbours.
  if (options.min_distance > 1 && peaks.size() > 1) {
    std::vector<std::size_t> order(peaks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[peaks[a]] < x[peaks[b]]; });
    std::vector<bool> keep(peaks.size(), true);
    for (std::size_t r = order.size(); r-- > 0;) {
      const std::size_t j = order[r];
      if (!keep[j]) continue;
      for (std::size_t k = j; k-- > 0 && peaks[j] - peaks[k] < options.min_distance;) {
        keep[k] = false;
      }
      for (std::size_t k = j + 1;
           k < peaks.size() && peaks[k] - peaks[j] < options.min_distance; ++k) {
        keep[k] = false;
      }
    }
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < peaks.size(); ++j) {
      if (keep[j]) kept.push_back(peaks[j]);
    }
    peaks = std::move(kept);
  }

  if (options.min_prominence > 0.0) {
    auto prom = peak_prominences(x, peaks, options.prominence_window);
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < peaks.size(); ++j) {
      if (prom[j] >= options.min_prominence) kept.push_back(peaks[j]);
    }
    peaks = std::move(kept);
  }
  return peaks;
}

}  // namespace hg::analytics
