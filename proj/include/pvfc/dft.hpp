#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pvfc/errors.hpp"

namespace pvfc {

// Harmonic magnitudes of a periodic signal. amplitude[k-1] is the peak
// amplitude at k * f0_hz.
struct Spectrum {
    double f0_hz = 0.0;
    std::vector<double> amplitude;
};

namespace detail {
// Goertzel recurrence for one bin; returns peak amplitude (2|X|/N).
inline double goertzel_amplitude(std::span<const double> x, double f, double fs) {
    const double w = 2.0 * M_PI * f / fs;
    const double coeff = 2.0 * std::cos(w);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (double v : x) {
        s0 = v + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    const double re = s1 - s2 * std::cos(w);
    const double im = s2 * std::sin(w);
    return 2.0 * std::sqrt(re * re + im * im) / static_cast<double>(x.size());
}
} // namespace detail

// DFT magnitudes at exact multiples of f0 over a window that must span a
// whole number of fundamental cycles; this keeps the bins leakage-free
// without windowing tricks.
inline Spectrum harmonic_spectrum(std::span<const double> samples, double f0_hz,
                                  double fs_hz, std::size_t n_harmonics) {
    if (!(f0_hz > 0.0) || !(fs_hz > 0.0))
        throw InvalidInput("harmonic_spectrum: f0 and fs must be positive");
    if (n_harmonics < 1) throw InvalidInput("harmonic_spectrum: need at least one harmonic");
    if (fs_hz <= 2.0 * static_cast<double>(n_harmonics) * f0_hz)
        throw InvalidInput("harmonic_spectrum: sample rate below Nyquist for requested harmonics");
    if (samples.empty()) throw InvalidInput("harmonic_spectrum: empty window");

    const double cycles = static_cast<double>(samples.size()) * f0_hz / fs_hz;
    const double whole = std::round(cycles);
    if (whole < 1.0 || std::fabs(cycles - whole) > 1e-9 * std::max(1.0, cycles))
        throw InvalidInput("harmonic_spectrum: window is not an integer number of cycles");

    Spectrum sp;
    sp.f0_hz = f0_hz;
    sp.amplitude.resize(n_harmonics);
    for (std::size_t k = 1; k <= n_harmonics; ++k)
        sp.amplitude[k - 1] =
            detail::goertzel_amplitude(samples, static_cast<double>(k) * f0_hz, fs_hz);
    return sp;
}

// Total harmonic distortion in percent of the fundamental.
inline double thd(std::span<const double> samples, double f0_hz, double fs_hz,
                  std::size_t n_harmonics) {
    if (n_harmonics < 2) throw InvalidInput("thd: need at least two harmonics");
    const Spectrum sp = harmonic_spectrum(samples, f0_hz, fs_hz, n_harmonics);

    double rms2 = 0.0;
    for (double v : samples) rms2 += v * v;
    const double rms = std::sqrt(rms2 / static_cast<double>(samples.size()));

    const double a1 = sp.amplitude[0];
    if (a1 < 1e-12 * std::max(rms, 1e-300))
        throw UndefinedThd("thd: fundamental magnitude is zero");

    double sum2 = 0.0;
    for (std::size_t k = 2; k <= n_harmonics; ++k) {
        const double a = sp.amplitude[k - 1];
        sum2 += a * a;
    }
    return 100.0 * std::sqrt(sum2) / a1;
}

} // namespace pvfc
