#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>

#include "pvfc/clarke.hpp"
#include "pvfc/errors.hpp"

namespace pvfc {

struct Pq {
    double p_w = 0.0;
    double q_var = 0.0;
};

// Instantaneous power in the amplitude-invariant alpha/beta frame; positive q
// for a current lagging the voltage.
inline Pq instantaneous_pq(const AlphaBeta& v, const AlphaBeta& i) {
    return {1.5 * (v.alpha * i.alpha + v.beta * i.beta),
            1.5 * (v.beta * i.alpha - v.alpha * i.beta)};
}

// Sliding peak of |x| over the most recent `window` samples (monotonic
// deque). One window of a sinusoid recovers its amplitude to sample
// resolution.
class SlidingAmplitude {
  public:
    explicit SlidingAmplitude(int window) : window_(window) {
        if (window < 1) throw InvalidInput("SlidingAmplitude: window must be >= 1");
    }

    double push(double x) {
        const double m = std::abs(x);
        while (!q_.empty() && q_.front().index + window_ <= n_) q_.pop_front();
        while (!q_.empty() && q_.back().peak <= m) q_.pop_back();
        q_.push_back({n_, m});
        ++n_;
        return q_.front().peak;
    }

    double value() const { return q_.empty() ? 0.0 : q_.front().peak; }

  private:
    struct Entry {
        std::int64_t index;
        double peak;
    };
    std::int64_t window_;
    std::int64_t n_ = 0;
    std::deque<Entry> q_;
};

struct SagStatus {
    bool active = false;
    std::array<double, 3> amplitude_v{0.0, 0.0, 0.0};  // current per-phase estimates
    double min_fraction = 1.0;  // lowest per-phase fraction seen during the episode
    double onset_s = -1.0;
};

// Hysteresis threshold logic on per-phase amplitude estimates: a sag becomes
// active when any phase drops below detect_pu of nominal and clears only when
// every phase recovers above clear_pu.
inline SagStatus detect_sag(const std::array<double, 3>& amplitude_v, double nominal_v,
                            const SagStatus& prev = {}, double t = 0.0,
                            double detect_pu = 0.90, double clear_pu = 0.95) {
    if (!(nominal_v > 0.0)) throw InvalidInput("detect_sag: nominal amplitude must be positive");
    SagStatus st = prev;
    st.amplitude_v = amplitude_v;
    std::array<double, 3> frac{};
    for (int k = 0; k < 3; ++k)
        frac[k] = std::min(1.0, std::max(amplitude_v[k], 0.0) / nominal_v);
    const double lowest = *std::min_element(frac.begin(), frac.end());

    if (!prev.active) {
        if (lowest < detect_pu) {
            st.active = true;
            st.onset_s = t;
            st.min_fraction = lowest;
        } else {
            st.min_fraction = lowest;
        }
        return st;
    }
    st.min_fraction = std::min(prev.min_fraction, lowest);
    if (*std::min_element(frac.begin(), frac.end()) > clear_pu) {
        st.active = false;
        st.onset_s = -1.0;
        st.min_fraction = lowest;
    }
    return st;
}

// Per-phase one-cycle peak tracking plus the hysteresis detector.
class SagDetector {
  public:
    SagDetector(int window_samples, double nominal_peak_v, double detect_pu = 0.90,
                double clear_pu = 0.95)
        : a_(window_samples), b_(window_samples), c_(window_samples),
          window_(window_samples), nominal_(nominal_peak_v), detect_(detect_pu),
          clear_(clear_pu) {
        if (!(nominal_peak_v > 0.0))
            throw InvalidInput("SagDetector: nominal amplitude must be positive");
        if (!(clear_pu > detect_pu))
            throw InvalidInput("SagDetector: clear threshold must exceed detect threshold");
    }

    const SagStatus& update(const std::array<double, 3>& v_abc, double t) {
        const std::array<double, 3> amps{a_.push(v_abc[0]), b_.push(v_abc[1]),
                                         c_.push(v_abc[2])};
        // Partial-window estimates undershoot; stay quiet until one full
        // cycle has primed the peak trackers.
        if (primed_ < window_) {
            ++primed_;
            status_.amplitude_v = amps;
            return status_;
        }
        status_ = detect_sag(amps, nominal_, status_, t, detect_, clear_);
        return status_;
    }

    const SagStatus& status() const { return status_; }

  private:
    SlidingAmplitude a_, b_, c_;
    int window_;
    int primed_ = 0;
    double nominal_, detect_, clear_;
    SagStatus status_;
};

}  // namespace pvfc
