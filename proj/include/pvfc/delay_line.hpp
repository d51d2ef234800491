#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pvfc/errors.hpp"

namespace pvfc {

// Fixed-length scalar delay line. After k pushes, push() has returned the
// value submitted k-n pushes earlier; until the line fills it returns the
// declared initial value. Used for the fundamental-period memory of the
// repetitive controller and the quarter-cycle voltage delay.
class DelayLine {
  public:
    explicit DelayLine(std::size_t n, double initial = 0.0)
        : buf_(n, initial), head_(0) {
        if (n < 1) throw InvalidInput("DelayLine: length must be >= 1");
    }

    // Insert x, return the value from n pushes ago.
    double push(double x) {
        const double out = buf_[head_];
        buf_[head_] = x;
        head_ = (head_ + 1) % buf_.size();
        return out;
    }

    // Value the next push would return.
    double front() const { return buf_[head_]; }

    std::size_t length() const { return buf_.size(); }

    void fill(double v) { std::fill(buf_.begin(), buf_.end(), v); }

  private:
    std::vector<double> buf_;
    std::size_t head_;
};

// Sample count for a physical delay. The delay must land on the sample grid
// exactly (the repetitive controller's period memory is meaningless
// otherwise), so a misaligned request is rejected.
inline std::size_t samples_for_delay(double delay_s, double dt) {
    if (!(delay_s > 0.0) || !(dt > 0.0))
        throw InvalidInput("samples_for_delay: delay and dt must be positive");
    const double ratio = delay_s / dt;
    const double n = std::round(ratio);
    if (std::fabs(ratio - n) > 1e-6 * ratio || n < 1.0)
        throw InvalidInput("samples_for_delay: delay is not an integer number of samples");
    return static_cast<std::size_t>(n);
}

} // namespace pvfc
