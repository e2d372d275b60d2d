#pragma once

#include "lmpanel/types.hpp"

namespace lmpanel {

// Weighted pool-adjacent-violators: returns the nondecreasing vector
// minimizing sum_i w_i (out_i - v_i)^2. Zero-weight entries are free; a
// zero-weight block keeps the plain mean of its pooled values.
Vector weighted_isotonic_fit(const Vector& values, const Vector& weights);

} // namespace lmpanel
