// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MASKBF_METRICS_HPP
#define MASKBF_METRICS_HPP

#include <cmath>

#include "maskbf/linalg.hpp"

namespace maskbf {

struct SdrResult {
  double sdr_db = 0.0;
  double target_energy = 0.0;
  double error_energy = 0.0;
  bool capped = false;  // error energy was zero
};

inline constexpr double kSdrCapDb = 120.0;

/// 10 log10(sum S^2 / sum (S - Z)^2) over the whole waveform. The estimate is
/// zero-padded or trimmed to the reference length.
inline SdrResult sdr(const RVector& reference, const RVector& estimate) {
  const Eigen::Index n = reference.size();
  RVector z = RVector::Zero(n);
  const Eigen::Index m = std::min(n, estimate.size());
  z.head(m) = estimate.head(m);
  SdrResult r;
  r.target_energy = reference.squaredNorm();
  if (!(r.target_energy > 0.0)) throw ZeroReference("reference signal has zero energy");
  r.error_energy = (reference - z).squaredNorm();
  if (r.error_energy == 0.0) {
    r.sdr_db = kSdrCapDb;
    r.capped = true;
    return r;
  }
  r.sdr_db = 10.0 * std::log10(r.target_energy / r.error_energy);
  return r;
}

}  // namespace maskbf

#endif  // MASKBF_METRICS_HPP
