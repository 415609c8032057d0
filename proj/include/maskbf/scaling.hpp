// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Output-scale resolution. Every function here works on one frequency bin:
// y and x_k are the filter output and the reference-mic observation over
// frames, and gamma is the complex factor in z(t) = gamma y(t).

#ifndef MASKBF_SCALING_HPP
#define MASKBF_SCALING_HPP

#include <string>

#include "maskbf/masks.hpp"

namespace maskbf {

enum class ScalingMethod { ideal, mdp, ban, rtf, swf, mask_based };

inline std::string to_string(ScalingMethod m) {
  switch (m) {
    case ScalingMethod::ideal: return "ideal";
    case ScalingMethod::mdp: return "mdp";
    case ScalingMethod::ban: return "ban";
    case ScalingMethod::rtf: return "rtf";
    case ScalingMethod::swf: return "swf";
    case ScalingMethod::mask_based: return "mask-based";
  }
  return "?";
}

inline ScalingMethod scaling_from_string(const std::string& s) {
  if (s == "ideal" || s == "IS") return ScalingMethod::ideal;
  if (s == "mdp" || s == "MDP") return ScalingMethod::mdp;
  if (s == "ban" || s == "BAN") return ScalingMethod::ban;
  if (s == "rtf" || s == "RTF") return ScalingMethod::rtf;
  if (s == "swf" || s == "SWF") return ScalingMethod::swf;
  if (s == "mask-based") return ScalingMethod::mask_based;
  throw std::invalid_argument("unknown scaling method: " + s);
}

struct ScalingSpec {
  ScalingMethod method = ScalingMethod::ideal;
  MaskConstraint mask_constraint = MaskConstraint::l1_mn;  // mask-based only
  RVector swf_variance;                                    // swf only, per frequency
};

/// Relative energy below which the output counts as silent inside
/// optimization loops.
inline constexpr double kZeroEnergyRatio = 1e-14;

namespace detail {

inline Complex projection_gain(const CVector& p, const CVector& y) {
  if (p.size() != y.size())
    throw DimensionMismatch("lengths " + std::to_string(p.size()) + " and " + std::to_string(y.size()));
  const double e = y.squaredNorm();
  if (!(e > 0.0)) throw ZeroEnergy("filter output has no energy");
  // <p conj(y)> / <|y|^2>; the frame count cancels
  return y.dot(p) / e;
}

}  // namespace detail

/// gamma = <s_k conj(y)> / <|y|^2>, the MSE-optimal scale towards s_k.
inline Complex scale_ideal(const CVector& y, const CVector& s_k) { return detail::projection_gain(s_k, y); }

/// gamma = <m_p x_k conj(y)> / <|y|^2> for a complex (or real) mask m_p.
inline Complex scale_mask_based(const CVector& y, const CVector& x_k, const CVector& m_p) {
  if (m_p.size() != x_k.size())
    throw DimensionMismatch("mask length " + std::to_string(m_p.size()) + " for " + std::to_string(x_k.size()) +
                            " frames");
  return detail::projection_gain(m_p.cwiseProduct(x_k), y);
}

/// Minimal distortion principle: scale towards the reference observation.
inline Complex scale_mdp(const CVector& y, const CVector& x_k) { return detail::projection_gain(x_k, y); }

/// Blind analytic normalization sqrt(w^H Phi_n Phi_n w / N) / (w^H Phi_n w).
inline double scale_ban(const CVector& w, const HermitianMatrix& phi_n) {
  if (w.size() != phi_n.dim()) throw DimensionMismatch("filter length vs noise covariance");
  const CVector pw = phi_n.matrix() * w;
  const double den = w.dot(pw).real();
  if (!(den > 0.0)) throw ZeroEnergy("w^H Phi_n w = " + std::to_string(den));
  return std::sqrt(pw.squaredNorm() / static_cast<double>(w.size())) / den;
}

/// Relative transfer function h / h_k.
inline CVector scale_rtf(const CVector& h, Eigen::Index k) {
  if (k < 0 || k >= h.size()) throw DimensionMismatch("reference index out of range");
  if (!(std::abs(h(k)) > 1e-12 * h.norm())) throw ZeroEnergy("steering vector vanishes at the reference mic");
  return h / h(k);
}

/// Single-channel Wiener post-gain sigma_s^2 / (sigma_s^2 + w^H Phi_n w).
inline double scale_swf(const CVector& w, const HermitianMatrix& phi_n, double sigma_s2) {
  if (sigma_s2 < 0.0) throw std::invalid_argument("signal variance must be non-negative");
  if (w.size() != phi_n.dim()) throw DimensionMismatch("filter length vs noise covariance");
  const double noise = std::max(0.0, w.dot(phi_n.matrix() * w).real());
  const double den = sigma_s2 + noise;
  if (den == 0.0) return sigma_s2 == 0.0 && noise == 0.0 ? 1.0 : 0.0;
  return sigma_s2 / den;
}

}  // namespace maskbf

#endif  // MASKBF_SCALING_HPP
