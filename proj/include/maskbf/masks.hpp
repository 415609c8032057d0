// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Mask parameterizations and masked covariance assembly.

#ifndef MASKBF_MASKS_HPP
#define MASKBF_MASKS_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskbf/diffgraph.hpp"
#include "maskbf/signal.hpp"

namespace maskbf {

/// Value constraint of a time-frequency mask. Binary masks are kept for
/// classification only; they have no gradient and are never optimized.
enum class MaskConstraint { complex, non_negative, ratio, l1_mn, l2_mn, binary };

inline std::string to_string(MaskConstraint c) {
  switch (c) {
    case MaskConstraint::complex: return "complex";
    case MaskConstraint::non_negative: return "non-negative";
    case MaskConstraint::ratio: return "ratio";
    case MaskConstraint::l1_mn: return "l1-mn";
    case MaskConstraint::l2_mn: return "l2-mn";
    case MaskConstraint::binary: return "binary";
  }
  return "?";
}

inline MaskConstraint constraint_from_string(const std::string& s) {
  if (s == "complex") return MaskConstraint::complex;
  if (s == "non-negative" || s == "abs") return MaskConstraint::non_negative;
  if (s == "ratio" || s == "sigmoid") return MaskConstraint::ratio;
  if (s == "l1-mn") return MaskConstraint::l1_mn;
  if (s == "l2-mn") return MaskConstraint::l2_mn;
  if (s == "binary") return MaskConstraint::binary;
  throw std::invalid_argument("unknown mask constraint: " + s);
}

enum class MaskRole { target, noise, scaling };  // m_s, m_n, m_p

inline std::string to_string(MaskRole r) {
  switch (r) {
    case MaskRole::target: return "m_s";
    case MaskRole::noise: return "m_n";
    case MaskRole::scaling: return "m_p";
  }
  return "?";
}

/// Logit value that activates to the neutral mask: 0.5 for sigmoid, 1 for the
/// absolute-value family.
inline double neutral_logit(MaskConstraint c) {
  return c == MaskConstraint::ratio ? 0.0 : 1.0;
}

/// Unconstrained buffers behind one mask. Logits are frames x freqs; the
/// batch-norm affine terms are per frequency.
struct MaskBuffer {
  MaskRole role = MaskRole::target;
  MaskConstraint constraint = MaskConstraint::ratio;
  RMatrix logits;
  RVector bn_scale;
  RVector bn_shift;
  RMatrix imag_logits;  // second buffer, complex masks only

  static MaskBuffer neutral(MaskRole role, MaskConstraint c, Eigen::Index frames, Eigen::Index freqs) {
    MaskBuffer b;
    b.role = role;
    b.constraint = c;
    const double v = neutral_logit(c);
    b.logits = RMatrix::Constant(frames, freqs, v);
    b.bn_scale = RVector::Ones(freqs);
    // with constant logits the normalized row is zero, so the shift carries
    // the initial value through batch norm unchanged
    b.bn_shift = RVector::Constant(freqs, v);
    if (c == MaskConstraint::complex) b.imag_logits = RMatrix::Zero(frames, freqs);
    return b;
  }
};

struct MaskParameterSet {
  std::map<MaskRole, MaskBuffer> buffers;
  bool bn_enabled = false;

  bool has(MaskRole r) const { return buffers.count(r) != 0; }
  const MaskBuffer& at(MaskRole r) const { return buffers.at(r); }
  MaskBuffer& at(MaskRole r) { return buffers.at(r); }
};

/// Graph form of one frequency column of a mask: optional batch norm on the
/// logits, then the constraint's activation. Returns a real 1 x T node.
inline ad::NodeId activate_node(ad::Graph& g, ad::NodeId logits, std::optional<std::pair<ad::NodeId, ad::NodeId>> bn,
                                MaskConstraint c) {
  ad::NodeId z = logits;
  if (bn) z = ad::batch_norm(g, z, bn->first, bn->second);
  switch (c) {
    case MaskConstraint::ratio: return ad::sigmoid(g, z);
    case MaskConstraint::non_negative: return ad::abs(g, z);
    case MaskConstraint::l1_mn: return ad::l1_normalize(g, ad::abs(g, z));
    case MaskConstraint::l2_mn: return ad::l2_normalize(g, ad::abs(g, z));
    case MaskConstraint::complex: return z;  // identity on each real buffer
    case MaskConstraint::binary: break;
  }
  throw UnsupportedOp("binary masks have no differentiable activation");
}

namespace detail {

inline RVector activate_column(const MaskBuffer& b, Eigen::Index f, bool bn_enabled, const RMatrix& logits) {
  ad::Graph g;
  const auto l = g.constant_real(logits.col(f).transpose());
  std::optional<std::pair<ad::NodeId, ad::NodeId>> bn;
  if (bn_enabled)
    bn = std::make_pair(g.constant_real(RMatrix::Constant(1, 1, b.bn_scale(f))),
                        g.constant_real(RMatrix::Constant(1, 1, b.bn_shift(f))));
  const auto m = activate_node(g, l, bn, b.constraint == MaskConstraint::complex ? MaskConstraint::complex : b.constraint);
  return g.real_value(m).transpose();
}

}  // namespace detail

/// Real mask values (frames x freqs) of a buffer. Binary masks threshold the
/// logits at zero. Complex buffers return their real part; use
/// activate_complex for both parts.
inline RMatrix activate(const MaskBuffer& b, bool bn_enabled) {
  if (b.constraint == MaskConstraint::binary)
    return b.logits.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
  RMatrix out(b.logits.rows(), b.logits.cols());
  for (Eigen::Index f = 0; f < b.logits.cols(); ++f)
    out.col(f) = detail::activate_column(b, f, bn_enabled, b.logits);
  return out;
}

/// Complex masks are carried as two real buffers (real, imaginary).
inline CMatrix activate_complex(const MaskBuffer& b) {
  if (b.constraint != MaskConstraint::complex)
    return activate(b, false).cast<Complex>();
  CMatrix m(b.logits.rows(), b.logits.cols());
  m.real() = b.logits;
  m.imag() = b.imag_logits;
  return m;
}

// ---------------------------------------------------------------------------
// Covariance assembly

enum class CovarianceNormalization { plain, l1_normalized };

/// <m x x^H>_t for one frequency bin (Phi_x when the mask is omitted), or
/// sum m x x^H / sum m when l1-normalized.
inline HermitianMatrix assemble_covariance(const CMatrix& x, const std::optional<RVector>& mask,
                                           CovarianceNormalization norm = CovarianceNormalization::plain) {
  const auto frames = x.cols();
  if (frames == 0) throw EmptyInput("no frames");
  if (mask && mask->size() != frames)
    throw DimensionMismatch("mask length " + std::to_string(mask->size()) + " for " +
                            std::to_string(frames) + " frames");
  const RVector m = mask ? *mask : RVector::Ones(frames);
  double denom = static_cast<double>(frames);
  if (norm == CovarianceNormalization::l1_normalized) {
    denom = m.sum();
    if (!(std::abs(denom) > 1e-12)) throw ZeroMaskSum("mask sum " + std::to_string(denom));
  }
  const CMatrix raw = (x * m.cast<Complex>().asDiagonal()) * x.adjoint();
  return HermitianMatrix::symmetrized(raw / denom);
}

inline HermitianMatrix assemble_covariance(const MultichannelSpectrogram& spec, const std::optional<RVector>& mask,
                                           Eigen::Index f,
                                           CovarianceNormalization norm = CovarianceNormalization::plain) {
  return assemble_covariance(spec.bin(f), mask, norm);
}

/// <m x x^H>_t for a complex mask; not Hermitian in general.
inline CMatrix assemble_covariance_complex(const CMatrix& x, const CVector& mask) {
  if (mask.size() != x.cols())
    throw DimensionMismatch("mask length " + std::to_string(mask.size()) + " for " +
                            std::to_string(x.cols()) + " frames");
  return (x * mask.asDiagonal()) * x.adjoint() / static_cast<double>(x.cols());
}

/// Per-frequency observation, target and interference covariances; any subset
/// may be populated.
struct CovarianceStack {
  std::vector<std::optional<HermitianMatrix>> phi_x, phi_s, phi_n;

  explicit CovarianceStack(std::size_t freqs = 0) : phi_x(freqs), phi_s(freqs), phi_n(freqs) {}
  std::size_t freqs() const { return phi_x.size(); }
};

/// Assembles the covariances the given masks support. A null mask leaves the
/// corresponding slot empty.
inline CovarianceStack assemble_stack(const MultichannelSpectrogram& x, const RMatrix* mask_s,
                                      const RMatrix* mask_n) {
  CovarianceStack st(static_cast<std::size_t>(x.freqs()));
  for (Eigen::Index f = 0; f < x.freqs(); ++f) {
    const CMatrix xb = x.bin(f);
    const auto i = static_cast<std::size_t>(f);
    st.phi_x[i] = assemble_covariance(xb, std::nullopt);
    if (mask_s) st.phi_s[i] = assemble_covariance(xb, RVector(mask_s->col(f)));
    if (mask_n) st.phi_n[i] = assemble_covariance(xb, RVector(mask_n->col(f)));
  }
  return st;
}

/// Writes `<stem>.bin` (little-endian float64, t-major frames x freqs) and
/// `<stem>.json` {constraint, frames, freqs}.
inline void write_mask(const std::filesystem::path& stem, const RMatrix& mask, MaskConstraint c,
                       const std::string& role = {}) {
  std::ofstream os(stem.string() + ".bin", std::ios::binary);
  for (Eigen::Index t = 0; t < mask.rows(); ++t)
    for (Eigen::Index f = 0; f < mask.cols(); ++f) detail::put_le<double>(os, mask(t, f));
  nlohmann::json j = {{"constraint", to_string(c)}, {"frames", mask.rows()}, {"freqs", mask.cols()},
                      {"layout", "t-major"}, {"dtype", "float64-le"}};
  if (!role.empty()) j["role"] = role;
  std::ofstream(stem.string() + ".json") << j.dump(2) << "\n";
}

}  // namespace maskbf

#endif  // MASKBF_MASKS_HPP
