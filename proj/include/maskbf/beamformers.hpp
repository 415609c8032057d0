// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Filter estimation for the twelve mask-based beamformer variations, the
// ideal MMSE filter, and the ICA-derived SIBF / MLDR adapters.
//
// A variation is named PREFIX-SUFFIX. The prefix picks the operator:
//   MaxGEV / MinGEV  extreme generalized eigenvector
//   INV              inverse times a column:  A^-1 B e_k
//   ISEV             inverse times the principal eigenvector:  A^-1 P_max(B)
// and the suffix picks the covariance pair: NS (Phi_n, Phi_s), OS (Phi_x,
// Phi_s), NO (Phi_n, Phi_x).

#ifndef MASKBF_BEAMFORMERS_HPP
#define MASKBF_BEAMFORMERS_HPP

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskbf/masks.hpp"

namespace maskbf {

enum class Prefix { max_gev, min_gev, inv, isev };
enum class Suffix { ns, os, no };

struct VariationSpec {
  Prefix prefix = Prefix::inv;
  Suffix suffix = Suffix::ns;

  bool uses_target_mask() const { return suffix != Suffix::no; }
  bool uses_noise_mask() const { return suffix != Suffix::os; }
  bool is_gev() const { return prefix == Prefix::max_gev || prefix == Prefix::min_gev; }

  std::string name() const {
    static constexpr std::array<const char*, 4> p{"MaxGEV", "MinGEV", "INV", "ISEV"};
    static constexpr std::array<const char*, 3> s{"NS", "OS", "NO"};
    return std::string(p[static_cast<int>(prefix)]) + "-" + s[static_cast<int>(suffix)];
  }

  static VariationSpec parse(const std::string& name) {
    const auto dash = name.find('-');
    if (dash == std::string::npos) throw std::invalid_argument("bad variation name: " + name);
    const std::string p = name.substr(0, dash), s = name.substr(dash + 1);
    VariationSpec v;
    if (p == "MaxGEV") v.prefix = Prefix::max_gev;
    else if (p == "MinGEV") v.prefix = Prefix::min_gev;
    else if (p == "INV") v.prefix = Prefix::inv;
    else if (p == "ISEV") v.prefix = Prefix::isev;
    else throw std::invalid_argument("bad variation prefix: " + name);
    if (s == "NS") v.suffix = Suffix::ns;
    else if (s == "OS") v.suffix = Suffix::os;
    else if (s == "NO") v.suffix = Suffix::no;
    else throw std::invalid_argument("bad variation suffix: " + name);
    return v;
  }

  friend bool operator==(const VariationSpec&, const VariationSpec&) = default;
};

inline std::vector<VariationSpec> all_variations() {
  std::vector<VariationSpec> out;
  for (auto p : {Prefix::max_gev, Prefix::min_gev, Prefix::inv, Prefix::isev})
    for (auto s : {Suffix::ns, Suffix::os, Suffix::no}) out.push_back({p, s});
  return out;
}

/// The variations left once MaxGEV is folded into its MinGEV equivalent.
inline std::vector<VariationSpec> nine_variations() {
  std::vector<VariationSpec> out;
  for (auto p : {Prefix::min_gev, Prefix::inv, Prefix::isev})
    for (auto s : {Suffix::ns, Suffix::no, Suffix::os}) out.push_back({p, s});
  return out;
}

/// Per-frequency filters w and scaling factors gamma (default 1).
struct FilterBank {
  std::vector<CVector> w;
  std::vector<Complex> gamma;

  explicit FilterBank(std::size_t freqs = 0) : w(freqs), gamma(freqs, Complex(1.0, 0.0)) {}
  std::size_t freqs() const { return w.size(); }
};

/// Filter for one bin from (possibly complex-masked) covariances. Slots the
/// variation does not use may be null. GEV prefixes need Hermitian inputs and
/// return unit-norm, phase-canonical filters; INV and ISEV keep natural scale.
inline CVector estimate_filter_bin(const VariationSpec& spec, const CMatrix* phi_x, const CMatrix* phi_s,
                                   const CMatrix* phi_n, Eigen::Index k) {
  auto need = [](const CMatrix* m, const char* what) -> const CMatrix& {
    if (!m) throw DimensionMismatch(std::string("variation needs ") + what);
    return *m;
  };
  const CMatrix* first = nullptr;   // matrix paired with Phi_s (or Phi_x for NO)
  const CMatrix* second = nullptr;  // the other one
  switch (spec.suffix) {
    case Suffix::ns: first = &need(phi_n, "Phi_n"); second = &need(phi_s, "Phi_s"); break;
    case Suffix::os: first = &need(phi_x, "Phi_x"); second = &need(phi_s, "Phi_s"); break;
    case Suffix::no: first = &need(phi_n, "Phi_n"); second = &need(phi_x, "Phi_x"); break;
  }
  // first plays the "inverted" / denominator role for MaxGEV, INV and ISEV.
  switch (spec.prefix) {
    case Prefix::max_gev:
      return gev_extreme(HermitianMatrix(*second), HermitianMatrix(*first), Extreme::max).vector;
    case Prefix::min_gev:
      return gev_extreme(HermitianMatrix(*first), HermitianMatrix(*second), Extreme::min).vector;
    case Prefix::inv: {
      if (k < 0 || k >= second->rows()) throw DimensionMismatch("reference index out of range");
      return solve_general(*first, second->col(k));
    }
    case Prefix::isev:
      return solve_general(*first, sev_max(HermitianMatrix(*second)).vector);
  }
  return {};
}

inline CVector estimate_filter_bin(const VariationSpec& spec, const CovarianceStack& cov, std::size_t f,
                                   Eigen::Index k) {
  auto ptr = [](const std::optional<HermitianMatrix>& m) { return m ? &m->matrix() : nullptr; };
  return estimate_filter_bin(spec, ptr(cov.phi_x[f]), ptr(cov.phi_s[f]), ptr(cov.phi_n[f]), k);
}

/// Filters for every frequency. `k` is the zero-based reference index.
inline std::vector<CVector> estimate_filter(const VariationSpec& spec, const CovarianceStack& cov, Eigen::Index k) {
  std::vector<CVector> w(cov.freqs());
  for (std::size_t f = 0; f < cov.freqs(); ++f) w[f] = estimate_filter_bin(spec, cov, f, k);
  return w;
}

/// w_ideal = Phi_x^-1 <x conj(s_k)>, the exact least-squares filter towards
/// the true reference-mic target.
inline CVector ideal_mmse(const CMatrix& x, const CVector& s_ref) {
  if (s_ref.size() != x.cols())
    throw DimensionMismatch("reference length " + std::to_string(s_ref.size()) + " for " +
                            std::to_string(x.cols()) + " frames");
  const double t = static_cast<double>(x.cols());
  const HermitianMatrix phi_x = HermitianMatrix::symmetrized(x * x.adjoint() / t);
  const CVector r = x * s_ref.conjugate() / t;
  return solve(phi_x, r);
}

/// Ideal filters for every bin of a scenario.
inline std::vector<CVector> ideal_mmse(const Scenario& sc) {
  std::vector<CVector> w(static_cast<std::size_t>(sc.observation.freqs()));
  const auto k = sc.ref_index();
  for (Eigen::Index f = 0; f < sc.observation.freqs(); ++f) {
    const CVector s = sc.target.bin(f).row(k).transpose();
    w[static_cast<std::size_t>(f)] = ideal_mmse(sc.observation.bin(f), s);
  }
  return w;
}

/// Principal eigenvector of Phi_s per frequency.
inline std::vector<CVector> steering_vector(const std::vector<HermitianMatrix>& phi_s) {
  std::vector<CVector> h;
  h.reserve(phi_s.size());
  for (const auto& p : phi_s) h.push_back(sev_max(p).vector);
  return h;
}

/// m_n(t) = 1 / max(r(t)^beta, eps), the TV-Gauss weighting that turns
/// MinGEV-NO into SIBF.
inline RVector sibf_noise_mask(const RVector& r, double beta, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if ((r.array() < 0.0).any()) throw std::invalid_argument("reference magnitudes must be non-negative");
  return r.unaryExpr([&](double v) { return 1.0 / std::max(std::pow(v, beta), eps); });
}

/// Distortionless filter A^-1 h / (h^H A^-1 h); A = Phi_n gives MVDR, Phi_x
/// gives MPDR. The denominator is clamped at 1e-12 in magnitude.
inline CVector distortionless(const HermitianMatrix& a, const CVector& h) {
  const CVector u = solve(a, h);
  Complex d = h.dot(u);
  if (std::abs(d) < 1e-12) d = d == Complex(0.0) ? Complex(1e-12) : d / std::abs(d) * 1e-12;
  return u / d;
}

/// Souden MVDR: Phi_n^-1 Phi_s e_k / tr(Phi_n^-1 Phi_s), trace clamped at 1e-12.
inline CVector souden_mvdr(const HermitianMatrix& phi_n, const HermitianMatrix& phi_s, Eigen::Index k) {
  const CMatrix m = solve_general(phi_n.matrix(), phi_s.matrix());
  Complex tr = m.trace();
  if (std::abs(tr) < 1e-12) tr = tr == Complex(0.0) ? Complex(1e-12) : tr / std::abs(tr) * 1e-12;
  return m.col(k) / tr;
}

struct MldrResult {
  CVector w;
  RVector sigma2;
  std::vector<double> objective;  // <log sigma^2 + |y|^2 / sigma^2>_t after each pass
};

/// Alternates Phi_sigma = <x x^H / sigma^2>, w = Phi_sigma^-1 h / (h^H
/// Phi_sigma^-1 h), sigma^2 = max(|w^H x|^2, eps_sigma). The variance starts
/// at |x_k|^2 floored at 1e-6 of its mean unless `initial` is given.
inline MldrResult mldr_alternate(const CMatrix& x, const CVector& h, int iterations, double eps_sigma, Eigen::Index k,
                                 const std::optional<RVector>& initial = std::nullopt) {
  if (h.norm() == 0.0) throw std::invalid_argument("steering vector must be nonzero");
  const auto frames = x.cols();
  MldrResult out;
  if (initial) {
    out.sigma2 = *initial;
  } else {
    out.sigma2 = x.row(k).cwiseAbs2().transpose();
    const double floor = 1e-6 * out.sigma2.mean();
    out.sigma2 = out.sigma2.cwiseMax(floor);
  }
  out.sigma2 = out.sigma2.cwiseMax(eps_sigma);
  for (int it = 0; it < iterations; ++it) {
    const RVector weight = out.sigma2.cwiseInverse();
    const HermitianMatrix phi = assemble_covariance(x, weight);
    out.w = distortionless(phi, h);
    const RVector y2 = (out.w.adjoint() * x).cwiseAbs2().transpose();
    out.sigma2 = y2.cwiseMax(eps_sigma);
    out.objective.push_back((out.sigma2.array().log() + y2.array() / out.sigma2.array()).sum() /
                            static_cast<double>(frames));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trivial (complex) optimal masks of the INV type

struct TrivialMask {
  CVector mask;
  std::vector<bool> valid;  // false where the defining division was guarded
};

namespace detail {

inline TrivialMask guarded_ratio(const CVector& num, const CVector& den) {
  TrivialMask out{CVector::Zero(num.size()), std::vector<bool>(static_cast<std::size_t>(num.size()), true)};
  const double floor = 1e-9 * den.cwiseAbs().maxCoeff();
  for (Eigen::Index t = 0; t < num.size(); ++t) {
    if (std::abs(den(t)) < floor || den(t) == Complex(0.0)) {
      out.valid[static_cast<std::size_t>(t)] = false;
      continue;
    }
    out.mask(t) = num(t) / den(t);
  }
  return out;
}

}  // namespace detail

/// INV-OS: m_s(t) = conj(s_k(t)) / conj(x_k(t)). Frames with |x_k| below 1e-9
/// of its peak get mask 0 and are marked invalid.
inline TrivialMask trivial_mask_from_target(const CMatrix& x, const CVector& s_ref, Eigen::Index k) {
  return detail::guarded_ratio(s_ref.conjugate(), x.row(k).transpose().conjugate());
}

/// INV-OS and INV-NS (as m_s / m_n): x^H(t) w_ideal / conj(x_k(t)).
inline TrivialMask trivial_mask_ratio(const CMatrix& x, const CVector& w_ideal, Eigen::Index k) {
  const CVector num = (w_ideal.adjoint() * x).adjoint();  // x^H w
  return detail::guarded_ratio(num, x.row(k).transpose().conjugate());
}

/// INV-NO: m_n(t) = conj(x_k(t)) / (x^H(t) w_ideal).
inline TrivialMask trivial_mask_inverse_ratio(const CMatrix& x, const CVector& w_ideal, Eigen::Index k) {
  const CVector den = (w_ideal.adjoint() * x).adjoint();
  return detail::guarded_ratio(x.row(k).transpose().conjugate(), den);
}

/// Writes `<stem>.bin` (float64 re/im pairs, frequency-major, mics per
/// frequency) and `<stem>.json` {freqs, mics, variation, gamma_included}.
/// With gamma included the stored vector is conj(gamma) w, so that
/// z = (stored)^H x directly.
inline void write_filters(const std::filesystem::path& stem, const FilterBank& fb, const std::string& variation,
                          bool gamma_included) {
  std::ofstream os(stem.string() + ".bin", std::ios::binary);
  Eigen::Index mics = 0;
  for (std::size_t f = 0; f < fb.freqs(); ++f) {
    const CVector v = gamma_included ? CVector(fb.w[f] * std::conj(fb.gamma[f])) : fb.w[f];
    mics = v.size();
    for (Eigen::Index n = 0; n < v.size(); ++n) {
      detail::put_le<double>(os, v(n).real());
      detail::put_le<double>(os, v(n).imag());
    }
  }
  nlohmann::json j = {{"freqs", fb.freqs()},      {"mics", mics},
                      {"variation", variation},   {"gamma_included", gamma_included},
                      {"dtype", "complex128-le"}, {"layout", "freq-major"}};
  std::ofstream(stem.string() + ".json") << j.dump(2) << "\n";
}

}  // namespace maskbf

#endif  // MASKBF_BEAMFORMERS_HPP
