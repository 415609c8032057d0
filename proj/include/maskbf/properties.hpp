// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Seeded property suites: trivial optimal masks, mask conversion rules,
// MaxGEV/MinGEV equivalence, gradient checks and scaling nesting.

#ifndef MASKBF_PROPERTIES_HPP
#define MASKBF_PROPERTIES_HPP

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "maskbf/optimizer.hpp"

namespace maskbf {

struct PropertyResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double measured = 0.0;   // worst value seen
  double tolerance = 0.0;
  std::string detail;
};

struct PropertyReport {
  std::vector<PropertyResult> results;

  bool passed() const {
    for (const auto& r : results)
      if (!r.passed) return false;
    return !results.empty();
  }
  std::size_t failures() const {
    std::size_t n = 0;
    for (const auto& r : results) n += !r.passed;
    return n;
  }
};

inline const std::vector<std::string>& property_suites() {
  static const std::vector<std::string> s{"appendixB", "appendixC", "equivalence", "gradients", "scaling-nesting"};
  return s;
}

struct PropertyOptions {
  std::uint64_t seed = 1;
  int scenes = 20;              // appendixB scenes
  int instances = 20;           // appendixC instances
  int covariance_instances = 50;
  double scene_duration = 0.5;  // seconds, for the scene-based suites
};

namespace detail {

inline StftConfig desk_stft() { return {256, 64, WindowKind::sqrt_hann}; }

inline Scenario seeded_scene(std::uint64_t seed, double duration, int mics = 3) {
  auto [t, n] = synth_scene(seed, mics, 2, duration, 16000.0);
  return mix_scenario(t, n, 1.0, 1, desk_stft());
}

inline CMatrix random_observation(std::mt19937_64& rng, Eigen::Index mics, Eigen::Index frames) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix x(mics, frames);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = Complex(g(rng), g(rng));
  return x;
}

inline RVector random_mask(std::mt19937_64& rng, Eigen::Index frames, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  RVector m(frames);
  for (Eigen::Index t = 0; t < frames; ++t) m(t) = u(rng);
  return m;
}

inline double relative_error(const CVector& a, const CVector& b) {
  const double nb = b.norm();
  return nb > 0.0 ? (a - b).norm() / nb : a.norm();
}

// GEV filter of a variation from real masks over one block.
inline CVector gev_filter(Prefix p, Suffix s, const CMatrix& x, const RVector* ms, const RVector* mn) {
  const CMatrix phx = assemble_covariance(x, std::nullopt).matrix();
  CMatrix phs, phn;
  if (ms) phs = assemble_covariance(x, *ms).matrix();
  if (mn) phn = assemble_covariance(x, *mn).matrix();
  return estimate_filter_bin({p, s}, &phx, ms ? &phs : nullptr, mn ? &phn : nullptr, 0);
}

class Collector {
 public:
  Collector(std::string suite, std::string name, double tol, bool upper = false)
      : r_{std::move(suite), std::move(name), true, upper ? -1e300 : 1e300, tol, {}}, upper_(upper) {}

  // upper: measured values must stay <= tol; otherwise >= tol
  void add(double v, const std::string& where) {
    const bool ok = std::isfinite(v) && (upper_ ? v <= r_.tolerance : v >= r_.tolerance);
    if (upper_ ? v > r_.measured : v < r_.measured) r_.measured = v;
    if (!std::isfinite(v)) r_.measured = v;
    if (!ok && r_.passed) {
      r_.passed = false;
      r_.detail = where;
    }
    ++count_;
  }
  void fail(const std::string& why) {
    r_.passed = false;
    if (r_.detail.empty()) r_.detail = why;
  }
  PropertyResult done() {
    if (count_ == 0 && r_.detail.empty()) {
      r_.passed = false;
      r_.detail = "no instances checked";
    }
    if (r_.passed) r_.detail = std::to_string(count_) + " checks";
    return r_;
  }

 private:
  PropertyResult r_;
  bool upper_;
  int count_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------

/// Trivial optimal masks of the INV type against the ideal MMSE filter.
inline std::vector<PropertyResult> suite_appendix_b(const PropertyOptions& opt) {
  detail::Collector exact("appendixB", "INV-OS conj(s_k)/conj(x_k) equals ideal MMSE (rel. error)", 1e-6, true);
  detail::Collector os("appendixB", "INV-OS x^H w_ideal / conj(x_k) collinear", 1.0 - 1e-6);
  detail::Collector no("appendixB", "INV-NO reciprocal mask collinear", 1.0 - 1e-6);
  detail::Collector ns("appendixB", "INV-NS mask ratio collinear", 1.0 - 1e-6);
  for (int i = 0; i < opt.scenes; ++i) {
    const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(i);
    try {
      const Scenario sc = detail::seeded_scene(seed, opt.scene_duration);
      std::mt19937_64 rng(seed);
      const auto k = sc.ref_index();
      for (Eigen::Index f = 0; f < sc.observation.freqs(); ++f) {
        const CMatrix x = sc.observation.bin(f);
        const CVector s = sc.target.bin(f).row(k).transpose();
        const CVector wi = ideal_mmse(x, s);
        if (wi.norm() == 0.0) continue;
        const std::string where = "seed " + std::to_string(seed) + " bin " + std::to_string(f);
        const CMatrix phx = assemble_covariance(x, std::nullopt).matrix();

        const auto m1 = trivial_mask_from_target(x, s, k);
        const CMatrix phs1 = assemble_covariance_complex(x, m1.mask);
        exact.add(detail::relative_error(estimate_filter_bin({Prefix::inv, Suffix::os}, &phx, &phs1, nullptr, k), wi),
                  where);

        const auto m2 = trivial_mask_ratio(x, wi, k);
        const CMatrix phs2 = assemble_covariance_complex(x, m2.mask);
        os.add(collinearity(estimate_filter_bin({Prefix::inv, Suffix::os}, &phx, &phs2, nullptr, k), wi), where);

        const auto m3 = trivial_mask_inverse_ratio(x, wi, k);
        const CMatrix phn3 = assemble_covariance_complex(x, m3.mask);
        no.add(collinearity(estimate_filter_bin({Prefix::inv, Suffix::no}, &phx, nullptr, &phn3, k), wi), where);

        const RVector mn = detail::random_mask(rng, x.cols(), 0.2, 1.0);
        const CVector ms = m2.mask.cwiseProduct(mn.cast<Complex>());
        const CMatrix phs4 = assemble_covariance_complex(x, ms);
        const CMatrix phn4 = assemble_covariance(x, mn).matrix();
        ns.add(collinearity(estimate_filter_bin({Prefix::inv, Suffix::ns}, &phx, &phs4, &phn4, k), wi), where);
      }
    } catch (const std::exception& e) {
      exact.fail(std::string("seed ") + std::to_string(seed) + ": " + e.what());
    }
  }
  return {exact.done(), os.done(), no.done(), ns.done()};
}

/// Conversion rules between optimal masks of the MaxGEV/MinGEV types.
inline std::vector<PropertyResult> suite_appendix_c(const PropertyOptions& opt) {
  const double tol = 1.0 - 1e-8;
  detail::Collector ns("appendixC", "NS: m_s'=a1 m_s+b1 m_n, m_n'=a2 m_n+b2 m_s", tol);
  detail::Collector os("appendixC", "OS: m_s'=a1 m_s+b1", tol);
  detail::Collector no("appendixC", "NO: m_n'=a2 m_n+b2", tol);
  detail::Collector from_os("appendixC", "NO and NS from OS: m_n'=b2-a2 m_s", tol);
  detail::Collector from_no("appendixC", "OS and NS from NO: m_s'=b1-a1 m_n", tol);
  const Eigen::Index mics = 3, frames = 64;
  for (int i = 0; i < opt.instances; ++i) {
    const std::uint64_t seed = opt.seed + 1000 + static_cast<std::uint64_t>(i);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const CMatrix x = detail::random_observation(rng, mics, frames);
    // m_s + m_n = 1, so the masked covariances add up to Phi_x
    const RVector ms = detail::random_mask(rng, frames, 0.05, 0.95);
    const RVector mn = (1.0 - ms.array()).matrix();
    const std::string where = "instance " + std::to_string(i);

    for (Prefix p : {Prefix::max_gev, Prefix::min_gev}) {
      const auto filt = [&](Suffix s, const RVector* a, const RVector* b) { return detail::gev_filter(p, s, x, a, b); };
      // NS rule with a1 a2 > b1 b2 and both masks kept positive
      {
        // rejection-sample until both masks stay positive and a1 a2 > b1 b2
        // (otherwise the transformed ratio reverses the eigenvalue order)
        bool drawn = false;
        for (int tries = 0; tries < 1000 && !drawn; ++tries) {
          const double a1 = 0.5 + 1.5 * u(rng), a2 = 0.5 + 1.5 * u(rng);
          const double b1 = (u(rng) - 0.3) * a1, b2 = (u(rng) - 0.3) * a2;
          const RVector ms2 = a1 * ms + b1 * mn, mn2 = a2 * mn + b2 * ms;
          if (ms2.minCoeff() <= 0.0 || mn2.minCoeff() <= 0.0 || a1 * a2 <= b1 * b2) continue;
          drawn = true;
          ns.add(collinearity(filt(Suffix::ns, &ms, &mn), filt(Suffix::ns, &ms2, &mn2)), where);
        }
        if (!drawn) ns.fail("no admissible coefficients at " + where);
      }
      {
        const double a1 = 0.2 + 2.0 * u(rng), b1 = -a1 * ms.minCoeff() * u(rng) + u(rng);
        const RVector ms2 = (a1 * ms.array() + b1).matrix();
        if (ms2.minCoeff() > 0.0) os.add(collinearity(filt(Suffix::os, &ms, nullptr), filt(Suffix::os, &ms2, nullptr)), where);
      }
      {
        const double a2 = 0.2 + 2.0 * u(rng), b2 = -a2 * mn.minCoeff() * u(rng) + u(rng);
        const RVector mn2 = (a2 * mn.array() + b2).matrix();
        if (mn2.minCoeff() > 0.0) no.add(collinearity(filt(Suffix::no, nullptr, &mn), filt(Suffix::no, nullptr, &mn2)), where);
      }
      {
        // from OS: the OS-optimal m_s maps to NO and (with m_s kept) to NS
        const double a2 = 0.2 + 2.0 * u(rng);
        const double b2 = a2 * ms.maxCoeff() + 0.05 + u(rng);
        const RVector mn2 = (b2 - a2 * ms.array()).matrix();
        const CVector w_os = filt(Suffix::os, &ms, nullptr);
        from_os.add(collinearity(w_os, filt(Suffix::no, nullptr, &mn2)), where + " (NO)");
        from_os.add(collinearity(w_os, filt(Suffix::ns, &ms, &mn2)), where + " (NS)");
      }
      {
        const double a1 = 0.2 + 2.0 * u(rng);
        const double b1 = a1 * mn.maxCoeff() + 0.05 + u(rng);
        const RVector ms2 = (b1 - a1 * mn.array()).matrix();
        const CVector w_no = filt(Suffix::no, nullptr, &mn);
        from_no.add(collinearity(w_no, filt(Suffix::os, &ms2, nullptr)), where + " (OS)");
        from_no.add(collinearity(w_no, filt(Suffix::ns, &ms2, &mn)), where + " (NS)");
      }
    }
  }
  return {ns.done(), os.done(), no.done(), from_os.done(), from_no.done()};
}

/// MaxGEV-X and MinGEV-X give the same filter for every suffix X.
inline std::vector<PropertyResult> suite_equivalence(const PropertyOptions& opt) {
  std::vector<PropertyResult> out;
  for (Suffix s : {Suffix::ns, Suffix::os, Suffix::no}) {
    const VariationSpec mx{Prefix::max_gev, s}, mn{Prefix::min_gev, s};
    detail::Collector c("equivalence", mx.name() + " vs " + mn.name(), 1.0 - 1e-8);
    int accepted = 0;
    for (int i = 0; accepted < opt.covariance_instances && i < 20 * opt.covariance_instances; ++i) {
      std::mt19937_64 rng(opt.seed + 5000 + static_cast<std::uint64_t>(i));
      const CMatrix x = detail::random_observation(rng, 4, 32);
      const RVector ms = detail::random_mask(rng, 32, 0.0, 1.0);
      const RVector mnm = detail::random_mask(rng, 32, 0.0, 1.0);
      const CMatrix phx = assemble_covariance(x, std::nullopt).matrix();
      const CMatrix phs = assemble_covariance(x, ms).matrix();
      const CMatrix phn = assemble_covariance(x, mnm).matrix();
      // simple extreme eigenvalue: skip instances with a relative gap below 1e-6
      const CMatrix* a = s == Suffix::no ? &phx : &phs;
      const CMatrix* b = s == Suffix::os ? &phx : &phn;
      const auto sys = generalized_eigensystem(HermitianMatrix(*a), HermitianMatrix(*b));
      const double span = sys.values.maxCoeff() - sys.values.minCoeff();
      if (sys.extreme_gap(Extreme::max) < 1e-6 * span || sys.extreme_gap(Extreme::min) < 1e-6 * span) continue;
      ++accepted;
      c.add(collinearity(estimate_filter_bin(mx, &phx, &phs, &phn, 0), estimate_filter_bin(mn, &phx, &phs, &phn, 0)),
            "instance " + std::to_string(i));
    }
    out.push_back(c.done());
  }
  return out;
}

inline constexpr double kGradientCheckStep = 1e-4;

/// Builds the loss of one bin's full pipeline from raw slot values.
inline ad::PipelineBuilder bin_pipeline(const BinData& d, const PipelineSpec& ps, const CVector* fixed_w,
                                        Eigen::Index k) {
  return [d, ps, fixed_w, k](ad::Graph& g, const std::vector<RMatrix>& p) {
    return build_bin_graph(g, d, ps, p, fixed_w, 1.0 / d.s_ref.squaredNorm(), k).loss;
  };
}

/// Reverse-mode gradients against central differences for every variation's
/// pipeline, plus scaling-mask and joint pipelines.
inline std::vector<PropertyResult> suite_gradients(const PropertyOptions& opt) {
  const Scenario sc = detail::seeded_scene(opt.seed, 0.25);
  const std::vector<Eigen::Index> bins{5, 20, 47};
  std::vector<PropertyResult> out;
  auto run = [&](const std::string& name, const PipelineSpec& ps, const CVector* fixed, Eigen::Index f,
                 detail::Collector& c, std::mt19937_64& rng) {
    const BinData d = make_bin_data(sc, f);
    std::vector<RMatrix> params(kSlotCount);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto role : roles_of(ps)) {
      const auto con = constraint_of(ps, role);
      RMatrix l(1, d.x.cols());
      for (Eigen::Index t = 0; t < l.size(); ++t) l(t) = (con == MaskConstraint::ratio ? 0.0 : 1.0) + g(rng);
      params[slot_of(role, 0)] = l;
      params[slot_of(role, 1)] = RMatrix::Constant(1, 1, 1.0 + 0.2 * g(rng));
      params[slot_of(role, 2)] = RMatrix::Constant(1, 1, (con == MaskConstraint::ratio ? 0.0 : 2.0) + 0.2 * g(rng));
    }
    // drop slots the graph will not register so the parameter count is exact
    std::vector<RMatrix> used(kSlotCount);
    {
      ad::Graph probe;
      build_bin_graph(probe, d, ps, params, fixed, 1.0, sc.ref_index());
      for (std::size_t i = 0; i < probe.size(); ++i) {
        const auto& node = probe.node(ad::NodeId{i});
        if (node.kind == ad::OpKind::parameter) used[static_cast<std::size_t>(node.slot)] = params[static_cast<std::size_t>(node.slot)];
      }
    }
    // below ~1e-5 the central difference is dominated by rounding (error ~ 1/h)
    const auto report = ad::check_gradients(bin_pipeline(d, ps, fixed, sc.ref_index()), used, kGradientCheckStep);
    if (report.flagged) return;
    c.add(report.max_relative_error, name + " bin " + std::to_string(f));
  };

  std::mt19937_64 rng(opt.seed + 9000);
  for (const auto& v : all_variations()) {
    detail::Collector c("gradients", v.name() + " (ideal scaling)", 1e-4, true);
    PipelineSpec ps;
    ps.variation = v;
    ps.bn_enabled = default_config(v).bn_enabled;
    for (auto f : bins) run(v.name(), ps, nullptr, f, c, rng);
    out.push_back(c.done());
  }
  {
    detail::Collector c("gradients", "joint INV-NS + L1-MN scaling", 1e-4, true);
    PipelineSpec ps;
    ps.variation = VariationSpec{Prefix::inv, Suffix::ns};
    ps.scaling = ScalingMethod::mask_based;
    for (auto f : bins) run("joint", ps, nullptr, f, c, rng);
    out.push_back(c.done());
  }
  const auto ideal = ideal_mmse(sc);
  for (auto con : {MaskConstraint::l1_mn, MaskConstraint::l2_mn, MaskConstraint::non_negative, MaskConstraint::ratio}) {
    detail::Collector c("gradients", "scaling mask " + to_string(con), 1e-4, true);
    PipelineSpec ps;
    ps.scaling = ScalingMethod::mask_based;
    ps.scaling_constraint = con;
    for (auto f : bins) run(to_string(con), ps, &ideal[static_cast<std::size_t>(f)], f, c, rng);
    out.push_back(c.done());
  }
  return out;
}

/// With the filter fixed: loss(IS) <= loss(optimized mask-based) <= loss(MDP).
inline std::vector<PropertyResult> suite_scaling_nesting(const PropertyOptions& opt) {
  detail::Collector lower("scaling-nesting", "loss(IS) <= loss(mask-based)", 0.0, true);
  detail::Collector upper("scaling-nesting", "loss(mask-based) <= loss(MDP)", 0.0, true);
  for (int i = 0; i < 3; ++i) {
    const std::uint64_t seed = opt.seed + 200 + static_cast<std::uint64_t>(i);
    const Scenario sc = detail::seeded_scene(seed, opt.scene_duration);
    const FilterBank fb = ideal_mmse_bank(sc);
    PipelineSpec is_spec;
    is_spec.scaling = ScalingMethod::ideal;
    PipelineSpec mdp_spec;
    mdp_spec.scaling = ScalingMethod::mdp;
    OptimizationConfig one;
    one.iterations = 1;
    one.step_size = 1e-12;
    one.track_sdr = false;
    const double l_is = optimize(sc, is_spec, &fb, one).loss_curve.back();
    const double l_mdp = optimize(sc, mdp_spec, &fb, one).loss_curve.back();
    for (auto con : {MaskConstraint::l1_mn, MaskConstraint::ratio}) {
      OptimizationConfig cfg;
      cfg.iterations = 100;
      cfg.track_sdr = false;
      const auto rec = optimize_scaling_mask(sc, fb, con, cfg);
      const double l_mb = *std::min_element(rec.loss_curve.begin(), rec.loss_curve.end());
      const std::string where = "seed " + std::to_string(seed) + " " + to_string(con);
      lower.add((l_is - l_mb) / l_is, where);
      if (con == MaskConstraint::l1_mn) upper.add((l_mb - l_mdp) / l_mdp, where);
    }
  }
  return {lower.done(), upper.done()};
}

/// Runs one named suite, or every suite for "all".
inline PropertyReport run_properties(const std::string& suite, const PropertyOptions& opt = {}) {
  PropertyReport rep;
  auto take = [&](std::vector<PropertyResult> r) { rep.results.insert(rep.results.end(), r.begin(), r.end()); };
  const bool all = suite == "all";
  bool known = all;
  if (all || suite == "appendixB") { take(suite_appendix_b(opt)); known = true; }
  if (all || suite == "appendixC") { take(suite_appendix_c(opt)); known = true; }
  if (all || suite == "equivalence") { take(suite_equivalence(opt)); known = true; }
  if (all || suite == "gradients") { take(suite_gradients(opt)); known = true; }
  if (all || suite == "scaling-nesting") { take(suite_scaling_nesting(opt)); known = true; }
  if (!known) throw std::invalid_argument("unknown property suite: " + suite);
  return rep;
}

inline std::string format_report(const PropertyReport& rep) {
  std::ostringstream os;
  for (const auto& r : rep.results)
    os << (r.passed ? "PASS" : "FAIL") << "  [" << r.suite << "] " << r.name << "  worst=" << r.measured
       << " tol=" << r.tolerance << "  (" << r.detail << ")\n";
  os << rep.results.size() - rep.failures() << "/" << rep.results.size() << " properties passed\n";
  return os.str();
}

}  // namespace maskbf

#endif  // MASKBF_PROPERTIES_HPP
