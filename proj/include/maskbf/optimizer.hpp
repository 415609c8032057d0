// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Per-utterance optimal-mask search.
//
// The whole pipeline (mask activation, covariance assembly, filter, scaling,
// squared error) factorizes over frequency, so each iteration builds one small
// graph per bin, runs it forward and backward, and concatenates gradients
// back into the frames x freqs logit buffers.

#ifndef MASKBF_OPTIMIZER_HPP
#define MASKBF_OPTIMIZER_HPP

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "maskbf/beamformers.hpp"
#include "maskbf/metrics.hpp"
#include "maskbf/scaling.hpp"

namespace maskbf {

enum class OptimizerKind { adam, plain };

struct OptimizationConfig {
  int iterations = 500;
  bool bn_enabled = true;
  double step_size = 0.05;
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  // Updates stop once the normalized loss reaches this. At an exact optimum
  // Adam rescales rounding-level gradients to full-size steps.
  double loss_floor = 1e-14;
  // Geometric step-size decay: the last update uses step_size * this.
  double final_step_ratio = 1.0;
  bool track_sdr = true;    // time-domain SDR after every iteration
};

/// Protocol defaults: 1000 iterations for ISEV-OS, BN off for the GEV
/// variations whose pencil involves the observation covariance.
/// MaxGEV-OS/NO share their filters with MinGEV-OS/NO and stall with BN in
/// the same way.
inline OptimizationConfig default_config(const VariationSpec& v) {
  OptimizationConfig c;
  if (v.prefix == Prefix::isev && v.suffix == Suffix::os) c.iterations = 1000;
  if ((v.prefix == Prefix::min_gev || v.prefix == Prefix::max_gev) && v.suffix != Suffix::ns) c.bn_enabled = false;
  return c;
}

/// What the differentiable pipeline contains: either a variation driven by
/// its masks or a fixed filter, followed by a scaling method.
struct PipelineSpec {
  std::optional<VariationSpec> variation;  // empty: use the fixed filter
  MaskConstraint filter_constraint = MaskConstraint::ratio;
  ScalingMethod scaling = ScalingMethod::ideal;  // ideal, mdp or mask_based
  MaskConstraint scaling_constraint = MaskConstraint::l1_mn;
  bool bn_enabled = true;
};

/// Constant per-bin inputs.
struct BinData {
  CMatrix x;       // mics x frames
  CMatrix phi_x;   // <x x^H>
  CMatrix s_ref;   // 1 x frames, target at the reference mic
  CMatrix x_ref;   // 1 x frames, observation at the reference mic
  double x_ref_energy = 0.0;
};

inline BinData make_bin_data(const Scenario& sc, Eigen::Index f) {
  BinData d;
  d.x = sc.observation.bin(f);
  d.phi_x = HermitianMatrix::symmetrized(d.x * d.x.adjoint() / static_cast<double>(d.x.cols())).matrix();
  const auto k = sc.ref_index();
  d.s_ref = sc.target.bin(f).row(k);
  d.x_ref = d.x.row(k);
  d.x_ref_energy = d.x_ref.squaredNorm();
  return d;
}

/// Parameter slots of one bin's graph: four per mask role (logits, BN scale,
/// BN shift, imaginary logits).
inline std::size_t slot_of(MaskRole r, int part) { return static_cast<std::size_t>(r) * 4 + part; }
inline constexpr std::size_t kSlotCount = 12;

struct BinNodes {
  ad::NodeId loss, z, w, gamma;
  bool zero_energy = false;
};

/// Builds the loss graph of one bin. `params` is indexed by slot_of; slots of
/// masks the pipeline does not use are ignored.
inline BinNodes build_bin_graph(ad::Graph& g, const BinData& d, const PipelineSpec& ps,
                                const std::vector<RMatrix>& params, const CVector* fixed_w, double weight,
                                Eigen::Index k) {
  auto mask = [&](MaskRole r, MaskConstraint c) {
    const auto l = g.parameter(slot_of(r, 0), params[slot_of(r, 0)]);
    std::optional<std::pair<ad::NodeId, ad::NodeId>> bn;
    if (ps.bn_enabled && c != MaskConstraint::complex)
      bn = std::make_pair(g.parameter(slot_of(r, 1), params[slot_of(r, 1)]),
                          g.parameter(slot_of(r, 2), params[slot_of(r, 2)]));
    auto m = activate_node(g, l, bn, c);
    if (c == MaskConstraint::complex) {
      const auto im = g.parameter(slot_of(r, 3), params[slot_of(r, 3)]);
      m = ad::add(g, m, ad::scale(g, im, Complex(0.0, 1.0)));
    }
    return m;
  };

  ad::NodeId w;
  if (ps.variation) {
    const auto& v = *ps.variation;
    if (ps.filter_constraint == MaskConstraint::complex && v.prefix != Prefix::inv)
      throw UnsupportedOp("complex filter masks only drive INV variations");
    const auto phx = g.constant(d.phi_x);
    std::optional<ad::NodeId> phs, phn;
    if (v.uses_target_mask())
      phs = ad::covariance(g, mask(MaskRole::target, ps.filter_constraint), d.x, ad::CovarianceNorm::plain);
    if (v.uses_noise_mask())
      phn = ad::covariance(g, mask(MaskRole::noise, ps.filter_constraint), d.x, ad::CovarianceNorm::plain);
    ad::NodeId first{}, second{};
    switch (v.suffix) {
      case Suffix::ns: first = *phn; second = *phs; break;
      case Suffix::os: first = phx; second = *phs; break;
      case Suffix::no: first = *phn; second = phx; break;
    }
    switch (v.prefix) {
      case Prefix::max_gev: w = ad::gev(g, second, first, Extreme::max); break;
      case Prefix::min_gev: w = ad::gev(g, first, second, Extreme::min); break;
      case Prefix::inv: w = ad::solve(g, first, ad::select_column(g, second, k)); break;
      case Prefix::isev: w = ad::solve(g, first, ad::sev(g, second)); break;
    }
  } else {
    if (!fixed_w) throw std::invalid_argument("pipeline without a variation needs a fixed filter");
    w = g.constant(*fixed_w);
  }

  const auto y = ad::inner_product(g, w, d.x);
  const auto s = g.constant(d.s_ref);
  ad::NodeId p{};
  switch (ps.scaling) {
    case ScalingMethod::ideal: p = s; break;
    case ScalingMethod::mdp: p = g.constant(d.x_ref); break;
    case ScalingMethod::mask_based: p = ad::mul(g, mask(MaskRole::scaling, ps.scaling_constraint), g.constant(d.x_ref)); break;
    default: throw std::invalid_argument("scaling " + to_string(ps.scaling) + " cannot be optimized through");
  }
  BinNodes out;
  out.w = w;
  const double ey = g.value(y).squaredNorm();
  if (ey < kZeroEnergyRatio * d.x_ref_energy || !(ey > 0.0)) {
    out.gamma = g.constant(CMatrix::Zero(1, 1));
    out.zero_energy = true;
    g.flags().zero_energy = true;
  } else {
    out.gamma = ad::div(g, ad::sum(g, ad::mul(g, p, ad::conj(g, y))), ad::sum(g, ad::abs2(g, y)));
  }
  out.z = ad::mul(g, out.gamma, y);
  out.loss = ad::mse(g, out.z, s, weight);
  return out;
}

/// Which mask roles a pipeline optimizes.
inline std::vector<MaskRole> roles_of(const PipelineSpec& ps) {
  std::vector<MaskRole> r;
  if (ps.variation) {
    if (ps.variation->uses_target_mask()) r.push_back(MaskRole::target);
    if (ps.variation->uses_noise_mask()) r.push_back(MaskRole::noise);
  }
  if (ps.scaling == ScalingMethod::mask_based) r.push_back(MaskRole::scaling);
  return r;
}

inline MaskConstraint constraint_of(const PipelineSpec& ps, MaskRole r) {
  return r == MaskRole::scaling ? ps.scaling_constraint : ps.filter_constraint;
}

/// Slot vector of bin f from full-size buffers.
inline std::vector<RMatrix> bin_params(const MaskParameterSet& set, Eigen::Index f) {
  std::vector<RMatrix> p(kSlotCount);
  for (const auto& [role, b] : set.buffers) {
    p[slot_of(role, 0)] = b.logits.col(f).transpose();
    p[slot_of(role, 1)] = RMatrix::Constant(1, 1, b.bn_scale(f));
    p[slot_of(role, 2)] = RMatrix::Constant(1, 1, b.bn_shift(f));
    if (b.constraint == MaskConstraint::complex) p[slot_of(role, 3)] = b.imag_logits.col(f).transpose();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Output and SDR helpers

/// Reference-mic time-domain target.
inline RVector reference_wave(const Scenario& sc) { return sc.target_wave.samples.row(sc.ref_index()).transpose(); }

/// iSTFT of a frames x freqs output spectrogram.
inline RVector synthesize(const Scenario& sc, const CMatrix& z) {
  const auto spec = MultichannelSpectrogram::from_channel(z, sc.observation.config(), sc.observation.num_samples(),
                                                          sc.observation.sample_rate());
  return istft(spec).samples.row(0).transpose();
}

inline SdrResult output_sdr(const Scenario& sc, const CMatrix& z) { return sdr(reference_wave(sc), synthesize(sc, z)); }

/// z = gamma w^H x for every bin.
inline CMatrix apply_filters(const Scenario& sc, const FilterBank& fb) {
  CMatrix z(sc.observation.frames(), sc.observation.freqs());
  for (Eigen::Index f = 0; f < sc.observation.freqs(); ++f) {
    const auto i = static_cast<std::size_t>(f);
    z.col(f) = (fb.gamma[i] * (fb.w[i].adjoint() * sc.observation.bin(f))).transpose();
  }
  return z;
}

/// Ideal MMSE filters with ideal scaling, the upper bound of every variation.
inline FilterBank ideal_mmse_bank(const Scenario& sc) {
  FilterBank fb(static_cast<std::size_t>(sc.observation.freqs()));
  const auto w = ideal_mmse(sc);
  const auto k = sc.ref_index();
  for (std::size_t f = 0; f < fb.freqs(); ++f) {
    fb.w[f] = w[f];
    const CMatrix x = sc.observation.bin(static_cast<Eigen::Index>(f));
    const CVector y = (w[f].adjoint() * x).transpose();
    const CVector s = sc.target.bin(static_cast<Eigen::Index>(f)).row(k).transpose();
    fb.gamma[f] = y.squaredNorm() > 0.0 ? scale_ideal(y, s) : Complex(0.0);
  }
  return fb;
}

inline SdrResult ideal_mmse_sdr(const Scenario& sc) { return output_sdr(sc, apply_filters(sc, ideal_mmse_bank(sc))); }

/// Unprocessed reference microphone.
inline SdrResult reference_mic_sdr(const Scenario& sc) {
  return output_sdr(sc, sc.observation.channel(sc.ref_index()));
}

// ---------------------------------------------------------------------------
// Optimization

struct RunRecord {
  std::string variation;   // variation name, or "fixed"
  std::string constraint;  // constraint of the optimized masks
  std::string scaling;
  int iterations = 0;
  bool bn_enabled = false;
  std::vector<double> loss_curve;  // objective after each update
  std::vector<double> sdr_curve;   // SDR after each update, when tracked
  double initial_loss = 0.0;
  double initial_sdr_db = 0.0;
  double sdr_db = 0.0;
  std::vector<std::string> warnings;
  bool aborted = false;
  MaskParameterSet parameters;
  std::map<MaskRole, RMatrix> masks;
  FilterBank filters;
  CMatrix output;  // frames x freqs
};

namespace detail {

struct Evaluation {
  double loss = 0.0;
  std::vector<std::vector<RMatrix>> grads;  // per bin, per slot (empty when absent)
  CMatrix z;
  FilterBank filters;
  std::vector<std::string> errors;
  int near_degenerate = 0;
  int zero_energy = 0;
};

class RunContext {
 public:
  RunContext(const Scenario& sc, PipelineSpec ps, const FilterBank* fixed)
      : sc_(sc), ps_(std::move(ps)), fixed_(fixed) {
    const auto freqs = sc.observation.freqs();
    bins_.reserve(static_cast<std::size_t>(freqs));
    double energy = 0.0;
    for (Eigen::Index f = 0; f < freqs; ++f) {
      bins_.push_back(make_bin_data(sc, f));
      energy += bins_.back().s_ref.squaredNorm();
    }
    if (!(energy > 0.0)) throw ZeroReference("target has no energy at the reference mic");
    weight_ = 1.0 / energy;
  }

  const PipelineSpec& pipeline() const { return ps_; }
  const Scenario& scenario() const { return sc_; }

  Evaluation evaluate(const MaskParameterSet& set, bool gradients) const {
    const auto freqs = static_cast<Eigen::Index>(bins_.size());
    Evaluation ev;
    ev.z = CMatrix::Zero(sc_.observation.frames(), freqs);
    ev.filters = FilterBank(bins_.size());
    if (gradients) ev.grads.resize(bins_.size());
    for (Eigen::Index f = 0; f < freqs; ++f) {
      const auto i = static_cast<std::size_t>(f);
      const auto& d = bins_[i];
      const auto params = bin_params(set, f);
      try {
        ad::Graph g;
        const CVector* fw = fixed_ ? &fixed_->w[i] : nullptr;
        const auto nodes = build_bin_graph(g, d, ps_, params, fw, weight_, sc_.ref_index());
        ev.loss += g.scalar(nodes.loss).real();
        ev.z.col(f) = g.value(nodes.z).transpose();
        ev.filters.w[i] = g.value(nodes.w);
        ev.filters.gamma[i] = g.scalar(nodes.gamma);
        if (g.flags().near_degenerate) ++ev.near_degenerate;
        if (nodes.zero_energy) ++ev.zero_energy;
        if (gradients) {
          auto gm = ad::backward(g, nodes.loss);
          auto& out = ev.grads[i];
          out.resize(kSlotCount);
          for (auto& [slot, grad] : gm) out[slot] = std::move(grad);
        }
      } catch (const std::exception& e) {
        ev.errors.push_back("bin " + std::to_string(f) + ": " + e.what());
        ev.loss += weight_ * d.s_ref.squaredNorm();
        ev.filters.w[i] = CVector::Zero(d.x.rows());
        ev.filters.gamma[i] = 0.0;
      }
    }
    return ev;
  }

 private:
  const Scenario& sc_;
  PipelineSpec ps_;
  const FilterBank* fixed_;
  std::vector<BinData> bins_;
  double weight_ = 1.0;
};

// Gradient of the full buffers from per-bin slot gradients.
struct BufferGrad {
  RMatrix logits, imag;
  RVector scale, shift;
};

inline std::map<MaskRole, BufferGrad> gather(const MaskParameterSet& set, const Evaluation& ev) {
  std::map<MaskRole, BufferGrad> out;
  for (const auto& [role, b] : set.buffers) {
    BufferGrad g{RMatrix::Zero(b.logits.rows(), b.logits.cols()), RMatrix::Zero(b.imag_logits.rows(), b.imag_logits.cols()),
                 RVector::Zero(b.bn_scale.size()), RVector::Zero(b.bn_shift.size())};
    for (std::size_t f = 0; f < ev.grads.size(); ++f) {
      const auto& slots = ev.grads[f];
      if (slots.empty()) continue;
      const auto c = static_cast<Eigen::Index>(f);
      if (slots[slot_of(role, 0)].size()) g.logits.col(c) = slots[slot_of(role, 0)].transpose();
      if (slots[slot_of(role, 1)].size()) g.scale(c) = slots[slot_of(role, 1)](0, 0);
      if (slots[slot_of(role, 2)].size()) g.shift(c) = slots[slot_of(role, 2)](0, 0);
      if (slots[slot_of(role, 3)].size()) g.imag.col(c) = slots[slot_of(role, 3)].transpose();
    }
    out.emplace(role, std::move(g));
  }
  return out;
}

// Adam (or plain) state over a flat parameter vector.
class Stepper {
 public:
  explicit Stepper(const OptimizationConfig& cfg) : cfg_(cfg) {}

  void step(Eigen::Ref<Eigen::VectorXd> theta, const Eigen::VectorXd& grad) {
    if (m_.size() == 0) {
      m_ = Eigen::VectorXd::Zero(theta.size());
      v_ = Eigen::VectorXd::Zero(theta.size());
    }
    ++t_;
    double lr = cfg_.step_size;
    if (cfg_.final_step_ratio != 1.0 && cfg_.iterations > 1)
      lr *= std::pow(cfg_.final_step_ratio, double(t_ - 1) / double(cfg_.iterations - 1));
    if (cfg_.kind == OptimizerKind::plain) {
      theta -= lr * grad;
      return;
    }
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    theta.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.adam_epsilon);
  }

 private:
  const OptimizationConfig& cfg_;
  Eigen::VectorXd m_, v_;
  int t_ = 0;
};

// Flattens every optimized buffer into one vector (and back).
inline Eigen::VectorXd flatten(const MaskParameterSet& set) {
  std::vector<double> out;
  for (const auto& [role, b] : set.buffers) {
    out.insert(out.end(), b.logits.data(), b.logits.data() + b.logits.size());
    if (set.bn_enabled && b.constraint != MaskConstraint::complex) {
      out.insert(out.end(), b.bn_scale.data(), b.bn_scale.data() + b.bn_scale.size());
      out.insert(out.end(), b.bn_shift.data(), b.bn_shift.data() + b.bn_shift.size());
    }
    out.insert(out.end(), b.imag_logits.data(), b.imag_logits.data() + b.imag_logits.size());
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

inline Eigen::VectorXd flatten(const MaskParameterSet& set, const std::map<MaskRole, BufferGrad>& g) {
  std::vector<double> out;
  for (const auto& [role, b] : set.buffers) {
    const auto& gr = g.at(role);
    out.insert(out.end(), gr.logits.data(), gr.logits.data() + gr.logits.size());
    if (set.bn_enabled && b.constraint != MaskConstraint::complex) {
      out.insert(out.end(), gr.scale.data(), gr.scale.data() + gr.scale.size());
      out.insert(out.end(), gr.shift.data(), gr.shift.data() + gr.shift.size());
    }
    out.insert(out.end(), gr.imag.data(), gr.imag.data() + gr.imag.size());
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

inline void unflatten(MaskParameterSet& set, const Eigen::VectorXd& v) {
  Eigen::Index pos = 0;
  auto take = [&](double* dst, Eigen::Index n) {
    std::copy(v.data() + pos, v.data() + pos + n, dst);
    pos += n;
  };
  for (auto& [role, b] : set.buffers) {
    take(b.logits.data(), b.logits.size());
    if (set.bn_enabled && b.constraint != MaskConstraint::complex) {
      take(b.bn_scale.data(), b.bn_scale.size());
      take(b.bn_shift.data(), b.bn_shift.size());
    }
    take(b.imag_logits.data(), b.imag_logits.size());
  }
}

}  // namespace detail

/// Neutral starting buffers for a pipeline.
inline MaskParameterSet initial_parameters(const Scenario& sc, const PipelineSpec& ps) {
  MaskParameterSet set;
  set.bn_enabled = ps.bn_enabled;
  for (auto r : roles_of(ps))
    set.buffers.emplace(r, MaskBuffer::neutral(r, constraint_of(ps, r), sc.observation.frames(), sc.observation.freqs()));
  return set;
}

/// Runs the optimization loop. Iteration i applies one update and then
/// re-evaluates, so loss_curve[i] is the objective at the parameters after
/// i + 1 updates and the last entry is the objective at the returned masks.
inline RunRecord optimize(const Scenario& sc, const PipelineSpec& ps, const FilterBank* fixed,
                          const OptimizationConfig& cfg, std::optional<MaskParameterSet> start = std::nullopt) {
  if (cfg.iterations < 1) throw std::invalid_argument("iterations must be at least 1");
  if (!(cfg.step_size > 0.0)) throw std::invalid_argument("step size must be positive");
  if (!(cfg.final_step_ratio > 0.0)) throw std::invalid_argument("final step ratio must be positive");
  if (ps.scaling != ScalingMethod::ideal && ps.scaling != ScalingMethod::mdp &&
      ps.scaling != ScalingMethod::mask_based)
    throw std::invalid_argument("scaling " + to_string(ps.scaling) + " cannot be optimized through");
  if (ps.variation && ps.filter_constraint == MaskConstraint::complex && ps.variation->prefix != Prefix::inv)
    throw UnsupportedOp("complex filter masks only drive INV variations");
  PipelineSpec spec = ps;
  spec.bn_enabled = cfg.bn_enabled;
  const detail::RunContext ctx(sc, spec, fixed);

  RunRecord rec;
  rec.variation = spec.variation ? spec.variation->name() : "fixed";
  const auto roles = roles_of(spec);
  rec.constraint = roles.empty() ? "none" : to_string(constraint_of(spec, roles.front()));
  rec.scaling = spec.scaling == ScalingMethod::mask_based ? "mask-based(" + to_string(spec.scaling_constraint) + ")"
                                                          : to_string(spec.scaling);
  rec.bn_enabled = spec.bn_enabled;
  rec.parameters = start ? *start : initial_parameters(sc, spec);
  rec.parameters.bn_enabled = spec.bn_enabled;

  int error_events = 0, clip_events = 0, degenerate_events = 0, zero_energy_events = 0;
  auto absorb = [&](const detail::Evaluation& ev) {
    if (!ev.errors.empty() && error_events++ < 5) rec.warnings.push_back(ev.errors.front());
    degenerate_events += ev.near_degenerate > 0;
    zero_energy_events += ev.zero_energy > 0;
  };

  detail::Evaluation ev = ctx.evaluate(rec.parameters, true);
  absorb(ev);
  rec.initial_loss = ev.loss;
  rec.initial_sdr_db = output_sdr(sc, ev.z).sdr_db;
  if (!std::isfinite(ev.loss)) {
    rec.aborted = true;
    rec.warnings.push_back("non-finite loss at the initial point");
  }

  detail::Stepper stepper(cfg);
  Eigen::VectorXd theta = detail::flatten(rec.parameters);
  for (int it = 0; it < cfg.iterations && !rec.aborted; ++it) {
    if (ev.loss > cfg.loss_floor) {
      Eigen::VectorXd grad = detail::flatten(rec.parameters, detail::gather(rec.parameters, ev));
      if (!grad.allFinite()) {
        rec.aborted = true;
        rec.warnings.push_back("non-finite gradient at iteration " + std::to_string(it + 1));
        break;
      }
      const double norm = grad.norm();
      if (norm > cfg.clip_norm) {
        grad *= cfg.clip_norm / norm;
        ++clip_events;
      }
      stepper.step(theta, grad);
      detail::unflatten(rec.parameters, theta);
      ev = ctx.evaluate(rec.parameters, true);
      absorb(ev);
    }
    if (!std::isfinite(ev.loss)) {
      rec.aborted = true;
      rec.warnings.push_back("non-finite loss at iteration " + std::to_string(it + 1));
      break;
    }
    rec.loss_curve.push_back(ev.loss);
    if (cfg.track_sdr || it + 1 == cfg.iterations) rec.sdr_curve.push_back(output_sdr(sc, ev.z).sdr_db);
  }
  if (clip_events) rec.warnings.push_back("gradient clipped in " + std::to_string(clip_events) + " iterations");
  if (degenerate_events)
    rec.warnings.push_back("near-degenerate eigengap in " + std::to_string(degenerate_events) + " evaluations");
  if (zero_energy_events)
    rec.warnings.push_back("zero-energy output in " + std::to_string(zero_energy_events) + " evaluations");
  if (error_events > 5) rec.warnings.push_back(std::to_string(error_events) + " evaluations had bin errors");

  rec.iterations = static_cast<int>(rec.loss_curve.size());
  rec.output = ev.z;
  rec.filters = ev.filters;
  rec.sdr_db = output_sdr(sc, ev.z).sdr_db;
  if (!rec.sdr_curve.empty()) rec.sdr_curve.back() = rec.sdr_db;
  for (const auto& [role, b] : rec.parameters.buffers) rec.masks.emplace(role, activate(b, rec.parameters.bn_enabled));
  return rec;
}

/// Filter-estimation masks only; scaling is ideal or MDP.
inline RunRecord optimize_filter_masks(const Scenario& sc, const VariationSpec& v, const ScalingSpec& scaling,
                                       const OptimizationConfig& cfg,
                                       MaskConstraint constraint = MaskConstraint::ratio) {
  if (scaling.method == ScalingMethod::mask_based)
    throw std::invalid_argument("mask-based scaling is optimized by optimize_joint");
  PipelineSpec ps;
  ps.variation = v;
  ps.filter_constraint = constraint;
  ps.scaling = scaling.method;
  return optimize(sc, ps, nullptr, cfg);
}

/// Scaling mask only, with the filter held fixed.
inline RunRecord optimize_scaling_mask(const Scenario& sc, const FilterBank& fixed, MaskConstraint constraint,
                                       const OptimizationConfig& cfg) {
  if (fixed.freqs() != static_cast<std::size_t>(sc.observation.freqs()))
    throw DimensionMismatch("filter bank has " + std::to_string(fixed.freqs()) + " bins");
  PipelineSpec ps;
  ps.scaling = ScalingMethod::mask_based;
  ps.scaling_constraint = constraint;
  return optimize(sc, ps, &fixed, cfg);
}

/// Filter masks and scaling mask together.
inline RunRecord optimize_joint(const Scenario& sc, const VariationSpec& v, MaskConstraint constraint,
                                const OptimizationConfig& cfg,
                                MaskConstraint filter_constraint = MaskConstraint::ratio) {
  PipelineSpec ps;
  ps.variation = v;
  ps.filter_constraint = filter_constraint;
  ps.scaling = ScalingMethod::mask_based;
  ps.scaling_constraint = constraint;
  return optimize(sc, ps, nullptr, cfg);
}

}  // namespace maskbf

#endif  // MASKBF_OPTIMIZER_HPP
