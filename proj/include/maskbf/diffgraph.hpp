// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Reverse-mode differentiation over small dense complex tensors.
//
// Every node value is stored as a complex matrix; nodes flagged real carry a
// zero imaginary part. The adjoint stored for a node z is the gradient of the
// real loss L in the sense
//
//     dL = Re sum_ij conj(G_ij) dz_ij,     G = dL/dRe(z) + i dL/dIm(z),
//
// so for real nodes G is the ordinary gradient. Adjoints accumulated into real
// nodes are projected onto their real part.

#ifndef MASKBF_DIFFGRAPH_HPP
#define MASKBF_DIFFGRAPH_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "maskbf/linalg.hpp"

namespace maskbf::ad {

enum class OpKind {
  parameter,
  constant,
  covariance_assembly,
  gev,
  sev,
  solve,
  inner_product,
  mean,
  mask_activation,
  batch_norm,
  mse_loss,
  arithmetic,
};

struct NodeId {
  std::size_t index = 0;
};

class Graph;

/// Accumulates adjoints during a backward sweep.
class Adjoints {
 public:
  explicit Adjoints(const Graph& graph);

  void accumulate(NodeId id, const CMatrix& g);
  const CMatrix* get(NodeId id) const {
    return has_[id.index] ? &grads_[id.index] : nullptr;
  }

 private:
  const Graph& graph_;
  std::vector<CMatrix> grads_;
  std::vector<bool> has_;
};

using BackwardFn = std::function<void(const CMatrix& grad, Adjoints& adj)>;

/// Numerical events raised while building a graph.
struct GraphFlags {
  bool near_degenerate = false;  // an eigen node's gap fell below 1e-6 ||A||_F
  bool gap_clamped = false;      // an eigengap denominator hit the 1e-10 clamp
  bool zero_energy = false;      // a scaling node met a vanishing output
};

/// A dynamically built, acyclic computation graph. Nodes are appended in
/// topological order: a node may only reference nodes created before it.
class Graph {
 public:
  struct Node {
    OpKind kind;
    std::vector<NodeId> parents;
    CMatrix value;
    bool real = false;
    BackwardFn backward;
    std::ptrdiff_t slot = -1;  // parameter slot, -1 otherwise
  };

  NodeId parameter(std::size_t slot, const RMatrix& value) {
    Node n{OpKind::parameter, {}, value.cast<Complex>(), true, {}, static_cast<std::ptrdiff_t>(slot)};
    return push(std::move(n));
  }

  NodeId constant(const CMatrix& value) { return push({OpKind::constant, {}, value, false, {}, -1}); }
  NodeId constant_real(const RMatrix& value) {
    return push({OpKind::constant, {}, value.cast<Complex>(), true, {}, -1});
  }

  /// Appends an op node. Parents must already exist.
  NodeId add(OpKind kind, std::vector<NodeId> parents, CMatrix value, bool real, BackwardFn fn) {
    const std::size_t next = nodes_.size();
    for (const auto& p : parents)
      if (p.index >= next) throw GraphCycle("parent " + std::to_string(p.index) + " of node " +
                                            std::to_string(next) + " does not precede it");
    if (real) value = value.real().cast<Complex>();
    return push({kind, std::move(parents), std::move(value), real, std::move(fn), -1});
  }

  const Node& node(NodeId id) const { return nodes_.at(id.index); }
  const CMatrix& value(NodeId id) const { return nodes_.at(id.index).value; }
  RMatrix real_value(NodeId id) const { return nodes_.at(id.index).value.real(); }
  Complex scalar(NodeId id) const { return nodes_.at(id.index).value(0, 0); }
  std::size_t size() const { return nodes_.size(); }

  GraphFlags& flags() { return flags_; }
  const GraphFlags& flags() const { return flags_; }

 private:
  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return NodeId{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  GraphFlags flags_;
};

inline Adjoints::Adjoints(const Graph& graph)
    : graph_(graph), grads_(graph.size()), has_(graph.size(), false) {}

inline void Adjoints::accumulate(NodeId id, const CMatrix& g) {
  const auto& node = graph_.node(id);
  if (g.rows() != node.value.rows() || g.cols() != node.value.cols())
    throw DimensionMismatch("adjoint " + detail::dims(g) + " for node value " +
                            detail::dims(node.value));
  CMatrix contrib = node.real ? CMatrix(g.real().cast<Complex>()) : g;
  if (!has_[id.index]) {
    grads_[id.index] = std::move(contrib);
    has_[id.index] = true;
  } else {
    grads_[id.index] += contrib;
  }
}

/// Gradient of each registered parameter slot.
using GradientMap = std::map<std::size_t, RMatrix>;

/// Sweeps adjoints from a real scalar loss back to every parameter.
inline GradientMap backward(const Graph& graph, NodeId loss) {
  const auto& ln = graph.node(loss);
  if (ln.value.size() != 1 || !ln.real)
    throw DimensionMismatch("loss must be a real scalar, got " + detail::dims(ln.value));
  Adjoints adj(graph);
  adj.accumulate(loss, CMatrix::Ones(1, 1));
  GradientMap out;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    const NodeId id{i};
    const auto& node = graph.node(id);
    for (const auto& p : node.parents)
      if (p.index >= i) throw GraphCycle("node " + std::to_string(i) + " references a later node");
    if (node.kind == OpKind::parameter) {
      const CMatrix* g = adj.get(id);
      RMatrix gr = g ? RMatrix(g->real()) : RMatrix::Zero(node.value.rows(), node.value.cols());
      auto [it, inserted] = out.emplace(static_cast<std::size_t>(node.slot), gr);
      if (!inserted) it->second += gr;
      continue;
    }
    const CMatrix* g = adj.get(id);
    if (!g || node.kind == OpKind::constant) continue;
    if (!node.backward)
      throw UnsupportedOp("node " + std::to_string(i) + " has no registered adjoint");
    node.backward(*g, adj);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic. Binary ops broadcast a 1x1 operand.

namespace detail {

inline CMatrix broadcast(const CMatrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  if (m.size() == 1) return CMatrix::Constant(rows, cols, m(0, 0));
  throw DimensionMismatch("cannot broadcast " + maskbf::detail::dims(m) + " to " +
                          std::to_string(rows) + "x" + std::to_string(cols));
}

// Reduces an adjoint of the broadcast shape back onto the operand shape.
inline CMatrix reduce_to(const CMatrix& g, const CMatrix& like) {
  if (g.rows() == like.rows() && g.cols() == like.cols()) return g;
  return CMatrix::Constant(1, 1, g.sum());
}

inline std::pair<Eigen::Index, Eigen::Index> result_shape(const CMatrix& a, const CMatrix& b) {
  if (a.size() == 1) return {b.rows(), b.cols()};
  return {a.rows(), a.cols()};
}

}  // namespace detail

inline NodeId add(Graph& g, NodeId a, NodeId b) {
  const CMatrix& av = g.value(a);
  const CMatrix& bv = g.value(b);
  auto [r, c] = detail::result_shape(av, bv);
  CMatrix v = detail::broadcast(av, r, c) + detail::broadcast(bv, r, c);
  CMatrix al = av, bl = bv;
  return g.add(OpKind::arithmetic, {a, b}, std::move(v), g.node(a).real && g.node(b).real,
               [a, b, al, bl](const CMatrix& gr, Adjoints& adj) {
                 adj.accumulate(a, detail::reduce_to(gr, al));
                 adj.accumulate(b, detail::reduce_to(gr, bl));
               });
}

inline NodeId sub(Graph& g, NodeId a, NodeId b) {
  const CMatrix& av = g.value(a);
  const CMatrix& bv = g.value(b);
  auto [r, c] = detail::result_shape(av, bv);
  CMatrix v = detail::broadcast(av, r, c) - detail::broadcast(bv, r, c);
  CMatrix al = av, bl = bv;
  return g.add(OpKind::arithmetic, {a, b}, std::move(v), g.node(a).real && g.node(b).real,
               [a, b, al, bl](const CMatrix& gr, Adjoints& adj) {
                 adj.accumulate(a, detail::reduce_to(gr, al));
                 adj.accumulate(b, detail::reduce_to(-gr, bl));
               });
}

/// Elementwise product.
inline NodeId mul(Graph& g, NodeId a, NodeId b) {
  const CMatrix& av = g.value(a);
  const CMatrix& bv = g.value(b);
  auto [r, c] = detail::result_shape(av, bv);
  CMatrix ab = detail::broadcast(av, r, c);
  CMatrix bb = detail::broadcast(bv, r, c);
  CMatrix v = ab.cwiseProduct(bb);
  CMatrix al = av, bl = bv;
  return g.add(OpKind::arithmetic, {a, b}, std::move(v), g.node(a).real && g.node(b).real,
               [a, b, ab, bb, al, bl](const CMatrix& gr, Adjoints& adj) {
                 adj.accumulate(a, detail::reduce_to(gr.cwiseProduct(bb.conjugate()), al));
                 adj.accumulate(b, detail::reduce_to(gr.cwiseProduct(ab.conjugate()), bl));
               });
}

/// Elementwise quotient a / b.
inline NodeId div(Graph& g, NodeId a, NodeId b) {
  const CMatrix& av = g.value(a);
  const CMatrix& bv = g.value(b);
  auto [r, c] = detail::result_shape(av, bv);
  CMatrix bb = detail::broadcast(bv, r, c);
  CMatrix q = detail::broadcast(av, r, c).cwiseQuotient(bb);
  CMatrix al = av, bl = bv;
  return g.add(OpKind::arithmetic, {a, b}, q, g.node(a).real && g.node(b).real,
               [a, b, bb, q, al, bl](const CMatrix& gr, Adjoints& adj) {
                 const CMatrix ga = gr.cwiseQuotient(bb.conjugate());
                 adj.accumulate(a, detail::reduce_to(ga, al));
                 adj.accumulate(b, detail::reduce_to(-ga.cwiseProduct(q.conjugate()), bl));
               });
}

inline NodeId scale(Graph& g, NodeId a, Complex c) {
  CMatrix v = g.value(a) * c;
  const bool real = g.node(a).real && c.imag() == 0.0;
  return g.add(OpKind::arithmetic, {a}, std::move(v), real,
               [a, c](const CMatrix& gr, Adjoints& adj) { adj.accumulate(a, gr * std::conj(c)); });
}

inline NodeId conj(Graph& g, NodeId a) {
  CMatrix v = g.value(a).conjugate();
  return g.add(OpKind::arithmetic, {a}, std::move(v), g.node(a).real,
               [a](const CMatrix& gr, Adjoints& adj) { adj.accumulate(a, gr.conjugate()); });
}

/// |a|^2 elementwise, real valued.
inline NodeId abs2(Graph& g, NodeId a) {
  const CMatrix av = g.value(a);
  CMatrix v = av.cwiseAbs2().cast<Complex>();
  return g.add(OpKind::arithmetic, {a}, std::move(v), true,
               [a, av](const CMatrix& gr, Adjoints& adj) {
                 adj.accumulate(a, 2.0 * gr.real().cast<Complex>().cwiseProduct(av));
               });
}

inline NodeId sum(Graph& g, NodeId a) {
  const CMatrix& av = g.value(a);
  const auto rows = av.rows(), cols = av.cols();
  return g.add(OpKind::arithmetic, {a}, CMatrix::Constant(1, 1, av.sum()), g.node(a).real,
               [a, rows, cols](const CMatrix& gr, Adjoints& adj) {
                 adj.accumulate(a, CMatrix::Constant(rows, cols, gr(0, 0)));
               });
}

inline NodeId mean(Graph& g, NodeId a) {
  const CMatrix& av = g.value(a);
  const auto rows = av.rows(), cols = av.cols();
  const double n = static_cast<double>(av.size());
  return g.add(OpKind::mean, {a}, CMatrix::Constant(1, 1, av.sum() / n), g.node(a).real,
               [a, rows, cols, n](const CMatrix& gr, Adjoints& adj) {
                 adj.accumulate(a, CMatrix::Constant(rows, cols, gr(0, 0) / n));
               });
}

/// Matrix product A B.
inline NodeId matmul(Graph& g, NodeId a, NodeId b) {
  const CMatrix av = g.value(a);
  const CMatrix bv = g.value(b);
  if (av.cols() != bv.rows())
    throw DimensionMismatch("matmul " + maskbf::detail::dims(av) + " by " + maskbf::detail::dims(bv));
  CMatrix v = av * bv;
  return g.add(OpKind::arithmetic, {a, b}, std::move(v), g.node(a).real && g.node(b).real,
               [a, b, av, bv](const CMatrix& gr, Adjoints& adj) {
                 adj.accumulate(a, gr * bv.adjoint());
                 adj.accumulate(b, av.adjoint() * gr);
               });
}

inline NodeId select_column(Graph& g, NodeId a, Eigen::Index k) {
  const CMatrix& av = g.value(a);
  if (k < 0 || k >= av.cols()) throw DimensionMismatch("column " + std::to_string(k) + " out of range");
  const auto rows = av.rows(), cols = av.cols();
  return g.add(OpKind::arithmetic, {a}, av.col(k), g.node(a).real,
               [a, k, rows, cols](const CMatrix& gr, Adjoints& adj) {
                 CMatrix full = CMatrix::Zero(rows, cols);
                 full.col(k) = gr;
                 adj.accumulate(a, full);
               });
}

/// y_t = w^H x_t for a constant N x T observation block X; returns 1 x T.
inline NodeId inner_product(Graph& g, NodeId w, const CMatrix& x) {
  const CMatrix& wv = g.value(w);
  if (wv.cols() != 1 || wv.rows() != x.rows())
    throw DimensionMismatch("filter " + maskbf::detail::dims(wv) + " for observations " +
                            maskbf::detail::dims(x));
  CMatrix y = wv.adjoint() * x;
  return g.add(OpKind::inner_product, {w}, std::move(y), false,
               [w, x](const CMatrix& gr, Adjoints& adj) { adj.accumulate(w, x * gr.adjoint()); });
}

/// weight * sum |a - b|^2, a real scalar.
inline NodeId mse(Graph& g, NodeId a, NodeId b, double weight = 1.0) {
  const CMatrix d = g.value(a) - g.value(b);
  const double v = weight * d.squaredNorm();
  return g.add(OpKind::mse_loss, {a, b}, CMatrix::Constant(1, 1, v), true,
               [a, b, d, weight](const CMatrix& gr, Adjoints& adj) {
                 const CMatrix ga = (2.0 * weight * gr(0, 0).real()) * d;
                 adj.accumulate(a, ga);
                 adj.accumulate(b, -ga);
               });
}

// ---------------------------------------------------------------------------
// Mask activations and batch normalization on real 1 x T rows.

inline NodeId sigmoid(Graph& g, NodeId a) {
  const RMatrix x = g.real_value(a);
  const RMatrix s = x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return g.add(OpKind::mask_activation, {a}, s.cast<Complex>(), true,
               [a, s](const CMatrix& gr, Adjoints& adj) {
                 const RMatrix ds = s.cwiseProduct((1.0 - s.array()).matrix());
                 adj.accumulate(a, gr.real().cwiseProduct(ds).cast<Complex>());
               });
}

inline NodeId abs(Graph& g, NodeId a) {
  const RMatrix x = g.real_value(a);
  const RMatrix sgn = x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  return g.add(OpKind::mask_activation, {a}, x.cwiseAbs().cast<Complex>(), true,
               [a, sgn](const CMatrix& gr, Adjoints& adj) {
                 adj.accumulate(a, gr.real().cwiseProduct(sgn).cast<Complex>());
               });
}

/// m / mean(m): forces a unit temporal mean.
inline NodeId l1_normalize(Graph& g, NodeId a) {
  const RMatrix m = g.real_value(a);
  const double n = static_cast<double>(m.size());
  const double mu = m.sum() / n;
  if (!(std::abs(mu) > 0.0)) throw ZeroMaskSum("l1 normalization of an all-zero mask");
  const RMatrix out = m / mu;
  return g.add(OpKind::mask_activation, {a}, out.cast<Complex>(), true,
               [a, out, mu, n](const CMatrix& gr, Adjoints& adj) {
                 const RMatrix gv = gr.real();
                 const double proj = gv.cwiseProduct(out).sum() / n;
                 adj.accumulate(a, ((gv.array() - proj) / mu).matrix().cast<Complex>());
               });
}

/// m / sqrt(mean(m^2)): forces a unit root-mean-square.
inline NodeId l2_normalize(Graph& g, NodeId a) {
  const RMatrix m = g.real_value(a);
  const double n = static_cast<double>(m.size());
  const double rms = std::sqrt(m.squaredNorm() / n);
  if (!(rms > 0.0)) throw ZeroMaskSum("l2 normalization of an all-zero mask");
  const RMatrix out = m / rms;
  return g.add(OpKind::mask_activation, {a}, out.cast<Complex>(), true,
               [a, out, rms, n](const CMatrix& gr, Adjoints& adj) {
                 const RMatrix gv = gr.real();
                 const double proj = gv.cwiseProduct(out).sum() / n;
                 adj.accumulate(a, ((gv - proj * out) / rms).cast<Complex>());
               });
}

inline constexpr double kBatchNormEpsilon = 1e-5;

/// Normalizes a 1 x T row over its frames, then applies scale * xhat + shift.
/// Scale and shift are 1 x 1 nodes. A single-frame row passes through.
inline NodeId batch_norm(Graph& g, NodeId x, NodeId scale_node, NodeId shift_node) {
  const RMatrix xv = g.real_value(x);
  const auto n = xv.size();
  if (n < 2) {
    return g.add(OpKind::batch_norm, {x}, xv.cast<Complex>(), true,
                 [x](const CMatrix& gr, Adjoints& adj) { adj.accumulate(x, gr); });
  }
  const double mu = xv.mean();
  const double var = (xv.array() - mu).square().mean();
  const double sigma = std::sqrt(var + kBatchNormEpsilon);
  const RMatrix xhat = ((xv.array() - mu) / sigma).matrix();
  const double gamma = g.scalar(scale_node).real();
  const double beta = g.scalar(shift_node).real();
  const RMatrix y = ((gamma * xhat.array()) + beta).matrix();
  return g.add(OpKind::batch_norm, {x, scale_node, shift_node}, y.cast<Complex>(), true,
               [x, scale_node, shift_node, xhat, sigma, gamma](const CMatrix& gr, Adjoints& adj) {
                 const RMatrix gy = gr.real();
                 adj.accumulate(scale_node, CMatrix::Constant(1, 1, gy.cwiseProduct(xhat).sum()));
                 adj.accumulate(shift_node, CMatrix::Constant(1, 1, gy.sum()));
                 const RMatrix gh = gamma * gy;
                 const double m1 = gh.mean();
                 const double m2 = gh.cwiseProduct(xhat).mean();
                 const RMatrix gx = ((gh.array() - m1 - xhat.array() * m2) / sigma).matrix();
                 adj.accumulate(x, gx.cast<Complex>());
               });
}

// ---------------------------------------------------------------------------
// Covariance assembly, linear solves and eigenvectors.

enum class CovarianceNorm { plain, l1_normalized };

/// Masked covariance of a constant N x T block: sum_t m_t x_t x_t^H divided by
/// T (plain) or by sum_t m_t (l1_normalized). The mask is a 1 x T node.
inline NodeId covariance(Graph& g, NodeId mask, const CMatrix& x, CovarianceNorm norm) {
  const CMatrix& mv = g.value(mask);
  const auto frames = x.cols();
  if (mv.size() != frames)
    throw DimensionMismatch("mask length " + std::to_string(mv.size()) + " for " +
                            std::to_string(frames) + " frames");
  const CMatrix weighted = x * mv.transpose().asDiagonal();
  const CMatrix raw = weighted * x.adjoint();
  if (norm == CovarianceNorm::plain) {
    const double t = static_cast<double>(frames);
    CMatrix phi = raw / t;
    return g.add(OpKind::covariance_assembly, {mask}, std::move(phi), false,
                 [mask, x, t](const CMatrix& gr, Adjoints& adj) {
                   const CMatrix y = gr * x;
                   CMatrix gm = (x.conjugate().cwiseProduct(y)).colwise().sum() / t;
                   adj.accumulate(mask, gm);
                 });
  }
  if (!g.node(mask).real) throw DimensionMismatch("l1-normalized assembly requires a real mask");
  const double s = mv.real().sum();
  if (!(std::abs(s) > 1e-12)) throw ZeroMaskSum("mask sum " + std::to_string(s));
  CMatrix phi = raw / s;
  return g.add(OpKind::covariance_assembly, {mask}, phi, false,
               [mask, x, s, phi](const CMatrix& gr, Adjoints& adj) {
                 const CMatrix gh = (gr + gr.adjoint()) * 0.5;
                 const double gs = -(gh.conjugate().cwiseProduct(phi)).sum().real() / s;
                 const CMatrix y = gh * x;
                 CMatrix gm = (x.conjugate().cwiseProduct(y)).colwise().sum() / s;
                 gm.array() += gs;
                 adj.accumulate(mask, gm);
               });
}

/// u = A^-1 b for a Hermitian node A.
inline NodeId solve(Graph& g, NodeId a, NodeId b) {
  const auto ah = HermitianMatrix::symmetrized(g.value(a));
  const CMatrix& bv = g.value(b);
  if (bv.rows() != ah.dim())
    throw DimensionMismatch("rhs " + maskbf::detail::dims(bv) + " for " + std::to_string(ah.dim()) +
                            "x" + std::to_string(ah.dim()) + " system");
  const CMatrix am = ah.matrix();
  const CMatrix u = solve_general(am, bv);
  return g.add(OpKind::solve, {a, b}, u, false, [a, b, am, u](const CMatrix& gr, Adjoints& adj) {
    const CMatrix gb = solve_general(am.adjoint(), gr);
    const CMatrix ga = -gb * u.adjoint();
    adj.accumulate(a, (ga + ga.adjoint()) * 0.5);
    adj.accumulate(b, gb);
  });
}

inline constexpr double kEigengapClamp = 1e-10;
inline constexpr double kDegenerateGapRatio = 1e-6;

namespace detail {

// Adjoint of the unit-norm, phase-canonical extreme eigenvector, pushed back
// to the pencil (A, B). `b_is_identity` selects the standard problem.
struct EigenAdjoint {
  GeneralizedEigenSystem sys;
  Eigen::Index k;
  double raw_norm;
  CVector unit;       // before canonicalization
  Complex rotation;   // canonical = unit * rotation
  Eigen::Index pivot;

  std::pair<CMatrix, CMatrix> operator()(const CMatrix& g_out) const {
    const CVector gu = g_out.col(0);
    const CVector u = unit * rotation;
    // canonicalization: u = v e^{-i theta}, theta = arg v_p
    const double s = -(gu.dot(u)).imag();
    CVector gv = gu * std::conj(rotation);
    gv(pivot) -= s * (Complex(0.0, 1.0) / std::conj(unit(pivot)));
    // normalization: v = w / |w|
    const double proj = unit.dot(gv).real();
    const CVector gw = (gv - proj * unit) / raw_norm;
    // simple-eigenpair resolvent
    const auto n = sys.values.size();
    const CVector wk = sys.vectors.col(k);
    const double lk = sys.values(k);
    CVector q = CVector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == k) continue;
      double gap = lk - sys.values(j);
      if (std::abs(gap) < kEigengapClamp) gap = gap < 0 ? -kEigengapClamp : kEigengapClamp;
      q += sys.vectors.col(j) * (sys.vectors.col(j).dot(gw) / gap);
    }
    CMatrix ga = q * wk.adjoint();
    CMatrix gb = -lk * ga - 0.5 * wk.dot(gw).real() * (wk * wk.adjoint());
    ga = (ga + ga.adjoint()).eval() * 0.5;
    gb = (gb + gb.adjoint()).eval() * 0.5;
    return {ga, gb};
  }
};

inline void note_gap(Graph& g, const GeneralizedEigenSystem& sys, Extreme which, const CMatrix& a) {
  const double gap = sys.extreme_gap(which);
  const double scale = a.norm();
  if (gap < kDegenerateGapRatio * scale) g.flags().near_degenerate = true;
  if (gap < kEigengapClamp) g.flags().gap_clamped = true;
}

inline EigenAdjoint make_eigen_adjoint(GeneralizedEigenSystem sys, Extreme which) {
  EigenAdjoint ea;
  ea.k = sys.extreme_index(which);
  const CVector w = sys.vectors.col(ea.k);
  ea.raw_norm = w.norm();
  ea.unit = w / ea.raw_norm;
  ea.pivot = canonical_index(ea.unit);
  const Complex vp = ea.unit(ea.pivot);
  ea.rotation = std::conj(vp) / std::abs(vp);
  ea.sys = std::move(sys);
  return ea;
}

}  // namespace detail

/// Extreme generalized eigenvector of (A, B), unit norm with canonical phase.
inline NodeId gev(Graph& g, NodeId a, NodeId b, Extreme which) {
  const auto ah = HermitianMatrix::symmetrized(g.value(a));
  const auto bh = HermitianMatrix::symmetrized(g.value(b));
  auto sys = generalized_eigensystem(ah, bh);
  detail::note_gap(g, sys, which, ah.matrix());
  auto ea = detail::make_eigen_adjoint(std::move(sys), which);
  CMatrix out = ea.unit * ea.rotation;
  return g.add(OpKind::gev, {a, b}, std::move(out), false,
               [a, b, ea = std::move(ea)](const CMatrix& gr, Adjoints& adj) {
                 auto [ga, gb] = ea(gr);
                 adj.accumulate(a, ga);
                 adj.accumulate(b, gb);
               });
}

/// Maximum standard eigenvector of A, unit norm with canonical phase.
inline NodeId sev(Graph& g, NodeId a) {
  const auto ah = HermitianMatrix::symmetrized(g.value(a));
  auto sys = standard_eigensystem(ah);
  detail::note_gap(g, sys, Extreme::max, ah.matrix());
  auto ea = detail::make_eigen_adjoint(std::move(sys), Extreme::max);
  CMatrix out = ea.unit * ea.rotation;
  return g.add(OpKind::sev, {a}, std::move(out), false,
               [a, ea = std::move(ea)](const CMatrix& gr, Adjoints& adj) {
                 adj.accumulate(a, ea(gr).first);
               });
}

// ---------------------------------------------------------------------------
// Finite-difference verification.

struct GradientReport {
  std::size_t parameter_count = 0;
  double max_relative_error = 0.0;
  std::vector<double> per_parameter_errors;
  bool flagged = false;  // graph reported a near-degenerate eigengap
};

/// Builds a loss graph from parameter values; slot i must carry params[i].
using PipelineBuilder = std::function<NodeId(Graph&, const std::vector<RMatrix>&)>;

/// Error floor relative to the largest finite-difference gradient entry;
/// entries far below it carry no information a central difference can resolve.
inline constexpr double kRelativeErrorFloor = 1e-6;

/// Compares reverse-mode gradients against central differences
/// (f(p + h) - f(p - h)) / 2h, entry by entry.
inline GradientReport check_gradients(const PipelineBuilder& build, const std::vector<RMatrix>& params,
                                      double step) {
  GradientReport report;
  Graph g0;
  const NodeId loss0 = build(g0, params);
  report.flagged = g0.flags().near_degenerate;
  const GradientMap analytic = backward(g0, loss0);

  std::vector<double> ana, fd;
  auto eval = [&](const std::vector<RMatrix>& p) {
    Graph g;
    const NodeId l = build(g, p);
    report.flagged = report.flagged || g.flags().near_degenerate;
    return g.scalar(l).real();
  };
  std::vector<RMatrix> work = params;
  for (std::size_t s = 0; s < params.size(); ++s) {
    const auto it = analytic.find(s);
    for (Eigen::Index i = 0; i < params[s].size(); ++i) {
      const double orig = work[s](i);
      work[s](i) = orig + step;
      const double fp = eval(work);
      work[s](i) = orig - step;
      const double fm = eval(work);
      work[s](i) = orig;
      fd.push_back((fp - fm) / (2.0 * step));
      ana.push_back(it == analytic.end() ? 0.0 : it->second(i));
    }
  }
  report.parameter_count = fd.size();
  double fmax = 0.0;
  for (double v : fd) fmax = std::max(fmax, std::abs(v));
  const double floor = std::max(kRelativeErrorFloor * fmax, std::numeric_limits<double>::min());
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double denom = std::max({std::abs(ana[i]), std::abs(fd[i]), floor});
    const double err = std::abs(ana[i] - fd[i]) / denom;
    report.per_parameter_errors.push_back(err);
    report.max_relative_error = std::max(report.max_relative_error, err);
  }
  return report;
}

}  // namespace maskbf::ad

#endif  // MASKBF_DIFFGRAPH_HPP
