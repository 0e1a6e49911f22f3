#pragma once

// Minimization of h(A:B) over Gaussian unitaries exp(iX) supported on a
// smoother region S. The objective depends only on C_AB; a unitary on S
// rotates the rows and columns of S inside C_ABS.
//
// With K = h_R - h_I on AB (zero elsewhere), dh = Tr(dC_AB K) and
// dC_ABS = i[X, C_ABS] dt, so dh/dt = Tr(X G) with G = i[C_ABS, K]. Steepest
// descent takes X = -G restricted to S, giving dh/dt = -|G_S|_F^2.

#include <cmath>
#include <functional>
#include <optional>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "markovgap/gaussian.hpp"
#include "markovgap/sampling.hpp"

namespace markovgap {

/// Hermitian generator on `support`; `x` is indexed in support order.
struct Generator {
  ModeMask support;
  Matrix x;

  static Generator zero(const ModeMask& support) {
    const Index n = static_cast<Index>(support.size());
    return {support, Matrix::Zero(n, n)};
  }
  double norm() const { return x.size() == 0 ? 0.0 : x.norm(); }
};

// ---------------------------------------------------------------------------
// Kernels

/// h_I = h_A (+) 0 + 0 (+) h_B - h_AB on the modes of c_ab; a and b are local
/// masks partitioning c_ab.
inline EntanglementHamiltonian mutual_info_kernel(const Matrix& c_ab, const ModeMask& a,
                                                  const ModeMask& b,
                                                  double eps = kHamiltonianEps) {
  detail::check_eps(eps, "mutual_info_kernel");
  if (!disjoint(a, b)) throw ValidationError("mutual_info_kernel: masks overlap");
  a.check_within(c_ab.rows());
  b.check_within(c_ab.rows());
  Matrix h = -entanglement_hamiltonian(linalg::eigh(c_ab), eps).entries;
  h(a.indices(), a.indices()) += entanglement_hamiltonian(linalg::eigh(restrict(c_ab, a)), eps).entries;
  h(b.indices(), b.indices()) += entanglement_hamiltonian(linalg::eigh(restrict(c_ab, b)), eps).entries;
  return {linalg::hermitian_part(h)};
}

inline constexpr double kDenominatorFloor = 1e-10;

/// (1 - r_a - r_b) / (sqrt(q_a) + sqrt(q_b)) with q = r (1 - r); zero where
/// the denominator vanishes (pairs pinned at 0 or 1 carry no reflected
/// correlations).
inline RealMatrix sqrt_derivative_factors(const RealVector& r_raw) {
  const Index n = r_raw.size();
  RealVector r(n), sq(n);
  for (Index k = 0; k < n; ++k) {
    r(k) = std::clamp(r_raw(k), 0.0, 1.0);
    sq(k) = std::sqrt(r(k) * (1.0 - r(k)));
  }
  RealMatrix f(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      const double den = sq(i) + sq(j);
      f(i, j) = den < kDenominatorFloor ? 0.0 : (1.0 - r(i) - r(j)) / den;
    }
  return f;
}

/// h_R with dS_R = Tr(dC_AB h_R), from a precomputed eigendecomposition of
/// C_AB.
inline Matrix reflected_kernel(const Matrix& c_ab, const linalg::Eigh& e, const ModeMask& a,
                               double eps = kHamiltonianEps) {
  const Index na = static_cast<Index>(a.size());
  const Matrix block = reflected_block(c_ab, e, a);
  const Matrix h = entanglement_hamiltonian(linalg::eigh(block), eps).entries;
  const Matrix h00 = h.topLeftCorner(na, na);
  const Matrix h11 = h.bottomRightCorner(na, na);
  const Matrix h01 = h.topRightCorner(na, na);
  const Matrix h10 = h.bottomLeftCorner(na, na);

  // d sqrt(Q) in the eigenbasis of C_AB, Q = C_AB (I - C_AB).
  const Index n = c_ab.rows();
  Matrix m = Matrix::Zero(n, n);
  m(a.indices(), a.indices()) = h01 + h10;
  Matrix rotated = e.vectors.adjoint() * m * e.vectors;
  rotated.array() *= sqrt_derivative_factors(e.values).cast<cplx>().array();
  Matrix out = e.vectors * rotated * e.vectors.adjoint();
  out(a.indices(), a.indices()) += h00 - h11;
  return linalg::hermitian_part(out);
}

inline Matrix reflected_kernel(const Matrix& c_ab, const ModeMask& a,
                               double eps = kHamiltonianEps) {
  detail::check_eps(eps, "reflected_kernel");
  a.check_within(c_ab.rows());
  const linalg::Eigh e = linalg::eigh(c_ab);
  detail::check_spectrum(e.values, "reflected_kernel");
  return reflected_kernel(c_ab, e, a, eps);
}

/// Value and kernel K = h_R - h_I of the Markov gap, sharing one
/// eigendecomposition of each block.
struct MarkovGapKernel {
  MarkovGapParts parts;
  Matrix kernel;  // on the modes of c_ab
};

inline MarkovGapKernel markov_gap_kernel(const Matrix& c_ab, const ModeMask& a, const ModeMask& b,
                                         double eps_entropy = kEntropyEps,
                                         double eps_hamiltonian = kHamiltonianEps) {
  if (!disjoint(a, b)) throw ValidationError("markov_gap_kernel: masks overlap");
  MarkovGapKernel out;
  const linalg::Eigh e_ab = linalg::eigh(c_ab);
  const linalg::Eigh e_a = linalg::eigh(restrict(c_ab, a));
  const linalg::Eigh e_b = linalg::eigh(restrict(c_ab, b));
  detail::check_spectrum(e_ab.values, "markov_gap_kernel");
  detail::check_spectrum(e_a.values, "markov_gap_kernel");
  detail::check_spectrum(e_b.values, "markov_gap_kernel");

  auto& p = out.parts;
  p.entropy_ab = entropy_of_spectrum(e_ab.values, eps_entropy);
  p.entropy_a = entropy_of_spectrum(e_a.values, eps_entropy);
  p.entropy_b = entropy_of_spectrum(e_b.values, eps_entropy);
  p.mutual_information = p.entropy_a + p.entropy_b - p.entropy_ab;

  const Index na = static_cast<Index>(a.size());
  const Matrix block = reflected_block(c_ab, e_ab, a);
  const linalg::Eigh e_r = linalg::eigh(block);
  p.reflected_entropy = entropy_of_spectrum(e_r.values, eps_entropy);
  p.markov_gap = p.reflected_entropy - p.mutual_information;

  const Matrix h = entanglement_hamiltonian(e_r, eps_hamiltonian).entries;
  const Index n = c_ab.rows();
  Matrix m = Matrix::Zero(n, n);
  m(a.indices(), a.indices()) = h.topRightCorner(na, na) + h.bottomLeftCorner(na, na);
  Matrix rotated = e_ab.vectors.adjoint() * m * e_ab.vectors;
  rotated.array() *= sqrt_derivative_factors(e_ab.values).cast<cplx>().array();
  Matrix k = e_ab.vectors * rotated * e_ab.vectors.adjoint();
  k(a.indices(), a.indices()) += h.topLeftCorner(na, na) - h.bottomRightCorner(na, na);

  // Subtract h_I.
  k += entanglement_hamiltonian(e_ab, eps_hamiltonian).entries;
  k(a.indices(), a.indices()) -= entanglement_hamiltonian(e_a, eps_hamiltonian).entries;
  k(b.indices(), b.indices()) -= entanglement_hamiltonian(e_b, eps_hamiltonian).entries;
  out.kernel = linalg::hermitian_part(k);
  return out;
}

// ---------------------------------------------------------------------------
// Gradient and unitary updates

/// Local masks of A, B and the smoother support inside a working covariance
/// C_ABS.
struct GapProblem {
  ModeMask a, b;
  std::vector<ModeMask> supports;  // disjoint; each evolves under its own unitary

  ModeMask ab() const { return mask_union(a, b); }
  ModeMask support() const {
    ModeMask out;
    for (const auto& s : supports) out = mask_union(out, s);
    return out;
  }
  void validate(Index dim) const {
    a.check_within(dim);
    b.check_within(dim);
    if (!disjoint(a, b)) throw ValidationError("GapProblem: A and B overlap");
    for (std::size_t i = 0; i < supports.size(); ++i) {
      supports[i].check_within(dim);
      for (std::size_t j = i + 1; j < supports.size(); ++j)
        if (!disjoint(supports[i], supports[j]))
          throw ValidationError("GapProblem: smoother supports overlap");
    }
  }
};

struct GradientResult {
  MarkovGapParts parts;
  Generator gradient;  // G_S = (i[C, K])_S, cross blocks between supports zeroed
};

inline GradientResult markov_gap_gradient(const Matrix& c, const GapProblem& prob,
                                          double eps_entropy = kEntropyEps,
                                          double eps_hamiltonian = kHamiltonianEps) {
  const ModeMask ab = prob.ab();
  const MarkovGapKernel mk =
      markov_gap_kernel(restrict(c, ab), ab.relabel(prob.a), ab.relabel(prob.b), eps_entropy,
                        eps_hamiltonian);
  GradientResult out;
  out.parts = mk.parts;
  const ModeMask s = prob.support();
  out.gradient = Generator::zero(s);
  if (s.empty()) return out;

  // G_SS = i (C_{S,AB} K_{AB,S} - K_{S,AB} C_{AB,S}); K vanishes off AB.
  const Index ns = static_cast<Index>(s.size());
  Matrix k_ab_s = Matrix::Zero(static_cast<Index>(ab.size()), ns);
  for (Index j = 0; j < ns; ++j) {
    if (const auto pos = ab.position_of(s[static_cast<std::size_t>(j)]))
      k_ab_s.col(j) = mk.kernel.col(static_cast<Index>(*pos));
  }
  const Matrix c_s_ab = c(s.indices(), ab.indices());
  const Matrix prod = c_s_ab * k_ab_s;
  Matrix g = kI * (prod - prod.adjoint());

  if (prob.supports.size() > 1) {
    Matrix masked = Matrix::Zero(ns, ns);
    for (const auto& sub : prob.supports) {
      const ModeMask local = s.relabel(sub);
      masked(local.indices(), local.indices()) = g(local.indices(), local.indices());
    }
    g = masked;
  }
  out.gradient.x = linalg::hermitian_part(g);
  return out;
}

/// Steepest-descent generator X_S = -i[C_ABS, h_R - h_I]_S for a single
/// support.
inline Generator gradient_generator(const CovarianceMatrix& c_abs, const ModeMask& a,
                                    const ModeMask& b, const ModeMask& support,
                                    double eps = kHamiltonianEps) {
  detail::check_eps(eps, "gradient_generator");
  GapProblem prob{a, b, {support}};
  prob.validate(c_abs.dim());
  Generator g = markov_gap_gradient(c_abs.entries(), prob, kEntropyEps, eps).gradient;
  g.x = -g.x;
  return g;
}

/// (X + S conj(X) S) / 2 with S the time-reversal matrix restricted to the
/// support. Its exponential u satisfies S conj(u) S^-1 = u.
inline Generator project_tr(const Generator& x, const Matrix& s) {
  if (s.rows() != x.x.rows() || s.cols() != x.x.cols()) {
    throw ValidationError("project_tr: operator does not match the generator support");
  }
  return {x.support, linalg::hermitian_part((x.x + s * x.x.conjugate() * s) * 0.5)};
}

/// u = exp(i X dt) on the support, acting as e^{iXdt} C e^{-iXdt}.
inline Matrix apply_support_unitary(const Matrix& c, const ModeMask& support, const Matrix& u) {
  if (support.empty()) return c;
  Matrix out = c;
  const Matrix rows = u * c(support.indices(), Eigen::all);
  out(support.indices(), Eigen::all) = rows;
  const Matrix cols = out(Eigen::all, support.indices()) * u.adjoint();
  out(Eigen::all, support.indices()) = cols;
  return linalg::hermitian_part(out);
}

/// support is given in the coordinates of c.
inline CovarianceMatrix apply_unitary(const CovarianceMatrix& c, const Generator& x, double dt) {
  x.support.check_within(c.dim());
  if (dt == 0.0 || x.support.empty()) return c;
  return CovarianceMatrix(apply_support_unitary(c.entries(), x.support, linalg::expi(x.x, dt)));
}

// ---------------------------------------------------------------------------
// Line search

struct LineSearchConfig {
  double initial_step = 1.0;
  double shrink = 0.5;
  int max_backtracks = 40;
  int max_expansions = 30;
  int max_bisections = 12;
  double min_decrease = 1e-12;
};

// Sufficient-decrease constant for the quadratic-model step.
inline constexpr double kArmijo = 1e-4;

struct LineSearchResult {
  double dt = 0.0;
  double h = 0.0;
  bool stalled = false;
  int evaluations = 0;
};

/// Backtracking or expansion to bracket a decrease of phi below h0, then
/// golden-section refinement inside the bracket. Never returns a value above
/// h0. With a known negative slope phi'(0), a quadratic model through
/// (0, h0) and one trial point is tried first; the bracketing search is the
/// fallback when the model step does not reach the Armijo-type decrease.
inline LineSearchResult line_search(const std::function<double(double)>& phi, double h0,
                                    const LineSearchConfig& cfg = {},
                                    std::optional<double> slope = std::nullopt) {
  if (!(cfg.initial_step > 0.0) || !(cfg.shrink > 0.0 && cfg.shrink < 1.0)) {
    throw ValidationError("line_search: bad step parameters");
  }
  LineSearchResult res;
  res.h = h0;
  auto eval = [&](double t) {
    ++res.evaluations;
    const double v = phi(t);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  if (slope && *slope < 0.0) {
    const double t1 = cfg.initial_step;
    const double f1 = eval(t1);
    const double curvature = f1 - h0 - *slope * t1;
    double best_t = t1, best_f = f1;
    if (curvature > 0.0) {
      const double t2 = -*slope * t1 * t1 / (2.0 * curvature);
      const double f2 = eval(t2);
      if (f2 < best_f) {
        best_t = t2;
        best_f = f2;
      }
    }
    if (best_f <= h0 + kArmijo * *slope * best_t && best_f < h0 - cfg.min_decrease) {
      res.dt = best_t;
      res.h = best_f;
      return res;
    }
  }

  double lo = 0.0, mid = cfg.initial_step, hi;
  double f_mid = eval(mid), f_hi;
  if (f_mid < h0 - cfg.min_decrease) {
    hi = mid / cfg.shrink;
    f_hi = eval(hi);
    for (int k = 0; k < cfg.max_expansions && f_hi < f_mid; ++k) {
      lo = mid;
      mid = hi;
      f_mid = f_hi;
      hi = mid / cfg.shrink;
      f_hi = eval(hi);
    }
    if (f_hi < f_mid) {
      res.dt = hi;
      res.h = f_hi;
      return res;
    }
  } else {
    bool found = false;
    for (int k = 0; k < cfg.max_backtracks; ++k) {
      hi = mid;
      mid *= cfg.shrink;
      f_mid = eval(mid);
      if (f_mid < h0 - cfg.min_decrease) {
        found = true;
        break;
      }
    }
    if (!found) {
      res.stalled = true;
      return res;
    }
  }

  // Golden-section search on (lo, hi) around the interior point mid.
  const double ratio = 0.3819660112501051;
  double best_t = mid, best_f = f_mid;
  double a = lo, b = mid, c = hi, fb = f_mid;
  for (int k = 0; k < cfg.max_bisections; ++k) {
    const bool right = (c - b) > (b - a);
    const double t = right ? b + ratio * (c - b) : b - ratio * (b - a);
    const double ft = eval(t);
    if (ft < fb) {
      if (right) a = b; else c = b;
      b = t;
      fb = ft;
    } else {
      if (right) c = t; else a = t;
    }
    if (ft < best_f) {
      best_f = ft;
      best_t = t;
    }
  }
  res.dt = best_t;
  res.h = best_f;
  return res;
}

// ---------------------------------------------------------------------------
// Optimization driver

enum class NoiseSchedule { off, stall_or_plateau };

struct OptimizerConfig {
  double grad_tol = 3e-3;  // Frobenius norm of the gradient generator
  int max_iters = 2000;
  LineSearchConfig line_search;
  double noise_amplitude = 1e-2;
  NoiseSchedule noise_schedule = NoiseSchedule::off;
  int max_noise_events = 20;
  int noise_patience = 2;       // consecutive kicks without escape before stopping
  double escape_tol = 1e-4;     // decrease of h that counts as an escape
  int plateau_window = 20;
  double plateau_rel_change = 1e-3;
  std::uint64_t rng_seed = 1;
  bool tr_constrained = false;
  double eps_entropy = kEntropyEps;
  double eps_hamiltonian = kHamiltonianEps;

  void validate() const {
    if (!(grad_tol > 0.0)) throw ConfigError("grad_tol must be positive");
    if (max_iters < 0) throw ConfigError("max_iters must be non-negative");
    if (!(noise_amplitude >= 0.0)) throw ConfigError("noise_amplitude must be >= 0");
    if (line_search.max_bisections < 0) throw ConfigError("max_bisections must be >= 0");
    if (!(line_search.initial_step > 0.0)) throw ConfigError("initial_step must be positive");
    if (!(line_search.shrink > 0.0 && line_search.shrink < 1.0))
      throw ConfigError("shrink must lie in (0, 1)");
    if (plateau_window < 1) throw ConfigError("plateau_window must be >= 1");
  }

  bool noise_enabled() const {
    return noise_schedule != NoiseSchedule::off && noise_amplitude > 0.0 && !tr_constrained;
  }
};

struct TraceRow {
  Index iteration = 0;
  double h = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;  // line-search step that led to this row
  std::string event;  // "", "noise", "converged", ...
};

struct SaddleEvent {
  Index iteration = 0;
  double h = 0.0;
  double grad_norm = 0.0;
  std::string kind;  // "converged", "stall" or "plateau"
};

struct OptimizationReport {
  std::vector<TraceRow> trace;
  double bare_h = 0.0;
  double final_h = 0.0;
  double final_grad_norm = 0.0;
  MarkovGapParts final_parts;
  std::vector<Generator> generators;  // one per support, exp(i G) is the accumulated unitary
  bool converged = false;
  Index iterations = 0;
  int noise_events = 0;
  std::vector<SaddleEvent> saddle_events;
  std::string stop_reason;
  double max_tr_defect = 0.0;  // over accepted unitaries, constrained runs only
  Matrix final_covariance;     // working covariance after optimization
};

namespace detail {

inline double markov_gap_value(const Matrix& c, const GapProblem& prob, double eps) {
  const ModeMask ab = prob.ab();
  return markov_gap_parts(restrict(c, ab), ab.relabel(prob.a), ab.relabel(prob.b), eps).markov_gap;
}

struct BlockExp {
  ModeMask local;  // positions inside the combined support
  linalg::Eigh eig;
  Matrix at(double t) const {
    Matrix scaled = eig.vectors;
    for (Index k = 0; k < eig.values.size(); ++k) scaled.col(k) *= std::exp(kI * (t * eig.values(k)));
    return scaled * eig.vectors.adjoint();
  }
};

}  // namespace detail

/// Runs descent on the working covariance `c` (typically C_ABS). `tr_ops`
/// holds the time-reversal matrix restricted to each support when the run is
/// constrained. `warm_start` generators, one per support, are applied first.
inline OptimizationReport optimize(const Matrix& c0, const GapProblem& prob,
                                   const OptimizerConfig& cfg,
                                   const std::vector<Matrix>& tr_ops = {},
                                   const std::vector<Generator>& warm_start = {}) {
  cfg.validate();
  prob.validate(c0.rows());
  if (cfg.tr_constrained && tr_ops.size() != prob.supports.size()) {
    throw ValidationError("optimize: constrained run needs one time-reversal operator per support");
  }

  OptimizationReport rep;
  Matrix c = c0;
  const ModeMask s = prob.support();
  const Index ns = static_cast<Index>(s.size());
  std::vector<ModeMask> local;
  std::vector<Matrix> accumulated;
  for (const auto& sub : prob.supports) {
    local.push_back(s.relabel(sub));
    accumulated.push_back(Matrix::Identity(static_cast<Index>(sub.size()), static_cast<Index>(sub.size())));
  }

  auto rotate = [&](Matrix& cov, const std::vector<Matrix>& blocks) {
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      cov = apply_support_unitary(cov, prob.supports[k], blocks[k]);
      accumulated[k] = blocks[k] * accumulated[k];
    }
  };

  if (!warm_start.empty()) {
    rep.bare_h = detail::markov_gap_value(c, prob, cfg.eps_entropy);
    if (warm_start.size() != prob.supports.size()) {
      throw ValidationError("optimize: warm start needs one generator per support");
    }
    std::vector<Matrix> blocks;
    for (std::size_t k = 0; k < warm_start.size(); ++k) {
      if (!(warm_start[k].support == prob.supports[k]))
        throw ValidationError("optimize: warm-start support does not match");
      blocks.push_back(linalg::expi(warm_start[k].x, 1.0));
    }
    rotate(c, blocks);
  }

  const bool noise_on = cfg.noise_enabled() && ns > 0;
  std::mt19937_64 rng(cfg.rng_seed);
  double amplitude = cfg.noise_amplitude;
  int failed_kicks = 0;
  double h_before_kick = std::numeric_limits<double>::quiet_NaN();
  Index last_trigger = -1;
  std::vector<double> h_history;
  double last_step = 0.0;
  std::string pending_event;

  // Returns false when no further kick is allowed.
  auto try_kick = [&](double h_now) {
    if (!noise_on) return false;
    if (!std::isnan(h_before_kick)) {
      if (h_now < h_before_kick - cfg.escape_tol) {
        amplitude *= 0.5;
        failed_kicks = 0;
      } else {
        ++failed_kicks;
      }
    }
    if (failed_kicks >= cfg.noise_patience || rep.noise_events >= cfg.max_noise_events) return false;
    std::vector<Matrix> blocks;
    for (const auto& sub : prob.supports) {
      const Index n = static_cast<Index>(sub.size());
      Matrix xi = sampling::random_hermitian(rng, n);
      const double norm_all = std::sqrt(static_cast<double>(prob.supports.size()));
      xi *= amplitude / (xi.norm() * norm_all);
      blocks.push_back(linalg::expi(xi, 1.0));
    }
    rotate(c, blocks);
    h_before_kick = h_now;
    ++rep.noise_events;
    pending_event = "noise";
    return true;
  };

  for (Index it = 0;; ++it) {
    const GradientResult gr = markov_gap_gradient(c, prob, cfg.eps_entropy, cfg.eps_hamiltonian);
    Generator x = gr.gradient;
    x.x = -x.x;
    if (cfg.tr_constrained) {
      for (std::size_t k = 0; k < local.size(); ++k) {
        Generator part{prob.supports[k], x.x(local[k].indices(), local[k].indices())};
        x.x(local[k].indices(), local[k].indices()) = project_tr(part, tr_ops[k]).x;
      }
    }
    const double h = gr.parts.markov_gap;
    const double g = x.norm();
    if (it == 0 && warm_start.empty()) rep.bare_h = h;
    rep.trace.push_back({it, h, g, last_step, pending_event});
    pending_event.clear();
    rep.final_h = h;
    rep.final_grad_norm = g;
    rep.final_parts = gr.parts;
    rep.iterations = it;
    h_history.push_back(h);

    if (ns == 0) {
      rep.converged = true;
      rep.stop_reason = "empty support";
      break;
    }
    if (g < cfg.grad_tol) {
      if (noise_on) {
        rep.saddle_events.push_back({it, h, g, "converged"});
        last_trigger = it;
        if (try_kick(h)) {
          last_step = 0.0;
          continue;
        }
      }
      rep.converged = true;
      rep.stop_reason = "gradient tolerance";
      rep.trace.back().event = rep.trace.back().event.empty() ? "converged" : rep.trace.back().event + ";converged";
      break;
    }
    if (it >= cfg.max_iters) {
      rep.stop_reason = "max_iters";
      break;
    }

    std::vector<detail::BlockExp> exps;
    for (const auto& l : local) exps.push_back({l, linalg::eigh(x.x(l.indices(), l.indices()))});
    auto unitaries = [&](double t) {
      std::vector<Matrix> out;
      for (const auto& e : exps) out.push_back(e.at(t));
      return out;
    };
    auto phi = [&](double t) {
      Matrix trial = c;
      const auto us = unitaries(t);
      for (std::size_t k = 0; k < us.size(); ++k) trial = apply_support_unitary(trial, prob.supports[k], us[k]);
      return detail::markov_gap_value(trial, prob, cfg.eps_entropy);
    };
    // Start from twice the previous accepted step: successive steps are similar.
    LineSearchConfig ls_cfg = cfg.line_search;
    if (last_step > 0.0) ls_cfg.initial_step = 2.0 * last_step;
    const LineSearchResult ls = line_search(phi, h, ls_cfg, -g * g);

    if (ls.stalled) {
      rep.saddle_events.push_back({it, h, g, "stall"});
      last_trigger = it;
      if (try_kick(h)) {
        last_step = 0.0;
        continue;
      }
      rep.stop_reason = "line search stalled";
      break;
    }
    const auto us = unitaries(ls.dt);
    if (cfg.tr_constrained) {
      for (std::size_t k = 0; k < us.size(); ++k)
        rep.max_tr_defect = std::max(rep.max_tr_defect, tr_defect(us[k], tr_ops[k]));
    }
    rotate(c, us);
    last_step = ls.dt;

    const auto w = static_cast<std::size_t>(cfg.plateau_window);
    // Plateau: h barely moved over the last window of iterations.
    if (h_history.size() > w && it - last_trigger >= cfg.plateau_window) {
      const double past = h_history[h_history.size() - 1 - w];
      if (past > 0.0 && (past - ls.h) / past < cfg.plateau_rel_change) {
        rep.saddle_events.push_back({it, h, g, "plateau"});
        last_trigger = it;
        try_kick(ls.h);
      }
    }
  }

  for (std::size_t k = 0; k < prob.supports.size(); ++k) {
    rep.generators.push_back({prob.supports[k], linalg::unitary_log(accumulated[k])});
  }
  rep.final_covariance = c;
  return rep;
}

inline void write_trace_csv(std::ostream& os, const OptimizationReport& rep) {
  os << "iteration,h,h_log2,grad_norm,step,event\n";
  os.precision(17);
  for (const auto& r : rep.trace) {
    os << r.iteration << ',' << r.h << ',' << r.h / std::numbers::ln2 << ',' << r.grad_norm << ','
       << r.step << ',' << r.event << '\n';
  }
}

}  // namespace markovgap
