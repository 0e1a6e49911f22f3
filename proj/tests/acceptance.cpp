// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails. `--full-repro` runs the
// full-size table values instead (hours per case).

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>

#include "markovgap/pipeline.hpp"

using namespace markovgap;

namespace {

const double kLog2 = std::numbers::ln2;
const double kOneThirdLog2 = kLog2 / 3.0;
const double kTwoThirdsLog2 = 2.0 * kLog2 / 3.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

RunConfig base_config(ModelKind kind, Index l, SmootherShape shape, Index r) {
  RunConfig c;
  c.kind = kind;
  c.l_a = c.l_b = l;
  c.shape = shape;
  c.radius = r;
  c.max_dim = 1 << 20;
  return c;
}

RunReport quiet_run(const RunConfig& c) {
  RunOptions opt;
  opt.write_files = false;
  opt.force = true;
  return run(c, opt);
}

double bare_gap(const RunConfig& c) {
  const Problem p = build_problem(c);
  const Matrix cab = covariance_submatrix(p.model, p.lattice, mask_union(p.tripartition.a, p.tripartition.b));
  const ModeMask ab = mask_union(p.tripartition.a, p.tripartition.b);
  return markov_gap_parts(cab, ab.relabel(p.tripartition.a), ab.relabel(p.tripartition.b)).markov_gap;
}

double gap_of(const Matrix& c, const GapProblem& prob) {
  const ModeMask ab = prob.ab();
  return markov_gap_parts(restrict(c, ab), ab.relabel(prob.a), ab.relabel(prob.b)).markov_gap;
}

Matrix rotate(const Matrix& c, const ModeMask& support, const Matrix& x, double t) {
  return apply_support_unitary(c, support, linalg::expi(x, t));
}

// Random 8-mode Slater state with four particles. A and B are drawn from
// four random modes, so C_AB has no eigenvalue pinned at 0 or 1 and h is
// differentiable at the state.
struct GradientCase {
  Matrix c;
  GapProblem prob;
};

GradientCase random_gradient_case(sampling::Rng& rng) {
  const Index n = 8;
  GradientCase g;
  g.c = sampling::random_pure_covariance(rng, n, 4);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Index na = 1 + static_cast<Index>(rng() % 3);
  g.prob.a = ModeMask::from_unsorted({perm.begin(), perm.begin() + na});
  g.prob.b = ModeMask::from_unsorted({perm.begin() + na, perm.begin() + 4});
  std::vector<Index> sup;
  while (true) {
    sup.clear();
    for (Index i = 0; i < n; ++i)
      if (rng() % 2) sup.push_back(i);
    const ModeMask s(sup);
    if (s.size() >= 2 && !disjoint(s, g.prob.ab())) break;
  }
  g.prob.supports = {ModeMask(sup)};
  return g;
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const OracleCheckResult r = oracle_check(2024, 50);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {r.gaussian_passed() && secs < 120.0,
          fmt("oracle equivalence over %d states: max |dS| %.1e, |dI| %.1e, |dS_R| %.1e, |dh| %.1e (tol 1e-6), %.1f s",
              r.states, r.max_err_entropy, r.max_err_mutual_information, r.max_err_reflected, r.max_err_markov_gap,
              secs)};
}

Outcome criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  sampling::Rng rng(2025);
  const double delta = 1e-5;
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    const GradientCase g = random_gradient_case(rng);
    const ModeMask& sup = g.prob.supports[0];
    const Generator x = gradient_generator(CovarianceMatrix(g.c), g.prob.a, g.prob.b, sup);
    // Steepest-descent direction and a random direction.
    std::vector<std::pair<Matrix, double>> dirs;
    dirs.emplace_back(x.x, -x.x.squaredNorm());
    const Matrix y = sampling::random_hermitian(rng, static_cast<Index>(sup.size()));
    dirs.emplace_back(y, -(x.x * y).trace().real());
    for (const auto& [d, analytic] : dirs) {
      const double num = (gap_of(rotate(g.c, sup, d, delta), g.prob) - gap_of(rotate(g.c, sup, d, -delta), g.prob)) /
                         (2.0 * delta);
      worst = std::max(worst, rel(num, analytic));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < 1e-3 && secs < 120.0,
          fmt("gradient vs central differences (delta 1e-5), 20 states x 2 directions: max rel err %.2e, %.1f s", worst,
              secs)};
}

Outcome criterion_3() {
  const oracle::ToricSots t = oracle::toric_sots_state();
  const oracle::DenseGapParts p = oracle::dense_markov_gap_parts(t.state, t.a, t.b);
  return {std::abs(p.markov_gap) <= 1e-10,
          fmt("toric-code state: h = %.2e, S_R = %.6f, I = %.6f", p.markov_gap, p.reflected_entropy,
              p.mutual_information)};
}

Outcome criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig hof = base_config(ModelKind::hofstadter, 24, SmootherShape::two_circles, 0);
  const RunConfig ti = base_config(ModelKind::topological_insulator, 24, SmootherShape::two_circles, 0);
  const double h_hof = bare_gap(hof);
  const double h_ti = bare_gap(ti);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Lattice lat = hof.lattice();
  return {std::abs(h_hof - 0.3429) <= 0.01 && std::abs(h_ti - 0.6857) <= 0.015,
          fmt("bare h at L = 24 on %ldx%ld: Hofstadter %.4f (0.3429 +- 0.01), TI %.4f (0.6857 +- 0.015), %.0f s",
              static_cast<long>(lat.width), static_cast<long>(lat.height), h_hof, h_ti, secs)};
}

Outcome criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> h;
  std::string values;
  for (Index r = 0; r <= 3; ++r) {
    RunConfig c = base_config(ModelKind::hofstadter, 16, SmootherShape::two_circles, r);
    c.optimizer.max_iters = 80;
    h.push_back(quiet_run(c).final_h);
    values += fmt("%s%.4f", r ? ", " : "", h.back());
  }
  bool monotone = true;
  for (std::size_t k = 1; k < h.size(); ++k) monotone = monotone && h[k] < h[k - 1];
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {rel(h[3], kOneThirdLog2) <= 0.10 && monotone,
          fmt("L = 16 two circles, R = 0..3: h = (%s); R = 3 is %.1f%% from (1/3) log 2, monotone %s, %.0f s",
              values.c_str(), 100.0 * rel(h[3], kOneThirdLog2), monotone ? "yes" : "no", secs)};
}

Outcome criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig joint = base_config(ModelKind::hofstadter, 8, SmootherShape::joint, 3);
  joint.optimizer.max_iters = 150;
  const double h_joint = quiet_run(joint).final_h;

  RunConfig tr = base_config(ModelKind::topological_insulator, 8, SmootherShape::two_circles, 3);
  tr.optimizer.tr_constrained = true;
  tr.optimizer.max_iters = 150;
  const RunReport tr_rep = quiet_run(tr);

  RunConfig free = base_config(ModelKind::topological_insulator, 8, SmootherShape::two_circles, 3);
  free.optimizer.noise_schedule = NoiseSchedule::stall_or_plateau;
  free.optimizer.max_iters = 400;
  free.optimizer.rng_seed = 3;
  const RunReport free_rep = quiet_run(free);
  double plateau = std::numeric_limits<double>::quiet_NaN();
  for (const auto& e : free_rep.optimization.saddle_events) {
    if (rel(e.h, kTwoThirdsLog2) <= 0.10) {
      plateau = e.h;
      break;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = h_joint < 0.02 && rel(tr_rep.final_h, kTwoThirdsLog2) <= 0.10 && tr_rep.optimization.max_tr_defect <= 1e-8 &&
                    free_rep.final_h < 0.05 && !std::isnan(plateau);
  return {pass, fmt("L = 8, R = 3: joint %.4f (< 0.02); TI time-reversal constrained %.4f (%.1f%% from (2/3) log 2, "
                    "defect %.1e); TI free with noise %.4f (< 0.05) after plateau at %.4f, %d kicks, %.0f s",
                    h_joint, tr_rep.final_h, 100.0 * rel(tr_rep.final_h, kTwoThirdsLog2),
                    tr_rep.optimization.max_tr_defect, free_rep.final_h, plateau, free_rep.optimization.noise_events, secs)};
}

Outcome criterion_7() {
  ModelSpec quarter = hofstadter_quarter();
  ModelSpec sixth;
  sixth.q = 6;
  sixth.mu = 0.0;
  sixth.filled_bands = 2;
  const ModelSpec ti = topological_insulator();
  const int c_quarter = chern_number(solve_bands(quarter, 48), lowest_bands(1)).chern;
  const int c_sixth = chern_number(solve_bands(sixth, 48), lowest_bands(2)).chern;
  const int c_up = chern_number(solve_bands(ti.layer(0), 48), lowest_bands(1)).chern;
  const int c_down = chern_number(solve_bands(ti.layer(1), 48), lowest_bands(1)).chern;
  return {c_quarter == 1 && c_sixth == 2 && c_up == 1 && c_down == -1,
          fmt("Chern numbers: (1,4) lowest %+d, (1,6) lowest two %+d, TI layers %+d and %+d", c_quarter, c_sixth, c_up,
              c_down)};
}

Outcome criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();
  sampling::Rng rng(2026);
  std::vector<std::string> failed;

  // Nonnegativity of h.
  double min_h = 1e9;
  for (int s = 0; s < 100; ++s) {
    const Index n = 6 + static_cast<Index>(rng() % 7);
    const Matrix c = sampling::random_pure_covariance(rng, n, 1 + static_cast<Index>(rng() % (n - 1)));
    const auto [a, b] = sampling::random_split(rng, n);
    min_h = std::min(min_h, markov_gap_parts(c, a, b).markov_gap);
  }
  if (min_h < -1e-9) failed.push_back(fmt("nonnegativity (min h %.2e)", min_h));

  // Canonical purification is pure.
  double purity = 0.0;
  for (int s = 0; s < 50; ++s) {
    const Matrix c = sampling::random_mixed_covariance(rng, 2 + static_cast<Index>(rng() % 9), 0.01, 0.99);
    purity = std::max(purity, CovarianceMatrix(reflected_covariance(CovarianceMatrix(c)).entries).purity_defect());
  }
  if (purity > 1e-7) failed.push_back(fmt("purification purity (%.2e)", purity));

  // Entropy is additive over direct sums and invariant under unitaries.
  double additivity = 0.0, invariance = 0.0, gap_invariance = 0.0;
  for (int s = 0; s < 50; ++s) {
    const Matrix c1 = sampling::random_mixed_covariance(rng, 4);
    const Matrix c2 = sampling::random_mixed_covariance(rng, 5);
    Matrix sum = Matrix::Zero(9, 9);
    sum.topLeftCorner(4, 4) = c1;
    sum.bottomRightCorner(5, 5) = c2;
    additivity = std::max(additivity, std::abs(entropy(sum) - entropy(c1) - entropy(c2)));
    const Matrix u = sampling::random_unitary(rng, 9);
    invariance = std::max(invariance, std::abs(entropy(Matrix(u * sum * u.adjoint())) - entropy(sum)));

    // h(A:B) is invariant under unitaries acting within A, B and C separately.
    // |A| + |B| = 4 keeps C_AB away from eigenvalues 0 and 1, where the
    // square root in the purification amplifies rounding to ~1e-8.
    const Matrix pure = sampling::random_pure_covariance(rng, 9, 4);
    const ModeMask a{0, 1}, b{2, 3}, cc{4, 5, 6, 7, 8};
    Matrix local = Matrix::Zero(9, 9);
    for (const ModeMask* m : {&a, &b, &cc}) {
      const auto idx = m->indices();
      local(idx, idx) = sampling::random_unitary(rng, static_cast<Index>(m->size()));
    }
    const double h0 = markov_gap_parts(pure, a, b).markov_gap;
    const double h1 = markov_gap_parts(Matrix(local * pure * local.adjoint()), a, b).markov_gap;
    gap_invariance = std::max(gap_invariance, std::abs(h1 - h0));
  }
  if (additivity > 1e-10) failed.push_back(fmt("entropy additivity (%.2e)", additivity));
  if (invariance > 1e-9) failed.push_back(fmt("entropy unitary invariance (%.2e)", invariance));
  if (gap_invariance > 1e-9) failed.push_back(fmt("h local unitary invariance (%.2e)", gap_invariance));

  // Accepted steps never raise h; identical seeds give identical traces.
  double worst_rise = 0.0;
  bool deterministic = true;
  for (int s = 0; s < 5; ++s) {
    const Matrix c = sampling::random_pure_covariance(rng, 10, 5);
    GapProblem prob{ModeMask{0, 1, 2}, ModeMask{3, 4, 5}, {ModeMask{2, 3, 6, 7, 8}}};
    OptimizerConfig cfg;
    cfg.max_iters = 40;
    const OptimizationReport r1 = optimize(c, prob, cfg);
    for (std::size_t k = 1; k < r1.trace.size(); ++k) worst_rise = std::max(worst_rise, r1.trace[k].h - r1.trace[k - 1].h);
    cfg.noise_schedule = NoiseSchedule::stall_or_plateau;
    cfg.plateau_window = 5;
    cfg.plateau_rel_change = 0.5;
    cfg.rng_seed = 11 + static_cast<std::uint64_t>(s);
    const OptimizationReport n1 = optimize(c, prob, cfg);
    const OptimizationReport n2 = optimize(c, prob, cfg);
    deterministic = deterministic && n1.noise_events > 0 && n1.trace.size() == n2.trace.size();
    for (std::size_t k = 0; deterministic && k < n1.trace.size(); ++k)
      deterministic = n1.trace[k].h == n2.trace[k].h && n1.trace[k].event == n2.trace[k].event;
  }
  // Trace values and line-search values come from two evaluation paths of the
  // same function, which agree to rounding.
  if (worst_rise > 1e-12) failed.push_back(fmt("line-search monotonicity (rise %.2e)", worst_rise));
  if (!deterministic) failed.push_back("determinism under a fixed seed");

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string detail = failed.empty() ? "all properties hold" : "failed:";
  for (const auto& f : failed) detail += " " + f + ";";
  detail += fmt(" (min h %.1e, purity %.1e, additivity %.1e, invariance S %.1e h %.1e, rise %.1e), %.1f s", min_h,
                purity, additivity, invariance, gap_invariance, worst_rise, secs);
  return {failed.empty() && secs < 300.0, detail};
}

// ---------------------------------------------------------------------------
// Full-size table values, opt-in.

struct ReproCase {
  std::string name;
  ModelKind kind;
  int q;
  int filled;
  SmootherShape shape;
  Index radius;
  bool tr_constrained;
  double target;
};

std::vector<ReproCase> repro_cases() {
  using enum SmootherShape;
  const auto hof = ModelKind::hofstadter;
  const auto ti = ModelKind::topological_insulator;
  std::vector<ReproCase> cases;
  const double quarter[] = {0.3429, 0.2885, 0.2431, 0.2325, 0.2316};
  const double sixth_one[] = {0.3377, 0.2685, 0.2349, 0.2316, 0.2312};
  const double sixth_two[] = {0.7567, 0.6365, 0.5323, 0.4790, 0.4702};
  const double ti_kept[] = {0.6857, 0.5771, 0.4862, 0.4650, 0.4632};
  const double ti_broken[] = {0.6857, 0.3280, 0.0467, 0.0048, 0.0014};
  for (Index r = 0; r <= 4; ++r) {
    const auto i = static_cast<std::size_t>(r);
    const std::string suffix = "_R" + std::to_string(r);
    cases.push_back({"quarter" + suffix, hof, 4, 1, two_circles, r, false, quarter[i]});
    cases.push_back({"sixth_one" + suffix, hof, 6, 1, two_circles, r, false, sixth_one[i]});
    cases.push_back({"sixth_two" + suffix, hof, 6, 2, two_circles, r, false, sixth_two[i]});
    cases.push_back({"ti_kept" + suffix, ti, 4, 1, two_circles, r, true, ti_kept[i]});
    cases.push_back({"ti_broken" + suffix, ti, 4, 1, two_circles, r, false, ti_broken[i]});
  }
  cases.push_back({"sixth_two_R6", hof, 6, 2, two_circles, 6, false, 0.4641});
  cases.push_back({"quarter_joint_R4", hof, 4, 1, joint, 4, false, 0.0007});
  cases.push_back({"quarter_strip_R4", hof, 4, 1, strip, 4, false, 0.2330});
  cases.push_back({"sixth_one_joint_R4", hof, 6, 1, joint, 4, false, 0.0007});
  cases.push_back({"sixth_one_strip_R4", hof, 6, 1, strip, 4, false, 0.2321});
  cases.push_back({"sixth_two_joint_R4", hof, 6, 2, joint, 4, false, 0.0007});
  cases.push_back({"sixth_two_strip_R4", hof, 6, 2, strip, 4, false, 0.4829});
  cases.push_back({"ti_kept_joint_R4", ti, 4, 1, joint, 4, true, 0.0014});
  cases.push_back({"ti_kept_strip_R4", ti, 4, 1, strip, 4, true, 0.4660});
  cases.push_back({"ti_broken_joint_R4", ti, 4, 1, joint, 4, false, 0.0014});
  cases.push_back({"ti_broken_strip_R4", ti, 4, 1, strip, 4, false, 0.4656});
  return cases;
}

bool run_repro(const std::string& only) {
  bool all = true;
  int ran = 0;
  for (const auto& rc : repro_cases()) {
    if (!only.empty() && rc.name != only) continue;
    ++ran;
    RunConfig c = base_config(rc.kind, 24, rc.shape, rc.radius);
    c.q = rc.q;
    c.mu = rc.q == 4 ? 2.0 : 0.0;
    c.filled_bands = rc.filled;
    c.optimizer.max_iters = 20000;
    c.optimizer.tr_constrained = rc.tr_constrained;
    if (rc.kind == ModelKind::topological_insulator && !rc.tr_constrained)
      c.optimizer.noise_schedule = NoiseSchedule::stall_or_plateau;
    const auto t0 = std::chrono::steady_clock::now();
    const RunReport r = quiet_run(c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = std::abs(r.final_h - rc.target) <= 0.005;
    all = all && pass;
    std::printf("repro %-22s %s  h = %.4f (target %.4f +- 0.005), %ld iterations, %.0f s\n", rc.name.c_str(),
                pass ? "PASS" : "FAIL", r.final_h, rc.target, static_cast<long>(r.optimization.iterations), secs);
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::printf("repro: no case named '%s'\n", only.c_str());
    return false;
  }
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  bool repro = false;
  std::string only;
  app.add_option("--criteria", selected, "criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 8));
  app.add_flag("--full-repro", repro, "run the full-size table values instead");
  app.add_option("--case", only, "single reproduction case");
  CLI11_PARSE(app, argc, argv);

  if (repro) return run_repro(only) ? 0 : 1;

  const std::vector<std::function<Outcome()>> criteria = {criterion_1, criterion_2, criterion_3, criterion_4,
                                                          criterion_5, criterion_6, criterion_7, criterion_8};
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8};
  bool all = true;
  for (int k : selected) {
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(k - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("criterion %d %s  %s\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
