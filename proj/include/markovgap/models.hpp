#pragma once

// Hofstadter model on the square lattice with flux 2 pi p / q per plaquette,
// layer stacks of such models, and their ground-state covariance matrices.
//
// Real-space single-particle Hamiltonian of one layer (periodic boundaries):
//   H = -t sum_{x,y} [c+_{x,y} c_{x+1,y} + e^{-i phi x} c+_{x,y} c_{x,y+1} + h.c.]
//       + mu sum n_{x,y},   phi = 2 pi p / q.
// Its magnetic Bloch form in the basis of x-momenta k_x + (n - 1) 2 pi / q is
//   h_nm = (-2t cos(k_x + (n-1) k0) + mu) d_nm - t e^{i k_y} d_{n+p,m}
//          - t e^{-i k_y} d_{n-p,m}            (indices mod q).

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "markovgap/covariance.hpp"
#include "markovgap/geometry.hpp"

namespace markovgap {

struct LayerSpec {
  int p_sign = 1;  // flux of this layer is p_sign * 2 pi p / q
  double mu = 0.0;
};

struct ModelSpec {
  int p = 1;
  int q = 4;
  double t = 1.0;
  double mu = 2.0;
  std::optional<int> filled_bands;  // overrides filling by sign of energy
  std::vector<LayerSpec> layers;    // empty means a single layer (p, mu)

  Index n_layers() const { return layers.empty() ? 1 : static_cast<Index>(layers.size()); }

  void validate() const {
    if (q < 1) throw ValidationError("ModelSpec: q must be >= 1");
    if (std::gcd(p, q) != 1) {
      throw ValidationError("ModelSpec: p and q must be coprime (p = " + std::to_string(p) +
                            ", q = " + std::to_string(q) + ")");
    }
    if (filled_bands && (*filled_bands < 0 || *filled_bands > q)) {
      throw ValidationError("ModelSpec: filled_bands must lie in [0, q]");
    }
    for (const auto& l : layers) {
      if (l.p_sign != 1 && l.p_sign != -1) throw ValidationError("ModelSpec: p_sign must be +-1");
    }
  }

  /// Single-layer spec of layer i.
  ModelSpec layer(Index i) const {
    if (i < 0 || i >= n_layers()) throw ValidationError("ModelSpec::layer: index out of range");
    ModelSpec s = *this;
    s.layers.clear();
    if (!layers.empty()) {
      s.p = p * layers[static_cast<std::size_t>(i)].p_sign;
      s.mu = layers[static_cast<std::size_t>(i)].mu;
    }
    return s;
  }

  double flux() const { return 2.0 * std::numbers::pi * p / q; }
  double k0() const { return 2.0 * std::numbers::pi / q; }
};

/// Hofstadter at flux 2 pi / 4 with mu = 2, lowest band filled.
inline ModelSpec hofstadter_quarter() { return ModelSpec{}; }

/// Two layers with opposite flux exchanged by time reversal.
inline ModelSpec topological_insulator() {
  ModelSpec s;
  s.layers = {{1, 2.0}, {-1, 2.0}};
  return s;
}

inline Matrix bloch_hamiltonian(const ModelSpec& spec, double kx, double ky) {
  spec.validate();
  if (spec.n_layers() != 1) throw ValidationError("bloch_hamiltonian: single-layer spec required");
  const int q = spec.q;
  const double k0 = spec.k0();
  Matrix h = Matrix::Zero(q, q);
  const auto wrap = [q](long v) { return static_cast<Index>(((v % q) + q) % q); };
  for (int n = 0; n < q; ++n) {
    h(n, n) += -2.0 * spec.t * std::cos(kx + n * k0) + spec.mu;
    h(n, wrap(n + spec.p)) += -spec.t * std::exp(kI * ky);
    h(n, wrap(n - spec.p)) += -spec.t * std::exp(-kI * ky);
  }
  return h;
}

/// Band structure of one layer on a rectangular grid of the magnetic
/// Brillouin zone, kx in [0, 2 pi / q), ky in [0, 2 pi).
struct BlochSolution {
  ModelSpec spec;
  std::vector<double> kx;  // nx values
  std::vector<double> ky;  // ny values
  std::vector<RealVector> energies;  // index ix * ny + iy, ascending
  std::vector<Matrix> vectors;       // columns are band eigenvectors V_{n,l}

  Index nx() const { return static_cast<Index>(kx.size()); }
  Index ny() const { return static_cast<Index>(ky.size()); }
  Index n_bands() const { return spec.q; }
  double k0() const { return spec.k0(); }
  std::size_t at(Index ix, Index iy) const { return static_cast<std::size_t>(ix * ny() + iy); }
};

inline BlochSolution solve_bands(const ModelSpec& spec, Index nx, Index ny) {
  spec.validate();
  if (nx < 1 || ny < 1) throw ValidationError("solve_bands: grid sizes must be positive");
  BlochSolution sol;
  sol.spec = spec.layer(0);
  for (Index i = 0; i < nx; ++i) sol.kx.push_back(spec.k0() * static_cast<double>(i) / nx);
  for (Index j = 0; j < ny; ++j) sol.ky.push_back(2.0 * std::numbers::pi * static_cast<double>(j) / ny);
  sol.energies.resize(static_cast<std::size_t>(nx * ny));
  sol.vectors.resize(static_cast<std::size_t>(nx * ny));
  for (Index i = 0; i < nx; ++i)
    for (Index j = 0; j < ny; ++j) {
      const auto e = linalg::eigh(bloch_hamiltonian(sol.spec, sol.kx[i], sol.ky[j]));
      sol.energies[sol.at(i, j)] = e.values;
      sol.vectors[sol.at(i, j)] = e.vectors;
    }
  return sol;
}

/// grid_n samples per direction.
inline BlochSolution solve_bands(const ModelSpec& spec, Index grid_n) {
  if (grid_n < 2) throw ValidationError("solve_bands: grid_n must be >= 2");
  return solve_bands(spec, grid_n, grid_n);
}

inline void check_lattice(const ModelSpec& spec, const Lattice& lat) {
  spec.validate();
  if (lat.width % spec.q != 0) {
    throw ValidationError("lattice width " + std::to_string(lat.width) +
                          " is not divisible by q = " + std::to_string(spec.q));
  }
  if (lat.layers != spec.n_layers()) {
    throw ValidationError("lattice has " + std::to_string(lat.layers) + " layers but the model has " +
                          std::to_string(spec.n_layers()));
  }
}

/// Exactly the momenta allowed on the periodic lattice.
inline BlochSolution solve_bands(const ModelSpec& spec, const Lattice& lat) {
  check_lattice(spec.layer(0), Lattice(lat.width, lat.height));
  return solve_bands(spec, lat.width / spec.q, lat.height);
}

/// Occupations per band at one k point.
inline std::vector<bool> occupied_bands(const ModelSpec& spec, const RealVector& energies) {
  std::vector<bool> occ(static_cast<std::size_t>(energies.size()), false);
  for (Index l = 0; l < energies.size(); ++l) {
    occ[static_cast<std::size_t>(l)] =
        spec.filled_bands ? l < *spec.filled_bands : energies(l) < 0.0;
  }
  return occ;
}

/// Translation-invariant ground-state correlator of one layer,
/// <c+_{x,y} c_{x',y'}> = G(x mod q, x' - x, y' - y).
class CorrelationKernel {
 public:
  CorrelationKernel(const ModelSpec& spec, const Lattice& lat) : q_(spec.q), w_(lat.width), h_(lat.height) {
    const ModelSpec one = spec.layer(0);
    check_lattice(one, Lattice(lat.width, lat.height));
    const BlochSolution sol = solve_bands(one, lat.width / one.q, lat.height);
    const double n_sites = static_cast<double>(w_ * h_);
    values_.assign(static_cast<std::size_t>(q_ * w_ * h_), cplx{0.0, 0.0});

    // f(x0, dx, iy) = sum over kx and filled bands of conj(w(x0)) w(x0 + dx),
    // w_l(x) = sum_n V_nl e^{i K_n x}, K_n = kx + n k0.
    std::vector<cplx> f(static_cast<std::size_t>(q_ * w_ * h_), cplx{0.0, 0.0});
    Vector wave(w_);
    for (Index ix = 0; ix < sol.nx(); ++ix)
      for (Index iy = 0; iy < sol.ny(); ++iy) {
        const std::size_t k = sol.at(ix, iy);
        const auto occ = occupied_bands(one, sol.energies[k]);
        const Matrix& v = sol.vectors[k];
        for (Index l = 0; l < q_; ++l) {
          if (!occ[static_cast<std::size_t>(l)]) continue;
          for (Index x = 0; x < w_; ++x) {
            cplx s{0.0, 0.0};
            for (Index n = 0; n < q_; ++n) {
              const double kn = sol.kx[ix] + static_cast<double>(n) * one.k0();
              s += v(n, l) * std::exp(kI * (kn * static_cast<double>(x)));
            }
            wave(x) = s;
          }
          for (Index x0 = 0; x0 < q_; ++x0) {
            const cplx c0 = std::conj(wave(x0));
            for (Index dx = 0; dx < w_; ++dx) {
              f[index(x0, dx, iy)] += c0 * wave((x0 + dx) % w_);
            }
          }
        }
      }

    // Fourier transform over ky.
    for (Index x0 = 0; x0 < q_; ++x0)
      for (Index dx = 0; dx < w_; ++dx)
        for (Index dy = 0; dy < h_; ++dy) {
          cplx s{0.0, 0.0};
          for (Index iy = 0; iy < h_; ++iy) {
            s += std::exp(kI * (sol.ky[static_cast<std::size_t>(iy)] * static_cast<double>(dy))) *
                 f[index(x0, dx, iy)];
          }
          values_[index(x0, dx, dy)] = s / n_sites;
        }
  }

  cplx operator()(Index x, Index y, Index x2, Index y2) const {
    const Index dx = ((x2 - x) % w_ + w_) % w_;
    const Index dy = ((y2 - y) % h_ + h_) % h_;
    return values_[index(x % q_, dx, dy)];
  }

 private:
  std::size_t index(Index x0, Index dx, Index dy) const {
    return static_cast<std::size_t>((x0 * w_ + dx) * h_ + dy);
  }

  Index q_, w_, h_;
  std::vector<cplx> values_;
};

/// Ground-state covariance restricted to `mask`, in mask order. Layers are
/// uncorrelated; each uses its own kernel.
inline Matrix covariance_submatrix(const ModelSpec& spec, const Lattice& lat, const ModeMask& mask) {
  check_lattice(spec, lat);
  mask.check_within(lat.n_modes());
  std::vector<CorrelationKernel> kernels;
  for (Index l = 0; l < spec.n_layers(); ++l) kernels.emplace_back(spec.layer(l), lat);
  const Index n = static_cast<Index>(mask.size());
  std::vector<Lattice::Site> sites;
  sites.reserve(mask.size());
  for (Index m : mask) sites.push_back(lat.site_of(m));
  Matrix c = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const auto& si = sites[static_cast<std::size_t>(i)];
      const auto& sj = sites[static_cast<std::size_t>(j)];
      if (si.layer != sj.layer) continue;
      c(i, j) = kernels[static_cast<std::size_t>(si.layer)](si.x, si.y, sj.x, sj.y);
    }
  return linalg::hermitian_part(c);
}

inline CovarianceMatrix covariance_real_space(const ModelSpec& spec, const Lattice& lat) {
  return CovarianceMatrix(covariance_submatrix(spec, lat, ModeMask::range(0, lat.n_modes())));
}

/// Real-space single-particle Hamiltonian of a single-layer spec, H in
/// sum_ij c+_i H_ij c_j.
inline Matrix real_space_hamiltonian(const ModelSpec& spec, const Lattice& lat) {
  const ModelSpec one = spec.layer(0);
  check_lattice(one, Lattice(lat.width, lat.height));
  const Lattice plane(lat.width, lat.height);
  Matrix h = Matrix::Zero(plane.n_modes(), plane.n_modes());
  const double phi = one.flux();
  for (Index y = 0; y < lat.height; ++y)
    for (Index x = 0; x < lat.width; ++x) {
      const Index i = plane.mode_of(x, y);
      const Index right = plane.mode_of((x + 1) % lat.width, y);
      const Index up = plane.mode_of(x, (y + 1) % lat.height);
      h(i, right) += -one.t;
      h(right, i) += -one.t;
      const cplx hop = -one.t * std::exp(-kI * (phi * static_cast<double>(x)));
      h(i, up) += hop;
      h(up, i) += std::conj(hop);
      h(i, i) += one.mu;
    }
  return h;
}

/// Covariance by full diagonalization of the real-space Hamiltonian. Used as
/// an independent check of the Fourier construction on small lattices.
inline Matrix covariance_by_diagonalization(const ModelSpec& spec, const Lattice& lat) {
  const ModelSpec one = spec.layer(0);
  const auto e = linalg::eigh(real_space_hamiltonian(one, lat));
  Index filled = 0;
  if (one.filled_bands) {
    filled = *one.filled_bands * lat.width * lat.height / one.q;
  } else {
    while (filled < e.values.size() && e.values(filled) < 0.0) ++filled;
  }
  const Matrix occ = e.vectors.leftCols(filled);
  return (occ * occ.adjoint()).conjugate();
}

/// Block-diagonal covariance over layers, in layer-major mode order.
inline Matrix stack(const std::vector<Matrix>& layers) {
  Matrix out(0, 0);
  for (const auto& c : layers) {
    if (!layers.empty() && c.rows() != layers.front().rows()) {
      throw ValidationError("stack: layers have different dimensions");
    }
    out = direct_sum(out, c);
  }
  return out;
}

struct ChernResult {
  int chern = 0;
  double raw = 0.0;      // sum of plaquette phases / 2 pi
  double residue = 0.0;  // |raw - chern|
  double min_gap = 0.0;  // smallest energy separation between the band set and the rest
};

inline constexpr double kChernResidueMax = 0.01;
inline constexpr double kGapMin = 1e-6;

/// Lattice field-strength Chern number of a set of bands: the sum over
/// plaquettes of arg(U_x U_y U_x^-1 U_y^-1) / 2 pi with U the determinant links.
inline ChernResult chern_number(const BlochSolution& sol, const std::vector<Index>& band_set) {
  if (band_set.empty()) throw ValidationError("chern_number: empty band set");
  const Index q = sol.n_bands();
  std::vector<bool> in_set(static_cast<std::size_t>(q), false);
  for (Index b : band_set) {
    if (b < 0 || b >= q) throw ValidationError("chern_number: band index out of range");
    in_set[static_cast<std::size_t>(b)] = true;
  }

  ChernResult out;
  out.min_gap = std::numeric_limits<double>::infinity();
  for (const auto& e : sol.energies)
    for (Index i = 0; i < q; ++i)
      for (Index j = 0; j < q; ++j)
        if (in_set[static_cast<std::size_t>(i)] && !in_set[static_cast<std::size_t>(j)])
          out.min_gap = std::min(out.min_gap, std::abs(e(i) - e(j)));
  if (out.min_gap < kGapMin) {
    throw NumericError("chern_number: band set is not gapped from the other bands (gap " +
                       std::to_string(out.min_gap) + ")");
  }

  const Index nx = sol.nx(), ny = sol.ny();
  std::vector<Index> cols(band_set.begin(), band_set.end());
  auto frame = [&](Index ix, Index iy) -> Matrix {
    iy = ((iy % ny) + ny) % ny;
    if (ix < nx) return sol.vectors[sol.at(ix, iy)](Eigen::all, cols);
    // kx + k0 is equivalent to kx with the n index shifted by one.
    const Matrix v = sol.vectors[sol.at(ix - nx, iy)](Eigen::all, cols);
    Matrix shifted(v.rows(), v.cols());
    for (Index n = 0; n < q; ++n) shifted.row(n) = v.row((n + 1) % q);
    return shifted;
  };
  auto link = [](const Matrix& a, const Matrix& b) {
    const cplx d = (a.adjoint() * b).determinant();
    return d / std::abs(d);
  };

  double total = 0.0;
  for (Index ix = 0; ix < nx; ++ix)
    for (Index iy = 0; iy < ny; ++iy) {
      const Matrix v00 = frame(ix, iy);
      const Matrix v10 = frame(ix + 1, iy);
      const Matrix v11 = frame(ix + 1, iy + 1);
      const Matrix v01 = frame(ix, iy + 1);
      const cplx loop = link(v00, v10) * link(v10, v11) * link(v11, v01) * link(v01, v00);
      total += std::arg(loop);
    }
  out.raw = total / (2.0 * std::numbers::pi);
  out.chern = static_cast<int>(std::lround(out.raw));
  out.residue = std::abs(out.raw - out.chern);
  if (out.residue >= kChernResidueMax) {
    throw NumericError("chern_number: rounding residue " + std::to_string(out.residue) +
                       " too large; refine the k grid");
  }
  return out;
}

/// Lowest `n` bands.
inline std::vector<Index> lowest_bands(Index n) {
  std::vector<Index> out;
  for (Index i = 0; i < n; ++i) out.push_back(i);
  return out;
}

/// Number of bands filled by the spec, uniform across the k grid.
inline Index filled_band_count(const BlochSolution& sol) {
  if (sol.spec.filled_bands) return *sol.spec.filled_bands;
  Index lo = sol.n_bands(), hi = 0;
  for (const auto& e : sol.energies) {
    Index n = 0;
    while (n < e.size() && e(n) < 0.0) ++n;
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  if (lo != hi) throw NumericError("filled_band_count: chemical potential lies inside a band");
  return lo;
}

/// Single-particle part S of the antiunitary T = S K on a two-layer lattice,
/// (c_up, c_down) -> (c_down, -c_up) site by site.
inline Matrix tr_operator(const Lattice& lat) {
  if (lat.layers != 2) throw ValidationError("tr_operator: exactly two layers required");
  const Index n = lat.sites_per_layer();
  Matrix s = Matrix::Zero(2 * n, 2 * n);
  s.bottomLeftCorner(n, n) = Matrix::Identity(n, n);
  s.topRightCorner(n, n) = -Matrix::Identity(n, n);
  return s;
}

/// S restricted to `mask`; the mask must contain both layers of each site.
inline Matrix tr_operator(const Lattice& lat, const ModeMask& mask) {
  if (lat.layers != 2) throw ValidationError("tr_operator: exactly two layers required");
  const Index n = lat.sites_per_layer();
  const Index m = static_cast<Index>(mask.size());
  Matrix s = Matrix::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    const Index mode = mask[static_cast<std::size_t>(i)];
    const bool up = mode < n;
    const auto partner = mask.position_of(up ? mode + n : mode - n);
    if (!partner) throw ValidationError("tr_operator: support is not closed under layer exchange");
    // column i (mode) maps to its partner with sign +1 for up, -1 for down
    s(static_cast<Index>(*partner), i) = up ? 1.0 : -1.0;
  }
  return s;
}


}  // namespace markovgap
