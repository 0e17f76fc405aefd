#pragma once

// Kuramoto-Sivashinsky equation  u_t + u_xxxx + u_xx + u u_x = 0  on [0, L].
//
// Periodic domains use a Fourier-Galerkin discretization. The state holds the
// mean coefficient followed by the real and then imaginary parts of the
// positive-wavenumber coefficients:
//     [ a_0, Re a_1 .. Re a_n, Im a_1 .. Im a_n ],   u(x) = sum_{|j|<=n} a_j e^{i k_j x}.
// The quadratic term is formed on a grid of M >= 3n+1 points, which removes
// all aliasing of the retained modes (the 2/3 rule).
//
// Odd-periodic domains (u = u_xx = 0 at both ends) use second-order central
// differences on the interior points x_i = i h, h = L/(n+1), with the odd
// reflection u_{-i} = -u_i supplying the ghost values. With these stencils the
// discrete fourth derivative equals the square of the discrete second
// derivative, and both are diagonal in the discrete sine basis.

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "kslyap/detail/fftw.hpp"
#include "kslyap/errors.hpp"
#include "kslyap/ode_core.hpp"
#include "kslyap/random.hpp"

namespace kslyap {

enum class BoundaryCondition { Periodic, OddPeriodic };

inline std::string_view to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::Periodic ? "periodic" : "odd";
}

inline BoundaryCondition parse_boundary_condition(std::string_view s) {
  if (s == "periodic") return BoundaryCondition::Periodic;
  if (s == "odd" || s == "odd-periodic" || s == "oddperiodic") return BoundaryCondition::OddPeriodic;
  throw InvalidArgument("unknown boundary condition '" + std::string(s) + "'");
}

struct DomainSpec {
  double L = 22.0;
  BoundaryCondition bc = BoundaryCondition::Periodic;
  double k_max_target = 9.0;
  /// Lower bound on the state dimension (e.g. the number of exponents wanted).
  std::size_t min_dim = 0;
  /// Explicit mode count (periodic) or interior point count (odd); 0 derives
  /// it from k_max_target.
  std::size_t resolution = 0;
};

/// Smallest integer >= n whose only prime factors are 2, 3 and 5.
inline std::size_t next_smooth(std::size_t n) {
  if (n <= 1) return 1;
  for (;; ++n) {
    std::size_t m = n;
    for (std::size_t p : {2u, 3u, 5u})
      while (m % p == 0) m /= p;
    if (m == 1) return n;
  }
}

struct PeriodicSpectralModel {
  double L = 0;
  std::size_t n_modes = 0;
  std::size_t grid_size = 0;    // physical points used for the product
  std::size_t dealias_cut = 0;  // highest retained mode index

  std::size_t dim() const noexcept { return 2 * n_modes + 1; }
  double wavenumber(std::size_t j) const noexcept {
    return 2 * std::numbers::pi * static_cast<double>(j) / L;
  }
  Eigen::Index re(std::size_t j) const noexcept { return static_cast<Eigen::Index>(j); }
  Eigen::Index im(std::size_t j) const noexcept { return static_cast<Eigen::Index>(n_modes + j); }
};

struct OddPeriodicFDModel {
  double L = 0;
  std::size_t n_interior = 0;
  double h = 0;

  std::size_t dim() const noexcept { return n_interior; }
};

inline void validate(const DomainSpec& spec) {
  if (!(spec.L > 0) || !std::isfinite(spec.L)) throw InvalidArgument("domain length L must be > 0");
  if (!(spec.k_max_target > 0) || !std::isfinite(spec.k_max_target))
    throw InvalidArgument("k_max_target must be > 0");
}

inline PeriodicSpectralModel periodic_model(const DomainSpec& spec) {
  validate(spec);
  PeriodicSpectralModel m;
  m.L = spec.L;
  if (spec.resolution > 0) {
    m.n_modes = spec.resolution;
  } else {
    const double need = spec.k_max_target * spec.L / (2 * std::numbers::pi);
    auto n = static_cast<std::size_t>(std::ceil(need - 1e-12));
    if (spec.min_dim > 2 * n + 1) n = spec.min_dim / 2;
    m.n_modes = next_smooth(std::max<std::size_t>(n, 1));
  }
  if (m.n_modes < 4)
    throw ResolutionTooCoarse("periodic model needs at least 4 modes, got " +
                              std::to_string(m.n_modes));
  std::size_t grid = next_smooth(3 * m.n_modes + 1);
  while (grid % 2 != 0) grid = next_smooth(grid + 1);
  m.grid_size = grid;
  m.dealias_cut = m.n_modes;
  return m;
}

inline OddPeriodicFDModel oddperiodic_model(const DomainSpec& spec) {
  validate(spec);
  OddPeriodicFDModel m;
  m.L = spec.L;
  if (spec.resolution > 0) {
    m.n_interior = spec.resolution;
  } else {
    const double need = spec.k_max_target * spec.L / std::numbers::pi;
    auto cells = static_cast<std::size_t>(std::ceil(need - 1e-12));
    cells = std::max<std::size_t>({cells, spec.min_dim + 1, 2});
    m.n_interior = next_smooth(cells) - 1;
  }
  m.h = spec.L / static_cast<double>(m.n_interior + 1);
  if (m.h > std::numbers::pi / spec.k_max_target * (1 + 1e-12))
    throw ResolutionTooCoarse("grid spacing " + std::to_string(m.h) + " exceeds pi/k_max = " +
                              std::to_string(std::numbers::pi / spec.k_max_target));
  return m;
}

/// A discretized KS equation ready for integration.
struct KsSystem {
  DomainSpec domain;
  std::variant<PeriodicSpectralModel, OddPeriodicFDModel> model;
  System system;

  std::size_t dim() const noexcept { return system.dim; }
  bool periodic() const noexcept { return domain.bc == BoundaryCondition::Periodic; }
};

namespace detail {

class PeriodicKernel {
 public:
  explicit PeriodicKernel(const PeriodicSpectralModel& m) : m_(m), fft_(m.grid_size) {}

  /// Physical values on the M-point grid.
  void to_grid(const Vector& state, RealBuffer& grid) const {
    ComplexBuffer c(fft_.spectrum_size());
    for (std::size_t j = 0; j < c.size(); ++j) c[j][0] = c[j][1] = 0.0;
    c[0][0] = state[0];
    for (std::size_t j = 1; j <= m_.n_modes; ++j) {
      c[j][0] = state[m_.re(j)];
      c[j][1] = state[m_.im(j)];
    }
    fft_.backward(c, grid);
  }

  /// -(u^2/2)_x projected onto the retained modes.
  void nonlinear(const Vector& state, Vector& out) const {
    const std::size_t M = m_.grid_size;
    RealBuffer grid(M);
    to_grid(state, grid);
    for (std::size_t i = 0; i < M; ++i) grid[i] *= grid[i];
    ComplexBuffer w(fft_.spectrum_size());
    fft_.forward(grid, w);
    const double inv = 1.0 / static_cast<double>(M);
    out.resize(static_cast<Eigen::Index>(m_.dim()));
    out[0] = 0.0;
    for (std::size_t j = 1; j <= m_.n_modes; ++j) {
      const double half_k = 0.5 * m_.wavenumber(j);
      // -(i k / 2) (wr + i wi)
      out[m_.re(j)] = half_k * w[j][1] * inv;
      out[m_.im(j)] = -half_k * w[j][0] * inv;
    }
  }

  const PeriodicSpectralModel& model() const noexcept { return m_; }

 private:
  PeriodicSpectralModel m_;
  RealFft fft_;
};

class OddPeriodicKernel {
 public:
  explicit OddPeriodicKernel(const OddPeriodicFDModel& m) : m_(m) {}

  // Interior values plus two ghost layers on each side.
  std::vector<double> padded(const Vector& u) const {
    const std::size_t n = m_.n_interior;
    std::vector<double> p(n + 4, 0.0);
    for (std::size_t i = 0; i < n; ++i) p[i + 2] = u[static_cast<Eigen::Index>(i)];
    // p[1] = u_0 = 0, p[n+2] = u_{n+1} = 0 already; odd reflection for the outer ghosts.
    p[0] = -p[2];
    p[n + 3] = -p[n + 1];
    return p;
  }

  void linear(const Vector& u, Vector& out) const {
    const std::size_t n = m_.n_interior;
    const auto p = padded(u);
    const double h2 = m_.h * m_.h, h4 = h2 * h2;
    out.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = i + 2;
      const double uxx = (p[c - 1] - 2 * p[c] + p[c + 1]) / h2;
      const double uxxxx = (p[c - 2] - 4 * p[c - 1] + 6 * p[c] - 4 * p[c + 1] + p[c + 2]) / h4;
      out[static_cast<Eigen::Index>(i)] = -uxx - uxxxx;
    }
  }

  void nonlinear(const Vector& u, Vector& out) const {
    const std::size_t n = m_.n_interior;
    const auto p = padded(u);
    const double inv = 1.0 / (4 * m_.h);
    out.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = i + 2;
      out[static_cast<Eigen::Index>(i)] = -(p[c + 1] * p[c + 1] - p[c - 1] * p[c - 1]) * inv;
    }
  }

 private:
  OddPeriodicFDModel m_;
};

}  // namespace detail

/// Growth rates k^2 - k^4 of the linearized periodic equation, in state layout.
inline Vector periodic_linear_rates(const PeriodicSpectralModel& m) {
  Vector lam(static_cast<Eigen::Index>(m.dim()));
  lam[0] = 0.0;
  for (std::size_t j = 1; j <= m.n_modes; ++j) {
    const double k2 = m.wavenumber(j) * m.wavenumber(j);
    lam[m.re(j)] = lam[m.im(j)] = k2 - k2 * k2;
  }
  return lam;
}

/// Eigenvalues mu - mu^2 of the finite-difference linear operator on the
/// sine modes k = 1..n, where mu = (4/h^2) sin^2(k pi / (2(n+1))).
inline Vector oddperiodic_linear_rates(const OddPeriodicFDModel& m) {
  const auto n = static_cast<Eigen::Index>(m.n_interior);
  Vector lam(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double s = std::sin(static_cast<double>(k + 1) * std::numbers::pi /
                              (2.0 * static_cast<double>(m.n_interior + 1)));
    const double mu = 4.0 / (m.h * m.h) * s * s;
    lam[k] = mu - mu * mu;
  }
  return lam;
}

inline Vector sample_initial_condition(const DomainSpec& spec, std::uint64_t seed);

inline KsSystem make_periodic_ks(const DomainSpec& spec) {
  if (spec.bc != BoundaryCondition::Periodic)
    throw InvalidArgument("make_periodic_ks: domain is not periodic");
  const auto m = periodic_model(spec);
  auto kernel = std::make_shared<const detail::PeriodicKernel>(m);
  auto lin = std::make_shared<const Vector>(periodic_linear_rates(m));

  System sys;
  sys.dim = m.dim();
  sys.label = "ks-periodic L=" + std::to_string(spec.L);
  sys.nonlinear = [kernel](double, const Vector& u, Vector& out) { kernel->nonlinear(u, out); };
  sys.rhs = [kernel, lin](double, const Vector& u, Vector& out) {
    kernel->nonlinear(u, out);
    out += lin->cwiseProduct(u);
  };
  sys.stiff_linear_part = StiffLinearPart{*lin, EigenBasis::identity()};
  sys.initial_state = [spec](std::uint64_t seed) { return sample_initial_condition(spec, seed); };
  return KsSystem{spec, m, std::move(sys)};
}

inline KsSystem make_oddperiodic_ks(const DomainSpec& spec) {
  if (spec.bc != BoundaryCondition::OddPeriodic)
    throw InvalidArgument("make_oddperiodic_ks: domain is not odd-periodic");
  const auto m = oddperiodic_model(spec);
  auto kernel = std::make_shared<const detail::OddPeriodicKernel>(m);

  System sys;
  sys.dim = m.dim();
  sys.label = "ks-odd L=" + std::to_string(spec.L);
  sys.nonlinear = [kernel](double, const Vector& u, Vector& out) { kernel->nonlinear(u, out); };
  sys.rhs = [kernel](double, const Vector& u, Vector& out) {
    Vector lin;
    kernel->linear(u, lin);
    kernel->nonlinear(u, out);
    out += lin;
  };
  sys.stiff_linear_part = StiffLinearPart{oddperiodic_linear_rates(m), EigenBasis::sine(m.n_interior)};
  sys.initial_state = [spec](std::uint64_t seed) { return sample_initial_condition(spec, seed); };
  return KsSystem{spec, m, std::move(sys)};
}

inline KsSystem make_ks(const DomainSpec& spec) {
  return spec.bc == BoundaryCondition::Periodic ? make_periodic_ks(spec) : make_oddperiodic_ks(spec);
}

inline std::size_t state_dimension(const DomainSpec& spec) {
  return spec.bc == BoundaryCondition::Periodic ? periodic_model(spec).dim()
                                                : oddperiodic_model(spec).dim();
}

/// i.i.d. standard normal state components.
inline Vector sample_initial_condition(const DomainSpec& spec, std::uint64_t seed) {
  return sample_normal_vector(state_dimension(spec), seed);
}

/// Spatial mean of u, i.e. the zero-mode coefficient.
inline double field_mean(const Vector& state, const PeriodicSpectralModel& model) {
  if (static_cast<std::size_t>(state.size()) != model.dim())
    throw InvalidArgument("field_mean: state length does not match model");
  return state[0];
}

/// Sampled physical field. Periodic: the M-point product grid on [0, L).
/// Odd-periodic: all grid points on [0, L] including the zero boundary values.
struct FieldSamples {
  std::vector<double> x;
  std::vector<double> u;
};

inline FieldSamples physical_field(const KsSystem& ks, const Vector& state) {
  FieldSamples f;
  if (const auto* pm = std::get_if<PeriodicSpectralModel>(&ks.model)) {
    const detail::PeriodicKernel kernel(*pm);
    detail::RealBuffer grid(pm->grid_size);
    kernel.to_grid(state, grid);
    const double dx = pm->L / static_cast<double>(pm->grid_size);
    for (std::size_t i = 0; i < pm->grid_size; ++i) {
      f.x.push_back(static_cast<double>(i) * dx);
      f.u.push_back(grid[i]);
    }
  } else {
    const auto& om = std::get<OddPeriodicFDModel>(ks.model);
    const std::size_t n = om.n_interior;
    for (std::size_t i = 0; i <= n + 1; ++i) {
      f.x.push_back(static_cast<double>(i) * om.h);
      f.u.push_back(i == 0 || i == n + 1 ? 0.0 : state[static_cast<Eigen::Index>(i - 1)]);
    }
  }
  return f;
}

}  // namespace kslyap
