#pragma once

// Autonomous dynamical systems du/dt = f(t, u) and fixed-step integration.
//
// Three schemes are provided:
//   RK4         classical Runge-Kutta on the full right-hand side;
//   ETDRK4      exponential time differencing (Cox-Matthews / Kassam-Trefethen)
//               for systems with a stiff linear part;
//   IMEX_CNAB2  Crank-Nicolson on the linear part, Adams-Bashforth-2 on the rest.
//
// The stiff linear part is described by its eigenvalues in an orthonormal,
// self-inverse basis (the identity for spectral models, the discrete sine
// basis for finite differences with odd reflection). The exponential and
// implicit schemes step in that basis.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "kslyap/detail/fftw.hpp"
#include "kslyap/errors.hpp"
#include "kslyap/random.hpp"

namespace kslyap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// f(t, u) written into `out` (already sized to dim).
using RhsFunction = std::function<void(double t, const Vector& u, Vector& out)>;

enum class Scheme { ETDRK4, IMEX_CNAB2, RK4 };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::ETDRK4: return "etdrk4";
    case Scheme::IMEX_CNAB2: return "cnab2";
    case Scheme::RK4: return "rk4";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "etdrk4") return Scheme::ETDRK4;
  if (s == "cnab2") return Scheme::IMEX_CNAB2;
  if (s == "rk4") return Scheme::RK4;
  throw InvalidArgument("unknown scheme '" + std::string(s) + "'");
}

struct IntegratorConfig {
  double dt = 0.05;
  Scheme scheme = Scheme::ETDRK4;
  /// Max-norm of the working state above which stepping aborts.
  double blowup_threshold = 1e6;
};

/// Orthonormal self-inverse change of basis.
class EigenBasis {
 public:
  enum class Kind { Identity, Sine };

  EigenBasis() = default;

  static EigenBasis identity() { return {}; }

  /// Orthonormal DST-I on n points; columns are sin(pi j k / (n+1)).
  static EigenBasis sine(std::size_t n) {
    EigenBasis b;
    b.kind_ = Kind::Sine;
    b.dst_ = std::make_shared<const detail::SineTransform>(n);
    b.scale_ = 1.0 / std::sqrt(2.0 * static_cast<double>(n + 1));
    return b;
  }

  Kind kind() const noexcept { return kind_; }
  bool is_identity() const noexcept { return kind_ == Kind::Identity; }

  /// out = S in. S is symmetric and S S = I.
  void apply(const Vector& in, Vector& out) const {
    if (is_identity()) {
      out = in;
      return;
    }
    const std::size_t n = dst_->size();
    detail::RealBuffer a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = in[static_cast<Eigen::Index>(i)];
    dst_->execute(a, b);
    out.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i)] = b[i] * scale_;
  }

 private:
  Kind kind_ = Kind::Identity;
  std::shared_ptr<const detail::SineTransform> dst_;
  double scale_ = 1.0;
};

/// Linear operator A = S diag(eigenvalues) S.
struct StiffLinearPart {
  Vector eigenvalues;
  EigenBasis basis;

  void apply(const Vector& u, Vector& out) const {
    if (basis.is_identity()) {
      out = eigenvalues.cwiseProduct(u);
      return;
    }
    Vector v;
    basis.apply(u, v);
    v.array() *= eigenvalues.array();
    basis.apply(v, out);
  }
};

struct System {
  std::size_t dim = 0;
  RhsFunction rhs;
  /// Present for systems meant to be stepped with ETDRK4 / IMEX_CNAB2.
  std::optional<StiffLinearPart> stiff_linear_part;
  /// rhs minus the stiff linear part; derived from rhs when left empty.
  RhsFunction nonlinear;
  /// Seeded initial-state sampler; i.i.d. standard normal when left empty.
  std::function<Vector(std::uint64_t seed)> initial_state;
  std::string label;

  Vector sample_initial(std::uint64_t seed) const {
    return initial_state ? initial_state(seed) : sample_normal_vector(dim, seed);
  }

  Vector evaluate(double t, const Vector& u) const {
    Vector out(static_cast<Eigen::Index>(dim));
    rhs(t, u, out);
    return out;
  }
};

namespace detail {

inline void check_state(const System& sys, const Vector& u, const char* what) {
  if (static_cast<std::size_t>(u.size()) != sys.dim)
    throw InvalidArgument(std::string(what) + ": state length " + std::to_string(u.size()) +
                          " does not match system dimension " + std::to_string(sys.dim));
}

/// phi-function weights for one ETDRK4 step of size h.
struct Etdrk4Coefficients {
  Vector e, e2, q, f1, f2, f3;

  Etdrk4Coefficients(const Vector& lambda, double h) {
    constexpr int kContour = 32;
    const Eigen::Index n = lambda.size();
    e.resize(n), e2.resize(n), q.resize(n), f1.resize(n), f2.resize(n), f3.resize(n);
    std::array<std::complex<double>, kContour> roots;
    for (int k = 0; k < kContour; ++k)
      roots[k] = std::polar(1.0, std::numbers::pi * (k + 0.5) / kContour);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double hl = h * lambda[i];
      e[i] = std::exp(hl);
      e2[i] = std::exp(hl / 2);
      std::complex<double> sq{}, s1{}, s2{}, s3{};
      for (const auto& r : roots) {
        const std::complex<double> z = hl + r;
        const std::complex<double> ez = std::exp(z);
        const std::complex<double> z3 = z * z * z;
        sq += (std::exp(z / 2.0) - 1.0) / z;
        s1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
        s2 += (2.0 + z + ez * (z - 2.0)) / z3;
        s3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
      }
      q[i] = h * sq.real() / kContour;
      f1[i] = h * s1.real() / kContour;
      f2[i] = h * s2.real() / kContour;
      f3[i] = h * s3.real() / kContour;
    }
  }
};

}  // namespace detail

/// Fixed-step integrator bound to one system and configuration. Stateless
/// between calls to advance(), so a single instance may be shared by threads.
class Integrator {
 public:
  Integrator(const System& system, IntegratorConfig cfg) : sys_(&system), cfg_(cfg) {
    if (!(cfg.dt > 0) || !std::isfinite(cfg.dt))
      throw InvalidArgument("integrator: dt must be positive");
    if (!system.rhs) throw InvalidArgument("integrator: system has no right-hand side");
    if (cfg.scheme != Scheme::RK4) {
      if (!system.stiff_linear_part)
        throw InvalidArgument("integrator: " + std::string(to_string(cfg.scheme)) +
                              " requires a stiff linear part");
      if (static_cast<std::size_t>(system.stiff_linear_part->eigenvalues.size()) != system.dim)
        throw InvalidArgument("integrator: stiff linear part has wrong length");
      if (cfg.scheme == Scheme::ETDRK4)
        etd_ = std::make_shared<const detail::Etdrk4Coefficients>(
            system.stiff_linear_part->eigenvalues, cfg.dt);
    }
  }

  const IntegratorConfig& config() const noexcept { return cfg_; }
  const System& system() const noexcept { return *sys_; }

  /// u(t1) from u(t0). A trailing partial step is taken when (t1 - t0)/dt is
  /// not an integer (relative tolerance 1e-9).
  Vector advance(const Vector& u0, double t0, double t1) const {
    detail::check_state(*sys_, u0, "integrate");
    if (!(t1 >= t0)) throw InvalidArgument("integrate: t1 must not precede t0");
    const double dt = cfg_.dt;
    const double ratio = (t1 - t0) / dt;
    auto full = static_cast<long long>(std::llround(ratio));
    double partial = 0.0;
    if (std::abs(ratio - static_cast<double>(full)) > 1e-9 * std::max(1.0, ratio)) {
      full = static_cast<long long>(std::floor(ratio));
      partial = (t1 - t0) - static_cast<double>(full) * dt;
    }

    switch (cfg_.scheme) {
      case Scheme::RK4: return run_rk4(u0, t0, full, partial);
      case Scheme::ETDRK4: return run_etdrk4(u0, t0, full, partial);
      case Scheme::IMEX_CNAB2: return run_cnab2(u0, t0, full, partial);
    }
    return u0;
  }

 private:
  void guard(const Vector& v, double t) const {
    if (!v.allFinite()) throw IntegrationBlowUp(t, "non-finite state");
    if (v.cwiseAbs().maxCoeff() > cfg_.blowup_threshold)
      throw IntegrationBlowUp(t, "state max-norm exceeded " + std::to_string(cfg_.blowup_threshold));
  }

  // Nonlinear part in working (eigen) coordinates.
  void nonlinear_working(double t, const Vector& v, Vector& out) const {
    const auto& lin = *sys_->stiff_linear_part;
    const bool ident = lin.basis.is_identity();
    Vector u;
    if (ident) {
      u = v;
    } else {
      lin.basis.apply(v, u);
    }
    Vector nu(static_cast<Eigen::Index>(sys_->dim));
    if (sys_->nonlinear) {
      sys_->nonlinear(t, u, nu);
    } else {
      sys_->rhs(t, u, nu);
      Vector au;
      lin.apply(u, au);
      nu -= au;
    }
    if (ident) {
      out = std::move(nu);
    } else {
      lin.basis.apply(nu, out);
    }
  }

  Vector run_rk4(Vector u, double t0, long long full, double partial) const {
    const auto n = static_cast<Eigen::Index>(sys_->dim);
    Vector k1(n), k2(n), k3(n), k4(n), tmp(n);
    auto step = [&](double t, double h) {
      sys_->rhs(t, u, k1);
      tmp = u + (h / 2) * k1;
      sys_->rhs(t + h / 2, tmp, k2);
      tmp = u + (h / 2) * k2;
      sys_->rhs(t + h / 2, tmp, k3);
      tmp = u + h * k3;
      sys_->rhs(t + h, tmp, k4);
      u += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
      guard(u, t + h);
    };
    for (long long s = 0; s < full; ++s) step(t0 + static_cast<double>(s) * cfg_.dt, cfg_.dt);
    if (partial > 0) step(t0 + static_cast<double>(full) * cfg_.dt, partial);
    return u;
  }

  Vector to_working(const Vector& u) const {
    const auto& basis = sys_->stiff_linear_part->basis;
    if (basis.is_identity()) return u;
    Vector v;
    basis.apply(u, v);
    return v;
  }

  Vector run_etdrk4(const Vector& u0, double t0, long long full, double partial) const {
    const auto n = static_cast<Eigen::Index>(sys_->dim);
    Vector v = to_working(u0);
    Vector nv(n), na(n), nb(n), nc(n), a(n), b(n), c(n);
    auto step = [&](const detail::Etdrk4Coefficients& k, double t, double h) {
      nonlinear_working(t, v, nv);
      a = k.e2.cwiseProduct(v) + k.q.cwiseProduct(nv);
      nonlinear_working(t + h / 2, a, na);
      b = k.e2.cwiseProduct(v) + k.q.cwiseProduct(na);
      nonlinear_working(t + h / 2, b, nb);
      c = k.e2.cwiseProduct(a) + k.q.cwiseProduct(2 * nb - nv);
      nonlinear_working(t + h, c, nc);
      v = k.e.cwiseProduct(v) + k.f1.cwiseProduct(nv) + 2 * k.f2.cwiseProduct(na + nb) +
          k.f3.cwiseProduct(nc);
      guard(v, t + h);
    };
    for (long long s = 0; s < full; ++s) step(*etd_, t0 + static_cast<double>(s) * cfg_.dt, cfg_.dt);
    if (partial > 0) {
      const detail::Etdrk4Coefficients last(sys_->stiff_linear_part->eigenvalues, partial);
      step(last, t0 + static_cast<double>(full) * cfg_.dt, partial);
    }
    return from_working(v);
  }

  // The Adams-Bashforth history starts afresh on every call: the first step
  // extrapolates with a constant nonlinear term.
  Vector run_cnab2(const Vector& u0, double t0, long long full, double partial) const {
    const auto n = static_cast<Eigen::Index>(sys_->dim);
    const Vector& lambda = sys_->stiff_linear_part->eigenvalues;
    Vector v = to_working(u0);
    Vector ncur(n), nprev(n);
    double hprev = 0.0;
    auto step = [&](double t, double h) {
      nonlinear_working(t, v, ncur);
      const double w = hprev > 0 ? h / (2 * hprev) : 0.0;
      Vector extrap = (1 + w) * ncur - w * nprev;
      const Eigen::ArrayXd half = 0.5 * h * lambda.array();
      v = ((1 + half) * v.array() + h * extrap.array()) / (1 - half);
      guard(v, t + h);
      std::swap(nprev, ncur);
      hprev = h;
    };
    for (long long s = 0; s < full; ++s) step(t0 + static_cast<double>(s) * cfg_.dt, cfg_.dt);
    if (partial > 0) step(t0 + static_cast<double>(full) * cfg_.dt, partial);
    return from_working(v);
  }

  Vector from_working(const Vector& v) const { return to_working(v); }

  const System* sys_;
  IntegratorConfig cfg_;
  std::shared_ptr<const detail::Etdrk4Coefficients> etd_;
};

/// u(t1) given u(t0) = u0.
inline Vector integrate(const System& system, const Vector& u0, double t0, double t1,
                        const IntegratorConfig& cfg) {
  return Integrator(system, cfg).advance(u0, t0, t1);
}

/// Time average of the flow divergence (trace of the Jacobian) along the
/// trajectory from u0. The trace is formed by central differences with step
/// 1e-6 per coordinate and sampled at t0, t0+dt, ... before t0+horizon; a
/// zero horizon returns the trace at u0.
inline double jacobian_trace_average(const System& system, const Vector& u0, double horizon,
                                     const IntegratorConfig& cfg) {
  detail::check_state(system, u0, "jacobian_trace_average");
  if (!(horizon >= 0)) throw InvalidArgument("jacobian_trace_average: horizon must be >= 0");
  constexpr double kStep = 1e-6;
  const Integrator integ(system, cfg);
  const auto n = static_cast<Eigen::Index>(system.dim);
  Vector fp(n), fm(n), probe(n);

  auto trace_at = [&](double t, const Vector& u) {
    double tr = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      probe = u;
      probe[i] += kStep;
      system.rhs(t, probe, fp);
      probe[i] = u[i] - kStep;
      system.rhs(t, probe, fm);
      tr += (fp[i] - fm[i]) / (2 * kStep);
    }
    return tr;
  };

  const auto steps = std::max<long long>(1, std::llround(std::floor(horizon / cfg.dt + 1e-9)));
  Vector u = u0;
  double sum = 0.0;
  for (long long s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * cfg.dt;
    sum += trace_at(t, u);
    if (s + 1 < steps) u = integ.advance(u, t, t + cfg.dt);
  }
  return sum / static_cast<double>(steps);
}

}  // namespace kslyap
