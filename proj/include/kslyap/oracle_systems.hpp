#pragma once

// Small systems with known Lyapunov structure, used to validate the engine.

#include <string>
#include <vector>

#include "kslyap/ode_core.hpp"

namespace kslyap {

/// du/dt = diag(rates) u. Exponents are the rates; the default initial state
/// is the origin so trajectories stay bounded.
inline System make_diagonal_linear(const std::vector<double>& rates) {
  Vector lam = Eigen::Map<const Vector>(rates.data(), static_cast<Eigen::Index>(rates.size()));
  System sys;
  sys.dim = rates.size();
  sys.label = "diaglin";
  sys.rhs = [lam](double, const Vector& u, Vector& out) { out = lam.cwiseProduct(u); };
  sys.nonlinear = [](double, const Vector& u, Vector& out) { out.setZero(u.size()); };
  sys.stiff_linear_part = StiffLinearPart{lam, EigenBasis::identity()};
  sys.initial_state = [n = rates.size()](std::uint64_t) {
    return Vector::Zero(static_cast<Eigen::Index>(n)).eval();
  };
  return sys;
}

/// Lorenz (1963). The divergence is -(sigma + 1 + beta) everywhere.
inline System make_lorenz(double sigma = 10.0, double rho = 28.0, double beta = 8.0 / 3.0) {
  System sys;
  sys.dim = 3;
  sys.label = "lorenz";
  sys.rhs = [=](double, const Vector& u, Vector& out) {
    out[0] = sigma * (u[1] - u[0]);
    out[1] = u[0] * (rho - u[2]) - u[1];
    out[2] = u[0] * u[1] - beta * u[2];
  };
  sys.initial_state = [](std::uint64_t seed) {
    return (Vector::Ones(3) + sample_normal_vector(3, seed)).eval();
  };
  return sys;
}

}  // namespace kslyap
