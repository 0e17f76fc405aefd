#pragma once

// Lyapunov spectrum by repeated QR reorthonormalization (Benettin et al.,
// Shimada & Nagashima). The flow-map action on each tracked direction is
// estimated by integrating an epsilon-perturbed copy of the full nonlinear
// system alongside the reference trajectory.

#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kslyap/errors.hpp"
#include "kslyap/ode_core.hpp"

namespace kslyap {

struct LyapunovConfig {
  std::size_t m = 24;
  double tau = 2000.0;
  double T = 2.0;
  std::size_t N = 1000;
  double epsilon = 1e-6;
  std::uint64_t seed = 0;
  IntegratorConfig integrator{};
  /// Worker threads for the m+1 trajectories of one interval.
  unsigned threads = 1;
};

struct LyapunovResult {
  Vector exponents;      // descending
  Matrix log_r_history;  // N x m, log R_ii per interval in QR column order
  Vector final_state;
  LyapunovConfig config;
  double wall_time = 0.0;
};

struct FrameStep {
  Vector u_next;
  Matrix V;  // n x m, finite-difference flow-map action on the frame
};

struct QrStep {
  Matrix Q;  // n x m, orthonormal columns
  Matrix R;  // m x m, upper triangular, positive diagonal
  Vector r_diag;
};

inline void validate(const LyapunovConfig& cfg, std::size_t dim) {
  if (cfg.m == 0) throw InvalidArgument("lyapunov: m must be positive");
  if (cfg.m > dim)
    throw InvalidArgument("lyapunov: m = " + std::to_string(cfg.m) +
                          " exceeds system dimension " + std::to_string(dim));
  if (!(cfg.tau >= 0)) throw InvalidArgument("lyapunov: tau must be >= 0");
  if (!(cfg.T > 0)) throw InvalidArgument("lyapunov: T must be > 0");
  if (cfg.N == 0) throw InvalidArgument("lyapunov: N must be positive");
  if (!(cfg.epsilon > 0)) throw InvalidArgument("lyapunov: epsilon must be > 0");
}

/// u(tau) from u0.
inline Vector burn_in(const System& system, const Vector& u0, double tau,
                      const IntegratorConfig& integrator) {
  if (!(tau >= 0)) throw InvalidArgument("burn_in: tau must be >= 0");
  if (tau == 0) {
    detail::check_state(system, u0, "burn_in");
    return u0;
  }
  return integrate(system, u0, 0.0, tau, integrator);
}

namespace detail {

/// Runs body(i) for i in [0, count); with threads > 1 the indices are split
/// over workers. Each index writes only its own output slot.
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(count));
  std::vector<std::exception_ptr> errors(count);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < count; i += workers) {
          try {
            body(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  // lowest index first, so the reported error does not depend on scheduling
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// One interval of the algorithm: advance the reference state by T and
/// estimate the flow-map action on each column of Q_prev by
/// (flow(u + eps q_i) - flow(u)) / eps.
inline FrameStep propagate_frame(const Integrator& integ, const Vector& u_prev, const Matrix& Q_prev,
                                 double t0, double T, double epsilon, unsigned threads = 1) {
  const Eigen::Index n = u_prev.size();
  const Eigen::Index m = Q_prev.cols();
  if (Q_prev.rows() != n) throw InvalidArgument("propagate_frame: frame has wrong row count");
  const Matrix gram = Q_prev.transpose() * Q_prev;
  if ((gram - Matrix::Identity(m, m)).cwiseAbs().maxCoeff() > 1e-8)
    throw InvalidArgument("propagate_frame: frame columns are not orthonormal");

  FrameStep out;
  std::vector<Vector> ends(static_cast<std::size_t>(m) + 1);
  detail::parallel_for(ends.size(), threads, [&](std::size_t i) {
    if (i == static_cast<std::size_t>(m)) {
      ends[i] = integ.advance(u_prev, t0, t0 + T);
    } else {
      const Vector start = u_prev + epsilon * Q_prev.col(static_cast<Eigen::Index>(i));
      ends[i] = integ.advance(start, t0, t0 + T);
    }
  });
  out.u_next = std::move(ends.back());
  out.V.resize(n, m);
  for (Eigen::Index i = 0; i < m; ++i)
    out.V.col(i) = (ends[static_cast<std::size_t>(i)] - out.u_next) / epsilon;
  if (!out.V.allFinite()) throw NonFiniteColumn(0, "propagate_frame: non-finite flow-map column");
  return out;
}

inline FrameStep propagate_frame(const System& system, const Vector& u_prev, const Matrix& Q_prev,
                                 double T, double epsilon, const IntegratorConfig& integrator) {
  return propagate_frame(Integrator(system, integrator), u_prev, Q_prev, 0.0, T, epsilon);
}

/// Reduced QR with the sign convention R_ii > 0.
inline QrStep reorthonormalize(const Matrix& V) {
  const Eigen::Index n = V.rows(), m = V.cols();
  if (m == 0 || n < m) throw InvalidArgument("reorthonormalize: need rows >= cols > 0");
  if (!V.allFinite()) throw NonFiniteColumn(0, "reorthonormalize: non-finite input");
  const Eigen::HouseholderQR<Matrix> qr(V);
  QrStep out;
  out.Q = qr.householderQ() * Matrix::Identity(n, m);
  out.R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < m; ++i) {
    if (out.R(i, i) < 0) {
      out.R.row(i) *= -1.0;
      out.Q.col(i) *= -1.0;
    }
  }
  out.r_diag = out.R.diagonal();
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(out.r_diag[i] > 1e-300))
      throw RankDeficient(0, "reorthonormalize: R(" + std::to_string(i) + "," + std::to_string(i) +
                                 ") underflowed; epsilon too small or m too large");
  }
  return out;
}

namespace detail {

inline LyapunovResult accumulate_spectrum(const System& system, Vector u, const LyapunovConfig& cfg,
                                          double t_start) {
  const auto start = std::chrono::steady_clock::now();
  const Integrator integ(system, cfg.integrator);
  const auto n = static_cast<Eigen::Index>(system.dim);
  const auto m = static_cast<Eigen::Index>(cfg.m);

  Matrix Q = Matrix::Identity(n, m);
  LyapunovResult res;
  res.log_r_history.resize(static_cast<Eigen::Index>(cfg.N), m);
  for (std::size_t j = 1; j <= cfg.N; ++j) {
    const double t0 = t_start + static_cast<double>(j - 1) * cfg.T;
    FrameStep step;
    QrStep qr;
    try {
      step = propagate_frame(integ, u, Q, t0, cfg.T, cfg.epsilon, cfg.threads);
      qr = reorthonormalize(step.V);
    } catch (const NonFiniteColumn& e) {
      throw NonFiniteColumn(j, std::string(e.what()) + " at interval " + std::to_string(j));
    } catch (const RankDeficient& e) {
      throw RankDeficient(j, std::string(e.what()) + " at interval " + std::to_string(j));
    }
    u = std::move(step.u_next);
    Q = std::move(qr.Q);
    res.log_r_history.row(static_cast<Eigen::Index>(j - 1)) = qr.r_diag.array().log().transpose();
  }

  const double span = static_cast<double>(cfg.N) * cfg.T;
  res.exponents = res.log_r_history.colwise().sum().transpose() / span;
  std::sort(res.exponents.begin(), res.exponents.end(), std::greater<>());
  res.final_state = std::move(u);
  res.config = cfg;
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

inline void warn_epsilon(const LyapunovConfig& cfg) {
  if (cfg.epsilon > 1e-2)
    std::clog << "warning: epsilon = " << cfg.epsilon
              << " is large; the finite-difference flow map may be inaccurate\n";
}

}  // namespace detail

/// The m most positive Lyapunov exponents starting from u0. The initial frame
/// is the first m columns of the identity.
inline LyapunovResult compute_spectrum(const System& system, const Vector& u0,
                                       const LyapunovConfig& cfg) {
  validate(cfg, system.dim);
  detail::check_state(system, u0, "compute_spectrum");
  detail::warn_epsilon(cfg);
  const auto start = std::chrono::steady_clock::now();
  Vector u = burn_in(system, u0, cfg.tau, cfg.integrator);
  auto res = detail::accumulate_spectrum(system, std::move(u), cfg, cfg.tau);
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

/// As above, starting from the system's seeded initial state.
inline LyapunovResult compute_spectrum(const System& system, const LyapunovConfig& cfg) {
  return compute_spectrum(system, system.sample_initial(cfg.seed), cfg);
}

/// Exponents recomputed from a stored log R history (sum / (N T), descending).
inline Vector exponents_from_history(const Matrix& log_r_history, double T) {
  Vector e = log_r_history.colwise().sum().transpose() /
             (static_cast<double>(log_r_history.rows()) * T);
  std::sort(e.begin(), e.end(), std::greater<>());
  return e;
}

struct IntervalScanRow {
  double T = 0;
  std::optional<Vector> exponents;  // empty when the run failed
  std::string error;
};

/// One spectrum per reorthonormalization interval, all other settings fixed.
/// The transient is integrated once and shared by every row.
inline std::vector<IntervalScanRow> scan_reorthonormalization_interval(
    const System& system, const LyapunovConfig& cfg, const std::vector<double>& T_values) {
  for (std::size_t i = 0; i < T_values.size(); ++i) {
    if (!(T_values[i] > 0)) throw InvalidArgument("scan: interval values must be positive");
    if (i > 0 && !(T_values[i] > T_values[i - 1]))
      throw InvalidArgument("scan: interval values must be ascending");
  }
  LyapunovConfig probe = cfg;
  probe.T = T_values.empty() ? cfg.T : T_values.front();
  validate(probe, system.dim);
  detail::warn_epsilon(cfg);

  const Vector attractor = burn_in(system, system.sample_initial(cfg.seed), cfg.tau, cfg.integrator);
  std::vector<IntervalScanRow> rows;
  for (double T : T_values) {
    IntervalScanRow row;
    row.T = T;
    LyapunovConfig c = cfg;
    c.T = T;
    try {
      row.exponents = detail::accumulate_spectrum(system, attractor, c, cfg.tau).exponents;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace kslyap
