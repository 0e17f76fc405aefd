#pragma once

// Post-processing of Lyapunov spectra: Kaplan-Yorke dimension, windowed
// robust statistics over neighbouring domain sizes, the power-law model
//     lambda_i(L) ~ a + (b + c i) / L^p
// with its residual scan over p, and the linear law for D_KY against L.

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "kslyap/errors.hpp"
#include "kslyap/ode_core.hpp"
#include "kslyap/record.hpp"

namespace kslyap {

/// Largest exponent below which a spectrum is flagged non-chaotic.
inline constexpr double kChaosThreshold = 0.005;

struct KaplanYorkeResult {
  std::size_t j = 0;
  double dimension = 0;
  Vector partial_sums;
  /// Partial sums never turned negative within the supplied exponents.
  bool unsaturated = false;
};

/// D_KY = j + (lambda_1 + ... + lambda_j) / |lambda_{j+1}|, with j the largest
/// index whose partial sum is non-negative. D_KY = 0 when lambda_1 < 0. When
/// no lambda_{j+1} is available the result is flagged unsaturated and the
/// dimension is reported as j.
inline KaplanYorkeResult kaplan_yorke(const Vector& exponents) {
  const Eigen::Index n = exponents.size();
  if (n == 0) throw InvalidArgument("kaplan_yorke: no exponents");
  if (!exponents.allFinite()) throw InvalidArgument("kaplan_yorke: non-finite exponent");
  for (Eigen::Index i = 1; i < n; ++i)
    if (exponents[i] > exponents[i - 1])
      throw InvalidArgument("kaplan_yorke: exponents must be non-increasing");

  KaplanYorkeResult r;
  r.partial_sums.resize(n);
  double s = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    s += exponents[i];
    r.partial_sums[i] = s;
    if (s >= 0) r.j = static_cast<std::size_t>(i + 1);
  }
  if (r.j == static_cast<std::size_t>(n)) {
    r.unsaturated = true;
    r.dimension = static_cast<double>(r.j);
    return r;
  }
  if (r.j == 0) return r;
  const double next = exponents[static_cast<Eigen::Index>(r.j)];
  if (next == 0) throw DegenerateDivisor("kaplan_yorke: lambda_{j+1} is exactly zero");
  r.dimension = static_cast<double>(r.j) + r.partial_sums[static_cast<Eigen::Index>(r.j) - 1] / std::abs(next);
  return r;
}

struct WindowedStat {
  double L_center = 0;
  std::size_t index = 0;  // exponent index i, 1-based
  double median = 0;
  double mad = 0;  // mean absolute deviation about the median
  std::size_t count = 0;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean_abs_deviation(const std::vector<double>& v, double centre) {
  double s = 0;
  for (double x : v) s += std::abs(x - centre);
  return s / static_cast<double>(v.size());
}

/// Median and mean absolute deviation of lambda_i over the records with
/// |L - L_center| <= halfwidth. Failed records are skipped.
inline WindowedStat windowed_median_mad(std::span<const SpectrumRecord> records, double L_center,
                                        double halfwidth, std::size_t i) {
  if (i == 0) throw InvalidArgument("windowed_median_mad: index is 1-based");
  std::vector<double> vals;
  for (const auto& r : records) {
    if (r.flags.failed) continue;
    if (std::abs(r.L - L_center) > halfwidth + 1e-9) continue;
    if (static_cast<std::size_t>(r.exponents.size()) < i) continue;
    vals.push_back(r.exponents[static_cast<Eigen::Index>(i - 1)]);
  }
  if (vals.empty())
    throw EmptyWindow("no records within " + std::to_string(halfwidth) + " of L = " +
                      std::to_string(L_center) + " for index " + std::to_string(i));
  WindowedStat w;
  w.L_center = L_center;
  w.index = i;
  w.count = vals.size();
  w.median = median_of(vals);
  w.mad = mean_abs_deviation(vals, w.median);
  return w;
}

/// Windowed statistics for every centre and every index 1..max_index.
inline std::vector<WindowedStat> windowed_stats(std::span<const SpectrumRecord> records,
                                                std::span<const double> centers, double halfwidth,
                                                std::size_t max_index) {
  std::vector<WindowedStat> out;
  for (double c : centers)
    for (std::size_t i = 1; i <= max_index; ++i)
      out.push_back(windowed_median_mad(records, c, halfwidth, i));
  return out;
}

struct PowerLawFit {
  double a = 0, b = 0, c = 0, p = 1;
  double rms_residual = 0;
  double mad_residual = 0;
  std::size_t n_points = 0;

  double operator()(double i, double L) const { return a + (b + c * i) / std::pow(L, p); }
  /// i0 in the form a + c (i - i0) / L^p.
  double index_offset() const { return c != 0 ? -b / c : std::numeric_limits<double>::quiet_NaN(); }
};

/// Least-squares fit of a + (b + c i) / L^p to the windowed medians that are
/// positive, solved by column-pivoting QR of the design matrix.
inline PowerLawFit fit_power_law(std::span<const WindowedStat> stats, double p) {
  if (!(p > 0)) throw InvalidArgument("fit_power_law: p must be positive");
  std::vector<const WindowedStat*> use;
  for (const auto& s : stats)
    if (s.median > 0) use.push_back(&s);
  const auto rows = static_cast<Eigen::Index>(use.size());
  if (rows < 3) throw SingularNormalEquations("fit_power_law: fewer than 3 positive medians");

  Matrix X(rows, 3);
  Vector y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& s = *use[static_cast<std::size_t>(r)];
    const double s_p = std::pow(s.L_center, -p);
    X(r, 0) = 1.0;
    X(r, 1) = s_p;
    X(r, 2) = static_cast<double>(s.index) * s_p;
    y[r] = s.median;
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(X);
  if (qr.rank() < 3) throw SingularNormalEquations("fit_power_law: design matrix has rank < 3");
  const Vector beta = qr.solve(y);
  const Vector resid = y - X * beta;

  PowerLawFit f;
  f.a = beta[0];
  f.b = beta[1];
  f.c = beta[2];
  f.p = p;
  f.n_points = use.size();
  f.rms_residual = std::sqrt(resid.squaredNorm() / static_cast<double>(rows));
  std::vector<double> rv(resid.begin(), resid.end());
  f.mad_residual = mean_abs_deviation(rv, median_of(rv));
  return f;
}

/// Inclusive arithmetic grid start, start+step, ... <= end (to 1e-9 relative).
inline std::vector<double> make_grid(double start, double step, double end) {
  if (!(step > 0)) throw InvalidArgument("grid step must be positive");
  if (end < start) throw InvalidArgument("grid end precedes start");
  std::vector<double> g;
  const auto count = static_cast<long long>(std::floor((end - start) / step + 1e-9));
  for (long long k = 0; k <= count; ++k) g.push_back(start + static_cast<double>(k) * step);
  return g;
}

struct ExponentScan {
  std::vector<PowerLawFit> fits;  // one per p, in grid order
  double best_p = 0;              // argmin of the RMS residual
};

inline ExponentScan scan_exponent_p(std::span<const WindowedStat> stats, std::span<const double> p_grid) {
  if (p_grid.empty()) throw InvalidArgument("scan_exponent_p: empty grid");
  for (std::size_t k = 1; k < p_grid.size(); ++k)
    if (!(p_grid[k] > p_grid[k - 1])) throw InvalidArgument("scan_exponent_p: grid must ascend");
  ExponentScan s;
  double best = std::numeric_limits<double>::infinity();
  for (double p : p_grid) {
    s.fits.push_back(fit_power_law(stats, p));
    if (s.fits.back().rms_residual < best) {
      best = s.fits.back().rms_residual;
      s.best_p = p;
    }
  }
  return s;
}

inline std::vector<double> default_p_grid() { return make_grid(0.02, 0.02, 2.0); }

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double rms = 0;
  std::size_t n_points = 0;
};

/// Ordinary least squares of D_KY against L over non-failed records with L >= L_min.
inline LinearFit fit_dky_linear(std::span<const SpectrumRecord> records, double L_min = 80.0) {
  std::vector<const SpectrumRecord*> use;
  for (const auto& r : records)
    if (!r.flags.failed && r.L >= L_min - 1e-9) use.push_back(&r);
  std::set<double> distinct;
  for (const auto* r : use) distinct.insert(r->L);
  if (distinct.size() < 2)
    throw InsufficientData("fit_dky_linear: need records at two or more L >= " + std::to_string(L_min));
  const auto rows = static_cast<Eigen::Index>(use.size());
  Matrix X(rows, 2);
  Vector y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    X(r, 0) = 1.0;
    X(r, 1) = use[static_cast<std::size_t>(r)]->L;
    y[r] = use[static_cast<std::size_t>(r)]->dky;
  }
  const Vector beta = X.colPivHouseholderQr().solve(y);
  LinearFit f;
  f.intercept = beta[0];
  f.slope = beta[1];
  f.n_points = use.size();
  f.rms = std::sqrt((y - X * beta).squaredNorm() / static_cast<double>(rows));
  return f;
}

/// Fitted law for the periodic exponents: 0.093 - 0.94 (i - 0.39) / L.
inline double predict_exponent(std::size_t i, double L) {
  if (i < 1 || !(L > 0)) throw InvalidArgument("predict_exponent: need i >= 1 and L > 0");
  return 0.093 - 0.94 * (static_cast<double>(i) - 0.39) / L;
}

/// Index at which the partial sums of the fitted law vanish: 0.2 L - 0.2.
inline double estimate_j_zero(double L) {
  if (!(L > 0)) throw InvalidArgument("estimate_j_zero: need L > 0");
  return 0.2 * L - 0.2;
}

}  // namespace kslyap
