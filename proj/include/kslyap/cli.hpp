#pragma once

// Command-line front end: simulate, lyap, sweep, fit, dky.
// Every output starts with `# key = value` lines echoing the effective
// configuration, including a `command` line that regenerates the output.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "kslyap/analysis.hpp"
#include "kslyap/errors.hpp"
#include "kslyap/ks_models.hpp"
#include "kslyap/lyapunov.hpp"
#include "kslyap/ode_core.hpp"
#include "kslyap/oracle_systems.hpp"
#include "kslyap/sweep.hpp"

namespace kslyap::cli {

using Meta = std::vector<std::pair<std::string, std::string>>;

inline std::string join_reals(const std::vector<double>& v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += format_real(v[i]);
  }
  return s;
}

inline std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> v;
  for (auto field : split_csv(text)) {
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    const auto x = parse_real(field);
    if (!x) throw InvalidArgument("bad number '" + std::string(field) + "' in list '" + text + "'");
    v.push_back(*x);
  }
  return v;
}

/// "start:step:end", inclusive.
inline std::vector<double> parse_range(const std::string& text) {
  std::vector<double> parts;
  std::string_view s = text;
  while (true) {
    const auto colon = s.find(':');
    const auto x = parse_real(s.substr(0, colon));
    if (!x) throw InvalidArgument("bad range '" + text + "' (expected start:step:end)");
    parts.push_back(*x);
    if (colon == std::string_view::npos) break;
    s.remove_prefix(colon + 1);
  }
  if (parts.size() != 3) throw InvalidArgument("bad range '" + text + "' (expected start:step:end)");
  return make_grid(parts[0], parts[1], parts[2]);
}

inline void write_meta(std::ostream& os, const Meta& meta) {
  for (const auto& [k, v] : meta) os << "# " << k << " = " << v << '\n';
}

/// Writes text to `path` (via rename) or to `fallback` when path is empty.
inline void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write '" + tmp + "'");
    f << text;
    if (!f.flush()) throw Error("failed writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot replace '" + path + "': " + ec.message());
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  BoundaryCondition bc = BoundaryCondition::Periodic;
  double L = 22.0;
  double k_max = 9.0;
  std::uint64_t seed = 0;
  double dt = 0.05;
  Scheme scheme = Scheme::ETDRK4;
  double t_end = 500.0;
  double dt_out = 0.5;
  std::string out;
};

inline std::string command_line(const SimulateOptions& o) {
  std::string c = "kslyap simulate --bc " + std::string(to_string(o.bc)) + " --L " + format_real(o.L) +
                  " --kmax " + format_real(o.k_max) + " --seed " + std::to_string(o.seed) + " --dt " +
                  format_real(o.dt) + " --scheme " + std::string(to_string(o.scheme)) + " --t-end " +
                  format_real(o.t_end) + " --dt-out " + format_real(o.dt_out);
  if (!o.out.empty()) c += " --out " + o.out;
  return c;
}

/// u(x, t) on the model grid at t = 0, dt_out, 2 dt_out, ... <= t_end.
inline void cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  if (!(o.t_end >= 0)) throw InvalidArgument("simulate: t-end must be >= 0");
  if (!(o.dt_out > 0)) throw InvalidArgument("simulate: dt-out must be positive");
  DomainSpec spec;
  spec.L = o.L;
  spec.bc = o.bc;
  spec.k_max_target = o.k_max;
  const auto ks = make_ks(spec);
  const Integrator integ(ks.system, IntegratorConfig{o.dt, o.scheme});

  Vector u = ks.system.sample_initial(o.seed);
  const auto samples = static_cast<long long>(std::floor(o.t_end / o.dt_out + 1e-9));
  const auto first = physical_field(ks, u);

  std::ostringstream text;
  write_meta(text, {{"command", command_line(o)},
                    {"kind", "kslyap-simulate"},
                    {"bc", std::string(to_string(o.bc))},
                    {"L", format_real(o.L)},
                    {"kmax", format_real(o.k_max)},
                    {"dim", std::to_string(ks.dim())},
                    {"seed", std::to_string(o.seed)},
                    {"dt", format_real(o.dt)},
                    {"scheme", std::string(to_string(o.scheme))},
                    {"t_end", format_real(o.t_end)},
                    {"dt_out", format_real(o.dt_out)},
                    {"x", join_reals(first.x)}});
  text << 't';
  for (std::size_t i = 1; i <= first.x.size(); ++i) text << ",u_" << i;
  text << '\n';
  auto row = [&](double t, const FieldSamples& f) {
    text << format_real(t);
    for (double v : f.u) text << ',' << format_real(v);
    text << '\n';
  };
  row(0.0, first);
  for (long long k = 1; k <= samples; ++k) {
    const double t0 = static_cast<double>(k - 1) * o.dt_out;
    const double t1 = static_cast<double>(k) * o.dt_out;
    u = integ.advance(u, t0, t1);
    row(t1, physical_field(ks, u));
  }
  emit(o.out, text.str(), out);
}

// ---------------------------------------------------------------- lyap

struct LyapOptions {
  std::string system = "ks";  // ks | lorenz | diaglin
  BoundaryCondition bc = BoundaryCondition::Periodic;
  double L = 22.0;
  double k_max = 9.0;
  std::optional<std::size_t> m;  // default: 24 for ks, the dimension otherwise
  double tau = 2000.0;
  double T = 2.0;
  std::size_t N = 1000;
  double epsilon = 1e-6;
  std::uint64_t seed = 0;
  std::optional<double> dt;       // default: 0.05, 0.01 for lorenz
  std::optional<Scheme> scheme;   // default: etdrk4, rk4 for lorenz
  std::vector<double> rates{0.3, -0.1, -2.0};
  std::vector<double> scan_T;
  unsigned threads = 1;
  std::string out;
};

struct ResolvedLyap {
  System system;
  std::optional<KsSystem> ks;
  LyapunovConfig cfg;
};

inline ResolvedLyap resolve(const LyapOptions& o) {
  ResolvedLyap r;
  r.cfg.tau = o.tau;
  r.cfg.T = o.T;
  r.cfg.N = o.N;
  r.cfg.epsilon = o.epsilon;
  r.cfg.seed = o.seed;
  r.cfg.threads = o.threads;
  if (o.system == "ks") {
    r.cfg.m = o.m.value_or(24);
    DomainSpec spec;
    spec.L = o.L;
    spec.bc = o.bc;
    spec.k_max_target = o.k_max;
    spec.min_dim = r.cfg.m;
    r.ks = make_ks(spec);
    r.system = r.ks->system;
    r.cfg.integrator = {o.dt.value_or(0.05), o.scheme.value_or(Scheme::ETDRK4)};
  } else if (o.system == "lorenz") {
    r.system = make_lorenz();
    r.cfg.m = o.m.value_or(3);
    r.cfg.integrator = {o.dt.value_or(0.01), o.scheme.value_or(Scheme::RK4)};
  } else if (o.system == "diaglin") {
    if (o.rates.empty()) throw InvalidArgument("diaglin: no rates");
    r.system = make_diagonal_linear(o.rates);
    r.cfg.m = o.m.value_or(o.rates.size());
    r.cfg.integrator = {o.dt.value_or(0.05), o.scheme.value_or(Scheme::ETDRK4)};
  } else {
    throw InvalidArgument("unknown system '" + o.system + "' (expected ks, lorenz or diaglin)");
  }
  return r;
}

inline std::string command_line(const LyapOptions& o, const ResolvedLyap& r) {
  std::string c = "kslyap lyap --system " + o.system;
  if (o.system == "ks")
    c += " --bc " + std::string(to_string(o.bc)) + " --L " + format_real(o.L) + " --kmax " + format_real(o.k_max);
  if (o.system == "diaglin") c += " --rates " + join_reals(o.rates);
  c += " --m " + std::to_string(r.cfg.m) + " --tau " + format_real(r.cfg.tau) + " --T " + format_real(r.cfg.T) +
       " --N " + std::to_string(r.cfg.N) + " --epsilon " + format_real(r.cfg.epsilon) + " --seed " +
       std::to_string(r.cfg.seed) + " --dt " + format_real(r.cfg.integrator.dt) + " --scheme " +
       std::string(to_string(r.cfg.integrator.scheme));
  if (!o.scan_T.empty()) c += " --scan-T " + join_reals(o.scan_T);
  if (!o.out.empty()) c += " --out " + o.out;
  return c;
}

inline Meta lyap_meta(const LyapOptions& o, const ResolvedLyap& r) {
  Meta meta{{"command", command_line(o, r)}, {"kind", "kslyap-lyap"}, {"system", o.system}};
  if (r.ks) {
    meta.emplace_back("bc", std::string(to_string(o.bc)));
    meta.emplace_back("L", format_real(o.L));
    meta.emplace_back("kmax", format_real(o.k_max));
  }
  if (o.system == "diaglin") meta.emplace_back("rates", join_reals(o.rates));
  meta.emplace_back("dim", std::to_string(r.system.dim));
  meta.emplace_back("m", std::to_string(r.cfg.m));
  meta.emplace_back("tau", format_real(r.cfg.tau));
  meta.emplace_back("T", format_real(r.cfg.T));
  meta.emplace_back("N", std::to_string(r.cfg.N));
  meta.emplace_back("epsilon", format_real(r.cfg.epsilon));
  meta.emplace_back("seed", std::to_string(r.cfg.seed));
  meta.emplace_back("dt", format_real(r.cfg.integrator.dt));
  meta.emplace_back("scheme", std::string(to_string(r.cfg.integrator.scheme)));
  return meta;
}

/// Exponent table (and D_KY) to `out`; with --out also a results file in
/// the sweep schema (KS) or with a `system` first column (oracle systems).
inline void cmd_lyap(const LyapOptions& o, std::ostream& out) {
  const auto r = resolve(o);
  const Meta meta = lyap_meta(o, r);

  if (!o.scan_T.empty()) {
    const auto rows = scan_reorthonormalization_interval(r.system, r.cfg, o.scan_T);
    std::ostringstream text;
    write_meta(text, meta);
    text << "T,status";
    for (std::size_t i = 1; i <= r.cfg.m; ++i) text << ",lambda_" << i;
    text << '\n';
    for (const auto& row : rows) {
      text << format_real(row.T) << ',' << (row.exponents ? "ok" : "failed");
      for (std::size_t i = 0; i < r.cfg.m; ++i)
        text << ',' << (row.exponents ? format_real((*row.exponents)[static_cast<Eigen::Index>(i)]) : "nan");
      text << '\n';
      if (!row.exponents) text << "# error at T = " << format_real(row.T) << ": " << row.error << '\n';
    }
    out << text.str();
    if (!o.out.empty()) emit(o.out, text.str(), out);
    return;
  }

  const auto res = compute_spectrum(r.system, r.cfg);
  std::clog << "[lyap] wall time " << res.wall_time << " s\n";
  const auto rec = make_record(o.system == "ks" ? o.L : 0.0, o.bc, r.cfg.seed, res.exponents);

  std::ostringstream report;
  write_meta(report, meta);
  report << "i,lambda\n";
  for (Eigen::Index i = 0; i < res.exponents.size(); ++i)
    report << (i + 1) << ',' << format_real(res.exponents[i]) << '\n';
  report << "# sum = " << format_real(res.exponents.sum()) << '\n';
  report << "# dky = " << format_real(rec.dky) << '\n';
  report << "# j = " << rec.j << '\n';
  report << "# flag = " << rec.flags.str() << '\n';
  out << report.str();

  if (o.out.empty()) return;
  std::ostringstream file;
  write_meta(file, meta);
  if (r.ks) {
    file << results_header(r.cfg.m) << '\n' << format_record(rec) << '\n';
  } else {
    file << "system,seed,flag,dky,j";
    for (std::size_t i = 1; i <= r.cfg.m; ++i) file << ",lambda_" << i;
    file << '\n' << o.system << ',' << rec.seed << ',' << rec.flags.str() << ',' << format_real(rec.dky) << ','
         << rec.j;
    for (double x : rec.exponents) file << ',' << format_real(x);
    file << '\n';
  }
  emit(o.out, file.str(), out);
}

// ---------------------------------------------------------------- sweep

struct SweepOptions {
  SweepPlan plan;
};

inline std::string command_line(const SweepPlan& p) {
  return "kslyap sweep --bc " + std::string(to_string(p.bc)) + " --L-start " + format_real(p.L_start) +
         " --L-end " + format_real(p.L_end) + " --dL " + format_real(p.dL) + " --kmax " + format_real(p.k_max) +
         " --m " + std::to_string(p.lyap.m) + " --tau " + format_real(p.lyap.tau) + " --T " +
         format_real(p.lyap.T) + " --N " + std::to_string(p.lyap.N) + " --epsilon " +
         format_real(p.lyap.epsilon) + " --seed " + std::to_string(p.lyap.seed) + " --dt " +
         format_real(p.lyap.integrator.dt) + " --scheme " + std::string(to_string(p.lyap.integrator.scheme)) +
         " --out " + p.output_path + (p.resume ? " --resume" : "");
}

inline void cmd_sweep(const SweepOptions& o, std::ostream& out) {
  SweepPlan plan = o.plan;
  plan.command = command_line(plan);
  const auto records = run_sweep(plan);
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.flags.failed ? 1 : 0;
  out << "# wrote " << records.size() << " records (" << failed << " failed) to " << o.plan.output_path << '\n';
}

// ---------------------------------------------------------------- fit

struct FitOptions {
  std::string input;
  std::string p_grid = "0.02:0.02:2";
  double p_fixed = 1.0;
  double halfwidth = 1.0;
  std::vector<double> centers;  // empty: fully covered windows, spaced 2 halfwidth
  std::size_t max_index = 0;    // 0: every exponent in the file
  std::string out;
};

inline double file_dL(const ResultsFile& f) {
  if (auto v = f.meta_value("dL"))
    if (auto x = parse_real(*v)) return *x;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < f.records.size(); ++k) {
    const double d = f.records[k].L - f.records[k - 1].L;
    if (d > 1e-12) best = std::min(best, d);
  }
  if (!std::isfinite(best)) throw InsufficientData("fit: cannot infer the L spacing");
  return best;
}

/// Window centres min(L)+hw, min(L)+3hw, ... whose window holds every grid point.
inline std::vector<double> auto_centers(const ResultsFile& f, double halfwidth) {
  std::vector<double> Ls;
  for (const auto& r : f.records)
    if (!r.flags.failed) Ls.push_back(r.L);
  if (Ls.empty()) throw EmptyWindow("fit: no usable records");
  const double dL = file_dL(f);
  const auto full = static_cast<std::size_t>(std::llround(2 * halfwidth / dL)) + 1;
  std::vector<double> c;
  const double lo = Ls.front(), hi = Ls.back();
  for (long long k = 0;; ++k) {
    const double centre = lo + halfwidth + static_cast<double>(k) * 2 * halfwidth;
    if (centre > hi - halfwidth + 1e-9) break;
    const auto n = static_cast<std::size_t>(std::count_if(Ls.begin(), Ls.end(), [&](double L) {
      return std::abs(L - centre) <= halfwidth + 1e-9;
    }));
    if (n >= full) c.push_back(centre);
  }
  if (c.empty()) throw EmptyWindow("fit: no fully covered window of half-width " + format_real(halfwidth));
  return c;
}

inline std::string command_line(const FitOptions& o, const std::vector<double>& centers, std::size_t max_index) {
  std::string c = "kslyap fit " + o.input + " --p-grid " + o.p_grid + " --p " + format_real(o.p_fixed) +
                  " --halfwidth " + format_real(o.halfwidth) + " --centers " + join_reals(centers) +
                  " --max-index " + std::to_string(max_index);
  if (!o.out.empty()) c += " --out " + o.out;
  return c;
}

inline void cmd_fit(const FitOptions& o, std::ostream& out) {
  const auto file = read_results(o.input);
  const auto centers = o.centers.empty() ? auto_centers(file, o.halfwidth) : o.centers;
  const std::size_t max_index = o.max_index == 0 ? file.m : std::min(o.max_index, file.m);
  const auto grid = parse_range(o.p_grid);

  const auto stats = windowed_stats(file.records, centers, o.halfwidth, max_index);
  const auto scan = scan_exponent_p(stats, grid);
  const auto best = fit_power_law(stats, scan.best_p);
  const auto fixed = fit_power_law(stats, o.p_fixed);

  std::ostringstream text;
  write_meta(text, {{"command", command_line(o, centers, max_index)},
                    {"kind", "kslyap-fit"},
                    {"input", o.input},
                    {"p_grid", o.p_grid},
                    {"p", format_real(o.p_fixed)},
                    {"halfwidth", format_real(o.halfwidth)},
                    {"centers", join_reals(centers)},
                    {"max_index", std::to_string(max_index)}});
  text << "# table = windowed\nL_center,i,median,mad,count\n";
  for (const auto& s : stats)
    text << format_real(s.L_center) << ',' << s.index << ',' << format_real(s.median) << ','
         << format_real(s.mad) << ',' << s.count << '\n';
  text << "# table = pscan\np,rms,mad,a,b,c,n_points\n";
  for (const auto& f : scan.fits)
    text << format_real(f.p) << ',' << format_real(f.rms_residual) << ',' << format_real(f.mad_residual) << ','
         << format_real(f.a) << ',' << format_real(f.b) << ',' << format_real(f.c) << ',' << f.n_points << '\n';
  text << "# table = fits (lambda_i(L) = a + c (i - i0) / L^p)\nrole,p,a,b,c,i0,rms,mad,n_points\n";
  for (const auto& [role, f] : {std::pair{"best", best}, std::pair{"fixed", fixed}})
    text << role << ',' << format_real(f.p) << ',' << format_real(f.a) << ',' << format_real(f.b) << ','
         << format_real(f.c) << ',' << format_real(f.index_offset()) << ',' << format_real(f.rms_residual)
         << ',' << format_real(f.mad_residual) << ',' << f.n_points << '\n';
  emit(o.out, text.str(), out);
}

// ---------------------------------------------------------------- dky

struct DkyOptions {
  std::string input;
  double L_min = 80.0;
  std::string out;
};

inline void cmd_dky(const DkyOptions& o, std::ostream& out) {
  const auto file = read_results(o.input);
  std::string cmd = "kslyap dky " + o.input + " --Lmin-fit " + format_real(o.L_min);
  if (!o.out.empty()) cmd += " --out " + o.out;

  std::ostringstream text;
  write_meta(text, {{"command", cmd}, {"kind", "kslyap-dky"}, {"input", o.input}, {"Lmin_fit", format_real(o.L_min)}});
  text << "L,dky,flag\n";
  for (const auto& r : file.records)
    text << format_real(r.L) << ',' << format_real(r.dky) << ',' << r.flags.str() << '\n';
  try {
    const auto fit = fit_dky_linear(file.records, o.L_min);
    text << "# table = fit\nL_min,slope,intercept,rms,n_points\n"
         << format_real(o.L_min) << ',' << format_real(fit.slope) << ',' << format_real(fit.intercept) << ','
         << format_real(fit.rms) << ',' << fit.n_points << '\n';
  } catch (const InsufficientData& e) {
    text << "# fit unavailable: " << e.what() << '\n';
  }
  emit(o.out, text.str(), out);
}

// ---------------------------------------------------------------- parsing

/// Splices `key = value` lines of every --config file in as `--key=value`
/// right after the subcommand, so flags given on the command line win.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::vector<std::string> from_file;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw InvalidArgument("--config needs a path");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
      continue;
    }
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot read config file '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string{};
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
      };
      line = trim(line);
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
      auto key = trim(line.substr(0, eq));
      const auto value = trim(line.substr(eq + 1));
      if (key.rfind("--", 0) == 0) key = key.substr(2);
      std::replace(key.begin(), key.end(), '_', '-');
      from_file.push_back("--" + key + "=" + value);
    }
  }
  // rest[0] is the program name; rest[1], when present, the subcommand
  const std::size_t at = std::min<std::size_t>(rest.size(), 2);
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(at), from_file.begin(), from_file.end());
  return rest;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Lyapunov spectra of the Kuramoto-Sivashinsky equation"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  const std::map<std::string, BoundaryCondition> bc_map{{"periodic", BoundaryCondition::Periodic},
                                                        {"odd", BoundaryCondition::OddPeriodic}};
  const std::map<std::string, Scheme> scheme_map{
      {"etdrk4", Scheme::ETDRK4}, {"cnab2", Scheme::IMEX_CNAB2}, {"rk4", Scheme::RK4}};
  // enums go through their lowercase names
  auto bc_opt = [&](CLI::App* sub, BoundaryCondition& bc) {
    sub->add_option_function<std::string>(
           "--bc", [&bc, &bc_map](const std::string& s) { bc = bc_map.at(s); },
           "boundary condition: periodic | odd")
        ->transform(CLI::IsMember(bc_map, CLI::ignore_case));
  };
  auto scheme_opt = [&](CLI::App* sub, auto& scheme) {
    sub->add_option_function<std::string>(
           "--scheme", [&scheme, &scheme_map](const std::string& s) { scheme = scheme_map.at(s); },
           "time stepper: etdrk4 | cnab2 | rk4")
        ->transform(CLI::IsMember(scheme_map, CLI::ignore_case));
  };
  auto list_opt = [](CLI::App* sub, const std::string& name, std::vector<double>& target, const std::string& help) {
    sub->add_option_function<std::string>(
        name, [&target](const std::string& s) { target = parse_real_list(s); }, help);
  };

  SimulateOptions sim;
  auto* s_sim = app.add_subcommand("simulate", "space-time field u(x,t) as CSV");
  bc_opt(s_sim, sim.bc);
  s_sim->add_option("--L", sim.L, "domain length")->capture_default_str();
  s_sim->add_option("--kmax", sim.k_max, "largest resolved wavenumber")->capture_default_str();
  s_sim->add_option("--seed", sim.seed, "initial-condition seed")->capture_default_str();
  s_sim->add_option("--dt", sim.dt, "time step")->capture_default_str();
  scheme_opt(s_sim, sim.scheme);
  s_sim->add_option("--t-end", sim.t_end, "final time")->capture_default_str();
  s_sim->add_option("--dt-out", sim.dt_out, "output sampling interval")->capture_default_str();
  s_sim->add_option("--out", sim.out, "output file (default stdout)");

  LyapOptions ly;
  auto* s_ly = app.add_subcommand("lyap", "one Lyapunov spectrum");
  s_ly->add_option("--system", ly.system, "ks | lorenz | diaglin")->capture_default_str();
  bc_opt(s_ly, ly.bc);
  s_ly->add_option("--L", ly.L, "domain length")->capture_default_str();
  s_ly->add_option("--kmax", ly.k_max, "largest resolved wavenumber")->capture_default_str();
  s_ly->add_option("--m", ly.m, "number of exponents (default 24, or the dimension)");
  s_ly->add_option("--tau", ly.tau, "transient discarded")->capture_default_str();
  s_ly->add_option("--T", ly.T, "reorthonormalization interval")->capture_default_str();
  s_ly->add_option("--N", ly.N, "number of intervals")->capture_default_str();
  s_ly->add_option("--epsilon", ly.epsilon, "finite-difference perturbation")->capture_default_str();
  s_ly->add_option("--seed", ly.seed, "initial-condition seed")->capture_default_str();
  s_ly->add_option("--dt", ly.dt, "time step (default 0.05, lorenz 0.01)");
  scheme_opt(s_ly, ly.scheme);
  list_opt(s_ly, "--rates", ly.rates, "diaglin rates, comma list");
  list_opt(s_ly, "--scan-T", ly.scan_T, "interval values to scan, comma list");
  s_ly->add_option("--threads", ly.threads, "threads for the perturbed trajectories")->capture_default_str();
  s_ly->add_option("--out", ly.out, "results file");

  SweepOptions sw;
  auto* s_sw = app.add_subcommand("sweep", "spectra over a grid of domain lengths");
  bc_opt(s_sw, sw.plan.bc);
  s_sw->add_option("--L-start", sw.plan.L_start, "first L")->capture_default_str();
  s_sw->add_option("--L-end", sw.plan.L_end, "last L")->capture_default_str();
  s_sw->add_option("--dL", sw.plan.dL, "grid spacing")->capture_default_str();
  s_sw->add_option("--kmax", sw.plan.k_max, "largest resolved wavenumber")->capture_default_str();
  s_sw->add_option("--m", sw.plan.lyap.m, "number of exponents")->capture_default_str();
  s_sw->add_option("--tau", sw.plan.lyap.tau, "transient discarded")->capture_default_str();
  s_sw->add_option("--T", sw.plan.lyap.T, "reorthonormalization interval")->capture_default_str();
  s_sw->add_option("--N", sw.plan.lyap.N, "number of intervals")->capture_default_str();
  s_sw->add_option("--epsilon", sw.plan.lyap.epsilon, "finite-difference perturbation")->capture_default_str();
  s_sw->add_option("--seed", sw.plan.lyap.seed, "base seed")->capture_default_str();
  s_sw->add_option("--dt", sw.plan.lyap.integrator.dt, "time step")->capture_default_str();
  scheme_opt(s_sw, sw.plan.lyap.integrator.scheme);
  s_sw->add_option("--workers", sw.plan.workers, "parallel runs")->capture_default_str();
  s_sw->add_option("--out", sw.plan.output_path, "results CSV")->required();
  s_sw->add_flag("--resume", sw.plan.resume, "keep records already in --out");

  FitOptions fo;
  auto* s_fit = app.add_subcommand("fit", "windowed statistics and power-law fits of a results file");
  s_fit->add_option("input", fo.input, "results CSV")->required();
  s_fit->add_option("--p-grid", fo.p_grid, "start:step:end")->capture_default_str();
  s_fit->add_option("--p", fo.p_fixed, "exponent of the fixed-p fit")->capture_default_str();
  s_fit->add_option("--halfwidth", fo.halfwidth, "window half-width")->capture_default_str();
  list_opt(s_fit, "--centers", fo.centers, "window centres, comma list (default: automatic)");
  s_fit->add_option("--max-index", fo.max_index, "largest exponent index (0: all)")->capture_default_str();
  s_fit->add_option("--out", fo.out, "output file (default stdout)");

  DkyOptions dk;
  auto* s_dk = app.add_subcommand("dky", "D_KY against L with a linear fit");
  s_dk->add_option("input", dk.input, "results CSV")->required();
  s_dk->add_option("--Lmin-fit", dk.L_min, "smallest L in the linear fit")->capture_default_str();
  s_dk->add_option("--out", dk.out, "output file (default stdout)");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(std::move(args));
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*s_sim) cmd_simulate(sim, out);
    else if (*s_ly) cmd_lyap(ly, out);
    else if (*s_sw) cmd_sweep(sw, out);
    else if (*s_fit) cmd_fit(fo, out);
    else if (*s_dk) cmd_dky(dk, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace kslyap::cli
