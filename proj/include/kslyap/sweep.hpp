#pragma once

// Lyapunov spectra over a grid of domain sizes, persisted as CSV with a JSON
// sidecar. The results file is rewritten (sorted by L, via rename) after every
// completed grid point, so its contents never depend on worker count or
// completion order and an interrupted sweep can be resumed.

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <utility>
#include <vector>

#include "kslyap/analysis.hpp"
#include "kslyap/errors.hpp"
#include "kslyap/ks_models.hpp"
#include "kslyap/lyapunov.hpp"
#include "kslyap/random.hpp"
#include "kslyap/record.hpp"

namespace kslyap {

/// Shortest round-trip-exact text for a double (17 significant digits).
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_real(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

struct SweepPlan {
  double L_start = 0.1;
  double L_end = 100.0;
  double dL = 0.1;
  BoundaryCondition bc = BoundaryCondition::Periodic;
  double k_max = 9.0;
  /// Per-run settings; `seed` is the base seed from which run seeds derive.
  LyapunovConfig lyap{};
  std::string output_path;
  unsigned workers = 1;
  /// Keep records already present in output_path and compute only the rest.
  bool resume = false;
  /// Echoed as the first metadata line when set.
  std::string command;
};

inline void validate(const SweepPlan& plan) {
  if (!(plan.dL > 0)) throw InvalidArgument("sweep: dL must be positive");
  if (!(plan.L_start > 0)) throw InvalidArgument("sweep: L_start must be positive");
  if (!(plan.L_end >= plan.L_start)) throw InvalidArgument("sweep: empty grid (L_start > L_end)");
  if (plan.workers == 0) throw InvalidArgument("sweep: workers must be positive");
  if (plan.output_path.empty()) throw InvalidArgument("sweep: no output path");
}

/// {L_start + k dL : k >= 0, value <= L_end + dL/2}.
inline std::vector<double> sweep_grid(const SweepPlan& plan) {
  validate(plan);
  std::vector<double> g;
  for (long long k = 0;; ++k) {
    const double L = plan.L_start + static_cast<double>(k) * plan.dL;
    if (L > plan.L_end + plan.dL / 2) break;
    g.push_back(L);
  }
  return g;
}

/// Run seed from (base seed, boundary condition, global grid index round(L/dL)).
inline std::uint64_t run_seed(std::uint64_t base_seed, BoundaryCondition bc, double L, double dL) {
  const auto index = static_cast<std::int64_t>(std::llround(L / dL));
  return mix_seed(base_seed, bc == BoundaryCondition::Periodic ? 0u : 1u,
                  static_cast<std::uint64_t>(index));
}

/// Settings that change the numbers in a record, in canonical text form.
inline std::string fingerprint_text(const SweepPlan& plan) {
  std::ostringstream s;
  s << "bc=" << to_string(plan.bc) << ";m=" << plan.lyap.m << ";tau=" << format_real(plan.lyap.tau)
    << ";T=" << format_real(plan.lyap.T) << ";N=" << plan.lyap.N
    << ";epsilon=" << format_real(plan.lyap.epsilon) << ";seed=" << plan.lyap.seed
    << ";dt=" << format_real(plan.lyap.integrator.dt)
    << ";scheme=" << to_string(plan.lyap.integrator.scheme) << ";kmax=" << format_real(plan.k_max)
    << ";dL=" << format_real(plan.dL);
  return s.str();
}

/// FNV-1a 64 of fingerprint_text, as 16 hex digits.
inline std::string config_fingerprint(const SweepPlan& plan) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : fingerprint_text(plan)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

/// Record for one finished spectrum (Kaplan-Yorke dimension and flags filled in).
inline SpectrumRecord make_record(double L, BoundaryCondition bc, std::uint64_t seed,
                                  const Vector& exponents) {
  SpectrumRecord r;
  r.L = L;
  r.bc = bc;
  r.seed = seed;
  r.exponents = exponents;
  const auto ky = kaplan_yorke(exponents);
  r.dky = ky.dimension;
  r.j = ky.j;
  r.flags.unsaturated = ky.unsaturated;
  r.flags.nonchaotic = exponents[0] < kChaosThreshold;
  return r;
}

inline SpectrumRecord failed_record(double L, BoundaryCondition bc, std::uint64_t seed, std::size_t m) {
  SpectrumRecord r;
  r.L = L;
  r.bc = bc;
  r.seed = seed;
  r.flags.failed = true;
  r.dky = std::numeric_limits<double>::quiet_NaN();
  r.exponents = Vector::Constant(static_cast<Eigen::Index>(m), std::numeric_limits<double>::quiet_NaN());
  return r;
}

/// Spectrum of the KS equation at one domain size. The model is resolved to
/// at least k_max and to at least m state components.
inline LyapunovResult ks_spectrum(double L, BoundaryCondition bc, double k_max, const LyapunovConfig& cfg) {
  DomainSpec spec;
  spec.L = L;
  spec.bc = bc;
  spec.k_max_target = k_max;
  spec.min_dim = cfg.m;
  const auto ks = make_ks(spec);
  return compute_spectrum(ks.system, cfg);
}

// ---------------------------------------------------------------- file I/O

struct ResultsFile {
  std::vector<std::pair<std::string, std::string>> meta;  // from "# key = value" lines
  std::size_t m = 0;
  std::vector<SpectrumRecord> records;

  std::optional<std::string> meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return v;
    return std::nullopt;
  }
};

inline std::string results_header(std::size_t m) {
  std::string h = "L,bc,seed,flag,dky,j";
  for (std::size_t i = 1; i <= m; ++i) h += ",lambda_" + std::to_string(i);
  return h;
}

inline std::string format_record(const SpectrumRecord& r) {
  std::string s = format_real(r.L) + "," + std::string(to_string(r.bc)) + "," + std::to_string(r.seed) +
                  "," + r.flags.str() + "," + format_real(r.dky) + "," + std::to_string(r.j);
  for (double x : r.exponents) s += "," + format_real(x);
  return s;
}

inline void sort_by_L(std::vector<SpectrumRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const SpectrumRecord& a, const SpectrumRecord& b) { return a.L < b.L; });
}

/// Writes `# key = value` comment lines, the header row and one row per record,
/// replacing `path` atomically.
inline void write_results(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& meta, std::size_t m,
                          const std::vector<SpectrumRecord>& records) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write results file '" + tmp + "'");
    for (const auto& [k, v] : meta) out << "# " << k << " = " << v << '\n';
    out << results_header(m) << '\n';
    for (const auto& r : records) {
      if (static_cast<std::size_t>(r.exponents.size()) != m)
        throw InvalidArgument("write_results: record has wrong exponent count");
      out << format_record(r) << '\n';
    }
    out.flush();
    if (!out) throw Error("failed writing results file '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot replace results file '" + path + "': " + ec.message());
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = line.find(',');
    out.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

/// Parses a results file. Every non-failed record must be sorted and its
/// D_KY must be reproduced from its exponents to 1e-9.
inline ResultsFile read_results(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open results file '" + path + "'");
  ResultsFile f;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos && line.size() > 2)
        f.meta.emplace_back(line.substr(2, eq - 2), line.substr(eq + 3));
      continue;
    }
    const auto fields = split_csv(line);
    if (!have_header) {
      if (fields.size() < 7) throw SchemaError(lineno, "header has no exponent columns");
      f.m = fields.size() - 6;
      if (line != results_header(f.m)) throw SchemaError(lineno, "unexpected header '" + line + "'");
      have_header = true;
      continue;
    }
    if (fields.size() != 6 + f.m)
      throw SchemaError(lineno, "expected " + std::to_string(6 + f.m) + " fields, found " +
                                    std::to_string(fields.size()));
    SpectrumRecord r;
    auto real = [&](std::string_view s, const char* what) {
      const auto v = parse_real(s);
      if (!v) throw SchemaError(lineno, std::string("bad ") + what + " '" + std::string(s) + "'");
      return *v;
    };
    auto integer = [&](std::string_view s, const char* what) {
      std::uint64_t v = 0;
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw SchemaError(lineno, std::string("bad ") + what + " '" + std::string(s) + "'");
      return v;
    };
    r.L = real(fields[0], "L");
    try {
      r.bc = parse_boundary_condition(fields[1]);
      r.flags = RecordFlags::parse(fields[3]);
    } catch (const InvalidArgument& e) {
      throw SchemaError(lineno, e.what());
    }
    r.seed = integer(fields[2], "seed");
    r.dky = real(fields[4], "dky");
    r.j = static_cast<std::size_t>(integer(fields[5], "j"));
    r.exponents.resize(static_cast<Eigen::Index>(f.m));
    for (std::size_t i = 0; i < f.m; ++i) r.exponents[static_cast<Eigen::Index>(i)] = real(fields[6 + i], "exponent");

    if (!r.flags.failed) {
      KaplanYorkeResult ky;
      try {
        ky = kaplan_yorke(r.exponents);
      } catch (const Error& e) {
        throw SchemaError(lineno, e.what());
      }
      if (!(std::abs(ky.dimension - r.dky) <= 1e-9) || ky.j != r.j)
        throw SchemaError(lineno, "stored D_KY " + format_real(r.dky) +
                                      " disagrees with exponents (" + format_real(ky.dimension) + ")");
    }
    f.records.push_back(std::move(r));
  }
  if (!have_header) throw SchemaError(lineno, "missing header row");
  return f;
}

inline std::string sidecar_path(const std::string& output) { return output + ".meta.json"; }

inline nlohmann::json plan_json(const SweepPlan& plan) {
  return {
      {"L_start", plan.L_start},
      {"L_end", plan.L_end},
      {"dL", plan.dL},
      {"bc", std::string(to_string(plan.bc))},
      {"kmax", plan.k_max},
      {"m", plan.lyap.m},
      {"tau", plan.lyap.tau},
      {"T", plan.lyap.T},
      {"N", plan.lyap.N},
      {"epsilon", plan.lyap.epsilon},
      {"seed", plan.lyap.seed},
      {"dt", plan.lyap.integrator.dt},
      {"scheme", std::string(to_string(plan.lyap.integrator.scheme))},
      {"workers", plan.workers},
  };
}

inline std::vector<std::pair<std::string, std::string>> sweep_meta(const SweepPlan& plan) {
  std::vector<std::pair<std::string, std::string>> meta;
  if (!plan.command.empty()) meta.emplace_back("command", plan.command);
  std::vector<std::pair<std::string, std::string>> rest{
      {"kind", "kslyap-sweep"},
      {"fingerprint", config_fingerprint(plan)},
      {"bc", std::string(to_string(plan.bc))},
      {"kmax", format_real(plan.k_max)},
      {"dL", format_real(plan.dL)},
      {"m", std::to_string(plan.lyap.m)},
      {"tau", format_real(plan.lyap.tau)},
      {"T", format_real(plan.lyap.T)},
      {"N", std::to_string(plan.lyap.N)},
      {"epsilon", format_real(plan.lyap.epsilon)},
      {"seed", std::to_string(plan.lyap.seed)},
      {"dt", format_real(plan.lyap.integrator.dt)},
      {"scheme", std::string(to_string(plan.lyap.integrator.scheme))},
      {"L_start", format_real(plan.L_start)},
      {"L_end", format_real(plan.L_end)},
  };
  meta.insert(meta.end(), rest.begin(), rest.end());
  return meta;
}

// ---------------------------------------------------------------- execution

namespace detail {

inline bool same_L(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

inline SpectrumRecord run_grid_point(const SweepPlan& plan, double L) {
  const std::uint64_t seed = run_seed(plan.lyap.seed, plan.bc, L, plan.dL);
  LyapunovConfig cfg = plan.lyap;
  cfg.seed = seed;
  try {
    const auto res = ks_spectrum(L, plan.bc, plan.k_max, cfg);
    return make_record(L, plan.bc, seed, res.exponents);
  } catch (const Error& e) {
    std::clog << "[sweep] L=" << format_real(L) << " failed: " << e.what() << '\n';
    return failed_record(L, plan.bc, seed, plan.lyap.m);
  }
}

}  // namespace detail

/// Computes the grid points of `plan` missing from `existing_path` and merges
/// them in. Existing records are never modified or removed.
inline std::vector<SpectrumRecord> resume_sweep(const SweepPlan& plan, const std::string& existing_path) {
  validate(plan);
  const auto grid = sweep_grid(plan);
  const std::string fp = config_fingerprint(plan);

  std::vector<SpectrumRecord> records;
  if (std::filesystem::exists(existing_path)) {
    std::string stored;
    if (std::ifstream side(sidecar_path(existing_path)); side) {
      nlohmann::json j = nlohmann::json::parse(side, nullptr, false);
      if (!j.is_discarded() && j.contains("fingerprint")) stored = j["fingerprint"].get<std::string>();
    }
    auto file = read_results(existing_path);
    if (stored.empty()) stored = file.meta_value("fingerprint").value_or("");
    if (stored != fp)
      throw FingerprintMismatch("stored configuration fingerprint '" + stored +
                                "' differs from plan fingerprint '" + fp + "' (" +
                                fingerprint_text(plan) + ")");
    if (file.m != plan.lyap.m) throw FingerprintMismatch("stored exponent count differs from plan");
    records = std::move(file.records);
  }

  std::vector<double> todo;
  for (double L : grid) {
    const bool done = std::any_of(records.begin(), records.end(),
                                  [&](const SpectrumRecord& r) { return detail::same_L(r.L, L); });
    if (!done) todo.push_back(L);
  }

  const auto meta = sweep_meta(plan);
  {
    nlohmann::json side = {{"fingerprint", fp}, {"fingerprint_text", fingerprint_text(plan)},
                           {"plan", plan_json(plan)}};
    std::ofstream out(sidecar_path(plan.output_path), std::ios::trunc);
    if (!out) throw Error("cannot write sidecar '" + sidecar_path(plan.output_path) + "'");
    out << side.dump(2) << '\n';
  }
  sort_by_L(records);
  write_results(plan.output_path, meta, plan.lyap.m, records);
  if (todo.empty()) return records;

  std::mutex sink;
  std::atomic<std::size_t> next{0};
  std::exception_ptr write_error;
  auto worker = [&] {
    for (std::size_t k = next++; k < todo.size(); k = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      auto rec = detail::run_grid_point(plan, todo[k]);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard lock(sink);
      std::clog << "[sweep] L=" << format_real(rec.L) << " bc=" << to_string(rec.bc)
                << " lambda_1=" << rec.exponents[0] << " dky=" << rec.dky << " flag=" << rec.flags.str()
                << " (" << std::fixed << std::setprecision(1) << secs << std::defaultfloat << " s)\n";
      records.push_back(std::move(rec));
      sort_by_L(records);
      try {
        write_results(plan.output_path, meta, plan.lyap.m, records);
      } catch (...) {
        if (!write_error) write_error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const unsigned n = std::min<unsigned>(plan.workers, static_cast<unsigned>(todo.size()));
    for (unsigned w = 0; w + 1 < n; ++w) pool.emplace_back(worker);
    worker();
  }
  if (write_error) std::rethrow_exception(write_error);
  return records;
}

/// Runs every grid point of `plan`. With plan.resume set, records already in
/// the output file are kept and only the missing points are computed.
inline std::vector<SpectrumRecord> run_sweep(const SweepPlan& plan) {
  validate(plan);
  if (!plan.resume) {
    std::error_code ec;
    std::filesystem::remove(plan.output_path, ec);
  }
  return resume_sweep(plan, plan.output_path);
}

}  // namespace kslyap
