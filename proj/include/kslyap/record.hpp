#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "kslyap/errors.hpp"
#include "kslyap/ks_models.hpp"
#include "kslyap/ode_core.hpp"

namespace kslyap {

struct RecordFlags {
  bool nonchaotic = false;
  bool unsaturated = false;
  bool failed = false;

  bool operator==(const RecordFlags&) const = default;

  /// "ok" when no flag is set, otherwise the set flags joined by '|'.
  std::string str() const {
    std::string s;
    auto add = [&](bool on, std::string_view name) {
      if (!on) return;
      if (!s.empty()) s += '|';
      s += name;
    };
    add(failed, "failed");
    add(nonchaotic, "nonchaotic");
    add(unsaturated, "unsaturated");
    return s.empty() ? "ok" : s;
  }

  static RecordFlags parse(std::string_view s) {
    RecordFlags f;
    if (s == "ok") return f;
    while (!s.empty()) {
      const auto bar = s.find('|');
      const auto tok = s.substr(0, bar);
      if (tok == "failed") f.failed = true;
      else if (tok == "nonchaotic") f.nonchaotic = true;
      else if (tok == "unsaturated") f.unsaturated = true;
      else throw InvalidArgument("unknown record flag '" + std::string(tok) + "'");
      if (bar == std::string_view::npos) break;
      s.remove_prefix(bar + 1);
    }
    return f;
  }
};

/// One grid point of a sweep.
struct SpectrumRecord {
  double L = 0;
  BoundaryCondition bc = BoundaryCondition::Periodic;
  std::uint64_t seed = 0;
  RecordFlags flags;
  double dky = 0;
  std::size_t j = 0;
  Vector exponents;  // descending; NaN-filled when failed
};

}  // namespace kslyap
