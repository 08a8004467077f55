#pragma once

// Problems addressable by descriptor, e.g. "example1d:alpha=0.6".

#include <map>
#include <string>
#include <string_view>

#include "error.hpp"
#include "problem.hpp"

namespace akalls {

struct ProblemDescriptor {
  std::string name;
  std::map<std::string, std::string> params;
};

inline ProblemDescriptor parse_descriptor(std::string_view text) {
  ProblemDescriptor desc;
  const auto colon = text.find(':');
  desc.name = std::string(text.substr(0, colon));
  if (desc.name.empty()) throw ConfigError("problem descriptor has no name: '" + std::string(text) + "'");
  if (colon == std::string_view::npos) return desc;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = rest.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ConfigError("problem parameter must be key=value: '" + std::string(item) + "'");
    }
    desc.params[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return desc;
}

namespace detail {

class ParamReader {
 public:
  explicit ParamReader(const ProblemDescriptor& d) : desc_(d), unused_(d.params) {}

  double real(const std::string& key, double fallback) {
    auto it = unused_.find(key);
    if (it == unused_.end()) return fallback;
    double v;
    try {
      std::size_t used = 0;
      v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ConfigError(desc_.name + ": parameter '" + key + "' is not a number");
    }
    unused_.erase(it);
    return v;
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const double v = real(key, static_cast<double>(fallback));
    if (v < 1 || v != std::floor(v)) throw ConfigError(desc_.name + ": '" + key + "' must be a positive integer");
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key, bool fallback) { return real(key, fallback ? 1.0 : 0.0) != 0.0; }

  void finish() const {
    if (!unused_.empty()) throw ConfigError(desc_.name + ": unknown parameter '" + unused_.begin()->first + "'");
  }

 private:
  const ProblemDescriptor& desc_;
  std::map<std::string, std::string> unused_;
};

}  // namespace detail

/// Builds a problem from its descriptor. Known names:
///   example1d:alpha=A          radial2d:alpha=A
///   threshold:dim=D            constant:eta=P,dim=D
/// Every problem also accepts analytic=0 (drop the closed-form ball mass)
/// and beta=B,C=C (declare margin noise parameters).
inline ProblemSpec make_problem(std::string_view descriptor) {
  const auto desc = parse_descriptor(descriptor);
  detail::ParamReader params(desc);
  const bool analytic = params.flag("analytic", true);
  ProblemSpec spec;
  try {
    if (desc.name == "example1d") {
      spec = make_example1d(params.real("alpha", 0.6), analytic);
    } else if (desc.name == "radial2d") {
      spec = make_radial2d(params.real("alpha", 0.6), analytic);
    } else if (desc.name == "threshold") {
      spec = make_threshold(params.count("dim", 1), analytic);
    } else if (desc.name == "constant") {
      const double p = params.real("eta", 0.5);
      spec = make_constant(p, params.count("dim", 1), analytic);
    } else {
      throw ConfigError("unknown problem '" + desc.name + "'");
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  const double beta = params.real("beta", -1.0);
  const double C = params.real("C", 1.0);
  if (beta >= 0.0) {
    if (C < 1.0) throw ConfigError(desc.name + ": C must be >= 1");
    spec.declared_noise = NoiseDecl{beta, C};
  }
  params.finish();
  return spec;
}

}  // namespace akalls
