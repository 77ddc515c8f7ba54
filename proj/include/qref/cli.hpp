// Command-line front end: `qref run <scenario> [options]`.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration or usage error,
// 3 numerical resolution error.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "qref/scenarios.hpp"

namespace qref {

struct SweepSpec {
  std::string parameter;
  double start = 0.0;
  double stop = 0.0;
  bool logarithmic = false;
  std::size_t count = 0;

  std::vector<double> values() const;
};

/// Parses `name=start:stop:lin|log:count`.
SweepSpec parse_sweep(const std::string& text);

/// Fixed-point decimal with 12 significant digits.
std::string format_number(double x);

InterferometerConfig interferometer_config(const nlohmann::json& j);
RocketConfig rocket_config(const nlohmann::json& j);
ThirdParticleConfig third_particle_config(const nlohmann::json& j);
AppendixConfig appendix_config(const nlohmann::json& j);

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace qref
