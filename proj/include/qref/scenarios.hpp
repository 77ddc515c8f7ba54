// Turn-key runs of the reference-frame thought experiments. Every run returns
// a ScenarioReport carrying scalar metrics, flags, tables and the fully
// resolved configuration.
//
// Scenario widths are position standard deviations (sigma); the appendix
// analysis uses its own Delta convention, psi ~ exp(-(x - c)^2 / (2 Delta^2)).
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qref/packets.hpp"
#include "qref/reduce.hpp"

namespace qref {

enum class Setup { a, b };
enum class FrameF2 { none, entangled, superposed_unentangled };

std::string_view to_string(Setup s);
std::string_view to_string(FrameF2 f);

/// Lab-frame Galilean transformation applied to the prepared state: every
/// body is translated by `offset` and boosted to velocity `velocity`.
struct GalileanFrame {
  double offset = 0.0;
  double velocity = 0.0;
};

struct InterferometerConfig {
  double m_i = 0.0;  // 0: heavy default, 1e6 x m_p
  double m_p = 1.0;
  double m_f2 = 0.0;  // 0: heavy default, 1e6 x lightest body
  double L = 1.0;
  std::optional<double> width_i, width_p, width_f2;  // default L/50
  Setup setup = Setup::a;
  FrameF2 frame_f2 = FrameF2::none;
  double phase_convention = 0.0;
  bool exact_transform = false;
  GalileanFrame frame;
};

struct RocketConfig {
  double m_p = 1.0;
  double m_R = 1e4;
  double L = 10.0;
  double p = 10.0;
  double delta_xR = 0.05;
  std::optional<double> particle_width;  // default 1/(2 dp), dp = p/20
  std::size_t grid_points = 2048;
  double grid_sigmas = 8.0;
  std::optional<double> grid_extent;  // half width; default from grid_sigmas
  double window_margin = 10.0;
  GalileanFrame frame;
};

struct ThirdParticleConfig {
  double m1 = 1.0, m2 = 2.0, m3 = 3.0;
  double L = 1.0;
  double c = 5.0;
  double theta = 0.0;
  std::optional<double> width1, width2, width3;  // default L/50
  GalileanFrame frame;
};

struct AppendixConfig {
  double m1 = 1.0, m2 = 2.0;
  std::optional<double> m3;
  double delta1 = 1.0, delta2 = 1.0;
  std::optional<double> delta3;
  double a = 0.0, b = 0.0;  // two-body packet centres
  double L = 1.0, c = 5.0, theta = 0.0;  // three-body geometry
  std::optional<double> kappa;  // m_i Delta_i^2 of the balanced three-body widths
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ScenarioReport {
  std::string scenario;
  std::map<std::string, double> metrics;
  std::map<std::string, bool> flags;
  std::map<std::string, complex> complex_metrics;
  std::optional<complex> phase_estimate;
  std::map<std::string, Table> tables;
  std::optional<Table> sweep;
  std::optional<FringeProfile> fringe;
  std::vector<std::string> warnings;
  nlohmann::ordered_json config;
  nlohmann::ordered_json provenance;

  nlohmann::ordered_json to_json() const;
};

/// Validates the configuration and fills every defaulted field.
InterferometerConfig resolved(const InterferometerConfig& cfg);
RocketConfig resolved(const RocketConfig& cfg);
ThirdParticleConfig resolved(const ThirdParticleConfig& cfg);
AppendixConfig resolved(const AppendixConfig& cfg);

nlohmann::ordered_json to_json(const InterferometerConfig& cfg);
nlohmann::ordered_json to_json(const RocketConfig& cfg);
nlohmann::ordered_json to_json(const ThirdParticleConfig& cfg);
nlohmann::ordered_json to_json(const AppendixConfig& cfg);

/// Lab-coordinate state of the interferometer experiment. Body order:
/// interferometer, particle, then F2 when present.
SuperposedState interferometer_state(const InterferometerConfig& cfg);

ScenarioReport run_interferometer(const InterferometerConfig& cfg);

/// Every setup / F2 combination side by side, plus the relabelled (b') phase
/// family.
ScenarioReport run_frames(const InterferometerConfig& cfg);

/// Lab state at T = 0: rocket (body 0) and a particle in two counter-moving
/// branches at -L and +L.
SuperposedState rocket_state(const RocketConfig& cfg);

/// Visibility of the relative-coordinate fringes at T = m_p L / p.
struct RocketPoint {
  double delta_xR;
  double visibility;
  double visibility_lab;
  double purity;
  bool window_ok;
};

RocketPoint rocket_point(const RocketConfig& cfg);

/// Runs cfg.delta_xR for the metrics and fringe profile, then every sweep
/// value (empty: no sweep table).
ScenarioReport run_rocket(const RocketConfig& cfg, const std::vector<double>& sweep = {});

/// Lab states of the two- and three-particle experiments.
SuperposedState two_particle_state(const ThirdParticleConfig& cfg);
SuperposedState three_particle_state(const ThirdParticleConfig& cfg);

ScenarioReport run_third_particle(const ThirdParticleConfig& cfg);

ScenarioReport appendix_analysis(const AppendixConfig& cfg);

}  // namespace qref
