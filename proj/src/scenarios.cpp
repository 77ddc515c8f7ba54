#include "qref/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qref/canon.hpp"
#include "qref/correlated_gaussian.hpp"
#include "qref/errors.hpp"

namespace qref {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double kHeavyFactor = 1e6;

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

nlohmann::ordered_json complex_json(complex c) {
  return {{"re", c.real()}, {"im", c.imag()}};
}

nlohmann::ordered_json table_json(const Table& t) {
  return {{"columns", t.columns}, {"rows", t.rows}};
}

nlohmann::ordered_json frame_json(const GalileanFrame& f) {
  return {{"offset", f.offset}, {"velocity", f.velocity}};
}

SuperposedState in_frame(const SuperposedState& state, const GalileanFrame& f) {
  if (f.offset == 0.0 && f.velocity == 0.0) return state;
  const std::size_t n = state.coordinate_count();
  WeylShift shift{std::vector<double>(n, f.offset), std::vector<double>(n), 0.0};
  for (std::size_t i = 0; i < n; ++i) shift.momentum_boosts[i] = state.masses()[i] * f.velocity;
  return apply_weyl(state, shift);
}

void check_frame(const GalileanFrame& f) {
  require(std::isfinite(f.offset) && std::isfinite(f.velocity),
          "frame offset and velocity must be finite");
}

}  // namespace

std::string_view to_string(Setup s) { return s == Setup::a ? "a" : "b"; }

std::string_view to_string(FrameF2 f) {
  switch (f) {
    case FrameF2::none: return "none";
    case FrameF2::entangled: return "entangled";
    case FrameF2::superposed_unentangled: return "superposed_unentangled";
  }
  return "none";
}

nlohmann::ordered_json ScenarioReport::to_json() const {
  nlohmann::ordered_json j;
  j["scenario"] = scenario;
  j["config"] = config;
  j["metrics"] = metrics;
  j["flags"] = flags;
  if (phase_estimate) j["phase_estimate"] = complex_json(*phase_estimate);
  nlohmann::ordered_json cm = nlohmann::ordered_json::object();
  for (const auto& [name, value] : complex_metrics) cm[name] = complex_json(value);
  j["complex_metrics"] = cm;
  nlohmann::ordered_json tj = nlohmann::ordered_json::object();
  for (const auto& [name, t] : tables) tj[name] = table_json(t);
  j["tables"] = tj;
  if (sweep) j["sweep"] = table_json(*sweep);
  j["warnings"] = warnings;
  j["provenance"] = provenance;
  return j;
}

// ---------------------------------------------------------------- interferometer

InterferometerConfig resolved(const InterferometerConfig& cfg) {
  InterferometerConfig r = cfg;
  require(positive(r.m_p), "particle mass must be positive");
  require(positive(r.L), "L must be positive");
  if (r.m_i == 0.0) r.m_i = kHeavyFactor * r.m_p;
  require(positive(r.m_i), "interferometer mass must be positive");
  if (r.m_f2 == 0.0) r.m_f2 = kHeavyFactor * std::min(r.m_i, r.m_p);
  require(positive(r.m_f2), "frame mass must be positive");
  for (auto* w : {&r.width_i, &r.width_p, &r.width_f2}) {
    if (!*w) *w = r.L / 50.0;
    require(positive(**w), "widths must be positive");
  }
  require(std::isfinite(r.phase_convention), "phase convention must be finite");
  check_frame(r.frame);
  return r;
}

nlohmann::ordered_json to_json(const InterferometerConfig& cfg) {
  const auto r = resolved(cfg);
  return {{"masses", {{"m_i", r.m_i}, {"m_p", r.m_p}, {"m_f2", r.m_f2}}},
          {"geometry",
           {{"L", r.L},
            {"setup", to_string(r.setup)},
            {"frame_f2", to_string(r.frame_f2)},
            {"frame", frame_json(r.frame)}}},
          {"widths", {{"interferometer", *r.width_i}, {"particle", *r.width_p}, {"f2", *r.width_f2}}},
          {"mode", {{"exact_transform", r.exact_transform}, {"phase_convention", r.phase_convention}}}};
}

SuperposedState interferometer_state(const InterferometerConfig& cfg) {
  const auto r = resolved(cfg);
  const double L = r.L;
  const bool with_f2 = r.frame_f2 != FrameF2::none;
  std::vector<double> masses{r.m_i, r.m_p};
  if (with_f2) masses.push_back(r.m_f2);

  // (x_i, x_p) per branch.
  std::vector<std::pair<double, double>> positions =
      r.setup == Setup::a ? std::vector<std::pair<double, double>>{{0.0, -L}, {0.0, L}}
                          : std::vector<std::pair<double, double>>{{-L, 0.0}, {L, 0.0}};
  std::vector<Branch> branches;
  for (const auto& [xi, xp] : positions) {
    std::vector<GaussianPacket> packets{GaussianPacket::from_sigma(xi, *r.width_i),
                                        GaussianPacket::from_sigma(xp, *r.width_p)};
    switch (r.frame_f2) {
      case FrameF2::none:
        branches.push_back({1.0 / std::sqrt(2.0), packets});
        break;
      case FrameF2::entangled: {
        // F2 follows whichever body is in superposition.
        const double xf = r.setup == Setup::a ? xp : xi;
        packets.push_back(GaussianPacket::from_sigma(xf, *r.width_f2));
        branches.push_back({1.0 / std::sqrt(2.0), packets});
        break;
      }
      case FrameF2::superposed_unentangled:
        for (const double xf : {-L, L}) {
          auto with = packets;
          with.push_back(GaussianPacket::from_sigma(xf, *r.width_f2));
          branches.push_back({0.5, with});
        }
        break;
    }
  }
  return in_frame(SuperposedState(MassConfig(masses), branches), r.frame);
}

namespace {

struct DetectorRun {
  double purity;
  double relative_state_purity;
  complex coherence;
  DetectorProbabilities ports;
  DetectorProbabilities mirrors;
  complex lab_shift;
  DetectorProbabilities lab_ports;
};

DetectorRun detect(const SuperposedState& lab, double L, double phase, bool exact) {
  const auto map = conjugate_momenta(cm_relative_map(lab.masses(), 0));
  const auto t =
      transform_state(lab, map, exact ? TransformMode::exact : TransformMode::approximate);
  DetectorRun run{};
  if (exact) {
    const auto rho = partial_trace(t.exact_branches, 1);
    run.purity = purity(rho);
    run.relative_state_purity = purity(partial_trace(t.exact_branches, 0));
    run.coherence = coherence(rho, -L, L) / rho.trace().real();
    run.ports = detector_probabilities(rho, -L, L, phase);
    run.mirrors = detector_probabilities(rho, -L, L, phase, DetectorPlacement::mirrors);
  } else {
    const auto rho = partial_trace(t.state, {1});
    run.purity = purity(rho);
    run.relative_state_purity = purity(partial_trace(t.state, {0}));
    run.coherence = coherence(rho, -L, L) / rho.trace().real();
    run.ports = detector_probabilities(rho, -L, L, phase);
    run.mirrors = detector_probabilities(rho, -L, L, phase, DetectorPlacement::mirrors);
  }
  // Lab route: the relative shift by 2L, written on lab momenta.
  run.lab_shift = expectation_weyl(lab, map.momentum_form(1), 2.0 * L);
  const double p_left =
      std::clamp(0.5 + (std::polar(1.0, phase) * run.lab_shift).real(), 0.0, 1.0);
  run.lab_ports = {p_left, 1.0 - p_left};
  return run;
}

Table relabelled_phase_family(const InterferometerConfig& r, double actual_p_left) {
  Table t{{"relabelled_phase", "p_left_relabelled", "p_left_actual"}, {}};
  for (int k = 0; k <= 12; ++k) {
    const double phi = 2.0 * pi * k / 12.0;
    const MassConfig masses({r.m_i, r.m_p});
    SuperposedState s(masses,
                      {{1.0, {GaussianPacket::from_sigma(0.0, *r.width_i),
                              GaussianPacket::from_sigma(-r.L, *r.width_p)}},
                       {std::polar(1.0, phi), {GaussianPacket::from_sigma(0.0, *r.width_i),
                                               GaussianPacket::from_sigma(r.L, *r.width_p)}}});
    const auto run = detect(s, r.L, r.phase_convention, false);
    t.rows.push_back({phi, run.ports.p_left, actual_p_left});
  }
  return t;
}

}  // namespace

ScenarioReport run_interferometer(const InterferometerConfig& cfg) {
  const auto r = resolved(cfg);
  const auto lab = interferometer_state(r);
  const auto run = detect(lab, r.L, r.phase_convention, r.exact_transform);

  ScenarioReport rep;
  rep.scenario = "interferometer";
  rep.config = to_json(r);
  rep.metrics = {{"purity", run.purity},
                 {"relative_state_purity", run.relative_state_purity},
                 {"coherence_abs", std::abs(run.coherence)},
                 {"p_left", run.ports.p_left},
                 {"p_right", run.ports.p_right},
                 {"mirrors_p_left", run.mirrors.p_left},
                 {"mirrors_p_right", run.mirrors.p_right},
                 {"p_left_lab", run.lab_ports.p_left},
                 {"p_right_lab", run.lab_ports.p_right},
                 {"frame_consistency_delta", std::abs(run.ports.p_left - run.lab_ports.p_left)},
                 {"mass_ratio", r.m_p / r.m_i}};
  rep.complex_metrics = {{"coherence", run.coherence}, {"lab_shift_expectation", run.lab_shift}};
  rep.flags = {{"pure_relative_state", run.purity >= 0.99},
               {"interference", std::abs(run.coherence) >= 0.25}};
  if (r.setup == Setup::b) {
    rep.tables["relabelled_phase_family"] = relabelled_phase_family(r, run.ports.p_left);
  }
  if (r.m_i < 100.0 * r.m_p) {
    rep.warnings.push_back("interferometer is not much heavier than the particle");
  }
  rep.provenance = {{"transform", r.exact_transform ? "exact" : "approximate"},
                    {"tolerances", {{"frame_consistency", 1e-6}}},
                    {"oracle_deltas", {{"lab_vs_relative_p_left",
                                        std::abs(run.ports.p_left - run.lab_ports.p_left)}}},
                    {"heavy_mass_condition", {{"m_p_over_m_i", r.m_p / r.m_i},
                                              {"width_over_L", *r.width_p / r.L}}}};
  return rep;
}

ScenarioReport run_frames(const InterferometerConfig& cfg) {
  const auto base = resolved(cfg);
  ScenarioReport rep;
  rep.scenario = "frames";
  rep.config = to_json(base);
  Table t{{"setup", "frame_f2", "purity", "relative_state_purity", "p_left", "p_left_lab"}, {}};
  std::map<std::pair<int, int>, ScenarioReport> runs;
  for (const Setup setup : {Setup::a, Setup::b}) {
    for (const FrameF2 f2 : {FrameF2::none, FrameF2::entangled, FrameF2::superposed_unentangled}) {
      auto c = base;
      c.setup = setup;
      c.frame_f2 = f2;
      auto run = run_interferometer(c);
      const std::string key = std::string(to_string(setup)) + "_" + std::string(to_string(f2));
      for (const char* m : {"purity", "relative_state_purity", "p_left", "p_left_lab"}) {
        rep.metrics[key + "_" + m] = run.metrics.at(m);
      }
      t.rows.push_back({static_cast<double>(setup), static_cast<double>(f2),
                        run.metrics.at("purity"), run.metrics.at("relative_state_purity"),
                        run.metrics.at("p_left"), run.metrics.at("p_left_lab")});
      runs.emplace(std::pair{static_cast<int>(setup), static_cast<int>(f2)}, std::move(run));
    }
  }
  rep.tables["combinations"] = t;
  const auto m = [&](Setup s, FrameF2 f, const char* name) {
    return runs.at({static_cast<int>(s), static_cast<int>(f)}).metrics.at(name);
  };
  double preserved = 0.0, consistency = 0.0;
  for (const Setup s : {Setup::a, Setup::b}) {
    preserved = std::max(preserved, std::abs(m(s, FrameF2::superposed_unentangled, "p_left") -
                                             m(s, FrameF2::none, "p_left")));
    for (const FrameF2 f : {FrameF2::none, FrameF2::entangled, FrameF2::superposed_unentangled}) {
      consistency = std::max(consistency, std::abs(m(s, f, "p_left") - m(s, f, "p_left_lab")));
    }
  }
  rep.metrics["unentangled_f2_p_left_change"] = preserved;
  rep.metrics["frame_consistency_delta"] = consistency;
  rep.flags["entangled_f2_destroys_interference"] =
      std::abs(m(Setup::a, FrameF2::entangled, "p_left") - 0.5) <= 1e-3;
  rep.flags["unentangled_f2_preserves_predictions"] = preserved <= 1e-6;
  rep.flags["unentangled_f2_reduces_purity"] =
      m(Setup::a, FrameF2::superposed_unentangled, "relative_state_purity") <
      m(Setup::a, FrameF2::none, "relative_state_purity") - 0.1;
  auto b = base;
  b.setup = Setup::b;
  b.frame_f2 = FrameF2::none;
  rep.tables["relabelled_phase_family"] =
      relabelled_phase_family(b, m(Setup::b, FrameF2::none, "p_left"));
  rep.provenance = {{"transform", base.exact_transform ? "exact" : "approximate"},
                    {"tolerances", {{"frame_consistency", 1e-6}, {"prediction_change", 1e-6}}}};
  return rep;
}

// ---------------------------------------------------------------- rocket

RocketConfig resolved(const RocketConfig& cfg) {
  RocketConfig r = cfg;
  require(positive(r.m_p) && positive(r.m_R), "masses must be positive");
  require(positive(r.L) && positive(r.p), "L and p must be positive");
  require(positive(r.delta_xR), "delta_xR must be positive");
  if (!r.particle_width) r.particle_width = 1.0 / (2.0 * r.p / 20.0);
  require(positive(*r.particle_width), "particle width must be positive");
  require(r.grid_points >= 3, "grid needs at least three points");
  require(positive(r.grid_sigmas), "grid sigmas must be positive");
  if (r.grid_extent) require(positive(*r.grid_extent), "grid extent must be positive");
  require(positive(r.window_margin), "window margin must be positive");
  check_frame(r.frame);
  return r;
}

nlohmann::ordered_json to_json(const RocketConfig& cfg) {
  const auto r = resolved(cfg);
  nlohmann::ordered_json grid = {{"points", r.grid_points}, {"sigmas", r.grid_sigmas}};
  grid["extent"] = r.grid_extent ? nlohmann::ordered_json(*r.grid_extent) : nlohmann::ordered_json();
  return {{"masses", {{"m_p", r.m_p}, {"m_R", r.m_R}}},
          {"geometry", {{"L", r.L}, {"p", r.p}, {"frame", frame_json(r.frame)}}},
          {"widths", {{"delta_xR", r.delta_xR}, {"particle", *r.particle_width}}},
          {"grid", grid},
          {"mode", {{"window_margin", r.window_margin}}}};
}

SuperposedState rocket_state(const RocketConfig& cfg) {
  const auto r = resolved(cfg);
  const double s = *r.particle_width;
  const auto rocket = GaussianPacket::from_sigma(0.0, r.delta_xR);
  SuperposedState state(
      MassConfig({r.m_R, r.m_p}),
      {{1.0 / std::sqrt(2.0), {rocket, GaussianPacket::from_sigma(-r.L, s, r.p)}},
       {1.0 / std::sqrt(2.0), {rocket, GaussianPacket::from_sigma(r.L, s, -r.p)}}});
  return in_frame(state, r.frame);
}

namespace {

// Density of x_1 - x_0 computed directly on the lab wavefunction:
// P(r) = int dy |Psi(y, y + r)|^2.
double lab_relative_density(const SuperposedState& lab, double r) {
  complex total = 0.0;
  const auto shifted_packet = [r](const GaussianPacket& g) {
    return GaussianPacket(g.centre() - r, g.width(), g.momentum(),
                          g.phase() + g.momentum() * r);
  };
  for (const auto& bi : lab.branches()) {
    for (const auto& bj : lab.branches()) {
      const std::array<GaussianPacket, 4> ps{bi.packets[0], shifted_packet(bi.packets[1]),
                                             bj.packets[0], shifted_packet(bj.packets[1])};
      double origin = 0.0;
      for (const auto& p : ps) origin += 0.25 * p.centre();
      const Eigen::VectorXd o = Eigen::VectorXd::Constant(1, origin);
      const std::array<Eigen::Index, 1> slot{0};
      GaussianExponent e(1);
      for (std::size_t k = 0; k < 4; ++k) {
        const auto g = CorrelatedGaussian::from_packets(std::span(&ps[k], 1)).recentred(o);
        e.add(g, slot, k >= 2);
      }
      total += bi.amplitude * std::conj(bj.amplitude) * e.integrate();
    }
  }
  return total.real();
}

struct RocketRun {
  RocketPoint point;
  FringeProfile profile;
  double spread_at_T;
};

RocketRun rocket_run(const RocketConfig& r) {
  const double T = r.m_p * r.L / r.p;
  const auto lab = gram_and_normalize(evolve_free(rocket_state(r), T)).state;
  const auto t = transform_state(lab, cm_relative_map(lab.masses(), 0), TransformMode::exact);
  const auto rho = partial_trace(t.exact_branches, 1);

  GridSpec grid = default_grid(rho, r.grid_points, r.grid_sigmas);
  if (r.grid_extent) grid.half_extent = *r.grid_extent;
  auto profile = fringe_profile(rho, grid);

  FringeProfile lab_profile{{}, grid};
  lab_profile.samples.reserve(grid.points);
  for (std::size_t i = 0; i < grid.points; ++i) {
    const double x = grid.position(i);
    lab_profile.samples.push_back({x, std::max(0.0, lab_relative_density(lab, x))});
  }

  const double lower = r.m_p * r.L / r.m_R;
  const double lambda = 2.0 * pi / r.p;
  RocketPoint point{r.delta_xR, visibility(profile), visibility(lab_profile), purity(rho),
                    r.window_margin * lower <= r.delta_xR &&
                        r.delta_xR * r.window_margin <= lambda};
  const double spread = T / (2.0 * r.m_R * r.delta_xR);
  return {point, std::move(profile), std::sqrt(r.delta_xR * r.delta_xR + spread * spread)};
}

}  // namespace

RocketPoint rocket_point(const RocketConfig& cfg) { return rocket_run(resolved(cfg)).point; }

ScenarioReport run_rocket(const RocketConfig& cfg, const std::vector<double>& sweep) {
  const auto r = resolved(cfg);
  auto run = rocket_run(r);
  const double T = r.m_p * r.L / r.p;
  const double lower = r.m_p * r.L / r.m_R;
  const double lambda = 2.0 * pi / r.p;

  ScenarioReport rep;
  rep.scenario = "rocket";
  rep.config = to_json(r);
  rep.metrics = {{"delta_xR", r.delta_xR},
                 {"visibility", run.point.visibility},
                 {"visibility_lab", run.point.visibility_lab},
                 {"frame_consistency_delta",
                  std::abs(run.point.visibility - run.point.visibility_lab)},
                 {"purity", run.point.purity},
                 {"T", T},
                 {"wavelength", lambda},
                 {"window_lower", lower},
                 {"window_upper", lambda},
                 {"rocket_spread_at_T", run.spread_at_T}};
  rep.flags = {{"window_ok", run.point.window_ok}};
  rep.fringe = std::move(run.profile);
  if (!sweep.empty()) {
    Table t{{"delta_xR", "visibility", "window_ok"}, {}};
    for (const double d : sweep) {
      auto c = r;
      c.delta_xR = d;
      const auto p = rocket_point(c);
      t.rows.push_back({d, p.visibility, p.window_ok ? 1.0 : 0.0});
    }
    rep.sweep = std::move(t);
  }
  if (r.m_R < 100.0 * r.m_p) rep.warnings.push_back("rocket is not much heavier than the particle");
  rep.provenance = {{"transform", "exact"},
                    {"window_rule", "margin * m_p L / m_R <= delta_xR <= wavelength / margin"},
                    {"tolerances", {{"frame_consistency", 1e-6}}},
                    {"oracle_deltas", {{"lab_vs_relative_visibility",
                                        rep.metrics.at("frame_consistency_delta")}}}};
  return rep;
}

// ---------------------------------------------------------------- third particle

ThirdParticleConfig resolved(const ThirdParticleConfig& cfg) {
  ThirdParticleConfig r = cfg;
  require(positive(r.m1) && positive(r.m2) && positive(r.m3), "masses must be positive");
  require(positive(r.L), "L must be positive");
  require(std::isfinite(r.c) && std::isfinite(r.theta), "c and theta must be finite");
  for (auto* w : {&r.width1, &r.width2, &r.width3}) {
    if (!*w) *w = r.L / 50.0;
    require(positive(**w), "widths must be positive");
  }
  check_frame(r.frame);
  return r;
}

nlohmann::ordered_json to_json(const ThirdParticleConfig& cfg) {
  const auto r = resolved(cfg);
  return {{"masses", {{"m1", r.m1}, {"m2", r.m2}, {"m3", r.m3}}},
          {"geometry", {{"L", r.L}, {"c", r.c}, {"frame", frame_json(r.frame)}}},
          {"widths", {{"w1", *r.width1}, {"w2", *r.width2}, {"w3", *r.width3}}},
          {"theta", r.theta}};
}

namespace {

std::pair<double, double> ab(const ThirdParticleConfig& r) {
  const double a = r.m2 * r.L / (r.m1 + r.m2);
  const double b = r.m1 * r.L / (r.m1 + r.m2);
  if (std::abs(r.m1 * a - r.m2 * b) > 1e-12 * std::max(1.0, r.m1 * a)) {
    throw ConfigError("centre of mass is not at the origin");
  }
  return {a, b};
}

}  // namespace

SuperposedState two_particle_state(const ThirdParticleConfig& cfg) {
  const auto r = resolved(cfg);
  const auto [a, b] = ab(r);
  SuperposedState s(MassConfig({r.m1, r.m2}),
                    {{1.0 / std::sqrt(2.0), {GaussianPacket::from_sigma(-a, *r.width1),
                                             GaussianPacket::from_sigma(b, *r.width2)}},
                     {std::polar(1.0 / std::sqrt(2.0), r.theta),
                      {GaussianPacket::from_sigma(a, *r.width1),
                       GaussianPacket::from_sigma(-b, *r.width2)}}});
  return in_frame(s, r.frame);
}

SuperposedState three_particle_state(const ThirdParticleConfig& cfg) {
  const auto r = resolved(cfg);
  const auto [a, b] = ab(r);
  const auto third = GaussianPacket::from_sigma(r.c, *r.width3);
  SuperposedState s(MassConfig({r.m1, r.m2, r.m3}),
                    {{1.0 / std::sqrt(2.0), {GaussianPacket::from_sigma(-a, *r.width1),
                                             GaussianPacket::from_sigma(b, *r.width2), third}},
                     {std::polar(1.0 / std::sqrt(2.0), r.theta),
                      {GaussianPacket::from_sigma(a, *r.width1),
                       GaussianPacket::from_sigma(-b, *r.width2), third}}});
  return in_frame(s, r.frame);
}

ScenarioReport run_third_particle(const ThirdParticleConfig& cfg) {
  const auto r = resolved(cfg);
  const auto [a, b] = ab(r);
  const double L2 = 2.0 * r.L;
  const complex expected = std::polar(0.5, r.theta);

  // (i) two particles.
  const auto two = two_particle_state(r);
  const auto pr_two = relative_momentum_forms(two.masses())[1];
  const complex two_lab = expectation_weyl(two, pr_two, L2);
  const auto map_two = conjugate_momenta(cm_relative_map(two.masses()));
  const auto rel_two = transform_state(two, map_two).state;
  const complex two_rel = expectation_weyl(rel_two, transform_form(pr_two, map_two), L2);
  const complex two_naive = coherence(partial_trace(rel_two, {1}), r.L, -r.L);

  // (ii) three particles, lab factorization and relative pi factorization.
  const auto three = three_particle_state(r);
  const MassConfig& m = three.masses();
  const auto pr2 = relative_momentum_forms(m)[1];
  const complex lab_est = expectation_weyl(three, pr2, L2);
  const auto map = conjugate_momenta(cm_relative_map(m));
  const auto rel = transform_state(three, map).state;
  const auto rel_form = transform_form(pr2, map);
  const complex rel_est = expectation_weyl(rel, rel_form, L2);

  // (iii) naive trace over cm and r3.
  const complex naive = coherence(partial_trace(rel, {1}), r.L, -r.L);

  // (iv) q representation.
  const auto qmap =
      conjugate_positions(physical_momentum_matrix(m), {"q_cm", "q_r2", "q_r3"});
  const auto qs = transform_state(three, qmap, TransformMode::approximate,
                                  CoordinateSystem::cm_relative_q)
                      .state;
  const auto q_form = transform_form(pr2, qmap);
  const double g = gamma_mass(m);
  const double alpha = g * m.reduced(0, 2) / r.m1;
  WeylShift q_shift{std::vector<double>(3), std::vector<double>(3, 0.0), 0.0};
  for (std::size_t i = 0; i < 3; ++i) q_shift.position_shifts[i] = L2 * q_form.p_coeffs[i];
  const auto q_shifted = apply_weyl(qs, q_shift);
  const complex q_est = expectation_weyl(qs, q_form, L2);
  const auto& qb = qs.branches();
  const double q_r3_spread = std::abs(qb[0].packets[2].centre() - qb[1].packets[2].centre());
  const double q_cm_spread = std::abs(qb[0].packets[0].centre() - qb[1].packets[0].centre());
  const double q_nonlocal = std::max(std::abs(q_form.p_coeffs[0]), std::abs(q_form.p_coeffs[2]));
  Table q_table{{"branch", "q_cm", "q_r2", "q_r3", "q_r2_shifted", "q_r2_expected"}, {}};
  for (std::size_t k = 0; k < 2; ++k) {
    const double sign = k == 0 ? 1.0 : -1.0;
    q_table.rows.push_back({static_cast<double>(k), qb[k].packets[0].centre(),
                            qb[k].packets[1].centre(), qb[k].packets[2].centre(),
                            q_shifted.branches()[k].packets[1].centre(),
                            sign * r.L - alpha * r.c});
  }

  // (v) non-commuting relative observables.
  const complex comm = commutator(map.position_form(2), pr2);

  ScenarioReport rep;
  rep.scenario = "third-particle";
  rep.config = to_json(r);
  rep.phase_estimate = lab_est;
  rep.complex_metrics = {{"two_particle_estimate", two_lab},
                         {"two_particle_relative_estimate", two_rel},
                         {"three_particle_lab_estimate", lab_est},
                         {"three_particle_relative_estimate", rel_est},
                         {"q_basis_estimate", q_est},
                         {"commutator_xr3_pr2", comm}};
  rep.metrics = {{"a", a},
                 {"b", b},
                 {"two_particle_error", std::abs(two_lab - expected)},
                 {"three_particle_error", std::abs(lab_est - expected)},
                 {"route_delta", std::abs(lab_est - rel_est)},
                 {"two_particle_route_delta", std::abs(two_lab - two_rel)},
                 {"third_particle_effect", std::abs(lab_est - two_lab)},
                 {"naive_coherence", std::abs(naive)},
                 {"two_particle_coherence", std::abs(two_naive)},
                 {"q_r3_centre", qb[0].packets[2].centre()},
                 {"q_r3_expected", g * r.c},
                 {"q_r3_spread", q_r3_spread},
                 {"q_cm_spread", q_cm_spread},
                 {"q_shift_nonlocal_coeff", q_nonlocal},
                 {"q_basis_error", std::abs(q_est - expected)},
                 {"gamma_mass", g},
                 {"alpha_q", alpha},
                 {"commutator_im", comm.imag()},
                 {"commutator_expected_im", m.reduced(0, 1) / r.m1}};
  rep.tables["q_centres"] = q_table;
  const double scale = std::max(1.0, std::abs(g * r.c));
  rep.flags = {{"q_separable", q_r3_spread <= 1e-10 * scale && q_cm_spread <= 1e-10 * scale},
               {"shift_local_in_q", q_nonlocal <= 1e-12},
               {"naive_trace_loses_phase", std::abs(naive) <= 1e-10},
               {"routes_agree", std::abs(lab_est - rel_est) <= 1e-10}};
  rep.provenance = {{"transform", "approximate"},
                    {"tolerances", {{"route_agreement", 1e-10}, {"naive_coherence", 1e-10}}},
                    {"oracle_deltas", {{"lab_vs_relative", std::abs(lab_est - rel_est)}}}};
  return rep;
}

// ---------------------------------------------------------------- appendix

AppendixConfig resolved(const AppendixConfig& cfg) {
  AppendixConfig r = cfg;
  require(positive(r.m1) && positive(r.m2), "masses must be positive");
  require(positive(r.delta1) && positive(r.delta2), "widths must be positive");
  require(std::isfinite(r.a) && std::isfinite(r.b), "centres must be finite");
  if (r.m3) {
    require(positive(*r.m3), "masses must be positive");
    require(positive(r.L) && std::isfinite(r.c) && std::isfinite(r.theta),
            "three-body geometry must be finite with L > 0");
    if (!r.kappa) r.kappa = r.m1 * std::pow(r.L / 50.0, 2);
    require(positive(*r.kappa), "kappa must be positive");
    const double d3 = std::sqrt(*r.kappa / *r.m3);
    if (!r.delta3) r.delta3 = d3;
    require(positive(*r.delta3), "widths must be positive");
  }
  return r;
}

nlohmann::ordered_json to_json(const AppendixConfig& cfg) {
  const auto r = resolved(cfg);
  nlohmann::ordered_json masses = {{"m1", r.m1}, {"m2", r.m2}};
  nlohmann::ordered_json widths = {{"delta1", r.delta1}, {"delta2", r.delta2}};
  nlohmann::ordered_json geometry = {{"a", r.a}, {"b", r.b}};
  if (r.m3) {
    masses["m3"] = *r.m3;
    widths["delta3"] = *r.delta3;
    widths["kappa"] = *r.kappa;
    geometry["L"] = r.L;
    geometry["c"] = r.c;
  }
  nlohmann::ordered_json j = {{"masses", masses}, {"widths", widths}, {"geometry", geometry}};
  if (r.m3) j["theta"] = r.theta;
  return j;
}

ScenarioReport appendix_analysis(const AppendixConfig& cfg) {
  const auto r = resolved(cfg);
  ScenarioReport rep;
  rep.scenario = "appendix";
  rep.config = to_json(r);

  const double d1sq = r.delta1 * r.delta1, d2sq = r.delta2 * r.delta2;
  const MassConfig two({r.m1, r.m2});
  const SuperposedState s(two, {{1.0, {GaussianPacket(r.a, d1sq), GaussianPacket(r.b, d2sq)}}});
  const auto t = transform_state(s, cm_relative_map(two), TransformMode::exact);
  const auto& rep2 = t.exact_reports.at(0);
  const Eigen::MatrixXd P = t.exact_branches.at(0).precision.real();
  const double precision_delta =
      std::max({std::abs(P(0, 0) - 1.0 / rep2.delta_c_sq), std::abs(P(1, 1) - 1.0 / rep2.delta_r_sq),
                std::abs(-P(0, 1) - rep2.gamma_corr)});
  rep.metrics = {{"delta_c_sq", rep2.delta_c_sq},
                 {"delta_r_sq", rep2.delta_r_sq},
                 {"alpha", rep2.alpha},
                 {"beta", rep2.beta},
                 {"gamma_corr", rep2.gamma_corr},
                 {"precision_route_delta", precision_delta}};
  rep.flags = {{"product_state", rep2.gamma_corr == 0.0}};

  if (r.m3) {
    const double m3 = *r.m3;
    const double kappa = *r.kappa;
    const MassConfig three({r.m1, r.m2, m3});
    const double M = three.total();
    const double a = r.m2 * r.L / (r.m1 + r.m2), b = r.m1 * r.L / (r.m1 + r.m2);
    const auto packet = [&](double c, double m) { return GaussianPacket(c, kappa / m); };
    const SuperposedState st(
        three, {{1.0, {packet(-a, r.m1), packet(b, r.m2), packet(r.c, m3)}},
                {std::polar(1.0, r.theta), {packet(a, r.m1), packet(-b, r.m2), packet(r.c, m3)}}});
    const auto t3 = transform_state(st, cm_relative_map(three), TransformMode::exact);
    bool decoupled = true;
    double cm_coupling = 0.0;
    for (const auto& res : t3.residuals) {
      decoupled = decoupled && res.cm_decoupled;
      cm_coupling = std::max(cm_coupling, res.cm_coupling);
    }
    const double coupling = t3.residuals.at(0).precision(1, 2);
    const auto rho = partial_trace(t3.exact_branches, 1);
    const complex off = coherence(rho, r.L, -r.L);
    rep.metrics["three_body_kappa"] = kappa;
    rep.metrics["three_body_cm_coupling"] = cm_coupling;
    rep.metrics["three_body_relative_coupling"] = coupling;
    rep.metrics["three_body_relative_coupling_expected"] = -r.m2 * m3 / (M * kappa);
    rep.metrics["three_body_traced_coherence"] = std::abs(off);
    rep.metrics["three_body_trace"] = rho.trace().real();
    rep.flags["three_body_cm_decoupled"] = decoupled;
    rep.flags["three_body_relative_correlated"] = t3.correlated;
    rep.flags["three_body_phase_unobservable"] = std::abs(off) <= 1e-10;
  }
  rep.provenance = {{"transform", "exact"},
                    {"width_convention", "psi ~ exp(-(x - c)^2 / (2 Delta^2))"},
                    {"tolerances", {{"closed_form", 1e-12}}}};
  return rep;
}

}  // namespace qref
