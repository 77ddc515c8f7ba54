#include "qref/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "qref/errors.hpp"

namespace qref {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config reading

void allow(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known) throw ConfigError("unknown key '" + where + "." + item.key() + "'");
  }
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double number(const json& v, const std::string& name) {
  if (!v.is_number()) throw ConfigError(name + " must be a number");
  return v.get<double>();
}

void read(const json& obj, const std::string& where, const char* key, double& target) {
  if (const json* v = find(obj, key)) target = number(*v, where + "." + key);
}

void read(const json& obj, const std::string& where, const char* key, std::optional<double>& target) {
  if (const json* v = find(obj, key)) target = number(*v, where + "." + key);
}

void read(const json& obj, const std::string& where, const char* key, bool& target) {
  if (const json* v = find(obj, key)) {
    if (!v->is_boolean()) throw ConfigError(where + "." + key + " must be true or false");
    target = v->get<bool>();
  }
}

void read(const json& obj, const std::string& where, const char* key, std::size_t& target) {
  if (const json* v = find(obj, key)) {
    if (!v->is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
    target = v->get<std::size_t>();
  }
}

std::string text(const json& v, const std::string& name) {
  if (!v.is_string()) throw ConfigError(name + " must be a string");
  return v.get<std::string>();
}

Setup parse_setup(const std::string& s) {
  if (s == "a") return Setup::a;
  if (s == "b") return Setup::b;
  throw ConfigError("setup must be 'a' or 'b'");
}

FrameF2 parse_frame_f2(const std::string& s) {
  for (const FrameF2 f : {FrameF2::none, FrameF2::entangled, FrameF2::superposed_unentangled}) {
    if (s == to_string(f)) return f;
  }
  throw ConfigError("frame_f2 must be none, entangled or superposed_unentangled");
}

void read_frame(const json& geometry, GalileanFrame& frame) {
  if (const json* f = find(geometry, "frame")) {
    allow(*f, "geometry.frame", {"offset", "velocity"});
    read(*f, "geometry.frame", "offset", frame.offset);
    read(*f, "geometry.frame", "velocity", frame.velocity);
  }
}

const json& root_object(const json& j, std::initializer_list<const char*> keys) {
  if (j.is_null()) {
    static const json empty = json::object();
    return empty;
  }
  allow(j, "config", keys);
  return j;
}

// ---------------------------------------------------------------- output

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << content;
  if (!f) throw ConfigError("cannot write " + path.string());
}

std::string csv(const Table& t) {
  std::string s;
  for (std::size_t c = 0; c < t.columns.size(); ++c) s += (c ? "," : "") + t.columns[c];
  s += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) s += ',';
      const std::string& name = t.columns[c];
      const bool boolean = name.size() > 3 && name.compare(name.size() - 3, 3, "_ok") == 0;
      s += boolean ? (row[c] != 0.0 ? "1" : "0") : format_number(row[c]);
    }
    s += '\n';
  }
  return s;
}

std::string fringe_csv(const FringeProfile& profile) {
  std::string s = "position,intensity\n";
  for (const auto& p : profile.samples) {
    s += format_number(p.position) + "," + format_number(p.intensity) + "\n";
  }
  return s;
}

// ---------------------------------------------------------------- sweeps

Table interferometer_sweep(const InterferometerConfig& base, const SweepSpec& sweep) {
  Table t{{sweep.parameter, "purity", "p_left", "p_right", "p_left_lab"}, {}};
  for (const double v : sweep.values()) {
    auto c = base;
    if (sweep.parameter == "m_i") c.m_i = v;
    else if (sweep.parameter == "m_p") c.m_p = v;
    else if (sweep.parameter == "L") c.L = v;
    else if (sweep.parameter == "phase_convention") c.phase_convention = v;
    else throw ConfigError("interferometer sweeps accept m_i, m_p, L or phase_convention");
    const auto r = run_interferometer(c);
    t.rows.push_back({v, r.metrics.at("purity"), r.metrics.at("p_left"), r.metrics.at("p_right"),
                      r.metrics.at("p_left_lab")});
  }
  return t;
}

Table third_particle_sweep(const ThirdParticleConfig& base, const SweepSpec& sweep) {
  Table t{{sweep.parameter, "phase_re", "phase_im", "phase_error", "route_delta", "naive_coherence"},
          {}};
  for (const double v : sweep.values()) {
    auto c = base;
    if (sweep.parameter == "theta") c.theta = v;
    else if (sweep.parameter == "c") c.c = v;
    else if (sweep.parameter == "L") c.L = v;
    else throw ConfigError("third-particle sweeps accept theta, c or L");
    const auto r = run_third_particle(c);
    t.rows.push_back({v, r.phase_estimate->real(), r.phase_estimate->imag(),
                      r.metrics.at("three_particle_error"), r.metrics.at("route_delta"),
                      r.metrics.at("naive_coherence")});
  }
  return t;
}

const char* kScenarios[] = {"interferometer", "rocket", "third-particle", "frames", "appendix"};

}  // namespace

// ---------------------------------------------------------------- public helpers

std::vector<double> SweepSpec::values() const {
  std::vector<double> v;
  v.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    v.push_back(logarithmic ? std::exp(std::log(start) + t * (std::log(stop) - std::log(start)))
                            : start + t * (stop - start));
  }
  if (count > 1) v.back() = stop;
  return v;
}

SweepSpec parse_sweep(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("sweep must look like name=start:stop:lin|log:count");
  SweepSpec s;
  s.parameter = spec.substr(0, eq);
  std::vector<std::string> parts;
  std::stringstream rest(spec.substr(eq + 1));
  for (std::string p; std::getline(rest, p, ':');) parts.push_back(p);
  if (parts.size() != 4) throw ConfigError("sweep must look like name=start:stop:lin|log:count");
  try {
    std::size_t used = 0;
    s.start = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("start");
    s.stop = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("stop");
    const long long n = std::stoll(parts[3], &used);
    if (used != parts[3].size() || n < 1) throw std::invalid_argument("count");
    s.count = static_cast<std::size_t>(n);
  } catch (const std::logic_error&) {
    throw ConfigError("malformed sweep '" + spec + "'");
  }
  if (parts[2] == "log") s.logarithmic = true;
  else if (parts[2] != "lin") throw ConfigError("sweep spacing must be lin or log");
  if (!std::isfinite(s.start) || !std::isfinite(s.stop)) throw ConfigError("sweep bounds must be finite");
  if (s.logarithmic && !(s.start > 0.0 && s.stop > 0.0)) {
    throw ConfigError("log sweeps need positive bounds");
  }
  return s;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0.00000000000";
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.11e", x);
  const int exponent = std::atoi(std::strchr(buf, 'e') + 1);
  const int decimals = std::max(0, 11 - exponent);
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

InterferometerConfig interferometer_config(const json& j) {
  InterferometerConfig c;
  const json& root = root_object(j, {"masses", "geometry", "widths", "mode"});
  if (const json* m = find(root, "masses")) {
    allow(*m, "masses", {"m_i", "m_p", "m_f2"});
    read(*m, "masses", "m_i", c.m_i);
    read(*m, "masses", "m_p", c.m_p);
    read(*m, "masses", "m_f2", c.m_f2);
  }
  if (const json* g = find(root, "geometry")) {
    allow(*g, "geometry", {"L", "setup", "frame_f2", "frame"});
    read(*g, "geometry", "L", c.L);
    if (const json* s = find(*g, "setup")) c.setup = parse_setup(text(*s, "geometry.setup"));
    if (const json* f = find(*g, "frame_f2")) c.frame_f2 = parse_frame_f2(text(*f, "geometry.frame_f2"));
    read_frame(*g, c.frame);
  }
  if (const json* w = find(root, "widths")) {
    allow(*w, "widths", {"interferometer", "particle", "f2"});
    read(*w, "widths", "interferometer", c.width_i);
    read(*w, "widths", "particle", c.width_p);
    read(*w, "widths", "f2", c.width_f2);
  }
  if (const json* m = find(root, "mode")) {
    allow(*m, "mode", {"exact_transform", "phase_convention"});
    read(*m, "mode", "exact_transform", c.exact_transform);
    read(*m, "mode", "phase_convention", c.phase_convention);
  }
  return c;
}

RocketConfig rocket_config(const json& j) {
  RocketConfig c;
  const json& root = root_object(j, {"masses", "geometry", "widths", "grid", "mode"});
  if (const json* m = find(root, "masses")) {
    allow(*m, "masses", {"m_p", "m_R"});
    read(*m, "masses", "m_p", c.m_p);
    read(*m, "masses", "m_R", c.m_R);
  }
  if (const json* g = find(root, "geometry")) {
    allow(*g, "geometry", {"L", "p", "frame"});
    read(*g, "geometry", "L", c.L);
    read(*g, "geometry", "p", c.p);
    read_frame(*g, c.frame);
  }
  if (const json* w = find(root, "widths")) {
    allow(*w, "widths", {"delta_xR", "particle"});
    read(*w, "widths", "delta_xR", c.delta_xR);
    read(*w, "widths", "particle", c.particle_width);
  }
  if (const json* g = find(root, "grid")) {
    allow(*g, "grid", {"points", "sigmas", "extent"});
    read(*g, "grid", "points", c.grid_points);
    read(*g, "grid", "sigmas", c.grid_sigmas);
    read(*g, "grid", "extent", c.grid_extent);
  }
  if (const json* m = find(root, "mode")) {
    allow(*m, "mode", {"window_margin"});
    read(*m, "mode", "window_margin", c.window_margin);
  }
  return c;
}

ThirdParticleConfig third_particle_config(const json& j) {
  ThirdParticleConfig c;
  const json& root = root_object(j, {"masses", "geometry", "widths", "theta"});
  if (const json* m = find(root, "masses")) {
    allow(*m, "masses", {"m1", "m2", "m3"});
    read(*m, "masses", "m1", c.m1);
    read(*m, "masses", "m2", c.m2);
    read(*m, "masses", "m3", c.m3);
  }
  if (const json* g = find(root, "geometry")) {
    allow(*g, "geometry", {"L", "c", "frame"});
    read(*g, "geometry", "L", c.L);
    read(*g, "geometry", "c", c.c);
    read_frame(*g, c.frame);
  }
  if (const json* w = find(root, "widths")) {
    allow(*w, "widths", {"w1", "w2", "w3"});
    read(*w, "widths", "w1", c.width1);
    read(*w, "widths", "w2", c.width2);
    read(*w, "widths", "w3", c.width3);
  }
  if (const json* t = find(root, "theta")) c.theta = number(*t, "theta");
  return c;
}

AppendixConfig appendix_config(const json& j) {
  AppendixConfig c;
  const json& root = root_object(j, {"masses", "geometry", "widths", "theta"});
  if (const json* m = find(root, "masses")) {
    allow(*m, "masses", {"m1", "m2", "m3"});
    read(*m, "masses", "m1", c.m1);
    read(*m, "masses", "m2", c.m2);
    read(*m, "masses", "m3", c.m3);
  }
  if (const json* g = find(root, "geometry")) {
    allow(*g, "geometry", {"a", "b", "L", "c"});
    read(*g, "geometry", "a", c.a);
    read(*g, "geometry", "b", c.b);
    read(*g, "geometry", "L", c.L);
    read(*g, "geometry", "c", c.c);
  }
  if (const json* w = find(root, "widths")) {
    allow(*w, "widths", {"delta1", "delta2", "delta3", "kappa"});
    read(*w, "widths", "delta1", c.delta1);
    read(*w, "widths", "delta2", c.delta2);
    read(*w, "widths", "delta3", c.delta3);
    read(*w, "widths", "kappa", c.kappa);
  }
  if (const json* t = find(root, "theta")) c.theta = number(*t, "theta");
  return c;
}

// ---------------------------------------------------------------- entry point

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relative-coordinate quantum reference frame experiments", "qref"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "Run one scenario and write its outputs");
  std::string scenario, config_path, sweep_text, setup;
  std::string out_dir = ".";
  std::size_t grid_points = 0;
  double grid_extent = 0.0;
  std::uint64_t seed = 0;
  bool exact = false;
  run->add_option("scenario", scenario, "interferometer | rocket | third-particle | frames | appendix")
      ->required();
  run->add_option("--config", config_path, "JSON configuration file");
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--sweep", sweep_text, "name=start:stop:lin|log:count");
  auto* points_opt = run->add_option("--grid-points", grid_points, "Rocket fringe grid points");
  auto* extent_opt = run->add_option("--grid-extent", grid_extent, "Rocket fringe grid half width");
  run->add_flag("--exact-transform", exact, "Use the exact correlated-Gaussian transform");
  auto* seed_opt = run->add_option("--seed", seed, "Seed recorded in the run manifest");
  auto* setup_opt = run->add_option("--setup", setup, "Interferometer setup: a | b");

  const auto usage = [&] { err << app.help(); };
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    usage();
    return 2;
  }
  if (std::find(std::begin(kScenarios), std::end(kScenarios), scenario) == std::end(kScenarios)) {
    err << "error: unknown scenario '" << scenario << "'\n";
    usage();
    return 2;
  }

  try {
    json cfg;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot read config '" + config_path + "'");
      try {
        cfg = json::parse(f);
      } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
    }
    std::optional<SweepSpec> sweep;
    if (!sweep_text.empty()) sweep = parse_sweep(sweep_text);

    const bool interferometer_like = scenario == "interferometer" || scenario == "frames";
    if (setup_opt->count() && !interferometer_like) {
      throw ConfigError("--setup applies to interferometer and frames only");
    }
    if ((points_opt->count() || extent_opt->count()) && scenario != "rocket") {
      throw ConfigError("--grid-points and --grid-extent apply to rocket only");
    }
    if (exact && scenario == "third-particle") {
      throw ConfigError("third-particle runs use the approximate transform only");
    }
    if (sweep && (scenario == "frames" || scenario == "appendix")) {
      throw ConfigError(scenario + " does not support sweeps");
    }

    const std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
      throw ConfigError("cannot create output directory '" + out_dir + "'");
    }
    write_file(dir / "report.json", "");

    ScenarioReport rep;
    if (interferometer_like) {
      auto c = interferometer_config(cfg);
      if (setup_opt->count()) c.setup = parse_setup(setup);
      c.exact_transform = c.exact_transform || exact;
      if (scenario == "frames") {
        rep = run_frames(c);
      } else {
        rep = run_interferometer(c);
        if (sweep) rep.sweep = interferometer_sweep(c, *sweep);
      }
    } else if (scenario == "rocket") {
      auto c = rocket_config(cfg);
      if (points_opt->count()) c.grid_points = grid_points;
      if (extent_opt->count()) c.grid_extent = grid_extent;
      std::vector<double> values;
      if (sweep) {
        if (sweep->parameter != "delta_xR") throw ConfigError("rocket sweeps accept delta_xR only");
        values = sweep->values();
      }
      rep = run_rocket(c, values);
    } else if (scenario == "third-particle") {
      const auto c = third_particle_config(cfg);
      rep = run_third_particle(c);
      if (sweep) rep.sweep = third_particle_sweep(c, *sweep);
    } else {
      rep = appendix_analysis(appendix_config(cfg));
    }

    nlohmann::ordered_json manifest = {{"scenario", scenario},
                                       {"config_path", config_path},
                                       {"output_directory", out_dir},
                                       {"exact_transform", exact}};
    manifest["seed"] = seed_opt->count() ? nlohmann::ordered_json(seed) : nlohmann::ordered_json();
    manifest["sweep"] = sweep_text.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(sweep_text);
    rep.provenance["manifest"] = manifest;

    write_file(dir / "report.json", rep.to_json().dump(2) + "\n");
    if (rep.sweep) write_file(dir / "sweep.csv", csv(*rep.sweep));
    if (rep.fringe) write_file(dir / "fringe.csv", fringe_csv(*rep.fringe));
    for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
    out << "wrote " << (dir / "report.json").string() << "\n";
    return 0;
  } catch (const ResolutionError& e) {
    err << "resolution error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace qref
