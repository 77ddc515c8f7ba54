#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "qref/cli.hpp"
#include "qref/errors.hpp"

using namespace qref;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qref_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("sweep specifications") {
  const auto s = parse_sweep("delta_xR=1e-4:10:log:25");
  CHECK(s.parameter == "delta_xR");
  CHECK(s.logarithmic);
  const auto v = s.values();
  REQUIRE(v.size() == 25);
  CHECK(v.front() == doctest::Approx(1e-4));
  CHECK(v.back() == 10.0);
  CHECK(v[12] == doctest::Approx(std::sqrt(1e-4 * 10.0)));

  const auto lin = parse_sweep("theta=0:3:lin:4").values();
  CHECK(lin == std::vector<double>{0.0, 1.0, 2.0, 3.0});
  CHECK(parse_sweep("c=2:9:lin:1").values() == std::vector<double>{2.0});

  for (const char* bad : {"delta_xR", "=1:2:lin:3", "x=1:2:lin", "x=1:2:cubic:3", "x=a:2:lin:3",
                          "x=1:2:lin:0", "x=0:2:log:3", "x=1:2:lin:3.5"}) {
    CHECK_THROWS_AS(parse_sweep(bad), ConfigError);
  }
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.0) == "0.00000000000");
  CHECK(format_number(1.0) == "1.00000000000");
  CHECK(format_number(-2.5) == "-2.50000000000");
  CHECK(format_number(1e-6) == "0.00000100000000000");
  CHECK(format_number(123456.789) == "123456.789000");
  CHECK(format_number(9.99999999999951) == "10.0000000000");
  CHECK(format_number(1e13) == "10000000000000");
  CHECK(format_number(0.1).find('e') == std::string::npos);
}

TEST_CASE("config files map onto scenario configs") {
  const auto j = nlohmann::json::parse(R"({
    "masses": {"m_i": 2e4, "m_p": 2},
    "geometry": {"L": 3, "setup": "b", "frame_f2": "entangled", "frame": {"offset": 1}},
    "widths": {"particle": 0.1},
    "mode": {"exact_transform": true, "phase_convention": 0.5}
  })");
  const auto c = interferometer_config(j);
  CHECK(c.m_i == 2e4);
  CHECK(c.m_p == 2.0);
  CHECK(c.L == 3.0);
  CHECK(c.setup == Setup::b);
  CHECK(c.frame_f2 == FrameF2::entangled);
  CHECK(c.frame.offset == 1.0);
  CHECK(*c.width_p == 0.1);
  CHECK_FALSE(c.width_i.has_value());
  CHECK(c.exact_transform);
  CHECK(c.phase_convention == 0.5);

  const auto r = rocket_config(nlohmann::json::parse(
      R"({"widths": {"delta_xR": 0.2}, "grid": {"points": 512, "extent": 9}})"));
  CHECK(r.delta_xR == 0.2);
  CHECK(r.grid_points == 512);
  CHECK(*r.grid_extent == 9.0);

  const auto t = third_particle_config(nlohmann::json::parse(R"({"theta": 1.5, "geometry": {"c": -2}})"));
  CHECK(t.theta == 1.5);
  CHECK(t.c == -2.0);

  const auto a = appendix_config(nlohmann::json::parse(R"({"masses": {"m3": 4}, "widths": {"kappa": 0.01}})"));
  CHECK(*a.m3 == 4.0);
  CHECK(*a.kappa == 0.01);

  // The resolved echo is itself a valid config.
  const auto echo = nlohmann::json::parse(to_json(c).dump());
  CHECK(interferometer_config(echo).width_i.has_value());
  CHECK_NOTHROW(rocket_config(nlohmann::json::parse(to_json(r).dump())));
  CHECK_NOTHROW(third_particle_config(nlohmann::json::parse(to_json(t).dump())));
  CHECK_NOTHROW(appendix_config(nlohmann::json::parse(to_json(a).dump())));

  for (const char* bad : {R"({"extra": 1})", R"({"masses": {"m_x": 1}})",
                          R"({"geometry": {"frame": {"spin": 1}}})", R"({"masses": {"m_p": "one"}})",
                          R"({"geometry": {"setup": "c"}})", R"({"theta": 1})", R"([1, 2])"}) {
    INFO(bad);
    CHECK_THROWS_AS(interferometer_config(nlohmann::json::parse(bad)), ConfigError);
  }
  CHECK_THROWS_AS(rocket_config(nlohmann::json::parse(R"({"grid": {"points": -3}})")), ConfigError);
  CHECK_THROWS_AS(third_particle_config(nlohmann::json::parse(R"({"mode": {}})")), ConfigError);
}

TEST_CASE("interferometer run writes a report") {
  const auto dir = scratch("interferometer");
  const auto r = cli({"run", "interferometer", "--setup", "a", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(j["metrics"]["p_left"].get<double>() >= 0.99);
  CHECK(j["config"]["masses"]["m_i"].get<double>() == 1e6);
  CHECK(j["config"]["widths"]["particle"].get<double>() == doctest::Approx(0.02));
  CHECK(j["provenance"]["manifest"]["scenario"] == "interferometer");
  CHECK_FALSE(fs::exists(dir / "sweep.csv"));

  const auto b = cli({"run", "interferometer", "--setup", "b", "--out", dir.string()});
  REQUIRE(b.code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "report.json"))["metrics"]["p_left"].get<double>() ==
        doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("rocket sweep output is deterministic") {
  const auto dir = scratch("rocket");
  const auto cfg = dir / "rocket.json";
  write(cfg, R"({"masses": {"m_p": 1, "m_R": 10000}, "geometry": {"L": 10, "p": 10}})");
  const std::vector<std::string> args{"run", "rocket", "--config", cfg.string(), "--sweep",
                                      "delta_xR=1e-4:10:log:25", "--out", (dir / "a").string(),
                                      "--seed", "7"};
  REQUIRE(cli(args).code == 0);
  auto again = args;
  again[7] = (dir / "b").string();
  REQUIRE(cli(again).code == 0);

  const auto sweep = slurp(dir / "a" / "sweep.csv");
  CHECK(sweep == slurp(dir / "b" / "sweep.csv"));
  CHECK(slurp(dir / "a" / "fringe.csv") == slurp(dir / "b" / "fringe.csv"));
  CHECK(sweep.find('\r') == std::string::npos);
  std::istringstream lines(sweep);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "delta_xR,visibility,window_ok");
  int rows = 0;
  for (std::string line; std::getline(lines, line);) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 2);
    CHECK(line.find('e') == std::string::npos);
  }
  CHECK(rows == 25);
  CHECK(slurp(dir / "a" / "fringe.csv").rfind("position,intensity\n", 0) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  CHECK(j["provenance"]["manifest"]["seed"] == 7);
  CHECK(j["sweep"]["rows"].size() == 25);
}

TEST_CASE("third-particle phase estimate in the report") {
  const auto dir = scratch("third");
  write(dir / "tp.json", R"({"theta": 0})");
  REQUIRE(cli({"run", "third-particle", "--config", (dir / "tp.json").string(), "--out",
               dir.string(), "--sweep", "theta=0:3.14159265358979:lin:5"})
              .code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(j["phase_estimate"]["re"].get<double>() == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(std::abs(j["phase_estimate"]["im"].get<double>()) <= 1e-9);
  CHECK(slurp(dir / "sweep.csv").rfind("theta,phase_re,phase_im", 0) == 0);
}

TEST_CASE("frames and appendix runs") {
  const auto dir = scratch("misc");
  CHECK(cli({"run", "frames", "--out", (dir / "f").string()}).code == 0);
  CHECK(cli({"run", "appendix", "--out", (dir / "x").string()}).code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "x" / "report.json"));
  CHECK(j["metrics"]["gamma_corr"].get<double>() == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  const auto unknown = cli({"run", "teleporter", "--out", dir.string()});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("Usage") != std::string::npos);
  CHECK(cli({}).code == 2);
  CHECK(cli({"run", "rocket", "--bogus-flag"}).code == 2);

  write(dir / "bad.json", R"({"masses": {"m_p": 1, "nope": 2}})");
  CHECK(cli({"run", "rocket", "--config", (dir / "bad.json").string(), "--out", dir.string()}).code == 2);
  write(dir / "broken.json", "{not json");
  CHECK(cli({"run", "rocket", "--config", (dir / "broken.json").string(), "--out", dir.string()}).code == 2);
  CHECK(cli({"run", "rocket", "--config", (dir / "missing.json").string(), "--out", dir.string()}).code == 2);
  CHECK(cli({"run", "rocket", "--setup", "a", "--out", dir.string()}).code == 2);
  CHECK(cli({"run", "appendix", "--sweep", "m1=1:2:lin:3", "--out", dir.string()}).code == 2);
  CHECK(cli({"run", "rocket", "--sweep", "L=1:2:lin:3", "--out", dir.string()}).code == 2);

  write(dir / "blocker", "");
  CHECK(cli({"run", "interferometer", "--out", (dir / "blocker" / "sub").string()}).code == 2);

  CHECK(cli({"run", "rocket", "--grid-points", "16", "--out", dir.string()}).code == 3);
  CHECK(cli({"--help"}).code == 0);
}
