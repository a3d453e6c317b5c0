#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "json.hpp"

namespace {

struct CliResult {
  int status;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  std::string cmd = std::string("'") + CLI_BINARY_PATH + "' " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  int raw = pclose(pipe);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

}  // namespace

TEST_CASE("figure-one default run reports four worlds and a passing audit") {
  CliResult r = run_cli("--scenario figure-one");
  REQUIRE(r.status == 0);
  REQUIRE(r.out.find("\"scenario\":\"figure-one\"") != std::string::npos);
  REQUIRE(r.out.find("\"worlds\":4") != std::string::npos);
  REQUIRE(r.out.find("\"passed\":true") != std::string::npos);
}

TEST_CASE("chsh default run lands on the quantum extreme") {
  CliResult r = run_cli("--scenario chsh");
  REQUIRE(r.status == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  REQUIRE(j["audit"]["passed"].get<bool>());
  double s = j["results"]["S"].get<double>();
  REQUIRE(std::abs(std::abs(s) - 2.0 * std::sqrt(2.0)) < 1e-9);
  REQUIRE(j["results"]["local_deterministic_bound"].get<int>() == 2);
  REQUIRE(std::abs(j["results"]["quantum_bound"].get<double>() -
                   2.0 * std::sqrt(2.0)) < 1e-12);
}

TEST_CASE("angle-sweep CSV follows the cosine law row by row") {
  CliResult r = run_cli("--scenario angle-sweep --format csv");
  REQUIRE(r.status == 0);
  std::vector<std::string> lines = lines_of(r.out);
  REQUIRE(lines.size() == 34);
  REQUIRE(lines[0] == "# scenario=angle-sweep unit=rad seed=1");
  REQUIRE(lines[1] ==
          "delta_radians,E,joint_up_up,joint_up_down,joint_down_up,joint_down_down");
  for (std::size_t i = 2; i < lines.size(); ++i) {
    double delta = 0.0, e = 0.0;
    REQUIRE(std::sscanf(lines[i].c_str(), "%lf,%lf", &delta, &e) == 2);
    REQUIRE(std::abs(e + std::cos(delta)) <= 1e-9);
  }
}

TEST_CASE("output is byte-identical across repeated runs") {
  CliResult a = run_cli("--scenario equal-settings --shots 5000 --seed 42");
  CliResult b = run_cli("--scenario equal-settings --shots 5000 --seed 42");
  REQUIRE(a.status == 0);
  REQUIRE(a.out == b.out);

  CliResult c = run_cli("--scenario chsh");
  CliResult d = run_cli("--scenario chsh");
  REQUIRE(c.out == d.out);
}

TEST_CASE("degree input reproduces the radian result") {
  CliResult deg = run_cli("--scenario chsh --angles 0,90,45,135 --unit deg");
  CliResult rad = run_cli("--scenario chsh");
  REQUIRE(deg.status == 0);
  double s_deg = nlohmann::json::parse(deg.out)["results"]["S"].get<double>();
  double s_rad = nlohmann::json::parse(rad.out)["results"]["S"].get<double>();
  REQUIRE(std::abs(s_deg - s_rad) < 1e-12);
}

TEST_CASE("usage errors exit nonzero without a report") {
  REQUIRE(run_cli("--scenario bogus").status != 0);
  REQUIRE(run_cli("").status != 0);
  REQUIRE(run_cli("--scenario chsh --angles 0,1,2").status == 2);
  REQUIRE(run_cli("--scenario no-signaling --angles 0,1").status == 2);
  REQUIRE(run_cli("--scenario equal-settings --shots 0").status == 2);
  REQUIRE(run_cli("--scenario locality-trace --geometry /nonexistent.json").status == 2);
}

TEST_CASE("locality-trace default run passes its audit and logs the compare") {
  CliResult r = run_cli("--scenario locality-trace");
  REQUIRE(r.status == 0);
  REQUIRE(r.out.find("\"ok\":true") != std::string::npos);
  REQUIRE(r.out.find("\"passed\":true") != std::string::npos);
  REQUIRE(r.out.find("8 referee 2.5 compare reads=6,7") != std::string::npos);
}

TEST_CASE("a geometry file stretches the sites and still passes") {
  const char* path = "/tmp/eprsim_geometry_test.json";
  {
    std::ofstream out(path);
    out << "{\"lab1\":0.0,\"source\":5.0,\"lab2\":10.0,\"referee\":5.0,"
           "\"signal_speed\":2.0}";
  }
  CliResult r = run_cli(std::string("--scenario locality-trace --geometry ") + path);
  REQUIRE(r.status == 0);
  REQUIRE(r.out.find("\"lab2\":10") != std::string::npos);
  REQUIRE(r.out.find("\"signal_speed\":2") != std::string::npos);
  REQUIRE(r.out.find("\"ok\":true") != std::string::npos);
  std::remove(path);
}

TEST_CASE("no-signaling default grid reports a vanishing shift") {
  CliResult r = run_cli("--scenario no-signaling");
  REQUIRE(r.status == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  REQUIRE(j["audit"]["passed"].get<bool>());
  REQUIRE(j["results"]["max_tvd"].get<double>() <= 1e-12);
  REQUIRE(j["results"]["rows"].size() == 16);
}

TEST_CASE("sampling flows through the envelope") {
  CliResult r = run_cli("--scenario equal-settings --shots 20000 --seed 3");
  REQUIRE(r.status == 0);
  REQUIRE(r.out.find("\"shots\":20000") != std::string::npos);
  REQUIRE(r.out.find("\"sampled\":") != std::string::npos);
  REQUIRE(r.out.find("\"passed\":true") != std::string::npos);
}

TEST_CASE("chsh CSV carries the four correlations and S") {
  CliResult r = run_cli("--scenario chsh --format csv");
  REQUIRE(r.status == 0);
  std::vector<std::string> lines = lines_of(r.out);
  REQUIRE(lines.size() == 3);
  REQUIRE(lines[1] ==
          "a,a_prime,b,b_prime,E_ab,E_ab_prime,E_a_prime_b,E_a_prime_b_prime,S");
}
