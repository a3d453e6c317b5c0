// eprsim: runs singlet measurement scenarios and prints a deterministic
// JSON or CSV report. Exit 0 when every audit the scenario runs passes,
// 1 on audit failure, 2 on bad usage or config.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "everett/everett.hpp"
#include "json.hpp"

namespace {

using everett::MeasurementSetting;
using everett::Outcome;
using everett::detail::num;

constexpr double pi = std::numbers::pi;

struct Report {
  std::string body;
  std::vector<std::string> failures;
};

std::string quote(const std::string& s) { return '"' + everett::json_escape(s) + '"'; }

std::string num_list(const std::vector<double>& vs) {
  std::string out = "[";
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ',';
    out += num(vs[i]);
  }
  return out + "]";
}

// Analyzer directions are rays in the x-z plane: reduce mod pi.
double normalize_angle(double value, bool degrees) {
  double r = degrees ? value * pi / 180.0 : value;
  r = std::fmod(r, pi);
  if (r < 0.0) r += pi;
  return r;
}

std::string envelope(const std::string& scenario, const std::string& unit,
                     const std::vector<double>& given,
                     const std::vector<double>& radians, std::uint64_t seed,
                     std::optional<std::uint64_t> shots, const std::string& results,
                     const std::vector<std::string>& failures) {
  std::string out = "{\"scenario\":" + quote(scenario) + ",\"unit\":" + quote(unit) +
                    ",\"angles_input\":" + num_list(given) +
                    ",\"angles_radians\":" + num_list(radians) +
                    ",\"seed\":" + std::to_string(seed);
  if (shots) out += ",\"shots\":" + std::to_string(*shots);
  out += ",\"results\":" + results + ",\"audit\":{\"passed\":";
  out += failures.empty() ? "true" : "false";
  out += ",\"failures\":[";
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (i) out += ',';
    out += quote(failures[i]);
  }
  out += "]}}";
  return out;
}

std::string csv_prologue(const std::string& scenario, const std::string& unit,
                         std::uint64_t seed) {
  return "# scenario=" + scenario + " unit=" + unit + " seed=" + std::to_string(seed) +
         "\n";
}

// Branch sampling check: every frequency within three binomial standard
// errors of its weight.
void check_sampled(const everett::BranchLedger& ledger, const everett::SampleTable& table,
                   const std::string& tag, std::vector<std::string>& failures) {
  for (std::size_t i = 0; i < ledger.branches.size(); ++i) {
    double w = ledger.branches[i].weight;
    double sigma = std::sqrt(w * (1.0 - w) / static_cast<double>(table.shots));
    double f = table.frequency(i);
    if (std::abs(f - w) > 3.0 * sigma)
      failures.push_back(tag + ": sampled frequency " + num(f) + " vs weight " + num(w));
  }
}

std::string sampled_json(const everett::BranchLedger& ledger,
                         const everett::SampleTable& table) {
  std::string out = "{\"shots\":" + std::to_string(table.shots) + ",\"frequencies\":[";
  for (std::size_t i = 0; i < ledger.branches.size(); ++i) {
    if (i) out += ',';
    out += num(table.frequency(i));
  }
  return out + "]}";
}

Report run_equal_settings(const std::vector<double>& radians, std::uint64_t seed,
                          std::optional<std::uint64_t> shots, bool csv) {
  Report rep;
  std::string rows;
  std::string csv_body =
      "theta_radians,E,joint_up_up,joint_up_down,joint_down_up,joint_down_down\n";
  for (std::size_t k = 0; k < radians.size(); ++k) {
    MeasurementSetting s(radians[k]);
    everett::CorrelationReport r = everett::correlation(s, s);
    if (std::abs(r.E + 1.0) > everett::norm_tolerance)
      rep.failures.push_back("equal settings theta=" + num(radians[k]) +
                             ": E=" + num(r.E) + " is not -1");
    if (k) rows += ',';
    rows += "{\"theta_radians\":" + num(radians[k]) +
            ",\"report\":" + everett::to_json_text(r);
    if (shots) {
      everett::BranchLedger ledger = everett::two_lab_ledger(s, s);
      everett::SampleTable table = everett::sample_worlds(ledger, *shots, seed + k);
      check_sampled(ledger, table, "equal settings theta=" + num(radians[k]),
                    rep.failures);
      rows += ",\"sampled\":" + sampled_json(ledger, table);
    }
    rows += '}';
    csv_body += num(radians[k]) + ',' + num(r.E);
    for (Outcome o1 : {Outcome::up, Outcome::down})
      for (Outcome o2 : {Outcome::up, Outcome::down})
        csv_body += ',' + num(r.joint.at({o1, o2}));
    csv_body += '\n';
  }
  rep.body = csv ? csv_body : "[" + rows + "]";
  return rep;
}

Report run_figure_one(const std::vector<double>& radians, std::uint64_t seed,
                      std::optional<std::uint64_t> shots, bool csv) {
  Report rep;
  std::vector<std::pair<MeasurementSetting, MeasurementSetting>> choices;
  for (double r : radians) choices.emplace_back(MeasurementSetting(r), MeasurementSetting(r));
  std::vector<everett::BranchLedger> ledgers = everett::figure_one_enumeration(choices);

  std::size_t worlds = 0;
  std::string rows;
  std::string csv_body = "ledger,setting_radians,outcome1,outcome2,weight\n";
  for (std::size_t k = 0; k < ledgers.size(); ++k) {
    const auto& ledger = ledgers[k];
    worlds += ledger.branches.size();
    if (ledger.branches.size() != 2)
      rep.failures.push_back("choice theta=" + num(radians[k]) + ": expected 2 worlds, got " +
                             std::to_string(ledger.branches.size()));
    for (const auto& b : ledger.branches) {
      Outcome o1 = b.outcomes.at(everett::apparatus(1)).outcome;
      Outcome o2 = b.outcomes.at(everett::apparatus(2)).outcome;
      if (std::abs(b.weight - 0.5) > everett::norm_tolerance)
        rep.failures.push_back("choice theta=" + num(radians[k]) + ": weight " +
                               num(b.weight) + " is not 0.5");
      if (o1 == o2)
        rep.failures.push_back("choice theta=" + num(radians[k]) +
                               ": outcomes are not anticorrelated");
      csv_body += std::to_string(k) + ',' + num(radians[k]) + ',' +
                  everett::outcome_name(o1) + ',' + everett::outcome_name(o2) + ',' +
                  num(b.weight) + '\n';
    }
    if (k) rows += ',';
    rows += everett::to_json_text(ledger);
    if (shots) {
      everett::SampleTable table = everett::sample_worlds(ledger, *shots, seed + k);
      check_sampled(ledger, table, "choice theta=" + num(radians[k]), rep.failures);
    }
  }
  rep.body = csv ? csv_body
                 : "{\"worlds\":" + std::to_string(worlds) + ",\"ledgers\":[" + rows + "]}";
  return rep;
}

Report run_angle_sweep(const std::vector<double>& radians, bool csv) {
  Report rep;
  std::string rows;
  std::string csv_body =
      "delta_radians,E,joint_up_up,joint_up_down,joint_down_up,joint_down_down\n";
  MeasurementSetting base(0.0);
  for (std::size_t k = 0; k < radians.size(); ++k) {
    everett::CorrelationReport r = everett::correlation(base, MeasurementSetting(radians[k]));
    if (std::abs(r.E + std::cos(radians[k])) > 1e-9)
      rep.failures.push_back("delta=" + num(radians[k]) + ": E=" + num(r.E) +
                             " deviates from -cos(delta)");
    if (k) rows += ',';
    rows += "{\"delta_radians\":" + num(radians[k]) +
            ",\"report\":" + everett::to_json_text(r) + '}';
    csv_body += num(radians[k]) + ',' + num(r.E);
    for (Outcome o1 : {Outcome::up, Outcome::down})
      for (Outcome o2 : {Outcome::up, Outcome::down})
        csv_body += ',' + num(r.joint.at({o1, o2}));
    csv_body += '\n';
  }
  rep.body = csv ? csv_body : "[" + rows + "]";
  return rep;
}

Report run_chsh(const std::vector<double>& radians, bool csv) {
  Report rep;
  MeasurementSetting a(radians[0]), ap(radians[1]), b(radians[2]), bp(radians[3]);
  double e_ab = everett::correlation(a, b).E;
  double e_abp = everett::correlation(a, bp).E;
  double e_apb = everett::correlation(ap, b).E;
  double e_apbp = everett::correlation(ap, bp).E;
  double s = e_ab - e_abp + e_apb + e_apbp;
  double tsirelson = 2.0 * std::sqrt(2.0);
  int lhv = everett::lhv_chsh_bound();
  if (std::abs(s) > tsirelson + 1e-9)
    rep.failures.push_back("S=" + num(s) + " exceeds the quantum bound");

  if (csv) {
    rep.body =
        "a,a_prime,b,b_prime,E_ab,E_ab_prime,E_a_prime_b,E_a_prime_b_prime,S\n" +
        num(radians[0]) + ',' + num(radians[1]) + ',' + num(radians[2]) + ',' +
        num(radians[3]) + ',' + num(e_ab) + ',' + num(e_abp) + ',' + num(e_apb) + ',' +
        num(e_apbp) + ',' + num(s) + '\n';
  } else {
    rep.body = "{\"E_ab\":" + num(e_ab) + ",\"E_ab_prime\":" + num(e_abp) +
               ",\"E_a_prime_b\":" + num(e_apb) + ",\"E_a_prime_b_prime\":" +
               num(e_apbp) + ",\"S\":" + num(s) +
               ",\"local_deterministic_bound\":" + std::to_string(lhv) +
               ",\"quantum_bound\":" + num(tsirelson) + "}";
  }
  return rep;
}

Report run_no_signaling(const std::vector<double>& radians, std::uint64_t seed,
                        std::optional<std::uint64_t> shots, bool csv) {
  Report rep;
  std::vector<double> near_list;
  std::vector<double> far_list;
  if (radians.empty()) {
    for (int k = 0; k < 16; ++k) near_list.push_back(k * pi / 16.0);
    far_list = near_list;
  } else {
    near_list.push_back(radians[0]);
    far_list.assign(radians.begin() + 1, radians.end());
  }
  std::vector<MeasurementSetting> far;
  for (double f : far_list) far.emplace_back(f);

  double overall = 0.0;
  std::string rows;
  std::string csv_body = shots ? "near_radians,max_tvd,sampled_max_error\n"
                               : "near_radians,max_tvd\n";
  for (std::size_t k = 0; k < near_list.size(); ++k) {
    MeasurementSetting near_setting(near_list[k]);
    double tvd = everett::no_signaling_check(near_setting, far);
    overall = std::max(overall, tvd);
    if (tvd > everett::norm_tolerance)
      rep.failures.push_back("near=" + num(near_list[k]) +
                             ": marginals shift by " + num(tvd));

    double sampled_worst = 0.0;
    if (shots) {
      for (std::size_t j = 0; j < far.size(); ++j) {
        everett::BranchLedger ledger = everett::two_lab_ledger(near_setting, far[j]);
        everett::SampleTable table =
            everett::sample_worlds(ledger, *shots, seed + k * far.size() + j);
        double p_up = 0.0, f_up = 0.0;
        for (std::size_t i = 0; i < ledger.branches.size(); ++i) {
          if (ledger.branches[i].outcomes.at(everett::apparatus(1)).outcome ==
              Outcome::up) {
            p_up += ledger.branches[i].weight;
            f_up += table.frequency(i);
          }
        }
        double sigma = std::sqrt(p_up * (1.0 - p_up) / static_cast<double>(*shots));
        sampled_worst = std::max(sampled_worst, std::abs(f_up - p_up));
        if (std::abs(f_up - p_up) > 3.0 * sigma)
          rep.failures.push_back("near=" + num(near_list[k]) + " far=" +
                                 num(far[j].radians) + ": sampled marginal " +
                                 num(f_up) + " vs " + num(p_up));
      }
    }

    if (k) rows += ',';
    rows += "{\"near_radians\":" + num(near_list[k]) + ",\"max_tvd\":" + num(tvd);
    if (shots) rows += ",\"sampled_max_error\":" + num(sampled_worst);
    rows += '}';
    csv_body += num(near_list[k]) + ',' + num(tvd);
    if (shots) csv_body += ',' + num(sampled_worst);
    csv_body += '\n';
  }
  rep.body = csv ? csv_body
                 : "{\"max_tvd\":" + num(overall) + ",\"rows\":[" + rows + "]}";
  return rep;
}

everett::SiteGeometry load_geometry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open geometry file: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  everett::SiteGeometry g;
  g.lab1 = j.value("lab1", g.lab1);
  g.source = j.value("source", g.source);
  g.lab2 = j.value("lab2", g.lab2);
  g.referee = j.value("referee", g.referee);
  g.signal_speed = j.value("signal_speed", g.signal_speed);
  g.validate();
  return g;
}

Report run_locality_trace(const std::vector<double>& radians, std::uint64_t seed,
                          const everett::SiteGeometry& geometry, bool csv) {
  Report rep;
  MeasurementSetting s1(radians[0]), s2(radians[1]);
  everett::BranchLedger ledger = everett::two_lab_ledger(s1, s2);
  everett::SampleTable table = everett::sample_worlds(ledger, 1, seed);
  std::size_t picked = 0;
  for (std::size_t i = 0; i < table.counts.size(); ++i)
    if (table.counts[i] == 1) picked = i;
  Outcome o1 = ledger.branches[picked].outcomes.at(everett::apparatus(1)).outcome;
  Outcome o2 = ledger.branches[picked].outcomes.at(everett::apparatus(2)).outcome;

  everett::RunSchedule schedule = everett::RunSchedule::standard(geometry);
  everett::EventLog log = everett::record_run({s1, s2}, {o1, o2}, geometry, schedule);
  everett::CausalityVerdict verdict = everett::locality_trace(log, geometry);
  if (!verdict.ok)
    for (const auto& v : verdict.violations)
      rep.failures.push_back("rule " + v.rule + " between events " +
                             std::to_string(v.from_id) + " and " +
                             std::to_string(v.to_id));

  if (csv) {
    std::string csv_body = "id,site,time,kind,reads,payload\n";
    for (const auto& e : log.events()) {
      std::string reads, payload;
      for (std::size_t i = 0; i < e.reads.size(); ++i) {
        if (i) reads += ';';
        reads += std::to_string(e.reads[i]);
      }
      for (std::size_t i = 0; i < e.payload.size(); ++i) {
        if (i) payload += ';';
        payload += e.payload[i].first + '=' + e.payload[i].second;
      }
      csv_body += std::to_string(e.id) + ',' + everett::site_name(e.site) + ',' +
                  num(e.time) + ',' + everett::kind_name(e.kind) + ',' + reads + ',' +
                  payload + '\n';
    }
    rep.body = csv_body;
  } else {
    std::string events;
    for (const auto& e : log.events()) {
      if (!events.empty()) events += ',';
      events += quote(everett::to_event_text(e));
    }
    rep.body = std::string("{\"geometry\":{\"lab1\":") + num(geometry.lab1) +
               ",\"source\":" + num(geometry.source) + ",\"lab2\":" + num(geometry.lab2) +
               ",\"referee\":" + num(geometry.referee) +
               ",\"signal_speed\":" + num(geometry.signal_speed) + "},\"outcomes\":[" +
               quote(everett::outcome_name(o1)) + ',' + quote(everett::outcome_name(o2)) +
               "],\"events\":[" + events +
               "],\"verdict\":" + everett::to_json_text(verdict) + "}";
  }
  return rep;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EPR singlet scenarios with branch ledgers and causality audits"};
  std::string scenario;
  std::vector<double> angles;
  std::string unit = "rad";
  std::string format = "json";
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> shots;
  std::string geometry_path;

  app.add_option("--scenario", scenario, "one of equal-settings, figure-one, angle-sweep, chsh, no-signaling, locality-trace")
      ->required()
      ->check(CLI::IsMember({"equal-settings", "figure-one", "angle-sweep", "chsh",
                             "no-signaling", "locality-trace"}));
  app.add_option("--angles", angles, "analyzer angles, comma separated")->delimiter(',');
  app.add_option("--unit", unit, "angle unit")->check(CLI::IsMember({"deg", "rad"}));
  app.add_option("--shots", shots, "sample the branch ledgers this many times");
  app.add_option("--seed", seed, "random seed for sampling");
  app.add_option("--format", format, "output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--geometry", geometry_path, "JSON site positions for locality-trace");
  CLI11_PARSE(app, argc, argv);

  try {
    if (shots && *shots < 1) throw std::invalid_argument("shots must be >= 1");
    for (double a : angles)
      if (!std::isfinite(a)) throw std::invalid_argument("angles must be finite");

    std::vector<double> radians;
    radians.reserve(angles.size());
    for (double a : angles) radians.push_back(normalize_angle(a, unit == "deg"));

    if (radians.empty()) {
      if (scenario == "equal-settings") radians = {0.0, pi / 2.0};
      if (scenario == "figure-one") radians = {0.0, pi / 2.0};
      if (scenario == "locality-trace") radians = {0.0, pi / 2.0};
      if (scenario == "angle-sweep")
        for (int k = 0; k < 32; ++k) radians.push_back(k * pi / 32.0);
      if (scenario == "chsh") radians = {0.0, pi / 2.0, pi / 4.0, 3.0 * pi / 4.0};
    }

    bool csv = format == "csv";
    Report rep;
    if (scenario == "equal-settings") {
      rep = run_equal_settings(radians, seed, shots, csv);
    } else if (scenario == "figure-one") {
      rep = run_figure_one(radians, seed, shots, csv);
    } else if (scenario == "angle-sweep") {
      rep = run_angle_sweep(radians, csv);
    } else if (scenario == "chsh") {
      if (radians.size() != 4)
        throw std::invalid_argument("chsh needs exactly 4 angles: a, a', b, b'");
      rep = run_chsh(radians, csv);
    } else if (scenario == "no-signaling") {
      if (!radians.empty() && radians.size() < 3)
        throw std::invalid_argument(
            "no-signaling needs a near setting plus at least two far settings");
      rep = run_no_signaling(radians, seed, shots, csv);
    } else {
      if (radians.size() != 2)
        throw std::invalid_argument("locality-trace needs exactly 2 angles");
      everett::SiteGeometry geometry;
      if (!geometry_path.empty()) geometry = load_geometry(geometry_path);
      rep = run_locality_trace(radians, seed, geometry, csv);
    }

    std::string out;
    if (csv) {
      out = csv_prologue(scenario, unit, seed) + rep.body;
    } else {
      out = envelope(scenario, unit, angles, radians, seed, shots, rep.body,
                     rep.failures) +
            "\n";
    }
    std::fwrite(out.data(), 1, out.size(), stdout);
    for (const auto& f : rep.failures) std::fprintf(stderr, "audit failure: %s\n", f.c_str());
    return rep.failures.empty() ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
