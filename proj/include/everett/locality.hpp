#pragma once

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "everett/ledger.hpp"
#include "everett/state.hpp"

namespace everett {

enum class Site { lab1, lab2, source, referee };

inline const char* site_name(Site s) {
  switch (s) {
    case Site::lab1: return "lab1";
    case Site::lab2: return "lab2";
    case Site::source: return "source";
    case Site::referee: return "referee";
  }
  return "?";
}

enum class EventKind { prepare, measure, message_send, message_receive, compare };

inline const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::prepare: return "prepare";
    case EventKind::measure: return "measure";
    case EventKind::message_send: return "classical-message-send";
    case EventKind::message_receive: return "classical-message-receive";
    case EventKind::compare: return "compare";
  }
  return "?";
}

struct Event {
  int id;
  Site site;
  double time;  // simulation seconds
  EventKind kind;
  std::vector<int> reads;  // ids of earlier events whose data this one used
  std::vector<std::pair<std::string, std::string>> payload;
};

// Append-only, single writer. Ids are 1-based and dense.
class EventLog {
 public:
  int append(Site site, double time, EventKind kind, std::vector<int> reads,
             std::vector<std::pair<std::string, std::string>> payload) {
    int id = static_cast<int>(events_.size()) + 1;
    events_.push_back(Event{id, site, time, kind, std::move(reads), std::move(payload)});
    return id;
  }

  const std::vector<Event>& events() const { return events_; }

  const Event& event(int id) const {
    if (id < 1 || static_cast<std::size_t>(id) > events_.size())
      throw std::invalid_argument("no such event id");
    return events_[static_cast<std::size_t>(id) - 1];
  }

 private:
  std::vector<Event> events_;
};

// 1D positions in light-seconds, signal speed in light-seconds per second.
struct SiteGeometry {
  double lab1 = 0.0;
  double source = 1.0;
  double lab2 = 2.0;
  double referee = 1.0;  // midway: both messages arrive together
  double signal_speed = 1.0;

  double position(Site s) const {
    switch (s) {
      case Site::lab1: return lab1;
      case Site::lab2: return lab2;
      case Site::source: return source;
      case Site::referee: return referee;
    }
    return 0.0;
  }

  double distance(Site a, Site b) const { return std::abs(position(a) - position(b)); }

  double min_delay(Site a, Site b) const { return distance(a, b) / signal_speed; }

  void validate() const {
    for (double v : {lab1, source, lab2, referee})
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite site position");
    if (!std::isfinite(signal_speed) || signal_speed <= 0.0)
      throw std::invalid_argument("signal speed must be positive");
  }
};

struct RunSchedule {
  double prepare_time = 0.0;
  double measure_time[2] = {0.0, 0.0};
  double send_time[2] = {0.0, 0.0};
  double receive_time[2] = {0.0, 0.0};
  double compare_time = 0.0;

  // Everything at a uniform margin above the light-cone minimum.
  static RunSchedule standard(const SiteGeometry& g, double prepare_time = 0.0,
                              double slack = 1.25) {
    RunSchedule s;
    s.prepare_time = prepare_time;
    const Site labs[2] = {Site::lab1, Site::lab2};
    for (int i = 0; i < 2; ++i) {
      s.measure_time[i] = prepare_time + slack * g.min_delay(Site::source, labs[i]);
      s.send_time[i] = s.measure_time[i];
      s.receive_time[i] = s.send_time[i] + slack * g.min_delay(labs[i], Site::referee);
    }
    s.compare_time = std::max(s.receive_time[0], s.receive_time[1]);
    return s;
  }
};

struct Violation {
  int from_id;
  int to_id;
  double required_delay;
  double actual_delay;
  std::string rule;
};

struct CausalityVerdict {
  bool ok = true;
  std::vector<Violation> violations;
};

class CausalityError : public std::runtime_error {
 public:
  explicit CausalityError(CausalityVerdict v)
      : std::runtime_error("causality violation: " +
                           (v.violations.empty() ? std::string("unspecified")
                                                 : v.violations.front().rule)),
        verdict(std::move(v)) {}

  CausalityVerdict verdict;
};

// One full run: prepare at the source, measure at both labs, report each
// record to the referee by classical message, compare there. The compare
// event can only exist once both messages are in; a schedule that puts it
// earlier is rejected. Other defects (superluminal messages, injected
// edges) are representable and left for locality_trace to flag.
inline EventLog record_run(const std::pair<MeasurementSetting, MeasurementSetting>& settings,
                           const std::pair<Outcome, Outcome>& outcomes,
                           const SiteGeometry& geometry, const RunSchedule& schedule) {
  geometry.validate();
  const double times[8] = {schedule.prepare_time,    schedule.measure_time[0],
                           schedule.measure_time[1], schedule.send_time[0],
                           schedule.send_time[1],    schedule.receive_time[0],
                           schedule.receive_time[1], schedule.compare_time};
  for (double t : times)
    if (!std::isfinite(t) || t < 0.0)
      throw std::invalid_argument("schedule times must be finite and non-negative");

  CausalityVerdict verdict;
  for (int i = 0; i < 2; ++i) {
    if (schedule.compare_time < schedule.receive_time[i]) {
      verdict.ok = false;
      verdict.violations.push_back({6 + i, 8, 0.0,
                                    schedule.compare_time - schedule.receive_time[i],
                                    "compare-before-message"});
    }
  }
  if (!verdict.ok) throw CausalityError(std::move(verdict));

  const double setting[2] = {settings.first.radians, settings.second.radians};
  const Outcome outcome[2] = {outcomes.first, outcomes.second};
  const Site lab[2] = {Site::lab1, Site::lab2};

  EventLog log;
  int prepare = log.append(Site::source, schedule.prepare_time, EventKind::prepare, {},
                           {{"pair", "singlet"}});
  int measure[2], send[2], receive[2];
  for (int i = 0; i < 2; ++i)
    measure[i] = log.append(lab[i], schedule.measure_time[i], EventKind::measure,
                            {prepare},
                            {{"setting", detail::num(setting[i])},
                             {"outcome", outcome_name(outcome[i])}});
  for (int i = 0; i < 2; ++i)
    send[i] = log.append(lab[i], schedule.send_time[i], EventKind::message_send,
                         {measure[i]},
                         {{"to", "referee"},
                          {"setting", detail::num(setting[i])},
                          {"outcome", outcome_name(outcome[i])}});
  for (int i = 0; i < 2; ++i)
    receive[i] = log.append(Site::referee, schedule.receive_time[i],
                            EventKind::message_receive, {send[i]},
                            {{"from", site_name(lab[i])},
                             {"setting", detail::num(setting[i])},
                             {"outcome", outcome_name(outcome[i])}});
  log.append(Site::referee, schedule.compare_time, EventKind::compare,
             {receive[0], receive[1]},
             {{"joint", std::string(outcome_name(outcome[0])) + "," +
                            outcome_name(outcome[1])},
              {"product",
               std::to_string(outcome_sign(outcome[0]) * outcome_sign(outcome[1]))}});
  return log;
}

// Structural audit of a completed log. Malformed logs (bad ids, bad times,
// measurement with no prepared pair) are rejected outright; a well-formed
// log yields a verdict listing every information-flow edge that outruns
// light, every direct cross-lab measurement dependency, and every compare
// that lacks one of the lab messages.
inline CausalityVerdict locality_trace(const EventLog& log, const SiteGeometry& geometry) {
  geometry.validate();
  const auto& events = log.events();
  if (events.empty()) throw std::invalid_argument("empty event log");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (e.id != static_cast<int>(i) + 1) throw std::invalid_argument("non-dense event ids");
    if (!std::isfinite(e.time) || e.time < 0.0)
      throw std::invalid_argument("event time must be finite and non-negative");
    for (int r : e.reads)
      if (r < 1 || r >= e.id)
        throw std::invalid_argument("read edge must reference an earlier event");
    if (e.kind == EventKind::measure) {
      bool has_pair = false;
      for (int r : e.reads)
        if (log.event(r).kind == EventKind::prepare) has_pair = true;
      if (!has_pair)
        throw std::invalid_argument("measure event references no prepared pair");
    }
  }

  constexpr double slop = 1e-12;
  CausalityVerdict verdict;
  auto flag = [&verdict](int from, int to, double required, double actual,
                         const char* rule) {
    verdict.ok = false;
    verdict.violations.push_back({from, to, required, actual, rule});
  };

  for (const Event& e : events) {
    for (int r : e.reads) {
      const Event& src = log.event(r);
      double required = geometry.min_delay(src.site, e.site);
      double actual = e.time - src.time;
      if (actual + slop < required) flag(src.id, e.id, required, actual, "light-cone");
      if (e.kind == EventKind::measure && src.kind == EventKind::measure &&
          src.site != e.site)
        flag(src.id, e.id, std::numeric_limits<double>::infinity(), actual,
             "cross-lab-measurement");
    }
  }

  for (const Event& e : events) {
    if (e.kind != EventKind::compare) continue;
    // Walk the read closure: a compare must rest on both labs' measurements.
    std::set<int> seen;
    std::vector<int> frontier = e.reads;
    bool from_lab[2] = {false, false};
    while (!frontier.empty()) {
      int id = frontier.back();
      frontier.pop_back();
      if (!seen.insert(id).second) continue;
      const Event& src = log.event(id);
      if (src.kind == EventKind::measure) {
        if (src.site == Site::lab1) from_lab[0] = true;
        if (src.site == Site::lab2) from_lab[1] = true;
      }
      frontier.insert(frontier.end(), src.reads.begin(), src.reads.end());
    }
    const Site labs[2] = {Site::lab1, Site::lab2};
    for (int i = 0; i < 2; ++i)
      if (!from_lab[i])
        flag(e.id, e.id, geometry.min_delay(labs[i], e.site),
             -std::numeric_limits<double>::infinity(), "compare-missing-message");
  }

  return verdict;
}

// Largest total-variation distance between the near lab's outcome
// distribution under the alternative far-lab settings. Exact weights, no
// sampling; for two outcomes the distance is |p_up - p'_up|.
inline double no_signaling_check(const MeasurementSetting& near_setting,
                                 const std::vector<MeasurementSetting>& far_settings) {
  if (far_settings.size() < 2)
    throw std::invalid_argument("need at least two candidate far settings");
  double lo = 1.0, hi = 0.0;
  for (const auto& far : far_settings) {
    CorrelationReport r = correlation(near_setting, far);
    double p_up = r.joint.at({Outcome::up, Outcome::up}) +
                  r.joint.at({Outcome::up, Outcome::down});
    lo = std::min(lo, p_up);
    hi = std::max(hi, p_up);
  }
  return hi - lo;
}

inline std::string to_event_text(const Event& e) {
  std::string out = std::to_string(e.id);
  out += ' ';
  out += site_name(e.site);
  out += ' ';
  out += detail::num(e.time);
  out += ' ';
  out += kind_name(e.kind);
  out += " reads=";
  if (e.reads.empty()) {
    out += '-';
  } else {
    for (std::size_t i = 0; i < e.reads.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(e.reads[i]);
    }
  }
  for (const auto& [key, value] : e.payload) {
    out += ' ';
    out += key;
    out += '=';
    out += value;
  }
  return out;
}

inline std::string to_event_text(const EventLog& log) {
  std::string out;
  for (const Event& e : log.events()) {
    out += to_event_text(e);
    out += '\n';
  }
  return out;
}

inline std::string to_json_text(const CausalityVerdict& v) {
  std::string out = std::string("{\"ok\":") + (v.ok ? "true" : "false") +
                    ",\"violations\":[";
  for (std::size_t i = 0; i < v.violations.size(); ++i) {
    const Violation& x = v.violations[i];
    if (i) out += ',';
    out += "{\"from\":" + std::to_string(x.from_id) +
           ",\"to\":" + std::to_string(x.to_id) +
           ",\"required_delay\":" + detail::num(x.required_delay) +
           ",\"actual_delay\":" + detail::num(x.actual_delay) + ",\"rule\":\"" +
           json_escape(x.rule) + "\"}";
  }
  out += "]}";
  return out;
}

}  // namespace everett
