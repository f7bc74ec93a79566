#include "cogmac/controller.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

#include "cogmac/error.hpp"

namespace cogmac::controller {

namespace {

std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void validate(const ControllerPolicy& p) {
  if (!(p.switch_up_threshold > 0.0 && p.switch_up_threshold <= 1.0)) {
    throw ConfigError("controller: switch_up_threshold must be in (0, 1]");
  }
  if (!(p.switch_down_threshold >= 0.0 && p.switch_down_threshold < 1.0)) {
    throw ConfigError("controller: switch_down_threshold must be in [0, 1)");
  }
  if (!(p.switch_down_threshold < p.switch_up_threshold)) {
    throw ConfigError("controller: switch_down_threshold must be below switch_up_threshold");
  }
  if (p.min_dwell_windows < 1) throw ConfigError("controller: min_dwell_windows must be at least 1");
  if (p.target_protocol.empty() || p.target_protocol == kBaseProtocol) {
    throw ConfigError("controller: target_protocol must name a protocol other than CSMA");
  }
}

std::string_view to_string(Action action) { return action == Action::SWITCH ? "SWITCH" : "KEEP"; }

std::pair<MacDecision, ControllerState> decide(double predicted_plr, const ControllerPolicy& policy,
                                               ControllerState state, double window_start_s) {
  const bool qualifies = state.on_target ? predicted_plr < policy.switch_down_threshold
                                         : predicted_plr > policy.switch_up_threshold;
  state.streak = qualifies ? state.streak + 1 : 0;

  MacDecision d;
  d.window_start_s = window_start_s;
  d.predicted_plr = predicted_plr;
  if (state.streak >= policy.min_dwell_windows) {
    state.on_target = !state.on_target;
    state.streak = 0;
    d.action = Action::SWITCH;
    d.target = state.on_target ? policy.target_protocol : std::string(kBaseProtocol);
  }
  d.current_protocol = state.on_target ? policy.target_protocol : std::string(kBaseProtocol);
  return {std::move(d), state};
}

double observe(const models::Model& model, const features::FeatureVector& x) { return models::predict(model, x); }

LoopResult run_loop(const WindowStream& stream, const models::Model& model, const ControllerPolicy& policy) {
  validate(policy);
  LoopResult result;
  ControllerState state;
  try {
    while (auto window = stream()) {
      auto [decision, next] = decide(observe(model, window->features), policy, state, window->window_start_s);
      decision.true_plr = window->true_plr;
      result.log.push_back(std::move(decision));
      state = next;
    }
  } catch (const std::exception& e) {
    result.error = e.what();
  }
  return result;
}

WindowStream dataset_stream(const features::Dataset& dataset, bool with_labels) {
  return [&dataset, with_labels, i = std::size_t{0}]() mutable -> std::optional<WindowRecord> {
    if (i >= dataset.size()) return std::nullopt;
    const auto& s = dataset.samples[i++];
    WindowRecord r{s.window_start_s, s.features, std::nullopt};
    if (with_labels) r.true_plr = s.plr;
    return r;
  };
}

void write_log_csv(std::ostream& out, const std::vector<MacDecision>& log) {
  out << "window_start_s,predicted_plr,action,target,current_protocol\n";
  for (const auto& d : log) {
    out << fixed6(d.window_start_s) << ',' << fixed6(d.predicted_plr) << ',' << to_string(d.action) << ',' << d.target
        << ',' << d.current_protocol << '\n';
  }
}

std::string log_to_csv(const std::vector<MacDecision>& log) {
  std::ostringstream out;
  write_log_csv(out, log);
  return out.str();
}

void write_audit_csv(std::ostream& out, const std::vector<MacDecision>& log) {
  out << "window_start_s,predicted_plr,true_plr\n";
  for (const auto& d : log) {
    if (d.true_plr) out << fixed6(d.window_start_s) << ',' << fixed6(d.predicted_plr) << ',' << fixed6(*d.true_plr) << '\n';
  }
}

}  // namespace cogmac::controller
