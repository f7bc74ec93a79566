#pragma once

// Cognitive MAC controller: predicts plr for each observation window and
// decides, with two-threshold dwell hysteresis, whether to leave CSMA for a
// more interference-robust protocol.

#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cogmac/features.hpp"
#include "cogmac/models.hpp"

namespace cogmac::controller {

inline constexpr std::string_view kBaseProtocol = "CSMA";

struct ControllerPolicy {
  double switch_up_threshold = 0.2;
  double switch_down_threshold = 0.1;
  int min_dwell_windows = 2;
  std::string target_protocol = "TSCH";
};

/// Throws ConfigError unless 0 <= down < up <= 1, dwell >= 1 and the target is
/// a nonempty name distinct from the base protocol.
void validate(const ControllerPolicy& policy);

enum class Action { KEEP, SWITCH };
std::string_view to_string(Action action);

struct ControllerState {
  bool on_target = false;
  int streak = 0;  // consecutive windows satisfying the pending switch condition
  bool operator==(const ControllerState&) const = default;
};

struct MacDecision {
  double window_start_s = 0.0;
  double predicted_plr = 0.0;
  Action action = Action::KEEP;
  std::string target;            // protocol switched to; empty for KEEP
  std::string current_protocol;  // in force after this decision
  std::optional<double> true_plr;  // audit only
  bool operator==(const MacDecision&) const = default;
};

/// Pure hysteresis step.
std::pair<MacDecision, ControllerState> decide(double predicted_plr, const ControllerPolicy& policy,
                                               ControllerState state, double window_start_s = 0.0);

/// Clamped model prediction for one window.
double observe(const models::Model& model, const features::FeatureVector& x);

struct WindowRecord {
  double window_start_s = 0.0;
  features::FeatureVector features;
  std::optional<double> true_plr;
};

/// Yields the next window, or nullopt at the end of the stream.
using WindowStream = std::function<std::optional<WindowRecord>()>;

struct LoopResult {
  std::vector<MacDecision> log;
  std::optional<std::string> error;  // set when the stream or model failed
};

/// One decision per window until the stream ends. A failure stops the loop
/// and keeps the decisions made so far.
LoopResult run_loop(const WindowStream& stream, const models::Model& model, const ControllerPolicy& policy);

/// Replays a dataset in window order. Labels are attached for audit when
/// `with_labels` is set.
WindowStream dataset_stream(const features::Dataset& dataset, bool with_labels = false);

/// Blocking single-consumer queue that preserves push order. A producer
/// signals the end with close() or an error with fail().
template <class T>
class OrderedChannel {
 public:
  void push(T value) {
    {
      std::lock_guard lock(mutex_);
      items_.push_back(std::move(value));
    }
    ready_.notify_one();
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    ready_.notify_all();
  }

  void fail(std::exception_ptr error) {
    {
      std::lock_guard lock(mutex_);
      error_ = std::move(error);
      closed_ = true;
    }
    ready_.notify_all();
  }

  /// Next item in push order; nullopt once closed and drained. Rethrows a
  /// producer error after the items pushed before it.
  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (!items_.empty()) {
      T value = std::move(items_.front());
      items_.pop_front();
      return value;
    }
    if (error_) std::rethrow_exception(error_);
    return std::nullopt;
  }

 private:
  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<T> items_;
  bool closed_ = false;
  std::exception_ptr error_;
};

// --- decision log: `window_start_s,predicted_plr,action,target,current_protocol`

void write_log_csv(std::ostream& out, const std::vector<MacDecision>& log);
std::string log_to_csv(const std::vector<MacDecision>& log);
/// `window_start_s,predicted_plr,true_plr` for decisions carrying a label.
void write_audit_csv(std::ostream& out, const std::vector<MacDecision>& log);

}  // namespace cogmac::controller
