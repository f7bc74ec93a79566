#pragma once

// Observation-window features: per window, the vector [d, IPI, rP, errP]
// measured at the sink and the packet loss rate label.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogmac/sim.hpp"

namespace cogmac::features {

inline constexpr std::size_t kNumFeatures = 4;
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {"d", "ipi_s", "rp", "errp"};

struct FeatureVector {
  int d = 0;           // distinct transmitters heard (RX_OK or RX_ERR)
  double ipi_s = 0.0;  // inter-packet interval estimate
  int rp = 0;          // frames received correctly
  int errp = 0;        // erroneous frames

  std::array<double, kNumFeatures> values() const {
    return {static_cast<double>(d), ipi_s, static_cast<double>(rp), static_cast<double>(errp)};
  }
  bool operator==(const FeatureVector&) const = default;
};

struct Sample {
  FeatureVector features;
  double plr = 0.0;
  double window_start_s = 0.0;
  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;
  double interval_s = 0.0;  // 0 when unknown

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  Dataset subset(std::span<const std::size_t> indices) const;
  void append(const Dataset& other);
  std::vector<double> labels() const;
};

/// Half-open slice [start_s, start_s + interval_s) of a trace.
struct Window {
  double start_s = 0.0;
  double interval_s = 0.0;
  std::span<const sim::TraceEvent> events;
};

/// Splits [0, duration) into consecutive half-open windows; a trailing
/// partial window is discarded. Throws ContractViolation if interval_s <= 0.
std::vector<Window> window_trace(const sim::Trace& trace, double interval_s);

/// `fallback_ipi_s` is used when no node has two arrivals in the window.
FeatureVector extract_features(const Window& window, double fallback_ipi_s);

/// Diagnostics accumulated while labelling windows.
struct LabelDiagnostics {
  std::size_t clamped_windows = 0;  // rp exceeded the generation count
};

double compute_label(const Window& window, long ground_truth_gen_count, LabelDiagnostics* diag = nullptr);

long count_generated(const Window& window);

Dataset build_dataset(const sim::Trace& trace, double interval_s, LabelDiagnostics* diag = nullptr);

/// Forward-prediction variant: sample i keeps its features but takes the
/// label of window i + horizon; the last `horizon` samples are dropped.
Dataset shift_labels(const Dataset& dataset, int horizon);

// --- serialization: `window_start_s,d,ipi_s,rp,errp,plr`, six-decimal reals --

void write_dataset_csv(std::ostream& out, const Dataset& dataset);
std::string dataset_to_csv(const Dataset& dataset);
/// interval_s is inferred from the smallest positive gap between window starts.
Dataset read_dataset_csv(std::istream& in);

}  // namespace cogmac::features
