#include "cogmac/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "cogmac/error.hpp"
#include "csv_util.hpp"

namespace cogmac::features {

using sim::EventKind;
using sim::Nanos;

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.interval_s = interval_s;
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(samples.at(i));
  return out;
}

void Dataset::append(const Dataset& other) {
  if (interval_s == 0.0) interval_s = other.interval_s;
  samples.insert(samples.end(), other.samples.begin(), other.samples.end());
}

std::vector<double> Dataset::labels() const {
  std::vector<double> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.plr);
  return y;
}

std::vector<Window> window_trace(const sim::Trace& trace, double interval_s) {
  if (!(interval_s > 0.0)) throw ContractViolation("window_trace: interval_s must be > 0");
  std::vector<Window> windows;
  if (trace.events.empty()) return windows;
  const Nanos width = sim::to_nanos(interval_s);
  if (width <= 0) throw ContractViolation("window_trace: interval_s below 1 ns resolution");
  const Nanos count = sim::to_nanos(trace.duration_s) / width;
  const auto& ev = trace.events;
  auto cursor = ev.begin();
  for (Nanos k = 0; k < count; ++k) {
    const Nanos begin = k * width;
    const Nanos end = begin + width;
    auto first = std::lower_bound(cursor, ev.end(), begin,
                                  [](const sim::TraceEvent& e, Nanos t) { return e.time_ns < t; });
    auto last = std::lower_bound(first, ev.end(), end,
                                 [](const sim::TraceEvent& e, Nanos t) { return e.time_ns < t; });
    windows.push_back({sim::to_seconds(begin), interval_s,
                       std::span<const sim::TraceEvent>(ev).subspan(static_cast<std::size_t>(first - ev.begin()),
                                                                    static_cast<std::size_t>(last - first))});
    cursor = last;
  }
  return windows;
}

namespace {

double median(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace

FeatureVector extract_features(const Window& window, double fallback_ipi_s) {
  FeatureVector fv;
  std::map<int, std::vector<Nanos>> arrivals;
  std::map<int, bool> detected;
  for (const auto& e : window.events) {
    if (e.kind == EventKind::RX_OK) {
      ++fv.rp;
      detected[e.node_id] = true;
      arrivals[e.node_id].push_back(e.time_ns);
    } else if (e.kind == EventKind::RX_ERR) {
      ++fv.errp;
      detected[e.node_id] = true;
    }
  }
  fv.d = static_cast<int>(detected.size());

  std::vector<double> per_node;
  for (auto& [node, times] : arrivals) {
    if (times.size() < 2) continue;
    std::vector<double> gaps;
    gaps.reserve(times.size() - 1);
    for (std::size_t i = 1; i < times.size(); ++i) gaps.push_back(sim::to_seconds(times[i] - times[i - 1]));
    per_node.push_back(median(gaps));
  }
  fv.ipi_s = per_node.empty() ? fallback_ipi_s : median(per_node);
  return fv;
}

long count_generated(const Window& window) {
  return std::count_if(window.events.begin(), window.events.end(),
                       [](const sim::TraceEvent& e) { return e.kind == EventKind::GEN; });
}

double compute_label(const Window& window, long gen, LabelDiagnostics* diag) {
  if (gen <= 0) return 0.0;
  const long rp = std::count_if(window.events.begin(), window.events.end(),
                                [](const sim::TraceEvent& e) { return e.kind == EventKind::RX_OK; });
  if (rp > gen) {
    // Packet generated in an earlier window and received in this one.
    if (diag) ++diag->clamped_windows;
    return 0.0;
  }
  return std::clamp(1.0 - static_cast<double>(rp) / static_cast<double>(gen), 0.0, 1.0);
}

Dataset build_dataset(const sim::Trace& trace, double interval_s, LabelDiagnostics* diag) {
  Dataset ds;
  ds.interval_s = interval_s;
  for (const Window& w : window_trace(trace, interval_s)) {
    Sample s;
    s.features = extract_features(w, trace.traffic_ipi_s);
    s.plr = compute_label(w, count_generated(w), diag);
    s.window_start_s = w.start_s;
    ds.samples.push_back(s);
  }
  return ds;
}

Dataset shift_labels(const Dataset& dataset, int horizon) {
  if (horizon < 0) throw ContractViolation("shift_labels: horizon must be >= 0");
  Dataset out;
  out.interval_s = dataset.interval_s;
  const auto h = static_cast<std::size_t>(horizon);
  for (std::size_t i = 0; i + h < dataset.size(); ++i) {
    Sample s = dataset.samples[i];
    s.plr = dataset.samples[i + h].plr;
    out.samples.push_back(s);
  }
  return out;
}

namespace {
constexpr std::string_view kDatasetHeader = "window_start_s,d,ipi_s,rp,errp,plr";
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
  out << kDatasetHeader << '\n';
  char line[256];
  for (const Sample& s : dataset.samples) {
    const int n = std::snprintf(line, sizeof line, "%.6f,%d,%.6f,%d,%d,%.6f\n", s.window_start_s, s.features.d,
                                s.features.ipi_s, s.features.rp, s.features.errp, s.plr);
    out.write(line, n);
  }
}

std::string dataset_to_csv(const Dataset& dataset) {
  std::ostringstream os;
  write_dataset_csv(os, dataset);
  return os.str();
}

Dataset read_dataset_csv(std::istream& in) {
  detail::expect_header(in, kDatasetHeader, "dataset CSV");
  Dataset ds;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 6) {
      throw SchemaError("dataset CSV: expected 6 columns at row " + std::to_string(row) + ", got " +
                        std::to_string(cells.size()));
    }
    Sample s;
    s.window_start_s = detail::parse_real(cells[0], row, "window_start_s");
    s.features.d = detail::parse_int<int>(cells[1], row, "d");
    s.features.ipi_s = detail::parse_real(cells[2], row, "ipi_s");
    s.features.rp = detail::parse_int<int>(cells[3], row, "rp");
    s.features.errp = detail::parse_int<int>(cells[4], row, "errp");
    s.plr = detail::parse_real(cells[5], row, "plr");
    if (!(s.plr >= 0.0 && s.plr <= 1.0)) {
      throw SchemaError("dataset CSV: plr outside [0,1] at " + detail::cell_context(row, "plr"));
    }
    if (s.features.d < 0 || s.features.rp < 0 || s.features.errp < 0) {
      throw SchemaError("dataset CSV: negative count at row " + std::to_string(row));
    }
    ds.samples.push_back(s);
  }
  double gap = 0.0;
  for (std::size_t i = 1; i < ds.size(); ++i) {
    const double g = ds.samples[i].window_start_s - ds.samples[i - 1].window_start_s;
    if (g > 1e-9 && (gap == 0.0 || g < gap)) gap = g;
  }
  ds.interval_s = std::round(gap * 1e6) / 1e6;
  return ds;
}

}  // namespace cogmac::features
