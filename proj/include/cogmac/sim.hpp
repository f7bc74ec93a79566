#pragma once

// Discrete-event simulator of a star-topology sensor network: N transmitters
// send periodic frames to a single sink (node 0) with unslotted CSMA/CA,
// acknowledgements and retries, optionally under a periodic carrier jammer.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogmac/rng.hpp"

namespace cogmac::sim {

/// Simulation time in integer nanoseconds. Traces print seconds with nine
/// decimals, so nanosecond resolution is lossless.
using Nanos = std::int64_t;

Nanos to_nanos(double seconds);
constexpr double to_seconds(Nanos ns) { return static_cast<double>(ns) / 1e9; }

struct CsmaParams {
  int min_be = 3;
  int max_be = 5;
  int max_csma_backoffs = 4;
  int max_frame_retries = 3;
  double unit_backoff_s = 320e-6;
  double cca_s = 128e-6;
  double bitrate_bps = 250000.0;
  bool ack_enabled = true;
  double ack_timeout_s = 864e-6;

  bool operator==(const CsmaParams&) const = default;
};

struct InterferencePattern {
  double on_s = 0.002;
  double off_s = 0.008;
  double start_s = 0.0;

  bool operator==(const InterferencePattern&) const = default;
};

struct SimConfig {
  int num_transmitters = 2;
  double traffic_ipi_s = 1.0;
  int payload_bytes = 100;
  double duration_s = 600.0;
  std::optional<InterferencePattern> interference;
  std::uint64_t seed = 42;
  CsmaParams mac_params;

  bool operator==(const SimConfig&) const = default;
};

/// Throws ConfigError naming the first violated invariant.
void validate(const SimConfig& config);

// PHY/MAC framing constants of the 2.4 GHz O-QPSK profile.
inline constexpr int kPhyOverheadBytes = 6;  // preamble + SFD + PHR
inline constexpr int kMacOverheadBytes = 11; // frame control, seq, addressing, FCS
inline constexpr int kAckFrameBytes = 11;    // PHY header + 5-byte ACK MPDU
inline constexpr double kTurnaroundS = 192e-6;

enum class EventKind : std::uint8_t {
  GEN,
  TX_START,
  TX_END,
  RX_OK,
  RX_ERR,
  DROP_CSMA_FAIL,
  DROP_RETRY_EXHAUST,
};

std::string_view to_string(EventKind kind);
/// Throws SchemaError for unknown tokens.
EventKind parse_event_kind(std::string_view token);

/// One packet-level event. Sink-side events (RX_OK, RX_ERR) carry the id of
/// the transmitting node, so every event names the packet owner.
struct TraceEvent {
  Nanos time_ns = 0;
  int node_id = 0;
  EventKind kind = EventKind::GEN;
  std::int64_t seq = 0;
  int size_bytes = 0;

  double time_s() const { return to_seconds(time_ns); }
  bool operator==(const TraceEvent&) const = default;
};

/// Total order used for traces: time, then (node_id, seq, kind rank).
bool trace_order(const TraceEvent& a, const TraceEvent& b);

struct Trace {
  std::vector<TraceEvent> events;
  double duration_s = 0.0;
  int num_transmitters = 0;
  double traffic_ipi_s = 0.0;
};

Trace simulate(const SimConfig& config);

struct Interval {
  double start_s;
  double end_s;
  bool operator==(const Interval&) const = default;
};

/// Busy intervals of the jammer, sorted, disjoint, clipped to [0, duration_s).
std::vector<Interval> interference_schedule(const InterferencePattern& pattern, double duration_s);

/// Interference busy test on the nanosecond grid, equivalent to checking
/// overlap against interference_schedule() without materializing it.
class InterferenceModel {
 public:
  InterferenceModel() = default;
  explicit InterferenceModel(const std::optional<InterferencePattern>& pattern);

  // True when any busy interval overlaps [begin, end).
  bool overlaps(Nanos begin, Nanos end) const;

 private:
  bool active_ = false;
  Nanos on_ = 0;
  Nanos period_ = 0;
  Nanos start_ = 0;
};

/// Unslotted backoff draw: u * unit_backoff_s with u uniform on {0..2^be-1}.
/// Throws ContractViolation when be is outside [min_be, max_be].
double backoff_delay(int be, const CsmaParams& params, Rng& rng);

enum class RxOutcome { RX_OK, RX_ERR, NOT_RECEIVED };

struct Frame {
  Nanos start_ns;
  Nanos end_ns;
  int node_id;
};

/// Capture model at the sink. The sink locks the earliest-starting frame among
/// a set of mutually overlapping frames (ties go to the lower node id). A
/// locked frame is RX_OK only if nothing overlaps it and no interference is on
/// the air during it; otherwise RX_ERR. Frames that lose the lock are not
/// received at all.
RxOutcome resolve_reception(const Frame& frame, std::span<const Frame> overlapping,
                            bool interference_busy);

// Frame airtime for a payload of the given size.
Nanos frame_airtime(int payload_bytes, const CsmaParams& params);
Nanos ack_airtime(const CsmaParams& params);

// --- serialization -------------------------------------------------------

/// `time_s,node_id,kind,seq,size_bytes` with nine-decimal times.
void write_trace_csv(std::ostream& out, const Trace& trace);
std::string trace_to_csv(const Trace& trace);
/// Parses events only; duration and traffic metadata come from the config.
std::vector<TraceEvent> read_trace_csv(std::istream& in);

std::string config_to_json(const SimConfig& config);
SimConfig config_from_json(std::string_view text);

}  // namespace cogmac::sim
