#include "cogmac/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <string>

#include "cogmac/error.hpp"

namespace cogmac::sim {

Nanos to_nanos(double seconds) { return std::llround(seconds * 1e9); }

void validate(const SimConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError("invalid SimConfig: " + what); };
  if (c.num_transmitters < 1) fail("num_transmitters must be >= 1");
  if (!(c.traffic_ipi_s > 0.0) || !std::isfinite(c.traffic_ipi_s)) fail("traffic_ipi_s must be > 0");
  if (to_nanos(c.traffic_ipi_s) < 1) fail("traffic_ipi_s below 1 ns resolution");
  if (!(c.duration_s > 0.0) || !std::isfinite(c.duration_s)) fail("duration_s must be > 0");
  if (c.payload_bytes < 1) fail("payload_bytes must be >= 1");
  const CsmaParams& m = c.mac_params;
  if (m.min_be < 0 || m.max_be > 30) fail("mac_params backoff exponents out of range");
  if (m.min_be > m.max_be) fail("mac_params.min_be must be <= max_be");
  if (m.max_csma_backoffs < 0) fail("mac_params.max_csma_backoffs must be >= 0");
  if (m.max_frame_retries < 0) fail("mac_params.max_frame_retries must be >= 0");
  if (!(m.unit_backoff_s > 0.0)) fail("mac_params.unit_backoff_s must be > 0");
  if (!(m.cca_s > 0.0)) fail("mac_params.cca_s must be > 0");
  if (!(m.bitrate_bps > 0.0)) fail("mac_params.bitrate_bps must be > 0");
  if (!(m.ack_timeout_s > 0.0)) fail("mac_params.ack_timeout_s must be > 0");
  if (c.interference) {
    const auto& p = *c.interference;
    if (!(p.on_s > 0.0)) fail("interference.on_s must be > 0");
    if (!(p.off_s >= 0.0)) fail("interference.off_s must be >= 0");
    if (!(p.start_s >= 0.0)) fail("interference.start_s must be >= 0");
  }
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::GEN: return "GEN";
    case EventKind::TX_START: return "TX_START";
    case EventKind::TX_END: return "TX_END";
    case EventKind::RX_OK: return "RX_OK";
    case EventKind::RX_ERR: return "RX_ERR";
    case EventKind::DROP_CSMA_FAIL: return "DROP_CSMA_FAIL";
    case EventKind::DROP_RETRY_EXHAUST: return "DROP_RETRY_EXHAUST";
  }
  return "?";
}

EventKind parse_event_kind(std::string_view token) {
  for (int k = 0; k <= static_cast<int>(EventKind::DROP_RETRY_EXHAUST); ++k) {
    const auto kind = static_cast<EventKind>(k);
    if (to_string(kind) == token) return kind;
  }
  throw SchemaError("unknown event kind '" + std::string(token) + "'");
}

bool trace_order(const TraceEvent& a, const TraceEvent& b) {
  if (a.time_ns != b.time_ns) return a.time_ns < b.time_ns;
  if (a.node_id != b.node_id) return a.node_id < b.node_id;
  if (a.seq != b.seq) return a.seq < b.seq;
  return a.kind < b.kind;
}

std::vector<Interval> interference_schedule(const InterferencePattern& p, double duration_s) {
  if (!(duration_s > 0.0)) throw ContractViolation("interference_schedule: duration_s must be > 0");
  std::vector<Interval> out;
  if (p.start_s >= duration_s) return out;
  if (p.off_s <= 0.0) {
    out.push_back({p.start_s, duration_s});
    return out;
  }
  const double period = p.on_s + p.off_s;
  for (long i = 0;; ++i) {
    const double begin = p.start_s + static_cast<double>(i) * period;
    if (begin >= duration_s) break;
    out.push_back({begin, std::min(begin + p.on_s, duration_s)});
  }
  return out;
}

InterferenceModel::InterferenceModel(const std::optional<InterferencePattern>& pattern) {
  if (!pattern) return;
  active_ = true;
  on_ = to_nanos(pattern->on_s);
  period_ = on_ + to_nanos(pattern->off_s);
  start_ = to_nanos(pattern->start_s);
}

bool InterferenceModel::overlaps(Nanos begin, Nanos end) const {
  if (!active_ || end <= start_ || end <= begin) return false;
  if (period_ <= on_) return true;  // no idle gap: continuous from start_
  const Nanos k = begin <= start_ ? 0 : (begin - start_) / period_;
  const Nanos burst = start_ + k * period_;
  if (burst < end && burst + on_ > begin) return true;
  return burst + period_ < end;
}

double backoff_delay(int be, const CsmaParams& params, Rng& rng) {
  if (be < params.min_be || be > params.max_be) {
    throw ContractViolation("backoff_delay: backoff exponent " + std::to_string(be) +
                            " outside [min_be, max_be]");
  }
  const auto slots = rng.uniform_below(std::uint64_t{1} << be);
  return static_cast<double>(slots) * params.unit_backoff_s;
}

RxOutcome resolve_reception(const Frame& frame, std::span<const Frame> overlapping,
                            bool interference_busy) {
  for (const Frame& other : overlapping) {
    if (other.start_ns < frame.start_ns ||
        (other.start_ns == frame.start_ns && other.node_id < frame.node_id)) {
      return RxOutcome::NOT_RECEIVED;
    }
  }
  if (!overlapping.empty() || interference_busy) return RxOutcome::RX_ERR;
  return RxOutcome::RX_OK;
}

Nanos frame_airtime(int payload_bytes, const CsmaParams& params) {
  const int bytes = payload_bytes + kPhyOverheadBytes + kMacOverheadBytes;
  return to_nanos(bytes * 8.0 / params.bitrate_bps);
}

Nanos ack_airtime(const CsmaParams& params) { return to_nanos(kAckFrameBytes * 8.0 / params.bitrate_bps); }

namespace {

enum class Action : std::uint8_t { Generate, CcaEnd, TxStart, TxEnd, AckEnd, AckTimeout };

struct Scheduled {
  Nanos time;
  std::uint64_t order;  // FIFO among equal times
  Action action;
  int node;

  bool operator>(const Scheduled& o) const {
    return time != o.time ? time > o.time : order > o.order;
  }
};

struct Transmission {
  Nanos start;
  Nanos end;
  int owner;  // transmitter id, or 0 for sink ACKs
  std::uint64_t id;
};

struct Node {
  explicit Node(std::uint64_t seed) : rng(seed) {}
  Rng rng;
  Nanos phase = 0;
  std::int64_t generated = 0;
  bool busy = false;
  std::int64_t seq = -1;
  int nb = 0;
  int be = 0;
  int retries = 0;
  bool delivered = false;
  Nanos tx_start = 0;
  Nanos tx_end = 0;
  std::uint64_t tx_id = 0;
  std::uint64_t ack_id = 0;
};

class Simulator {
 public:
  explicit Simulator(const SimConfig& c)
      : cfg_(c),
        mac_(c.mac_params),
        jammer_(c.interference),
        duration_(to_nanos(c.duration_s)),
        ipi_(to_nanos(c.traffic_ipi_s)),
        unit_(to_nanos(mac_.unit_backoff_s)),
        cca_(to_nanos(mac_.cca_s)),
        turnaround_(to_nanos(kTurnaroundS)),
        ack_timeout_(to_nanos(mac_.ack_timeout_s)),
        airtime_(frame_airtime(c.payload_bytes, mac_)),
        ack_air_(ack_airtime(mac_)),
        lookback_(std::max({airtime_, ack_air_, cca_}) + 1) {
    // Stream 0 is reserved for scheduler-level randomness; transmitters use 1..N.
    nodes_.reserve(c.num_transmitters + 1);
    for (int i = 0; i <= c.num_transmitters; ++i) nodes_.emplace_back(derive_seed(c.seed, i));
    for (int i = 1; i <= c.num_transmitters; ++i) {
      nodes_[i].phase = ipi_ * (i - 1) / c.num_transmitters;
      schedule(nodes_[i].phase, Action::Generate, i);
    }
  }

  Trace run() {
    while (!queue_.empty()) {
      const Scheduled ev = queue_.top();
      if (ev.time >= duration_) break;
      queue_.pop();
      now_ = ev.time;
      prune();
      dispatch(ev);
    }
    std::stable_sort(events_.begin(), events_.end(), trace_order);
    Trace t;
    t.events = std::move(events_);
    t.duration_s = cfg_.duration_s;
    t.num_transmitters = cfg_.num_transmitters;
    t.traffic_ipi_s = cfg_.traffic_ipi_s;
    return t;
  }

 private:
  void schedule(Nanos at, Action a, int node) { queue_.push({at, order_++, a, node}); }

  void emit(int node, EventKind kind, std::int64_t seq) {
    events_.push_back({now_, node, kind, seq, cfg_.payload_bytes});
  }

  void prune() {
    while (!channel_.empty() && channel_.front().end + lookback_ < now_) channel_.pop_front();
  }

  bool channel_busy(Nanos begin, Nanos end, std::uint64_t exclude = 0) const {
    if (jammer_.overlaps(begin, end)) return true;
    return std::any_of(channel_.begin(), channel_.end(), [&](const Transmission& t) {
      return t.id != exclude && t.start < end && t.end > begin;
    });
  }

  void dispatch(const Scheduled& ev) {
    switch (ev.action) {
      case Action::Generate: on_generate(ev.node); break;
      case Action::CcaEnd: on_cca_end(ev.node); break;
      case Action::TxStart: on_tx_start(ev.node); break;
      case Action::TxEnd: on_tx_end(ev.node); break;
      case Action::AckEnd: on_ack_end(ev.node); break;
      case Action::AckTimeout: on_ack_timeout(ev.node); break;
    }
  }

  void on_generate(int id) {
    Node& n = nodes_[id];
    const std::int64_t seq = n.generated++;
    emit(id, EventKind::GEN, seq);
    const Nanos next = n.phase + n.generated * ipi_;
    if (next < duration_) schedule(next, Action::Generate, id);
    if (n.busy) {
      // Single-frame MAC buffer: a frame arriving while the previous one is
      // still being served never gets channel access.
      emit(id, EventKind::DROP_CSMA_FAIL, seq);
      return;
    }
    n.busy = true;
    n.seq = seq;
    n.delivered = false;
    n.retries = 0;
    start_csma(id);
  }

  void start_csma(int id) {
    Node& n = nodes_[id];
    n.nb = 0;
    n.be = mac_.min_be;
    backoff(id);
  }

  void backoff(int id) {
    Node& n = nodes_[id];
    const auto slots = static_cast<Nanos>(n.rng.uniform_below(std::uint64_t{1} << n.be));
    schedule(now_ + slots * unit_ + cca_, Action::CcaEnd, id);
  }

  void on_cca_end(int id) {
    Node& n = nodes_[id];
    if (!channel_busy(now_ - cca_, now_)) {
      schedule(now_ + turnaround_, Action::TxStart, id);
      return;
    }
    ++n.nb;
    n.be = std::min(n.be + 1, mac_.max_be);
    if (n.nb > mac_.max_csma_backoffs) {
      finish_failed(id, EventKind::DROP_CSMA_FAIL);
      return;
    }
    backoff(id);
  }

  void on_tx_start(int id) {
    Node& n = nodes_[id];
    emit(id, EventKind::TX_START, n.seq);
    n.tx_start = now_;
    n.tx_end = now_ + airtime_;
    n.tx_id = next_tx_id_++;
    channel_.push_back({n.tx_start, n.tx_end, id, n.tx_id});
    schedule(n.tx_end, Action::TxEnd, id);
  }

  void on_tx_end(int id) {
    Node& n = nodes_[id];
    emit(id, EventKind::TX_END, n.seq);

    overlap_scratch_.clear();
    for (const Transmission& t : channel_) {
      if (t.id != n.tx_id && t.start < n.tx_end && t.end > n.tx_start) {
        overlap_scratch_.push_back({t.start, t.end, t.owner});
      }
    }
    const Frame frame{n.tx_start, n.tx_end, id};
    const RxOutcome outcome =
        resolve_reception(frame, overlap_scratch_, jammer_.overlaps(n.tx_start, n.tx_end));

    if (outcome == RxOutcome::RX_ERR) emit(id, EventKind::RX_ERR, n.seq);
    if (outcome == RxOutcome::RX_OK && !n.delivered) {
      // Duplicates (retransmissions after a lost ACK) are acked but not reported.
      emit(id, EventKind::RX_OK, n.seq);
      n.delivered = true;
    }

    if (!mac_.ack_enabled) {
      if (n.delivered) {
        n.busy = false;
      } else {
        finish_failed(id, EventKind::DROP_RETRY_EXHAUST);
      }
      return;
    }
    if (outcome == RxOutcome::RX_OK) {
      const Nanos ack_start = now_ + turnaround_;
      n.ack_id = next_tx_id_++;
      channel_.push_back({ack_start, ack_start + ack_air_, 0, n.ack_id});
      schedule(ack_start + ack_air_, Action::AckEnd, id);
    } else {
      schedule(n.tx_end + ack_timeout_, Action::AckTimeout, id);
    }
  }

  void on_ack_end(int id) {
    Node& n = nodes_[id];
    const Nanos ack_start = now_ - ack_air_;
    if (!channel_busy(ack_start, now_, n.ack_id)) {
      n.busy = false;
      return;
    }
    schedule(std::max(now_, n.tx_end + ack_timeout_), Action::AckTimeout, id);
  }

  void on_ack_timeout(int id) {
    Node& n = nodes_[id];
    ++n.retries;
    if (n.retries > mac_.max_frame_retries) {
      finish_failed(id, EventKind::DROP_RETRY_EXHAUST);
      return;
    }
    start_csma(id);
  }

  // Terminates service of the current frame. A frame the sink already
  // delivered (only its ACK was lost) keeps RX_OK as its terminal event.
  void finish_failed(int id, EventKind drop_kind) {
    Node& n = nodes_[id];
    if (!n.delivered) emit(id, drop_kind, n.seq);
    n.busy = false;
  }

  SimConfig cfg_;
  CsmaParams mac_;
  InterferenceModel jammer_;
  Nanos duration_, ipi_, unit_, cca_, turnaround_, ack_timeout_, airtime_, ack_air_, lookback_;

  Nanos now_ = 0;
  std::uint64_t order_ = 0;
  std::uint64_t next_tx_id_ = 1;
  std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> queue_;
  std::deque<Transmission> channel_;
  std::vector<Frame> overlap_scratch_;
  std::vector<Node> nodes_;
  std::vector<TraceEvent> events_;
};

}  // namespace

Trace simulate(const SimConfig& config) {
  validate(config);
  return Simulator(config).run();
}

}  // namespace cogmac::sim
