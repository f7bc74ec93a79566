#include <cinttypes>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "cogmac/json_io.hpp"
#include "cogmac/sim.hpp"
#include "csv_util.hpp"
#include "json_util.hpp"

namespace cogmac::sim {

namespace {

constexpr std::string_view kTraceHeader = "time_s,node_id,kind,seq,size_bytes";

// Exact decimal rendering of a nanosecond timestamp.
void format_seconds(char* buf, std::size_t size, Nanos ns) {
  const bool neg = ns < 0;
  const auto abs = static_cast<std::uint64_t>(neg ? -ns : ns);
  std::snprintf(buf, size, "%s%" PRIu64 ".%09" PRIu64, neg ? "-" : "", abs / std::uint64_t{1000000000},
                abs % std::uint64_t{1000000000});
}

// Parses plain "123.456" decimals exactly; anything else goes through strtod.
Nanos parse_seconds(std::string_view cell, std::size_t row) {
  const auto dot = cell.find('.');
  const bool plain = !cell.empty() && cell.find_first_not_of("0123456789.") == std::string_view::npos &&
                     cell.find('.', dot == std::string_view::npos ? cell.size() : dot + 1) ==
                         std::string_view::npos;
  if (plain) {
    const std::string_view whole = cell.substr(0, dot);
    std::string frac(dot == std::string_view::npos ? "" : cell.substr(dot + 1));
    if (frac.size() <= 9) {
      frac.resize(9, '0');
      const auto secs = whole.empty() ? 0 : detail::parse_int<std::int64_t>(whole, row, "time_s");
      return secs * 1000000000LL + detail::parse_int<std::int64_t>(frac, row, "time_s");
    }
  }
  return to_nanos(detail::parse_real(cell, row, "time_s"));
}


}  // namespace

CsmaParams parse_mac(const nlohmann::json& j, std::string_view path) {
  using detail::optional_field;
  detail::reject_unknown(j,
                         {"min_be", "max_be", "max_csma_backoffs", "max_frame_retries", "unit_backoff_s",
                          "cca_s", "bitrate_bps", "ack_enabled", "ack_timeout_s"},
                         path);
  CsmaParams p;
  optional_field(j, "min_be", path, p.min_be);
  optional_field(j, "max_be", path, p.max_be);
  optional_field(j, "max_csma_backoffs", path, p.max_csma_backoffs);
  optional_field(j, "max_frame_retries", path, p.max_frame_retries);
  optional_field(j, "unit_backoff_s", path, p.unit_backoff_s);
  optional_field(j, "cca_s", path, p.cca_s);
  optional_field(j, "bitrate_bps", path, p.bitrate_bps);
  optional_field(j, "ack_enabled", path, p.ack_enabled);
  optional_field(j, "ack_timeout_s", path, p.ack_timeout_s);
  return p;
}

InterferencePattern parse_pattern(const nlohmann::json& j, std::string_view path) {
  detail::reject_unknown(j, {"on_s", "off_s", "start_s"}, path);
  InterferencePattern p;
  detail::optional_field(j, "on_s", path, p.on_s);
  detail::optional_field(j, "off_s", path, p.off_s);
  detail::optional_field(j, "start_s", path, p.start_s);
  return p;
}

void to_json(nlohmann::json& j, const CsmaParams& p) {
  j = {{"min_be", p.min_be},
       {"max_be", p.max_be},
       {"max_csma_backoffs", p.max_csma_backoffs},
       {"max_frame_retries", p.max_frame_retries},
       {"unit_backoff_s", p.unit_backoff_s},
       {"cca_s", p.cca_s},
       {"bitrate_bps", p.bitrate_bps},
       {"ack_enabled", p.ack_enabled},
       {"ack_timeout_s", p.ack_timeout_s}};
}

void from_json(const nlohmann::json& j, CsmaParams& p) { p = parse_mac(j, "mac_params"); }

void to_json(nlohmann::json& j, const InterferencePattern& p) {
  j = {{"on_s", p.on_s}, {"off_s", p.off_s}, {"start_s", p.start_s}};
}

void from_json(const nlohmann::json& j, InterferencePattern& p) { p = parse_pattern(j, "interference"); }

void to_json(nlohmann::json& j, const SimConfig& c) {
  j = nlohmann::json::object();
  j["num_transmitters"] = c.num_transmitters;
  j["traffic_ipi_s"] = c.traffic_ipi_s;
  j["payload_bytes"] = c.payload_bytes;
  j["duration_s"] = c.duration_s;
  j["interference"] = c.interference ? nlohmann::json(*c.interference) : nlohmann::json(nullptr);
  j["seed"] = c.seed;
  j["mac_params"] = c.mac_params;
}

SimConfig parse_config(const nlohmann::json& j, std::string_view path) {
  detail::reject_unknown(j,
                         {"num_transmitters", "traffic_ipi_s", "payload_bytes", "duration_s", "interference",
                          "seed", "mac_params"},
                         path);
  SimConfig out;
  detail::optional_field(j, "num_transmitters", path, out.num_transmitters);
  detail::optional_field(j, "traffic_ipi_s", path, out.traffic_ipi_s);
  detail::optional_field(j, "payload_bytes", path, out.payload_bytes);
  detail::optional_field(j, "duration_s", path, out.duration_s);
  detail::optional_field(j, "seed", path, out.seed);
  if (const auto it = j.find("interference"); it != j.end() && !it->is_null()) {
    out.interference = parse_pattern(*it, detail::join_path(path, "interference"));
  }
  if (const auto it = j.find("mac_params"); it != j.end()) {
    out.mac_params = parse_mac(*it, detail::join_path(path, "mac_params"));
  }
  return out;
}

void from_json(const nlohmann::json& j, SimConfig& c) { c = parse_config(j, ""); }

std::string config_to_json(const SimConfig& config) { return nlohmann::json(config).dump(2); }

SimConfig config_from_json(std::string_view text) {
  return detail::parse_json(text, "SimConfig").get<SimConfig>();
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << kTraceHeader << '\n';
  char time_buf[48];
  char line[160];
  for (const TraceEvent& e : trace.events) {
    format_seconds(time_buf, sizeof time_buf, e.time_ns);
    const auto kind = to_string(e.kind);
    const int n = std::snprintf(line, sizeof line, "%s,%d,%.*s,%" PRId64 ",%d\n", time_buf, e.node_id,
                                static_cast<int>(kind.size()), kind.data(), e.seq, e.size_bytes);
    out.write(line, n);
  }
}

std::string trace_to_csv(const Trace& trace) {
  std::ostringstream os;
  write_trace_csv(os, trace);
  return os.str();
}

std::vector<TraceEvent> read_trace_csv(std::istream& in) {
  detail::expect_header(in, kTraceHeader, "trace CSV");
  std::vector<TraceEvent> events;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 5) {
      throw SchemaError("trace CSV: expected 5 columns at row " + std::to_string(row) + ", got " +
                        std::to_string(cells.size()));
    }
    TraceEvent e;
    e.time_ns = parse_seconds(cells[0], row);
    e.node_id = detail::parse_int<int>(cells[1], row, "node_id");
    try {
      e.kind = parse_event_kind(cells[2]);
    } catch (const SchemaError& err) {
      throw SchemaError(std::string(err.what()) + " at " + detail::cell_context(row, "kind"));
    }
    e.seq = detail::parse_int<std::int64_t>(cells[3], row, "seq");
    e.size_bytes = detail::parse_int<int>(cells[4], row, "size_bytes");
    events.push_back(e);
  }
  return events;
}

}  // namespace cogmac::sim
