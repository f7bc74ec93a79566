#include "cogmac/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cogmac/error.hpp"
#include "cogmac/json_io.hpp"
#include "cogmac/rng.hpp"
#include "json_util.hpp"

namespace cogmac::corpus {

using nlohmann::json;

namespace {

constexpr std::string_view kSchemaVersion = "1";

json spec_json(const CorpusSpec& spec) {
  json scenarios = json::array();
  for (const auto& s : spec.interference_scenarios) scenarios.push_back(s ? json(*s) : json(nullptr));
  return {{"node_counts", spec.node_counts},
          {"ipi_grid_s", spec.ipi_grid_s},
          {"interference_scenarios", std::move(scenarios)},
          {"per_point_duration_s", spec.per_point_duration_s},
          {"master_seed", spec.master_seed}};
}

CorpusSpec parse_spec(const json& j, std::string_view path) {
  detail::reject_unknown(
      j, {"node_counts", "ipi_grid_s", "interference_scenarios", "per_point_duration_s", "master_seed"}, path);
  CorpusSpec spec;
  detail::optional_field(j, "node_counts", path, spec.node_counts);
  detail::optional_field(j, "ipi_grid_s", path, spec.ipi_grid_s);
  detail::optional_field(j, "per_point_duration_s", path, spec.per_point_duration_s);
  detail::optional_field(j, "master_seed", path, spec.master_seed);
  if (const auto it = j.find("interference_scenarios"); it != j.end()) {
    const std::string base = detail::join_path(path, "interference_scenarios");
    if (!it->is_array()) throw SchemaError("expected array at '" + base + "'");
    spec.interference_scenarios.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& s = (*it)[i];
      if (s.is_null()) {
        spec.interference_scenarios.emplace_back(std::nullopt);
      } else {
        spec.interference_scenarios.emplace_back(sim::parse_pattern(s, base + "[" + std::to_string(i) + "]"));
      }
    }
  }
  return spec;
}

std::string entry_name(std::size_t index, const sim::SimConfig& c) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "trace_%03zu_n%d_ipi%g_%s.csv", index, c.num_transmitters, c.traffic_ipi_s,
                c.interference ? "jam" : "clean");
  return buf;
}

}  // namespace

void validate(const CorpusSpec& spec) {
  if (spec.node_counts.empty()) throw ConfigError("empty grid: node_counts");
  if (spec.ipi_grid_s.empty()) throw ConfigError("empty grid: ipi_grid_s");
  if (spec.interference_scenarios.empty()) throw ConfigError("empty grid: interference_scenarios");
  for (const auto& entry : plan(spec, Split::Train)) sim::validate(entry.config);
}

std::string spec_to_json(const CorpusSpec& spec) { return spec_json(spec).dump(2); }

CorpusSpec spec_from_json(std::string_view text) {
  const json j = detail::parse_json(text, "corpus spec");
  return parse_spec(j, "");
}

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view token) {
  if (token == "train") return Split::Train;
  if (token == "test") return Split::Test;
  throw ConfigError("unknown split '" + std::string(token) + "' (expected train or test)");
}

std::uint64_t trace_seed(std::uint64_t master, Split split, std::size_t index) {
  return derive_seed(derive_seed(master, split == Split::Train ? 1 : 2), index);
}

std::vector<CorpusEntry> plan(const CorpusSpec& spec, Split split) {
  std::vector<CorpusEntry> out;
  for (int n : spec.node_counts) {
    for (double ipi : spec.ipi_grid_s) {
      for (const auto& scenario : spec.interference_scenarios) {
        sim::SimConfig c;
        c.num_transmitters = n;
        c.traffic_ipi_s = ipi;
        c.duration_s = spec.per_point_duration_s;
        c.interference = scenario;
        c.seed = trace_seed(spec.master_seed, split, out.size());
        out.push_back({entry_name(out.size(), c), c});
      }
    }
  }
  return out;
}

std::string manifest_to_json(const Manifest& m) {
  json traces = json::array();
  for (const auto& e : m.traces) traces.push_back({{"file", e.file}, {"config", json(e.config)}});
  const json doc = {{"schema_version", kSchemaVersion},
                    {"split", to_string(m.split)},
                    {"spec", spec_json(m.spec)},
                    {"traces", std::move(traces)}};
  return doc.dump(2);
}

Manifest manifest_from_json(std::string_view text) {
  const json j = detail::parse_json(text, "manifest");
  detail::reject_unknown(j, {"schema_version", "split", "spec", "traces"}, "");
  if (detail::field<std::string>(j, "schema_version", "") != kSchemaVersion) {
    throw SchemaError("manifest: unsupported schema_version");
  }
  Manifest m;
  try {
    m.split = parse_split(detail::field<std::string>(j, "split", ""));
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("manifest: ") + e.what());
  }
  m.spec = parse_spec(detail::require(j, "spec", ""), "spec");
  const json& traces = detail::require(j, "traces", "");
  if (!traces.is_array()) throw SchemaError("expected array at 'traces'");
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const std::string path = "traces[" + std::to_string(i) + "]";
    detail::reject_unknown(traces[i], {"file", "config"}, path);
    CorpusEntry e;
    e.file = detail::field<std::string>(traces[i], "file", path);
    if (e.file.empty() || e.file.find('/') != std::string::npos || e.file.find("..") != std::string::npos) {
      throw SchemaError("bad file name at '" + path + ".file'");
    }
    e.config = sim::parse_config(detail::require(traces[i], "config", path), path + ".config");
    m.traces.push_back(std::move(e));
  }
  return m;
}

Manifest read_manifest(const std::filesystem::path& split_dir) {
  return manifest_from_json(read_file(split_dir / kManifestFile));
}

Manifest write_corpus(const CorpusSpec& spec, Split split, const std::filesystem::path& split_dir,
                      const std::function<void(std::size_t, std::size_t)>& progress) {
  validate(spec);
  std::filesystem::create_directories(split_dir);
  Manifest m{split, spec, plan(spec, split)};
  for (std::size_t i = 0; i < m.traces.size(); ++i) {
    const sim::Trace trace = sim::simulate(m.traces[i].config);
    write_atomic(split_dir / m.traces[i].file, [&](std::ostream& out) { sim::write_trace_csv(out, trace); });
    if (progress) progress(i + 1, m.traces.size());
  }
  write_atomic(split_dir / kManifestFile, manifest_to_json(m) + "\n");
  return m;
}

sim::Trace load_trace(const std::filesystem::path& split_dir, const CorpusEntry& entry) {
  const auto path = split_dir / entry.file;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace " + path.string());
  sim::Trace t;
  try {
    t.events = sim::read_trace_csv(in);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  t.duration_s = entry.config.duration_s;
  t.num_transmitters = entry.config.num_transmitters;
  t.traffic_ipi_s = entry.config.traffic_ipi_s;
  return t;
}

std::vector<features::Dataset> build_datasets(const std::filesystem::path& split_dir, const Manifest& manifest,
                                              const std::vector<double>& intervals, int horizon,
                                              features::LabelDiagnostics* diag) {
  std::vector<features::Dataset> out(intervals.size());
  for (std::size_t k = 0; k < intervals.size(); ++k) out[k].interval_s = intervals[k];
  for (const auto& entry : manifest.traces) {
    const sim::Trace trace = load_trace(split_dir, entry);
    for (std::size_t k = 0; k < intervals.size(); ++k) {
      out[k].append(features::shift_labels(features::build_dataset(trace, intervals[k], diag), horizon));
    }
  }
  return out;
}

void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    content(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  write_atomic(path, [&](std::ostream& out) { out << content; });
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace cogmac::corpus
