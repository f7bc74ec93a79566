#pragma once

// Simulation corpora: the node-count x load x interference grid, its
// manifest, and datasets built from a stored corpus.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cogmac/features.hpp"
#include "cogmac/sim.hpp"

namespace cogmac::corpus {

inline constexpr double kDefaultDurationS = 1080.0;
inline constexpr double kFastDurationS = 60.0;

struct CorpusSpec {
  std::vector<int> node_counts{2, 4, 8, 16, 28};
  std::vector<double> ipi_grid_s{2.0, 1.0, 0.5, 0.25, 0.125, 0.0625, 0.015625};
  std::vector<std::optional<sim::InterferencePattern>> interference_scenarios{std::nullopt,
                                                                              sim::InterferencePattern{}};
  double per_point_duration_s = kDefaultDurationS;
  std::uint64_t master_seed = 42;
  bool operator==(const CorpusSpec&) const = default;
};

/// Throws ConfigError("empty grid: ...") for an empty axis and ConfigError for
/// any grid point that is not a valid SimConfig.
void validate(const CorpusSpec& spec);

std::string spec_to_json(const CorpusSpec& spec);
/// Missing fields take defaults; unknown fields raise SchemaError.
CorpusSpec spec_from_json(std::string_view text);

enum class Split { Train, Test };
std::string_view to_string(Split split);
Split parse_split(std::string_view token);

struct CorpusEntry {
  std::string file;  // relative to the split directory
  sim::SimConfig config;
  bool operator==(const CorpusEntry&) const = default;
};

/// Seed of grid point `index`; the test split uses a separate stream.
std::uint64_t trace_seed(std::uint64_t master, Split split, std::size_t index);

/// Grid points in fixed order: node count, then load, then interference scenario.
std::vector<CorpusEntry> plan(const CorpusSpec& spec, Split split);

struct Manifest {
  Split split = Split::Train;
  CorpusSpec spec;
  std::vector<CorpusEntry> traces;
  bool operator==(const Manifest&) const = default;
};

inline constexpr std::string_view kManifestFile = "manifest.json";

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(std::string_view text);
Manifest read_manifest(const std::filesystem::path& split_dir);

/// Simulates every grid point into `split_dir` and writes the manifest last.
/// `progress` is called after each trace with (done, total).
Manifest write_corpus(const CorpusSpec& spec, Split split, const std::filesystem::path& split_dir,
                      const std::function<void(std::size_t, std::size_t)>& progress = {});

/// Reads a stored trace and restores its metadata from the manifest entry.
sim::Trace load_trace(const std::filesystem::path& split_dir, const CorpusEntry& entry);

/// One dataset per interval, each the concatenation of every trace's windows
/// in manifest order. Labels are shifted per trace by `horizon` windows.
std::vector<features::Dataset> build_datasets(const std::filesystem::path& split_dir, const Manifest& manifest,
                                              const std::vector<double>& intervals, int horizon = 0,
                                              features::LabelDiagnostics* diag = nullptr);

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& content);
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace cogmac::corpus
