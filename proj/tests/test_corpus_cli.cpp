#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "cogmac/corpus.hpp"
#include "cogmac/error.hpp"
#include "cogmac/features.hpp"
#include "cogmac/models.hpp"

using namespace cogmac;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("cogmac_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
  int code;
  std::string out, err;
};

Run invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

corpus::CorpusSpec tiny_spec() {
  corpus::CorpusSpec s;
  s.node_counts = {2, 8};
  s.ipi_grid_s = {1.0, 0.0625};
  s.per_point_duration_s = 60;
  return s;
}

features::Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  return features::read_dataset_csv(in);
}

}  // namespace

TEST_CASE("default corpus plan has 70 points with distinct seeds per split") {
  const corpus::CorpusSpec spec;
  const auto train = corpus::plan(spec, corpus::Split::Train);
  const auto test = corpus::plan(spec, corpus::Split::Test);
  REQUIRE(train.size() == 5 * 7 * 2);
  REQUIRE(test.size() == train.size());
  std::set<std::uint64_t> seeds;
  std::set<std::string> files;
  for (std::size_t i = 0; i < train.size(); ++i) {
    seeds.insert(train[i].config.seed);
    seeds.insert(test[i].config.seed);
    files.insert(train[i].file);
    CHECK(train[i].config.duration_s == corpus::kDefaultDurationS);
    CHECK(train[i].config.num_transmitters == test[i].config.num_transmitters);
    CHECK(train[i].config.traffic_ipi_s == test[i].config.traffic_ipi_s);
  }
  CHECK(seeds.size() == 140);
  CHECK(files.size() == 70);
  // About 21 h of simulated time per split.
  CHECK(train.size() * corpus::kDefaultDurationS == doctest::Approx(21.0 * 3600));
}

TEST_CASE("corpus spec validation and JSON round trip") {
  corpus::CorpusSpec spec = tiny_spec();
  const auto back = corpus::spec_from_json(corpus::spec_to_json(spec));
  CHECK(back.node_counts == spec.node_counts);
  CHECK(back.ipi_grid_s == spec.ipi_grid_s);
  CHECK(back.interference_scenarios.size() == spec.interference_scenarios.size());
  CHECK(back.master_seed == spec.master_seed);

  spec.node_counts.clear();
  CHECK_THROWS_WITH_AS(corpus::validate(spec), doctest::Contains("empty grid"), ConfigError);
  CHECK_THROWS_AS(corpus::spec_from_json(R"({"node_count": [2]})"), SchemaError);
  CHECK_THROWS_AS(corpus::parse_split("validation"), ConfigError);
}

TEST_CASE("write_corpus is deterministic and the manifest round trips") {
  TempDir a("corpus_a"), b("corpus_b");
  const auto spec = tiny_spec();
  const auto ma = corpus::write_corpus(spec, corpus::Split::Train, a.path);
  corpus::write_corpus(spec, corpus::Split::Train, b.path);
  REQUIRE(ma.traces.size() == 8);
  CHECK(corpus::read_file(a.path / corpus::kManifestFile) == corpus::read_file(b.path / corpus::kManifestFile));
  for (const auto& e : ma.traces) {
    CHECK(corpus::read_file(a.path / e.file) == corpus::read_file(b.path / e.file));
  }
  for (const auto& entry : fs::directory_iterator(a.path)) {
    CHECK(entry.path().extension() != ".tmp");
  }

  const auto back = corpus::read_manifest(a.path);
  CHECK(back.split == corpus::Split::Train);
  REQUIRE(back.traces.size() == ma.traces.size());
  for (std::size_t i = 0; i < back.traces.size(); ++i) {
    CHECK(back.traces[i].file == ma.traces[i].file);
    CHECK(back.traces[i].config.seed == ma.traces[i].config.seed);
  }

  // 60 s traces at 30 s windows: two rows per trace.
  const auto sets = corpus::build_datasets(a.path, back, {30.0, 60.0});
  CHECK(sets[0].size() == 16);
  CHECK(sets[1].size() == 8);
}

TEST_CASE("manifest rejects path traversal and unknown schema versions") {
  corpus::Manifest m{corpus::Split::Test, tiny_spec(), corpus::plan(tiny_spec(), corpus::Split::Test)};
  auto doc = nlohmann::json::parse(corpus::manifest_to_json(m));
  auto bad = doc;
  bad["traces"][0]["file"] = "../escape.csv";
  CHECK_THROWS_AS(corpus::manifest_from_json(bad.dump()), SchemaError);
  bad = doc;
  bad["schema_version"] = "2";
  CHECK_THROWS_AS(corpus::manifest_from_json(bad.dump()), SchemaError);
  CHECK(corpus::manifest_from_json(doc.dump()).traces.size() == 8);
}

TEST_CASE("cli usage errors exit 2") {
  CHECK(invoke({}).code == cli::kExitUsage);
  CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
  CHECK(invoke({"--help"}).code == cli::kExitOk);
  CHECK(invoke({"train", "--out", "x.json"}).code == cli::kExitUsage);
  CHECK(invoke({"--seed", "minus-one", "corpus", "--out", "x"}).code == cli::kExitUsage);

  TempDir t("cli_usage");
  std::ofstream(t / "empty.json") << R"({"node_counts": []})";
  const Run r = invoke({"corpus", "--spec", t / "empty.json", "--out", t / "c"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("empty grid") != std::string::npos);

  std::ofstream(t / "typo.json") << R"({"nodes": [2]})";
  CHECK(invoke({"corpus", "--spec", t / "typo.json", "--out", t / "c"}).code == cli::kExitUsage);
  CHECK(invoke({"loop", "--model", t / "typo.json", "--data", t / "typo.json", "--out", t / "l.csv", "--up", "0.1",
             "--down", "0.2"})
            .code == cli::kExitUsage);
}

TEST_CASE("cli runtime errors exit 1") {
  TempDir t("cli_runtime");
  std::ofstream(t / "broken.csv") << "d,ipi\n1,2\n";
  std::ofstream(t / "model.json") << "{}";
  const Run r = invoke({"train", "--data", t / "broken.csv", "--out", t / "m.json"});
  CHECK(r.code == cli::kExitRuntime);
  CHECK_FALSE(r.err.empty());
  CHECK(invoke({"evaluate", "--model", t / "model.json", "--data", t / "broken.csv", "--out", t / "p.csv"}).code ==
        cli::kExitRuntime);
}

TEST_CASE("cli pipeline on a tiny corpus") {
  TempDir t("cli_pipeline");
  std::ofstream(t / "spec.json") << corpus::spec_to_json(tiny_spec());

  REQUIRE(invoke({"--quiet", "corpus", "--spec", t / "spec.json", "--out", t / "c"}).code == 0);
  REQUIRE(fs::exists(t.path / "c" / "train" / corpus::kManifestFile));
  REQUIRE(fs::exists(t.path / "c" / "test" / corpus::kManifestFile));
  CHECK(corpus::read_manifest(t.path / "c" / "test").split == corpus::Split::Test);

  // Rerunning with the same seed reproduces the manifest; --seed overrides the spec seed.
  const std::string manifest = corpus::read_file(t.path / "c" / "train" / corpus::kManifestFile);
  REQUIRE(invoke({"--quiet", "corpus", "--spec", t / "spec.json", "--out", t / "c2", "--split", "train"}).code == 0);
  CHECK(corpus::read_file(t.path / "c2" / "train" / corpus::kManifestFile) == manifest);
  REQUIRE(invoke({"corpus", "--seed", "7", "--spec", t / "spec.json", "--out", t / "c3", "--split", "train", "--quiet"})
              .code == 0);
  CHECK(corpus::read_manifest(t.path / "c3" / "train").spec.master_seed == 7);

  const Run ex = invoke({"extract", "--input", t / "c", "--interval", "30", "--out", t / "train.csv"});
  REQUIRE(ex.code == 0);
  CHECK(read_csv(t / "train.csv").size() == 8 * 60 / 30);
  REQUIRE(invoke({"extract", "--input", t / "c", "--split", "test", "--out", t / "test.csv", "--quiet"}).code == 0);

  // A single trace needs its config.
  const auto entry = corpus::read_manifest(t.path / "c" / "train").traces.front();
  std::ofstream(t / "one.json") << sim::config_to_json(entry.config);
  const std::string trace = (t.path / "c" / "train" / entry.file).string();
  CHECK(invoke({"extract", "--input", trace, "--out", t / "one.csv"}).code == cli::kExitUsage);
  REQUIRE(invoke({"extract", "--input", trace, "--config", t / "one.json", "--out", t / "one.csv"}).code == 0);
  CHECK(read_csv(t / "one.csv").size() == 2);

  REQUIRE(invoke({"--quiet", "train", "--data", t / "train.csv", "--model", "mlp", "--iterations", "50", "--out",
               t / "mlp.json"})
              .code == 0);
  const auto mlp = std::get<models::MlpModel>(models::load_model(t.path / "mlp.json"));
  CHECK(mlp.hyperparams.hidden_layers == 10);
  CHECK(mlp.hyperparams.units_per_hidden == 10);
  CHECK(mlp.hyperparams.learning_rate == 0.1);
  CHECK(mlp.hyperparams.iterations == 50);
  CHECK(mlp.hyperparams.init_seed == 42);

  REQUIRE(invoke({"--quiet", "train", "--data", t / "train.csv", "--model", "tree", "--min-leaf", "1", "--out",
               t / "tree.json", "--cv", "4", "--cv-out", t / "cv.csv"})
              .code == 0);
  CHECK(corpus::read_file(t.path / "cv.csv").rfind("model_kind,hyperparams,split,k,", 0) == 0);

  const Run ev = invoke({"evaluate", "--model", t / "tree.json", "--data", t / "test.csv", "--out", t / "pred.csv",
                      "--summary", t / "summary.json"});
  REQUIRE(ev.code == 0);
  CHECK(ev.out.find("overall_rmse") != std::string::npos);
  const auto summary = nlohmann::json::parse(corpus::read_file(t.path / "summary.json"));
  CHECK(summary.at("windows") == 16);

  REQUIRE(invoke({"--quiet", "sweep", "--corpus", t / "c", "--intervals", "30,60", "--models", "linear", "--folds", "4",
               "--out", t / "sweep/sweep.csv"})
              .code == 0);
  CHECK(fs::exists(t.path / "sweep" / "sweep_linear.dat"));
  CHECK(invoke({"sweep", "--corpus", t / "c", "--intervals", "30,-1", "--out", t / "s.csv"}).code == cli::kExitUsage);

  REQUIRE(invoke({"--quiet", "loop", "--model", t / "tree.json", "--data", t / "test.csv", "--out", t / "log1.csv"})
              .code == 0);
  REQUIRE(invoke({"--quiet", "loop", "--model", t / "tree.json", "--data", t / "test.csv", "--out", t / "log2.csv",
               "--audit", t / "audit.csv"})
              .code == 0);
  CHECK(corpus::read_file(t.path / "log1.csv") == corpus::read_file(t.path / "log2.csv"));
  CHECK(corpus::read_file(t.path / "log1.csv").rfind("window_start_s,predicted_plr,action,target,current_protocol\n",
                                                     0) == 0);

  // A 60 s feature file cannot drive a model trained on 30 s windows.
  REQUIRE(invoke({"--quiet", "extract", "--input", t / "c", "--split", "test", "--interval", "60", "--out",
               t / "test60.csv"})
              .code == 0);
  CHECK(invoke({"loop", "--model", t / "tree.json", "--data", t / "test60.csv", "--interval", "60", "--out",
             t / "bad.csv"})
            .code != 0);
}
