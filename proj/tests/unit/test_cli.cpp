#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ldlf/cli.hpp"
#include "ldlf/data.hpp"
#include "ldlf/serialization.hpp"
#include "ldlf/synth.hpp"
#include "ldlf/training.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;
using namespace ldlf;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run ldlf_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("ldlf_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string write_random_dataset(const TempDir& dir, std::size_t N, std::size_t C,
                                 std::uint64_t seed, const std::string& name = "data.ldl") {
  std::mt19937_64 rng(seed);
  save_dataset(Dataset(oracle::random_samples(rng, N, 3, C), 3, C), dir / name,
               format_from_extension(name));
  return dir / name;
}

const std::vector<std::string> kSmall = {"--trees", "2", "--tree-depth", "3", "--output-units", "4",
                                         "--batch-size", "8", "--buffer-batches", "4",
                                         "--max-iterations", "20"};

std::vector<std::string> with_small(std::vector<std::string> args) {
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  return args;
}

}  // namespace

TEST_CASE("cli train and predict") {
  TempDir dir;
  const auto data = write_random_dataset(dir, 40, 3, 1);

  SUBCASE("train writes a loadable model and a log") {
    const auto r = ldlf_cli(with_small({"train", "--dataset", data, "--out", dir / "m.json",
                                        "--log", dir / "log.tsv", "--log-every", "5"}));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto forest = load_forest(dir / "m.json");
    CHECK(forest.trees.size() == 2);
    CHECK(forest.label_count == 3);
    const auto log = slurp(dir / "log.tsv");
    CHECK(log.rfind("iteration\tloss\tseconds\n", 0) == 0);

    const auto p = ldlf_cli({"predict", "--model", dir / "m.json", "--dataset", data});
    REQUIRE(p.code == 0);
    std::istringstream lines(p.out);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
      std::istringstream cells(line);
      double a, b, c;
      std::size_t argmax;
      REQUIRE(static_cast<bool>(cells >> a >> b >> c >> argmax));
      CHECK(a + b + c == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(argmax < 3);
      ++rows;
    }
    CHECK(rows == 40);
  }
  SUBCASE("output-unit constraint is a configuration error") {
    const auto r = ldlf_cli({"train", "--dataset", data, "--out", dir / "m.json",
                             "--tree-depth", "8", "--output-units", "64"});
    CHECK(r.code == 2);
    CHECK(r.err.find("64") != std::string::npos);
    CHECK(r.err.find("127") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "m.json"));
  }
  SUBCASE("zero iterations then eval gives ln C") {
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < 12; ++i) {
      samples.push_back({{double(i), 0.5, -1.0}, LabelDistribution::one_hot(3, i % 3)});
    }
    save_dataset(Dataset(samples, 3, 3), dir / "hot.ldl", DatasetFormat::kLdl);
    REQUIRE(ldlf_cli({"train", "--dataset", dir / "hot.ldl", "--out", dir / "m0.json",
                      "--max-iterations", "0"}).code == 0);
    const auto r = ldlf_cli({"eval", "--model", dir / "m0.json", "--dataset", dir / "hot.ldl",
                             "--out", dir / "report.json"});
    REQUIRE(r.code == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report["measures"]["kl"]["mean"].get<double>() ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }
  SUBCASE("one buffer of training does not exceed the uniform loss") {
    REQUIRE(ldlf_cli({"train", "--dataset", data, "--out", dir / "m1.json", "--trees", "2",
                      "--tree-depth", "3", "--output-units", "4", "--batch-size", "40",
                      "--buffer-batches", "1", "--max-iterations", "1", "--learning-rate",
                      "1e-9"}).code == 0);
    const auto forest = load_forest(dir / "m1.json");
    const auto dataset = load_dataset(data, DatasetFormat::kLdl);
    CHECK(loss(forest, dataset.samples()) <= std::log(3.0) + 1e-9);
  }
  SUBCASE("config file sits between defaults and flags") {
    {
      std::ofstream cfg(dir / "cfg.json");
      cfg << R"({"trees": 3, "tree-depth": 3, "output-units": 5, "max-iterations": 4,
                 "bias": false})";
    }
    REQUIRE(ldlf_cli({"train", "--dataset", data, "--out", dir / "c.json", "--config",
                      dir / "cfg.json", "--trees", "4"}).code == 0);
    const auto forest = load_forest(dir / "c.json");
    CHECK(forest.trees.size() == 4);
    CHECK(forest.depth() == 3);
    CHECK(forest.feature_fn.output_dim() == 5);
    CHECK_FALSE(forest.feature_fn.bias());

    {
      std::ofstream cfg(dir / "bad.json");
      cfg << R"({"trees": "many"})";
    }
    CHECK(ldlf_cli({"train", "--dataset", data, "--out", dir / "c.json", "--config",
                    dir / "bad.json"}).code == 2);
  }
  SUBCASE("csv datasets") {
    const auto csv = write_random_dataset(dir, 20, 4, 2, "data.csv");
    CHECK(ldlf_cli(with_small({"train", "--dataset", csv, "--out", dir / "csv.json"})).code == 0);
  }
}

TEST_CASE("cli error codes") {
  TempDir dir;
  SUBCASE("malformed data") {
    {
      std::ofstream f(dir / "bad.ldl");
      f << "2 2\n0.1 0.2 | 0.5 0.6\n";
    }
    const auto r = ldlf_cli({"train", "--dataset", dir / "bad.ldl", "--out", dir / "m.json"});
    CHECK(r.code == 3);
    CHECK(r.err.find("row 1") != std::string::npos);
  }
  SUBCASE("missing files") {
    CHECK(ldlf_cli({"train", "--dataset", dir / "none.ldl", "--out", dir / "m.json"}).code == 5);
    const auto data = write_random_dataset(dir, 10, 2, 3);
    CHECK(ldlf_cli({"eval", "--model", dir / "none.json", "--dataset", data}).code == 5);
  }
  SUBCASE("usage errors") {
    CHECK(ldlf_cli({"frobnicate"}).code == 2);
    CHECK(ldlf_cli({"train"}).code == 2);
    CHECK(ldlf_cli({"--help"}).code == 0);
  }
  SUBCASE("mismatched model and data") {
    const auto data = write_random_dataset(dir, 10, 2, 3);
    const auto other = write_random_dataset(dir, 10, 3, 4, "other.ldl");
    REQUIRE(ldlf_cli(with_small({"train", "--dataset", data, "--out", dir / "m.json"})).code == 0);
    CHECK(ldlf_cli({"eval", "--model", dir / "m.json", "--dataset", other}).code != 0);
  }
}

TEST_CASE("cli cross-validation and sweeps") {
  TempDir dir;
  const auto data = write_random_dataset(dir, 30, 3, 5);

  SUBCASE("cv is byte-identical across runs") {
    REQUIRE(ldlf_cli(with_small({"cv", "--dataset", data, "--folds", "3", "--seed", "7", "--out",
                                 dir / "a.json"})).code == 0);
    REQUIRE(ldlf_cli(with_small({"cv", "--dataset", data, "--folds", "3", "--seed", "7", "--out",
                                 dir / "b.json"})).code == 0);
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    const auto report = nlohmann::json::parse(slurp(dir / "a.json"));
    CHECK(report["measures"]["kl"]["values"].size() == 3);
  }
  SUBCASE("more folds than samples") {
    CHECK(ldlf_cli(with_small({"cv", "--dataset", data, "--folds", "31"})).code == 2);
  }
  SUBCASE("sweep over tree counts") {
    const auto r = ldlf_cli(with_small({"sweep", "--dataset", data, "--folds", "2", "--axis",
                                        "tree_count", "--values", "1,2,3", "--out",
                                        dir / "s.tsv"}));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    std::istringstream lines(slurp(dir / "s.tsv"));
    std::string line;
    std::size_t rows = 0;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 4);  // header plus one row per value
  }
  SUBCASE("sweep over depths skips invalid values") {
    const auto r = ldlf_cli(with_small({"sweep", "--dataset", data, "--folds", "2", "--axis",
                                        "tree_depth", "--values", "1,3"}));
    CHECK(r.code == 0);
    CHECK_FALSE(r.err.empty());
  }
  SUBCASE("sweep without values") {
    CHECK(ldlf_cli(with_small({"sweep", "--dataset", data, "--axis", "tree_count"})).code == 2);
  }
}

TEST_CASE("cli synth") {
  TempDir dir;
  SUBCASE("deterministic output with a ground-truth sidecar") {
    REQUIRE(ldlf_cli({"synth", "--out", dir / "a.ldl", "--samples", "50", "--seed", "3"}).code == 0);
    REQUIRE(ldlf_cli({"synth", "--out", dir / "b.ldl", "--samples", "50", "--seed", "3"}).code == 0);
    CHECK(slurp(dir / "a.ldl") == slurp(dir / "b.ldl"));
    CHECK(slurp(dir / "a.ldl.truth.json") == slurp(dir / "b.ldl.truth.json"));
    const auto dataset = load_dataset(dir / "a.ldl", DatasetFormat::kLdl);
    CHECK(dataset.size() == 50);
    CHECK(dataset.feature_dim() == 10);
    CHECK(dataset.label_count() == 8);
  }
  SUBCASE("mixture targets are bimodal") {
    REQUIRE(ldlf_cli({"synth", "--out", dir / "m.ldl", "--samples", "200", "--mode",
                      "two-component-mixture"}).code == 0);
    const auto dataset = load_dataset(dir / "m.ldl", DatasetFormat::kLdl);
    for (const auto& s : dataset.samples()) {
      CHECK(local_maxima(s.target.probs()).size() == 2);
    }
  }
  SUBCASE("noise-free targets are the canonical distributions") {
    REQUIRE(ldlf_cli({"synth", "--out", dir / "c.csv", "--samples", "60", "--noise", "0",
                      "--mode", "gaussian-unimodal", "--truth", dir / "truth.json"}).code == 0);
    const auto truth = nlohmann::json::parse(slurp(dir / "truth.json"));
    const auto dataset = load_dataset(dir / "c.csv", DatasetFormat::kCsv);
    std::size_t matched = 0;
    for (const auto& s : dataset.samples()) {
      for (const auto& comp : truth["components"]) {
        const auto canonical = comp["canonical"].get<std::vector<double>>();
        bool same = true;
        for (std::size_t c = 0; c < canonical.size(); ++c) {
          same = same && std::abs(canonical[c] - s.target[c]) < 1e-15;
        }
        if (same) {
          ++matched;
          break;
        }
      }
    }
    CHECK(matched == dataset.size());
  }
  SUBCASE("unknown mode") {
    CHECK(ldlf_cli({"synth", "--out", dir / "x.ldl", "--mode", "trimodal"}).code == 2);
  }
}
