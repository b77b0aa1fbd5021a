#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "mcnet/cli/cli.hpp"
#include "mcnet/data/cohort.hpp"

using namespace mcnet;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct Workdir {
  fs::path root;
  Workdir() {
    static int n = 0;
    root = fs::temp_directory_path() / ("mcnet_cli_" + std::to_string(::getpid()) + "_" + std::to_string(++n));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workdir() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  std::string operator/(const std::string& name) const { return (root / name).string(); }
};

const char* kTinyConfig =
    "n_subjects = 120\n"
    "dim = 4\n"
    "severity_features = 2\n"
    "hidden = 8\n"
    "layers = 2\n"
    "heads = 2\n"
    "temporal_heads = 2\n"
    "disc_hidden1 = 8\n"
    "disc_hidden2 = 4\n"
    "epochs_a = 2\n"
    "epochs_b = 2\n"
    "epochs_c = 2\n"
    "epochs_retrain = 2\n";

// One generated cohort and trained checkpoint shared by the command tests.
struct Trained {
  Workdir dir;
  std::string config, cohort, ckpt;
  Trained() {
    config = dir / "tiny.txt";
    std::ofstream(config) << kTinyConfig;
    REQUIRE(cli({"generate", "--config", config, "--seed", "5", "--out", dir / "gen"}).code == 0);
    cohort = dir / "gen/cohort.csv";
    const Run r = cli({"train", "--config", config, "--seed", "5", "--cohort", cohort, "--out", dir / "model"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    ckpt = dir / "model/model.ckpt";
  }
};

const Trained& trained() {
  static Trained t;
  return t;
}

}  // namespace

TEST_CASE("generate is byte-identical under a fixed seed") {
  Workdir w;
  const std::string cfg = w / "c.txt";
  std::ofstream(cfg) << "n_subjects = 50\ndim = 6\n";
  REQUIRE(cli({"generate", "--config", cfg, "--seed", "7", "--out", w / "a"}).code == 0);
  REQUIRE(cli({"generate", "--config", cfg, "--seed", "7", "--out", w / "b"}).code == 0);
  REQUIRE(cli({"generate", "--config", cfg, "--seed", "8", "--out", w / "c"}).code == 0);
  CHECK(slurp(w / "a/cohort.csv") == slurp(w / "b/cohort.csv"));
  CHECK(slurp(w / "a/truth.txt") == slurp(w / "b/truth.txt"));
  CHECK(slurp(w / "a/cohort.csv") != slurp(w / "c/cohort.csv"));
  CHECK(load_cohort(w / "a/cohort.csv").size() == 50);
}

TEST_CASE("train writes checkpoint, log and resolved config") {
  const auto& t = trained();
  const fs::path dir = t.dir.root / "model";
  CHECK(fs::exists(dir / "model.ckpt"));
  CHECK(fs::exists(dir / "config.txt"));
  const std::string log = slurp(dir / "train_log.jsonl");
  CHECK(std::count(log.begin(), log.end(), '\n') == 8);  // A, B, C and the retrain pass
  const std::string cfg = slurp(dir / "config.txt");
  CHECK(cfg.find("hidden=8") != std::string::npos);
  CHECK(cfg.find("seed=5") != std::string::npos);
}

TEST_CASE("evaluate --bl-only ignores every later visit") {
  const auto& t = trained();
  Cohort poisoned = load_cohort(t.cohort);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (auto& r : poisoned.subjects)
    for (auto s : kModalities)
      for (int v = 1; v < poisoned.visits; ++v) r.features(s).row(v).setConstant(nan);
  const std::string pcsv = t.dir / "poisoned.csv";
  save_cohort(pcsv, poisoned);

  const Run a = cli({"evaluate", "--bl-only", "--cohort", t.cohort, "--checkpoint", t.ckpt, "--out", t.dir / "ev_a"});
  const Run b = cli({"evaluate", "--bl-only", "--cohort", pcsv, "--checkpoint", t.ckpt, "--out", t.dir / "ev_b"});
  INFO(a.err << b.err);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(t.dir / "ev_a/report.jsonl") == slurp(t.dir / "ev_b/report.jsonl"));
  CHECK(a.out == b.out);

  const Run full = cli({"evaluate", "--cohort", t.cohort, "--checkpoint", t.ckpt, "--out", t.dir / "ev_c"});
  REQUIRE(full.code == 0);
  CHECK(slurp(t.dir / "ev_c/report.jsonl").find("\"variant\":\"full\"") != std::string::npos);
  const Run mri = cli({"evaluate", "--mri-only", "--cohort", t.cohort, "--checkpoint", t.ckpt, "--out", t.dir / "ev_d"});
  REQUIRE(mri.code == 0);
  CHECK(slurp(t.dir / "ev_d/report.jsonl").find("\"variant\":\"mri-only\"") != std::string::npos);
}

TEST_CASE("impute keeps observed values and tags provenance") {
  const auto& t = trained();
  const Run r = cli({"impute", "--cohort", t.cohort, "--checkpoint", t.ckpt, "--out", t.dir / "imp"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const std::string text = slurp(t.dir / "imp/imputed.csv");
  CHECK(text.find("provenance") != std::string::npos);
  CHECK(text.find("imputed-") != std::string::npos);
  const Cohort raw = load_cohort(t.cohort);
  const Cohort imp = load_cohort(t.dir / "imp/imputed.csv");
  REQUIRE(imp.size() == raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    for (auto s : kModalities)
      for (int v = 0; v < raw.visits; ++v)
        if (raw.subjects[i].present(s, v))
          CHECK(imp.subjects[i].features(s).row(v).isApprox(raw.subjects[i].features(s).row(v), 1e-12));
}

TEST_CASE("attribute writes k rows per modality and visit") {
  const auto& t = trained();
  for (const char* head : {"longitudinal", "conversion"}) {
    const Run r = cli({"attribute", "-k", "3", "--head", head, "--cohort", t.cohort, "--checkpoint", t.ckpt, "--out",
                       t.dir / (std::string("att_") + head)});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const std::string text = slurp(t.dir.root / (std::string("att_") + head) / "attribution.txt");
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 * 5 * 3);
  }
  const Run clip = cli({"attribute", "-k", "9", "--cohort", t.cohort, "--checkpoint", t.ckpt, "--out", t.dir / "att_k"});
  REQUIRE(clip.code == 0);
  CHECK(clip.out.find("warning: ") != std::string::npos);
  const Run bad = cli({"attribute", "--head", "sideways", "--cohort", t.cohort, "--checkpoint", t.ckpt});
  CHECK(bad.code == 1);
  CHECK(bad.err.rfind("error: config_error: ", 0) == 0);
}

TEST_CASE("ablate reports the full model and each variant") {
  const auto& t = trained();
  const Run r = cli({"ablate", "--ablate", "CB,DI", "--config", t.config, "--seed", "5", "--cohort", t.cohort, "--out",
                     t.dir / "abl"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const std::string text = slurp(t.dir / "abl/ablation.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(text.rfind("{\"variant\":\"full\"", 0) == 0);
}

TEST_CASE("failures print one error line with a kind and exit status") {
  Workdir w;
  SUBCASE("missing cohort file") {
    const Run r = cli({"train", "--cohort", w / "nope.csv", "--out", w / "x"});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error: io_error: ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  }
  SUBCASE("unknown config key") {
    const std::string cfg = w / "bad.txt";
    std::ofstream(cfg) << "flux = 3\n";
    const Run r = cli({"generate", "--config", cfg, "--out", w / "x"});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error: config_error: ", 0) == 0);
  }
  SUBCASE("malformed cohort") {
    const std::string csv = w / "bad.csv";
    std::ofstream(csv) << "this,is,not,a,cohort\n1,2\n";
    const Run r = cli({"train", "--cohort", csv, "--out", w / "x"});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error: ", 0) == 0);
  }
  SUBCASE("usage errors exit 2") {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {}, {"frobnicate"}, {"train"}, {"evaluate", "--cohort", "x.csv"}, {"generate", "--seed", "abc"}}) {
      const Run r = cli(args);
      CHECK(r.code == 2);
      CHECK(r.err.rfind("error: usage: ", 0) == 0);
    }
  }
  SUBCASE("help exits 0") {
    const Run r = cli({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("generate") != std::string::npos);
  }
}
