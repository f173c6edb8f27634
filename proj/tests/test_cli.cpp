#include <catch2/catch.hpp>

#include <cstdlib>
#include <sys/wait.h>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mmsl/io.hpp"
#include "mmsl/synth.hpp"
#include "test_fixtures.hpp"

namespace fs = std::filesystem;
using namespace mmsl;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream text;
  text << in.rdbuf();  // empty files leave text untouched
  return text.str();
}

/// Run the CLI through the shell, capturing stdout and stderr together
/// so error text is visible to the assertions.
CommandResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  const std::string command = std::string(MMSL_CLI_PATH) + " " + args + " > " +
                              out_file.string() + " 2> " + err_file.string();
  const int raw = std::system(command.c_str());
  CommandResult result;
  result.exit_code = WEXITSTATUS(raw);
  result.output = slurp(out_file) + slurp(err_file);
  return result;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("mmsl-cli-test-" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_speech_law(const fs::path& dir) {
  LawDocument doc;
  doc.parameters = fixtures::speech_law();
  const fs::path path = dir / "speech.law";
  save_law(doc, path.string());
  return path;
}

fs::path write_pair_law(const fs::path& dir, double c) {
  LawDocument doc;
  auto pair = fixtures::constructed_pair();
  pair.C = c;
  doc.parameters = pair;
  const fs::path path = dir / ("pair-" + std::to_string(c) + ".law");
  save_law(doc, path.string());
  return path;
}

}  // namespace

TEST_CASE("cli evaluates a unimodal law document") {
  TempDir tmp;
  const auto law = write_speech_law(tmp.path);
  const auto result = run_cli("eval --law " + law.string() + " --n 1e9 --d 1e11", tmp.path);
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("3.7403455") != std::string::npos);
}

TEST_CASE("cli accepts suffixed quantities") {
  TempDir tmp;
  const auto law = write_speech_law(tmp.path);
  const auto plain = run_cli("eval --law " + law.string() + " --n 1e9 --d 1e11", tmp.path);
  const auto suffixed =
      run_cli("eval --law " + law.string() + " --n 1B --d 100B", tmp.path);
  CHECK(suffixed.exit_code == 0);
  CHECK(suffixed.output == plain.output);
}

TEST_CASE("cli exit codes distinguish usage, data and numeric failures") {
  TempDir tmp;
  SECTION("unknown subcommand is a usage error") {
    CHECK(run_cli("frobnicate", tmp.path).exit_code == 1);
  }
  SECTION("missing required flag is a usage error") {
    CHECK(run_cli("eval --n 1e9", tmp.path).exit_code == 1);
  }
  SECTION("invalid input file is a data error") {
    const fs::path bad = tmp.path / "bad.json";
    std::ofstream(bad) << "{ not json";
    const auto result = run_cli("fit-uni " + bad.string(), tmp.path);
    CHECK(result.exit_code == 2);
  }
  SECTION("registry that violates an invariant is a data error") {
    const fs::path bad = tmp.path / "registry.json";
    std::ofstream(bad) << R"([{"run_id":"r1","labels":["speech"],"n_params":0,)"
                       << R"("tokens_per_dataset":{"speech":5},"final_loss":3.0,)"
                       << R"("batch_size":1000,"objective":"causal"}])";
    CHECK(run_cli("fit-uni " + bad.string(), tmp.path).exit_code == 2);
  }
  SECTION("no barrier is a numeric failure") {
    const auto law = write_pair_law(tmp.path, 0.0);
    const auto result = run_cli("optimal --law " + law.string(), tmp.path);
    CHECK(result.exit_code == 3);
    CHECK(result.output.find("no barrier") != std::string::npos);
  }
}

TEST_CASE("cli help lists every subcommand") {
  TempDir tmp;
  const auto result = run_cli("--help", tmp.path);
  CHECK(result.exit_code == 0);
  for (const char* name :
       {"fit-uni", "fit-bi", "eval", "membership", "classify", "barrier", "optimal",
        "ratio", "flatness", "spikes", "batch", "restarts", "correlate", "synth-runs",
        "synth-curve"})
    CHECK(result.output.find(name) != std::string::npos);
}

TEST_CASE("cli membership and classify output") {
  TempDir tmp;
  const auto member =
      run_cli("membership --losses-i 36,36 --losses-j 2,4,6 --sigma 3", tmp.path);
  CHECK(member.exit_code == 0);
  CHECK(member.output.find("member: true") != std::string::npos);

  const auto law = write_pair_law(tmp.path, 0.5);
  const auto verdict =
      run_cli("classify --law " + law.string() + " --n 4.72e9 --d 4.096e12", tmp.path);
  CHECK(verdict.exit_code == 0);
  CHECK(verdict.output.find("regime: synergy") != std::string::npos);
}

TEST_CASE("cli curve analysis commands run end to end") {
  TempDir tmp;
  const auto law = write_speech_law(tmp.path);
  const fs::path curve = tmp.path / "curve.jsonl";
  const auto synth = run_cli("synth-curve --law " + law.string() +
                                 " --n 1e9 --steps 400 --batch-tokens 1M"
                                 " --flat 100:199 --spike 50 --spike 300 --out " +
                                 curve.string(),
                             tmp.path);
  REQUIRE(synth.exit_code == 0);

  const auto flat = run_cli("flatness --curve " + curve.string() +
                                " --modality speech --window 5 --lookahead 20",
                            tmp.path);
  CHECK(flat.exit_code == 0);
  CHECK(flat.output.find("flat_fraction:") != std::string::npos);

  const auto spikes = run_cli("spikes --curve " + curve.string() + " --window 51", tmp.path);
  CHECK(spikes.exit_code == 0);
  CHECK(spikes.output.find("count: 2") != std::string::npos);

  const auto restarts = run_cli("restarts --curve " + curve.string(), tmp.path);
  CHECK(restarts.exit_code == 0);
  CHECK(restarts.output.find("events: 0") != std::string::npos);
}

TEST_CASE("cli barrier, ratio and optimal agree with each other") {
  TempDir tmp;
  const auto law = write_pair_law(tmp.path, 0.5);
  const auto barrier = run_cli("barrier --law " + law.string() +
                                   " --d-min 5e11 --d-max 5e13 --points 16",
                               tmp.path);
  CHECK(barrier.exit_code == 0);
  CHECK(barrier.output.rfind("n,d_total", 0) == 0);

  const auto optimal = run_cli("optimal --law " + law.string() + " --save-solution " +
                                   (tmp.path / "solution.json").string(),
                               tmp.path);
  CHECK(optimal.exit_code == 0);
  CHECK(optimal.output.find("optimal_flops:") != std::string::npos);
  const auto solution = json::parse(slurp(tmp.path / "solution.json"));
  CHECK(solution["kind"] == "barrier_solution");
  CHECK(solution["optimal_n"].get<double>() == Approx(6.479e8).epsilon(0.01));

  const auto ratio = run_cli("ratio --law " + law.string() +
                                 " --n 1e9 --d-min 1e11 --d-max 1e13 --points 8",
                             tmp.path);
  CHECK(ratio.exit_code == 0);
  CHECK(ratio.output.rfind("d_total,ratio", 0) == 0);
}

TEST_CASE("cli batch sweep") {
  TempDir tmp;
  std::vector<RunRecord> sweep;
  for (std::uint64_t batch : {1000000ULL, 2000000ULL, 4000000ULL}) {
    RunRecord r;
    r.run_id = "b" + std::to_string(batch);
    r.labels = {"speech"};
    r.n_params = 1000000000;
    r.tokens_per_dataset["speech"] = 5000000000ULL;
    r.final_loss = batch == 2000000ULL ? 3.4 : 3.5;
    r.batch_size = batch;
    sweep.push_back(r);
  }
  const fs::path path = tmp.path / "sweep.json";
  save_registry(sweep, path.string());
  const auto result = run_cli("batch " + path.string(), tmp.path);
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("optimal_batch: 2000000") != std::string::npos);
}

TEST_CASE("cli correlate consumes a manifest and writes scatter files") {
  TempDir tmp;
  json manifest = json::array();
  for (int index = 0; index < 3; ++index) {
    const std::string name = "m" + std::to_string(index);
    auto uni = fixtures::speech_law();
    uni.modality = name;
    BimodalLaw pair{name,  "text", uni,   fixtures::text_law(),
                    0.4,   100.0,  200.0, 0.2 + 0.05 * index,
                    0.22 + 0.03 * index};
    LawDocument doc;
    doc.parameters = pair;
    const fs::path law_path = tmp.path / (name + ".law");
    save_law(doc, law_path.string());

    const std::vector<std::pair<std::int64_t, std::int64_t>> flats = {
        {100, 200 + 100 * index}};
    std::vector<std::int64_t> spikes;
    for (int k = 0; k <= index; ++k) spikes.push_back(600 + 50 * k);
    const auto curve = generate_curve(uni, 1e9, 1000, 1000000, flats, spikes);
    const fs::path curve_path = tmp.path / (name + ".jsonl");
    save_curve(curve, curve_path.string());

    auto sweep = [&](std::vector<std::string> labels, std::uint64_t best,
                     const std::string& tag) {
      std::vector<RunRecord> records;
      for (std::uint64_t batch : {1000000ULL, 2000000ULL, 4000000ULL}) {
        RunRecord r;
        r.run_id = name + tag + std::to_string(batch);
        r.labels = labels;
        r.n_params = 1000000000;
        for (const auto& l : labels) r.tokens_per_dataset[l] = 5000000000ULL;
        r.batch_size = batch;
        r.final_loss = batch == best ? 3.0 : 3.5;
        records.push_back(r);
      }
      const fs::path path = tmp.path / (name + tag + ".json");
      save_registry(records, path.string());
      return path.string();
    };

    json entry;
    entry["pair"] = {name, "text"};
    entry["law"] = law_path.string();
    entry["curve"] = curve_path.string();
    entry["n_params"] = "1B";
    entry["batch_pair"] = sweep({name, "text"}, (1ULL << index) * 1000000ULL, "-pair-");
    entry["batch_i"] = sweep({name}, 2000000ULL, "-i-");
    entry["batch_j"] = sweep({"text"}, 2000000ULL, "-j-");
    manifest.push_back(entry);
  }
  const fs::path manifest_path = tmp.path / "manifest.json";
  std::ofstream(manifest_path) << manifest.dump(2);

  const auto report = run_cli("correlate --manifest " + manifest_path.string() +
                                  " --window 5 --lookahead 20",
                              tmp.path);
  CHECK(report.exit_code == 0);
  CHECK(report.output.find("alpha_ij vs flat_fraction") != std::string::npos);
  CHECK(report.output.find("beta_ij vs spike_count") != std::string::npos);

  const fs::path scatter_dir = tmp.path / "scatter";
  const auto csv = run_cli("correlate --manifest " + manifest_path.string() +
                               " --window 5 --lookahead 20 --format csv --out " +
                               scatter_dir.string(),
                           tmp.path);
  CHECK(csv.exit_code == 0);
  CHECK(fs::exists(scatter_dir / "alpha_ij_vs_flat_fraction.csv"));
  CHECK(fs::exists(scatter_dir / "beta_ij_vs_spike_count.csv"));
  const std::string scatter = slurp(scatter_dir / "alpha_ij_vs_flat_fraction.csv");
  CHECK(scatter.rfind("alpha_ij,flat_fraction", 0) == 0);
}

TEST_CASE("cli fit honors a config file with flag overrides") {
  TempDir tmp;
  LawDocument doc;
  doc.parameters = fixtures::text_law();
  const fs::path law = tmp.path / "text.law";
  save_law(doc, law.string());
  const fs::path registry = tmp.path / "runs.json";
  REQUIRE(run_cli("synth-runs --law " + law.string() + " --out " + registry.string(),
                  tmp.path)
              .exit_code == 0);

  const fs::path config = tmp.path / "fit.json";
  std::ofstream(config) << R"({"max_iterations": 40, "huber_delta": 0.05,)"
                        << R"( "init_grid": {"log_a": [0, 6], "log_b": [0, 6],)"
                        << R"( "log_ec": [0, 1], "alpha": [0.1, 0.3], "beta": [0.1, 0.3]}})";
  const auto fitted = run_cli("fit-uni " + registry.string() + " --config " +
                                  config.string() + " --max-iterations 200",
                              tmp.path);
  CHECK(fitted.exit_code == 0);
  CHECK(fitted.output.find("\"kind\": \"unimodal\"") != std::string::npos);

  std::ofstream(config) << R"({"huber_delta": -1})";
  CHECK(run_cli("fit-uni " + registry.string() + " --config " + config.string(),
                tmp.path)
            .exit_code == 2);
}

TEST_CASE("piped synth and fit are byte-deterministic") {
  TempDir tmp;
  LawDocument doc;
  doc.parameters = fixtures::text_law();
  const fs::path law = tmp.path / "text.law";
  save_law(doc, law.string());

  const std::string pipeline = "synth-runs --law " + law.string() +
                               " --seed 7 --noise-sigma 0.01 | " + MMSL_CLI_PATH +
                               " fit-uni - --max-iterations 60";
  const auto first = run_cli(pipeline, tmp.path);
  REQUIRE(first.exit_code == 0);
  const auto second = run_cli(pipeline, tmp.path);
  CHECK(first.output == second.output);
  CHECK(first.output.find("\"kind\": \"unimodal\"") != std::string::npos);
}
