#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wav/runner.hpp"

using namespace wav;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout, trailing newline stripped
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(WAV_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[512];
  while (fgets(buf, sizeof buf, p)) r.out += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  while (!r.out.empty() && r.out.back() == '\n') r.out.pop_back();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

bool is_number(const std::string& s) {
  if (s == "nan") return true;
  try {
    std::size_t used = 0;
    std::stod(s, &used);
    return used == s.size();
  } catch (...) {
    return false;
  }
}

// Drops the named column from every row.
std::vector<std::vector<std::string>> without(std::vector<std::vector<std::string>> rows, const std::string& col) {
  const auto& head = rows.front();
  const auto idx = static_cast<std::size_t>(std::find(head.begin(), head.end(), col) - head.begin());
  for (auto& r : rows)
    if (idx < r.size()) r.erase(r.begin() + static_cast<std::ptrdiff_t>(idx));
  return rows;
}

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("wav_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kSmallConfig = R"({
  "seed": 3,
  "source": {"task_transitions": 800, "random_transitions": 800},
  "split": {"seed_size": 60, "pool_size": 200, "test_size": 70, "video_size": 300},
  "world_model": {"epochs": 4},
  "idm": {"epochs": 8},
  "ensemble": {"members": 2},
  "explore": {"strategies": ["random", "wav_sparse"], "seeds": 5, "rounds": 3, "budget": 20,
              "checkpoint_every_round": false},
  "theory": {"trials": 10, "lemma_grid": [{"D": 2, "n": 10, "nu": 1}],
             "gap_specs": [{"d_s": 5, "d_a": 2, "d_z": 2, "sigma_s": 1, "sigma_a": 0.1, "lambda": 1}],
             "n_grid": [40, 60]},
  "tlcm": {"seed_size": 300, "oos_size": 300}
})";

}  // namespace

TEST_CASE("config parsing is strict and canonical") {
  const auto c = runner::parse_config(kSmallConfig);
  CHECK(c.seed == 3);
  CHECK(c.explore.strategies.size() == 2);
  const auto text = runner::to_json(c);
  CHECK(runner::to_json(runner::parse_config(text)) == text);
  CHECK(runner::run_id(c) == runner::run_id(runner::parse_config(text)));
  CHECK(runner::run_id(c).size() == 16);
  auto other = c;
  other.seed = 4;
  CHECK(runner::run_id(other) != runner::run_id(c));

  CHECK_THROWS_AS(runner::parse_config(R"({"explore": {"bogus": 1}})"), ConfigError);
  CHECK_THROWS_AS(runner::parse_config(R"({"explore": {"strategies": ["greedy"]}})"), ConfigError);
  CHECK_THROWS_AS(runner::parse_config(R"({"seed": "x"})"), ConfigError);
  CHECK_THROWS_AS(runner::parse_config("{"), ConfigError);
  try {
    runner::parse_config(R"({"explore": {"bogus": 1}})");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("explore.bogus") != std::string::npos);
  }
}

TEST_CASE("command line runs") {
  const auto root = fresh_dir("main");
  const auto cfg = root / "config.json";
  std::ofstream(cfg) << kSmallConfig;
  const std::string common = "--config " + cfg.string() + " --out " + (root / "out").string();

  const auto gen = run_cli("gen-data " + common);
  REQUIRE(gen.code == 0);
  const fs::path run_dir = gen.out;
  CHECK(run_dir.filename().string() == runner::run_id(runner::load_config(cfg)));
  for (const char* part : {"seed", "pool", "test", "video"}) CHECK(fs::exists(run_dir / "data" / (std::string(part) + ".jsonl")));

  SUBCASE("manifest lists the partitions and reruns hash identically") {
    const auto m1 = nlohmann::json::parse(slurp(run_dir / "manifest.json"));
    CHECK(m1["files"].size() == 4);
    CHECK(m1["files"]["data/seed.jsonl"]["records"] == 60);
    CHECK(m1["files"]["data/pool.jsonl"]["records"] == 200);
    CHECK(m1["commands"] == nlohmann::json::array({"gen-data"}));
    CHECK(m1["run_id"] == run_dir.filename().string());
    CHECK(run_cli("gen-data " + common).code == 2);  // refuses to clobber
    REQUIRE(run_cli("gen-data " + common + " --force").code == 0);
    const auto m2 = nlohmann::json::parse(slurp(run_dir / "manifest.json"));
    CHECK(m1 == m2);
  }

  SUBCASE("explore writes the rounds table") {
    const auto ex = run_cli("explore " + common + " --jobs 2");
    REQUIRE(ex.code == 0);
    const auto rows = read_csv(run_dir / "rounds.csv");
    REQUIRE(rows.size() == 1 + 2 * 5 * 3);
    std::string header;
    for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
    CHECK(header == runner::kRoundsHeader);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      REQUIRE(rows[i].size() == rows[0].size());
      CHECK(rows[i][0] == run_dir.filename().string());
      CHECK((rows[i][1] == "random" || rows[i][1] == "wav_sparse"));
      for (std::size_t j = 2; j < rows[i].size(); ++j) CHECK(is_number(rows[i][j]));
    }
    const auto first = without(rows, "wall_time_s");
    REQUIRE(run_cli("explore " + common + " --force --jobs 1").code == 0);
    CHECK(without(read_csv(run_dir / "rounds.csv"), "wall_time_s") == first);
    const auto m = nlohmann::json::parse(slurp(run_dir / "manifest.json"));
    CHECK(m["files"].contains("rounds.csv"));
    CHECK(m["files"].contains("data/seed.jsonl"));
    CHECK(m["commands"].size() == 2);
  }

  SUBCASE("train and rank-corr use the written split") {
    nlohmann::json j = nlohmann::json::parse(kSmallConfig);
    j["data_dir"] = (run_dir / "data").string();
    const auto cfg2 = root / "config_data.json";
    std::ofstream(cfg2) << j.dump();
    const std::string c2 = "--config " + cfg2.string() + " --out " + (root / "out").string();
    const auto tr = run_cli("train " + c2);
    REQUIRE(tr.code == 0);
    CHECK(fs::exists(fs::path(tr.out) / "train.csv"));
    const auto rc = run_cli("rank-corr " + c2);
    REQUIRE(rc.code == 0);
    const auto rows = read_csv(fs::path(rc.out) / "rank_corr.csv");
    CHECK(rows.size() > 1);
  }
}

TEST_CASE("theory with few trials warns but still checks the algebra") {
  const auto root = fresh_dir("theory");
  const auto cfg = root / "config.json";
  std::ofstream(cfg) << kSmallConfig;
  const auto r = run_cli("theory --config " + cfg.string() + " --out " + (root / "out").string());
  CHECK(r.code == 0);
  const auto gap = read_csv(fs::path(r.out) / "theory_gap.csv");
  REQUIRE(gap.size() == 3);
  const auto& h = gap[0];
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(h.begin(), h.end(), name) - h.begin());
  };
  for (std::size_t i = 1; i < gap.size(); ++i) {
    REQUIRE(gap[i].size() == h.size());
    CHECK(gap[i][col("warning")] == "1");
    const double product = std::stod(gap[i][col("factor_dim")]) * std::stod(gap[i][col("factor_stoch")]) *
                           std::stod(gap[i][col("factor_sample")]);
    CHECK(product == doctest::Approx(std::stod(gap[i][col("gamma_bound")])).epsilon(1e-12));
  }
  const auto lemma = read_csv(fs::path(r.out) / "theory_lemma.csv");
  REQUIRE(lemma.size() == 2);
  CHECK(lemma[1].back() == "1");
}

TEST_CASE("latent demo and error exits") {
  const auto root = fresh_dir("misc");
  const auto cfg = root / "config.json";
  std::ofstream(cfg) << kSmallConfig;
  const auto r = run_cli("tlcm-demo --config " + cfg.string() + " --out " + (root / "out").string());
  CHECK(r.code == 0);
  CHECK(read_csv(fs::path(r.out) / "tlcm.csv").size() == 5);

  const auto bad = root / "bad.json";
  std::ofstream(bad) << R"({"explore": {"bogus": true}})";
  CHECK(run_cli("explore --config " + bad.string() + " --out " + (root / "out").string()).code == 2);
  CHECK(run_cli("explore --config " + (root / "missing.json").string()).code == 2);
  CHECK(run_cli("frobnicate").code != 0);
}
