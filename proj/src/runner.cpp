#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wav/checkpoint.hpp"
#include "wav/metrics.hpp"
#include "wav/runner.hpp"

namespace wav::runner {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using theory::format_number;

namespace {

enum : std::uint64_t { kExploreStream = 0x6578, kLemmaStream = 0x6c656d, kGapStream = 0x676170, kTlcmStream = 0x746c };

constexpr std::array<const char*, 4> kParts = {"seed", "pool", "test", "video"};

class RunDir {
 public:
  RunDir(const ExperimentConfig& config, const RunOptions& opt)
      : config_(config), id_(run_id(config)), root_(opt.out / id_), force_(opt.force), log_(opt.log) {}

  const std::string& id() const { return id_; }
  const fs::path& root() const { return root_; }

  /// Refuses to clobber an existing output unless forced.
  void claim(const fs::path& rel) const {
    const fs::path p = root_ / rel;
    if (fs::exists(p) && !force_) {
      throw ConfigError("output '" + p.string() + "' already exists; pass --force to overwrite");
    }
    if (fs::is_directory(p)) fs::remove_all(p);
    fs::create_directories(p.parent_path());
  }

  void write(const fs::path& rel, const std::string& text, std::optional<std::size_t> records = std::nullopt) {
    const fs::path p = root_ / rel;
    fs::create_directories(p.parent_path());
    model::save_text(p, text);
    record(rel, text, records);
  }

  void record(const fs::path& rel, const std::string& text, std::optional<std::size_t> records = std::nullopt) {
    ordered_json entry = {{"bytes", text.size()}, {"fnv1a", hex64(fnv1a(text))}};
    if (records) entry["records"] = *records;
    files_[rel.generic_string()] = entry;
  }

  /// Merges this command's files into manifest.json.
  void finish(const std::string& command) {
    const fs::path p = root_ / "manifest.json";
    ordered_json m;
    if (fs::exists(p)) {
      try {
        m = ordered_json::parse(model::load_text(p));
      } catch (const std::exception&) {
        m = ordered_json::object();
      }
    }
    m["run_id"] = id_;
    m["seed"] = config_.seed;
    m["config"] = ordered_json::parse(to_json(config_));
    if (!m.contains("files")) m["files"] = ordered_json::object();
    for (const auto& [k, v] : files_.items()) m["files"][k] = v;
    auto& cmds = m["commands"];
    if (!cmds.is_array()) cmds = ordered_json::array();
    if (std::find(cmds.begin(), cmds.end(), command) == cmds.end()) cmds.push_back(command);
    model::save_text(p, m.dump(2) + "\n");
    say("wrote " + root_.string());
  }

  void say(const std::string& line) const {
    if (log_) *log_ << line << '\n' << std::flush;
  }

 private:
  const ExperimentConfig& config_;
  std::string id_;
  fs::path root_;
  bool force_;
  std::ostream* log_;
  ordered_json files_ = ordered_json::object();
};

data::ExperimentSplit obtain_split(const ExperimentConfig& c) {
  if (c.data_dir) {
    if (!fs::is_directory(*c.data_dir)) throw ConfigError("data directory '" + c.data_dir->string() + "' does not exist");
    return data::load_split(*c.data_dir);
  }
  return exp::make_experiment_split(c.data, c.seed);
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception wins.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct CellOutput {
  std::vector<verify::RoundLog> rounds;
  std::vector<std::pair<std::string, std::string>> checkpoints;  // relative path, text
};

std::vector<CellOutput> run_cells(const ExperimentConfig& c, const data::ExperimentSplit& split, int jobs,
                                  bool keep_checkpoints, const RunDir& dir) {
  const auto xc = exploration_config(c);
  const auto& strategies = c.explore.strategies;
  const std::size_t seeds = static_cast<std::size_t>(c.explore.seeds);
  std::vector<CellOutput> out(strategies.size() * seeds);
  std::mutex log_mutex;
  parallel_for(out.size(), jobs, [&](std::size_t cell) {
    const auto strategy = strategies[cell / seeds];
    const std::size_t k = cell % seeds;
    const std::string name(verify::strategy_name(strategy));
    auto& slot = out[cell];
    auto hook = [&](const verify::RoundLog& log, const model::WorldModel& wm) {
      const bool last = log.round == c.explore.rounds;
      if (keep_checkpoints && (c.explore.checkpoint_every_round || last)) {
        slot.checkpoints.emplace_back("models/" + name + "_seed" + std::to_string(k) + "_round" +
                                          std::to_string(log.round) + "_wm.json",
                                      model::serialize(wm));
      }
    };
    auto result = verify::run_exploration(split, strategy, xc, derive_seed(c.seed, {kExploreStream, k}), hook);
    slot.rounds = std::move(result.rounds);
    std::lock_guard lock(log_mutex);
    dir.say(name + " seed " + std::to_string(k) + ": final test loss " +
            format_number(slot.rounds.empty() ? NAN : slot.rounds.back().post_test_loss));
  });
  return out;
}

}  // namespace

int cmd_gen_data(const ExperimentConfig& c, const RunOptions& opt) {
  if (c.data_dir) throw ConfigError("gen-data writes a new split; remove 'data_dir' from the config");
  exp::validate(c.data);
  RunDir dir(c, opt);
  dir.claim("data");
  const auto split = exp::make_experiment_split(c.data, c.seed);
  const fs::path data_dir = dir.root() / "data";
  data::save_split(split, data_dir);
  const std::array<std::size_t, 4> sizes = {split.seed_labeled.size(), split.pool.size(), split.test.size(),
                                            split.video.size()};
  for (std::size_t i = 0; i < kParts.size(); ++i) {
    const fs::path rel = fs::path("data") / (std::string(kParts[i]) + ".jsonl");
    dir.record(rel, model::load_text(dir.root() / rel), sizes[i]);
  }
  dir.say("split: seed " + std::to_string(sizes[0]) + ", pool " + std::to_string(sizes[1]) + ", test " +
          std::to_string(sizes[2]) + ", video " + std::to_string(sizes[3]));
  dir.finish("gen-data");
  return 0;
}

int cmd_train(const ExperimentConfig& c, const RunOptions& opt) {
  RunDir dir(c, opt);
  dir.claim("train.csv");
  const auto split = obtain_split(c);
  const grid::FeatureLayout layout(split.shape);
  const auto wm = model::train_world_model(layout, split.seed_labeled, c.world_model, derive_seed(c.seed, {1}));
  const auto sparse =
      model::train_sparse_idm(layout, split.seed_labeled, c.sparsity_weight, c.idm, derive_seed(c.seed, {2}));
  const auto vanilla = model::train_vanilla_idm(layout, split.seed_labeled, c.idm, derive_seed(c.seed, {2}));
  dir.write("models/world_model.json", model::serialize(wm));
  dir.write("models/idm_sparse.json", model::serialize(sparse));
  dir.write("models/idm_vanilla.json", model::serialize(vanilla));

  std::ostringstream csv;
  csv << "run_id,model,metric,value\n";
  auto row = [&](const char* m, const char* metric, double v) {
    csv << dir.id() << ',' << m << ',' << metric << ',' << format_number(v) << '\n';
  };
  row("world_model", "test_pred_loss", metrics::prediction_loss(wm, split.test));
  row("world_model", "dynamics_accuracy", verify::test_dynamics_accuracy(wm, split.test));
  row("idm_sparse", "test_action_accuracy", model::action_accuracy(sparse, split.test));
  row("idm_sparse", "mask_sparsity", model::mask_sparsity(sparse));
  row("idm_vanilla", "test_action_accuracy", model::action_accuracy(vanilla, split.test));
  dir.write("train.csv", csv.str(), 5);
  dir.finish("train");
  return 0;
}

int cmd_explore(const ExperimentConfig& c, const RunOptions& opt) {
  RunDir dir(c, opt);
  dir.claim("rounds.csv");
  const auto split = obtain_split(c);
  const auto cells = run_cells(c, split, opt.jobs, true, dir);

  std::ostringstream csv;
  csv << kRoundsHeader << '\n';
  std::size_t rows = 0;
  const std::size_t seeds = static_cast<std::size_t>(c.explore.seeds);
  for (std::size_t cell = 0; cell < cells.size(); ++cell) {
    const std::string name(verify::strategy_name(c.explore.strategies[cell / seeds]));
    for (const auto& r : cells[cell].rounds) {
      csv << dir.id() << ',' << name << ',' << cell % seeds << ',' << r.round << ',' << r.budget_used << ','
          << format_number(r.post_test_loss) << ',' << format_number(r.post_dynamics_accuracy) << ','
          << format_number(r.spearman_vs_oracle) << ',' << format_number(r.kendall_vs_oracle) << ','
          << format_number(r.wall_time_s) << '\n';
      ++rows;
    }
    for (const auto& [rel, text] : cells[cell].checkpoints) dir.write(rel, text);
  }
  dir.write("rounds.csv", csv.str(), rows);
  dir.finish("explore");
  return 0;
}

int cmd_rank_corr(const ExperimentConfig& c, const RunOptions& opt) {
  if (c.explore.env_mode) throw ConfigError("rank-corr needs pool mode (explore.env_mode = false)");
  RunDir dir(c, opt);
  dir.claim("rank_corr.csv");
  const auto split = obtain_split(c);
  const auto cells = run_cells(c, split, opt.jobs, false, dir);
  std::ostringstream csv;
  csv << "run_id,strategy,seed,round,n_candidates,spearman_vs_oracle,kendall_vs_oracle\n";
  std::size_t rows = 0;
  const std::size_t seeds = static_cast<std::size_t>(c.explore.seeds);
  for (std::size_t cell = 0; cell < cells.size(); ++cell) {
    const std::string name(verify::strategy_name(c.explore.strategies[cell / seeds]));
    double sum = 0.0;
    int count = 0;
    for (const auto& r : cells[cell].rounds) {
      csv << dir.id() << ',' << name << ',' << cell % seeds << ',' << r.round << ',' << r.scores.size() << ','
          << format_number(r.spearman_vs_oracle) << ',' << format_number(r.kendall_vs_oracle) << '\n';
      ++rows;
      if (std::isfinite(r.spearman_vs_oracle)) {
        sum += r.spearman_vs_oracle;
        ++count;
      }
    }
    dir.say(name + " seed " + std::to_string(cell % seeds) + ": mean spearman " + format_number(count ? sum / count : NAN));
  }
  dir.write("rank_corr.csv", csv.str(), rows);
  dir.finish("rank-corr");
  return 0;
}

int cmd_theory(const ExperimentConfig& c, const RunOptions& opt) {
  RunDir dir(c, opt);
  dir.claim("theory_gap.csv");
  dir.claim("theory_lemma.csv");
  const auto& t = c.theory;
  std::vector<std::string> failures;

  std::ostringstream lemma;
  lemma << theory::lemma_csv_header() << ",warning\n";
  for (std::size_t i = 0; i < t.lemma_grid.size(); ++i) {
    const auto [D, n, nu] = t.lemma_grid[i];
    const auto r = theory::lemma_excess_risk(D, n, nu, t.trials, derive_seed(c.seed, {kLemmaStream, i}), opt.jobs);
    const bool warn = t.trials < theory::kMinTrustedTrials;
    lemma << theory::lemma_csv_row(r) << ',' << (warn ? 1 : 0) << '\n';
    if (!warn && n >= D + 5 && r.rel_err > 0.05) {
      failures.push_back("lemma D=" + std::to_string(D) + " n=" + std::to_string(n) + ": rel_err " +
                         format_number(r.rel_err) + " > 0.05");
    }
  }

  std::vector<theory::LinearGaussianSpec> specs;
  for (std::size_t i = 0; i < t.gap_specs.size(); ++i) {
    const auto& g = t.gap_specs[i];
    specs.push_back(theory::make_spec(g.d_s, g.d_a, g.d_z, g.sigma_s, g.sigma_a, g.lambda,
                                      derive_seed(t.matrix_seed, {i})));
  }
  const auto reports = theory::sweep_gap(specs, t.n_grid, t.trials, derive_seed(c.seed, {kGapStream}), opt.jobs);
  std::ostringstream gap;
  gap << theory::gap_csv_header() << '\n';
  for (const auto& r : reports) {
    gap << theory::gap_csv_row(r) << '\n';
    const std::string cell = "gap d_s=" + std::to_string(r.d_s) + " sigma_s=" + format_number(r.sigma_s) +
                             " n=" + std::to_string(r.n);
    if (!theory::factorization_exact(r)) failures.push_back(cell + ": factors do not multiply to the bound");
    if (r.warning) continue;
    if (r.rel_err_EF > 0.05) failures.push_back(cell + ": rel_err_EF " + format_number(r.rel_err_EF) + " > 0.05");
    if (!theory::bound_direction_holds(r)) {
      failures.push_back(cell + ": emp_EI " + format_number(r.emp_EI) + " above bound " +
                         format_number(r.theo_EI_bound) + " + 2 s.e.");
    }
  }
  // The bound must fall with n for every spec.
  for (std::size_t i = 0; i < specs.size(); ++i) {
    std::vector<std::pair<int, double>> by_n;
    for (std::size_t j = 0; j < t.n_grid.size(); ++j) by_n.emplace_back(t.n_grid[j], reports[i * t.n_grid.size() + j].gamma_bound);
    std::sort(by_n.begin(), by_n.end());
    for (std::size_t j = 1; j < by_n.size(); ++j) {
      if (by_n[j].first > by_n[j - 1].first && !(by_n[j].second < by_n[j - 1].second)) {
        failures.push_back("gap spec " + std::to_string(i) + ": bound does not decrease in n");
      }
    }
  }

  dir.write("theory_lemma.csv", lemma.str(), t.lemma_grid.size());
  dir.write("theory_gap.csv", gap.str(), reports.size());
  dir.finish("theory");
  for (const auto& f : failures) dir.say("FAILED " + f);
  return failures.empty() ? 0 : 1;
}

int cmd_tlcm_demo(const ExperimentConfig& c, const RunOptions& opt) {
  RunDir dir(c, opt);
  dir.claim("tlcm.csv");
  std::ostringstream csv;
  csv << "run_id,aliasing,back_action,insulated,injective,seed_size,oos_size,s_restricted_accuracy,dense_accuracy,"
         "s_optimum,aliased_pair_accuracy,aliased_pair_optimum\n";
  for (int flags = 0; flags < 4; ++flags) {
    theory::TlcmSpec spec;
    spec.aliasing = flags & 1;
    spec.back_action = flags & 2;
    const auto audit = theory::audit_tlcm(spec);
    // Same seed for every flag setting: paired runs.
    const auto r = theory::tlcm_demo(spec, c.tlcm.seed_size, c.tlcm.oos_size, derive_seed(c.seed, {kTlcmStream}));
    csv << dir.id() << ',' << spec.aliasing << ',' << spec.back_action << ',' << audit.insulated << ','
        << audit.injective << ',' << r.seed_size << ',' << r.oos_size << ',' << format_number(r.s_restricted_accuracy)
        << ',' << format_number(r.dense_accuracy) << ',' << format_number(r.s_optimum) << ','
        << format_number(r.aliased_pair_accuracy) << ',' << format_number(r.aliased_pair_optimum) << '\n';
  }
  dir.write("tlcm.csv", csv.str(), 4);
  dir.finish("tlcm-demo");
  return 0;
}

}  // namespace wav::runner
