#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nic/attack.hpp"
#include "nic/codec.hpp"
#include "nic/dataset.hpp"
#include "nic/defense.hpp"

namespace nic {

// One config drives every experiment verb. Loaded from JSON; every output
// carries its hash so tables can be tied back to the exact run settings.
struct ExperimentConfig {
  std::string dataset_dir;  // empty = synthetic corpus from `seed`
  int image_size = 64;
  std::uint64_t seed = 7;
  std::string models_dir = "models";
  std::string out_dir = "out";
  int pairs = 20;
  int jobs = 1;

  std::vector<std::string> archs = {"fp-gdn", "fp-relu", "sh"};
  std::vector<int> qfs = {1, 2, 3, 4, 5};

  AttackConfig attack;
  double pgd_epsilon = 0.1;
  double cw_c = 1.0;
  LpdPolicy lpd;

  int train_steps = 2200;
  int train_images = 60;
  int eval_images = 64;
  int sh_iteration_scale = 4;  // hyper stage gets a larger attack budget

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_json_file(const std::string& path);
  std::string canonical_json() const;
  std::uint64_t config_hash() const;
};

// Deterministic in-memory corpora derived from the config seed.
std::vector<Tensor> synth_corpus(std::uint64_t seed, int count, int size);

// Train/eval pools: from dataset_dir when set, synthetic otherwise. The eval
// pool feeds pair suites and held-out quality measurements.
struct DataSplit {
  std::vector<Tensor> train;
  std::vector<Tensor> eval;
};
DataSplit load_split(const ExperimentConfig& cfg);

// Loads models from models_dir, training and saving them on first use.
class ModelStore {
 public:
  explicit ModelStore(const ExperimentConfig& cfg);
  const CodecModel& get(const std::string& arch, int qf);
  std::vector<std::string> provenance() const;

 private:
  ExperimentConfig cfg_;
  std::map<std::pair<std::string, int>, CodecModel> cache_;
};

// Training policy for one family member: fp-gdn and sh train from scratch;
// fp-relu derives from the trained fp-gdn sibling (same conv weights, ReLU in
// place of GDN) plus a short fine-tune.
CodecModel train_model(const ExperimentConfig& cfg, ModelStore& store, const std::string& arch,
                       int qf);

// Run one attack over every pair of a suite. `kind` is "mgd", "pgd" or "cw".
struct SuiteResult {
  std::string arch;
  int qf = 0;
  std::string attack_kind;
  std::vector<AttackRun> runs;
  MetricReport report() const;
  double asr_value() const;
};
SuiteResult run_attack_suite(const CodecModel& m, const std::vector<Tensor>& pool,
                             const PairSuite& suite, const AttackConfig& cfg,
                             const std::string& kind, double pgd_epsilon, double cw_c, int jobs);

// Table emitters. Each writes `<name>.csv` under cfg.out_dir (atomically) and
// returns the CSV text.
std::string run_attack_table(const ExperimentConfig& cfg);
std::string run_quality_table(const ExperimentConfig& cfg);
std::string run_transfer_table(const ExperimentConfig& cfg);
std::string run_defense_table(const ExperimentConfig& cfg);
std::string run_epsilon_sweep(const ExperimentConfig& cfg, const std::vector<double>& epsilons);
std::string run_bitlength_curve(const ExperimentConfig& cfg);

// gamma,R,D_c samples as CSV (Fig.-4 style curve).
std::string theory_curve_csv(const std::vector<double>& gammas);

}  // namespace nic
