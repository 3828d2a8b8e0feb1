// nic: command-line driver for the collision workbench.
//
// One verb per experiment artifact: train/fit-prior for models, attack/demo
// for single pairs, table1..table5 + eps-sweep + bitlength for the suites,
// theory-curve for the analytic bound, gen-data for synthetic corpora.

#include <cstdio>
#include <filesystem>

#include "CLI11.hpp"
#include "json.hpp"
#include "nic/defense.hpp"
#include "nic/errors.hpp"
#include "nic/experiments.hpp"
#include "nic/image_io.hpp"
#include "nic/theory.hpp"
#include "nic/trainer.hpp"

using namespace nic;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumeric = 4;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--config", c.config_path, "JSON experiment config");
  cmd->add_option("--out", c.out_dir, "output directory override");
  cmd->add_option("--seed", c.seed, "seed override")->each([&](const std::string&) {
    c.seed_set = true;
  });
  cmd->add_option("--jobs", c.jobs, "worker threads for pair suites");
}

ExperimentConfig load_config(const CommonOpts& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig::from_json_text("{}")
                                               : ExperimentConfig::from_json_file(c.config_path);
  if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
  if (c.seed_set) cfg.seed = c.seed;
  if (c.jobs > 0) cfg.jobs = c.jobs;
  return cfg;
}

std::string model_path(const ExperimentConfig& cfg, const std::string& arch, int qf) {
  return (fs::path(cfg.models_dir) / ("nic_" + arch + "_qf" + std::to_string(qf) + ".nicm"))
      .string();
}

int run_train(const CommonOpts& common, const std::string& arch, int qf, int steps_override) {
  ExperimentConfig cfg = load_config(common);
  if (steps_override > 0) cfg.train_steps = steps_override;
  ModelStore store(cfg);
  CodecModel m = train_model(cfg, store, arch, qf);
  const std::string path = model_path(cfg, arch, qf);
  save_model(path, m);
  std::printf("saved %s (hash %016llx)\n", path.c_str(),
              static_cast<unsigned long long>(model_hash(m)));
  return kExitOk;
}

int run_fit_prior(const CommonOpts& common, const std::string& model_file) {
  ExperimentConfig cfg = load_config(common);
  CodecModel m = load_model(model_file);
  DataSplit split = load_split(cfg);
  fit_prior(m, split.train);
  save_model(model_file, m);
  std::printf("prior refit on %zu images, saved %s\n", split.train.size(), model_file.c_str());
  return kExitOk;
}

int run_single_attack(const CommonOpts& common, const std::string& model_file,
                      const std::string& src_path, const std::string& tgt_path,
                      const std::string& algo) {
  ExperimentConfig cfg = load_config(common);
  const CodecModel m = load_model(model_file);
  const int size = cfg.image_size;
  const Tensor x_src = resize_bilinear(center_crop_square(read_ppm(src_path)), size, size);
  const Tensor x_tgt = resize_bilinear(center_crop_square(read_ppm(tgt_path)), size, size);

  AttackRun run;
  if (algo == "mgd") {
    run = mgd_attack(m, x_src, x_tgt, cfg.attack);
  } else if (algo == "pgd") {
    run = pgd_attack(m, x_src, x_tgt, cfg.attack, cfg.pgd_epsilon);
  } else if (algo == "cw") {
    run = cw_attack(m, x_src, x_tgt, cfg.attack, cfg.cw_c);
  } else {
    throw ConfigError("unknown attack algorithm: " + algo);
  }
  const std::string dir = cfg.out_dir.empty() ? "attack-run" : cfg.out_dir;
  save_attack_run(dir, run);
  std::printf("%s: collided=%d iterations=%d hamming=%.4f -> %s\n", algo.c_str(), run.collided,
              run.iterations_used, hamming_normalized(run.b_adv, run.b_tgt), dir.c_str());
  return kExitOk;
}

int run_demo(const CommonOpts& common) {
  ExperimentConfig cfg = load_config(common);
  DataSplit split = load_split(cfg);
  ModelStore store(cfg);
  const CodecModel& m = store.get(cfg.archs.front(), cfg.qfs.front());
  const PairSuite suite = make_pair_suite(split.eval, 1, cfg.seed);
  const Tensor& x_src = split.eval[static_cast<std::size_t>(suite.pairs[0].first)];
  const Tensor& x_tgt = split.eval[static_cast<std::size_t>(suite.pairs[0].second)];
  std::printf("demo: MGD on %s qf%d, up to %d iterations...\n", cfg.archs.front().c_str(),
              cfg.qfs.front(), cfg.attack.max_iterations);
  const AttackRun run = mgd_attack(m, x_src, x_tgt, cfg.attack);
  const std::string dir = cfg.out_dir.empty() ? "demo-run" : cfg.out_dir;
  save_attack_run(dir, run);
  std::printf("collided=%d after %d iterations; hamming=%.4f\n", run.collided,
              run.iterations_used, hamming_normalized(run.b_adv, run.b_tgt));
  std::printf("L2(adv,src)=%.3f L2(adv,tgt)=%.3f MS-SSIM(adv,src)=%.3f MS-SSIM(adv,tgt)=%.3f\n",
              run.l2_to_src, run.l2_to_tgt, run.msssim_to_src, run.msssim_to_tgt);
  std::printf("run saved under %s\n", dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural image compression collision workbench"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic PPM corpus");
  std::string gen_dir = "data";
  int gen_count = 64, gen_size = 64;
  std::uint64_t gen_seed = 7;
  gen->add_option("--out", gen_dir, "output directory");
  gen->add_option("--count", gen_count, "number of images");
  gen->add_option("--size", gen_size, "square image size");
  gen->add_option("--seed", gen_seed, "generator seed");

  // train
  auto* train = app.add_subcommand("train", "train one model and fit its prior");
  CommonOpts train_common;
  add_common(train, train_common);
  std::string train_arch = "fp-gdn";
  int train_qf = 1, train_steps = 0;
  train->add_option("--arch", train_arch, "fp-gdn | fp-relu | sh");
  train->add_option("--qf", train_qf, "quality factor 1..5");
  train->add_option("--steps", train_steps, "training steps override");

  // fit-prior
  auto* fitp = app.add_subcommand("fit-prior", "refit a model's entropy prior on a dataset");
  CommonOpts fitp_common;
  add_common(fitp, fitp_common);
  std::string fitp_model;
  fitp->add_option("--model", fitp_model, "model file")->required();

  // attack
  auto* atk = app.add_subcommand("attack", "run one collision attack pair");
  CommonOpts atk_common;
  add_common(atk, atk_common);
  std::string atk_model, atk_src, atk_tgt, atk_algo = "mgd";
  atk->add_option("--model", atk_model, "model file")->required();
  atk->add_option("--src", atk_src, "source image (PPM)")->required();
  atk->add_option("--tgt", atk_tgt, "target image (PPM)")->required();
  atk->add_option("--algo", atk_algo, "mgd | pgd | cw");

  // tables and curves
  CommonOpts t1c, t2c, t3c, t4c, t5c, epsc, bitc, demc;
  auto* t1 = app.add_subcommand("table1", "ASR of mgd/pgd/cw per (qf, arch)");
  add_common(t1, t1c);
  auto* t2 = app.add_subcommand("table2", "L2/MS-SSIM quality of successful collisions");
  add_common(t2, t2c);
  auto* t3 = app.add_subcommand("table3", "transfer matrix across architectures");
  add_common(t3, t3c);
  auto* t4 = app.add_subcommand("table4", "transfer matrix on a second dataset seed");
  add_common(t4, t4c);
  auto* t5 = app.add_subcommand("table5", "ASR with the limited-precision defense");
  add_common(t5, t5c);
  auto* eps = app.add_subcommand("eps-sweep", "PGD epsilon sweep (ASR and MS-SSIM)");
  add_common(eps, epsc);
  std::vector<double> eps_values;
  eps->add_option("--epsilon", eps_values, "epsilon values (repeatable)");
  auto* bits = app.add_subcommand("bitlength", "mean bitstream length per quality factor");
  add_common(bits, bitc);

  // theory-curve
  auto* theory = app.add_subcommand("theory-curve", "collision-distance bound vs ratio");
  std::string theory_out;
  double gamma_max = 6.0;
  int gamma_samples = 25;
  theory->add_option("--out", theory_out, "CSV path (stdout if omitted)");
  theory->add_option("--gamma-max", gamma_max, "largest threshold");
  theory->add_option("--samples", gamma_samples, "number of curve samples");

  auto* demo = app.add_subcommand("demo", "single-pair end-to-end demonstration");
  add_common(demo, demc);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      generate_synthetic_dataset(gen_dir, gen_count, gen_size, gen_seed);
      std::printf("wrote %d %dx%d images under %s\n", gen_count, gen_size, gen_size,
                  gen_dir.c_str());
      return kExitOk;
    }
    if (train->parsed()) return run_train(train_common, train_arch, train_qf, train_steps);
    if (fitp->parsed()) return run_fit_prior(fitp_common, fitp_model);
    if (atk->parsed()) return run_single_attack(atk_common, atk_model, atk_src, atk_tgt, atk_algo);
    if (t1->parsed()) {
      std::fputs(run_attack_table(load_config(t1c)).c_str(), stdout);
      return kExitOk;
    }
    if (t2->parsed()) {
      std::fputs(run_quality_table(load_config(t2c)).c_str(), stdout);
      return kExitOk;
    }
    if (t3->parsed()) {
      std::fputs(run_transfer_table(load_config(t3c)).c_str(), stdout);
      return kExitOk;
    }
    if (t4->parsed()) {
      ExperimentConfig cfg = load_config(t4c);
      cfg.seed += 0x7AB1E4;  // second dataset/suite draw
      std::fputs(run_transfer_table(cfg).c_str(), stdout);
      return kExitOk;
    }
    if (t5->parsed()) {
      std::fputs(run_defense_table(load_config(t5c)).c_str(), stdout);
      return kExitOk;
    }
    if (eps->parsed()) {
      if (eps_values.empty()) eps_values = {0.0, 0.025, 0.05, 0.1, 0.2, 0.4, 0.8};
      std::fputs(run_epsilon_sweep(load_config(epsc), eps_values).c_str(), stdout);
      return kExitOk;
    }
    if (bits->parsed()) {
      std::fputs(run_bitlength_curve(load_config(bitc)).c_str(), stdout);
      return kExitOk;
    }
    if (theory->parsed()) {
      std::vector<double> gammas;
      for (int i = 0; i < gamma_samples; ++i) {
        gammas.push_back(gamma_max * i / (gamma_samples - 1.0));
      }
      const std::string csv = theory_curve_csv(gammas);
      if (theory_out.empty()) {
        std::fputs(csv.c_str(), stdout);
      } else {
        write_text_atomic(theory_out, csv);
        std::printf("wrote %s\n", theory_out.c_str());
      }
      return kExitOk;
    }
    if (demo->parsed()) return run_demo(demc);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const NotFoundError& e) {
    std::fprintf(stderr, "missing file: %s\n", e.what());
    return kExitMissing;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
