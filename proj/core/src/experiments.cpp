#include "nic/experiments.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "nic/errors.hpp"
#include "nic/theory.hpp"
#include "nic/trainer.hpp"

namespace nic {

namespace {

using nlohmann::json;

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int t = 0; t < jobs; ++t) {
    workers.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (std::thread& w : workers) w.join();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void emit(const ExperimentConfig& cfg, const std::string& name, const std::string& text) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  write_text_atomic((fs::path(cfg.out_dir) / name).string(), text);
}

std::string fmt_cell(const Aggregate& a) {
  if (a.count == 0) return "-";
  std::ostringstream os;
  os << a.mean << "±" << a.stddev;
  return os.str();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  try {
    c.dataset_dir = j.value("dataset_dir", c.dataset_dir);
    c.image_size = j.value("image_size", c.image_size);
    c.seed = j.value("seed", c.seed);
    c.models_dir = j.value("models_dir", c.models_dir);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.pairs = j.value("pairs", c.pairs);
    c.jobs = j.value("jobs", c.jobs);
    c.archs = j.value("archs", c.archs);
    c.qfs = j.value("qfs", c.qfs);
    c.pgd_epsilon = j.value("pgd_epsilon", c.pgd_epsilon);
    c.cw_c = j.value("cw_c", c.cw_c);
    c.train_steps = j.value("train_steps", c.train_steps);
    c.train_images = j.value("train_images", c.train_images);
    c.eval_images = j.value("eval_images", c.eval_images);
    c.sh_iteration_scale = j.value("sh_iteration_scale", c.sh_iteration_scale);
    if (j.contains("attack")) {
      const json& a = j["attack"];
      c.attack.max_iterations = a.value("max_iterations", c.attack.max_iterations);
      c.attack.lr_initial = a.value("lr_initial", c.attack.lr_initial);
      c.attack.lr_min = a.value("lr_min", c.attack.lr_min);
      c.attack.check_every = a.value("check_every", c.attack.check_every);
      c.attack.seed = a.value("seed", c.attack.seed);
      const std::string loss = a.value("loss", std::string("latent-l2"));
      if (loss == "latent-l2") {
        c.attack.loss = LossVariant::LatentL2;
      } else if (loss == "latent-l2+cosine") {
        c.attack.loss = LossVariant::LatentL2PlusCosine;
      } else {
        throw ConfigError("attack.loss must be 'latent-l2' or 'latent-l2+cosine'");
      }
      const std::string space = a.value("cosine_space", std::string("latent"));
      if (space == "latent") {
        c.attack.cosine_space = CosineSpace::Latent;
      } else if (space == "image") {
        c.attack.cosine_space = CosineSpace::Image;
      } else {
        throw ConfigError("attack.cosine_space must be 'latent' or 'image'");
      }
      if (a.contains("mask")) {
        const json& mk = a["mask"];
        c.attack.mask.delta_h = mk.value("delta_h", c.attack.mask.delta_h);
        c.attack.mask.delta_w = mk.value("delta_w", c.attack.mask.delta_w);
        c.attack.mask.h0 = mk.value("h0", c.attack.mask.h0);
        c.attack.mask.w0 = mk.value("w0", c.attack.mask.w0);
      }
    }
    if (j.contains("lpd")) {
      c.lpd.truncate_latent = j["lpd"].value("latent", c.lpd.truncate_latent);
      c.lpd.truncate_weights = j["lpd"].value("weights", c.lpd.truncate_weights);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  c.attack.validate();
  if (c.pairs < 1) throw ConfigError("config: pairs must be >= 1");
  if (c.image_size < 16 || c.image_size % QualityPreset::kDownsample != 0) {
    throw ConfigError("config: image_size must be a multiple of 8, >= 16");
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  const std::vector<std::uint8_t> raw = read_file_bytes(path);
  return from_json_text(std::string(raw.begin(), raw.end()));
}

std::string ExperimentConfig::canonical_json() const {
  json j;
  j["dataset_dir"] = dataset_dir;
  j["image_size"] = image_size;
  j["seed"] = seed;
  j["models_dir"] = models_dir;
  j["out_dir"] = out_dir;
  j["pairs"] = pairs;
  j["jobs"] = jobs;
  j["archs"] = archs;
  j["qfs"] = qfs;
  j["attack"] = {
      {"max_iterations", attack.max_iterations},
      {"lr_initial", attack.lr_initial},
      {"lr_min", attack.lr_min},
      {"check_every", attack.check_every},
      {"seed", attack.seed},
      {"loss", attack.loss == LossVariant::LatentL2 ? "latent-l2" : "latent-l2+cosine"},
      {"cosine_space", attack.cosine_space == CosineSpace::Latent ? "latent" : "image"},
      {"mask",
       {{"delta_h", attack.mask.delta_h},
        {"delta_w", attack.mask.delta_w},
        {"h0", attack.mask.h0},
        {"w0", attack.mask.w0}}},
  };
  j["pgd_epsilon"] = pgd_epsilon;
  j["cw_c"] = cw_c;
  j["lpd"] = {{"latent", lpd.truncate_latent}, {"weights", lpd.truncate_weights}};
  j["train_steps"] = train_steps;
  j["train_images"] = train_images;
  j["eval_images"] = eval_images;
  j["sh_iteration_scale"] = sh_iteration_scale;
  return j.dump();
}

std::uint64_t ExperimentConfig::config_hash() const {
  const std::string s = canonical_json();
  return fnv1a64(s.data(), s.size());
}

std::vector<Tensor> synth_corpus(std::uint64_t seed, int count, int size) {
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.push_back(synth_image(size, seed * 1000003ULL + static_cast<std::uint64_t>(i)));
  }
  return out;
}

DataSplit load_split(const ExperimentConfig& cfg) {
  DataSplit split;
  if (cfg.dataset_dir.empty()) {
    split.train = synth_corpus(cfg.seed, cfg.train_images, cfg.image_size);
    split.eval = synth_corpus(cfg.seed + 0x0E5A11, cfg.eval_images, cfg.image_size);
    return split;
  }
  std::vector<Tensor> pool = ingest_dataset(cfg.dataset_dir, cfg.image_size);
  if (pool.size() < 4) throw NotFoundError("dataset too small: " + cfg.dataset_dir);
  Rng rng = Rng::derive(cfg.seed, 0x5B117);
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.below(i))]);
  }
  const std::size_t n_eval = std::min<std::size_t>(
      pool.size() / 2, static_cast<std::size_t>(std::max(cfg.eval_images, 2 * cfg.pairs)));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_eval ? split.eval : split.train).push_back(pool[idx[i]]);
  }
  return split;
}

ModelStore::ModelStore(const ExperimentConfig& cfg) : cfg_(cfg) {}

const CodecModel& ModelStore::get(const std::string& arch, int qf) {
  const auto key = std::make_pair(arch, qf);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;

  namespace fs = std::filesystem;
  fs::create_directories(cfg_.models_dir);
  const std::string path =
      (fs::path(cfg_.models_dir) / ("nic_" + arch + "_qf" + std::to_string(qf) + ".nicm"))
          .string();
  if (fs::exists(path)) {
    return cache_.emplace(key, load_model(path)).first->second;
  }
  CodecModel m = train_model(cfg_, *this, arch, qf);
  save_model(path, m);
  return cache_.emplace(key, load_model(path)).first->second;
}

CodecModel train_model(const ExperimentConfig& cfg, ModelStore& store, const std::string& arch,
                       int qf) {
  DataSplit split = load_split(cfg);
  if (arch == "fp-relu") {
    // Sibling of the trained GDN model: same conv stacks with the
    // normalization dropped, then a short fine-tune to re-settle the
    // rate-distortion balance.
    CodecModel m = make_relu_sibling(store.get("fp-gdn", qf));
    const int ft_steps = std::max(200, cfg.train_steps / 3);
    std::fprintf(stderr, "[models] fine-tuning fp-relu qf%d sibling (%d steps)...\n", qf,
                 ft_steps);
    train_rd(m, split.train, m.preset.lambda_rd, ft_steps, cfg.seed + 71 + qf);
    fit_prior(m, split.train);
    return m;
  }
  CodecModel m = make_model(arch_from_name(arch), QualityPreset::ladder(qf), cfg.seed);
  std::fprintf(stderr, "[models] training %s qf%d (%d steps)...\n", arch.c_str(), qf,
               cfg.train_steps);
  train_rd(m, split.train, m.preset.lambda_rd, cfg.train_steps, cfg.seed + qf);
  fit_prior(m, split.train);
  return m;
}

std::vector<std::string> ModelStore::provenance() const {
  std::vector<std::string> lines;
  for (const auto& [key, model] : cache_) {
    lines.push_back("model-" + key.first + "-qf" + std::to_string(key.second) + "-hash=" +
                    hex64(model_hash(model)));
  }
  return lines;
}

MetricReport SuiteResult::report() const {
  MetricReport rep;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    rep.records.push_back(runs[i].record(static_cast<int>(i)));
  }
  return rep;
}

double SuiteResult::asr_value() const { return asr(report().records); }

SuiteResult run_attack_suite(const CodecModel& m, const std::vector<Tensor>& pool,
                             const PairSuite& suite, const AttackConfig& cfg,
                             const std::string& kind, double pgd_epsilon, double cw_c, int jobs) {
  SuiteResult res;
  res.arch = arch_name(m.arch);
  res.qf = m.preset.qf;
  res.attack_kind = kind;
  res.runs.resize(suite.pairs.size());
  parallel_for(static_cast<int>(suite.pairs.size()), jobs, [&](int i) {
    const auto& [src_idx, tgt_idx] = suite.pairs[static_cast<std::size_t>(i)];
    const Tensor& x_src = pool[static_cast<std::size_t>(src_idx)];
    const Tensor& x_tgt = pool[static_cast<std::size_t>(tgt_idx)];
    AttackConfig pair_cfg = cfg;
    pair_cfg.seed = cfg.seed + static_cast<std::uint64_t>(i);
    if (kind == "mgd") {
      res.runs[static_cast<std::size_t>(i)] = mgd_attack(m, x_src, x_tgt, pair_cfg);
    } else if (kind == "pgd") {
      res.runs[static_cast<std::size_t>(i)] = pgd_attack(m, x_src, x_tgt, pair_cfg, pgd_epsilon);
    } else if (kind == "cw") {
      res.runs[static_cast<std::size_t>(i)] = cw_attack(m, x_src, x_tgt, pair_cfg, cw_c);
    } else {
      throw ConfigError("unknown attack kind: " + kind);
    }
  });
  return res;
}

namespace {

std::vector<std::string> provenance_header(
    const ExperimentConfig& cfg, ModelStore& store,
    const std::vector<std::pair<std::string, int>>& used) {
  std::vector<std::string> lines = {"config-hash=" + hex64(cfg.config_hash())};
  for (const auto& [arch, qf] : used) {
    lines.push_back("model-" + arch + "-qf" + std::to_string(qf) + "-hash=" +
                    hex64(model_hash(store.get(arch, qf))));
  }
  return lines;
}

std::vector<std::pair<std::string, int>> grid_cells(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, int>> used;
  for (int qf : cfg.qfs) {
    for (const std::string& arch : cfg.archs) used.emplace_back(arch, qf);
  }
  return used;
}

std::string with_provenance(const std::vector<std::string>& lines, const std::string& body) {
  std::ostringstream os;
  for (const std::string& l : lines) os << "# " << l << "\n";
  os << body;
  return os.str();
}

AttackConfig scaled_attack(const ExperimentConfig& cfg, const std::string& arch) {
  AttackConfig a = cfg.attack;
  if (arch == "sh") a.max_iterations *= cfg.sh_iteration_scale;
  return a;
}

}  // namespace

std::string run_attack_table(const ExperimentConfig& cfg) {
  ModelStore store(cfg);
  DataSplit split = load_split(cfg);
  const PairSuite suite = make_pair_suite(split.eval, cfg.pairs, cfg.seed);
  if (suite.pairs.empty()) throw ConfigError("run_attack_table: empty pair suite");

  std::ostringstream body;
  body << "qf,arch,mgd,pgd,cw\n";
  for (int qf : cfg.qfs) {
    for (const std::string& arch : cfg.archs) {
      const CodecModel& m = store.get(arch, qf);
      const AttackConfig a = scaled_attack(cfg, arch);
      const double mgd =
          run_attack_suite(m, split.eval, suite, a, "mgd", cfg.pgd_epsilon, cfg.cw_c, cfg.jobs)
              .asr_value();
      const double pgd =
          run_attack_suite(m, split.eval, suite, a, "pgd", cfg.pgd_epsilon, cfg.cw_c, cfg.jobs)
              .asr_value();
      const double cw =
          run_attack_suite(m, split.eval, suite, a, "cw", cfg.pgd_epsilon, cfg.cw_c, cfg.jobs)
              .asr_value();
      body << qf << ',' << arch << ',' << mgd << ',' << pgd << ',' << cw << "\n";
    }
  }
  const std::string csv = with_provenance(provenance_header(cfg, store, grid_cells(cfg)), body.str());
  emit(cfg, "table1_asr.csv", csv);
  return csv;
}

std::string run_quality_table(const ExperimentConfig& cfg) {
  ModelStore store(cfg);
  DataSplit split = load_split(cfg);
  const PairSuite suite = make_pair_suite(split.eval, cfg.pairs, cfg.seed);

  std::ostringstream body;
  body << "qf,arch,l2_to_tgt,l2_to_src,msssim_to_tgt,msssim_to_src,successes\n";
  for (int qf : cfg.qfs) {
    for (const std::string& arch : cfg.archs) {
      const CodecModel& m = store.get(arch, qf);
      SuiteResult r = run_attack_suite(m, split.eval, suite, scaled_attack(cfg, arch), "mgd",
                                       cfg.pgd_epsilon, cfg.cw_c, cfg.jobs);
      std::vector<double> l2t, l2s, mst, mss;
      for (const AttackRun& run : r.runs) {
        if (!run.collided) continue;
        l2t.push_back(run.l2_to_tgt);
        l2s.push_back(run.l2_to_src);
        mst.push_back(run.msssim_to_tgt);
        mss.push_back(run.msssim_to_src);
      }
      body << qf << ',' << arch << ',' << fmt_cell(aggregate(l2t)) << ','
           << fmt_cell(aggregate(l2s)) << ',' << fmt_cell(aggregate(mst)) << ','
           << fmt_cell(aggregate(mss)) << ',' << l2t.size() << "\n";
    }
  }
  const std::string csv = with_provenance(provenance_header(cfg, store, grid_cells(cfg)), body.str());
  emit(cfg, "table2_quality.csv", csv);
  return csv;
}

std::string run_transfer_table(const ExperimentConfig& cfg) {
  ModelStore store(cfg);
  DataSplit split = load_split(cfg);
  const PairSuite suite = make_pair_suite(split.eval, cfg.pairs, cfg.seed);
  const int qf = cfg.qfs.front();

  std::ostringstream body;
  body << "src_arch";
  for (const std::string& dst : cfg.archs) body << ',' << dst;
  body << "\n";
  for (const std::string& src : cfg.archs) {
    const CodecModel& m_src = store.get(src, qf);
    SuiteResult r = run_attack_suite(m_src, split.eval, suite, scaled_attack(cfg, src), "mgd",
                                     cfg.pgd_epsilon, cfg.cw_c, cfg.jobs);
    body << src;
    for (const std::string& dst : cfg.archs) {
      if (dst == src) {
        body << ",-";
        continue;
      }
      const CodecModel& m_dst = store.get(dst, qf);
      int transferred = 0, successes = 0;
      for (std::size_t i = 0; i < r.runs.size(); ++i) {
        const AttackRun& run = r.runs[i];
        if (!run.collided) continue;
        ++successes;
        const Tensor& x_tgt = split.eval[static_cast<std::size_t>(suite.pairs[i].second)];
        if (transfer_check(m_dst, run, x_tgt)) ++transferred;
      }
      if (successes == 0) {
        body << ",-";
      } else {
        body << ',' << static_cast<double>(transferred) / successes;
      }
    }
    body << "\n";
  }
  std::vector<std::pair<std::string, int>> used;
  for (const std::string& arch : cfg.archs) used.emplace_back(arch, qf);
  const std::string csv = with_provenance(provenance_header(cfg, store, used), body.str());
  emit(cfg, "table34_transfer.csv", csv);
  return csv;
}

std::string run_defense_table(const ExperimentConfig& cfg) {
  ModelStore store(cfg);
  DataSplit split = load_split(cfg);
  const PairSuite suite = make_pair_suite(split.eval, cfg.pairs, cfg.seed);
  const int qf = cfg.qfs.front();

  std::vector<std::pair<Tensor, Tensor>> pairs;
  for (const auto& [s, t] : suite.pairs) {
    pairs.emplace_back(split.eval[static_cast<std::size_t>(s)],
                       split.eval[static_cast<std::size_t>(t)]);
  }
  std::vector<Tensor> ordinary(split.eval.begin(),
                               split.eval.begin() + std::min<std::size_t>(16, split.eval.size()));

  std::ostringstream body;
  body << "arch,asr_undefended,asr_defended,mean_psnr_drop_db\n";
  for (const std::string& arch : cfg.archs) {
    const CodecModel& m = store.get(arch, qf);
    DefenseReport rep =
        evaluate_defense(m, pairs, scaled_attack(cfg, arch), cfg.lpd, ordinary);
    body << arch << ',' << rep.asr_undefended << ',' << rep.asr_defended << ','
         << rep.mean_psnr_drop << "\n";
  }
  std::vector<std::pair<std::string, int>> used;
  for (const std::string& arch : cfg.archs) used.emplace_back(arch, qf);
  const std::string csv = with_provenance(provenance_header(cfg, store, used), body.str());
  emit(cfg, "table5_defense.csv", csv);
  return csv;
}

std::string run_epsilon_sweep(const ExperimentConfig& cfg, const std::vector<double>& epsilons) {
  ModelStore store(cfg);
  DataSplit split = load_split(cfg);
  const PairSuite suite = make_pair_suite(split.eval, cfg.pairs, cfg.seed);
  const CodecModel& m = store.get(cfg.archs.front(), cfg.qfs.front());

  std::ostringstream body;
  body << "epsilon,asr,mean_msssim_to_src\n";
  std::vector<double> asrs, sims_mean;
  for (double eps : epsilons) {
    SuiteResult r = run_attack_suite(m, split.eval, suite, cfg.attack, "pgd", eps, cfg.cw_c,
                                     cfg.jobs);
    std::vector<double> sims;
    for (const AttackRun& run : r.runs) sims.push_back(run.msssim_to_src);
    asrs.push_back(r.asr_value());
    sims_mean.push_back(aggregate(sims).mean);
    body << eps << ',' << asrs.back() << ',' << sims_mean.back() << "\n";
  }
  // Trend contract: ASR non-decreasing and MS-SSIM non-increasing in epsilon,
  // with one suite element of sampling slack.
  const double slack = 1.0 / static_cast<double>(cfg.pairs);
  for (std::size_t i = 1; i < asrs.size(); ++i) {
    if (asrs[i] + slack < asrs[i - 1] || sims_mean[i] > sims_mean[i - 1] + slack) {
      throw NumericError("epsilon sweep: trend violated beyond sampling slack");
    }
  }
  const std::string csv = with_provenance(
      provenance_header(cfg, store, {{cfg.archs.front(), cfg.qfs.front()}}), body.str());
  emit(cfg, "epsilon_sweep.csv", csv);
  return csv;
}

std::string run_bitlength_curve(const ExperimentConfig& cfg) {
  ModelStore store(cfg);
  DataSplit split = load_split(cfg);
  const std::string arch = cfg.archs.front();

  std::ostringstream body;
  body << "qf,mean_payload_bits,raw_bits,compression_ratio\n";
  const double raw_bits = static_cast<double>(cfg.image_size) * cfg.image_size * 3 * 8;
  for (int qf : cfg.qfs) {
    const CodecModel& m = store.get(arch, qf);
    double bits = 0.0;
    for (const Tensor& img : split.eval) {
      bits += static_cast<double>(compress(m, img).bit_length);
    }
    bits /= static_cast<double>(split.eval.size());
    body << qf << ',' << bits << ',' << raw_bits << ',' << raw_bits / bits << "\n";
  }
  std::vector<std::pair<std::string, int>> used;
  for (int q : cfg.qfs) used.emplace_back(arch, q);
  const std::string csv = with_provenance(provenance_header(cfg, store, used), body.str());
  emit(cfg, "bitlength.csv", csv);
  return csv;
}

std::string theory_curve_csv(const std::vector<double>& gammas) {
  const TheoryCurve curve = theory_curve(gammas);
  std::ostringstream body;
  body << "gamma,compression_ratio,collision_distance\n";
  for (const TheoryCurveSample& s : curve.samples) {
    body << s.gamma << ',' << s.ratio << ',' << s.distance << "\n";
  }
  return body.str();
}

}  // namespace nic
