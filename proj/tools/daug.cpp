#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "daug/config.hpp"
#include "daug/contrastive.hpp"
#include "daug/reports.hpp"
#include "daug/rng.hpp"
#include "daug/trainer.hpp"

namespace fs = std::filesystem;
using namespace daug;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
  bool json = false;
  int parallel = 1;
};

TrainConfig load_train_config(const GlobalOpts& g) {
  TrainConfig cfg;
  if (!g.config_path.empty()) {
    ParsedConfig parsed = parse_config(g.config_path);
    if (std::holds_alternative<SweepSpec>(parsed))
      throw ConfigError("config declares sweep = true; use the sweep subcommand");
    cfg = std::get<TrainConfig>(parsed);
  }
  if (g.seed_set) cfg.seed = g.seed;
  if (!g.out.empty()) cfg.out_dir = g.out;
  return cfg;
}

void ensure_fresh_run_dir(const std::string& dir, bool force) {
  if (dir.empty()) throw ConfigError("an output directory is required (--out or out =)");
  if (fs::exists(dir + "/resolved.cfg") && !force)
    throw std::runtime_error("run directory '" + dir +
                             "' already exists; pass --force to overwrite");
}

void run_one(TrainConfig cfg, bool json) {
  ensure_fresh_run_dir(cfg.out_dir, true);  // caller already checked force
  fs::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir + "/resolved.cfg", serialize_config(cfg));
  ExperimentResult result = run_experiment(cfg);
  write_run_reports(cfg.out_dir, result.records, json);
}

std::string freeze_mode_str(FreezeMode m) {
  return m == FreezeMode::None ? "none" : m == FreezeMode::Before ? "before" : "after";
}

int cmd_train(const GlobalOpts& g) {
  TrainConfig cfg = load_train_config(g);
  cfg.validate();
  ensure_fresh_run_dir(cfg.out_dir, g.force);
  run_one(cfg, g.json);
  std::cout << "run complete: " << cfg.out_dir << "\n";
  return 0;
}

int cmd_sweep(const GlobalOpts& g) {
  if (g.config_path.empty()) throw ConfigError("sweep requires --config");
  ParsedConfig parsed = parse_config(g.config_path);
  if (!std::holds_alternative<SweepSpec>(parsed))
    throw ConfigError("config does not declare sweep = true");
  SweepSpec spec = std::get<SweepSpec>(parsed);
  if (g.seed_set) spec.base.seed = g.seed;
  const std::string out = !g.out.empty() ? g.out : spec.base.out_dir;
  if (out.empty()) throw ConfigError("sweep requires an output directory");
  if (fs::exists(out + "/summary.csv") && !g.force)
    throw std::runtime_error("sweep directory '" + out +
                             "' already exists; pass --force to overwrite");
  fs::create_directories(out);

  auto points = spec.expand();
  for (auto& [label, cfg] : points) {
    cfg.out_dir = out + "/" + label;
    cfg.validate();
  }

  std::vector<std::string> errors(points.size());
  std::vector<MetricsReport> finals(points.size());
  std::atomic<std::size_t> next{0};
  const int workers = std::max(1, std::min<int>(g.parallel, static_cast<int>(points.size())));
  auto run_point = [&](std::size_t i) {
    try {
      TrainConfig& cfg = points[i].second;
      write_text_file(cfg.out_dir + "/resolved.cfg", serialize_config(cfg));
      ExperimentResult result = run_experiment(cfg);
      write_run_reports(cfg.out_dir, result.records, g.json);
      finals[i] = result.records.back();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  for (auto& [label, cfg] : points) fs::create_directories(cfg.out_dir);
  if (workers == 1) {
    for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= points.size()) return;
          run_point(i);
        }
      });
    for (auto& t : pool) t.join();
  }

  // baseline = batch_fraction 0 point, when the sweep contains one
  double baseline_fine = -1.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (errors[i].empty() && points[i].second.aug.batch_fraction == 0.0f &&
        !points[i].second.aug.all_layers)
      baseline_fine = finals[i].probe_fine;

  std::ostringstream summary;
  summary << "label,target_layer,all_layers,rate,batch_fraction,stop_grad,freeze_mode,"
             "final_epoch,loss,probe_coarse,probe_fine,alignment,uniformity,"
             "fine_vs_baseline\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!errors[i].empty()) continue;
    const TrainConfig& cfg = points[i].second;
    const MetricsReport& r = finals[i];
    summary << points[i].first << "," << cfg.aug.target_layer << ","
            << (cfg.aug.all_layers ? "true" : "false") << ","
            << format_double(cfg.aug.rate) << "," << format_double(cfg.aug.batch_fraction)
            << "," << (cfg.aug.stop_grad ? "true" : "false") << ","
            << freeze_mode_str(cfg.freeze_mode) << "," << r.epoch << ","
            << format_double(r.loss) << "," << format_double(r.probe_coarse) << ","
            << format_double(r.probe_fine) << "," << format_double(r.alignment) << ","
            << format_double(r.uniformity) << ","
            << (baseline_fine >= 0.0 ? format_double(r.probe_fine - baseline_fine) : "")
            << "\n";
  }
  write_text_file(out + "/summary.csv", summary.str());

  bool failed = false;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!errors[i].empty()) {
      std::cerr << "point " << points[i].first << " failed: " << errors[i] << "\n";
      failed = true;
    }
  if (!failed)
    std::cout << "sweep complete: " << points.size() << " points, summary in " << out
              << "/summary.csv\n";
  return failed ? 1 : 0;
}

struct AnalysisInputs {
  TrainConfig cfg;
  LayeredEncoder encoder;
  Dataset dataset;
};

AnalysisInputs load_analysis(const GlobalOpts& g, const std::string& checkpoint,
                             const std::string& dataset) {
  AnalysisInputs in;
  in.cfg = load_train_config(g);
  if (!dataset.empty() && dataset != "synthetic") in.cfg.dataset_path = dataset;
  in.encoder = load_checkpoint(checkpoint);
  in.dataset = provision_dataset(in.cfg);
  std::vector<std::size_t> train_idx, val_idx;
  train_val_split(in.dataset.size(), in.cfg.val_fraction,
                  derive_seed(in.cfg.seed, "eval"), train_idx, val_idx);
  standardize(in.dataset, train_idx);
  return in;
}

void emit_report(const GlobalOpts& g, const std::string& name, const std::string& csv,
                 const nlohmann::json& j) {
  if (g.out.empty()) {
    std::cout << csv;
    return;
  }
  fs::create_directories(g.out);
  write_text_file(g.out + "/" + name + ".csv", csv);
  if (g.json) write_text_file(g.out + "/" + name + ".json", j.dump(2) + "\n");
  std::cout << "wrote " << g.out << "/" << name << ".csv\n";
}

int cmd_cka(const GlobalOpts& g, const std::string& checkpoint, const std::string& dataset,
            std::vector<int> layers) {
  AnalysisInputs in = load_analysis(g, checkpoint, dataset);
  if (layers.empty())
    for (int l = 0; l < in.encoder.layer_count(); ++l) layers.push_back(l);
  for (int l : layers) in.encoder.check_layer_index(l);

  auto perm = shuffled_indices(in.dataset.size(),
                               derive_seed(derive_seed(in.cfg.seed, "eval"), "subset"));
  const std::size_t n = std::min(in.cfg.eval_subset, in.dataset.size());
  Tensor x({n, in.dataset.features.cols()});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = in.dataset.features(perm[r], c);

  std::vector<Tensor> acts;
  for (int l : layers) acts.push_back(forward_to_eval(in.encoder, x, l));
  auto matrix = cka_matrix(acts);

  MetricsReport rec;
  rec.cka = std::move(matrix);
  rec.cka_layers = layers;
  nlohmann::json j{{"layers", layers}, {"cka", rec.cka}};
  emit_report(g, "cka", cka_csv(rec), j);
  return 0;
}

int cmd_align_uniform(const GlobalOpts& g, const std::string& checkpoint,
                      const std::string& dataset) {
  AnalysisInputs in = load_analysis(g, checkpoint, dataset);
  const std::uint64_t eval_seed = derive_seed(in.cfg.seed, "eval");
  auto perm = shuffled_indices(in.dataset.size(), derive_seed(eval_seed, "subset"));
  const std::size_t n = std::min(in.cfg.eval_subset, in.dataset.size());
  Tensor x({n, in.dataset.features.cols()});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = in.dataset.features(perm[r], c);

  const Tensor v1 = input_augment(x, in.cfg.aug.input_aug, derive_seed(eval_seed, "align_view1"));
  const Tensor v2 = input_augment(x, in.cfg.aug.input_aug, derive_seed(eval_seed, "align_view2"));
  const Tensor e1 = forward_eval(in.encoder, v1);
  const Tensor e2 = forward_eval(in.encoder, v2);
  const double a = alignment(e1, e2, in.cfg.align_alpha);
  const double u = uniformity(e1, in.cfg.uniform_t);

  std::ostringstream csv;
  csv << "alignment,uniformity,n,alpha,t\n"
      << format_double(a) << "," << format_double(u) << "," << n << ","
      << format_double(in.cfg.align_alpha) << "," << format_double(in.cfg.uniform_t) << "\n";
  nlohmann::json j{{"alignment", a}, {"uniformity", u},         {"n", n},
                   {"alpha", in.cfg.align_alpha}, {"t", in.cfg.uniform_t}};
  emit_report(g, "align_uniform", csv.str(), j);
  return 0;
}

int cmd_probe(const GlobalOpts& g, const std::string& checkpoint, const std::string& dataset) {
  AnalysisInputs in = load_analysis(g, checkpoint, dataset);
  std::vector<std::size_t> train_idx, val_idx;
  train_val_split(in.dataset.size(), in.cfg.val_fraction,
                  derive_seed(in.cfg.seed, "eval"), train_idx, val_idx);
  if (train_idx.size() > in.cfg.eval_subset) train_idx.resize(in.cfg.eval_subset);
  const Tensor emb = forward_eval(in.encoder, in.dataset.features);
  const double fine = linear_probe(emb, in.dataset.fine_labels, train_idx, val_idx, in.cfg.probe);
  const double coarse =
      in.dataset.has_coarse()
          ? linear_probe(emb, in.dataset.coarse_labels, train_idx, val_idx, in.cfg.probe)
          : fine;

  const std::string probe_desc = "epochs=" + std::to_string(in.cfg.probe.epochs) +
                                 ";lr=" + format_double(in.cfg.probe.lr) +
                                 ";seed=" + std::to_string(in.cfg.seed);
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(seed_tag(probe_desc)));

  std::ostringstream csv;
  csv << "coarse_acc,fine_acc,probe_config_hash\n"
      << format_double(coarse) << "," << format_double(fine) << "," << hash << "\n";
  nlohmann::json j{{"coarse_acc", coarse}, {"fine_acc", fine}, {"probe_config_hash", hash}};
  emit_report(g, "probe", csv.str(), j);
  return 0;
}

int cmd_gen_data(const GlobalOpts& g, const std::string& out_file) {
  TrainConfig cfg = load_train_config(g);
  if (g.seed_set) cfg.data.seed = g.seed;
  Dataset ds = generate_synthetic(cfg.data);
  save_dataset(ds, out_file);
  std::cout << "wrote " << ds.size() << " examples to " << out_file << "\n";
  return 0;
}

int cmd_parse_cifar(const std::string& input, const std::string& variant,
                    const std::string& out_file) {
  CifarVariant v;
  if (variant == "cifar10")
    v = CifarVariant::Cifar10;
  else if (variant == "cifar100")
    v = CifarVariant::Cifar100;
  else
    throw ConfigError("variant must be cifar10 or cifar100, got '" + variant + "'");
  Dataset ds = parse_cifar(input, v);
  save_dataset(ds, out_file);
  std::cout << "parsed " << ds.size() << " records into " << out_file << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Augmentation contrastive-learning toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "config file of key = value pairs")->expected(1);
  app.add_option("--out", g.out, "output directory (or file for gen-data/parse-cifar)");
  auto* seed_opt = app.add_option("--seed", g.seed, "override the config seed");
  app.add_flag("--force", g.force, "overwrite existing run directories");
  app.add_flag("--json", g.json, "also write JSON mirrors of every CSV");
  app.add_option("--parallel", g.parallel, "number of concurrent sweep points")
      ->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "run one training experiment");
  auto* sweep = app.add_subcommand("sweep", "run a config-defined sweep");

  std::string checkpoint, dataset = "synthetic";
  std::vector<int> layers;
  auto* probe = app.add_subcommand("probe", "linear-probe a checkpoint");
  auto* cka = app.add_subcommand("cka", "cross-layer CKA matrix of a checkpoint");
  auto* align = app.add_subcommand("align-uniform", "alignment/uniformity of a checkpoint");
  for (CLI::App* sub : {probe, cka, align}) {
    sub->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    sub->add_option("--dataset", dataset, "dataset container path or 'synthetic'");
  }
  cka->add_option("--layers", layers, "layer indices (default: all)");

  std::string gen_out = "dataset.daug";
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset container");
  gen->add_option("--out-file", gen_out, "output dataset path");

  std::string cifar_in, cifar_variant = "cifar10", cifar_out = "cifar.daug";
  auto* pc = app.add_subcommand("parse-cifar", "convert a CIFAR binary file");
  pc->add_option("--input", cifar_in, "CIFAR binary file")->required();
  pc->add_option("--variant", cifar_variant, "cifar10 or cifar100");
  pc->add_option("--out-file", cifar_out, "output dataset path");

  // global options may appear after the subcommand name
  for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; }))
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*train) return cmd_train(g);
    if (*sweep) return cmd_sweep(g);
    if (*probe) return cmd_probe(g, checkpoint, dataset);
    if (*cka) return cmd_cka(g, checkpoint, dataset, layers);
    if (*align) return cmd_align_uniform(g, checkpoint, dataset);
    if (*gen) return cmd_gen_data(g, gen_out);
    if (*pc) return cmd_parse_cifar(cifar_in, cifar_variant, cifar_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
