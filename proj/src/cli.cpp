#include "cg/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cg/bias.hpp"
#include "cg/checkpoint.hpp"
#include "cg/generator.hpp"
#include "cg/kernels.hpp"
#include "cg/stats.hpp"
#include "cg/visualize.hpp"
#include "json.hpp"

namespace cg {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void write_effective_config(const std::string& out_dir, const json& j) {
  fs::create_directories(out_dir);
  std::ofstream f(fs::path(out_dir) / "effective_config.json");
  check(f.good(), "cannot write effective_config.json under " + out_dir);
  f << j.dump(2) << "\n";
}

Dataset load_data_root(const std::string& data_dir, const std::string& schema_path) {
  const std::string sp =
      schema_path.empty() ? (fs::path(data_dir) / "schema.json").string() : schema_path;
  AttributeSchema schema = AttributeSchema::load(sp);
  return load_dataset(data_dir, schema);
}

std::map<std::string, int> manifest_person_counts(const std::string& data_dir) {
  std::map<std::string, int> counts;
  const auto path = fs::path(data_dir) / "manifest.json";
  if (!fs::exists(path)) return counts;
  std::ifstream f(path);
  json j;
  f >> j;
  for (const auto& scene : j.at("scenes"))
    counts[scene.at("image_id").get<std::string>()] = scene.at("persons").get<int>();
  return counts;
}

int run_generate(const std::string& config_path, const std::string& out_dir,
                 int64_t seed_override, int workers) {
  SceneConfig cfg = config_path.empty() ? SceneConfig() : SceneConfig::load(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
  if (workers > 0) kernels::set_num_threads(workers);
  write_effective_config(out_dir, json::parse(cfg.to_json_string()));
  generate_dataset(cfg, out_dir);
  std::cout << "dataset written to " << out_dir << "\n";
  return 0;
}

int run_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_dir, const CLI::App* cmd, int64_t seed_override,
              int epochs_override, int batch_override, double lr_override,
              const std::string& variant, const std::string& arch,
              const std::string& expr_mode, int eval_every, int workers,
              const std::string& schema_path) {
  TrainConfig cfg = config_path.empty() ? TrainConfig() : TrainConfig::load(config_path);
  // flags override file values
  if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
  if (cmd->count("--epochs")) cfg.epochs = epochs_override;
  if (cmd->count("--batch-size")) cfg.batch_size = batch_override;
  if (cmd->count("--lr")) cfg.lr = lr_override;
  if (cmd->count("--variant")) cfg.loss_variant = variant;
  if (cmd->count("--arch")) cfg.arch_variant = arch;
  if (cmd->count("--expr-mode")) cfg.expr_mode = expr_mode;
  if (cmd->count("--eval-every")) cfg.eval_every = eval_every;
  if (cmd->count("--workers")) cfg.workers = workers;
  if (cmd->count("--schema")) cfg.schema_path = schema_path;
  cfg.validate();

  write_effective_config(out_dir, json::parse(cfg.to_json_string()));
  Dataset data = load_data_root(data_dir, cfg.schema_path);
  auto result = train_model(data, cfg, out_dir);

  const auto& last = result.history.back();
  std::cout << "trained " << cfg.epochs << " epochs in " << result.train_seconds
            << " s; final loss " << last.total;
  if (last.macc >= 0)
    std::cout << "; val Acc50 " << 100 * last.acc50 << " mAcc " << 100 * last.macc;
  std::cout << "\ncheckpoint: " << (fs::path(out_dir) / "checkpoint.bin").string()
            << "\n";
  return 0;
}

int run_eval(const std::string& data_dir, const std::string& split,
             const std::string& ckpt_path, const std::string& pred_path,
             const std::string& out_dir, int workers) {
  check(!ckpt_path.empty() || !pred_path.empty(),
        "eval: provide --ckpt or --pred");
  if (workers > 0) kernels::set_num_threads(workers);

  json eff;
  eff["data"] = data_dir;
  eff["split"] = split;
  eff["ckpt"] = ckpt_path;
  eff["pred"] = pred_path;
  write_effective_config(out_dir, eff);

  Dataset data = load_data_root(data_dir, "");
  auto samples = data.split_samples(split);
  check(!samples.empty(), "eval: split '" + split + "' has no samples");

  std::vector<Prediction> preds;
  if (!ckpt_path.empty()) {
    auto restored = restore_model(Checkpoint::load(ckpt_path));
    preds = predict_samples(*restored.model, data, samples, restored.vocab,
                            restored.model->cfg.expr_mode);
    write_predictions_jsonl(preds, (fs::path(out_dir) / "predictions.jsonl").string());
  } else {
    preds = read_predictions_jsonl(pred_path);
  }

  auto report = evaluate(preds, samples);
  write_report_csv(report, (fs::path(out_dir) / "report.csv").string());
  write_per_sample_csv(report, (fs::path(out_dir) / "per_sample.csv").string());
  const std::string table = format_report_table({{"model", report}});
  std::ofstream(fs::path(out_dir) / "report.txt") << table;
  std::cout << table;
  return 0;
}

int run_bias(const std::string& data_dir, const std::string& ckpt_dir,
             const std::string& split, const std::string& out_dir, int64_t seed,
             int workers) {
  if (workers > 0) kernels::set_num_threads(workers);
  json eff;
  eff["data"] = data_dir;
  eff["ckpt_dir"] = ckpt_dir;
  eff["split"] = split;
  eff["seed"] = seed;
  write_effective_config(out_dir, eff);

  Dataset data = load_data_root(data_dir, "");
  std::map<std::string, std::string> paths;
  for (const char* variant : {"full", "none", "subject", "nouns"}) {
    const auto p = fs::path(ckpt_dir) / variant / "checkpoint.bin";
    if (fs::exists(p)) paths[variant] = p.string();
  }
  std::vector<std::string> warnings;
  auto rows = bias_suite(data, paths, split, static_cast<uint64_t>(seed), &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  write_bias_report(rows, (fs::path(out_dir) / "bias_report.csv").string(),
                    (fs::path(out_dir) / "bias_report.txt").string());
  std::ifstream table(fs::path(out_dir) / "bias_report.txt");
  std::cout << table.rdbuf();
  return 0;
}

int run_analyze(const std::string& data_dir, const std::string& out_dir) {
  json eff;
  eff["data"] = data_dir;
  write_effective_config(out_dir, eff);

  Dataset data = load_data_root(data_dir, "");
  auto counts = manifest_person_counts(data_dir);
  auto st = compute_statistics(data, counts.empty() ? nullptr : &counts);
  write_statistics(st, data.schema, out_dir);
  std::ifstream summary(fs::path(out_dir) / "summary.txt");
  std::cout << summary.rdbuf();
  return 0;
}

int run_visualize(const std::string& data_dir, const std::string& ckpt_path,
                  const std::string& sample_id, const std::string& out_dir) {
  json eff;
  eff["data"] = data_dir;
  eff["ckpt"] = ckpt_path;
  eff["sample"] = sample_id;
  write_effective_config(out_dir, eff);

  Dataset data = load_data_root(data_dir, "");
  const GroundingSample* sample = nullptr;
  for (const auto& s : data.samples)
    if (s.sample_id == sample_id) sample = &s;
  check(sample != nullptr, "unknown sample id: " + sample_id);

  auto restored = restore_model(Checkpoint::load(ckpt_path));
  const int files = dump_attention(*restored.model, data, *sample, restored.vocab,
                                   out_dir);
  std::cout << files << " attention overlays written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
  CLI::App app{"attribute-decomposed person grounding on synthetic crowd scenes"};
  app.require_subcommand(1);
  app.footer("Flags mirror config keys one-to-one; a flag overrides the config file.");

  bool serial = false;
  app.add_flag("--serial", serial, "run compute kernels on the serial reference path");

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "render a synthetic benchmark");
  std::string gen_config, gen_out;
  int64_t gen_seed = -1;
  int gen_workers = 0;
  gen->add_option("--config", gen_config, "generator config JSON");
  gen->add_option("--out", gen_out, "output dataset directory")->required();
  gen->add_option("--seed", gen_seed, "master seed override");
  gen->add_option("--workers", gen_workers, "thread count (default: all processors)");

  // train
  auto* tr = app.add_subcommand("train", "train a grounding model");
  std::string tr_data, tr_config, tr_out, tr_variant, tr_arch, tr_expr, tr_schema;
  int64_t tr_seed = -1;
  int tr_epochs = 0, tr_batch = 0, tr_eval_every = 1, tr_workers = 0;
  double tr_lr = 0;
  tr->add_option("--data", tr_data, "dataset root")->required();
  tr->add_option("--config", tr_config, "train config JSON");
  tr->add_option("--out", tr_out, "run directory")->required();
  tr->add_option("--seed", tr_seed, "seed override");
  tr->add_option("--epochs", tr_epochs, "epoch count");
  tr->add_option("--batch-size", tr_batch, "batch size");
  tr->add_option("--lr", tr_lr, "base learning rate");
  tr->add_option("--variant", tr_variant, "loss variant: aco|triplet|moco_all|aco_no_bank");
  tr->add_option("--arch", tr_arch, "architecture: full|amd_only|flat_fusion");
  tr->add_option("--expr-mode", tr_expr, "expression mode: full|none|subject|nouns");
  tr->add_option("--eval-every", tr_eval_every, "validation cadence in epochs (0 = final only)");
  tr->add_option("--workers", tr_workers, "thread count");
  tr->add_option("--schema", tr_schema, "schema file (default <data>/schema.json)");

  // eval
  auto* ev = app.add_subcommand("eval", "score a checkpoint or a prediction file");
  std::string ev_data, ev_split = "test", ev_ckpt, ev_pred, ev_out;
  int ev_workers = 0;
  ev->add_option("--data", ev_data, "dataset root")->required();
  ev->add_option("--split", ev_split, "split to score (default test)");
  ev->add_option("--ckpt", ev_ckpt, "checkpoint to run");
  ev->add_option("--pred", ev_pred, "existing predictions.jsonl to score");
  ev->add_option("--out", ev_out, "report directory")->required();
  ev->add_option("--workers", ev_workers, "thread count");

  // bias
  auto* bi = app.add_subcommand("bias", "expression-degradation comparison table");
  std::string bi_data, bi_ckpt_dir, bi_split = "test", bi_out;
  int64_t bi_seed = 0;
  int bi_workers = 0;
  bi->add_option("--data", bi_data, "dataset root")->required();
  bi->add_option("--ckpt-dir", bi_ckpt_dir,
                 "directory holding full/ none/ subject/ nouns/ runs")
      ->required();
  bi->add_option("--split", bi_split, "split to score (default test)");
  bi->add_option("--out", bi_out, "report directory")->required();
  bi->add_option("--seed", bi_seed, "seed for the random-pick row");
  bi->add_option("--workers", bi_workers, "thread count");

  // analyze
  auto* an = app.add_subcommand("analyze", "dataset statistics");
  std::string an_data, an_out;
  an->add_option("--data", an_data, "dataset root")->required();
  an->add_option("--out", an_out, "output directory")->required();

  // visualize
  auto* vi = app.add_subcommand("visualize", "attention-map overlays for one sample");
  std::string vi_data, vi_ckpt, vi_sample, vi_out;
  vi->add_option("--data", vi_data, "dataset root")->required();
  vi->add_option("--ckpt", vi_ckpt, "checkpoint")->required();
  vi->add_option("--sample", vi_sample, "sample id")->required();
  vi->add_option("--out", vi_out, "output directory")->required();

  std::vector<const char*> argv;
  argv.push_back("crowdground");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 2;
  }

  if (serial) kernels::set_execution_mode(kernels::Exec::Serial);

  try {
    if (gen->parsed())
      return run_generate(gen_config, gen_out, gen_seed, gen_workers);
    if (tr->parsed())
      return run_train(tr_data, tr_config, tr_out, tr, tr_seed, tr_epochs, tr_batch,
                       tr_lr, tr_variant, tr_arch, tr_expr, tr_eval_every, tr_workers,
                       tr_schema);
    if (ev->parsed()) return run_eval(ev_data, ev_split, ev_ckpt, ev_pred, ev_out, ev_workers);
    if (bi->parsed())
      return run_bias(bi_data, bi_ckpt_dir, bi_split, bi_out, bi_seed, bi_workers);
    if (an->parsed()) return run_analyze(an_data, an_out);
    if (vi->parsed()) return run_visualize(vi_data, vi_ckpt, vi_sample, vi_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace cg
