#include "cg/train.hpp"

#include <chrono>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cg/kernels.hpp"

namespace cg {

namespace fs = std::filesystem;

std::vector<std::string> degrade_words(const std::vector<std::string>& words,
                                       const std::string& mode, const Lexicon& lexicon) {
  if (mode == "full") return words;
  if (mode == "none") return {};
  if (mode == "subject") return lexicon.subject_tokens(words);
  if (mode == "nouns") return lexicon.noun_tokens(words);
  throw Error("unknown expression mode: " + mode);
}

std::vector<int> tokens_for_mode(const GroundingSample& sample, const std::string& mode,
                                 const Lexicon& lexicon, const Vocabulary& vocab) {
  auto words = degrade_words(sample.words, mode, lexicon);
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(vocab.id(w));
  return ids;
}

namespace {

Lexicon mode_lexicon(const AttributeSchema& schema) {
  Lexicon lex = lexicon_from_schema(schema);
  if (!lex.words.count("person")) lex.add_plain("person", true, true);
  return lex;
}

double grad_norm(const ParamStore& params) {
  double sq = 0;
  for (const auto& [name, v] : params.items) {
    if (v->grad.shape != v->value.shape) continue;
    for (double g : v->grad.data) sq += g * g;
  }
  return std::sqrt(sq);
}

}  // namespace

std::vector<Prediction> predict_samples(const GroundingModel& model, const Dataset& data,
                                        const std::vector<const GroundingSample*>& samples,
                                        const Vocabulary& vocab,
                                        const std::string& expr_mode) {
  const Lexicon lex = mode_lexicon(model.schema);
  std::vector<Prediction> preds(samples.size());
  // image decode is cached per image id; warm the cache serially first
  for (const auto* s : samples) data.image(s->image_id);
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(samples.size()); ++i) {
    NoGrad guard;
    const auto* s = samples[i];
    const auto tokens = tokens_for_mode(*s, expr_mode, lex, vocab);
    auto fwd = model.forward(data.image(s->image_id).to_tensor(), tokens);
    std::vector<DetectionHead::LevelOut> outs;
    for (const auto& lvl : fwd.levels) outs.push_back(lvl.det);
    auto top = decode_top(extract_output(outs, fwd.image_width, fwd.image_height));
    preds[i] = {s->sample_id, top.first, top.second};
  }
  return preds;
}

TrainResult train_model(const Dataset& data, TrainConfig cfg, const std::string& out_dir) {
  cfg.validate();
  if (cfg.workers > 0) kernels::set_num_threads(cfg.workers);

  auto train_ptrs = data.split_samples("train");
  check(!train_ptrs.empty(), "training split is empty");
  auto val_ptrs = data.split_samples("val");

  // frequencies always recomputed from the actual training split
  AttributeSchema schema = data.schema;
  {
    std::vector<std::vector<int>> labels;
    labels.reserve(train_ptrs.size());
    for (const auto* s : train_ptrs) labels.push_back(s->labels);
    accumulate_frequencies(schema, labels);
  }

  Vocabulary vocab = Vocabulary::build(train_ptrs);
  const Lexicon lex = mode_lexicon(schema);

  TrainResult result;
  result.vocab = vocab;
  result.model = std::make_shared<GroundingModel>(cfg, schema, vocab.size());
  GroundingModel& model = *result.model;

  result.velocity.clear();
  for (const auto& [name, v] : model.params.items)
    result.velocity.push_back(Tensor(v->value.shape));

  // per-sample token ids under the configured expression mode
  std::vector<std::vector<int>> mode_tokens(train_ptrs.size());
  for (size_t i = 0; i < train_ptrs.size(); ++i)
    mode_tokens[i] = tokens_for_mode(*train_ptrs[i], cfg.expr_mode, lex, vocab);

  Rng data_rng(Rng::child_seed(cfg.seed, 1));
  Rng loss_rng(Rng::child_seed(cfg.seed, 2));

  const auto t0 = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at_epoch(epoch);
    std::vector<int> order(train_ptrs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    data_rng.shuffle(order);

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    int64_t batches = 0;

    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      const int bsz = static_cast<int>(end - start);

      model.params.zero_grad();
      Var batch_loss;
      std::vector<BankUpdate> updates;
      LossBreakdown mean{};
      for (size_t bi = start; bi < end; ++bi) {
        const auto* s = train_ptrs[order[bi]];
        auto fwd = model.forward(data.image(s->image_id).to_tensor(),
                                 mode_tokens[order[bi]]);
        LossBreakdown bd;
        Var loss = sample_loss(model, fwd, *s, loss_rng, &bd);
        mean.det += bd.det;
        mean.aco += bd.aco;
        mean.ace += bd.ace;
        mean.total += bd.total;
        batch_loss = batch_loss ? add(batch_loss, loss) : loss;
        for (auto& u : pending_bank_updates(model, fwd, *s)) updates.push_back(std::move(u));
      }
      batch_loss = affine(batch_loss, 1.0 / bsz, 0.0);
      backward(batch_loss);

      // clip, then SGD with momentum and decoupled-from-nothing weight decay
      double scale = 1.0;
      if (cfg.clip_norm > 0) {
        const double norm = grad_norm(model.params);
        if (norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
      }
      for (size_t pi = 0; pi < model.params.items.size(); ++pi) {
        auto& [name, v] = model.params.items[pi];
        if (v->grad.shape != v->value.shape) continue;
        const double plr =
            lr * (name.rfind("vis.", 0) == 0 ? cfg.backbone_lr_mult : 1.0);
        auto& vel = result.velocity[pi];
        for (int64_t i = 0; i < v->value.size(); ++i) {
          const double g = scale * v->grad[i] + cfg.weight_decay * v->value[i];
          vel[i] = cfg.momentum * vel[i] + g;
          v->value[i] -= plr * vel[i];
        }
      }

      // bank moves only after the step, one update per sample per present type
      for (const auto& u : updates) model.bank.update(u.type, u.cls, u.feature);

      stats.det += mean.det / bsz;
      stats.aco += mean.aco / bsz;
      stats.ace += mean.ace / bsz;
      stats.total += mean.total / bsz;
      ++batches;
    }
    if (batches) {
      stats.det /= batches;
      stats.aco /= batches;
      stats.ace /= batches;
      stats.total /= batches;
    }

    const bool score_val =
        !val_ptrs.empty() &&
        ((cfg.eval_every > 0 && epoch % cfg.eval_every == 0) || epoch == cfg.epochs);
    if (score_val) {
      auto preds = predict_samples(model, data, val_ptrs, vocab, cfg.expr_mode);
      auto rep = evaluate(preds, val_ptrs);
      stats.acc50 = rep.acc50;
      stats.acc75 = rep.acc75;
      stats.macc = rep.macc;
    }
    result.history.push_back(stats);

    std::printf("epoch %d/%d lr %.4g det %.4f aco %.4f ace %.4f total %.4f", epoch,
                cfg.epochs, lr, stats.det, stats.aco, stats.ace, stats.total);
    if (stats.macc >= 0)
      std::printf(" | val Acc50 %.3f mAcc %.3f", stats.acc50, stats.macc);
    std::printf("\n");
    std::fflush(stdout);
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      write_metrics_csv(result.history, (fs::path(out_dir) / "metrics.csv").string());
    }
  }
  result.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    Checkpoint::snapshot(model, vocab, result.velocity, cfg.epochs)
        .save((fs::path(out_dir) / "checkpoint.bin").string());
    write_metrics_csv(result.history, (fs::path(out_dir) / "metrics.csv").string());
    vocab.save((fs::path(out_dir) / "vocab.txt").string());
  }
  return result;
}

void write_metrics_csv(const std::vector<EpochStats>& history, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "cannot write metrics: " + path);
  f << "epoch,lr,loss_det,loss_aco,loss_ace,loss_total,acc_50,acc_75,macc\n";
  for (const auto& e : history) {
    f << e.epoch << "," << e.lr << "," << e.det << "," << e.aco << "," << e.ace << ","
      << e.total;
    if (e.macc >= 0)
      f << "," << e.acc50 << "," << e.acc75 << "," << e.macc << "\n";
    else
      f << ",,,\n";
  }
}

}  // namespace cg
