#include "cg/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace cg {

namespace {

constexpr char kMagic[8] = {'C', 'G', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint64_t get_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  check(is.good(), "truncated checkpoint");
  return v;
}
void put_str(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string get_str(std::istream& is) {
  const uint64_t n = get_u64(is);
  check(n < (1ULL << 32), "corrupt checkpoint string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  check(is.good(), "truncated checkpoint");
  return s;
}
void put_tensor(std::ostream& os, const Tensor& t) {
  put_u64(os, t.shape.size());
  for (int d : t.shape) put_u64(os, static_cast<uint64_t>(d));
  os.write(reinterpret_cast<const char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}
Tensor get_tensor(std::istream& is) {
  const uint64_t nd = get_u64(is);
  check(nd <= 8, "corrupt checkpoint tensor rank");
  std::vector<int> shape(nd);
  for (auto& d : shape) d = static_cast<int>(get_u64(is));
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  check(is.good(), "truncated checkpoint tensor");
  return t;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  check(os.good(), "cannot write checkpoint: " + path);
  os.write(kMagic, sizeof(kMagic));
  put_u64(os, kVersion);
  put_str(os, cfg.to_json_string());
  put_str(os, schema_json);
  put_u64(os, vocab_words.size());
  for (const auto& w : vocab_words) put_str(os, w);
  put_u64(os, static_cast<uint64_t>(epoch));

  put_u64(os, params.size());
  for (const auto& [name, t] : params) {
    put_str(os, name);
    put_tensor(os, t);
  }
  put_u64(os, velocity.size());
  for (const auto& t : velocity) put_tensor(os, t);

  os.write(reinterpret_cast<const char*>(&bank.momentum), sizeof(double));
  os.write(reinterpret_cast<const char*>(&bank.temperature), sizeof(double));
  put_u64(os, bank.types.size());
  for (const auto& tb : bank.types) {
    put_tensor(os, tb.slots);
    put_u64(os, tb.populated.size());
    os.write(reinterpret_cast<const char*>(tb.populated.data()),
             static_cast<std::streamsize>(tb.populated.size()));
  }
  check(os.good(), "checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  check(is.good() && std::memcmp(magic, kMagic, 8) == 0,
        "not a checkpoint file: " + path);
  const uint64_t version = get_u64(is);
  check(version == kVersion, "unsupported checkpoint version " + std::to_string(version));

  Checkpoint c;
  c.cfg = TrainConfig::from_json_string(get_str(is));
  c.schema_json = get_str(is);
  const uint64_t vn = get_u64(is);
  for (uint64_t i = 0; i < vn; ++i) c.vocab_words.push_back(get_str(is));
  c.epoch = static_cast<int>(get_u64(is));

  const uint64_t pn = get_u64(is);
  for (uint64_t i = 0; i < pn; ++i) {
    std::string name = get_str(is);
    c.params.push_back({std::move(name), get_tensor(is)});
  }
  const uint64_t veln = get_u64(is);
  for (uint64_t i = 0; i < veln; ++i) c.velocity.push_back(get_tensor(is));

  is.read(reinterpret_cast<char*>(&c.bank.momentum), sizeof(double));
  is.read(reinterpret_cast<char*>(&c.bank.temperature), sizeof(double));
  const uint64_t bn = get_u64(is);
  for (uint64_t i = 0; i < bn; ++i) {
    MemoryBank::TypeBank tb;
    tb.slots = get_tensor(is);
    tb.populated.resize(get_u64(is));
    is.read(reinterpret_cast<char*>(tb.populated.data()),
            static_cast<std::streamsize>(tb.populated.size()));
    c.bank.types.push_back(std::move(tb));
  }
  check(is.good(), "truncated checkpoint: " + path);
  return c;
}

Checkpoint Checkpoint::snapshot(const GroundingModel& model, const Vocabulary& vocab,
                                const std::vector<Tensor>& velocity, int epoch) {
  Checkpoint c;
  c.cfg = model.cfg;
  c.schema_json = model.schema.to_json_string();
  c.vocab_words = vocab.words;
  c.epoch = epoch;
  for (const auto& [name, v] : model.params.items) c.params.push_back({name, v->value});
  c.velocity = velocity;
  c.bank = model.bank;
  return c;
}

RestoredModel restore_model(const Checkpoint& ckpt) {
  RestoredModel r;
  r.vocab.words = ckpt.vocab_words;
  for (size_t i = 0; i < r.vocab.words.size(); ++i)
    r.vocab.index[r.vocab.words[i]] = static_cast<int>(i);

  AttributeSchema schema = AttributeSchema::from_json_string(ckpt.schema_json);
  r.model = std::make_unique<GroundingModel>(ckpt.cfg, schema, r.vocab.size());

  check(ckpt.params.size() == r.model->params.items.size(),
        "checkpoint parameter count mismatch");
  for (size_t i = 0; i < ckpt.params.size(); ++i) {
    auto& [name, var] = r.model->params.items[i];
    check(name == ckpt.params[i].first, "checkpoint parameter order mismatch at " + name);
    check(var->value.shape == ckpt.params[i].second.shape,
          "checkpoint parameter shape mismatch at " + name);
    var->value = ckpt.params[i].second;
  }
  r.model->bank = ckpt.bank;
  r.velocity = ckpt.velocity;
  r.epoch = ckpt.epoch;
  return r;
}

}  // namespace cg
