#include "mtae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mtae/error.hpp"

namespace mtae {

namespace {

constexpr char kMagic[8] = {'M', 'T', 'A', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double d) { u64(std::bit_cast<std::uint64_t>(d)); }
  void str(const std::string& s) {
    u64(s.size());
    out_ += s;
  }
  void tensor(const Tensor& t) {
    u64(t.shape().size());
    for (auto d : t.shape()) u64(d);
    for (double v : t.storage()) f64(v);
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  Tensor tensor() {
    const auto rank = u64();
    if (rank > 8) throw Error(ErrorCategory::parse, "checkpoint tensor rank is implausible");
    Shape shape;
    for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(u64());
    const auto n = shape_size(shape);
    need(n * 8);
    Tensor t(shape);
    for (auto& v : t.storage()) v = f64();
    return t;
  }
  void expect(const char* p, std::size_t n) {
    need(n);
    if (std::memcmp(s_.data() + pos_, p, n) != 0) throw Error(ErrorCategory::parse, "not a checkpoint file");
    pos_ += n;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > s_.size() - pos_) throw Error(ErrorCategory::parse, "checkpoint is truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

void copy_params(TransformerAutoencoder& model, const Checkpoint& ckpt) {
  auto params = model.parameters();
  if (params.size() != ckpt.params.size()) throw Error(ErrorCategory::state, "checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->name != ckpt.params[i].name || params[i]->value.shape() != ckpt.params[i].value.shape()) {
      throw Error(ErrorCategory::state, "checkpoint parameter '" + ckpt.params[i].name + "' does not match the model");
    }
    params[i]->value = ckpt.params[i].value;
    params[i]->zero_grad();
  }
}

}  // namespace

Checkpoint snapshot(const TransformerAutoencoder& model, const TrainConfig& train) {
  Checkpoint c;
  c.config.model = model.config();
  c.config.train = train;
  for (const Parameter* p : model.parameters()) c.params.push_back({p->name, p->value});
  return c;
}

Checkpoint snapshot(const Trainer& trainer) {
  Checkpoint c = snapshot(trainer.model(), trainer.config());
  c.steps = trainer.steps_taken();
  c.adam_m = trainer.optimizer().first_moments();
  c.adam_v = trainer.optimizer().second_moments();
  return c;
}

TransformerAutoencoder load_model(const Checkpoint& ckpt) {
  TransformerAutoencoder model(ckpt.config.model, ckpt.config.train.seed);
  copy_params(model, ckpt);
  return model;
}

void restore(Trainer& trainer, const Checkpoint& ckpt) {
  if (!(ckpt.config.model == trainer.model().config())) {
    throw Error(ErrorCategory::state, "checkpoint model config differs from the trainer's");
  }
  copy_params(trainer.model(), ckpt);
  auto& adam = trainer.optimizer();
  if (!ckpt.adam_m.empty()) {
    if (ckpt.adam_m.size() != adam.first_moments().size() || ckpt.adam_v.size() != adam.second_moments().size()) {
      throw Error(ErrorCategory::state, "checkpoint optimizer state does not match the model");
    }
    adam.first_moments() = ckpt.adam_m;
    adam.second_moments() = ckpt.adam_v;
  }
  adam.set_steps_taken(ckpt.steps);
}

std::string serialize(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u64(kVersion);
  w.str(write_config(ckpt.config));
  w.u64(static_cast<std::uint64_t>(ckpt.steps));
  w.u64(ckpt.params.size());
  for (const auto& p : ckpt.params) {
    w.str(p.name);
    w.tensor(p.value);
  }
  w.u64(ckpt.adam_m.size());
  for (const auto& t : ckpt.adam_m) w.tensor(t);
  w.u64(ckpt.adam_v.size());
  for (const auto& t : ckpt.adam_v) w.tensor(t);
  return w.take();
}

Checkpoint deserialize(const std::string& bytes) {
  Reader r(bytes);
  r.expect(kMagic, sizeof kMagic);
  if (const auto v = r.u64(); v != kVersion) {
    throw Error(ErrorCategory::parse, "unsupported checkpoint version " + std::to_string(v));
  }
  Checkpoint c;
  c.config = parse_config(r.str());
  c.steps = static_cast<std::int64_t>(r.u64());
  const auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    NamedTensor t;
    t.name = r.str();
    t.value = r.tensor();
    c.params.push_back(std::move(t));
  }
  for (auto* moments : {&c.adam_m, &c.adam_v}) {
    const auto k = r.u64();
    for (std::uint64_t i = 0; i < k; ++i) moments->push_back(r.tensor());
  }
  if (!r.done()) throw Error(ErrorCategory::parse, "trailing bytes after checkpoint");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write checkpoint '" + path + "'");
  const std::string bytes = serialize(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCategory::io, "failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace mtae
