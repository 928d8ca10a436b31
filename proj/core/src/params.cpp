#include "vtb/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "vtb/hash.hpp"
#include "vtb/png.hpp"

namespace vtb::nn {

namespace {

constexpr char kMagic[8] = {'V', 'T', 'B', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}
  const std::uint8_t* take(std::size_t n) {
    if (data_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
    const auto* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename U>
  U uint() {
    const auto* p = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

void ParamStore::check_new(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) throw std::invalid_argument("duplicate parameter name: " + name);
  }
}

Var ParamStore::add_parameter(const std::string& name, Tensor init) {
  check_new(name);
  Var v = parameter(std::move(init));
  entries_.push_back({name, v, EntryKind::parameter, Tensor(v.shape(), 0.0f), Tensor(v.shape(), 0.0f)});
  return v;
}

void ParamStore::add_buffer(const std::string& name, Var buffer) {
  check_new(name);
  entries_.push_back({name, std::move(buffer), EntryKind::buffer, {}, {}});
}

void ParamStore::add_batchnorm(const std::string& prefix, const Var& gamma, const Var& beta,
                               const BatchNormState& state) {
  check_new(prefix + ".gamma");
  check_new(prefix + ".beta");
  entries_.push_back({prefix + ".gamma", gamma, EntryKind::parameter, Tensor(gamma.shape(), 0.0f),
                      Tensor(gamma.shape(), 0.0f)});
  entries_.push_back({prefix + ".beta", beta, EntryKind::parameter, Tensor(beta.shape(), 0.0f),
                      Tensor(beta.shape(), 0.0f)});
  add_buffer(prefix + ".running_mean", state.running_mean);
  add_buffer(prefix + ".running_var", state.running_var);
  add_buffer(prefix + ".batches_tracked", state.batches_tracked);
}

std::vector<Var> ParamStore::parameters() const {
  std::vector<Var> out;
  for (const auto& e : entries_) {
    if (e.kind == EntryKind::parameter) out.push_back(e.var);
  }
  return out;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw std::out_of_range("no parameter named " + name);
}

const Var& ParamStore::get(const std::string& name) const { return entries_[index_of(name)].var; }

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.kind == EntryKind::parameter) n += e.var.value().size();
  }
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

void ParamStore::adam_step(const AdamConfig& cfg) {
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(t_));
  for (auto& e : entries_) {
    if (e.kind != EntryKind::parameter || !e.var.has_grad()) continue;
    Tensor& p = e.var.mutable_value();
    const Tensor& g = e.var.grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      double gi = g[i];
      if (!cfg.decoupled) gi += static_cast<double>(cfg.weight_decay) * p[i];
      e.m[i] = static_cast<float>(cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * gi);
      e.v[i] = static_cast<float>(cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * gi * gi);
      const double mhat = e.m[i] / bc1;
      const double vhat = e.v[i] / bc2;
      double value = p[i];
      if (cfg.decoupled) value -= static_cast<double>(cfg.lr) * cfg.weight_decay * value;
      value -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      p[i] = static_cast<float>(value);
    }
  }
}

std::vector<Tensor> ParamStore::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.var.value());
  return out;
}

void ParamStore::restore(const std::vector<Tensor>& values) {
  if (values.size() != entries_.size()) throw std::invalid_argument("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != entries_[i].var.shape()) {
      throw ShapeError("snapshot shape mismatch for " + entries_[i].name);
    }
    entries_[i].var.mutable_value() = values[i];
  }
}

std::string ParamStore::content_hash() const {
  Writer w;
  for (const auto& e : entries_) {
    w.bytes(e.name.data(), e.name.size());
    w.uint<std::uint8_t>(0);
    for (auto d : e.var.shape()) w.uint<std::uint64_t>(d);
    for (float f : e.var.value().span()) w.f32(f);
  }
  return sha256_hex(w.out);
}

void ParamStore::save(const std::filesystem::path& file) const {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.uint<std::uint32_t>(kVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(e.kind));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(e.var.shape().size()));
    for (auto d : e.var.shape()) w.uint<std::uint64_t>(d);
  }
  for (const auto& e : entries_) {
    for (float f : e.var.value().span()) w.f32(f);
  }
  write_file_atomic(file, w.out);
}

void ParamStore::load(const std::filesystem::path& file) {
  Reader r(read_file(file));
  if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(file.string() + ": not a checkpoint file");
  }
  const auto version = r.uint<std::uint32_t>();
  if (version != kVersion) {
    throw CheckpointError(file.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.uint<std::uint32_t>();
  if (count != entries_.size()) {
    throw CheckpointError(file.string() + ": expected " + std::to_string(entries_.size()) +
                          " entries, found " + std::to_string(count));
  }
  for (const auto& e : entries_) {
    const auto len = r.uint<std::uint32_t>();
    const auto* p = r.take(len);
    const std::string name(reinterpret_cast<const char*>(p), len);
    const auto kind = static_cast<EntryKind>(r.uint<std::uint8_t>());
    const auto rank = r.uint<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.uint<std::uint64_t>());
    if (name != e.name || kind != e.kind || shape != e.var.shape()) {
      throw CheckpointError(file.string() + ": entry '" + name + "' " + shape_str(shape) +
                            " does not match '" + e.name + "' " + shape_str(e.var.shape()));
    }
  }
  std::vector<Tensor> values;
  for (const auto& e : entries_) {
    Tensor t(e.var.shape());
    for (auto& f : t.span()) f = r.f32();
    values.push_back(std::move(t));
  }
  if (!r.done()) throw CheckpointError(file.string() + ": trailing bytes");
  restore(values);
}

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (auto& v : t.span()) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace vtb::nn
