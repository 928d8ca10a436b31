#include "vtb/encoders.hpp"

#include <cmath>

namespace vtb::nn {

const char* to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::shallow_cnn: return "shallow_cnn";
    case EncoderKind::deep_cnn: return "deep_cnn";
    case EncoderKind::fcn: return "fcn";
    case EncoderKind::transformer: return "transformer";
    case EncoderKind::oscnn: return "oscnn";
  }
  return "?";
}

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "shallow_cnn" || s == "shallow") return EncoderKind::shallow_cnn;
  if (s == "deep_cnn" || s == "deep") return EncoderKind::deep_cnn;
  if (s == "fcn") return EncoderKind::fcn;
  if (s == "transformer") return EncoderKind::transformer;
  if (s == "oscnn") return EncoderKind::oscnn;
  throw EncoderConfigError("unknown encoder kind: " + s);
}

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& cfg, ParamStore& store,
                                      const std::string& prefix, Rng& rng, std::uint64_t site_base) {
  switch (cfg.kind) {
    case EncoderKind::shallow_cnn: return std::make_unique<ShallowCnn>(cfg, store, prefix, rng, site_base);
    case EncoderKind::deep_cnn: return std::make_unique<DeepCnn>(cfg, store, prefix, rng, site_base);
    case EncoderKind::fcn: return std::make_unique<FcnEncoder>(cfg, store, prefix, rng);
    case EncoderKind::transformer: return std::make_unique<TransformerEncoder>(cfg, store, prefix, rng);
    case EncoderKind::oscnn: return std::make_unique<OsCnnEncoder>(cfg, store, prefix, rng);
  }
  throw EncoderConfigError("unknown encoder kind");
}

ConvBlock::ConvBlock(std::size_t cin, std::size_t cout, ParamStore& store, const std::string& prefix,
                     Rng& rng)
    : bn_(BatchNormState::make(cout)) {
  w_ = store.add_parameter(prefix + ".conv.w", fan_in_uniform({cout, cin, 3, 3}, cin * 9, rng));
  b_ = store.add_parameter(prefix + ".conv.b", fan_in_uniform({cout}, cin * 9, rng));
  gamma_ = parameter(Tensor({cout}, 1.0f));
  beta_ = parameter(Tensor({cout}, 0.0f));
  store.add_batchnorm(prefix + ".bn", gamma_, beta_, bn_);
}

Var ConvBlock::forward(const Var& x, Mode mode) {
  return maxpool2(relu(batchnorm(conv2d(x, w_, b_, 1, 1), gamma_, beta_, bn_, mode)));
}

Linear::Linear(std::size_t din, std::size_t dout, ParamStore& store, const std::string& prefix, Rng& rng,
               bool bias) {
  w_ = store.add_parameter(prefix + ".w", fan_in_uniform({dout, din}, din, rng));
  if (bias) b_ = store.add_parameter(prefix + ".b", fan_in_uniform({dout}, din, rng));
}

namespace {

void check_image_batch(const Var& x, std::size_t resolution) {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != 3 || s[2] != resolution || s[3] != resolution) {
    throw ShapeError("expected images [N,3," + std::to_string(resolution) + "," +
                     std::to_string(resolution) + "], got " + shape_str(s));
  }
}

void check_series_batch(const Var& x) {
  if (x.shape().size() != 2 || x.shape()[1] < 1) {
    throw ShapeError("expected series [N,T], got " + shape_str(x.shape()));
  }
}

std::size_t flatten_size(const Var& x) {
  std::size_t n = 1;
  for (std::size_t i = 1; i < x.shape().size(); ++i) n *= x.shape()[i];
  return n;
}

}  // namespace

ShallowCnn::ShallowCnn(const EncoderConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng,
                       std::uint64_t site_base)
    : resolution_(cfg.resolution), dropout_(cfg.dropout), site_(site_base) {
  if (resolution_ == 0 || resolution_ % 8 != 0) {
    throw EncoderConfigError("shallow CNN resolution must be divisible by 8, got " +
                             std::to_string(resolution_));
  }
  const std::size_t ch[] = {3, 16, 32, 64};
  for (std::size_t i = 0; i < 3; ++i) {
    blocks_.emplace_back(ch[i], ch[i + 1], store, prefix + ".block" + std::to_string(i), rng);
  }
  const auto fs = feature_shape();
  fc_ = Linear(fs[0] * fs[1] * fs[2], kEmbedding, store, prefix + ".fc", rng);
}

Shape ShallowCnn::feature_shape() const { return {64, resolution_ / 8, resolution_ / 8}; }

Var ShallowCnn::forward(const Var& x, const ForwardContext& ctx) {
  check_image_batch(x, resolution_);
  Var h = x;
  for (auto& b : blocks_) h = b.forward(h, ctx.mode);
  h = reshape(h, {h.shape()[0], flatten_size(h)});
  return dropout(relu(fc_.forward(h)), dropout_, ctx.site(site_), ctx.mode);
}

DeepCnn::DeepCnn(const EncoderConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng,
                 std::uint64_t site_base)
    : resolution_(cfg.resolution), dropout_(cfg.dropout), site_(site_base) {
  if (resolution_ == 0 || resolution_ % 32 != 0) {
    throw EncoderConfigError("deep CNN resolution must be divisible by 32, got " +
                             std::to_string(resolution_));
  }
  const std::size_t ch[] = {3, 16, 32, 64, 128, 256};
  for (std::size_t i = 0; i < 5; ++i) {
    blocks_.emplace_back(ch[i], ch[i + 1], store, prefix + ".block" + std::to_string(i), rng);
  }
  const auto fs = feature_shape();
  fc1_ = Linear(fs[0] * fs[1] * fs[2], 512, store, prefix + ".fc1", rng);
  fc2_ = Linear(512, kEmbedding, store, prefix + ".fc2", rng);
}

Shape DeepCnn::feature_shape() const { return {256, resolution_ / 32, resolution_ / 32}; }

Var DeepCnn::forward(const Var& x, const ForwardContext& ctx) {
  check_image_batch(x, resolution_);
  Var h = x;
  for (auto& b : blocks_) h = b.forward(h, ctx.mode);
  h = reshape(h, {h.shape()[0], flatten_size(h)});
  h = dropout(relu(fc1_.forward(h)), dropout_, ctx.site(site_), ctx.mode);
  return dropout(relu(fc2_.forward(h)), dropout_, ctx.site(site_ + 1), ctx.mode);
}

FcnEncoder::FcnEncoder(const EncoderConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng)
    : out_(cfg.output_dim) {
  if (cfg.length < 1 || cfg.output_dim < 1 || cfg.hidden < 1) {
    throw EncoderConfigError("FCN needs T, hidden and output_dim >= 1");
  }
  fc1_ = Linear(cfg.length, cfg.hidden, store, prefix + ".fc1", rng);
  fc2_ = Linear(cfg.hidden, cfg.output_dim, store, prefix + ".fc2", rng);
}

Var FcnEncoder::forward(const Var& x, const ForwardContext&) {
  check_series_batch(x);
  return relu(fc2_.forward(relu(fc1_.forward(x))));
}

MhsaLayer::MhsaLayer(std::size_t d_model, std::size_t heads, ParamStore& store, const std::string& prefix,
                     Rng& rng)
    : d_(d_model), heads_(heads) {
  if (heads == 0 || d_model % heads != 0) {
    throw EncoderConfigError("d_model " + std::to_string(d_model) + " not divisible by heads " +
                             std::to_string(heads));
  }
  ln1_g_ = store.add_parameter(prefix + ".ln1.gamma", Tensor({d_model}, 1.0f));
  ln1_b_ = store.add_parameter(prefix + ".ln1.beta", Tensor({d_model}, 0.0f));
  q_ = Linear(d_model, d_model, store, prefix + ".q", rng);
  k_ = Linear(d_model, d_model, store, prefix + ".k", rng);
  v_ = Linear(d_model, d_model, store, prefix + ".v", rng);
  o_ = Linear(d_model, d_model, store, prefix + ".o", rng);
  ln2_g_ = store.add_parameter(prefix + ".ln2.gamma", Tensor({d_model}, 1.0f));
  ln2_b_ = store.add_parameter(prefix + ".ln2.beta", Tensor({d_model}, 0.0f));
  ff1_ = Linear(d_model, 4 * d_model, store, prefix + ".ff1", rng);
  ff2_ = Linear(4 * d_model, d_model, store, prefix + ".ff2", rng);
}

Var MhsaLayer::forward(const Var& x, Tensor* attention) const {
  const auto& s = x.shape();
  if (s.size() != 3 || s[2] != d_) throw ShapeError("mhsa expects [N,T," + std::to_string(d_) + "]");
  const std::size_t n = s[0], t = s[1], dh = d_ / heads_;
  auto split_heads = [&](const Var& v) {
    return reshape(permute_0213(reshape(v, {n, t, heads_, dh})), {n * heads_, t, dh});
  };
  const Var h = layer_norm(x, ln1_g_, ln1_b_);
  const Var q = split_heads(q_.forward(h));
  const Var k = split_heads(k_.forward(h));
  const Var v = split_heads(v_.forward(h));
  const Var scores = scale(bmm(q, k, true), static_cast<float>(1.0 / std::sqrt(static_cast<double>(dh))));
  const Var p = softmax(scores, -1);
  if (attention) *attention = p.value().reshaped({n, heads_, t, t});
  const Var ctx = reshape(permute_0213(reshape(bmm(p, v), {n, heads_, t, dh})), {n, t, d_});
  const Var x1 = add(x, o_.forward(ctx));
  const Var h2 = layer_norm(x1, ln2_g_, ln2_b_);
  return add(x1, ff2_.forward(relu(ff1_.forward(h2))));
}

Tensor sinusoidal_encoding(std::size_t length, std::size_t d_model) {
  Tensor pe({length, d_model});
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model));
      const double a = static_cast<double>(pos) * freq;
      pe[pos * d_model + i] = static_cast<float>(i % 2 == 0 ? std::sin(a) : std::cos(a));
    }
  }
  return pe;
}

TransformerEncoder::TransformerEncoder(const EncoderConfig& cfg, ParamStore& store, const std::string& prefix,
                                       Rng& rng)
    : out_(cfg.output_dim), d_(cfg.d_model), pe_(cfg.positional_encoding) {
  if (cfg.output_dim < 1 || cfg.d_model < 1 || cfg.layers < 1) {
    throw EncoderConfigError("transformer needs d_model, layers and output_dim >= 1");
  }
  embed_ = Linear(1, d_, store, prefix + ".embed", rng);
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    layers_.emplace_back(d_, cfg.heads, store, prefix + ".layer" + std::to_string(i), rng);
  }
  proj_ = Linear(d_, out_, store, prefix + ".proj", rng);
}

Var TransformerEncoder::forward(const Var& x, const ForwardContext&) {
  check_series_batch(x);
  const std::size_t n = x.shape()[0], t = x.shape()[1];
  Var h = embed_.forward(reshape(x, {n, t, 1}));
  if (pe_) h = add(h, constant(sinusoidal_encoding(t, d_)));
  for (const auto& layer : layers_) h = layer.forward(h);
  return proj_.forward(mean_axis(h, 1));
}

std::vector<std::size_t> oscnn_kernel_sizes(std::size_t length, std::size_t max_kernel) {
  if (length < 1) throw EncoderConfigError("OS-CNN needs T >= 1");
  std::vector<std::size_t> ks{1};
  const std::size_t limit = std::min(length, max_kernel);
  for (std::size_t p = 2; p <= limit; ++p) {
    bool prime = true;
    for (std::size_t d = 2; d * d <= p; ++d) {
      if (p % d == 0) {
        prime = false;
        break;
      }
    }
    if (prime) ks.push_back(p);
  }
  return ks;
}

OsCnnEncoder::OsCnnEncoder(const EncoderConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng)
    : out_(cfg.output_dim), kernels_(oscnn_kernel_sizes(cfg.length, cfg.oscnn_max_kernel)) {
  if (cfg.output_dim < 1 || cfg.oscnn_channels < 1) {
    throw EncoderConfigError("OS-CNN needs channels and output_dim >= 1");
  }
  const std::size_t c = cfg.oscnn_channels;
  const std::size_t wide = c * kernels_.size();
  auto build = [&](std::vector<Branch>& out, std::size_t cin, const std::string& name) {
    for (std::size_t k : kernels_) {
      const std::string p = prefix + "." + name + ".k" + std::to_string(k);
      Branch br;
      br.w = store.add_parameter(p + ".w", fan_in_uniform({c, cin, k}, cin * k, rng));
      br.b = store.add_parameter(p + ".b", fan_in_uniform({c}, cin * k, rng));
      br.gamma = parameter(Tensor({c}, 1.0f));
      br.beta = parameter(Tensor({c}, 0.0f));
      br.bn = BatchNormState::make(c);
      store.add_batchnorm(p + ".bn", br.gamma, br.beta, br.bn);
      out.push_back(std::move(br));
    }
  };
  build(first_, 1, "stack0");
  build(second_, wide, "stack1");
  proj_ = Linear(wide, out_, store, prefix + ".proj", rng);
}

Var OsCnnEncoder::stack(const Var& x, std::vector<Branch>& branches, Mode mode) {
  std::vector<Var> outs;
  outs.reserve(branches.size());
  for (auto& br : branches) {
    outs.push_back(relu(batchnorm(conv1d_same(x, br.w, br.b), br.gamma, br.beta, br.bn, mode)));
  }
  return concat(outs, 1);
}

Var OsCnnEncoder::forward(const Var& x, const ForwardContext& ctx) {
  check_series_batch(x);
  const std::size_t n = x.shape()[0], t = x.shape()[1];
  Var h = stack(reshape(x, {n, 1, t}), first_, ctx.mode);
  h = stack(h, second_, ctx.mode);
  return proj_.forward(mean_axis(h, 2));
}

}  // namespace vtb::nn
