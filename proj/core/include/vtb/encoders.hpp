#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vtb/ops.hpp"
#include "vtb/params.hpp"
#include "vtb/rng.hpp"

namespace vtb::nn {

struct ForwardContext {
  Mode mode = Mode::eval;
  std::uint64_t dropout_seed = 0;

  // Seed for one dropout site, derived from the call seed and a site id.
  std::uint64_t site(std::uint64_t id) const { return mix_seed(dropout_seed, id); }
};

enum class EncoderKind { shallow_cnn, deep_cnn, fcn, transformer, oscnn };
const char* to_string(EncoderKind k);
EncoderKind parse_encoder_kind(const std::string& s);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::shallow_cnn;
  std::size_t resolution = 128;   // CNN branches
  std::size_t length = 0;         // numeric branches (T)
  std::size_t output_dim = 128;   // numeric branches; CNNs are fixed at 64 / 256
  std::size_t hidden = 128;       // FCN hidden width
  float dropout = 0.5f;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  bool positional_encoding = true;
  std::size_t oscnn_channels = 32;
  std::size_t oscnn_max_kernel = 23;
};

class EncoderConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Maps a batch to embeddings [N, output_dim()]. CNNs take [N,3,R,R] images
// scaled to [0,1]; numeric encoders take [N,T].
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual Var forward(const Var& x, const ForwardContext& ctx) = 0;
  virtual std::size_t output_dim() const = 0;
};

// Parameters are registered in `store` under `prefix`. `site_base` keeps the
// dropout streams of different branches apart.
std::unique_ptr<Encoder> make_encoder(const EncoderConfig& cfg, ParamStore& store,
                                      const std::string& prefix, Rng& rng,
                                      std::uint64_t site_base = 0);

// conv3x3(s1,p1) -> batchnorm -> relu -> maxpool2
class ConvBlock {
 public:
  ConvBlock(std::size_t cin, std::size_t cout, ParamStore& store, const std::string& prefix, Rng& rng);
  Var forward(const Var& x, Mode mode);

 private:
  Var w_, b_, gamma_, beta_;
  BatchNormState bn_;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t din, std::size_t dout, ParamStore& store, const std::string& prefix, Rng& rng,
         bool bias = true);
  Var forward(const Var& x) const { return linear(x, w_, b_); }
  const Var& weight() const { return w_; }
  const Var& bias() const { return b_; }

 private:
  Var w_, b_;
};

class ShallowCnn final : public Encoder {
 public:
  static constexpr std::size_t kEmbedding = 64;
  ShallowCnn(const EncoderConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng,
             std::uint64_t site_base);
  Var forward(const Var& x, const ForwardContext& ctx) override;
  std::size_t output_dim() const override { return kEmbedding; }
  // Feature map size before flattening, e.g. {64,16,16} at 128.
  Shape feature_shape() const;

 private:
  std::size_t resolution_;
  float dropout_;
  std::uint64_t site_;
  std::vector<ConvBlock> blocks_;
  Linear fc_;
};

class DeepCnn final : public Encoder {
 public:
  static constexpr std::size_t kEmbedding = 256;
  DeepCnn(const EncoderConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng,
          std::uint64_t site_base);
  Var forward(const Var& x, const ForwardContext& ctx) override;
  std::size_t output_dim() const override { return kEmbedding; }
  Shape feature_shape() const;

 private:
  std::size_t resolution_;
  float dropout_;
  std::uint64_t site_;
  std::vector<ConvBlock> blocks_;
  Linear fc1_, fc2_;
};

class FcnEncoder final : public Encoder {
 public:
  FcnEncoder(const EncoderConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng);
  Var forward(const Var& x, const ForwardContext& ctx) override;
  std::size_t output_dim() const override { return out_; }

 private:
  std::size_t out_;
  Linear fc1_, fc2_;
};

// Pre-norm encoder layer: x + MHSA(LN(x)), then x + FFN(LN(x)) with hidden 4D.
class MhsaLayer {
 public:
  MhsaLayer(std::size_t d_model, std::size_t heads, ParamStore& store, const std::string& prefix,
            Rng& rng);
  // x is [N,T,D]. If `attention` is given it receives the weights [N,H,T,T].
  Var forward(const Var& x, Tensor* attention = nullptr) const;

 private:
  std::size_t d_, heads_;
  Var ln1_g_, ln1_b_, ln2_g_, ln2_b_;
  Linear q_, k_, v_, o_, ff1_, ff2_;
};

// Sinusoidal positional encoding table [T, D].
Tensor sinusoidal_encoding(std::size_t length, std::size_t d_model);

class TransformerEncoder final : public Encoder {
 public:
  TransformerEncoder(const EncoderConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng);
  Var forward(const Var& x, const ForwardContext& ctx) override;
  std::size_t output_dim() const override { return out_; }
  const std::vector<MhsaLayer>& layers() const { return layers_; }

 private:
  std::size_t out_, d_;
  bool pe_;
  Linear embed_;
  std::vector<MhsaLayer> layers_;
  Linear proj_;
};

// {1} followed by the primes up to min(T, max_kernel).
std::vector<std::size_t> oscnn_kernel_sizes(std::size_t length, std::size_t max_kernel = 23);

class OsCnnEncoder final : public Encoder {
 public:
  OsCnnEncoder(const EncoderConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng);
  Var forward(const Var& x, const ForwardContext& ctx) override;
  std::size_t output_dim() const override { return out_; }
  const std::vector<std::size_t>& kernel_sizes() const { return kernels_; }

 private:
  struct Branch {
    Var w, b, gamma, beta;
    BatchNormState bn;
  };
  Var stack(const Var& x, std::vector<Branch>& branches, Mode mode);

  std::size_t out_;
  std::vector<std::size_t> kernels_;
  std::vector<Branch> first_, second_;
  Linear proj_;
};

}  // namespace vtb::nn
