#pragma once

#include <span>
#include <string>
#include <vector>

#include "vtb/encoders.hpp"

namespace vtb::nn {

enum class FusionStrategy { concat, weighted };
const char* to_string(FusionStrategy s);
FusionStrategy parse_fusion(const std::string& s);

struct FusionConfig {
  FusionStrategy strategy = FusionStrategy::concat;
  std::size_t common_dim = 128;
};

// z = [h_0, h_1, ...] along the feature axis; inputs are [N, d_k].
Var concat_fuse(std::span<const Var> h);

struct WeightedFusion {
  Var z;      // [N, D]
  Var alpha;  // [N, K]
};

// alpha = softmax_k(w_k . h_k) per sample and z = sum_k alpha_k h_k, for
// embeddings h_k [N,D] and attention vectors w_k [1,D].
WeightedFusion weighted_fuse(std::span<const Var> h, std::span<const Var> w);

// Fusion over branch embeddings in declared order (numeric branch first when
// present). Weighted fusion projects each branch to common_dim first.
class Fusion {
 public:
  Fusion(std::vector<std::size_t> branch_dims, const FusionConfig& cfg, ParamStore& store,
         const std::string& prefix, Rng& rng);

  // `alpha` receives the branch weights [N,K] (weighted) or stays untouched.
  Var forward(std::span<const Var> h, Tensor* alpha = nullptr) const;
  std::size_t output_dim() const { return out_; }
  FusionStrategy strategy() const { return cfg_.strategy; }

 private:
  std::vector<std::size_t> dims_;
  FusionConfig cfg_;
  std::size_t out_ = 0;
  std::vector<Linear> proj_;
  std::vector<Var> attn_;
};

// logits = W2 relu(W1 z + b1) + b2, dropout between the layers in train mode.
class ClassifierHead {
 public:
  ClassifierHead(std::size_t in_dim, std::size_t classes, ParamStore& store, const std::string& prefix,
                 Rng& rng, std::size_t hidden = 128, float dropout = 0.5f, std::uint64_t site = 0);
  Var logits(const Var& z, const ForwardContext& ctx) const;
  Var classify(const Var& z, const ForwardContext& ctx) const { return softmax(logits(z, ctx), -1); }
  std::size_t classes() const { return classes_; }

 private:
  std::size_t classes_;
  float dropout_;
  std::uint64_t site_;
  Linear fc1_, fc2_;
};

}  // namespace vtb::nn
