#include "vtb/fusion.hpp"

#include <cmath>

namespace vtb::nn {

const char* to_string(FusionStrategy s) { return s == FusionStrategy::concat ? "concat" : "weighted"; }

FusionStrategy parse_fusion(const std::string& s) {
  if (s == "concat") return FusionStrategy::concat;
  if (s == "weighted") return FusionStrategy::weighted;
  throw std::invalid_argument("unknown fusion strategy: " + s);
}

Var concat_fuse(std::span<const Var> h) {
  if (h.empty()) throw std::invalid_argument("concat_fuse: no branches");
  if (h.size() == 1) return h.front();
  return concat(h, 1);
}

WeightedFusion weighted_fuse(std::span<const Var> h, std::span<const Var> w) {
  if (h.empty()) throw std::invalid_argument("weighted_fuse: no branches");
  if (h.size() != w.size()) throw std::invalid_argument("weighted_fuse: branch and weight counts differ");
  const std::size_t n = h.front().shape().at(0);
  const std::size_t d = h.front().shape().at(1);
  std::vector<Var> logits, stacked;
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (h[k].shape() != Shape{n, d}) throw ShapeError("weighted_fuse: embeddings must share [N,D]");
    logits.push_back(linear(h[k], w[k], Var{}));
    stacked.push_back(reshape(h[k], {n, 1, d}));
  }
  Var alpha = softmax(concat(logits, 1), -1);
  const std::size_t kb = h.size();
  Var z = reshape(bmm(reshape(alpha, {n, 1, kb}), concat(stacked, 1)), {n, d});

  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < kb; ++k) {
      const float a = alpha.value()[i * kb + k];
      if (!(a >= 0.0f && a <= 1.0f)) throw std::logic_error("fusion weight outside [0,1]");
      s += a;
    }
    if (std::fabs(s - 1.0) > 1e-5) throw std::logic_error("fusion weights do not sum to 1");
  }
  return {z, alpha};
}

Fusion::Fusion(std::vector<std::size_t> branch_dims, const FusionConfig& cfg, ParamStore& store,
               const std::string& prefix, Rng& rng)
    : dims_(std::move(branch_dims)), cfg_(cfg) {
  if (dims_.empty()) throw std::invalid_argument("fusion needs at least one branch");
  if (cfg_.strategy == FusionStrategy::concat) {
    for (auto d : dims_) out_ += d;
    return;
  }
  if (cfg_.common_dim < 1) throw std::invalid_argument("weighted fusion needs common_dim >= 1");
  out_ = cfg_.common_dim;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    const std::string p = prefix + ".branch" + std::to_string(k);
    proj_.emplace_back(dims_[k], out_, store, p + ".proj", rng);
    attn_.push_back(store.add_parameter(p + ".attn", fan_in_uniform({1, out_}, out_, rng)));
  }
}

Var Fusion::forward(std::span<const Var> h, Tensor* alpha) const {
  if (h.size() != dims_.size()) throw std::invalid_argument("fusion: wrong number of branches");
  if (cfg_.strategy == FusionStrategy::concat) return concat_fuse(h);
  std::vector<Var> projected;
  for (std::size_t k = 0; k < h.size(); ++k) projected.push_back(proj_[k].forward(h[k]));
  auto r = weighted_fuse(projected, attn_);
  if (alpha) *alpha = r.alpha.value();
  return r.z;
}

ClassifierHead::ClassifierHead(std::size_t in_dim, std::size_t classes, ParamStore& store,
                               const std::string& prefix, Rng& rng, std::size_t hidden, float dropout,
                               std::uint64_t site)
    : classes_(classes), dropout_(dropout), site_(site) {
  if (classes < 2) throw std::invalid_argument("classifier needs at least 2 classes");
  fc1_ = Linear(in_dim, hidden, store, prefix + ".fc1", rng);
  fc2_ = Linear(hidden, classes, store, prefix + ".fc2", rng);
}

Var ClassifierHead::logits(const Var& z, const ForwardContext& ctx) const {
  return fc2_.forward(dropout(relu(fc1_.forward(z)), dropout_, ctx.site(site_), ctx.mode));
}

}  // namespace vtb::nn
