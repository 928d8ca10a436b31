#include "vtb/model.hpp"

#include <cstring>

#include "vtb/render_cache.hpp"

namespace vtb {

using nn::Tensor;
using nn::Var;

const char* to_string(Architecture a) {
  switch (a) {
    case Architecture::single_chart: return "single_chart";
    case Architecture::multi_chart: return "multi_chart";
    case Architecture::multimodal: return "multimodal";
  }
  return "?";
}

Architecture parse_architecture(const std::string& s) {
  if (s == "single_chart") return Architecture::single_chart;
  if (s == "multi_chart") return Architecture::multi_chart;
  if (s == "multimodal") return Architecture::multimodal;
  throw std::invalid_argument("unknown architecture: " + s);
}

SampleSet build_samples(const LabeledSeriesSet& set, std::span<const ChartSpec> specs,
                        const std::optional<std::filesystem::path>& cache_root, const std::string& split) {
  SampleSet s;
  s.num_classes = set.meta.num_classes;
  s.labels = set.labels();
  for (const auto& inst : set.instances) s.series.push_back(inst.values);
  for (const auto& spec : specs) {
    std::vector<RasterImage> imgs;
    imgs.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
      imgs.push_back(cache_root ? load_cached_chart(*cache_root, set.meta.name, split, i, spec)
                                : render(set.instances[i].values, spec));
    }
    s.charts.push_back(std::move(imgs));
  }
  return s;
}

SampleSet subset(const SampleSet& s, std::span<const std::size_t> idx) {
  SampleSet out;
  out.num_classes = s.num_classes;
  out.charts.resize(s.charts.size());
  for (std::size_t i : idx) {
    if (i >= s.size()) throw std::out_of_range("sample index out of range");
    out.labels.push_back(s.labels[i]);
    out.series.push_back(s.series[i]);
    for (std::size_t b = 0; b < s.charts.size(); ++b) out.charts[b].push_back(s.charts[b][i]);
  }
  return out;
}

Tensor image_to_tensor(const RasterImage& img) {
  const std::size_t w = static_cast<std::size_t>(img.width), h = static_cast<std::size_t>(img.height);
  Tensor t({3, h, w});
  for (std::size_t p = 0; p < w * h; ++p) {
    for (std::size_t c = 0; c < 3; ++c) t[c * w * h + p] = img.pixels[p * 3 + c] / 255.0f;
  }
  return t;
}

Batch make_batch(const SampleSet& s, std::span<const std::size_t> idx) {
  Batch b;
  const std::size_t n = idx.size();
  for (const auto& branch : s.charts) {
    const auto& first = branch.at(idx[0]);
    const std::size_t w = static_cast<std::size_t>(first.width), h = static_cast<std::size_t>(first.height);
    Tensor t({n, 3, h, w});
    for (std::size_t i = 0; i < n; ++i) {
      const Tensor one = image_to_tensor(branch.at(idx[i]));
      std::memcpy(t.data() + i * 3 * h * w, one.data(), one.size() * sizeof(float));
    }
    b.images.push_back(std::move(t));
  }
  const std::size_t len = s.series.at(idx[0]).size();
  b.series = Tensor({n, len});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = s.series.at(idx[i]);
    std::copy(v.begin(), v.end(), b.series.data() + i * len);
    b.labels.push_back(s.labels.at(idx[i]));
  }
  return b;
}

MultiBranchClassifier::MultiBranchClassifier(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.charts.empty() && !cfg_.numeric) throw std::invalid_argument("model has no branches");
  Rng rng(mix_seed(seed, 0x1417));
  std::vector<std::size_t> dims;
  if (cfg_.numeric) {
    nn::EncoderConfig ec = cfg_.numeric_encoder;
    ec.length = cfg_.length;
    numeric_ = nn::make_encoder(ec, store_, "numeric", rng);
    dims.push_back(numeric_->output_dim());
  }
  for (std::size_t k = 0; k < cfg_.charts.size(); ++k) {
    cfg_.charts[k].validate();
    nn::EncoderConfig ec;
    ec.kind = cfg_.backbone;
    ec.resolution = static_cast<std::size_t>(cfg_.charts[k].resolution);
    ec.dropout = cfg_.dropout;
    charts_.push_back(nn::make_encoder(ec, store_, "chart" + std::to_string(k), rng, 16 * (k + 1)));
    dims.push_back(charts_.back()->output_dim());
  }
  fusion_ = std::make_unique<nn::Fusion>(dims, cfg_.fusion, store_, "fusion", rng);
  head_ = std::make_unique<nn::ClassifierHead>(fusion_->output_dim(), static_cast<std::size_t>(cfg_.num_classes),
                                               store_, "head", rng, cfg_.head_hidden, cfg_.dropout, 7);
}

std::size_t MultiBranchClassifier::num_branches() const { return charts_.size() + (numeric_ ? 1 : 0); }

ForwardOutput MultiBranchClassifier::forward(const Batch& batch, const nn::ForwardContext& ctx) {
  if (batch.images.size() != charts_.size()) throw std::invalid_argument("batch has wrong number of chart branches");
  std::vector<Var> h;
  if (numeric_) h.push_back(numeric_->forward(nn::constant(batch.series), ctx));
  for (std::size_t k = 0; k < charts_.size(); ++k) {
    h.push_back(charts_[k]->forward(nn::constant(batch.images[k]), ctx));
  }
  ForwardOutput out;
  const Var z = fusion_->forward(h, &out.alpha);
  out.logits = head_->logits(z, ctx);
  return out;
}

}  // namespace vtb
