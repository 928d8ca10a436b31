#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtb/chart.hpp"
#include "vtb/dataset.hpp"
#include "vtb/fusion.hpp"

namespace vtb {

enum class Architecture { single_chart, multi_chart, multimodal };
const char* to_string(Architecture a);
Architecture parse_architecture(const std::string& s);

// In-memory inputs of one split: one image list per chart branch plus the
// raw series. Images stay 8-bit until a batch is assembled.
struct SampleSet {
  std::vector<std::vector<RasterImage>> charts;  // [branch][instance]
  std::vector<std::vector<float>> series;        // [instance]
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
};

// Renders every instance under every spec, or reads the PNGs of split
// `split` from `cache_root` when given (the cache must already hold them).
SampleSet build_samples(const LabeledSeriesSet& set, std::span<const ChartSpec> specs,
                        const std::optional<std::filesystem::path>& cache_root = std::nullopt,
                        const std::string& split = "train");
SampleSet subset(const SampleSet& s, std::span<const std::size_t> idx);

struct Batch {
  std::vector<nn::Tensor> images;  // per branch [N,3,R,R] in [0,1]
  nn::Tensor series;               // [N,T]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

// RGB bytes / 255, channel-first.
nn::Tensor image_to_tensor(const RasterImage& img);
Batch make_batch(const SampleSet& s, std::span<const std::size_t> idx);

struct ForwardOutput {
  nn::Var logits;     // [N,C]
  nn::Tensor alpha;   // [N,K] for weighted fusion, empty otherwise
};

// Anything the training loop can fit.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual ForwardOutput forward(const Batch& batch, const nn::ForwardContext& ctx) = 0;
  virtual nn::ParamStore& params() = 0;
};

struct ModelConfig {
  std::vector<ChartSpec> charts;  // one CNN branch per spec
  bool numeric = false;           // add a raw-series branch
  nn::EncoderKind backbone = nn::EncoderKind::deep_cnn;
  nn::EncoderConfig numeric_encoder{.kind = nn::EncoderKind::fcn};
  nn::FusionConfig fusion;
  int num_classes = 2;
  std::size_t length = 0;  // T
  std::size_t head_hidden = 128;
  float dropout = 0.5f;
};

// Chart CNN branches plus an optional numeric branch, fused and classified.
class MultiBranchClassifier final : public Classifier {
 public:
  MultiBranchClassifier(const ModelConfig& cfg, std::uint64_t seed);

  ForwardOutput forward(const Batch& batch, const nn::ForwardContext& ctx) override;
  nn::ParamStore& params() override { return store_; }
  const ModelConfig& config() const { return cfg_; }
  std::size_t num_branches() const;

 private:
  ModelConfig cfg_;
  nn::ParamStore store_;
  std::vector<std::unique_ptr<nn::Encoder>> charts_;
  std::unique_ptr<nn::Encoder> numeric_;
  std::unique_ptr<nn::Fusion> fusion_;
  std::unique_ptr<nn::ClassifierHead> head_;
};

}  // namespace vtb
