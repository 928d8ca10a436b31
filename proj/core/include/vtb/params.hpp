#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "vtb/autograd.hpp"
#include "vtb/ops.hpp"
#include "vtb/rng.hpp"

namespace vtb::nn {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 1e-2f;
  bool decoupled = false;  // AdamW-style decay instead of L2 added to the gradient
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EntryKind : std::uint8_t { parameter = 0, buffer = 1 };

// Named trainable parameters plus non-trainable buffers (batch-norm running
// statistics), with the Adam moments of every parameter.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Var var;
    EntryKind kind;
    Tensor m;
    Tensor v;
  };

  Var add_parameter(const std::string& name, Tensor init);
  void add_buffer(const std::string& name, Var buffer);
  // Registers gamma/beta as parameters and the running statistics as buffers.
  void add_batchnorm(const std::string& prefix, const Var& gamma, const Var& beta,
                     const BatchNormState& state);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Var> parameters() const;
  const Var& get(const std::string& name) const;

  std::size_t parameter_count() const;  // trainable scalars
  std::int64_t step_count() const { return t_; }

  void zero_grad();
  // One bias-corrected Adam update from the accumulated gradients. Parameters
  // that received no gradient are left untouched.
  void adam_step(const AdamConfig& cfg);

  // Values of every entry (parameters and buffers) in registration order.
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

  // sha256 over names, shapes and values.
  std::string content_hash() const;

  void save(const std::filesystem::path& file) const;
  void load(const std::filesystem::path& file);

 private:
  std::size_t index_of(const std::string& name) const;
  void check_new(const std::string& name) const;

  std::vector<Entry> entries_;
  std::int64_t t_ = 0;
};

// U(-b, b) with b = 1 / sqrt(fan_in); used for conv and linear weights and biases.
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace vtb::nn
