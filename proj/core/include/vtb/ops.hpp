#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vtb/autograd.hpp"

namespace vtb::nn {

enum class Mode { train, eval };

// Elementwise a + b. `b` may have a shape equal to a trailing suffix of
// a's shape, in which case it is broadcast over the leading dimensions.
Var add(const Var& a, const Var& b);
Var scale(const Var& x, float s);
Var relu(const Var& x);
Var reshape(const Var& x, Shape shape);

// x[..., Din] * W[Dout, Din]^T + b[Dout]; pass an empty Var to omit the bias.
Var linear(const Var& x, const Var& weight, const Var& bias);

// a[B,M,K] x b[B,K,N] -> [B,M,N]; with trans_b, b is [B,N,K].
Var bmm(const Var& a, const Var& b, bool trans_b = false);

// [A,B,C,D] -> [A,C,B,D]
Var permute_0213(const Var& x);

// Max-subtracted softmax along `axis` (negative counts from the end).
Var softmax(const Var& x, int axis = -1);

// Mean over the batch of -log softmax(logits)[label]; returns shape {1}.
Var cross_entropy(const Var& logits, std::span<const int> labels);

// Train mode zeroes each element with probability p and scales survivors by
// 1/(1-p); the mask is a pure function of `seed`. Eval mode is the identity.
Var dropout(const Var& x, float p, std::uint64_t seed, Mode mode);

// Cross-correlation. x[N,Cin,H,W], w[Cout,Cin,kh,kw], b[Cout] (may be empty).
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

// 2x2 window, stride 2, floor on odd sizes. Ties go to the first element in
// row-major window order.
Var maxpool2(const Var& x);

// Length-preserving 1-D convolution with edge-replicated padding.
// x[N,Cin,T], w[Cout,Cin,K], b[Cout] (may be empty). Left pad is (K-1)/2.
Var conv1d_same(const Var& x, const Var& w, const Var& b);

// Running statistics of a batch-norm layer. Held as Vars so they can live in
// a ParamStore as non-trainable buffers and be checkpointed.
struct BatchNormState {
  Var running_mean;
  Var running_var;
  Var batches_tracked;  // shape {1}
  float momentum = 0.1f;
  float eps = 1e-5f;

  static BatchNormState make(std::size_t channels);
  bool initialized() const { return batches_tracked.value()[0] > 0.0f; }
};

class BatchNormError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Per-channel normalization of x[N,C,...]. Train mode uses batch statistics
// and updates the running ones; eval mode uses the running statistics.
Var batchnorm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, Mode mode);

// Normalizes over the last dimension.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps = 1e-5f);

Var concat(std::span<const Var> parts, int axis);
Var mean_axis(const Var& x, int axis);

// While alive on this thread, ReLU masks and max-pool winners are folded
// into a digest. Two forward passes with equal digests took the same
// branches, so the function is smooth between their inputs.
class BranchRecorder {
 public:
  BranchRecorder();
  ~BranchRecorder();
  BranchRecorder(const BranchRecorder&) = delete;
  BranchRecorder& operator=(const BranchRecorder&) = delete;

  std::uint64_t digest() const { return h_; }
  void mix(std::uint64_t v) { h_ = (h_ ^ v) * 0x100000001B3ULL; }
  static BranchRecorder* active();

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ULL;
  BranchRecorder* prev_;
};

// sum_i r_i * x_i as a {1} tensor; the projection used by gradient checks.
Var weighted_sum(const Var& x, const Tensor& r);

}  // namespace vtb::nn
