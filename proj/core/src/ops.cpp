#include "vtb/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>

#include "vtb/rng.hpp"

namespace vtb::nn {

namespace {

std::size_t norm_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw ShapeError("axis " + std::to_string(axis) + " out of range");
  return static_cast<std::size_t>(a);
}

// outer x axis x inner decomposition of a shape around one axis.
struct AxisSplit {
  std::size_t outer = 1, axis = 1, inner = 1;
};
AxisSplit split_at(const Shape& s, std::size_t ax) {
  AxisSplit r;
  for (std::size_t i = 0; i < ax; ++i) r.outer *= s[i];
  r.axis = s[ax];
  for (std::size_t i = ax + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

void expect_rank(const Var& v, std::size_t rank, const char* what) {
  if (v.value().rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(v.shape()));
  }
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

}  // namespace

Var add(const Var& a, const Var& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (bs.size() > as.size() || !std::equal(bs.rbegin(), bs.rend(), as.rbegin())) {
    throw ShapeError("add: cannot broadcast " + shape_str(bs) + " onto " + shape_str(as));
  }
  const std::size_t inner = b.value().size();
  const std::size_t outer = a.value().size() / inner;
  Tensor out = a.value();
  const float* pb = b.value().data();
  for (std::size_t o = 0; o < outer; ++o) {
    float* po = out.data() + o * inner;
    for (std::size_t i = 0; i < inner; ++i) po[i] += pb[i];
  }
  return make_result(std::move(out), {a, b}, [outer, inner](Node& self) {
    const float* g = self.grad.data();
    if (parent(self, 0).requires_grad) {
      auto& ga = parent(self, 0).grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }
    if (parent(self, 1).requires_grad) {
      auto& gb = parent(self, 1).grad_buffer();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) gb[i] += g[o * inner + i];
      }
    }
  });
}

Var scale(const Var& x, float s) {
  Tensor out = x.value();
  for (auto& v : out.span()) v *= s;
  return make_result(std::move(out), {x}, [s](Node& self) {
    auto& gx = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s * self.grad[i];
  });
}

namespace {
thread_local BranchRecorder* g_recorder = nullptr;
}

BranchRecorder::BranchRecorder() : prev_(g_recorder) { g_recorder = this; }
BranchRecorder::~BranchRecorder() { g_recorder = prev_; }
BranchRecorder* BranchRecorder::active() { return g_recorder; }

Var relu(const Var& x) {
  Tensor out = Tensor::uninit(x.shape());
  {
    const float* in = x.value().data();
    float* o = out.data();
    const std::size_t n = out.size();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) o[i] = in[i] > 0.0f ? in[i] : 0.0f;
  }
  if (auto* rec = BranchRecorder::active()) {
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      word = word << 1 | (out[i] > 0.0f);
      if (i % 64 == 63) rec->mix(word);
    }
    rec->mix(word);
  }
  return make_result(std::move(out), {x}, [](Node& self) {
    const float* xv = parent(self, 0).value.data();
    float* gx = parent(self, 0).grad_buffer().data();
    const float* g = self.grad.data();
    const std::size_t n = self.grad.size();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) gx[i] += xv[i] > 0.0f ? g[i] : 0.0f;
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {x}, [](Node& self) {
    auto& gx = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  expect_rank(weight, 2, "linear weight");
  const std::size_t dout = weight.shape()[0];
  const std::size_t din = weight.shape()[1];
  const auto& xs = x.shape();
  if (xs.empty() || xs.back() != din) {
    throw ShapeError("linear: input " + shape_str(xs) + " incompatible with weight " +
                     shape_str(weight.shape()));
  }
  if (bias && bias.value().size() != dout) throw ShapeError("linear: bias size mismatch");
  const std::size_t rows = x.value().size() / din;
  Shape out_shape = xs;
  out_shape.back() = dout;
  Tensor out = Tensor::uninit(out_shape);
  if (bias) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::memcpy(out.data() + r * dout, bias.value().data(), dout * sizeof(float));
    }
  }
  gemm(false, true, rows, dout, din, 1.0f, x.value().data(), din, weight.value().data(), din,
       bias ? 1.0f : 0.0f, out.data(), dout);

  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [rows, din, dout](Node& self) {
    const float* g = self.grad.data();
    Node& xn = parent(self, 0);
    Node& wn = parent(self, 1);
    if (xn.requires_grad) {
      gemm(false, false, rows, din, dout, 1.0f, g, dout, wn.value.data(), din, 1.0f,
           xn.grad_buffer().data(), din);
    }
    if (wn.requires_grad) {
      gemm(true, false, dout, din, rows, 1.0f, g, dout, xn.value.data(), din, 1.0f,
           wn.grad_buffer().data(), din);
    }
    if (self.parents.size() > 2 && parent(self, 2).requires_grad) {
      auto& gb = parent(self, 2).grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < dout; ++o) gb[o] += g[r * dout + o];
      }
    }
  });
}

Var bmm(const Var& a, const Var& b, bool trans_b) {
  expect_rank(a, 3, "bmm lhs");
  expect_rank(b, 3, "bmm rhs");
  const std::size_t batch = a.shape()[0], m = a.shape()[1], k = a.shape()[2];
  const std::size_t n = trans_b ? b.shape()[1] : b.shape()[2];
  const std::size_t kb = trans_b ? b.shape()[2] : b.shape()[1];
  if (b.shape()[0] != batch || kb != k) {
    throw ShapeError("bmm: incompatible " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  Tensor out = Tensor::uninit({batch, m, n});
  const std::size_t ldb = trans_b ? k : n;
  for (std::size_t i = 0; i < batch; ++i) {
    gemm(false, trans_b, m, n, k, 1.0f, a.value().data() + i * m * k, k,
         b.value().data() + i * k * n, ldb, 0.0f, out.data() + i * m * n, n);
  }
  return make_result(std::move(out), {a, b}, [batch, m, n, k, trans_b, ldb](Node& self) {
    Node& an = parent(self, 0);
    Node& bn = parent(self, 1);
    for (std::size_t i = 0; i < batch; ++i) {
      const float* g = self.grad.data() + i * m * n;
      const float* av = an.value.data() + i * m * k;
      const float* bv = bn.value.data() + i * k * n;
      if (an.requires_grad) {
        // da = g * b^T (b is [K,N]) or g * b (b is [N,K])
        gemm(false, !trans_b, m, k, n, 1.0f, g, n, bv, ldb, 1.0f,
             an.grad_buffer().data() + i * m * k, k);
      }
      if (bn.requires_grad) {
        float* gb = bn.grad_buffer().data() + i * k * n;
        if (trans_b) {
          gemm(true, false, n, k, m, 1.0f, g, n, av, k, 1.0f, gb, k);  // g^T a
        } else {
          gemm(true, false, k, n, m, 1.0f, av, k, g, n, 1.0f, gb, n);  // a^T g
        }
      }
    }
  });
}

namespace {
void permute_0213_raw(const float* src, float* dst, std::size_t A, std::size_t B, std::size_t C,
                      std::size_t D, bool accumulate) {
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        const float* s = src + ((a * B + b) * C + c) * D;
        float* d = dst + ((a * C + c) * B + b) * D;
        for (std::size_t e = 0; e < D; ++e) d[e] = accumulate ? d[e] + s[e] : s[e];
      }
    }
  }
}
}  // namespace

Var permute_0213(const Var& x) {
  expect_rank(x, 4, "permute_0213");
  const auto s = x.shape();
  Tensor out = Tensor::uninit({s[0], s[2], s[1], s[3]});
  permute_0213_raw(x.value().data(), out.data(), s[0], s[1], s[2], s[3], false);
  return make_result(std::move(out), {x}, [s](Node& self) {
    // Gradient has shape [A,C,B,D]; permuting it back is the same swap.
    permute_0213_raw(self.grad.data(), parent(self, 0).grad_buffer().data(), s[0], s[2], s[1],
                     s[3], true);
  });
}

Var softmax(const Var& x, int axis) {
  const auto ax = norm_axis(axis, x.value().rank());
  const auto sp = split_at(x.shape(), ax);
  Tensor out = Tensor::uninit(x.shape());
  const float* in = x.value().data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.axis * sp.inner + i;
      float mx = -std::numeric_limits<float>::infinity();
      for (std::size_t j = 0; j < sp.axis; ++j) mx = std::max(mx, in[base + j * sp.inner]);
      double sum = 0.0;
      for (std::size_t j = 0; j < sp.axis; ++j) {
        const double e = std::exp(static_cast<double>(in[base + j * sp.inner]) - mx);
        out[base + j * sp.inner] = static_cast<float>(e);
        sum += e;
      }
      for (std::size_t j = 0; j < sp.axis; ++j) {
        out[base + j * sp.inner] = static_cast<float>(out[base + j * sp.inner] / sum);
      }
    }
  }
  return make_result(std::move(out), {x}, [sp](Node& self) {
    auto& gx = parent(self, 0).grad_buffer();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.axis * sp.inner + i;
        double dot = 0.0;
        for (std::size_t j = 0; j < sp.axis; ++j) {
          dot += static_cast<double>(g[base + j * sp.inner]) * y[base + j * sp.inner];
        }
        for (std::size_t j = 0; j < sp.axis; ++j) {
          const std::size_t idx = base + j * sp.inner;
          gx[idx] += static_cast<float>(y[idx] * (g[idx] - dot));
        }
      }
    }
  });
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  expect_rank(logits, 2, "cross_entropy");
  const std::size_t n = logits.shape()[0];
  const std::size_t c = logits.shape()[1];
  if (labels.size() != n) throw ShapeError("cross_entropy: label count mismatch");
  auto probs = std::make_shared<std::vector<double>>(n * c);
  std::vector<int> lab(labels.begin(), labels.end());
  double total = 0.0;
  const float* z = logits.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    if (lab[i] < 0 || static_cast<std::size_t>(lab[i]) >= c) {
      throw ShapeError("cross_entropy: label out of range");
    }
    const float* row = z + i * c;
    const double mx = *std::max_element(row, row + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(row[j] - mx);
      (*probs)[i * c + j] = e;
      sum += e;
    }
    for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] /= sum;
    total += (mx + std::log(sum)) - row[lab[i]];
  }
  Tensor out({1}, static_cast<float>(total / static_cast<double>(n)));
  return make_result(std::move(out), {logits}, [probs, lab = std::move(lab), n, c](Node& self) {
    auto& gz = parent(self, 0).grad_buffer();
    const double up = self.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        const double onehot = static_cast<std::size_t>(lab[i]) == j ? 1.0 : 0.0;
        gz[i * c + j] += static_cast<float>(up * ((*probs)[i * c + j] - onehot));
      }
    }
  });
}

Var dropout(const Var& x, float p, std::uint64_t seed, Mode mode) {
  if (p < 0.0f || p >= 1.0f) throw std::invalid_argument("dropout probability must be in [0, 1)");
  if (mode == Mode::eval || p == 0.0f) return x;
  Rng rng(seed);
  const float keep_scale = 1.0f / (1.0f - p);
  auto mask = std::make_shared<std::vector<float>>(x.value().size());
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.uniform() >= p ? keep_scale : 0.0f;
    out[i] *= (*mask)[i];
  }
  return make_result(std::move(out), {x}, [mask](Node& self) {
    auto& gx = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * (*mask)[i];
  });
}

namespace {

struct ConvGeom {
  std::size_t cin, h, w, cout, kh, kw, oh, ow;
  int stride, pad;
};

// Output columns [lo, hi) of one kernel tap read inside the input row.
std::pair<std::size_t, std::size_t> valid_cols(const ConvGeom& g, std::size_t kj) {
  const long off = static_cast<long>(kj) - g.pad;
  const long s = g.stride;
  const long lo = off >= 0 ? 0 : (-off + s - 1) / s;
  const long last = static_cast<long>(g.w) - 1 - off;
  const long hi = last < 0 ? 0 : std::min<long>(static_cast<long>(g.ow), last / s + 1);
  return {static_cast<std::size_t>(std::min<long>(lo, static_cast<long>(g.ow))), static_cast<std::size_t>(std::max(hi, lo))};
}

void im2col(const float* x, const ConvGeom& g, float* col) {
  const std::size_t plane = g.oh * g.ow;
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        float* dst = col + ((c * g.kh + ki) * g.kw + kj) * plane;
        const auto [lo, hi] = valid_cols(g, kj);
        const long off = static_cast<long>(kj) - g.pad;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ki);
          float* drow = dst + oy * g.ow;
          if (iy < 0 || iy >= static_cast<long>(g.h) || lo >= hi) {
            std::fill(drow, drow + g.ow, 0.0f);
            continue;
          }
          const float* srow = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          std::fill(drow, drow + lo, 0.0f);
          if (g.stride == 1) {
            std::copy(srow + static_cast<long>(lo) + off, srow + static_cast<long>(hi) + off, drow + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) drow[ox] = srow[static_cast<long>(ox) * g.stride + off];
          }
          std::fill(drow + hi, drow + g.ow, 0.0f);
        }
      }
    }
  }
}

void col2im_add(const float* col, const ConvGeom& g, float* dx) {
  const std::size_t plane = g.oh * g.ow;
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const float* src = col + ((c * g.kh + ki) * g.kw + kj) * plane;
        const auto [lo, hi] = valid_cols(g, kj);
        const long off = static_cast<long>(kj) - g.pad;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ki);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          float* drow = dx + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const float* srow = src + oy * g.ow;
          for (std::size_t ox = lo; ox < hi; ++ox) drow[static_cast<long>(ox) * g.stride + off] += srow[ox];
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  expect_rank(x, 4, "conv2d input");
  expect_rank(w, 4, "conv2d weight");
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: invalid stride/padding");
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (ws[1] != xs[1]) {
    throw ShapeError("conv2d: weight " + shape_str(ws) + " does not match input " + shape_str(xs));
  }
  if (b && b.value().size() != ws[0]) throw ShapeError("conv2d: bias size mismatch");
  const long hp = static_cast<long>(xs[2]) + 2 * pad;
  const long wp = static_cast<long>(xs[3]) + 2 * pad;
  if (static_cast<long>(ws[2]) > hp || static_cast<long>(ws[3]) > wp) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  ConvGeom g{xs[1], xs[2], xs[3], ws[0], ws[2], ws[3],
             static_cast<std::size_t>((hp - static_cast<long>(ws[2])) / stride + 1),
             static_cast<std::size_t>((wp - static_cast<long>(ws[3])) / stride + 1), stride, pad};
  const std::size_t n = xs[0];
  const std::size_t kdim = g.cin * g.kh * g.kw;
  const std::size_t plane = g.oh * g.ow;

  Tensor out = Tensor::uninit({n, g.cout, g.oh, g.ow});
  FloatBuffer col(kdim * plane);
  for (std::size_t i = 0; i < n; ++i) {
    im2col(x.value().data() + i * g.cin * g.h * g.w, g, col.data());
    float* o = out.data() + i * g.cout * plane;
    if (b) {
      for (std::size_t co = 0; co < g.cout; ++co) std::fill(o + co * plane, o + (co + 1) * plane, b.value()[co]);
    }
    gemm(false, false, g.cout, plane, kdim, 1.0f, w.value().data(), kdim, col.data(), plane,
         b ? 1.0f : 0.0f, o, plane);
  }

  std::vector<Var> inputs{x, w};
  if (b) inputs.push_back(b);
  return make_result(std::move(out), std::move(inputs), [g, n, kdim, plane](Node& self) {
    Node& xn = parent(self, 0);
    Node& wn = parent(self, 1);
    const bool has_bias = self.parents.size() > 2 && parent(self, 2).requires_grad;
    FloatBuffer col(kdim * plane);
    for (std::size_t i = 0; i < n; ++i) {
      const float* gy = self.grad.data() + i * g.cout * plane;
      if (wn.requires_grad) {
        im2col(xn.value.data() + i * g.cin * g.h * g.w, g, col.data());
        gemm(false, true, g.cout, kdim, plane, 1.0f, gy, plane, col.data(), plane, 1.0f,
             wn.grad_buffer().data(), kdim);
      }
      if (has_bias) {
        auto& gb = parent(self, 2).grad_buffer();
        for (std::size_t co = 0; co < g.cout; ++co) {
          double s = 0.0;
          for (std::size_t p = 0; p < plane; ++p) s += gy[co * plane + p];
          gb[co] += static_cast<float>(s);
        }
      }
      if (xn.requires_grad) {
        gemm(true, false, kdim, plane, g.cout, 1.0f, wn.value.data(), kdim, gy, plane, 0.0f,
             col.data(), plane);
        col2im_add(col.data(), g, xn.grad_buffer().data() + i * g.cin * g.h * g.w);
      }
    }
  });
}

Var maxpool2(const Var& x) {
  expect_rank(x, 4, "maxpool2");
  const auto& s = x.shape();
  if (s[2] < 2 || s[3] < 2) throw ShapeError("maxpool2: spatial size must be at least 2x2");
  const std::size_t nc = s[0] * s[1], h = s[2], w = s[3], oh = h / 2, ow = w / 2;
  Tensor out = Tensor::uninit({s[0], s[1], oh, ow});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.size());
  const float* in = x.value().data();
  float* po = out.data();
  std::uint32_t* pa = argmax->data();
  for (std::size_t p = 0; p < nc; ++p) {
    const float* plane = in + p * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const float* r0 = plane + 2 * oy * w;
      const float* r1 = r0 + w;
      const std::uint32_t base = static_cast<std::uint32_t>(2 * oy * w);
      const std::size_t o = (p * oh + oy) * ow;
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::uint32_t c = base + static_cast<std::uint32_t>(2 * ox);
        float best = r0[2 * ox];
        std::uint32_t bi = c;
        if (r0[2 * ox + 1] > best) best = r0[2 * ox + 1], bi = c + 1;
        if (r1[2 * ox] > best) best = r1[2 * ox], bi = c + static_cast<std::uint32_t>(w);
        if (r1[2 * ox + 1] > best) best = r1[2 * ox + 1], bi = c + static_cast<std::uint32_t>(w) + 1;
        po[o + ox] = best;
        pa[o + ox] = bi;
      }
    }
  }
  if (auto* rec = BranchRecorder::active()) {
    for (auto a : *argmax) rec->mix(a);
  }
  return make_result(std::move(out), {x}, [argmax, nc, h, w, oh, ow](Node& self) {
    auto& gx = parent(self, 0).grad_buffer();
    for (std::size_t p = 0; p < nc; ++p) {
      for (std::size_t o = 0; o < oh * ow; ++o) {
        const std::size_t idx = p * oh * ow + o;
        gx[p * h * w + (*argmax)[idx]] += self.grad[idx];
      }
    }
  });
}

Var conv1d_same(const Var& x, const Var& w, const Var& b) {
  expect_rank(x, 3, "conv1d input");
  expect_rank(w, 3, "conv1d weight");
  const std::size_t n = x.shape()[0], cin = x.shape()[1], t = x.shape()[2];
  const std::size_t cout = w.shape()[0], k = w.shape()[2];
  if (w.shape()[1] != cin) throw ShapeError("conv1d: channel mismatch");
  if (t < 1 || k < 1) throw ShapeError("conv1d: empty input or kernel");
  if (b && b.value().size() != cout) throw ShapeError("conv1d: bias size mismatch");
  const long left = static_cast<long>(k - 1) / 2;
  const std::size_t kdim = cin * k;
  auto src_index = [t, left](std::size_t pos, std::size_t j) {
    const long s = static_cast<long>(pos) + static_cast<long>(j) - left;
    return static_cast<std::size_t>(std::clamp<long>(s, 0, static_cast<long>(t) - 1));
  };
  auto fill_col = [=](const float* xi, float* col) {
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t j = 0; j < k; ++j) {
        float* dst = col + (c * k + j) * t;
        for (std::size_t p = 0; p < t; ++p) dst[p] = xi[c * t + src_index(p, j)];
      }
    }
  };

  Tensor out = Tensor::uninit({n, cout, t});
  FloatBuffer col(kdim * t);
  for (std::size_t i = 0; i < n; ++i) {
    fill_col(x.value().data() + i * cin * t, col.data());
    float* o = out.data() + i * cout * t;
    if (b) {
      for (std::size_t co = 0; co < cout; ++co) std::fill(o + co * t, o + (co + 1) * t, b.value()[co]);
    }
    gemm(false, false, cout, t, kdim, 1.0f, w.value().data(), kdim, col.data(), t,
         b ? 1.0f : 0.0f, o, t);
  }
  std::vector<Var> inputs{x, w};
  if (b) inputs.push_back(b);
  return make_result(std::move(out), std::move(inputs),
                     [=](Node& self) {
                       Node& xn = parent(self, 0);
                       Node& wn = parent(self, 1);
                       const bool has_bias = self.parents.size() > 2 && parent(self, 2).requires_grad;
                       FloatBuffer colb(kdim * t);
                       for (std::size_t i = 0; i < n; ++i) {
                         const float* gy = self.grad.data() + i * cout * t;
                         if (wn.requires_grad) {
                           fill_col(xn.value.data() + i * cin * t, colb.data());
                           gemm(false, true, cout, kdim, t, 1.0f, gy, t, colb.data(), t, 1.0f,
                                wn.grad_buffer().data(), kdim);
                         }
                         if (has_bias) {
                           auto& gb = parent(self, 2).grad_buffer();
                           for (std::size_t co = 0; co < cout; ++co) {
                             double s = 0.0;
                             for (std::size_t p = 0; p < t; ++p) s += gy[co * t + p];
                             gb[co] += static_cast<float>(s);
                           }
                         }
                         if (xn.requires_grad) {
                           gemm(true, false, kdim, t, cout, 1.0f, wn.value.data(), kdim, gy, t,
                                0.0f, colb.data(), t);
                           float* gx = xn.grad_buffer().data() + i * cin * t;
                           for (std::size_t c = 0; c < cin; ++c) {
                             for (std::size_t j = 0; j < k; ++j) {
                               const float* src = colb.data() + (c * k + j) * t;
                               for (std::size_t p = 0; p < t; ++p) gx[c * t + src_index(p, j)] += src[p];
                             }
                           }
                         }
                       }
                     });
}

BatchNormState BatchNormState::make(std::size_t channels) {
  BatchNormState s;
  s.running_mean = constant(Tensor({channels}, 0.0f));
  s.running_var = constant(Tensor({channels}, 1.0f));
  s.batches_tracked = constant(Tensor({1}, 0.0f));
  return s;
}

namespace {

float row_sum(const float* p, std::size_t n) {
  float s = 0.0f;
#pragma omp simd reduction(+ : s)
  for (std::size_t k = 0; k < n; ++k) s += p[k];
  return s;
}

float row_sq_dev(const float* p, std::size_t n, float mean) {
  float s = 0.0f;
#pragma omp simd reduction(+ : s)
  for (std::size_t k = 0; k < n; ++k) s += (p[k] - mean) * (p[k] - mean);
  return s;
}

float row_dot(const float* a, const float* b, std::size_t n) {
  float s = 0.0f;
#pragma omp simd reduction(+ : s)
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

Var batchnorm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, Mode mode) {
  const auto& s = x.shape();
  if (s.size() < 2) throw ShapeError("batchnorm: expected [N,C,...]");
  const std::size_t n = s[0], c = s[1];
  const std::size_t spatial = x.value().size() / (n * c);
  const std::size_t count = n * spatial;
  if (gamma.value().size() != c || beta.value().size() != c) {
    throw ShapeError("batchnorm: affine parameter size mismatch");
  }
  if (state.running_mean.value().size() != c) throw ShapeError("batchnorm: state size mismatch");
  const bool train = mode == Mode::train;
  if (train && count <= 1) throw BatchNormError("batchnorm: training needs more than one value per channel");
  if (!train && !state.initialized()) {
    throw BatchNormError("batchnorm: eval mode before any training step (running stats unset)");
  }

  const float* in = x.value().data();
  std::vector<float> mean(c), istd(c);
  if (train) {
    Tensor& rm = state.running_mean.mutable_value();
    Tensor& rv = state.running_var.mutable_value();
    // Cumulative average until 1/momentum batches have been seen, then EMA.
    const double t = static_cast<double>(state.batches_tracked.value()[0]) + 1.0;
    const double mom = std::max(static_cast<double>(state.momentum), 1.0 / t);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += row_sum(in + (i * c + ch) * spatial, spatial);
      const double m = sum / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) sq += row_sq_dev(in + (i * c + ch) * spatial, spatial, static_cast<float>(m));
      mean[ch] = static_cast<float>(m);
      istd[ch] = static_cast<float>(1.0 / std::sqrt(sq / static_cast<double>(count) + state.eps));
      const double unbiased = sq / static_cast<double>(count - 1);
      rm[ch] = static_cast<float>((1.0 - mom) * rm[ch] + mom * m);
      rv[ch] = static_cast<float>((1.0 - mom) * rv[ch] + mom * unbiased);
    }
    state.batches_tracked.mutable_value()[0] += 1.0f;
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean.value()[ch];
      istd[ch] = static_cast<float>(1.0 / std::sqrt(static_cast<double>(state.running_var.value()[ch]) + state.eps));
    }
  }

  const bool record = grad_enabled() && (x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
  auto xhat = std::make_shared<Tensor>();
  if (record) *xhat = Tensor::uninit(s);
  Tensor out = Tensor::uninit(s);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (i * c + ch) * spatial;
      const float m = mean[ch], is = istd[ch], ga = gamma.value()[ch], be = beta.value()[ch];
      const float* p = in + off;
      float* o = out.data() + off;
      if (record) {
        float* xh = xhat->data() + off;
        for (std::size_t k = 0; k < spatial; ++k) {
          xh[k] = (p[k] - m) * is;
          o[k] = ga * xh[k] + be;
        }
      } else {
        for (std::size_t k = 0; k < spatial; ++k) o[k] = ga * ((p[k] - m) * is) + be;
      }
    }
  }

  return make_result(std::move(out), {x, gamma, beta}, [xhat, istd, n, c, spatial, count, train](Node& self) {
    Node& xn = parent(self, 0);
    Node& gn = parent(self, 1);
    Node& bn = parent(self, 2);
    const float* g = self.grad.data();
    const float* xh = xhat->data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum_g = 0.0, sum_gx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = (i * c + ch) * spatial;
        sum_g += row_sum(g + off, spatial);
        sum_gx += row_dot(g + off, xh + off, spatial);
      }
      if (gn.requires_grad) gn.grad_buffer()[ch] += static_cast<float>(sum_gx);
      if (bn.requires_grad) bn.grad_buffer()[ch] += static_cast<float>(sum_g);
      if (!xn.requires_grad) continue;
      float* gx = xn.grad_buffer().data();
      const float k = gn.value[ch] * istd[ch];
      const float mg = train ? static_cast<float>(sum_g / static_cast<double>(count)) : 0.0f;
      const float mgx = train ? static_cast<float>(sum_gx / static_cast<double>(count)) : 0.0f;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = (i * c + ch) * spatial;
        for (std::size_t q = 0; q < spatial; ++q) gx[off + q] += k * (g[off + q] - mg - xh[off + q] * mgx);
      }
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps) {
  const std::size_t d = x.shape().back();
  if (gamma.value().size() != d || beta.value().size() != d) {
    throw ShapeError("layer_norm: parameter size mismatch");
  }
  const std::size_t rows = x.value().size() / d;
  auto xhat = std::make_shared<Tensor>(x.shape());
  auto inv_std = std::make_shared<std::vector<float>>(rows);
  Tensor out(x.shape());
  const float* in = x.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* p = in + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += p[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (p[j] - mean) * (p[j] - mean);
    var /= static_cast<double>(d);
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = static_cast<float>(istd);
    for (std::size_t j = 0; j < d; ++j) {
      const float xh = static_cast<float>((p[j] - mean) * istd);
      (*xhat)[r * d + j] = xh;
      out[r * d + j] = gamma.value()[j] * xh + beta.value()[j];
    }
  }
  return make_result(std::move(out), {x, gamma, beta}, [xhat, inv_std, rows, d](Node& self) {
    Node& xn = parent(self, 0);
    Node& gn = parent(self, 1);
    Node& bn = parent(self, 2);
    const float* g = self.grad.data();
    std::vector<double> dxh(d);
    for (std::size_t r = 0; r < rows; ++r) {
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t idx = r * d + j;
        if (gn.requires_grad) gn.grad_buffer()[j] += g[idx] * (*xhat)[idx];
        if (bn.requires_grad) bn.grad_buffer()[j] += g[idx];
        dxh[j] = static_cast<double>(g[idx]) * gn.value[j];
        m1 += dxh[j];
        m2 += dxh[j] * (*xhat)[idx];
      }
      if (!xn.requires_grad) continue;
      m1 /= static_cast<double>(d);
      m2 /= static_cast<double>(d);
      auto& gx = xn.grad_buffer();
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t idx = r * d + j;
        gx[idx] += static_cast<float>((*inv_std)[r] * (dxh[j] - m1 - (*xhat)[idx] * m2));
      }
    }
  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const auto ax = norm_axis(axis, first.size());
  Shape out_shape = first;
  out_shape[ax] = 0;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != ax && s[i] != first[i]) throw ShapeError("concat: shape mismatch off the concat axis");
    }
    out_shape[ax] += s[ax];
    sizes.push_back(s[ax]);
  }
  const auto sp = split_at(out_shape, ax);
  Tensor out = Tensor::uninit(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t chunk = sizes[k] * sp.inner;
    const float* src = parts[k].value().data();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::memcpy(out.data() + o * sp.axis * sp.inner + offset, src + o * chunk, chunk * sizeof(float));
    }
    offset += chunk;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return make_result(std::move(out), std::move(inputs), [sp, sizes](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const std::size_t chunk = sizes[k] * sp.inner;
      Node& pn = parent(self, k);
      if (pn.requires_grad) {
        auto& gp = pn.grad_buffer();
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const float* src = self.grad.data() + o * sp.axis * sp.inner + off;
          float* dst = gp.data() + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
      off += chunk;
    }
  });
}

Var mean_axis(const Var& x, int axis) {
  const auto ax = norm_axis(axis, x.value().rank());
  const auto sp = split_at(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<long>(ax));
  if (out_shape.empty()) out_shape = {1};
  Tensor out = Tensor::uninit(out_shape);
  const float* in = x.value().data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < sp.axis; ++j) s += in[(o * sp.axis + j) * sp.inner + i];
      out[o * sp.inner + i] = static_cast<float>(s / static_cast<double>(sp.axis));
    }
  }
  return make_result(std::move(out), {x}, [sp](Node& self) {
    auto& gx = parent(self, 0).grad_buffer();
    const float inv = 1.0f / static_cast<float>(sp.axis);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const float g = self.grad[o * sp.inner + i] * inv;
        for (std::size_t j = 0; j < sp.axis; ++j) gx[(o * sp.axis + j) * sp.inner + i] += g;
      }
    }
  });
}

Var weighted_sum(const Var& x, const Tensor& r) {
  if (r.size() != x.value().size()) throw ShapeError("weighted_sum: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += static_cast<double>(r[i]) * x.value()[i];
  return make_result(Tensor({1}, static_cast<float>(s)), {x}, [r](Node& self) {
    auto& gx = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[0] * r[i];
  });
}

}  // namespace vtb::nn
