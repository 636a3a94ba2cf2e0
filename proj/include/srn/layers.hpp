#ifndef SRN_LAYERS_HPP_
#define SRN_LAYERS_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "srn/tensor.hpp"

namespace srn {

/// Shape of a 2D convolution. Stride is always 1; downsampling is done by a
/// separate pooling op. Convolution is cross-correlation (no kernel flip).
struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  int pad_h = 0;
  int pad_w = 0;
  int groups = 1;
  bool bias = true;

  void validate() const {
    if (in_channels <= 0 || out_channels <= 0 || kernel_h <= 0 || kernel_w <= 0 || groups <= 0 ||
        pad_h < 0 || pad_w < 0)
      throw ShapeError("ConvSpec: non-positive dimension (in=" + std::to_string(in_channels) +
                       " out=" + std::to_string(out_channels) + " k=" + std::to_string(kernel_h) +
                       "x" + std::to_string(kernel_w) + " groups=" + std::to_string(groups) + ")");
    if (in_channels % groups != 0 || out_channels % groups != 0)
      throw ShapeError("ConvSpec: channels not divisible by groups (in=" +
                       std::to_string(in_channels) + " out=" + std::to_string(out_channels) +
                       " groups=" + std::to_string(groups) + ")");
  }

  int group_in() const { return in_channels / groups; }
  int group_out() const { return out_channels / groups; }

  /// Weight tensor shape: (Cout, KH, KW, Cin/groups).
  std::vector<int> weight_shape() const { return {out_channels, kernel_h, kernel_w, group_in()}; }

  long weight_count() const {
    return static_cast<long>(out_channels) * group_in() * kernel_h * kernel_w;
  }

  long param_count() const { return weight_count() + (bias ? out_channels : 0); }

  int out_h(int h) const { return h + 2 * pad_h - kernel_h + 1; }
  int out_w(int w) const { return w + 2 * pad_w - kernel_w + 1; }
};

inline ConvSpec conv_spec_1x1(int in_c, int out_c) {
  ConvSpec s;
  s.in_channels = in_c;
  s.out_channels = out_c;
  return s;
}

namespace detail {

template <typename Scalar>
void check_hwc(const Tensor<Scalar>& t, const char* op) {
  if (t.rank() != 3)
    throw ShapeError(std::string(op) + ": expected (H, W, C) tensor, got " + shape_str(t.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Grouped 2D cross-correlation over an (H, W, Cin) input.
///
/// Output channel co reads only the input channels of its group; within the
/// window the inner product accumulates in double regardless of Scalar.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const ConvSpec& spec, const Tensor<Scalar>& w,
                      const Tensor<Scalar>* b) {
  detail::check_hwc(x, "conv2d");
  spec.validate();
  const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
  if (cin != spec.in_channels)
    throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels, spec expects " +
                     std::to_string(spec.in_channels));
  if (w.shape() != spec.weight_shape())
    throw ShapeError("conv2d: weight shape " + shape_str(w.shape()) + " != spec " +
                     shape_str(spec.weight_shape()));
  if (spec.bias && (b == nullptr || b->size() != spec.out_channels))
    throw ShapeError("conv2d: bias missing or wrong length for " +
                     std::to_string(spec.out_channels) + " output channels");
  const int oh = spec.out_h(h), ow = spec.out_w(wd);
  if (oh <= 0 || ow <= 0)
    throw ShapeError("conv2d: kernel " + std::to_string(spec.kernel_h) + "x" +
                     std::to_string(spec.kernel_w) + " too large for input " + shape_str(x.shape()));

  const int cg = spec.group_in();
  const int og = spec.group_out();
  Tensor<Scalar> out({oh, ow, spec.out_channels});
  const Scalar* xd = x.data();
  const Scalar* wdat = w.data();
  Scalar* od = out.data();

  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      Scalar* orow = od + (i * ow + j) * spec.out_channels;
      for (int co = 0; co < spec.out_channels; ++co) {
        const int g = co / og;
        const Scalar* wk = wdat + static_cast<long>(co) * spec.kernel_h * spec.kernel_w * cg;
        double acc = spec.bias ? static_cast<double>((*b)[co]) : 0.0;
        for (int di = 0; di < spec.kernel_h; ++di) {
          const int xi = i + di - spec.pad_h;
          if (xi < 0 || xi >= h) continue;
          for (int dj = 0; dj < spec.kernel_w; ++dj) {
            const int xj = j + dj - spec.pad_w;
            if (xj < 0 || xj >= wd) continue;
            const Scalar* xrow = xd + (xi * wd + xj) * cin + g * cg;
            const Scalar* wrow = wk + (di * spec.kernel_w + dj) * cg;
            for (int ci = 0; ci < cg; ++ci)
              acc += static_cast<double>(xrow[ci]) * static_cast<double>(wrow[ci]);
          }
        }
        orow[co] = static_cast<Scalar>(acc);
      }
    }
  }
  return out;
}

/// Backward pass of conv2d. Accumulates (+=) into gx / gw / gb; pass nullptr
/// for any gradient that is not needed.
template <typename Scalar>
void conv2d_backward(const Tensor<Scalar>& x, const ConvSpec& spec, const Tensor<Scalar>& w,
                     const Tensor<Scalar>& gout, Tensor<Scalar>* gx, Tensor<Scalar>* gw,
                     Tensor<Scalar>* gb) {
  const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
  const int oh = spec.out_h(h), ow = spec.out_w(wd);
  const int cg = spec.group_in();
  const int og = spec.group_out();

  // Reductions run in double scratch buffers, then fold into the
  // Scalar-typed gradients once.
  Eigen::ArrayXd ax = Eigen::ArrayXd::Zero(gx ? x.size() : 0);
  Eigen::ArrayXd aw = Eigen::ArrayXd::Zero(gw ? w.size() : 0);
  Eigen::ArrayXd ab = Eigen::ArrayXd::Zero(gb ? spec.out_channels : 0);

  const Scalar* xd = x.data();
  const Scalar* wdat = w.data();
  const Scalar* gd = gout.data();

  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      const Scalar* grow = gd + (i * ow + j) * spec.out_channels;
      for (int co = 0; co < spec.out_channels; ++co) {
        const double g0 = static_cast<double>(grow[co]);
        if (gb) ab[co] += g0;
        if (g0 == 0.0) continue;
        const int grp = co / og;
        const long wbase = static_cast<long>(co) * spec.kernel_h * spec.kernel_w * cg;
        for (int di = 0; di < spec.kernel_h; ++di) {
          const int xi = i + di - spec.pad_h;
          if (xi < 0 || xi >= h) continue;
          for (int dj = 0; dj < spec.kernel_w; ++dj) {
            const int xj = j + dj - spec.pad_w;
            if (xj < 0 || xj >= wd) continue;
            const long xbase = (static_cast<long>(xi) * wd + xj) * cin + grp * cg;
            const long wrow = wbase + (di * spec.kernel_w + dj) * cg;
            for (int ci = 0; ci < cg; ++ci) {
              if (gw) aw[wrow + ci] += g0 * static_cast<double>(xd[xbase + ci]);
              if (gx) ax[xbase + ci] += g0 * static_cast<double>(wdat[wrow + ci]);
            }
          }
        }
      }
    }
  }

  if (gx) gx->array() += ax.cast<Scalar>();
  if (gw) gw->array() += aw.cast<Scalar>();
  if (gb) gb->array() += ab.cast<Scalar>();
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  Tensor<Scalar> out(x.shape());
  out.array() = x.array().max(Scalar(0));
  return out;
}

template <typename Scalar>
void relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& gout, Tensor<Scalar>& gx) {
  gx.array() += (x.array() > Scalar(0)).template cast<Scalar>() * gout.array();
}

template <typename Scalar>
Scalar sigmoid_scalar(Scalar x) {
  return static_cast<Scalar>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  Tensor<Scalar> out(x.shape());
  for (int i = 0; i < x.size(); ++i) out[i] = sigmoid_scalar(x[i]);
  return out;
}

/// Backward for sigmoid given the forward *output* s: ds = s (1 - s) g.
template <typename Scalar>
void sigmoid_backward(const Tensor<Scalar>& s, const Tensor<Scalar>& gout, Tensor<Scalar>& gx) {
  gx.array() += s.array() * (Scalar(1) - s.array()) * gout.array();
}

template <typename Scalar>
Tensor<Scalar> multiply(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b))
    throw ShapeError("multiply: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  Tensor<Scalar> out(a.shape());
  out.array() = a.array() * b.array();
  return out;
}

template <typename Scalar>
void multiply_backward(const Tensor<Scalar>& a, const Tensor<Scalar>& b,
                       const Tensor<Scalar>& gout, Tensor<Scalar>* ga, Tensor<Scalar>* gb) {
  if (ga) ga->array() += gout.array() * b.array();
  if (gb) gb->array() += gout.array() * a.array();
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b))
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  Tensor<Scalar> out(a.shape());
  out.array() = a.array() + b.array();
  return out;
}

/// Convex combination alpha * a + (1 - alpha) * b.
template <typename Scalar>
Tensor<Scalar> affine_combine(const Tensor<Scalar>& a, const Tensor<Scalar>& b, double alpha) {
  if (!a.same_shape(b))
    throw ShapeError("affine_combine: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  if (alpha < 0.0 || alpha > 1.0)
    throw ConfigError("affine_combine: alpha " + std::to_string(alpha) + " outside [0, 1]");
  Tensor<Scalar> out(a.shape());
  out.array() = static_cast<Scalar>(alpha) * a.array() + static_cast<Scalar>(1.0 - alpha) * b.array();
  return out;
}

// ---------------------------------------------------------------------------
// Spatial softmax (per-channel over all locations)
// ---------------------------------------------------------------------------

/// Per-channel softmax over all spatial positions, stabilized by subtracting
/// the channel max. Every output channel sums to 1.
template <typename Scalar>
Tensor<Scalar> spatial_softmax(const Tensor<Scalar>& z) {
  detail::check_hwc(z, "spatial_softmax");
  const int h = z.dim(0), w = z.dim(1), c = z.dim(2);
  const int hw = h * w;
  Tensor<Scalar> out(z.shape());
  const Scalar* zd = z.data();
  Scalar* od = out.data();
  for (int l = 0; l < c; ++l) {
    double m = -std::numeric_limits<double>::infinity();
    for (int p = 0; p < hw; ++p) m = std::max(m, static_cast<double>(zd[p * c + l]));
    double sum = 0.0;
    for (int p = 0; p < hw; ++p) {
      const double e = std::exp(static_cast<double>(zd[p * c + l]) - m);
      od[p * c + l] = static_cast<Scalar>(e);
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (int p = 0; p < hw; ++p)
      od[p * c + l] = static_cast<Scalar>(static_cast<double>(od[p * c + l]) * inv);
  }
  return out;
}

/// Backward given the forward output a: da = a (g - <g, a>_channel).
template <typename Scalar>
void spatial_softmax_backward(const Tensor<Scalar>& a, const Tensor<Scalar>& gout,
                              Tensor<Scalar>& gz) {
  const int h = a.dim(0), w = a.dim(1), c = a.dim(2);
  const int hw = h * w;
  const Scalar* ad = a.data();
  const Scalar* gd = gout.data();
  Scalar* od = gz.data();
  for (int l = 0; l < c; ++l) {
    double dot = 0.0;
    for (int p = 0; p < hw; ++p)
      dot += static_cast<double>(gd[p * c + l]) * static_cast<double>(ad[p * c + l]);
    for (int p = 0; p < hw; ++p) {
      const double v = static_cast<double>(ad[p * c + l]) *
                       (static_cast<double>(gd[p * c + l]) - dot);
      od[p * c + l] = static_cast<Scalar>(static_cast<double>(od[p * c + l]) + v);
    }
  }
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

/// Attention-weighted feature pooling: V(l, :) = sum_{i,j} A(i,j,l) X(i,j,:).
/// Expects each attention channel to sum to 1 (softmax-normalized).
template <typename Scalar>
Tensor<Scalar> weighted_pool(const Tensor<Scalar>& x, const Tensor<Scalar>& a) {
  detail::check_hwc(x, "weighted_pool");
  detail::check_hwc(a, "weighted_pool");
  if (x.dim(0) != a.dim(0) || x.dim(1) != a.dim(1))
    throw ShapeError("weighted_pool: spatial shapes differ, X " + shape_str(x.shape()) + " vs A " +
                     shape_str(a.shape()));
  const int h = x.dim(0), w = x.dim(1), d = x.dim(2), c = a.dim(2);
  const int hw = h * w;
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(static_cast<long>(c) * d);
  const Scalar* xd = x.data();
  const Scalar* ad = a.data();
  for (int p = 0; p < hw; ++p) {
    const Scalar* xv = xd + static_cast<long>(p) * d;
    const Scalar* av = ad + static_cast<long>(p) * c;
    for (int l = 0; l < c; ++l) {
      const double al = static_cast<double>(av[l]);
      if (al == 0.0) continue;
      double* row = acc.data() + static_cast<long>(l) * d;
      for (int k = 0; k < d; ++k) row[k] += al * static_cast<double>(xv[k]);
    }
  }
  Tensor<Scalar> out({c, d});
  out.array() = acc.cast<Scalar>();
  return out;
}

template <typename Scalar>
void weighted_pool_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& a,
                            const Tensor<Scalar>& gout, Tensor<Scalar>* gx, Tensor<Scalar>* ga) {
  const int h = x.dim(0), w = x.dim(1), d = x.dim(2), c = a.dim(2);
  const int hw = h * w;
  const Scalar* xd = x.data();
  const Scalar* ad = a.data();
  const Scalar* gd = gout.data();
  for (int p = 0; p < hw; ++p) {
    const Scalar* xv = xd + static_cast<long>(p) * d;
    const Scalar* av = ad + static_cast<long>(p) * c;
    for (int l = 0; l < c; ++l) {
      const double al = static_cast<double>(av[l]);
      const Scalar* gv = gd + static_cast<long>(l) * d;
      if (gx) {
        Scalar* gxv = gx->data() + static_cast<long>(p) * d;
        for (int k = 0; k < d; ++k)
          gxv[k] = static_cast<Scalar>(static_cast<double>(gxv[k]) +
                                       al * static_cast<double>(gv[k]));
      }
      if (ga) {
        double acc = 0.0;
        for (int k = 0; k < d; ++k)
          acc += static_cast<double>(gv[k]) * static_cast<double>(xv[k]);
        Scalar* gav = ga->data() + static_cast<long>(p) * c;
        gav[l] = static_cast<Scalar>(static_cast<double>(gav[l]) + acc);
      }
    }
  }
}

/// Per-channel sum over all spatial positions: y(c) = sum_{i,j} M(i,j,c).
template <typename Scalar>
Tensor<Scalar> spatial_sum_pool(const Tensor<Scalar>& m) {
  detail::check_hwc(m, "spatial_sum_pool");
  const int hw = m.dim(0) * m.dim(1), c = m.dim(2);
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(c);
  const Scalar* md = m.data();
  for (int p = 0; p < hw; ++p)
    for (int l = 0; l < c; ++l) acc[l] += static_cast<double>(md[p * c + l]);
  Tensor<Scalar> out({c});
  out.array() = acc.cast<Scalar>();
  return out;
}

template <typename Scalar>
void spatial_sum_pool_backward(const Tensor<Scalar>& m, const Tensor<Scalar>& gout,
                               Tensor<Scalar>& gm) {
  const int hw = m.dim(0) * m.dim(1), c = m.dim(2);
  Scalar* gd = gm.data();
  for (int p = 0; p < hw; ++p)
    for (int l = 0; l < c; ++l) gd[p * c + l] += gout[l];
}

/// Plain spatial average: y(c) = (1 / HW) sum_{i,j} X(i,j,c).
template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x) {
  Tensor<Scalar> out = spatial_sum_pool(x);
  out.array() *= static_cast<Scalar>(1.0 / (x.dim(0) * x.dim(1)));
  return out;
}

template <typename Scalar>
void global_avg_pool_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& gout,
                              Tensor<Scalar>& gx) {
  const int hw = x.dim(0) * x.dim(1), c = x.dim(2);
  const Scalar inv = static_cast<Scalar>(1.0 / hw);
  Scalar* gd = gx.data();
  for (int p = 0; p < hw; ++p)
    for (int l = 0; l < c; ++l) gd[p * c + l] += gout[l] * inv;
}

/// 2x2 mean downsampling (both spatial dims must be even).
template <typename Scalar>
Tensor<Scalar> avg_pool2(const Tensor<Scalar>& x) {
  detail::check_hwc(x, "avg_pool2");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (h % 2 != 0 || w % 2 != 0)
    throw ShapeError("avg_pool2: odd spatial extent " + shape_str(x.shape()));
  Tensor<Scalar> out({h / 2, w / 2, c});
  for (int i = 0; i < h / 2; ++i)
    for (int j = 0; j < w / 2; ++j)
      for (int l = 0; l < c; ++l) {
        const double s = static_cast<double>(x(2 * i, 2 * j, l)) +
                         static_cast<double>(x(2 * i, 2 * j + 1, l)) +
                         static_cast<double>(x(2 * i + 1, 2 * j, l)) +
                         static_cast<double>(x(2 * i + 1, 2 * j + 1, l));
        out(i, j, l) = static_cast<Scalar>(0.25 * s);
      }
  return out;
}

template <typename Scalar>
void avg_pool2_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& gout, Tensor<Scalar>& gx) {
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  for (int i = 0; i < h / 2; ++i)
    for (int j = 0; j < w / 2; ++j)
      for (int l = 0; l < c; ++l) {
        const Scalar g = gout(i, j, l) * static_cast<Scalar>(0.25);
        gx(2 * i, 2 * j, l) += g;
        gx(2 * i, 2 * j + 1, l) += g;
        gx(2 * i + 1, 2 * j, l) += g;
        gx(2 * i + 1, 2 * j + 1, l) += g;
      }
}

// ---------------------------------------------------------------------------
// Fully connected
// ---------------------------------------------------------------------------

/// y(c) = W(c, :) . x + b(c), with W stored row-major (C, D).
template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& b) {
  if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0) || b.size() != w.dim(0))
    throw ShapeError("linear: W " + shape_str(w.shape()) + ", x " + shape_str(x.shape()) +
                     ", b " + shape_str(b.shape()));
  const int c = w.dim(0), d = w.dim(1);
  Tensor<Scalar> out({c});
  const Scalar* wd = w.data();
  const Scalar* xd = x.data();
  for (int l = 0; l < c; ++l) {
    const Scalar* row = wd + static_cast<long>(l) * d;
    double acc = static_cast<double>(b[l]);
    for (int k = 0; k < d; ++k)
      acc += static_cast<double>(row[k]) * static_cast<double>(xd[k]);
    out[l] = static_cast<Scalar>(acc);
  }
  return out;
}

template <typename Scalar>
void linear_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& gout,
                     Tensor<Scalar>* gx, Tensor<Scalar>* gw, Tensor<Scalar>* gb) {
  const int c = w.dim(0), d = w.dim(1);
  const Scalar* wd = w.data();
  const Scalar* xd = x.data();
  Eigen::ArrayXd axd = Eigen::ArrayXd::Zero(gx ? d : 0);
  for (int l = 0; l < c; ++l) {
    const double g = static_cast<double>(gout[l]);
    if (gb) (*gb)[l] = static_cast<Scalar>(static_cast<double>((*gb)[l]) + g);
    if (g == 0.0) continue;
    const Scalar* row = wd + static_cast<long>(l) * d;
    if (gw) {
      Scalar* grow = gw->data() + static_cast<long>(l) * d;
      for (int k = 0; k < d; ++k)
        grow[k] = static_cast<Scalar>(static_cast<double>(grow[k]) +
                                      g * static_cast<double>(xd[k]));
    }
    if (gx)
      for (int k = 0; k < d; ++k) axd[k] += g * static_cast<double>(row[k]);
  }
  if (gx) gx->array() += axd.cast<Scalar>();
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Mean binary cross-entropy over active labels, computed in logit space:
/// l = max(z, 0) - z y + log(1 + exp(-|z|)), averaged over entries where
/// mask is nonzero (all entries when mask is null). Returns a scalar tensor.
template <typename Scalar>
Tensor<Scalar> bce_loss(const Tensor<Scalar>& logits, const Tensor<Scalar>& targets,
                        const Tensor<Scalar>* mask) {
  if (!logits.same_shape(targets))
    throw ShapeError("bce_loss: logits " + shape_str(logits.shape()) + " vs targets " +
                     shape_str(targets.shape()));
  if (mask && !mask->same_shape(logits))
    throw ShapeError("bce_loss: mask " + shape_str(mask->shape()) + " vs logits " +
                     shape_str(logits.shape()));
  double sum = 0.0;
  int active = 0;
  for (int i = 0; i < logits.size(); ++i) {
    if (mask && (*mask)[i] == Scalar(0)) continue;
    const double z = static_cast<double>(logits[i]);
    const double y = static_cast<double>(targets[i]);
    sum += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    ++active;
  }
  Tensor<Scalar> out({1});
  out[0] = active > 0 ? static_cast<Scalar>(sum / active) : Scalar(0);
  return out;
}

template <typename Scalar>
void bce_loss_backward(const Tensor<Scalar>& logits, const Tensor<Scalar>& targets,
                       const Tensor<Scalar>* mask, const Tensor<Scalar>& gout,
                       Tensor<Scalar>& glogits) {
  int active = 0;
  for (int i = 0; i < logits.size(); ++i)
    if (!mask || (*mask)[i] != Scalar(0)) ++active;
  if (active == 0) return;
  const double scale = static_cast<double>(gout[0]) / active;
  for (int i = 0; i < logits.size(); ++i) {
    if (mask && (*mask)[i] == Scalar(0)) continue;
    const double z = static_cast<double>(logits[i]);
    const double y = static_cast<double>(targets[i]);
    const double s = 1.0 / (1.0 + std::exp(-z));
    glogits[i] = static_cast<Scalar>(static_cast<double>(glogits[i]) + scale * (s - y));
  }
}

// ---------------------------------------------------------------------------
// Direct attention readout (per-label classifier on pooled features)
// ---------------------------------------------------------------------------

/// Per-label logits from attention-pooled features: y(l) = W(l,:) . v_l + b(l)
/// where v_l = sum_{i,j} A(i,j,l) X(i,j,:). Algebraically equal to spatially
/// sum-pooling (conv1x1(X; W, b) * A); the two routes cross-check each other.
template <typename Scalar>
Tensor<Scalar> attention_logits_via_pooling(const Tensor<Scalar>& x, const Tensor<Scalar>& a,
                                            const Tensor<Scalar>& w, const Tensor<Scalar>& b) {
  const Tensor<Scalar> v = weighted_pool(x, a);  // (C, D)
  const int c = v.dim(0), d = v.dim(1);
  if (w.rank() != 2 || w.dim(0) != c || w.dim(1) != d || b.size() != c)
    throw ShapeError("attention_logits_via_pooling: W " + shape_str(w.shape()) + " vs V " +
                     shape_str(v.shape()));
  Tensor<Scalar> out({c});
  for (int l = 0; l < c; ++l) {
    double acc = static_cast<double>(b[l]);
    for (int k = 0; k < d; ++k)
      acc += static_cast<double>(w(l, k)) * static_cast<double>(v(l, k));
    out[l] = static_cast<Scalar>(acc);
  }
  return out;
}

}  // namespace srn

#endif  // SRN_LAYERS_HPP_
