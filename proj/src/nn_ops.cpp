#include "laud/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace laud {

namespace {

// Copy a (B,C,H,W) block into a zero-padded (B,C,H+2p,W+2p) buffer.
std::vector<double> pad_nchw(std::span<const double> x, int64_t B, int64_t C,
                             int64_t H, int64_t W, int64_t p) {
  const int64_t Hp = H + 2 * p, Wp = W + 2 * p;
  std::vector<double> out(static_cast<size_t>(B * C * Hp * Wp), 0.0);
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const double* src = x.data() + bc * H * W;
    double* dst = out.data() + bc * Hp * Wp + p * Wp + p;
    for (int64_t y = 0; y < H; ++y)
      std::memcpy(dst + y * Wp, src + y * W, sizeof(double) * W);
  }
  return out;
}

// All-taps-fused stride-1 3x3 path: one read-modify-write of each output
// row covers the full 3x3 stencil, which is what keeps the loop compute
// bound instead of store bound.
void corr_forward_33(const double* xp, int64_t B, int64_t Ci, int64_t Hp,
                     int64_t Wp, const double* k, int64_t Co, double* y,
                     int64_t Ho, int64_t Wo) {
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t co = 0; co < Co; ++co) {
      double* yplane = y + (b * Co + co) * Ho * Wo;
      for (int64_t ci = 0; ci < Ci; ++ci) {
        const double* xplane = xp + (b * Ci + ci) * Hp * Wp;
        const double* kb = k + (co * Ci + ci) * 9;
        const double w00 = kb[0], w01 = kb[1], w02 = kb[2];
        const double w10 = kb[3], w11 = kb[4], w12 = kb[5];
        const double w20 = kb[6], w21 = kb[7], w22 = kb[8];
        for (int64_t oy = 0; oy < Ho; ++oy) {
          const double* __restrict x0 = xplane + (oy + 0) * Wp;
          const double* __restrict x1 = xplane + (oy + 1) * Wp;
          const double* __restrict x2 = xplane + (oy + 2) * Wp;
          double* __restrict yr = yplane + oy * Wo;
          for (int64_t ox = 0; ox < Wo; ++ox)
            yr[ox] += w00 * x0[ox] + w01 * x0[ox + 1] + w02 * x0[ox + 2] +
                      w10 * x1[ox] + w11 * x1[ox + 1] + w12 * x1[ox + 2] +
                      w20 * x2[ox] + w21 * x2[ox + 1] + w22 * x2[ox + 2];
        }
      }
    }
  }
}

// y[b,co,oy,ox] = sum_{ci,ky,kx} xp[b,ci,oy*s+ky,ox*s+kx] * k[co,ci,ky,kx]
// xp is already padded. Accumulation order is fixed by the loop nest.
void corr_forward(const double* xp, int64_t B, int64_t Ci, int64_t Hp,
                  int64_t Wp, const double* k, int64_t Co, int64_t kh,
                  int64_t kw, int64_t s, double* y, int64_t Ho, int64_t Wo) {
  if (s == 1 && kh == 3 && kw == 3) {
    corr_forward_33(xp, B, Ci, Hp, Wp, k, Co, y, Ho, Wo);
    return;
  }
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t co = 0; co < Co; ++co) {
      double* yplane = y + (b * Co + co) * Ho * Wo;
      for (int64_t ci = 0; ci < Ci; ++ci) {
        const double* xplane = xp + (b * Ci + ci) * Hp * Wp;
        const double* kbase = k + (co * Ci + ci) * kh * kw;
        for (int64_t ky = 0; ky < kh; ++ky) {
          for (int64_t kx = 0; kx < kw; ++kx) {
            const double wv = kbase[ky * kw + kx];
            if (wv == 0.0) continue;
            for (int64_t oy = 0; oy < Ho; ++oy) {
              const double* xr = xplane + (oy * s + ky) * Wp + kx;
              double* yr = yplane + oy * Wo;
              if (s == 1) {
                for (int64_t ox = 0; ox < Wo; ++ox) yr[ox] += wv * xr[ox];
              } else {
                for (int64_t ox = 0; ox < Wo; ++ox) yr[ox] += wv * xr[ox * s];
              }
            }
          }
        }
      }
    }
  }
}

// dxp[b,ci,oy*s+ky,ox*s+kx] += dy[b,co,oy,ox] * k[co,ci,ky,kx]
// The scatter writes into a padded buffer the caller crops afterwards.
// For stride 1 this is the full correlation of dy with the spatially
// flipped, channel-transposed kernel, which the fused 3x3 path handles.
void scatter_grad_input(const double* dy, int64_t B, int64_t Co, int64_t Ho,
                        int64_t Wo, const double* k, int64_t Ci, int64_t kh,
                        int64_t kw, int64_t s, double* dxp, int64_t Hp,
                        int64_t Wp) {
  if (s == 1 && kh == 3 && kw == 3) {
    std::vector<double> flipped(static_cast<size_t>(Ci * Co * 9));
    for (int64_t co = 0; co < Co; ++co)
      for (int64_t ci = 0; ci < Ci; ++ci)
        for (int64_t t = 0; t < 9; ++t)
          flipped[static_cast<size_t>((ci * Co + co) * 9 + (8 - t))] =
              k[(co * Ci + ci) * 9 + t];
    // dy zero-padded by kh-1 = 2 gives exactly the Hp x Wp extent.
    std::vector<double> dyp = pad_nchw(
        std::span<const double>(dy, static_cast<size_t>(B * Co * Ho * Wo)), B,
        Co, Ho, Wo, 2);
    corr_forward_33(dyp.data(), B, Co, Ho + 4, Wo + 4, flipped.data(), Ci, dxp,
                    Hp, Wp);
    return;
  }
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t ci = 0; ci < Ci; ++ci) {
      double* xplane = dxp + (b * Ci + ci) * Hp * Wp;
      for (int64_t co = 0; co < Co; ++co) {
        const double* yplane = dy + (b * Co + co) * Ho * Wo;
        const double* kbase = k + (co * Ci + ci) * kh * kw;
        for (int64_t ky = 0; ky < kh; ++ky) {
          for (int64_t kx = 0; kx < kw; ++kx) {
            const double wv = kbase[ky * kw + kx];
            if (wv == 0.0) continue;
            for (int64_t oy = 0; oy < Ho; ++oy) {
              double* xr = xplane + (oy * s + ky) * Wp + kx;
              const double* yr = yplane + oy * Wo;
              if (s == 1) {
                for (int64_t ox = 0; ox < Wo; ++ox) xr[ox] += wv * yr[ox];
              } else {
                for (int64_t ox = 0; ox < Wo; ++ox) xr[ox * s] += wv * yr[ox];
              }
            }
          }
        }
      }
    }
  }
}

// dk[co,ci,ky,kx] = sum_{b,oy,ox} xp[b,ci,oy*s+ky,ox*s+kx] * dy[b,co,oy,ox]
void corr_grad_weight(const double* xp, int64_t B, int64_t Ci, int64_t Hp,
                      int64_t Wp, const double* dy, int64_t Co, int64_t Ho,
                      int64_t Wo, int64_t kh, int64_t kw, int64_t s,
                      double* dk) {
  if (s == 1 && kh == 3 && kw == 3) {
    // nine register accumulators per (co,ci) pair, one pass over the plane
    for (int64_t b = 0; b < B; ++b)
      for (int64_t co = 0; co < Co; ++co) {
        const double* yplane = dy + (b * Co + co) * Ho * Wo;
        for (int64_t ci = 0; ci < Ci; ++ci) {
          const double* xplane = xp + (b * Ci + ci) * Hp * Wp;
          double a00 = 0, a01 = 0, a02 = 0, a10 = 0, a11 = 0, a12 = 0,
                 a20 = 0, a21 = 0, a22 = 0;
          for (int64_t oy = 0; oy < Ho; ++oy) {
            const double* __restrict x0 = xplane + (oy + 0) * Wp;
            const double* __restrict x1 = xplane + (oy + 1) * Wp;
            const double* __restrict x2 = xplane + (oy + 2) * Wp;
            const double* __restrict yr = yplane + oy * Wo;
            for (int64_t ox = 0; ox < Wo; ++ox) {
              const double g = yr[ox];
              a00 += x0[ox] * g;
              a01 += x0[ox + 1] * g;
              a02 += x0[ox + 2] * g;
              a10 += x1[ox] * g;
              a11 += x1[ox + 1] * g;
              a12 += x1[ox + 2] * g;
              a20 += x2[ox] * g;
              a21 += x2[ox + 1] * g;
              a22 += x2[ox + 2] * g;
            }
          }
          double* kb = dk + (co * Ci + ci) * 9;
          kb[0] += a00;
          kb[1] += a01;
          kb[2] += a02;
          kb[3] += a10;
          kb[4] += a11;
          kb[5] += a12;
          kb[6] += a20;
          kb[7] += a21;
          kb[8] += a22;
        }
      }
    return;
  }
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t co = 0; co < Co; ++co) {
      const double* yplane = dy + (b * Co + co) * Ho * Wo;
      for (int64_t ci = 0; ci < Ci; ++ci) {
        const double* xplane = xp + (b * Ci + ci) * Hp * Wp;
        double* kbase = dk + (co * Ci + ci) * kh * kw;
        for (int64_t ky = 0; ky < kh; ++ky) {
          for (int64_t kx = 0; kx < kw; ++kx) {
            double acc = 0.0;
            for (int64_t oy = 0; oy < Ho; ++oy) {
              const double* xr = xplane + (oy * s + ky) * Wp + kx;
              const double* yr = yplane + oy * Wo;
              if (s == 1) {
                for (int64_t ox = 0; ox < Wo; ++ox) acc += xr[ox] * yr[ox];
              } else {
                for (int64_t ox = 0; ox < Wo; ++ox) acc += xr[ox * s] * yr[ox];
              }
            }
            kbase[ky * kw + kx] += acc;
          }
        }
      }
    }
  }
}

void crop_pad(const double* xp, int64_t B, int64_t C, int64_t Hp, int64_t Wp,
              int64_t p, double* x, int64_t H, int64_t W) {
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const double* src = xp + bc * Hp * Wp + p * Wp + p;
    double* dst = x + bc * H * W;
    for (int64_t y = 0; y < H; ++y)
      std::memcpy(dst + y * W, src + y * Wp, sizeof(double) * W);
  }
}

void check_conv_params(const Tensor& input, const ConvParams& params,
                       bool transposed) {
  if (!params.weight.defined() || !params.bias.defined())
    throw StateError("conv params missing weight or bias");
  if (params.transposed != transposed)
    throw ConfigError(transposed ? "conv2d_transposed requires transposed=true"
                                 : "conv2d requires transposed=false");
  if (params.stride < 1) throw ConfigError("conv stride must be >= 1");
  if (params.padding < 0) throw ConfigError("conv padding must be >= 0");
  const Shape& ws = params.weight.shape();
  const int64_t expected_in = transposed ? ws.b : ws.c;
  if (input.shape().c != expected_in)
    throw DimensionError("conv input shape " + input.shape().str() +
                         " incompatible with weight shape " + ws.str());
  const int64_t out_ch = transposed ? ws.c : ws.b;
  if (params.bias.numel() != out_ch)
    throw DimensionError("conv bias has " + std::to_string(params.bias.numel()) +
                         " entries, expected " + std::to_string(out_ch));
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvParams& params) {
  check_conv_params(input, params, /*transposed=*/false);
  const Shape is = input.shape();
  const Shape ws = params.weight.shape();
  const int64_t s = params.stride, p = params.padding;
  const int64_t Ho = (is.h + 2 * p - ws.h) / s + 1;
  const int64_t Wo = (is.w + 2 * p - ws.w) / s + 1;
  if (is.h + 2 * p < ws.h || is.w + 2 * p < ws.w)
    throw DimensionError("conv kernel " + ws.str() +
                         " larger than padded input " + is.str());
  const Shape os{is.b, ws.b, Ho, Wo};

  std::vector<double> xp = pad_nchw(input.data(), is.b, is.c, is.h, is.w, p);
  std::vector<double> out(static_cast<size_t>(os.numel()));
  std::span<const double> bias = params.bias.data();
  for (int64_t b = 0; b < is.b; ++b)
    for (int64_t co = 0; co < ws.b; ++co)
      std::fill_n(out.data() + (b * ws.b + co) * Ho * Wo, Ho * Wo, bias[co]);
  corr_forward(xp.data(), is.b, is.c, is.h + 2 * p, is.w + 2 * p,
               params.weight.data().data(), ws.b, ws.h, ws.w, s, out.data(),
               Ho, Wo);

  Tensor in_t = input;
  Tensor w_t = params.weight;
  Tensor b_t = params.bias;
  auto backward = [in_t, w_t, b_t, is, ws, os, s, p,
                   xp = std::move(xp)](detail::TensorNode& node) {
    const double* dy = node.grad.data();
    const int64_t Ho = os.h, Wo = os.w;
    if (in_t.requires_grad()) {
      const int64_t Hp = is.h + 2 * p, Wp = is.w + 2 * p;
      std::vector<double> dxp(static_cast<size_t>(is.b * is.c * Hp * Wp), 0.0);
      scatter_grad_input(dy, is.b, ws.b, Ho, Wo, w_t.data().data(), is.c, ws.h,
                         ws.w, s, dxp.data(), Hp, Wp);
      auto& pn = *in_t.node();
      pn.ensure_grad();
      if (p == 0) {
        for (size_t i = 0; i < dxp.size(); ++i) pn.grad[i] += dxp[i];
      } else {
        std::vector<double> dx(static_cast<size_t>(is.numel()));
        crop_pad(dxp.data(), is.b, is.c, Hp, Wp, p, dx.data(), is.h, is.w);
        accumulate_grad(pn, dx);
      }
    }
    if (w_t.requires_grad()) {
      auto& pn = *w_t.node();
      pn.ensure_grad();
      corr_grad_weight(xp.data(), is.b, is.c, is.h + 2 * p, is.w + 2 * p, dy,
                       ws.b, Ho, Wo, ws.h, ws.w, s, pn.grad.data());
    }
    if (b_t.requires_grad()) {
      auto& pn = *b_t.node();
      pn.ensure_grad();
      for (int64_t b = 0; b < is.b; ++b)
        for (int64_t co = 0; co < ws.b; ++co) {
          const double* yr = dy + (b * ws.b + co) * Ho * Wo;
          double acc = 0.0;
          for (int64_t i = 0; i < Ho * Wo; ++i) acc += yr[i];
          pn.grad[co] += acc;
        }
    }
  };
  return Tensor::make_node(os, std::move(out), {input, params.weight, params.bias},
                           std::move(backward));
}

Tensor conv2d_transposed(const Tensor& input, const ConvParams& params) {
  check_conv_params(input, params, /*transposed=*/true);
  const Shape is = input.shape();
  const Shape ws = params.weight.shape();  // (Co=input ch, Ci=output ch, kh, kw)
  const int64_t s = params.stride, p = params.padding;
  const int64_t Hf = (is.h - 1) * s + ws.h;  // full scatter extent
  const int64_t Wf = (is.w - 1) * s + ws.w;
  const int64_t Ho = Hf - 2 * p, Wo = Wf - 2 * p;
  if (Ho < 1 || Wo < 1)
    throw DimensionError("transposed conv output collapses for input " +
                         is.str() + " with weight " + ws.str());
  const Shape os{is.b, ws.c, Ho, Wo};

  std::vector<double> full(static_cast<size_t>(is.b * ws.c * Hf * Wf), 0.0);
  scatter_grad_input(input.data().data(), is.b, ws.b, is.h, is.w,
                     params.weight.data().data(), ws.c, ws.h, ws.w, s,
                     full.data(), Hf, Wf);
  std::vector<double> out(static_cast<size_t>(os.numel()));
  crop_pad(full.data(), is.b, ws.c, Hf, Wf, p, out.data(), Ho, Wo);
  full.clear();
  full.shrink_to_fit();
  std::span<const double> bias = params.bias.data();
  for (int64_t b = 0; b < is.b; ++b)
    for (int64_t co = 0; co < ws.c; ++co) {
      double* yr = out.data() + (b * ws.c + co) * Ho * Wo;
      const double bv = bias[co];
      for (int64_t i = 0; i < Ho * Wo; ++i) yr[i] += bv;
    }

  Tensor in_t = input;
  Tensor w_t = params.weight;
  Tensor b_t = params.bias;
  auto backward = [in_t, w_t, b_t, is, ws, os, s, p](detail::TensorNode& node) {
    const int64_t Ho = os.h, Wo = os.w;
    // Pad the output-side gradient once; both dx and dw read it.
    std::vector<double> dyp = pad_nchw(node.grad, is.b, ws.c, Ho, Wo, p);
    const int64_t Hp = Ho + 2 * p, Wp = Wo + 2 * p;
    if (in_t.requires_grad()) {
      auto& pn = *in_t.node();
      pn.ensure_grad();
      corr_forward(dyp.data(), is.b, ws.c, Hp, Wp, w_t.data().data(), ws.b,
                   ws.h, ws.w, s, pn.grad.data(), is.h, is.w);
    }
    if (w_t.requires_grad()) {
      auto& pn = *w_t.node();
      pn.ensure_grad();
      corr_grad_weight(dyp.data(), is.b, ws.c, Hp, Wp, in_t.data().data(),
                       ws.b, is.h, is.w, ws.h, ws.w, s, pn.grad.data());
    }
    if (b_t.requires_grad()) {
      auto& pn = *b_t.node();
      pn.ensure_grad();
      for (int64_t b = 0; b < is.b; ++b)
        for (int64_t co = 0; co < ws.c; ++co) {
          const double* yr = node.grad.data() + (b * ws.c + co) * Ho * Wo;
          double acc = 0.0;
          for (int64_t i = 0; i < Ho * Wo; ++i) acc += yr[i];
          pn.grad[co] += acc;
        }
    }
  };
  return Tensor::make_node(os, std::move(out), {input, params.weight, params.bias},
                           std::move(backward));
}

Tensor leaky_relu(const Tensor& input, double slope) {
  if (!(slope > 0.0 && slope < 1.0))
    throw ConfigError("leaky_relu slope must lie in (0,1), got " +
                      std::to_string(slope));
  std::span<const double> x = input.data();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    out[i] = x[i] > 0.0 ? x[i] : slope * x[i];

  Tensor in_t = input;
  auto backward = [in_t, slope](detail::TensorNode& node) {
    if (!in_t.requires_grad()) return;
    auto& pn = *in_t.node();
    pn.ensure_grad();
    std::span<const double> x = in_t.data();
    for (size_t i = 0; i < x.size(); ++i)
      pn.grad[i] += node.grad[i] * (x[i] > 0.0 ? 1.0 : slope);
  };
  return Tensor::make_node(input.shape(), std::move(out), {input},
                           std::move(backward));
}

Tensor concat_channels(std::span<const Tensor> inputs) {
  if (inputs.empty()) throw DimensionError("concat_channels of zero tensors");
  const Shape first = inputs[0].shape();
  int64_t total_c = 0;
  for (const Tensor& t : inputs) {
    const Shape& s = t.shape();
    if (s.b != first.b || s.h != first.h || s.w != first.w)
      throw DimensionError("concat_channels spatial mismatch: " + first.str() +
                           " vs " + s.str());
    total_c += s.c;
  }
  const Shape os{first.b, total_c, first.h, first.w};
  std::vector<double> out(static_cast<size_t>(os.numel()));
  const int64_t plane = first.h * first.w;
  for (int64_t b = 0; b < first.b; ++b) {
    int64_t coff = 0;
    for (const Tensor& t : inputs) {
      const int64_t c = t.shape().c;
      std::memcpy(out.data() + (b * total_c + coff) * plane,
                  t.data().data() + b * c * plane,
                  sizeof(double) * static_cast<size_t>(c * plane));
      coff += c;
    }
  }

  std::vector<Tensor> parents(inputs.begin(), inputs.end());
  auto backward = [parents, os, plane](detail::TensorNode& node) {
    int64_t coff = 0;
    for (const Tensor& t : parents) {
      const int64_t c = t.shape().c;
      if (t.requires_grad()) {
        auto& pn = *t.node();
        pn.ensure_grad();
        for (int64_t b = 0; b < os.b; ++b) {
          const double* src = node.grad.data() + (b * os.c + coff) * plane;
          double* dst = pn.grad.data() + b * c * plane;
          for (int64_t i = 0; i < c * plane; ++i) dst[i] += src[i];
        }
      }
      coff += c;
    }
  };
  return Tensor::make_node(os, std::move(out), std::move(parents),
                           std::move(backward));
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape()))
    throw DimensionError("add shape mismatch: " + a.shape().str() + " vs " +
                         b.shape().str());
  std::span<const double> xa = a.data(), xb = b.data();
  std::vector<double> out(xa.size());
  for (size_t i = 0; i < xa.size(); ++i) out[i] = xa[i] + xb[i];

  Tensor at = a, bt = b;
  auto backward = [at, bt](detail::TensorNode& node) {
    if (at.requires_grad()) accumulate_grad(*at.node(), node.grad);
    if (bt.requires_grad()) accumulate_grad(*bt.node(), node.grad);
  };
  return Tensor::make_node(a.shape(), std::move(out), {a, b}, std::move(backward));
}

Tensor scale(const Tensor& t, double factor) {
  std::span<const double> x = t.data();
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = factor * x[i];
  Tensor pt = t;
  auto backward = [pt, factor](detail::TensorNode& node) {
    if (!pt.requires_grad()) return;
    auto& pn = *pt.node();
    pn.ensure_grad();
    for (size_t i = 0; i < node.grad.size(); ++i)
      pn.grad[i] += factor * node.grad[i];
  };
  return Tensor::make_node(t.shape(), std::move(out), {t}, std::move(backward));
}

namespace {

Tensor mean_loss(const Tensor& pred, const Tensor& target, bool squared) {
  if (!(pred.shape() == target.shape()))
    throw DimensionError("loss shape mismatch: " + pred.shape().str() +
                         " vs " + target.shape().str());
  std::span<const double> xp = pred.data(), xt = target.data();
  const double inv_n = 1.0 / static_cast<double>(xp.size());
  double acc = 0.0;
  for (size_t i = 0; i < xp.size(); ++i) {
    const double d = xp[i] - xt[i];
    acc += squared ? d * d : std::abs(d);
  }
  std::vector<double> out{acc * inv_n};

  Tensor pt = pred, tt = target;
  auto backward = [pt, tt, inv_n, squared](detail::TensorNode& node) {
    const double g = node.grad[0] * inv_n;
    std::span<const double> xp = pt.data(), xt = tt.data();
    auto local = [&](size_t i) {
      const double d = xp[i] - xt[i];
      if (squared) return 2.0 * d;
      return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    };
    if (pt.requires_grad()) {
      auto& pn = *pt.node();
      pn.ensure_grad();
      for (size_t i = 0; i < xp.size(); ++i) pn.grad[i] += g * local(i);
    }
    if (tt.requires_grad()) {
      auto& pn = *tt.node();
      pn.ensure_grad();
      for (size_t i = 0; i < xp.size(); ++i) pn.grad[i] -= g * local(i);
    }
  };
  return Tensor::make_node(scalar_shape(), std::move(out), {pred, target},
                           std::move(backward));
}

}  // namespace

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  return mean_loss(pred, target, /*squared=*/false);
}

Tensor l2_loss(const Tensor& pred, const Tensor& target) {
  return mean_loss(pred, target, /*squared=*/true);
}

}  // namespace laud
