#pragma once

#include <array>

#include "cmbaug/autograd.hpp"

namespace cmbaug::ad {

// ---------------------------------------------------------------------------
// Direct 3D convolution on NCZYX tensors, weights (Cout, Cin, kz, ky, kx).
//
// Three kernels form a closed family under differentiation:
//   y = conv(x, w)           forward
//   xg = conv_data_bwd(g, w)   adjoint in x (also the transposed convolution)
//   wg = conv_weight_bwd(x, g) adjoint in w
// Each one's vector-Jacobian products are expressed with the other two, so
// gradients of gradients come out correct to any order.
// ---------------------------------------------------------------------------

namespace convdetail {

struct TapRange {
    long lo, hi;  // inclusive output-index range; empty if lo > hi
};

// valid output indices o such that 0 <= o*stride - pad + k < extent
inline TapRange tap_range(long extent, long out_extent, long stride, long pad, long k) {
    const long shift = pad - k;  // in = o*stride - shift... careful: in = o*stride - pad + k
    long lo = shift;             // need o*stride >= pad - k
    lo = lo <= 0 ? 0 : (lo + stride - 1) / stride;
    const long hi_num = extent - 1 + pad - k;
    if (hi_num < 0) return {1, 0};
    long hi = std::min(out_extent - 1, hi_num / stride);
    return {lo, hi};
}

inline long conv_out_extent(long in, long k, long stride, long pad) {
    const long span = in + 2 * pad - k;
    if (span < 0) throw std::invalid_argument("conv3d: kernel larger than padded input");
    return span / stride + 1;
}

}  // namespace convdetail

inline Tensor conv3d_fwd_kernel(const Tensor& x, const Tensor& w, long stride, long pad) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (xs.size() != 5 || ws.size() != 5)
        throw std::invalid_argument("conv3d: expected 5D input and weight");
    if (xs[1] != ws[1])
        throw std::invalid_argument("conv3d: channel mismatch " + shape_str(xs) + " vs " +
                                    shape_str(ws));
    const long N = xs[0], Ci = xs[1], Z = xs[2], Y = xs[3], X = xs[4];
    const long Co = ws[0], KZ = ws[2], KY = ws[3], KX = ws[4];
    const long Zo = convdetail::conv_out_extent(Z, KZ, stride, pad);
    const long Yo = convdetail::conv_out_extent(Y, KY, stride, pad);
    const long Xo = convdetail::conv_out_extent(X, KX, stride, pad);
    Tensor out(Shape{N, Co, Zo, Yo, Xo});
    const double* xp = x.data();
    const double* wp = w.data();
    double* op = out.data();
    for (long n = 0; n < N; ++n)
        for (long co = 0; co < Co; ++co) {
            double* outbase = op + ((n * Co + co) * Zo) * Yo * Xo;
            for (long ci = 0; ci < Ci; ++ci) {
                const double* xbase = xp + ((n * Ci + ci) * Z) * Y * X;
                for (long kz = 0; kz < KZ; ++kz) {
                    const auto zr = convdetail::tap_range(Z, Zo, stride, pad, kz);
                    for (long ky = 0; ky < KY; ++ky) {
                        const auto yr = convdetail::tap_range(Y, Yo, stride, pad, ky);
                        for (long kx = 0; kx < KX; ++kx) {
                            const double wv = wp[(((co * Ci + ci) * KZ + kz) * KY + ky) * KX + kx];
                            if (wv == 0.0) continue;
                            const auto xr = convdetail::tap_range(X, Xo, stride, pad, kx);
                            const long xoff = kx - pad;
                            for (long zo = zr.lo; zo <= zr.hi; ++zo) {
                                const long z = zo * stride - pad + kz;
                                for (long yo = yr.lo; yo <= yr.hi; ++yo) {
                                    const long y = yo * stride - pad + ky;
                                    const double* __restrict xrow = xbase + (z * Y + y) * X;
                                    double* __restrict orow = outbase + (zo * Yo + yo) * Xo;
                                    if (stride == 1) {
                                        for (long xo = xr.lo; xo <= xr.hi; ++xo)
                                            orow[xo] += wv * xrow[xo + xoff];
                                    } else {
                                        for (long xo = xr.lo; xo <= xr.hi; ++xo)
                                            orow[xo] += wv * xrow[xo * stride + xoff];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    return out;
}

/// Adjoint of conv3d in the input: scatters `g` (conv output shape) back
/// through `w` onto an input-shaped tensor. Doubles as transposed convolution.
inline Tensor conv3d_data_bwd_kernel(const Tensor& g, const Tensor& w, long stride, long pad,
                                     std::array<long, 3> in_spatial) {
    const Shape& gs = g.shape();
    const Shape& ws = w.shape();
    if (gs.size() != 5 || ws.size() != 5)
        throw std::invalid_argument("conv3d_data_bwd: expected 5D tensors");
    if (gs[1] != ws[0])
        throw std::invalid_argument("conv3d_data_bwd: channel mismatch");
    const long N = gs[0], Co = gs[1], Zo = gs[2], Yo = gs[3], Xo = gs[4];
    const long Ci = ws[1], KZ = ws[2], KY = ws[3], KX = ws[4];
    const long Z = in_spatial[0], Y = in_spatial[1], X = in_spatial[2];
    if (convdetail::conv_out_extent(Z, KZ, stride, pad) != Zo ||
        convdetail::conv_out_extent(Y, KY, stride, pad) != Yo ||
        convdetail::conv_out_extent(X, KX, stride, pad) != Xo)
        throw std::invalid_argument("conv3d_data_bwd: inconsistent output spatial shape");
    Tensor out(Shape{N, Ci, Z, Y, X});
    const double* gp = g.data();
    const double* wp = w.data();
    double* op = out.data();
    for (long n = 0; n < N; ++n)
        for (long co = 0; co < Co; ++co) {
            const double* gbase = gp + ((n * Co + co) * Zo) * Yo * Xo;
            for (long ci = 0; ci < Ci; ++ci) {
                double* obase = op + ((n * Ci + ci) * Z) * Y * X;
                for (long kz = 0; kz < KZ; ++kz) {
                    const auto zr = convdetail::tap_range(Z, Zo, stride, pad, kz);
                    for (long ky = 0; ky < KY; ++ky) {
                        const auto yr = convdetail::tap_range(Y, Yo, stride, pad, ky);
                        for (long kx = 0; kx < KX; ++kx) {
                            const double wv = wp[(((co * Ci + ci) * KZ + kz) * KY + ky) * KX + kx];
                            if (wv == 0.0) continue;
                            const auto xr = convdetail::tap_range(X, Xo, stride, pad, kx);
                            const long xoff = kx - pad;
                            for (long zo = zr.lo; zo <= zr.hi; ++zo) {
                                const long z = zo * stride - pad + kz;
                                for (long yo = yr.lo; yo <= yr.hi; ++yo) {
                                    const long y = yo * stride - pad + ky;
                                    double* __restrict orow = obase + (z * Y + y) * X;
                                    const double* __restrict grow = gbase + (zo * Yo + yo) * Xo;
                                    if (stride == 1) {
                                        for (long xo = xr.lo; xo <= xr.hi; ++xo)
                                            orow[xo + xoff] += wv * grow[xo];
                                    } else {
                                        for (long xo = xr.lo; xo <= xr.hi; ++xo)
                                            orow[xo * stride + xoff] += wv * grow[xo];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    return out;
}

/// Adjoint of conv3d in the weights.
inline Tensor conv3d_weight_bwd_kernel(const Tensor& x, const Tensor& g, long stride, long pad,
                                       const Shape& wshape) {
    const Shape& xs = x.shape();
    const Shape& gs = g.shape();
    if (xs.size() != 5 || gs.size() != 5 || wshape.size() != 5)
        throw std::invalid_argument("conv3d_weight_bwd: expected 5D tensors");
    const long N = xs[0], Ci = xs[1], Z = xs[2], Y = xs[3], X = xs[4];
    const long Co = gs[1], Zo = gs[2], Yo = gs[3], Xo = gs[4];
    const long KZ = wshape[2], KY = wshape[3], KX = wshape[4];
    if (wshape[0] != Co || wshape[1] != Ci || gs[0] != N)
        throw std::invalid_argument("conv3d_weight_bwd: shape mismatch");
    Tensor out(wshape);
    const double* xp = x.data();
    const double* gp = g.data();
    double* op = out.data();
    for (long co = 0; co < Co; ++co)
        for (long ci = 0; ci < Ci; ++ci)
            for (long kz = 0; kz < KZ; ++kz) {
                const auto zr = convdetail::tap_range(Z, Zo, stride, pad, kz);
                for (long ky = 0; ky < KY; ++ky) {
                    const auto yr = convdetail::tap_range(Y, Yo, stride, pad, ky);
                    for (long kx = 0; kx < KX; ++kx) {
                        const auto xr = convdetail::tap_range(X, Xo, stride, pad, kx);
                        const long xoff = kx - pad;
                        double acc = 0.0;
                        for (long n = 0; n < N; ++n) {
                            const double* xbase = xp + ((n * Ci + ci) * Z) * Y * X;
                            const double* gbase = gp + ((n * Co + co) * Zo) * Yo * Xo;
                            for (long zo = zr.lo; zo <= zr.hi; ++zo) {
                                const long z = zo * stride - pad + kz;
                                for (long yo = yr.lo; yo <= yr.hi; ++yo) {
                                    const long y = yo * stride - pad + ky;
                                    const double* __restrict xrow = xbase + (z * Y + y) * X;
                                    const double* __restrict grow = gbase + (zo * Yo + yo) * Xo;
                                    if (stride == 1) {
                                        for (long xo = xr.lo; xo <= xr.hi; ++xo)
                                            acc += grow[xo] * xrow[xo + xoff];
                                    } else {
                                        for (long xo = xr.lo; xo <= xr.hi; ++xo)
                                            acc += grow[xo] * xrow[xo * stride + xoff];
                                    }
                                }
                            }
                        }
                        op[(((co * Ci + ci) * KZ + kz) * KY + ky) * KX + kx] = acc;
                    }
                }
            }
    return out;
}

// ------------------------------ autograd ops --------------------------------

inline Var conv3d_data_bwd(const Var& g, const Var& w, long stride, long pad,
                           std::array<long, 3> in_spatial);
inline Var conv3d_weight_bwd(const Var& x, const Var& g, long stride, long pad, Shape wshape);

inline Var conv3d(const Var& x, const Var& w, long stride, long pad) {
    Tensor out = conv3d_fwd_kernel(x.value(), w.value(), stride, pad);
    const Shape& xs = x.shape();
    std::array<long, 3> in_spatial{xs[2], xs[3], xs[4]};
    Shape wshape = w.shape();
    return make_op(std::move(out), {x, w},
                   [stride, pad, in_spatial, wshape](const std::vector<Var>& ps, const Var&,
                                                     const Var& g) {
                       std::vector<Var> gs(2);
                       if (ps[0].requires_grad())
                           gs[0] = conv3d_data_bwd(g, ps[1], stride, pad, in_spatial);
                       if (ps[1].requires_grad())
                           gs[1] = conv3d_weight_bwd(ps[0], g, stride, pad, wshape);
                       return gs;
                   });
}

inline Var conv3d_data_bwd(const Var& g, const Var& w, long stride, long pad,
                           std::array<long, 3> in_spatial) {
    Tensor out = conv3d_data_bwd_kernel(g.value(), w.value(), stride, pad, in_spatial);
    Shape wshape = w.shape();
    return make_op(std::move(out), {g, w},
                   [stride, pad, wshape](const std::vector<Var>& ps, const Var&, const Var& gout) {
                       std::vector<Var> gs(2);
                       if (ps[0].requires_grad()) gs[0] = conv3d(gout, ps[1], stride, pad);
                       if (ps[1].requires_grad())
                           gs[1] = conv3d_weight_bwd(gout, ps[0], stride, pad, wshape);
                       return gs;
                   });
}

inline Var conv3d_weight_bwd(const Var& x, const Var& g, long stride, long pad, Shape wshape) {
    Tensor out = conv3d_weight_bwd_kernel(x.value(), g.value(), stride, pad, wshape);
    const Shape& xs = x.shape();
    std::array<long, 3> in_spatial{xs[2], xs[3], xs[4]};
    return make_op(std::move(out), {x, g},
                   [stride, pad, in_spatial](const std::vector<Var>& ps, const Var&,
                                             const Var& gout) {
                       std::vector<Var> gs(2);
                       if (ps[0].requires_grad())
                           gs[0] = conv3d_data_bwd(ps[1], gout, stride, pad, in_spatial);
                       if (ps[1].requires_grad()) gs[1] = conv3d(ps[0], gout, stride, pad);
                       return gs;
                   });
}

}  // namespace cmbaug::ad
