#include "tcf/nn/tape.hpp"

#include <algorithm>
#include <cmath>

#include "tcf/error.hpp"

namespace tcf::nn {

namespace {

long prod(const std::vector<long>& d, std::size_t from, std::size_t to) {
    long p = 1;
    for (std::size_t i = from; i < to; ++i) p *= d[i];
    return p;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ValidationError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace

Tape::NodeId Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) {
        n.grad = Tensor(n.value.dims());
        n.back = std::move(back);
    }
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::leaf(Tensor value, bool requires_grad) { return push(std::move(value), requires_grad, {}); }

Tape::NodeId Tape::param(Param& p) {
    Param* ptr = &p;
    const NodeId id = push(p.value, true, {});
    node(id).back = [id, ptr](Tape& t) {
        const Tensor& g = t.grad(id);
        for (long i = 0; i < g.numel(); ++i) ptr->grad[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)];
    };
    return id;
}

// ------------------------------------------------------------- elementwise

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    check_same_shape(value(a), value(b), "add");
    Tensor out(value(a).dims());
    for (long i = 0; i < out.numel(); ++i) out[i] = value(a)[i] + value(b)[i];
    const bool rg = requires_grad(a) || requires_grad(b);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a, b](Tape& t) {
            const Tensor& g = t.grad(id);
            for (NodeId in : {a, b})
                if (t.requires_grad(in)) {
                    Tensor& gi = t.grad(in);
                    for (long i = 0; i < g.numel(); ++i) gi[i] += g[i];
                }
        };
    return id;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    check_same_shape(value(a), value(b), "sub");
    Tensor out(value(a).dims());
    for (long i = 0; i < out.numel(); ++i) out[i] = value(a)[i] - value(b)[i];
    const bool rg = requires_grad(a) || requires_grad(b);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a, b](Tape& t) {
            const Tensor& g = t.grad(id);
            if (t.requires_grad(a)) {
                Tensor& ga = t.grad(a);
                for (long i = 0; i < g.numel(); ++i) ga[i] += g[i];
            }
            if (t.requires_grad(b)) {
                Tensor& gb = t.grad(b);
                for (long i = 0; i < g.numel(); ++i) gb[i] -= g[i];
            }
        };
    return id;
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    check_same_shape(value(a), value(b), "mul");
    Tensor out(value(a).dims());
    for (long i = 0; i < out.numel(); ++i) out[i] = value(a)[i] * value(b)[i];
    const bool rg = requires_grad(a) || requires_grad(b);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a, b](Tape& t) {
            const Tensor& g = t.grad(id);
            if (t.requires_grad(a)) {
                Tensor& ga = t.grad(a);
                const Tensor& vb = t.value(b);
                for (long i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb[i];
            }
            if (t.requires_grad(b)) {
                Tensor& gb = t.grad(b);
                const Tensor& va = t.value(a);
                for (long i = 0; i < g.numel(); ++i) gb[i] += g[i] * va[i];
            }
        };
    return id;
}

Tape::NodeId Tape::scale(NodeId a, double s) {
    Tensor out(value(a).dims());
    for (long i = 0; i < out.numel(); ++i) out[i] = value(a)[i] * s;
    const bool rg = requires_grad(a);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a, s](Tape& t) {
            const Tensor& g = t.grad(id);
            Tensor& ga = t.grad(a);
            for (long i = 0; i < g.numel(); ++i) ga[i] += g[i] * s;
        };
    return id;
}

Tape::NodeId Tape::add_scalar(NodeId a, double c) {
    Tensor out(value(a).dims());
    for (long i = 0; i < out.numel(); ++i) out[i] = value(a)[i] + c;
    const bool rg = requires_grad(a);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a](Tape& t) {
            const Tensor& g = t.grad(id);
            Tensor& ga = t.grad(a);
            for (long i = 0; i < g.numel(); ++i) ga[i] += g[i];
        };
    return id;
}

Tape::NodeId Tape::relu(NodeId a) {
    Tensor out(value(a).dims());
    for (long i = 0; i < out.numel(); ++i) out[i] = value(a)[i] > 0.0 ? value(a)[i] : 0.0;
    const bool rg = requires_grad(a);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a](Tape& t) {
            const Tensor& g = t.grad(id);
            const Tensor& va = t.value(a);
            Tensor& ga = t.grad(a);
            for (long i = 0; i < g.numel(); ++i)
                if (va[i] > 0.0) ga[i] += g[i];
        };
    return id;
}

Tape::NodeId Tape::tanh_act(NodeId a) {
    Tensor out(value(a).dims());
    for (long i = 0; i < out.numel(); ++i) out[i] = std::tanh(value(a)[i]);
    const bool rg = requires_grad(a);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a](Tape& t) {
            const Tensor& g = t.grad(id);
            const Tensor& y = t.value(id);
            Tensor& ga = t.grad(a);
            for (long i = 0; i < g.numel(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        };
    return id;
}

Tape::NodeId Tape::sigmoid_act(NodeId a) {
    Tensor out(value(a).dims());
    for (long i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-value(a)[i]));
    const bool rg = requires_grad(a);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a](Tape& t) {
            const Tensor& g = t.grad(id);
            const Tensor& y = t.value(id);
            Tensor& ga = t.grad(a);
            for (long i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
        };
    return id;
}

Tape::NodeId Tape::log_act(NodeId a) {
    Tensor out(value(a).dims());
    for (long i = 0; i < out.numel(); ++i) {
        if (!(value(a)[i] > 0.0)) throw ComputeError("log of non-positive value");
        out[i] = std::log(value(a)[i]);
    }
    const bool rg = requires_grad(a);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a](Tape& t) {
            const Tensor& g = t.grad(id);
            const Tensor& va = t.value(a);
            Tensor& ga = t.grad(a);
            for (long i = 0; i < g.numel(); ++i) ga[i] += g[i] / va[i];
        };
    return id;
}

Tape::NodeId Tape::clamp(NodeId a, double lo, double hi) {
    Tensor out(value(a).dims());
    for (long i = 0; i < out.numel(); ++i) out[i] = std::min(hi, std::max(lo, value(a)[i]));
    const bool rg = requires_grad(a);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a, lo, hi](Tape& t) {
            const Tensor& g = t.grad(id);
            const Tensor& va = t.value(a);
            Tensor& ga = t.grad(a);
            for (long i = 0; i < g.numel(); ++i)
                if (va[i] > lo && va[i] < hi) ga[i] += g[i];
        };
    return id;
}

// ------------------------------------------------------------------ shape

Tape::NodeId Tape::reshape(NodeId a, std::vector<long> dims) {
    Tensor out(dims, value(a).vec());
    const bool rg = requires_grad(a);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a](Tape& t) {
            const Tensor& g = t.grad(id);
            Tensor& ga = t.grad(a);
            for (long i = 0; i < g.numel(); ++i) ga[i] += g[i];
        };
    return id;
}

Tape::NodeId Tape::concat(const std::vector<NodeId>& xs, int axis) {
    if (xs.empty()) throw ValidationError("concat of zero tensors");
    const auto& d0 = value(xs[0]).dims();
    const std::size_t ax = static_cast<std::size_t>(axis);
    if (ax >= d0.size()) throw ValidationError("concat axis out of range");
    std::vector<long> out_dims = d0;
    long axis_total = 0;
    for (NodeId x : xs) {
        const auto& d = value(x).dims();
        if (d.size() != d0.size()) throw ValidationError("concat rank mismatch");
        for (std::size_t i = 0; i < d.size(); ++i)
            if (i != ax && d[i] != d0[i]) throw ValidationError("concat dim mismatch");
        axis_total += d[ax];
    }
    out_dims[ax] = axis_total;
    Tensor out(out_dims);
    const long outer = prod(out_dims, 0, ax);
    const long inner = prod(out_dims, ax + 1, out_dims.size());
    long offset = 0;  // running offset along the axis
    std::vector<long> offsets;
    for (NodeId x : xs) {
        offsets.push_back(offset);
        const long alen = value(x).dim(ax);
        const double* src = value(x).data();
        for (long o = 0; o < outer; ++o)
            std::copy(src + o * alen * inner, src + (o + 1) * alen * inner,
                      out.data() + (o * axis_total + offset) * inner);
        offset += alen;
    }
    bool rg = false;
    for (NodeId x : xs) rg = rg || requires_grad(x);
    const NodeId id = push(std::move(out), rg, {});
    if (rg) {
        std::vector<NodeId> inputs = xs;
        node(id).back = [id, inputs, offsets, ax](Tape& t) {
            const Tensor& g = t.grad(id);
            const auto& gd = g.dims();
            const long outer2 = prod(gd, 0, ax);
            const long inner2 = prod(gd, ax + 1, gd.size());
            const long axis_total2 = gd[ax];
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                if (!t.requires_grad(inputs[k])) continue;
                Tensor& gi = t.grad(inputs[k]);
                const long alen = t.value(inputs[k]).dim(ax);
                for (long o = 0; o < outer2; ++o) {
                    const double* gsrc = g.data() + (o * axis_total2 + offsets[k]) * inner2;
                    double* gdst = gi.data() + o * alen * inner2;
                    for (long i = 0; i < alen * inner2; ++i) gdst[i] += gsrc[i];
                }
            }
        };
    }
    return id;
}

Tape::NodeId Tape::slice(NodeId a, int axis, long start, long len) {
    const auto& d = value(a).dims();
    const std::size_t ax = static_cast<std::size_t>(axis);
    if (ax >= d.size()) throw ValidationError("slice axis out of range");
    if (start < 0 || len < 0 || start + len > d[ax]) throw ValidationError("slice range out of bounds");
    std::vector<long> out_dims = d;
    out_dims[ax] = len;
    Tensor out(out_dims);
    const long outer = prod(d, 0, ax);
    const long inner = prod(d, ax + 1, d.size());
    const double* src = value(a).data();
    for (long o = 0; o < outer; ++o)
        std::copy(src + (o * d[ax] + start) * inner, src + (o * d[ax] + start + len) * inner,
                  out.data() + o * len * inner);
    const bool rg = requires_grad(a);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a, ax, start, len](Tape& t) {
            const Tensor& g = t.grad(id);
            Tensor& ga = t.grad(a);
            const auto& ad = t.value(a).dims();
            const long outer2 = prod(ad, 0, ax);
            const long inner2 = prod(ad, ax + 1, ad.size());
            for (long o = 0; o < outer2; ++o) {
                const double* gsrc = g.data() + o * len * inner2;
                double* gdst = ga.data() + (o * ad[ax] + start) * inner2;
                for (long i = 0; i < len * inner2; ++i) gdst[i] += gsrc[i];
            }
        };
    return id;
}

Tape::NodeId Tape::detach(NodeId a) { return leaf(value(a), false); }

// ------------------------------------------------------------------ linear

Tape::NodeId Tape::linear(NodeId x, NodeId W, NodeId bias) {
    const auto& xd = value(x).dims();
    const auto& wd = value(W).dims();
    if (xd.size() != 2 || wd.size() != 2 || xd[1] != wd[1])
        throw ValidationError("linear: x " + value(x).shape_str() + " W " + value(W).shape_str());
    const long n = xd[0], in = xd[1], out_f = wd[0];
    if (bias >= 0 && (value(bias).rank() != 1 || value(bias).dim(0) != out_f))
        throw ValidationError("linear: bad bias shape");
    Tensor out({n, out_f});
    const double* xv = value(x).data();
    const double* wv = value(W).data();
    const double* bv = bias >= 0 ? value(bias).data() : nullptr;
#pragma omp parallel for schedule(static)
    for (long r = 0; r < n; ++r) {
        const double* xr = xv + r * in;
        double* orow = out.data() + r * out_f;
        for (long o = 0; o < out_f; ++o) {
            const double* wr = wv + o * in;
            double acc = bv ? bv[o] : 0.0;
            for (long i = 0; i < in; ++i) acc += xr[i] * wr[i];
            orow[o] = acc;
        }
    }
    const bool rg = requires_grad(x) || requires_grad(W) || (bias >= 0 && requires_grad(bias));
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, x, W, bias, n, in, out_f](Tape& t) {
            const double* g = t.grad(id).data();
            if (t.requires_grad(x)) {
                double* gx = t.grad(x).data();
                const double* wv2 = t.value(W).data();
#pragma omp parallel for schedule(static)
                for (long r = 0; r < n; ++r) {
                    double* gxr = gx + r * in;
                    const double* gr = g + r * out_f;
                    for (long o = 0; o < out_f; ++o) {
                        const double go = gr[o];
                        const double* wr = wv2 + o * in;
                        for (long i = 0; i < in; ++i) gxr[i] += go * wr[i];
                    }
                }
            }
            if (t.requires_grad(W)) {
                double* gw = t.grad(W).data();
                const double* xv2 = t.value(x).data();
#pragma omp parallel for schedule(static)
                for (long o = 0; o < out_f; ++o) {
                    double* gwr = gw + o * in;
                    for (long r = 0; r < n; ++r) {
                        const double go = g[r * out_f + o];
                        const double* xr = xv2 + r * in;
                        for (long i = 0; i < in; ++i) gwr[i] += go * xr[i];
                    }
                }
            }
            if (bias >= 0 && t.requires_grad(bias)) {
                double* gb = t.grad(bias).data();
                for (long r = 0; r < n; ++r)
                    for (long o = 0; o < out_f; ++o) gb[o] += g[r * out_f + o];
            }
        };
    return id;
}

// ------------------------------------------------------------ convolutions

Tape::NodeId Tape::conv3d(NodeId x, NodeId w, NodeId bias, int sd, int sh, int sw, int pd, int ph, int pw) {
    const auto& xd = value(x).dims();
    const auto& wd = value(w).dims();
    if (xd.size() != 5 || wd.size() != 5 || xd[1] != wd[1])
        throw ValidationError("conv3d: x " + value(x).shape_str() + " w " + value(w).shape_str());
    const long N = xd[0], Ci = xd[1], D = xd[2], H = xd[3], W_ = xd[4];
    const long Co = wd[0], kd = wd[2], kh = wd[3], kw = wd[4];
    const long Do = (D + 2 * pd - kd) / sd + 1;
    const long Ho = (H + 2 * ph - kh) / sh + 1;
    const long Wo = (W_ + 2 * pw - kw) / sw + 1;
    if (Do < 1 || Ho < 1 || Wo < 1) throw ValidationError("conv3d: output would be empty");
    Tensor out({N, Co, Do, Ho, Wo});
    const double* xv = value(x).data();
    const double* wv = value(w).data();
    const double* bv = bias >= 0 ? value(bias).data() : nullptr;
#pragma omp parallel for schedule(static) collapse(2)
    for (long n = 0; n < N; ++n)
        for (long co = 0; co < Co; ++co) {
            double* op = out.data() + ((n * Co + co) * Do) * Ho * Wo;
            for (long zo = 0; zo < Do; ++zo)
                for (long yo = 0; yo < Ho; ++yo)
                    for (long xo = 0; xo < Wo; ++xo) {
                        double acc = bv ? bv[co] : 0.0;
                        for (long ci = 0; ci < Ci; ++ci)
                            for (long a = 0; a < kd; ++a) {
                                const long z = zo * sd + a - pd;
                                if (z < 0 || z >= D) continue;
                                for (long b = 0; b < kh; ++b) {
                                    const long y = yo * sh + b - ph;
                                    if (y < 0 || y >= H) continue;
                                    const double* xrow = xv + (((n * Ci + ci) * D + z) * H + y) * W_;
                                    const double* wrow = wv + (((co * Ci + ci) * kd + a) * kh + b) * kw;
                                    for (long c = 0; c < kw; ++c) {
                                        const long xx = xo * sw + c - pw;
                                        if (xx < 0 || xx >= W_) continue;
                                        acc += xrow[xx] * wrow[c];
                                    }
                                }
                            }
                        op[(zo * Ho + yo) * Wo + xo] = acc;
                    }
        }
    const bool rg = requires_grad(x) || requires_grad(w) || (bias >= 0 && requires_grad(bias));
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [=](Tape& t) {
            const double* g = t.grad(id).data();
            const double* xv2 = t.value(x).data();
            const double* wv2 = t.value(w).data();
            if (t.requires_grad(x)) {
                double* gx = t.grad(x).data();
#pragma omp parallel for schedule(static)
                for (long n = 0; n < N; ++n)
                    for (long co = 0; co < Co; ++co)
                        for (long zo = 0; zo < Do; ++zo)
                            for (long yo = 0; yo < Ho; ++yo)
                                for (long xo = 0; xo < Wo; ++xo) {
                                    const double go = g[(((n * Co + co) * Do + zo) * Ho + yo) * Wo + xo];
                                    if (go == 0.0) continue;
                                    for (long ci = 0; ci < Ci; ++ci)
                                        for (long a = 0; a < kd; ++a) {
                                            const long z = zo * sd + a - pd;
                                            if (z < 0 || z >= D) continue;
                                            for (long b = 0; b < kh; ++b) {
                                                const long y = yo * sh + b - ph;
                                                if (y < 0 || y >= H) continue;
                                                double* gxr = gx + (((n * Ci + ci) * D + z) * H + y) * W_;
                                                const double* wrow = wv2 + (((co * Ci + ci) * kd + a) * kh + b) * kw;
                                                for (long c = 0; c < kw; ++c) {
                                                    const long xx = xo * sw + c - pw;
                                                    if (xx < 0 || xx >= W_) continue;
                                                    gxr[xx] += go * wrow[c];
                                                }
                                            }
                                        }
                                }
            }
            if (t.requires_grad(w)) {
                double* gw = t.grad(w).data();
#pragma omp parallel for schedule(static)
                for (long co = 0; co < Co; ++co)
                    for (long ci = 0; ci < Ci; ++ci)
                        for (long a = 0; a < kd; ++a)
                            for (long b = 0; b < kh; ++b)
                                for (long c = 0; c < kw; ++c) {
                                    double acc = 0.0;
                                    for (long n = 0; n < N; ++n)
                                        for (long zo = 0; zo < Do; ++zo) {
                                            const long z = zo * sd + a - pd;
                                            if (z < 0 || z >= D) continue;
                                            for (long yo = 0; yo < Ho; ++yo) {
                                                const long y = yo * sh + b - ph;
                                                if (y < 0 || y >= H) continue;
                                                const double* grow =
                                                    g + (((n * Co + co) * Do + zo) * Ho + yo) * Wo;
                                                const double* xrow =
                                                    xv2 + (((n * Ci + ci) * D + z) * H + y) * W_;
                                                for (long xo = 0; xo < Wo; ++xo) {
                                                    const long xx = xo * sw + c - pw;
                                                    if (xx < 0 || xx >= W_) continue;
                                                    acc += grow[xo] * xrow[xx];
                                                }
                                            }
                                        }
                                    gw[(((co * Ci + ci) * kd + a) * kh + b) * kw + c] += acc;
                                }
            }
            if (bias >= 0 && t.requires_grad(bias)) {
                double* gb = t.grad(bias).data();
                for (long n = 0; n < N; ++n)
                    for (long co = 0; co < Co; ++co) {
                        const double* grow = g + ((n * Co + co) * Do) * Ho * Wo;
                        double acc = 0.0;
                        for (long i = 0; i < Do * Ho * Wo; ++i) acc += grow[i];
                        gb[co] += acc;
                    }
            }
        };
    return id;
}

Tape::NodeId Tape::conv2d(NodeId x, NodeId w, NodeId bias, int sh, int sw, int ph, int pw) {
    // Implemented as a depth-1 conv3d to share the kernel code.
    const auto& xd = value(x).dims();
    const auto& wd = value(w).dims();
    if (xd.size() != 4 || wd.size() != 4) throw ValidationError("conv2d: expects [N,C,H,W] and [Co,Ci,kh,kw]");
    const NodeId x5 = reshape(x, {xd[0], xd[1], 1, xd[2], xd[3]});
    const NodeId w5 = reshape(w, {wd[0], wd[1], 1, wd[2], wd[3]});
    const NodeId y5 = conv3d(x5, w5, bias, 1, sh, sw, 0, ph, pw);
    const auto& yd = value(y5).dims();
    return reshape(y5, {yd[0], yd[1], yd[3], yd[4]});
}

Tape::NodeId Tape::upsample3d_nearest(NodeId x, int fd, int fh, int fw) {
    const auto& xd = value(x).dims();
    if (xd.size() != 5) throw ValidationError("upsample3d: expects [N,C,D,H,W]");
    const long N = xd[0], C = xd[1], D = xd[2], H = xd[3], W_ = xd[4];
    const long Do = D * fd, Ho = H * fh, Wo = W_ * fw;
    Tensor out({N, C, Do, Ho, Wo});
    const double* xv = value(x).data();
    for (long nc = 0; nc < N * C; ++nc)
        for (long z = 0; z < Do; ++z)
            for (long y = 0; y < Ho; ++y) {
                const double* xrow = xv + ((nc * D + z / fd) * H + y / fh) * W_;
                double* orow = out.data() + ((nc * Do + z) * Ho + y) * Wo;
                for (long xx = 0; xx < Wo; ++xx) orow[xx] = xrow[xx / fw];
            }
    const bool rg = requires_grad(x);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [=](Tape& t) {
            const double* g = t.grad(id).data();
            double* gx = t.grad(x).data();
            for (long nc = 0; nc < N * C; ++nc)
                for (long z = 0; z < Do; ++z)
                    for (long y = 0; y < Ho; ++y) {
                        double* gxr = gx + ((nc * D + z / fd) * H + y / fh) * W_;
                        const double* grow = g + ((nc * Do + z) * Ho + y) * Wo;
                        for (long xx = 0; xx < Wo; ++xx) gxr[xx / fw] += grow[xx];
                    }
        };
    return id;
}

Tape::NodeId Tape::crop3d(NodeId x, long d, long h, long w) {
    const auto& xd = value(x).dims();
    if (xd.size() != 5) throw ValidationError("crop3d: expects [N,C,D,H,W]");
    const long N = xd[0], C = xd[1], D = xd[2], H = xd[3], W_ = xd[4];
    if (d > D || h > H || w > W_) throw ValidationError("crop3d: target larger than input");
    Tensor out({N, C, d, h, w});
    const double* xv = value(x).data();
    for (long nc = 0; nc < N * C; ++nc)
        for (long z = 0; z < d; ++z)
            for (long y = 0; y < h; ++y) {
                const double* xrow = xv + ((nc * D + z) * H + y) * W_;
                double* orow = out.data() + ((nc * d + z) * h + y) * w;
                std::copy(xrow, xrow + w, orow);
            }
    const bool rg = requires_grad(x);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [=](Tape& t) {
            const double* g = t.grad(id).data();
            double* gx = t.grad(x).data();
            for (long nc = 0; nc < N * C; ++nc)
                for (long z = 0; z < d; ++z)
                    for (long y = 0; y < h; ++y) {
                        const double* grow = g + ((nc * d + z) * h + y) * w;
                        double* gxr = gx + ((nc * D + z) * H + y) * W_;
                        for (long xx = 0; xx < w; ++xx) gxr[xx] += grow[xx];
                    }
        };
    return id;
}

Tape::NodeId Tape::global_avg_pool(NodeId x) {
    const auto& xd = value(x).dims();
    if (xd.size() < 3) throw ValidationError("global_avg_pool: expects [N,C,spatial...]");
    const long N = xd[0], C = xd[1];
    const long spatial = prod(xd, 2, xd.size());
    Tensor out({N, C});
    const double* xv = value(x).data();
    for (long nc = 0; nc < N * C; ++nc) {
        double acc = 0.0;
        for (long i = 0; i < spatial; ++i) acc += xv[nc * spatial + i];
        out[nc] = acc / static_cast<double>(spatial);
    }
    const bool rg = requires_grad(x);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, x, N, C, spatial](Tape& t) {
            const double* g = t.grad(id).data();
            double* gx = t.grad(x).data();
            const double inv = 1.0 / static_cast<double>(spatial);
            for (long nc = 0; nc < N * C; ++nc) {
                const double go = g[nc] * inv;
                for (long i = 0; i < spatial; ++i) gx[nc * spatial + i] += go;
            }
        };
    return id;
}

// -------------------------------------------------------------- reductions

Tape::NodeId Tape::sum_all(NodeId a) {
    double acc = 0.0;
    for (long i = 0; i < value(a).numel(); ++i) acc += value(a)[i];
    const bool rg = requires_grad(a);
    const NodeId id = push(Tensor::scalar(acc), rg, {});
    if (rg)
        node(id).back = [id, a](Tape& t) {
            const double g = t.grad(id)[0];
            Tensor& ga = t.grad(a);
            for (long i = 0; i < ga.numel(); ++i) ga[i] += g;
        };
    return id;
}

Tape::NodeId Tape::mean_all(NodeId a) {
    const long n = value(a).numel();
    double acc = 0.0;
    for (long i = 0; i < n; ++i) acc += value(a)[i];
    const bool rg = requires_grad(a);
    const NodeId id = push(Tensor::scalar(acc / static_cast<double>(n)), rg, {});
    if (rg)
        node(id).back = [id, a, n](Tape& t) {
            const double g = t.grad(id)[0] / static_cast<double>(n);
            Tensor& ga = t.grad(a);
            for (long i = 0; i < n; ++i) ga[i] += g;
        };
    return id;
}

Tape::NodeId Tape::softmax_last(NodeId a) {
    const auto& d = value(a).dims();
    const long last = d.back();
    const long rows = value(a).numel() / last;
    Tensor out(d);
    const double* xv = value(a).data();
    for (long r = 0; r < rows; ++r) {
        const double* xr = xv + r * last;
        double* orow = out.data() + r * last;
        double mx = xr[0];
        for (long i = 1; i < last; ++i) mx = std::max(mx, xr[i]);
        double z = 0.0;
        for (long i = 0; i < last; ++i) {
            orow[i] = std::exp(xr[i] - mx);
            z += orow[i];
        }
        for (long i = 0; i < last; ++i) orow[i] /= z;
    }
    const bool rg = requires_grad(a);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a, rows, last](Tape& t) {
            const double* g = t.grad(id).data();
            const double* y = t.value(id).data();
            double* ga = t.grad(a).data();
            for (long r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (long i = 0; i < last; ++i) dot += g[r * last + i] * y[r * last + i];
                for (long i = 0; i < last; ++i)
                    ga[r * last + i] += y[r * last + i] * (g[r * last + i] - dot);
            }
        };
    return id;
}

Tape::NodeId Tape::log_softmax_last(NodeId a) {
    const auto& d = value(a).dims();
    const long last = d.back();
    const long rows = value(a).numel() / last;
    Tensor out(d);
    const double* xv = value(a).data();
    for (long r = 0; r < rows; ++r) {
        const double* xr = xv + r * last;
        double* orow = out.data() + r * last;
        double mx = xr[0];
        for (long i = 1; i < last; ++i) mx = std::max(mx, xr[i]);
        double z = 0.0;
        for (long i = 0; i < last; ++i) z += std::exp(xr[i] - mx);
        const double lz = mx + std::log(z);
        for (long i = 0; i < last; ++i) orow[i] = xr[i] - lz;
    }
    const bool rg = requires_grad(a);
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, a, rows, last](Tape& t) {
            const double* g = t.grad(id).data();
            const double* y = t.value(id).data();
            double* ga = t.grad(a).data();
            for (long r = 0; r < rows; ++r) {
                double gsum = 0.0;
                for (long i = 0; i < last; ++i) gsum += g[r * last + i];
                for (long i = 0; i < last; ++i)
                    ga[r * last + i] += g[r * last + i] - std::exp(y[r * last + i]) * gsum;
            }
        };
    return id;
}

Tape::NodeId Tape::huber_per_sample(NodeId pred, const Tensor& target, double delta) {
    check_same_shape(value(pred), target, "huber");
    if (!(delta > 0.0)) throw ValidationError("huber delta must be > 0");
    const long N = value(pred).dim(0);
    const long per = value(pred).numel() / N;
    Tensor out({N});
    const double* pv = value(pred).data();
    const double* tv = target.data();
    for (long n = 0; n < N; ++n) {
        double acc = 0.0;
        for (long i = 0; i < per; ++i) {
            const double e = pv[n * per + i] - tv[n * per + i];
            const double ae = std::fabs(e);
            acc += ae < delta ? 0.5 * e * e : delta * ae - 0.5 * delta * delta;
        }
        out[n] = acc / static_cast<double>(per);
    }
    const bool rg = requires_grad(pred);
    Tensor target_copy = target;
    const NodeId id = push(std::move(out), rg, {});
    if (rg)
        node(id).back = [id, pred, target_copy, delta, N, per](Tape& t) {
            const double* g = t.grad(id).data();
            const double* pv2 = t.value(pred).data();
            const double* tv2 = target_copy.data();
            double* gp = t.grad(pred).data();
            const double inv = 1.0 / static_cast<double>(per);
            for (long n = 0; n < N; ++n) {
                const double gn = g[n] * inv;
                for (long i = 0; i < per; ++i) {
                    const double e = pv2[n * per + i] - tv2[n * per + i];
                    const double de = std::fabs(e) < delta ? e : (e > 0 ? delta : -delta);
                    gp[n * per + i] += gn * de;
                }
            }
        };
    return id;
}

Tape::NodeId Tape::weighted_sum(NodeId x, const Tensor& weights) {
    check_same_shape(value(x), weights, "weighted_sum");
    double acc = 0.0;
    for (long i = 0; i < weights.numel(); ++i) acc += value(x)[i] * weights[i];
    const bool rg = requires_grad(x);
    Tensor wcopy = weights;
    const NodeId id = push(Tensor::scalar(acc), rg, {});
    if (rg)
        node(id).back = [id, x, wcopy](Tape& t) {
            const double g = t.grad(id)[0];
            Tensor& gx = t.grad(x);
            for (long i = 0; i < wcopy.numel(); ++i) gx[i] += g * wcopy[i];
        };
    return id;
}

void Tape::backward(NodeId root) {
    if (value(root).numel() != 1) throw ValidationError("backward root must be scalar");
    if (!requires_grad(root)) throw ValidationError("backward root does not require grad");
    for (auto& n : nodes_)
        if (n.requires_grad) n.grad.fill(0.0);
    grad(root)[0] = 1.0;
    for (long i = static_cast<long>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.requires_grad && n.back) n.back(*this);
    }
}

}  // namespace tcf::nn
