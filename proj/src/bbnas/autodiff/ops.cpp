#include "bbnas/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bbnas/common/error.hpp"

namespace bbnas::ad {

namespace {

void same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), ErrorKind::shape_mismatch,
            std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                to_string(b.shape()));
}

// Gradient buffer of a parent, or nullptr when it is a constant.
double* grad_of(Node& self, std::size_t i) {
    Node& p = *self.parents[i];
    return p.requires_grad ? p.grad_buffer().data() : nullptr;
}

const std::vector<double>& value_of(Node& self, std::size_t i) { return self.parents[i]->value; }

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    require(t.rank() == rank, ErrorKind::shape_mismatch,
            std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                to_string(t.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "add");
    auto av = a.data(), bv = b.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k)
            if (double* g = grad_of(self, k))
                for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "sub");
    auto av = a.data(), bv = b.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        if (double* g = grad_of(self, 1))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "mul");
    auto av = a.data(), bv = b.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        const auto& x = value_of(self, 0);
        const auto& y = value_of(self, 1);
        if (double* g = grad_of(self, 0))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * y[i];
        if (double* g = grad_of(self, 1))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * x[i];
    });
}

Tensor scale(const Tensor& a, double factor) {
    auto av = a.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
    return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
        double* g = grad_of(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor add_scalar(const Tensor& a, double offset) {
    auto av = a.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + offset;
    return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
        double* g = grad_of(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor relu(const Tensor& a) {
    auto av = a.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
    return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
        const auto& x = value_of(self, 0);
        double* g = grad_of(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (x[i] > 0.0) g[i] += self.grad[i];
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_result(Shape{}, {s}, {a}, [](Node& self) {
        double* g = grad_of(self, 0);
        const std::size_t n = self.parents[0]->value.size();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    require(a.size() > 0, ErrorKind::invalid_argument, "mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    require(!parts.empty(), ErrorKind::invalid_argument, "concat: no operands");
    const Shape& first = parts[0].shape();
    require(axis < first.size(), ErrorKind::invalid_argument,
            "concat: axis " + std::to_string(axis) + " out of range for " + to_string(first));
    std::size_t outer = 1, inner = 1, total_axis = 0;
    for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
    for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
    std::vector<std::size_t> extents;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d)
            if (d != axis && s[d] != first[d]) ok = false;
        require(ok, ErrorKind::shape_mismatch,
                "concat: incompatible shapes " + to_string(first) + " and " + to_string(s));
        extents.push_back(s[axis]);
        total_axis += s[axis];
    }
    Shape out_shape = first;
    out_shape[axis] = total_axis;
    std::vector<double> out(numel(out_shape));
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        auto src = parts[k].data();
        const std::size_t block = extents[k] * inner;
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(src.begin() + o * block, block,
                        out.begin() + o * total_axis * inner + offset * inner);
        offset += extents[k];
    }
    std::vector<Tensor> parents(parts.begin(), parts.end());
    return make_result(out_shape, std::move(out), std::move(parents),
                       [extents, outer, inner, total_axis](Node& self) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < extents.size(); ++k) {
                               const std::size_t block = extents[k] * inner;
                               if (double* g = grad_of(self, k)) {
                                   for (std::size_t o = 0; o < outer; ++o) {
                                       const double* src =
                                           self.grad.data() + o * total_axis * inner + off * inner;
                                       double* dst = g + o * block;
                                       for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                                   }
                               }
                               off += extents[k];
                           }
                       });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
    require(a.rank() >= 1 && begin <= end && end <= a.dim(0), ErrorKind::invalid_argument,
            "slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                ") invalid for " + to_string(a.shape()));
    const std::size_t row = a.size() / std::max<std::size_t>(a.dim(0), 1);
    Shape s = a.shape();
    s[0] = end - begin;
    auto src = a.data();
    std::vector<double> out(src.begin() + begin * row, src.begin() + end * row);
    return make_result(s, std::move(out), {a}, [begin, row](Node& self) {
        double* g = grad_of(self, 0) + begin * row;
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor select_row(const Tensor& a, std::size_t r) {
    require_rank(a, 2, "select_row");
    require(r < a.dim(0), ErrorKind::invalid_argument,
            "select_row: row " + std::to_string(r) + " out of range for " + to_string(a.shape()));
    return reshape(slice_rows(a, r, r + 1), Shape{a.dim(1)});
}

Tensor reshape(const Tensor& a, Shape shape) {
    require(numel(shape) == a.size(), ErrorKind::shape_mismatch,
            "reshape: " + to_string(a.shape()) + " -> " + to_string(shape));
    auto src = a.data();
    return make_result(std::move(shape), std::vector<double>(src.begin(), src.end()), {a},
                       [](Node& self) {
                           double* g = grad_of(self, 0);
                           for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
                       });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
    const Shape& s = a.shape();
    require(axis < s.size(), ErrorKind::invalid_argument,
            "softmax: axis " + std::to_string(axis) + " out of range for " + to_string(s));
    std::size_t outer = 1, inner = 1;
    const std::size_t n = s[axis];
    for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
    for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
    auto x = a.data();
    std::vector<double> out(x.size());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * n * inner + i;
            double m = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < n; ++k) m = std::max(m, x[base + k * inner]);
            double z = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double e = std::exp(x[base + k * inner] - m);
                out[base + k * inner] = e;
                z += e;
            }
            for (std::size_t k = 0; k < n; ++k) out[base + k * inner] /= z;
        }
    return make_result(s, out, {a}, [out, outer, inner, n](Node& self) {
        double* g = grad_of(self, 0);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t base = o * n * inner + i;
                double dot = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    dot += self.grad[base + k * inner] * out[base + k * inner];
                for (std::size_t k = 0; k < n; ++k) {
                    const std::size_t j = base + k * inner;
                    g[j] += out[j] * (self.grad[j] - dot);
                }
            }
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 2, "linear");
    require_rank(weight, 2, "linear");
    require(x.dim(1) == weight.dim(1) && bias.rank() == 1 && bias.dim(0) == weight.dim(0),
            ErrorKind::shape_mismatch,
            "linear: input " + to_string(x.shape()) + " incompatible with weight " +
                to_string(weight.shape()) + " / bias " + to_string(bias.shape()));
    const std::size_t n = x.dim(0), d = x.dim(1), f = weight.dim(0);
    auto xv = x.data(), wv = weight.data(), bv = bias.data();
    std::vector<double> out(n * f);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) {
            double acc = bv[j];
            for (std::size_t k = 0; k < d; ++k) acc += xv[i * d + k] * wv[j * d + k];
            out[i * f + j] = acc;
        }
    return make_result(Shape{n, f}, std::move(out), {x, weight, bias}, [n, d, f](Node& self) {
        const auto& xs = value_of(self, 0);
        const auto& ws = value_of(self, 1);
        const double* go = self.grad.data();
        if (double* gx = grad_of(self, 0))
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < f; ++j)
                    for (std::size_t k = 0; k < d; ++k) gx[i * d + k] += go[i * f + j] * ws[j * d + k];
        if (double* gw = grad_of(self, 1))
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < f; ++j)
                    for (std::size_t k = 0; k < d; ++k) gw[j * d + k] += go[i * f + j] * xs[i * d + k];
        if (double* gb = grad_of(self, 2))
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < f; ++j) gb[j] += go[i * f + j];
    });
}

Tensor weighted_sum(std::span<const Tensor> terms, const Tensor& weights) {
    require(!terms.empty(), ErrorKind::invalid_argument, "weighted_sum: no terms");
    require(weights.rank() == 1 && weights.dim(0) == terms.size(), ErrorKind::shape_mismatch,
            "weighted_sum: weights " + to_string(weights.shape()) + " for " +
                std::to_string(terms.size()) + " terms");
    const Shape& s = terms[0].shape();
    for (const auto& t : terms)
        require(t.shape() == s, ErrorKind::shape_mismatch,
                "weighted_sum: term shape " + to_string(t.shape()) + " differs from " +
                    to_string(s));
    auto w = weights.data();
    std::vector<double> out(numel(s), 0.0);
    for (std::size_t k = 0; k < terms.size(); ++k) {
        auto tv = terms[k].data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[k] * tv[i];
    }
    std::vector<Tensor> parents(terms.begin(), terms.end());
    parents.push_back(weights);
    const std::size_t count = terms.size();
    return make_result(s, std::move(out), std::move(parents), [count](Node& self) {
        const auto& wv = value_of(self, count);
        double* gw = grad_of(self, count);
        for (std::size_t k = 0; k < count; ++k) {
            const auto& tv = value_of(self, k);
            if (double* g = grad_of(self, k))
                for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += wv[k] * self.grad[i];
            if (gw) {
                double acc = 0.0;
                for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * tv[i];
                gw[k] += acc;
            }
        }
    });
}

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                            std::size_t padding, std::size_t dilation) {
    const std::size_t span = dilation * (kernel - 1) + 1;
    require(stride > 0, ErrorKind::invalid_argument, "conv: stride must be positive");
    require(in + 2 * padding >= span, ErrorKind::shape_mismatch,
            "conv: extent " + std::to_string(in) + " with padding " + std::to_string(padding) +
                " smaller than kernel span " + std::to_string(span));
    return (in + 2 * padding - span) / stride + 1;
}

namespace {

struct ConvGeometry {
    std::size_t n, c, h, w, f, k, ho, wo, cg, fg;
    Conv2dOptions o;
    std::size_t kdim() const { return cg * k * k; }
    std::size_t pix() const { return ho * wo; }
};

// Gather the receptive fields of one (sample, group) into col[kdim][pix].
void im2col(const double* x, const ConvGeometry& g, std::size_t sample, std::size_t group,
            double* col) {
    const std::size_t P = g.pix();
    for (std::size_t c = 0; c < g.cg; ++c) {
        const double* plane = x + ((sample * g.c) + group * g.cg + c) * g.h * g.w;
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                double* row = col + ((c * g.k + ky) * g.k + kx) * P;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const long iy = static_cast<long>(oy * g.o.stride + ky * g.o.dilation) -
                                    static_cast<long>(g.o.padding);
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const long ix = static_cast<long>(ox * g.o.stride + kx * g.o.dilation) -
                                        static_cast<long>(g.o.padding);
                        row[oy * g.wo + ox] =
                            (iy >= 0 && iy < static_cast<long>(g.h) && ix >= 0 &&
                             ix < static_cast<long>(g.w))
                                ? plane[iy * g.w + ix]
                                : 0.0;
                    }
                }
            }
    }
}

void col2im(const double* col, const ConvGeometry& g, std::size_t sample, std::size_t group,
            double* dx) {
    const std::size_t P = g.pix();
    for (std::size_t c = 0; c < g.cg; ++c) {
        double* plane = dx + ((sample * g.c) + group * g.cg + c) * g.h * g.w;
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const double* row = col + ((c * g.k + ky) * g.k + kx) * P;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const long iy = static_cast<long>(oy * g.o.stride + ky * g.o.dilation) -
                                    static_cast<long>(g.o.padding);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const long ix = static_cast<long>(ox * g.o.stride + kx * g.o.dilation) -
                                        static_cast<long>(g.o.padding);
                        if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
                        plane[iy * g.w + ix] += row[oy * g.wo + ox];
                    }
                }
            }
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& filters, const std::optional<Tensor>& bias,
              const Conv2dOptions& opts) {
    require_rank(input, 4, "conv2d");
    require_rank(filters, 4, "conv2d");
    require(opts.groups >= 1, ErrorKind::invalid_argument, "conv2d: groups must be positive");
    ConvGeometry g{};
    g.o = opts;
    g.n = input.dim(0);
    g.c = input.dim(1);
    g.h = input.dim(2);
    g.w = input.dim(3);
    g.f = filters.dim(0);
    g.k = filters.dim(2);
    const bool ok = filters.dim(3) == g.k && g.c % opts.groups == 0 && g.f % opts.groups == 0 &&
                    filters.dim(1) * opts.groups == g.c;
    require(ok, ErrorKind::shape_mismatch,
            "conv2d: input " + to_string(input.shape()) + " incompatible with filters " +
                to_string(filters.shape()) + " (groups " + std::to_string(opts.groups) + ")");
    if (bias)
        require(bias->rank() == 1 && bias->dim(0) == g.f, ErrorKind::shape_mismatch,
                "conv2d: bias " + to_string(bias->shape()) + " for filters " +
                    to_string(filters.shape()));
    g.cg = g.c / opts.groups;
    g.fg = g.f / opts.groups;
    g.ho = conv_out_extent(g.h, g.k, opts.stride, opts.padding, opts.dilation);
    g.wo = conv_out_extent(g.w, g.k, opts.stride, opts.padding, opts.dilation);

    const std::size_t P = g.pix(), K = g.kdim();
    auto x = input.data();
    auto wt = filters.data();
    std::vector<double> out(g.n * g.f * P);
    std::vector<double> col(K * P);
    for (std::size_t s = 0; s < g.n; ++s)
        for (std::size_t grp = 0; grp < opts.groups; ++grp) {
            im2col(x.data(), g, s, grp, col.data());
            for (std::size_t fl = 0; fl < g.fg; ++fl) {
                const std::size_t fo = grp * g.fg + fl;
                double* orow = out.data() + (s * g.f + fo) * P;
                const double b0 = bias ? bias->data()[fo] : 0.0;
                std::fill_n(orow, P, b0);
                const double* wrow = wt.data() + fo * K;
                for (std::size_t k = 0; k < K; ++k) {
                    const double wv = wrow[k];
                    const double* crow = col.data() + k * P;
                    for (std::size_t p = 0; p < P; ++p) orow[p] += wv * crow[p];
                }
            }
        }

    std::vector<Tensor> parents{input, filters};
    if (bias) parents.push_back(*bias);
    const bool has_bias = bias.has_value();
    return make_result(Shape{g.n, g.f, g.ho, g.wo}, std::move(out), std::move(parents),
                       [g, has_bias](Node& self) {
                           const std::size_t P = g.pix(), K = g.kdim();
                           const auto& xv = value_of(self, 0);
                           const auto& wv = value_of(self, 1);
                           double* gx = grad_of(self, 0);
                           double* gw = grad_of(self, 1);
                           double* gb = has_bias ? grad_of(self, 2) : nullptr;
                           std::vector<double> col(K * P), dcol(gx ? K * P : 0);
                           for (std::size_t s = 0; s < g.n; ++s)
                               for (std::size_t grp = 0; grp < g.o.groups; ++grp) {
                                   if (gw) im2col(xv.data(), g, s, grp, col.data());
                                   if (gx) std::fill(dcol.begin(), dcol.end(), 0.0);
                                   for (std::size_t fl = 0; fl < g.fg; ++fl) {
                                       const std::size_t fo = grp * g.fg + fl;
                                       const double* go = self.grad.data() + (s * g.f + fo) * P;
                                       if (gb) {
                                           double acc = 0.0;
                                           for (std::size_t p = 0; p < P; ++p) acc += go[p];
                                           gb[fo] += acc;
                                       }
                                       if (gw) {
                                           double* gwr = gw + fo * K;
                                           for (std::size_t k = 0; k < K; ++k) {
                                               const double* crow = col.data() + k * P;
                                               double acc = 0.0;
                                               for (std::size_t p = 0; p < P; ++p)
                                                   acc += go[p] * crow[p];
                                               gwr[k] += acc;
                                           }
                                       }
                                       if (gx) {
                                           const double* wrow = wv.data() + fo * K;
                                           for (std::size_t k = 0; k < K; ++k) {
                                               const double w0 = wrow[k];
                                               double* drow = dcol.data() + k * P;
                                               for (std::size_t p = 0; p < P; ++p)
                                                   drow[p] += w0 * go[p];
                                           }
                                       }
                                   }
                                   if (gx) col2im(dcol.data(), g, s, grp, gx);
                               }
                       });
}

namespace {

struct PoolGeometry {
    std::size_t planes, h, w, ho, wo, k, stride, pad;
};

PoolGeometry pool_geometry(const Tensor& input, std::size_t kernel, std::size_t stride,
                           std::size_t padding, const char* op) {
    require_rank(input, 4, op);
    require(kernel > 0 && stride > 0, ErrorKind::invalid_argument,
            std::string(op) + ": kernel and stride must be positive");
    require(padding < kernel, ErrorKind::invalid_argument,
            std::string(op) + ": padding must be smaller than the window");
    PoolGeometry g{};
    g.planes = input.dim(0) * input.dim(1);
    g.h = input.dim(2);
    g.w = input.dim(3);
    g.k = kernel;
    g.stride = stride;
    g.pad = padding;
    g.ho = conv_out_extent(g.h, kernel, stride, padding);
    g.wo = conv_out_extent(g.w, kernel, stride, padding);
    return g;
}

}  // namespace

Tensor max_pool(const Tensor& input, std::size_t kernel, std::size_t stride,
                std::size_t padding) {
    const PoolGeometry g = pool_geometry(input, kernel, stride, padding, "max_pool");
    auto x = input.data();
    const std::size_t out_n = g.planes * g.ho * g.wo;
    std::vector<double> out(out_n);
    std::vector<std::size_t> arg(out_n);
    for (std::size_t pl = 0; pl < g.planes; ++pl)
        for (std::size_t oy = 0; oy < g.ho; ++oy)
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_i = 0;
                bool found = false;
                for (std::size_t ky = 0; ky < g.k; ++ky) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    for (std::size_t kx = 0; kx < g.k; ++kx) {
                        const long ix =
                            static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                        if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
                        const std::size_t i = (pl * g.h + iy) * g.w + ix;
                        // strict '>' keeps the first row-major maximum on ties
                        if (!found || x[i] > best) {
                            best = x[i];
                            best_i = i;
                            found = true;
                        }
                    }
                }
                const std::size_t o = (pl * g.ho + oy) * g.wo + ox;
                out[o] = best;
                arg[o] = best_i;
            }
    Shape s{input.dim(0), input.dim(1), g.ho, g.wo};
    return make_result(s, std::move(out), {input}, [arg = std::move(arg)](Node& self) {
        double* gx = grad_of(self, 0);
        for (std::size_t o = 0; o < arg.size(); ++o) gx[arg[o]] += self.grad[o];
    });
}

Tensor avg_pool(const Tensor& input, std::size_t kernel, std::size_t stride,
                std::size_t padding) {
    const PoolGeometry g = pool_geometry(input, kernel, stride, padding, "avg_pool");
    auto x = input.data();
    std::vector<double> out(g.planes * g.ho * g.wo);
    auto window = [g](std::size_t oy, std::size_t ox, auto&& visit) {
        std::size_t count = 0;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                    if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
                    if (pass == 0)
                        ++count;
                    else
                        visit(static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix),
                              count);
                }
            }
        }
    };
    for (std::size_t pl = 0; pl < g.planes; ++pl)
        for (std::size_t oy = 0; oy < g.ho; ++oy)
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
                double acc = 0.0;
                std::size_t cnt = 1;
                window(oy, ox, [&](std::size_t off, std::size_t c) {
                    acc += x[pl * g.h * g.w + off];
                    cnt = c;
                });
                out[(pl * g.ho + oy) * g.wo + ox] = acc / static_cast<double>(cnt);
            }
    Shape s{input.dim(0), input.dim(1), g.ho, g.wo};
    return make_result(s, std::move(out), {input}, [g, window](Node& self) {
        double* gx = grad_of(self, 0);
        for (std::size_t pl = 0; pl < g.planes; ++pl)
            for (std::size_t oy = 0; oy < g.ho; ++oy)
                for (std::size_t ox = 0; ox < g.wo; ++ox) {
                    const double go = self.grad[(pl * g.ho + oy) * g.wo + ox];
                    window(oy, ox, [&](std::size_t off, std::size_t c) {
                        gx[pl * g.h * g.w + off] += go / static_cast<double>(c);
                    });
                }
    });
}

Tensor max_pool2d(const Tensor& input, std::size_t window) {
    require_rank(input, 4, "max_pool2d");
    require(window > 0 && input.dim(2) % window == 0 && input.dim(3) % window == 0,
            ErrorKind::shape_mismatch,
            "max_pool2d: window " + std::to_string(window) + " does not divide " +
                to_string(input.shape()));
    return max_pool(input, window, window, 0);
}

Tensor avg_pool2d(const Tensor& input, std::size_t window) {
    require_rank(input, 4, "avg_pool2d");
    require(window > 0 && input.dim(2) % window == 0 && input.dim(3) % window == 0,
            ErrorKind::shape_mismatch,
            "avg_pool2d: window " + std::to_string(window) + " does not divide " +
                to_string(input.shape()));
    return avg_pool(input, window, window, 0);
}

Tensor global_avg_pool(const Tensor& input) {
    require_rank(input, 4, "global_avg_pool");
    const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    auto x = input.data();
    std::vector<double> out(n * c);
    for (std::size_t i = 0; i < n * c; ++i) {
        double acc = 0.0;
        for (std::size_t p = 0; p < hw; ++p) acc += x[i * hw + p];
        out[i] = acc / static_cast<double>(hw);
    }
    return make_result(Shape{n, c}, std::move(out), {input}, [hw](Node& self) {
        double* gx = grad_of(self, 0);
        const double inv = 1.0 / static_cast<double>(hw);
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            for (std::size_t p = 0; p < hw; ++p) gx[i * hw + p] += self.grad[i] * inv;
    });
}

Tensor residual_add(const Tensor& branch, const Tensor& x, const std::optional<Tensor>& projection,
                    std::size_t stride) {
    if (!projection) {
        require(branch.shape() == x.shape(), ErrorKind::shape_mismatch,
                "residual_add: branch " + to_string(branch.shape()) + " and input " +
                    to_string(x.shape()) + " differ and no projection was given");
        return add(branch, x);
    }
    require(projection->rank() == 4 && projection->dim(2) == 1 && projection->dim(3) == 1,
            ErrorKind::shape_mismatch,
            "residual_add: projection must be a 1x1 filter bank, got " +
                to_string(projection->shape()));
    Conv2dOptions o;
    o.stride = stride;
    Tensor projected = conv2d(x, *projection, std::nullopt, o);
    require(projected.shape() == branch.shape(), ErrorKind::shape_mismatch,
            "residual_add: projected input " + to_string(projected.shape()) +
                " does not match branch " + to_string(branch.shape()));
    return add(branch, projected);
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
    require_rank(logits, 2, "cross_entropy");
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    require(labels.size() == n, ErrorKind::shape_mismatch,
            "cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                std::to_string(n) + " rows");
    require(n > 0, ErrorKind::invalid_argument, "cross_entropy: empty batch");
    for (std::size_t i = 0; i < n; ++i)
        require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < c,
                ErrorKind::invalid_argument,
                "cross_entropy: label " + std::to_string(labels[i]) + " at row " +
                    std::to_string(i) + " outside [0," + std::to_string(c) + ")");
    auto z = logits.data();
    std::vector<double> prob(n * c);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = z.data() + i * c;
        double m = row[0];
        for (std::size_t k = 1; k < c; ++k) m = std::max(m, row[k]);
        double s = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            prob[i * c + k] = std::exp(row[k] - m);
            s += prob[i * c + k];
        }
        for (std::size_t k = 0; k < c; ++k) prob[i * c + k] /= s;
        loss += (m + std::log(s)) - row[labels[i]];
    }
    loss /= static_cast<double>(n);
    std::vector<int> ys(labels.begin(), labels.end());
    return make_result(Shape{}, {loss}, {logits},
                       [prob = std::move(prob), ys = std::move(ys), n, c](Node& self) {
                           double* g = grad_of(self, 0);
                           const double scale = self.grad[0] / static_cast<double>(n);
                           for (std::size_t i = 0; i < n; ++i)
                               for (std::size_t k = 0; k < c; ++k) {
                                   const double t = (static_cast<int>(k) == ys[i]) ? 1.0 : 0.0;
                                   g[i * c + k] += scale * (prob[i * c + k] - t);
                               }
                       });
}

}  // namespace bbnas::ad
