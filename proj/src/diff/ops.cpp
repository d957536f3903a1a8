#include "pngnn/diff/ops.hpp"

#include "pngnn/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pngnn::diff {
namespace {

Tape& tape_of(Var a, Var b, const char* op) {
    if (!a.valid() || a.tape() != b.tape()) {
        throw ShapeError(std::string(op) + ": operands recorded on different tapes");
    }
    return *a.tape();
}

std::string dims(const Array& a) { return std::to_string(a.rows()) + "x" + std::to_string(a.cols()); }

[[noreturn]] void shape_error(const char* op, const Array& a, const Array& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + dims(a) + " and " + dims(b));
}

// C += A * B with A (n x k), B (k x m).
void gemm_nn(const Array& a, const Array& b, Array& c) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c.row(i).data();
        const double* ai = a.row(i).data();
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) {
                continue;
            }
            const double* bp = b.row(p).data();
            for (std::size_t j = 0; j < m; ++j) {
                ci[j] += aip * bp[j];
            }
        }
    }
}

// C += A * B^T with A (n x m), B (k x m) -> C (n x k).
void gemm_nt(const Array& a, const Array& b, Array& c) {
    const std::size_t n = a.rows(), m = a.cols(), k = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.row(i).data();
        double* ci = c.row(i).data();
        for (std::size_t p = 0; p < k; ++p) {
            const double* bp = b.row(p).data();
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                acc += ai[j] * bp[j];
            }
            ci[p] += acc;
        }
    }
}

// C += A^T * B with A (n x k), B (n x m) -> C (k x m).
void gemm_tn(const Array& a, const Array& b, Array& c) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.row(i).data();
        const double* bi = b.row(i).data();
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) {
                continue;
            }
            double* cp = c.row(p).data();
            for (std::size_t j = 0; j < m; ++j) {
                cp[j] += aip * bi[j];
            }
        }
    }
}

template <typename Forward, typename Derivative>
Var unary(Var a, Forward f, Derivative df) {
    Tape& t = *a.tape();
    const Array& x = a.value();
    Array y(x.shape(), std::vector<double>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = f(x[i]);
    }
    const std::size_t ia = a.id();
    return t.push(std::move(y), t.any_requires_grad({a}), [ia, df](Tape& tp, std::size_t self) {
        const Array& xv = tp.value_of(ia);
        const Array& yv = tp.value_of(self);
        const Array g = tp.grad_of(self);
        Array& ga = tp.grad_of(ia);
        for (std::size_t i = 0; i < xv.size(); ++i) {
            ga[i] += g[i] * df(xv[i], yv[i]);
        }
    });
}

bool is_row_broadcast(const Array& a, const Array& b) {
    return b.rows() == 1 && b.cols() == a.cols() && a.rows() != 1;
}

// Shared implementation of add/sub with optional 1xN broadcast of b.
Var add_impl(Var a, Var b, double sign, const char* op) {
    Tape& t = tape_of(a, b, op);
    const Array& x = a.value();
    const Array& y = b.value();
    const bool broadcast = is_row_broadcast(x, y);
    if (!broadcast && !(x.rows() == y.rows() && x.cols() == y.cols())) {
        shape_error(op, x, y);
    }
    Array out = x;
    const std::size_t cols = x.cols();
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* yr = broadcast ? y.row(0).data() : y.row(r).data();
        double* o = out.row(r).data();
        for (std::size_t c = 0; c < cols; ++c) {
            o[c] += sign * yr[c];
        }
    }
    const std::size_t ia = a.id(), ib = b.id();
    return t.push(std::move(out), t.any_requires_grad({a, b}),
                  [ia, ib, broadcast, sign](Tape& tp, std::size_t self) {
                      const Array g = tp.grad_of(self);
                      if (tp.requires_grad(ia)) {
                          tp.grad_of(ia) += g;
                      }
                      if (tp.requires_grad(ib)) {
                          Array& gb = tp.grad_of(ib);
                          const std::size_t cols = g.cols();
                          for (std::size_t r = 0; r < g.rows(); ++r) {
                              const double* gr = g.row(r).data();
                              double* dst = broadcast ? gb.row(0).data() : gb.row(r).data();
                              for (std::size_t c = 0; c < cols; ++c) {
                                  dst[c] += sign * gr[c];
                              }
                          }
                      }
                  });
}

} // namespace

Var matmul(Var a, Var b) {
    Tape& t = tape_of(a, b, "matmul");
    const Array& x = a.value();
    const Array& y = b.value();
    if (x.cols() != y.rows()) {
        shape_error("matmul", x, y);
    }
    Array out(x.rows(), y.cols());
    gemm_nn(x, y, out);
    const std::size_t ia = a.id(), ib = b.id();
    return t.push(std::move(out), t.any_requires_grad({a, b}), [ia, ib](Tape& tp, std::size_t self) {
        const Array& g = tp.grad_of(self);
        if (tp.requires_grad(ia)) {
            gemm_nt(g, tp.value_of(ib), tp.grad_of(ia));
        }
        if (tp.requires_grad(ib)) {
            gemm_tn(tp.value_of(ia), g, tp.grad_of(ib));
        }
    });
}

Var add(Var a, Var b) { return add_impl(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_impl(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
    Tape& t = tape_of(a, b, "mul");
    const Array& x = a.value();
    const Array& y = b.value();
    if (!(x.rows() == y.rows() && x.cols() == y.cols())) {
        shape_error("mul", x, y);
    }
    Array out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= y[i];
    }
    const std::size_t ia = a.id(), ib = b.id();
    return t.push(std::move(out), t.any_requires_grad({a, b}), [ia, ib](Tape& tp, std::size_t self) {
        const Array g = tp.grad_of(self);
        if (tp.requires_grad(ia)) {
            const Array& yv = tp.value_of(ib);
            Array& ga = tp.grad_of(ia);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * yv[i];
            }
        }
        if (tp.requires_grad(ib)) {
            const Array& xv = tp.value_of(ia);
            Array& gb = tp.grad_of(ib);
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] += g[i] * xv[i];
            }
        }
    });
}

Var scale(Var a, double factor) {
    return unary(a, [factor](double x) { return factor * x; },
                 [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
    return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ShapeError("concat_cols: no operands");
    }
    Tape& t = *parts[0].tape();
    const std::size_t rows = parts[0].rows();
    std::size_t total = 0;
    std::vector<std::size_t> ids, widths;
    bool needs = false;
    for (const Var& p : parts) {
        if (p.tape() != &t || p.rows() != rows) {
            throw ShapeError("concat_cols: row count mismatch (" + std::to_string(p.rows()) + " vs " +
                             std::to_string(rows) + ")");
        }
        ids.push_back(p.id());
        widths.push_back(p.cols());
        total += p.cols();
        needs = needs || t.any_requires_grad({p});
    }
    Array out(rows, total);
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const Array& v = p.value();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
        }
        offset += v.cols();
    }
    return t.push(std::move(out), needs, [ids, widths](Tape& tp, std::size_t self) {
        const Array g = tp.grad_of(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (tp.requires_grad(ids[k])) {
                Array& gk = tp.grad_of(ids[k]);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    for (std::size_t c = 0; c < widths[k]; ++c) {
                        gk(r, c) += g(r, offset + c);
                    }
                }
            }
            offset += widths[k];
        }
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ShapeError("concat_rows: no operands");
    }
    Tape& t = *parts[0].tape();
    const std::size_t cols = parts[0].cols();
    std::size_t total = 0;
    std::vector<std::size_t> ids, heights;
    bool needs = false;
    for (const Var& p : parts) {
        if (p.tape() != &t || p.cols() != cols) {
            throw ShapeError("concat_rows: column count mismatch");
        }
        ids.push_back(p.id());
        heights.push_back(p.rows());
        total += p.rows();
        needs = needs || t.any_requires_grad({p});
    }
    Array out(total, cols);
    std::size_t r0 = 0;
    for (const Var& p : parts) {
        const auto src = p.value().values();
        std::copy(src.begin(), src.end(), out.values().begin() + static_cast<std::ptrdiff_t>(r0 * cols));
        r0 += p.rows();
    }
    return t.push(std::move(out), needs, [ids, heights](Tape& tp, std::size_t self) {
        const Array g = tp.grad_of(self);
        const std::size_t cols = g.cols();
        std::size_t r0 = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (tp.requires_grad(ids[k])) {
                Array& gk = tp.grad_of(ids[k]);
                for (std::size_t i = 0; i < heights[k] * cols; ++i) {
                    gk[i] += g[r0 * cols + i];
                }
            }
            r0 += heights[k];
        }
    });
}

Var relu(Var a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
    return unary(a,
                 [](double x) {
                     if (x >= 0.0) {
                         return 1.0 / (1.0 + std::exp(-x));
                     }
                     const double e = std::exp(x);
                     return e / (1.0 + e);
                 },
                 [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
    return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var softplus(Var a) {
    return unary(a,
                 [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
                 [](double x, double) {
                     if (x >= 0.0) {
                         return 1.0 / (1.0 + std::exp(-x));
                     }
                     const double e = std::exp(x);
                     return e / (1.0 + e);
                 });
}

Var sqrt_eps(Var a, double eps) {
    return unary(a, [eps](double x) { return std::sqrt(x + eps); },
                 [](double, double y) { return 0.5 / y; });
}

Var sum(Var a) {
    Tape& t = *a.tape();
    double acc = 0.0;
    for (double x : a.value().values()) {
        acc += x;
    }
    const std::size_t ia = a.id();
    return t.push(Array::scalar(acc), t.any_requires_grad({a}), [ia](Tape& tp, std::size_t self) {
        const double g = tp.grad_of(self)[0];
        for (double& x : tp.grad_of(ia).values()) {
            x += g;
        }
    });
}

Var mean(Var a) {
    const std::size_t n = a.value().size();
    if (n == 0) {
        throw ShapeError("mean: empty operand");
    }
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var max(Var a) {
    Tape& t = *a.tape();
    const Array& x = a.value();
    if (x.size() == 0) {
        throw ShapeError("max: empty operand");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (x[i] > x[best]) {
            best = i;
        }
    }
    const std::size_t ia = a.id();
    return t.push(Array::scalar(x[best]), t.any_requires_grad({a}), [ia, best](Tape& tp, std::size_t self) {
        tp.grad_of(ia)[best] += tp.grad_of(self)[0];
    });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
    Tape& t = *a.tape();
    const Array& x = a.value();
    const std::size_t cols = x.cols();
    Array out(index.size(), cols);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= x.rows()) {
            throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " out of " +
                             std::to_string(x.rows()) + " rows");
        }
        std::copy(x.row(index[i]).begin(), x.row(index[i]).end(), out.row(i).begin());
    }
    const std::size_t ia = a.id();
    std::vector<std::size_t> idx(index.begin(), index.end());
    return t.push(std::move(out), t.any_requires_grad({a}), [ia, idx = std::move(idx)](Tape& tp, std::size_t self) {
        const Array& g = tp.grad_of(self);
        Array& ga = tp.grad_of(ia);
        const std::size_t cols = g.cols();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const double* src = g.row(i).data();
            double* dst = ga.row(idx[i]).data();
            for (std::size_t c = 0; c < cols; ++c) {
                dst[c] += src[c];
            }
        }
    });
}

Var gather_rows_split(Var primary, Var fallback, std::span<const std::int64_t> index) {
    Tape& t = tape_of(primary, fallback, "gather_rows_split");
    const Array& p = primary.value();
    const Array& f = fallback.value();
    if (p.cols() != f.cols() && p.rows() != 0) {
        shape_error("gather_rows_split", p, f);
    }
    const std::size_t cols = f.cols();
    Array out(index.size(), cols);
    for (std::size_t i = 0; i < index.size(); ++i) {
        const std::int64_t k = index[i];
        std::span<const double> src;
        if (k >= 0) {
            if (static_cast<std::size_t>(k) >= p.rows()) {
                throw ShapeError("gather_rows_split: primary index out of range");
            }
            src = p.row(static_cast<std::size_t>(k));
        } else {
            const auto fk = static_cast<std::size_t>(-k - 1);
            if (fk >= f.rows()) {
                throw ShapeError("gather_rows_split: fallback index out of range");
            }
            src = f.row(fk);
        }
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    const std::size_t ip = primary.id(), ifb = fallback.id();
    std::vector<std::int64_t> idx(index.begin(), index.end());
    return t.push(std::move(out), t.any_requires_grad({primary, fallback}),
                  [ip, ifb, idx = std::move(idx)](Tape& tp, std::size_t self) {
                      const Array& g = tp.grad_of(self);
                      const bool gp = tp.requires_grad(ip);
                      const bool gf = tp.requires_grad(ifb);
                      const std::size_t cols = g.cols();
                      for (std::size_t i = 0; i < idx.size(); ++i) {
                          const std::int64_t k = idx[i];
                          double* dst = nullptr;
                          if (k >= 0 && gp) {
                              dst = tp.grad_of(ip).row(static_cast<std::size_t>(k)).data();
                          } else if (k < 0 && gf) {
                              dst = tp.grad_of(ifb).row(static_cast<std::size_t>(-k - 1)).data();
                          }
                          if (dst == nullptr) {
                              continue;
                          }
                          const double* src = g.row(i).data();
                          for (std::size_t c = 0; c < cols; ++c) {
                              dst[c] += src[c];
                          }
                      }
                  });
}

Var scatter_add_rows(Var a, std::span<const std::size_t> index, std::size_t out_rows) {
    Tape& t = *a.tape();
    const Array& x = a.value();
    if (index.size() != x.rows()) {
        throw ShapeError("scatter_add_rows: index length does not match row count");
    }
    const std::size_t cols = x.cols();
    Array out(out_rows, cols);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= out_rows) {
            throw ShapeError("scatter_add_rows: target row out of range");
        }
        double* dst = out.row(index[i]).data();
        const double* src = x.row(i).data();
        for (std::size_t c = 0; c < cols; ++c) {
            dst[c] += src[c];
        }
    }
    const std::size_t ia = a.id();
    std::vector<std::size_t> idx(index.begin(), index.end());
    return t.push(std::move(out), t.any_requires_grad({a}), [ia, idx = std::move(idx)](Tape& tp, std::size_t self) {
        const Array& g = tp.grad_of(self);
        Array& ga = tp.grad_of(ia);
        const std::size_t cols = g.cols();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const double* src = g.row(idx[i]).data();
            double* dst = ga.row(i).data();
            for (std::size_t c = 0; c < cols; ++c) {
                dst[c] += src[c];
            }
        }
    });
}

Var segment_reduce(Var a, std::span<const std::size_t> offsets, Reduce mode) {
    Tape& t = *a.tape();
    const Array& x = a.value();
    if (offsets.empty() || offsets.back() != x.rows()) {
        throw ShapeError("segment_reduce: offsets do not cover the operand rows");
    }
    const std::size_t segments = offsets.size() - 1;
    const std::size_t cols = x.cols();
    Array out(segments, cols);
    // For max/min, the source row chosen per (segment, column).
    std::vector<std::size_t> argext;
    const bool extremal = mode == Reduce::kMax || mode == Reduce::kMin;
    if (extremal) {
        argext.assign(segments * cols, SIZE_MAX);
    }
    for (std::size_t s = 0; s < segments; ++s) {
        const std::size_t lo = offsets[s], hi = offsets[s + 1];
        if (hi < lo) {
            throw ShapeError("segment_reduce: offsets must be nondecreasing");
        }
        if (lo == hi) {
            continue;
        }
        double* o = out.row(s).data();
        if (extremal) {
            for (std::size_t c = 0; c < cols; ++c) {
                std::size_t best = lo;
                for (std::size_t r = lo + 1; r < hi; ++r) {
                    const bool better = mode == Reduce::kMax ? x(r, c) > x(best, c) : x(r, c) < x(best, c);
                    if (better) {
                        best = r;
                    }
                }
                o[c] = x(best, c);
                argext[s * cols + c] = best;
            }
        } else {
            for (std::size_t r = lo; r < hi; ++r) {
                const double* xr = x.row(r).data();
                for (std::size_t c = 0; c < cols; ++c) {
                    o[c] += xr[c];
                }
            }
            if (mode == Reduce::kMean) {
                const double inv = 1.0 / static_cast<double>(hi - lo);
                for (std::size_t c = 0; c < cols; ++c) {
                    o[c] *= inv;
                }
            }
        }
    }
    const std::size_t ia = a.id();
    std::vector<std::size_t> offs(offsets.begin(), offsets.end());
    return t.push(std::move(out), t.any_requires_grad({a}),
                  [ia, offs = std::move(offs), argext = std::move(argext), mode](Tape& tp, std::size_t self) {
                      const Array& g = tp.grad_of(self);
                      Array& ga = tp.grad_of(ia);
                      const std::size_t cols = g.cols();
                      for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
                          const std::size_t lo = offs[s], hi = offs[s + 1];
                          if (lo == hi) {
                              continue;
                          }
                          const double* gs = g.row(s).data();
                          if (mode == Reduce::kMax || mode == Reduce::kMin) {
                              for (std::size_t c = 0; c < cols; ++c) {
                                  ga(argext[s * cols + c], c) += gs[c];
                              }
                              continue;
                          }
                          const double w = mode == Reduce::kMean ? 1.0 / static_cast<double>(hi - lo) : 1.0;
                          for (std::size_t r = lo; r < hi; ++r) {
                              double* dst = ga.row(r).data();
                              for (std::size_t c = 0; c < cols; ++c) {
                                  dst[c] += w * gs[c];
                              }
                          }
                      }
                  });
}

Var layer_norm(Var a, Var gain, Var bias, double eps) {
    Tape& t = tape_of(a, gain, "layer_norm");
    const Array& x = a.value();
    const std::size_t n = x.rows(), d = x.cols();
    if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
        shape_error("layer_norm", x, gain.value());
    }
    Array xhat(n, d);
    std::vector<double> inv_std(n);
    for (std::size_t r = 0; r < n; ++r) {
        double mu = 0.0;
        for (double v : x.row(r)) {
            mu += v;
        }
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (double v : x.row(r)) {
            var += (v - mu) * (v - mu);
        }
        var /= static_cast<double>(d);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < d; ++c) {
            xhat(r, c) = (x(r, c) - mu) * inv_std[r];
        }
    }
    Array out(n, d);
    const Array& gv = gain.value();
    const Array& bv = bias.value();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            out(r, c) = xhat(r, c) * gv[c] + bv[c];
        }
    }
    const std::size_t ia = a.id(), ig = gain.id(), ib = bias.id();
    return t.push(std::move(out), t.any_requires_grad({a, gain, bias}),
                  [ia, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp, std::size_t self) {
                      const Array& g = tp.grad_of(self);
                      const std::size_t n = g.rows(), d = g.cols();
                      if (tp.requires_grad(ig)) {
                          Array& gg = tp.grad_of(ig);
                          for (std::size_t r = 0; r < n; ++r) {
                              for (std::size_t c = 0; c < d; ++c) {
                                  gg[c] += g(r, c) * xhat(r, c);
                              }
                          }
                      }
                      if (tp.requires_grad(ib)) {
                          Array& gb = tp.grad_of(ib);
                          for (std::size_t r = 0; r < n; ++r) {
                              for (std::size_t c = 0; c < d; ++c) {
                                  gb[c] += g(r, c);
                              }
                          }
                      }
                      if (tp.requires_grad(ia)) {
                          const Array& gv = tp.value_of(ig);
                          Array& ga = tp.grad_of(ia);
                          const double inv_d = 1.0 / static_cast<double>(d);
                          for (std::size_t r = 0; r < n; ++r) {
                              double mean_dy = 0.0, mean_dy_xhat = 0.0;
                              for (std::size_t c = 0; c < d; ++c) {
                                  const double dy = g(r, c) * gv[c];
                                  mean_dy += dy;
                                  mean_dy_xhat += dy * xhat(r, c);
                              }
                              mean_dy *= inv_d;
                              mean_dy_xhat *= inv_d;
                              for (std::size_t c = 0; c < d; ++c) {
                                  const double dy = g(r, c) * gv[c];
                                  ga(r, c) += inv_std[r] * (dy - mean_dy - xhat(r, c) * mean_dy_xhat);
                              }
                          }
                      }
                  });
}

Var rotate_pairs(Var a, Var angles) {
    Tape& t = tape_of(a, angles, "rotate_pairs");
    const Array& x = a.value();
    const Array& th = angles.value();
    if (x.cols() % 2 != 0 || th.rows() != x.rows() || th.cols() * 2 != x.cols()) {
        shape_error("rotate_pairs", x, th);
    }
    Array out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t k = 0; k < th.cols(); ++k) {
            const double c = std::cos(th(r, k)), s = std::sin(th(r, k));
            const double x0 = x(r, 2 * k), x1 = x(r, 2 * k + 1);
            out(r, 2 * k) = c * x0 - s * x1;
            out(r, 2 * k + 1) = s * x0 + c * x1;
        }
    }
    const std::size_t ia = a.id(), it = angles.id();
    return t.push(std::move(out), t.any_requires_grad({a, angles}), [ia, it](Tape& tp, std::size_t self) {
        const Array& g = tp.grad_of(self);
        const Array& xv = tp.value_of(ia);
        const Array& thv = tp.value_of(it);
        const bool ga_on = tp.requires_grad(ia), gt_on = tp.requires_grad(it);
        for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t k = 0; k < thv.cols(); ++k) {
                const double c = std::cos(thv(r, k)), s = std::sin(thv(r, k));
                const double g0 = g(r, 2 * k), g1 = g(r, 2 * k + 1);
                if (ga_on) {
                    Array& ga = tp.grad_of(ia);
                    ga(r, 2 * k) += c * g0 + s * g1;
                    ga(r, 2 * k + 1) += -s * g0 + c * g1;
                }
                if (gt_on) {
                    const double x0 = xv(r, 2 * k), x1 = xv(r, 2 * k + 1);
                    tp.grad_of(it)(r, k) += g0 * (-s * x0 - c * x1) + g1 * (c * x0 - s * x1);
                }
            }
        }
    });
}

const char* reduce_name(Reduce mode) {
    switch (mode) {
    case Reduce::kSum:
        return "sum";
    case Reduce::kMean:
        return "mean";
    case Reduce::kMax:
        return "max";
    case Reduce::kMin:
        return "min";
    }
    return "?";
}

Reduce parse_reduce(const std::string& name) {
    if (name == "sum") {
        return Reduce::kSum;
    }
    if (name == "mean") {
        return Reduce::kMean;
    }
    if (name == "max") {
        return Reduce::kMax;
    }
    if (name == "min") {
        return Reduce::kMin;
    }
    throw ConfigError("unknown reduction '" + name + "' (expected sum|mean|max|min)");
}

} // namespace pngnn::diff
