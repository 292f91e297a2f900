#include "nrl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "nrl/kernels.hpp"

namespace nrl {
namespace {

using kernels::active;

[[noreturn]] void shape_error(const char* op, std::span<const std::size_t> a,
                              std::span<const std::size_t> b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              shape_str(a) + " vs " + shape_str(b));
}

// col is (c*kh*kw) x (oh*ow); img is a (c, h, w) slab.
void im2col(const double* img, std::size_t c, std::size_t h, std::size_t w,
            std::size_t kh, std::size_t kw, std::size_t stride,
            std::size_t pad, std::size_t oh, std::size_t ow, double* col) {
  const std::size_t ocols = oh * ow;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = img + ch * h * w;
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        double* row = col + ((ch * kh + ki) * kw + kj) * ocols;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ki) -
              static_cast<std::ptrdiff_t>(pad);
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kj) -
                static_cast<std::ptrdiff_t>(pad);
            double v = 0.0;
            if (iy >= 0 && iy < static_cast<std::ptrdiff_t>(h) && ix >= 0 &&
                ix < static_cast<std::ptrdiff_t>(w)) {
              v = plane[iy * w + ix];
            }
            row[oy * ow + ox] = v;
          }
        }
      }
    }
  }
}

void col2im_accum(const double* col, std::size_t c, std::size_t h,
                  std::size_t w, std::size_t kh, std::size_t kw,
                  std::size_t stride, std::size_t pad, std::size_t oh,
                  std::size_t ow, double* img) {
  const std::size_t ocols = oh * ow;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double* plane = img + ch * h * w;
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const double* row = col + ((ch * kh + ki) * kw + kj) * ocols;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ki) -
              static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kj) -
                static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            plane[iy * w + ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

constexpr double kBnEps = 1e-9;
constexpr double kRowNormFloor = 1e-12;
constexpr double kStdEps = 1e-9;

}  // namespace

int Graph::emit(Tensor value, std::function<void(Graph&, int)> backprop,
                const char* opname) {
  ensure_finite(value.data, opname);
  nodes_.push_back(Node{std::move(value), {}, std::move(backprop), nullptr});
  return static_cast<int>(nodes_.size()) - 1;
}

double* Graph::grad_buf(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad.data();
}

std::span<const double> Graph::grad(int id) const {
  return {nodes_[id].grad.data(), nodes_[id].grad.size()};
}

int Graph::input(Tensor t) { return emit(std::move(t), nullptr, "input"); }

int Graph::param(Param& p) {
  const int id = emit(Tensor(p.shape, p.value), nullptr, p.name.c_str());
  nodes_[id].bound = &p;
  return id;
}

int Graph::add(int a, int b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  const bool broadcast = ta.shape.size() == 2 && tb.shape.size() == 1 &&
                         ta.shape[1] == tb.shape[0];
  if (!broadcast && ta.shape != tb.shape) shape_error("add", ta.shape, tb.shape);

  Tensor out(ta.shape);
  if (broadcast) {
    const std::size_t rows = ta.shape[0], cols = ta.shape[1];
    for (std::size_t i = 0; i < rows; ++i) {
      active().add(ta.data.data() + i * cols, tb.data.data(),
                   out.data.data() + i * cols, cols);
    }
  } else {
    active().add(ta.data.data(), tb.data.data(), out.data.data(), ta.size());
  }
  return emit(std::move(out),
              [a, b, broadcast](Graph& g, int self) {
                const auto& gr = g.nodes_[self].grad;
                active().axpy(1.0, gr.data(), g.grad_buf(a), gr.size());
                if (broadcast) {
                  const std::size_t cols = g.nodes_[b].value.shape[0];
                  const std::size_t rows = gr.size() / cols;
                  double* db = g.grad_buf(b);
                  for (std::size_t i = 0; i < rows; ++i) {
                    active().axpy(1.0, gr.data() + i * cols, db, cols);
                  }
                } else {
                  active().axpy(1.0, gr.data(), g.grad_buf(b), gr.size());
                }
              },
              "add");
}

int Graph::mul(int a, int b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (ta.shape != tb.shape) shape_error("mul", ta.shape, tb.shape);
  Tensor out(ta.shape);
  active().mul(ta.data.data(), tb.data.data(), out.data.data(), ta.size());
  return emit(std::move(out),
              [a, b](Graph& g, int self) {
                const auto& gr = g.nodes_[self].grad;
                const std::size_t n = gr.size();
                std::vector<double> tmp(n);
                active().mul(gr.data(), g.nodes_[b].value.data.data(),
                             tmp.data(), n);
                active().axpy(1.0, tmp.data(), g.grad_buf(a), n);
                active().mul(gr.data(), g.nodes_[a].value.data.data(),
                             tmp.data(), n);
                active().axpy(1.0, tmp.data(), g.grad_buf(b), n);
              },
              "mul");
}

int Graph::relu(int a) {
  const Tensor& ta = nodes_[a].value;
  Tensor out(ta.shape);
  active().relu(ta.data.data(), out.data.data(), ta.size());
  return emit(std::move(out),
              [a](Graph& g, int self) {
                const auto& gr = g.nodes_[self].grad;
                active().relu_backward(g.nodes_[a].value.data.data(), gr.data(),
                                       g.grad_buf(a), gr.size());
              },
              "relu");
}

int Graph::scalar_mul(int a, double s) {
  const Tensor& ta = nodes_[a].value;
  Tensor out(ta.shape);
  active().scale(ta.data.data(), s, out.data.data(), ta.size());
  return emit(std::move(out),
              [a, s](Graph& g, int self) {
                const auto& gr = g.nodes_[self].grad;
                active().axpy(s, gr.data(), g.grad_buf(a), gr.size());
              },
              "scalar_mul");
}

int Graph::matmul(int a, int b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (ta.shape.size() != 2 || tb.shape.size() != 2 ||
      ta.shape[1] != tb.shape[0]) {
    shape_error("matmul", ta.shape, tb.shape);
  }
  const std::size_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
  Tensor out({m, n});
  active().gemm(m, n, k, ta.data.data(), tb.data.data(), out.data.data(),
                false);
  return emit(std::move(out),
              [a, b, m, k, n](Graph& g, int self) {
                const auto& gr = g.nodes_[self].grad;
                // dA += G * B^T
                std::vector<double> bt(k * n);
                transpose(g.nodes_[b].value.data.data(), bt.data(), k, n);
                active().gemm(m, k, n, gr.data(), bt.data(), g.grad_buf(a),
                              true);
                // dB += A^T * G
                std::vector<double> at(m * k);
                transpose(g.nodes_[a].value.data.data(), at.data(), m, k);
                active().gemm(k, n, m, at.data(), gr.data(), g.grad_buf(b),
                              true);
              },
              "matmul");
}

int Graph::reshape(int a, std::vector<std::size_t> new_shape) {
  const Tensor& ta = nodes_[a].value;
  if (shape_size(new_shape) != ta.size()) {
    shape_error("reshape", ta.shape, new_shape);
  }
  Tensor out(std::move(new_shape), ta.data);
  return emit(std::move(out),
              [a](Graph& g, int self) {
                const auto& gr = g.nodes_[self].grad;
                active().axpy(1.0, gr.data(), g.grad_buf(a), gr.size());
              },
              "reshape");
}

int Graph::concat_batch(int a, int b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (ta.shape.size() != tb.shape.size() || ta.shape.empty() ||
      !std::equal(ta.shape.begin() + 1, ta.shape.end(), tb.shape.begin() + 1)) {
    shape_error("concat_batch", ta.shape, tb.shape);
  }
  std::vector<std::size_t> shape = ta.shape;
  shape[0] += tb.shape[0];
  Tensor out(shape);
  std::copy(ta.data.begin(), ta.data.end(), out.data.begin());
  std::copy(tb.data.begin(), tb.data.end(), out.data.begin() + ta.size());
  const std::size_t na = ta.size();
  return emit(std::move(out),
              [a, b, na](Graph& g, int self) {
                const auto& gr = g.nodes_[self].grad;
                active().axpy(1.0, gr.data(), g.grad_buf(a), na);
                active().axpy(1.0, gr.data() + na, g.grad_buf(b),
                              gr.size() - na);
              },
              "concat_batch");
}

int Graph::slice_rows(int a, std::size_t begin, std::size_t end) {
  const Tensor& ta = nodes_[a].value;
  if (ta.shape.empty() || begin >= end || end > ta.shape[0]) {
    throw std::invalid_argument("slice_rows: range [" + std::to_string(begin) +
                                ", " + std::to_string(end) +
                                ") invalid for shape " + shape_str(ta.shape));
  }
  std::vector<std::size_t> shape = ta.shape;
  shape[0] = end - begin;
  const std::size_t row = ta.size() / ta.shape[0];
  Tensor out(shape);
  std::copy(ta.data.begin() + begin * row, ta.data.begin() + end * row,
            out.data.begin());
  return emit(std::move(out),
              [a, begin, row](Graph& g, int self) {
                const auto& gr = g.nodes_[self].grad;
                active().axpy(1.0, gr.data(), g.grad_buf(a) + begin * row,
                              gr.size());
              },
              "slice_rows");
}

int Graph::l2_normalize_rows(int a) {
  const Tensor& ta = nodes_[a].value;
  if (ta.shape.size() != 2) {
    throw std::invalid_argument("l2_normalize_rows: expected 2-d input, got " +
                                shape_str(ta.shape));
  }
  const std::size_t n = ta.shape[0], p = ta.shape[1];
  Tensor out({n, p});
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < p; ++j) s += ta(i, j) * ta(i, j);
    norms[i] = std::max(std::sqrt(s), kRowNormFloor);
    for (std::size_t j = 0; j < p; ++j) out(i, j) = ta(i, j) / norms[i];
  }
  return emit(std::move(out),
              [a, n, p, norms = std::move(norms)](Graph& g, int self) {
                const auto& gr = g.nodes_[self].grad;
                const Tensor& u = g.nodes_[self].value;
                double* da = g.grad_buf(a);
                for (std::size_t i = 0; i < n; ++i) {
                  double dot = 0.0;
                  for (std::size_t j = 0; j < p; ++j) {
                    dot += gr[i * p + j] * u(i, j);
                  }
                  for (std::size_t j = 0; j < p; ++j) {
                    da[i * p + j] +=
                        (gr[i * p + j] - dot * u(i, j)) / norms[i];
                  }
                }
              },
              "l2_normalize_rows");
}

int Graph::global_avg_pool(int a) {
  const Tensor& ta = nodes_[a].value;
  if (ta.shape.size() != 4) {
    throw std::invalid_argument("global_avg_pool: expected 4-d input, got " +
                                shape_str(ta.shape));
  }
  const std::size_t n = ta.shape[0], c = ta.shape[1],
                    hw = ta.shape[2] * ta.shape[3];
  Tensor out({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* slab = ta.data.data() + (i * c + ch) * hw;
      double s = 0.0;
      for (std::size_t k = 0; k < hw; ++k) s += slab[k];
      out(i, ch) = s / static_cast<double>(hw);
    }
  }
  return emit(std::move(out),
              [a, n, c, hw](Graph& g, int self) {
                const auto& gr = g.nodes_[self].grad;
                double* da = g.grad_buf(a);
                const double inv = 1.0 / static_cast<double>(hw);
                for (std::size_t i = 0; i < n; ++i) {
                  for (std::size_t ch = 0; ch < c; ++ch) {
                    const double gv = gr[i * c + ch] * inv;
                    double* slab = da + (i * c + ch) * hw;
                    for (std::size_t k = 0; k < hw; ++k) slab[k] += gv;
                  }
                }
              },
              "global_avg_pool");
}

int Graph::conv2d(int x, int w, std::size_t stride, std::size_t pad) {
  const Tensor& tx = nodes_[x].value;
  const Tensor& tw = nodes_[w].value;
  if (tx.shape.size() != 4 || tw.shape.size() != 4 ||
      tx.shape[1] != tw.shape[1]) {
    shape_error("conv2d", tx.shape, tw.shape);
  }
  const std::size_t n = tx.shape[0], c = tx.shape[1], h = tx.shape[2],
                    ww = tx.shape[3];
  const std::size_t f = tw.shape[0], kh = tw.shape[2], kw = tw.shape[3];
  if (stride == 0 || h + 2 * pad < kh || ww + 2 * pad < kw) {
    shape_error("conv2d", tx.shape, tw.shape);
  }
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (ww + 2 * pad - kw) / stride + 1;
  const std::size_t ckk = c * kh * kw;
  const std::size_t ocols = oh * ow;

  Tensor out({n, f, oh, ow});
  std::vector<double> col(ckk * ocols);
  for (std::size_t b = 0; b < n; ++b) {
    im2col(tx.data.data() + b * c * h * ww, c, h, ww, kh, kw, stride, pad, oh,
           ow, col.data());
    active().gemm(f, ocols, ckk, tw.data.data(), col.data(),
                  out.data.data() + b * f * ocols, false);
  }
  return emit(
      std::move(out),
      [x, w, stride, pad, n, c, h, ww, f, kh, kw, oh, ow, ckk,
       ocols](Graph& g, int self) {
        const auto& gr = g.nodes_[self].grad;
        const Tensor& tx = g.nodes_[x].value;
        const Tensor& tw = g.nodes_[w].value;
        double* dx = g.grad_buf(x);
        double* dw = g.grad_buf(w);
        std::vector<double> col(ckk * ocols);
        std::vector<double> colT(ocols * ckk);
        std::vector<double> wT(ckk * f);
        std::vector<double> dcol(ckk * ocols);
        transpose(tw.data.data(), wT.data(), f, ckk);
        for (std::size_t b = 0; b < n; ++b) {
          const double* dy = gr.data() + b * f * ocols;
          // dW += dy * col^T (col recomputed; cheap next to the gemms)
          im2col(tx.data.data() + b * c * h * ww, c, h, ww, kh, kw, stride,
                 pad, oh, ow, col.data());
          transpose(col.data(), colT.data(), ckk, ocols);
          active().gemm(f, ckk, ocols, dy, colT.data(), dw, true);
          // dx += col2im(W^T * dy)
          active().gemm(ckk, ocols, f, wT.data(), dy, dcol.data(), false);
          col2im_accum(dcol.data(), c, h, ww, kh, kw, stride, pad, oh, ow,
                       dx + b * c * h * ww);
        }
      },
      "conv2d");
}

int Graph::batchnorm2d(int x, int gamma, int beta, BnBuffer& buf,
                       NormMode mode, double momentum) {
  if (mode == NormMode::unset) {
    throw std::invalid_argument("batchnorm2d: mode unset");
  }
  const Tensor& tx = nodes_[x].value;
  const Tensor& tg = nodes_[gamma].value;
  const Tensor& tb = nodes_[beta].value;
  if (tx.shape.size() != 4 || tg.shape.size() != 1 ||
      tg.shape[0] != tx.shape[1] || tb.shape != tg.shape) {
    shape_error("batchnorm2d", tx.shape, tg.shape);
  }
  const std::size_t n = tx.shape[0], c = tx.shape[1],
                    hw = tx.shape[2] * tx.shape[3];
  const std::size_t m = n * hw;

  Tensor out(tx.shape);
  if (mode == NormMode::eval) {
    std::vector<double> rinv(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
      rinv[ch] = 1.0 / std::sqrt(buf.running_var[ch] + kBnEps);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* src = tx.data.data() + (i * c + ch) * hw;
        double* dst = out.data.data() + (i * c + ch) * hw;
        const double a = tg(ch) * rinv[ch];
        const double b = tb(ch) - a * buf.running_mean[ch];
        for (std::size_t k = 0; k < hw; ++k) dst[k] = a * src[k] + b;
      }
    }
    return emit(std::move(out),
                [x, gamma, beta, n, c, hw, rinv = std::move(rinv),
                 rmean = buf.running_mean](Graph& g, int self) {
                  const auto& gr = g.nodes_[self].grad;
                  const Tensor& tx = g.nodes_[x].value;
                  const Tensor& tg = g.nodes_[gamma].value;
                  double* dx = g.grad_buf(x);
                  double* dg = g.grad_buf(gamma);
                  double* db = g.grad_buf(beta);
                  for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                      const std::size_t off = (i * c + ch) * hw;
                      const double a = tg(ch) * rinv[ch];
                      for (std::size_t k = 0; k < hw; ++k) {
                        const double gv = gr[off + k];
                        dx[off + k] += a * gv;
                        dg[ch] +=
                            gv * (tx.data[off + k] - rmean[ch]) * rinv[ch];
                        db[ch] += gv;
                      }
                    }
                  }
                },
                "batchnorm2d");
  }

  // train mode
  std::vector<double> mean(c, 0.0), invstd(c), xhat(tx.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* src = tx.data.data() + (i * c + ch) * hw;
      for (std::size_t k = 0; k < hw; ++k) s += src[k];
    }
    mean[ch] = s / static_cast<double>(m);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* src = tx.data.data() + (i * c + ch) * hw;
      for (std::size_t k = 0; k < hw; ++k) {
        const double d = src[k] - mean[ch];
        v += d * d;
      }
    }
    const double var = v / static_cast<double>(m);
    invstd[ch] = 1.0 / std::sqrt(var + kBnEps);
    buf.running_mean[ch] = momentum * buf.running_mean[ch] +
                           (1.0 - momentum) * mean[ch];
    buf.running_var[ch] =
        momentum * buf.running_var[ch] + (1.0 - momentum) * var;
    for (std::size_t i = 0; i < n; ++i) {
      const double* src = tx.data.data() + (i * c + ch) * hw;
      double* xh = xhat.data() + (i * c + ch) * hw;
      double* dst = out.data.data() + (i * c + ch) * hw;
      for (std::size_t k = 0; k < hw; ++k) {
        xh[k] = (src[k] - mean[ch]) * invstd[ch];
        dst[k] = tg(ch) * xh[k] + tb(ch);
      }
    }
  }
  return emit(
      std::move(out),
      [x, gamma, beta, n, c, hw, m, invstd = std::move(invstd),
       xhat = std::move(xhat)](Graph& g, int self) {
        const auto& gr = g.nodes_[self].grad;
        const Tensor& tg = g.nodes_[gamma].value;
        double* dx = g.grad_buf(x);
        double* dg = g.grad_buf(gamma);
        double* db = g.grad_buf(beta);
        const double invm = 1.0 / static_cast<double>(m);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * c + ch) * hw;
            for (std::size_t k = 0; k < hw; ++k) {
              sum_g += gr[off + k];
              sum_gx += gr[off + k] * xhat[off + k];
            }
          }
          dg[ch] += sum_gx;
          db[ch] += sum_g;
          const double a = tg(ch) * invstd[ch];
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * c + ch) * hw;
            for (std::size_t k = 0; k < hw; ++k) {
              dx[off + k] += a * (gr[off + k] - sum_g * invm -
                                  xhat[off + k] * sum_gx * invm);
            }
          }
        }
      },
      "batchnorm2d");
}

int Graph::sum(int a) {
  const Tensor& ta = nodes_[a].value;
  double s = 0.0;
  for (const double v : ta.data) s += v;
  return emit(Tensor({1}, {s}),
              [a](Graph& g, int self) {
                const double gv = g.nodes_[self].grad[0];
                double* da = g.grad_buf(a);
                const std::size_t n = g.nodes_[a].value.size();
                for (std::size_t i = 0; i < n; ++i) da[i] += gv;
              },
              "sum");
}

int Graph::softmax_cross_entropy(int logits, std::vector<std::size_t> targets) {
  const Tensor& tl = nodes_[logits].value;
  if (tl.shape.size() != 2 || tl.shape[1] < 2) {
    throw std::invalid_argument("softmax_cross_entropy: expected (n, K>=2) logits, got " +
                                shape_str(tl.shape));
  }
  const std::size_t n = tl.shape[0], k = tl.shape[1];
  if (targets.size() != n) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(n) +
                                " rows but " + std::to_string(targets.size()) +
                                " targets");
  }
  for (const std::size_t t : targets) {
    if (t >= k) {
      throw std::invalid_argument("softmax_cross_entropy: target " +
                                  std::to_string(t) + " out of range [0, " +
                                  std::to_string(k) + ")");
    }
  }
  std::vector<double> probs(n * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = tl.data.data() + i * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double logz = std::log(z) + mx;
    for (std::size_t j = 0; j < k; ++j) {
      probs[i * k + j] = std::exp(row[j] - logz);
    }
    loss += logz - row[targets[i]];
  }
  loss /= static_cast<double>(n);
  return emit(Tensor({1}, {loss}),
              [logits, n, k, targets = std::move(targets),
               probs = std::move(probs)](Graph& g, int self) {
                const double gv = g.nodes_[self].grad[0] / static_cast<double>(n);
                double* dl = g.grad_buf(logits);
                for (std::size_t i = 0; i < n; ++i) {
                  for (std::size_t j = 0; j < k; ++j) {
                    double p = probs[i * k + j];
                    if (j == targets[i]) p -= 1.0;
                    dl[i * k + j] += gv * p;
                  }
                }
              },
              "softmax_cross_entropy");
}

int Graph::nt_xent(int za, int zb, double tau) {
  const Tensor& ta = nodes_[za].value;
  const Tensor& tb = nodes_[zb].value;
  if (ta.shape.size() != 2 || ta.shape != tb.shape) {
    shape_error("nt_xent", ta.shape, tb.shape);
  }
  if (ta.shape[0] == 0) throw std::invalid_argument("nt_xent: empty batch");
  if (tau <= 0.0) throw std::invalid_argument("nt_xent: tau must be positive");
  const std::size_t n = ta.shape[0], p = ta.shape[1];
  const std::size_t nn = 2 * n;

  // row-normalized stacked embeddings
  std::vector<double> u(nn * p), norms(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    const double* src = (i < n) ? ta.data.data() + i * p
                                : tb.data.data() + (i - n) * p;
    double s = 0.0;
    for (std::size_t j = 0; j < p; ++j) s += src[j] * src[j];
    norms[i] = std::max(std::sqrt(s), kRowNormFloor);
    for (std::size_t j = 0; j < p; ++j) u[i * p + j] = src[j] / norms[i];
  }
  // similarity matrix S = u u^T / tau
  std::vector<double> ut(p * nn), sim(nn * nn);
  transpose(u.data(), ut.data(), nn, p);
  kernels::active().gemm(nn, nn, p, u.data(), ut.data(), sim.data(), false);
  for (double& v : sim) v /= tau;

  std::vector<double> lse(nn);
  double loss = 0.0;
  for (std::size_t a = 0; a < nn; ++a) {
    const std::size_t pos = (a + n) % nn;
    double mx = -1e300;
    for (std::size_t k = 0; k < nn; ++k) {
      if (k != a) mx = std::max(mx, sim[a * nn + k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < nn; ++k) {
      if (k != a) z += std::exp(sim[a * nn + k] - mx);
    }
    lse[a] = mx + std::log(z);
    loss += lse[a] - sim[a * nn + pos];
  }
  loss /= static_cast<double>(nn);

  return emit(
      Tensor({1}, {loss}),
      [za, zb, tau, n, p, nn, u = std::move(u), norms = std::move(norms),
       sim = std::move(sim), lse = std::move(lse)](Graph& g, int self) {
        const double gv = g.nodes_[self].grad[0];
        // dL/dS over non-diagonal entries
        std::vector<double> gs(nn * nn, 0.0);
        const double scale = gv / static_cast<double>(nn);
        for (std::size_t a = 0; a < nn; ++a) {
          const std::size_t pos = (a + n) % nn;
          for (std::size_t k = 0; k < nn; ++k) {
            if (k == a) continue;
            double d = std::exp(sim[a * nn + k] - lse[a]);
            if (k == pos) d -= 1.0;
            gs[a * nn + k] = scale * d;
          }
        }
        // du = (gs + gs^T) u / tau
        std::vector<double> gsym(nn * nn);
        for (std::size_t a = 0; a < nn; ++a) {
          for (std::size_t k = 0; k < nn; ++k) {
            gsym[a * nn + k] = gs[a * nn + k] + gs[k * nn + a];
          }
        }
        std::vector<double> du(nn * p);
        kernels::active().gemm(nn, p, nn, gsym.data(), u.data(), du.data(),
                               false);
        for (double& v : du) v /= tau;
        // through the row normalization
        double* da = g.grad_buf(za);
        double* db = g.grad_buf(zb);
        for (std::size_t i = 0; i < nn; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < p; ++j) dot += du[i * p + j] * u[i * p + j];
          double* dst = (i < n) ? da + i * p : db + (i - n) * p;
          for (std::size_t j = 0; j < p; ++j) {
            dst[j] += (du[i * p + j] - dot * u[i * p + j]) / norms[i];
          }
        }
      },
      "nt_xent");
}

int Graph::barlow_twins(int za, int zb, double lambda) {
  const Tensor& ta = nodes_[za].value;
  const Tensor& tb = nodes_[zb].value;
  if (ta.shape.size() != 2 || ta.shape != tb.shape) {
    shape_error("barlow_twins", ta.shape, tb.shape);
  }
  const std::size_t n = ta.shape[0], p = ta.shape[1];
  if (n < 2) {
    throw std::invalid_argument(
        "barlow_twins: batch standardization needs n >= 2, got n = " +
        std::to_string(n));
  }
  if (lambda < 0.0) throw std::invalid_argument("barlow_twins: lambda < 0");

  auto standardize = [&](const Tensor& t, std::vector<double>& y,
                         std::vector<double>& sigma) {
    y.resize(n * p);
    sigma.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
      double mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) mu += t(i, j);
      mu /= static_cast<double>(n);
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = t(i, j) - mu;
        v += d * d;
      }
      sigma[j] = std::sqrt(v / static_cast<double>(n));
      if (sigma[j] == 0.0) {
        diagnostics.push_back("barlow_twins: zero-variance embedding column " +
                              std::to_string(j));
      }
      const double denom = sigma[j] + kStdEps;
      for (std::size_t i = 0; i < n; ++i) y[i * p + j] = (t(i, j) - mu) / denom;
    }
  };
  std::vector<double> ya, yb, sa, sb;
  standardize(ta, ya, sa);
  standardize(tb, yb, sb);

  // cross-correlation C = ya^T yb / n
  std::vector<double> yat(p * n), corr(p * p);
  transpose(ya.data(), yat.data(), n, p);
  kernels::active().gemm(p, p, n, yat.data(), yb.data(), corr.data(), false);
  for (double& v : corr) v /= static_cast<double>(n);

  double loss = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double cij = corr[i * p + j];
      loss += (i == j) ? (1.0 - cij) * (1.0 - cij) : lambda * cij * cij;
    }
  }

  return emit(
      Tensor({1}, {loss}),
      [za, zb, lambda, n, p, ya = std::move(ya), yb = std::move(yb),
       sa = std::move(sa), sb = std::move(sb),
       corr = std::move(corr)](Graph& g, int self) {
        const double gv = g.nodes_[self].grad[0];
        std::vector<double> dcorr(p * p);
        for (std::size_t i = 0; i < p; ++i) {
          for (std::size_t j = 0; j < p; ++j) {
            const double cij = corr[i * p + j];
            dcorr[i * p + j] =
                gv * ((i == j) ? -2.0 * (1.0 - cij) : 2.0 * lambda * cij);
          }
        }
        // d ya = yb dC^T / n ; d yb = ya dC / n
        std::vector<double> dct(p * p);
        transpose(dcorr.data(), dct.data(), p, p);
        std::vector<double> dya(n * p), dyb(n * p);
        kernels::active().gemm(n, p, p, yb.data(), dct.data(), dya.data(),
                               false);
        kernels::active().gemm(n, p, p, ya.data(), dcorr.data(), dyb.data(),
                               false);
        const double invn = 1.0 / static_cast<double>(n);
        for (double& v : dya) v *= invn;
        for (double& v : dyb) v *= invn;

        // backward through the per-column standardization
        auto destandardize = [&](const std::vector<double>& y,
                                 const std::vector<double>& sigma,
                                 const std::vector<double>& dy, double* dx) {
          for (std::size_t j = 0; j < p; ++j) {
            const double denom = sigma[j] + kStdEps;
            double gmean = 0.0, gy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
              gmean += dy[i * p + j];
              gy += dy[i * p + j] * y[i * p + j];
            }
            gmean *= invn;
            // d sigma / dx_i = (x_i - mu) / (n sigma) = y_i * denom / (n sigma)
            const double k =
                sigma[j] > 0.0 ? gy * denom / (static_cast<double>(n) * sigma[j])
                               : 0.0;
            for (std::size_t i = 0; i < n; ++i) {
              dx[i * p + j] +=
                  (dy[i * p + j] - gmean - k * y[i * p + j]) / denom;
            }
          }
        };
        destandardize(ya, sa, dya, g.grad_buf(za));
        destandardize(yb, sb, dyb, g.grad_buf(zb));
      },
      "barlow_twins");
}

void Graph::backward(int loss) {
  if (backward_done_) {
    throw std::runtime_error("backward: double-backward is unsupported");
  }
  if (nodes_[loss].value.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(nodes_[loss].value.shape));
  }
  backward_done_ = true;
  grad_buf(loss)[0] = 1.0;
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& nd = nodes_[id];
    if (nd.grad.empty()) continue;  // no gradient flowed here
    if (nd.backprop) nd.backprop(*this, id);
    if (nd.bound) {
      kernels::active().axpy(1.0, nd.grad.data(), nd.bound->grad.data(),
                             nd.grad.size());
    }
  }
  // registered parameters the loss never touched keep their zero gradient
  for (Node& nd : nodes_) {
    if (nd.bound) nd.bound->grad_ready = true;
  }
}

}  // namespace nrl
