#pragma once

// Reverse-mode tape over RealArray. Ops append nodes in evaluation order;
// backward() replays closures in reverse, accumulating into parent grads.
// Gradients are only allocated and propagated where a trainable leaf sits
// underneath. A tape is built fresh for every forward pass.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "ephyslab/ndcore.hpp"

namespace ephyslab::autodiff {

using ndcore::RealArray;

struct Node {
  RealArray value;
  RealArray grad;  // allocated only when needs_grad
  std::function<void()> back;
  bool needs_grad = false;
};

struct Var {
  Node* node = nullptr;

  const RealArray& val() const { return node->value; }
  const RealArray& grad() const {
    assert(node->needs_grad);
    return node->grad;
  }
  std::int64_t dim(int i) const { return node->value.dim(i); }
  int rank() const { return node->value.rank(); }
};

class Tape {
 public:
  Var leaf(RealArray v, bool needs_grad) {
    Node* n = push(std::move(v), needs_grad);
    return Var{n};
  }
  Var constant(RealArray v) { return leaf(std::move(v), false); }

  // ---- elementwise ----

  Var add(Var a, Var b) {
    assert(a.val().shape == b.val().shape);
    Node* n = push(ndcore::add(a.val(), b.val()), a.node->needs_grad || b.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, a, b] {
        accumulate(a, n->grad.data);
        accumulate(b, n->grad.data);
      };
    return Var{n};
  }

  Var sub(Var a, Var b) {
    assert(a.val().shape == b.val().shape);
    Node* n = push(ndcore::sub(a.val(), b.val()), a.node->needs_grad || b.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, a, b] {
        accumulate(a, n->grad.data);
        if (b.node->needs_grad)
          for (std::size_t i = 0; i < n->grad.data.size(); ++i)
            b.node->grad.data[i] -= n->grad.data[i];
      };
    return Var{n};
  }

  Var mul(Var a, Var b) {
    assert(a.val().shape == b.val().shape);
    Node* n = push(ndcore::mul(a.val(), b.val()), a.node->needs_grad || b.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, a, b] {
        if (a.node->needs_grad)
          for (std::size_t i = 0; i < n->grad.data.size(); ++i)
            a.node->grad.data[i] += n->grad.data[i] * b.node->value.data[i];
        if (b.node->needs_grad)
          for (std::size_t i = 0; i < n->grad.data.size(); ++i)
            b.node->grad.data[i] += n->grad.data[i] * a.node->value.data[i];
      };
    return Var{n};
  }

  Var scale(Var a, double c) {
    Node* n = push(ndcore::scale(a.val(), c), a.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, a, c] {
        for (std::size_t i = 0; i < n->grad.data.size(); ++i)
          a.node->grad.data[i] += c * n->grad.data[i];
      };
    return Var{n};
  }

  // y = a + s * mask, with s a single-element variable and mask a constant
  Var add_scalar_mask(Var a, Var s, Var mask) {
    assert(s.val().size() == 1 && a.val().shape == mask.val().shape);
    RealArray v = a.val();
    const double sv = s.val().data[0];
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] += sv * mask.val().data[i];
    Node* n = push(std::move(v), a.node->needs_grad || s.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, a, s, mask] {
        accumulate(a, n->grad.data);
        if (s.node->needs_grad) {
          double acc = 0.0;
          for (std::size_t i = 0; i < n->grad.data.size(); ++i)
            acc += n->grad.data[i] * mask.node->value.data[i];
          s.node->grad.data[0] += acc;
        }
      };
    return Var{n};
  }

  Var silu(Var x) {
    RealArray v = x.val();
    for (auto& e : v.data) e = e * sigmoid(e);
    Node* n = push(std::move(v), x.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, x] {
        for (std::size_t i = 0; i < n->grad.data.size(); ++i) {
          const double xi = x.node->value.data[i];
          const double sg = sigmoid(xi);
          x.node->grad.data[i] += n->grad.data[i] * sg * (1.0 + xi * (1.0 - sg));
        }
      };
    return Var{n};
  }

  // ---- matrix products ----

  Var matmul(Var a, Var b) {
    Node* n = push(ndcore::matmul(a.val(), b.val()), a.node->needs_grad || b.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, a, b] {
        const RealArray& A = a.node->value;
        const RealArray& B = b.node->value;
        const std::int64_t m = A.dim(0), k = A.dim(1), c = B.dim(1);
        if (a.node->needs_grad) {
          for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < c; ++j) {
              const double g = n->grad.data[static_cast<std::size_t>(i * c + j)];
              if (g == 0.0) continue;
              for (std::int64_t p = 0; p < k; ++p)
                a.node->grad.data[static_cast<std::size_t>(i * k + p)] +=
                    g * B.data[static_cast<std::size_t>(p * c + j)];
            }
        }
        if (b.node->needs_grad) {
          for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t p = 0; p < k; ++p) {
              const double av = A.data[static_cast<std::size_t>(i * k + p)];
              if (av == 0.0) continue;
              for (std::int64_t j = 0; j < c; ++j)
                b.node->grad.data[static_cast<std::size_t>(p * c + j)] +=
                    av * n->grad.data[static_cast<std::size_t>(i * c + j)];
            }
        }
      };
    return Var{n};
  }

  // y = a * b^T with a [R x K], b [C x K]
  Var matmul_nt(Var a, Var b) {
    assert(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1));
    const std::int64_t r = a.dim(0), k = a.dim(1), c = b.dim(0);
    RealArray v({r, c});
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j) {
        double acc = 0.0;
        for (std::int64_t p = 0; p < k; ++p)
          acc += a.val().data[static_cast<std::size_t>(i * k + p)] *
                 b.val().data[static_cast<std::size_t>(j * k + p)];
        v.data[static_cast<std::size_t>(i * c + j)] = acc;
      }
    Node* n = push(std::move(v), a.node->needs_grad || b.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, a, b, r, k, c] {
        for (std::int64_t i = 0; i < r; ++i)
          for (std::int64_t j = 0; j < c; ++j) {
            const double g = n->grad.data[static_cast<std::size_t>(i * c + j)];
            if (g == 0.0) continue;
            if (a.node->needs_grad)
              for (std::int64_t p = 0; p < k; ++p)
                a.node->grad.data[static_cast<std::size_t>(i * k + p)] +=
                    g * b.node->value.data[static_cast<std::size_t>(j * k + p)];
            if (b.node->needs_grad)
              for (std::int64_t p = 0; p < k; ++p)
                b.node->grad.data[static_cast<std::size_t>(j * k + p)] +=
                    g * a.node->value.data[static_cast<std::size_t>(i * k + p)];
          }
      };
    return Var{n};
  }

  Var add_row_broadcast(Var x, Var b) {
    assert(x.rank() == 2 && b.rank() == 1 && x.dim(1) == b.dim(0));
    RealArray v = x.val();
    const std::int64_t r = x.dim(0), c = x.dim(1);
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j)
        v.data[static_cast<std::size_t>(i * c + j)] += b.val().data[static_cast<std::size_t>(j)];
    Node* n = push(std::move(v), x.node->needs_grad || b.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, x, b, r, c] {
        accumulate(x, n->grad.data);
        if (b.node->needs_grad)
          for (std::int64_t i = 0; i < r; ++i)
            for (std::int64_t j = 0; j < c; ++j)
              b.node->grad.data[static_cast<std::size_t>(j)] +=
                  n->grad.data[static_cast<std::size_t>(i * c + j)];
      };
    return Var{n};
  }

  // ---- row plumbing ----

  // each row of x repeated `times` consecutive times
  Var repeat_rows(Var x, std::int64_t times) {
    assert(x.rank() == 2 && times >= 1);
    const std::int64_t r = x.dim(0), c = x.dim(1);
    RealArray v({r * times, c});
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t t = 0; t < times; ++t)
        for (std::int64_t j = 0; j < c; ++j)
          v.data[static_cast<std::size_t>(((i * times) + t) * c + j)] =
              x.val().data[static_cast<std::size_t>(i * c + j)];
    Node* n = push(std::move(v), x.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, x, r, c, times] {
        for (std::int64_t i = 0; i < r; ++i)
          for (std::int64_t t = 0; t < times; ++t)
            for (std::int64_t j = 0; j < c; ++j)
              x.node->grad.data[static_cast<std::size_t>(i * c + j)] +=
                  n->grad.data[static_cast<std::size_t>(((i * times) + t) * c + j)];
      };
    return Var{n};
  }

  Var gather_rows(Var x, std::vector<std::int64_t> idx) {
    assert(x.rank() == 2);
    const std::int64_t c = x.dim(1);
    RealArray v({static_cast<std::int64_t>(idx.size()), c});
    for (std::size_t q = 0; q < idx.size(); ++q) {
      assert(idx[q] >= 0 && idx[q] < x.dim(0));
      for (std::int64_t j = 0; j < c; ++j)
        v.data[q * static_cast<std::size_t>(c) + static_cast<std::size_t>(j)] =
            x.val().data[static_cast<std::size_t>(idx[q] * c + j)];
    }
    Node* n = push(std::move(v), x.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, x, c, idx = std::move(idx)] {
        for (std::size_t q = 0; q < idx.size(); ++q)
          for (std::int64_t j = 0; j < c; ++j)
            x.node->grad.data[static_cast<std::size_t>(idx[q] * c + j)] +=
                n->grad.data[q * static_cast<std::size_t>(c) + static_cast<std::size_t>(j)];
      };
    return Var{n};
  }

  // rows of x added into a zero [out_rows x C] matrix at positions idx
  Var scatter_add_rows(std::int64_t out_rows, Var x, std::vector<std::int64_t> idx) {
    assert(x.rank() == 2 && static_cast<std::int64_t>(idx.size()) == x.dim(0));
    const std::int64_t c = x.dim(1);
    RealArray v({out_rows, c});
    for (std::size_t q = 0; q < idx.size(); ++q) {
      assert(idx[q] >= 0 && idx[q] < out_rows);
      for (std::int64_t j = 0; j < c; ++j)
        v.data[static_cast<std::size_t>(idx[q] * c + j)] +=
            x.val().data[q * static_cast<std::size_t>(c) + static_cast<std::size_t>(j)];
    }
    Node* n = push(std::move(v), x.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, x, c, idx = std::move(idx)] {
        for (std::size_t q = 0; q < idx.size(); ++q)
          for (std::int64_t j = 0; j < c; ++j)
            x.node->grad.data[q * static_cast<std::size_t>(c) + static_cast<std::size_t>(j)] +=
                n->grad.data[static_cast<std::size_t>(idx[q] * c + j)];
      };
    return Var{n};
  }

  Var concat_cols(Var a, Var b) {
    assert(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0));
    const std::int64_t r = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    RealArray v({r, ca + cb});
    for (std::int64_t i = 0; i < r; ++i) {
      for (std::int64_t j = 0; j < ca; ++j)
        v.data[static_cast<std::size_t>(i * (ca + cb) + j)] =
            a.val().data[static_cast<std::size_t>(i * ca + j)];
      for (std::int64_t j = 0; j < cb; ++j)
        v.data[static_cast<std::size_t>(i * (ca + cb) + ca + j)] =
            b.val().data[static_cast<std::size_t>(i * cb + j)];
    }
    Node* n = push(std::move(v), a.node->needs_grad || b.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, a, b, r, ca, cb] {
        for (std::int64_t i = 0; i < r; ++i) {
          if (a.node->needs_grad)
            for (std::int64_t j = 0; j < ca; ++j)
              a.node->grad.data[static_cast<std::size_t>(i * ca + j)] +=
                  n->grad.data[static_cast<std::size_t>(i * (ca + cb) + j)];
          if (b.node->needs_grad)
            for (std::int64_t j = 0; j < cb; ++j)
              b.node->grad.data[static_cast<std::size_t>(i * cb + j)] +=
                  n->grad.data[static_cast<std::size_t>(i * (ca + cb) + ca + j)];
        }
      };
    return Var{n};
  }

  Var reshape(Var x, std::vector<std::int64_t> shape) {
    assert(RealArray::count(shape) == x.val().size());
    RealArray v(shape, x.val().data);
    Node* n = push(std::move(v), x.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, x] { accumulate(x, n->grad.data); };
    return Var{n};
  }

  // ---- normalization, attention pieces ----

  // eps acts as a soft floor: near-silent rows (e.g. masked-out patches whose
  // embeddings start at zero) are scaled down instead of blown up to unit
  // norm, and the map stays smooth at optimizer-step perturbation scales
  Var rmsnorm_rows(Var x, Var gain, double eps = 1e-4) {
    assert(x.rank() == 2 && gain.rank() == 1 && x.dim(1) == gain.dim(0));
    const std::int64_t r = x.dim(0), d = x.dim(1);
    RealArray v({r, d});
    std::vector<double> inv(static_cast<std::size_t>(r));
    for (std::int64_t i = 0; i < r; ++i) {
      double ss = 0.0;
      for (std::int64_t j = 0; j < d; ++j) {
        const double e = x.val().data[static_cast<std::size_t>(i * d + j)];
        ss += e * e;
      }
      inv[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(ss / static_cast<double>(d) + eps);
      for (std::int64_t j = 0; j < d; ++j)
        v.data[static_cast<std::size_t>(i * d + j)] =
            gain.val().data[static_cast<std::size_t>(j)] *
            x.val().data[static_cast<std::size_t>(i * d + j)] * inv[static_cast<std::size_t>(i)];
    }
    Node* n = push(std::move(v), x.node->needs_grad || gain.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, x, gain, r, d, inv = std::move(inv)] {
        for (std::int64_t i = 0; i < r; ++i) {
          const double iv = inv[static_cast<std::size_t>(i)];
          if (gain.node->needs_grad)
            for (std::int64_t j = 0; j < d; ++j)
              gain.node->grad.data[static_cast<std::size_t>(j)] +=
                  n->grad.data[static_cast<std::size_t>(i * d + j)] *
                  x.node->value.data[static_cast<std::size_t>(i * d + j)] * iv;
          if (x.node->needs_grad) {
            double s = 0.0;
            for (std::int64_t j = 0; j < d; ++j)
              s += n->grad.data[static_cast<std::size_t>(i * d + j)] *
                   gain.node->value.data[static_cast<std::size_t>(j)] *
                   x.node->value.data[static_cast<std::size_t>(i * d + j)];
            for (std::int64_t j = 0; j < d; ++j)
              x.node->grad.data[static_cast<std::size_t>(i * d + j)] +=
                  iv * (gain.node->value.data[static_cast<std::size_t>(j)] *
                            n->grad.data[static_cast<std::size_t>(i * d + j)] -
                        x.node->value.data[static_cast<std::size_t>(i * d + j)] * iv * iv * s /
                            static_cast<double>(d));
          }
        }
      };
    return Var{n};
  }

  Var softmax_rows(Var x) {
    assert(x.rank() == 2);
    const std::int64_t r = x.dim(0), c = x.dim(1);
    RealArray v({r, c});
    for (std::int64_t i = 0; i < r; ++i) {
      double mx = -1e300;
      for (std::int64_t j = 0; j < c; ++j)
        mx = std::max(mx, x.val().data[static_cast<std::size_t>(i * c + j)]);
      double z = 0.0;
      for (std::int64_t j = 0; j < c; ++j) {
        const double e = std::exp(x.val().data[static_cast<std::size_t>(i * c + j)] - mx);
        v.data[static_cast<std::size_t>(i * c + j)] = e;
        z += e;
      }
      for (std::int64_t j = 0; j < c; ++j) v.data[static_cast<std::size_t>(i * c + j)] /= z;
    }
    Node* n = push(std::move(v), x.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, x, r, c] {
        for (std::int64_t i = 0; i < r; ++i) {
          double dot = 0.0;
          for (std::int64_t j = 0; j < c; ++j)
            dot += n->grad.data[static_cast<std::size_t>(i * c + j)] *
                   n->value.data[static_cast<std::size_t>(i * c + j)];
          for (std::int64_t j = 0; j < c; ++j)
            x.node->grad.data[static_cast<std::size_t>(i * c + j)] +=
                n->value.data[static_cast<std::size_t>(i * c + j)] *
                (n->grad.data[static_cast<std::size_t>(i * c + j)] - dot);
        }
      };
    return Var{n};
  }

  // Pairwise rotation of each row by angles t * theta_k, theta_k = base^(-2k/d).
  // Row r uses times[r]. mis_rotate flips the angle sign (a debugging control
  // that destroys the relative-offset property when applied to one side only).
  Var rope_rows(Var x, std::vector<std::int64_t> times, double base, bool mis_rotate = false) {
    assert(x.rank() == 2 && x.dim(1) % 2 == 0);
    assert(static_cast<std::int64_t>(times.size()) == x.dim(0));
    const std::int64_t r = x.dim(0), d = x.dim(1);
    const double sign = mis_rotate ? -1.0 : 1.0;
    std::vector<double> cs(static_cast<std::size_t>(r * d / 2)), sn(static_cast<std::size_t>(r * d / 2));
    RealArray v({r, d});
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t k = 0; k < d / 2; ++k) {
        const double theta =
            std::pow(base, -2.0 * static_cast<double>(k) / static_cast<double>(d));
        const double a = sign * static_cast<double>(times[static_cast<std::size_t>(i)]) * theta;
        const double cv = std::cos(a), sv = std::sin(a);
        cs[static_cast<std::size_t>(i * (d / 2) + k)] = cv;
        sn[static_cast<std::size_t>(i * (d / 2) + k)] = sv;
        const double x0 = x.val().data[static_cast<std::size_t>(i * d + 2 * k)];
        const double x1 = x.val().data[static_cast<std::size_t>(i * d + 2 * k + 1)];
        v.data[static_cast<std::size_t>(i * d + 2 * k)] = cv * x0 - sv * x1;
        v.data[static_cast<std::size_t>(i * d + 2 * k + 1)] = sv * x0 + cv * x1;
      }
    Node* n = push(std::move(v), x.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, x, r, d, cs = std::move(cs), sn = std::move(sn)] {
        for (std::int64_t i = 0; i < r; ++i)
          for (std::int64_t k = 0; k < d / 2; ++k) {
            const double cv = cs[static_cast<std::size_t>(i * (d / 2) + k)];
            const double sv = sn[static_cast<std::size_t>(i * (d / 2) + k)];
            const double g0 = n->grad.data[static_cast<std::size_t>(i * d + 2 * k)];
            const double g1 = n->grad.data[static_cast<std::size_t>(i * d + 2 * k + 1)];
            x.node->grad.data[static_cast<std::size_t>(i * d + 2 * k)] += cv * g0 + sv * g1;
            x.node->grad.data[static_cast<std::size_t>(i * d + 2 * k + 1)] += -sv * g0 + cv * g1;
          }
      };
    return Var{n};
  }

  // ---- convolution ----

  // x {R, Cin, L}, w {Cout, Cin, K}, b {Cout} -> {R, Cout, Lout}
  Var conv1d(Var x, Var w, Var b, std::int64_t stride, std::int64_t pad) {
    assert(x.rank() == 3 && w.rank() == 3 && b.rank() == 1);
    assert(x.dim(1) == w.dim(1) && w.dim(0) == b.dim(0));
    const std::int64_t rr = x.dim(0), cin = x.dim(1), len = x.dim(2);
    const std::int64_t cout = w.dim(0), ker = w.dim(2);
    const std::int64_t lout = (len + 2 * pad - ker) / stride + 1;
    assert(lout >= 1);
    RealArray v({rr, cout, lout});
    for (std::int64_t r = 0; r < rr; ++r)
      for (std::int64_t o = 0; o < cout; ++o)
        for (std::int64_t t = 0; t < lout; ++t) {
          double acc = b.val().data[static_cast<std::size_t>(o)];
          for (std::int64_t ci = 0; ci < cin; ++ci)
            for (std::int64_t k = 0; k < ker; ++k) {
              const std::int64_t ti = t * stride + k - pad;
              if (ti < 0 || ti >= len) continue;
              acc += w.val().data[static_cast<std::size_t>((o * cin + ci) * ker + k)] *
                     x.val().data[static_cast<std::size_t>((r * cin + ci) * len + ti)];
            }
          v.data[static_cast<std::size_t>((r * cout + o) * lout + t)] = acc;
        }
    Node* n = push(std::move(v),
                   x.node->needs_grad || w.node->needs_grad || b.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, x, w, b, rr, cin, len, cout, ker, lout, stride, pad] {
        for (std::int64_t r = 0; r < rr; ++r)
          for (std::int64_t o = 0; o < cout; ++o)
            for (std::int64_t t = 0; t < lout; ++t) {
              const double g = n->grad.data[static_cast<std::size_t>((r * cout + o) * lout + t)];
              if (g == 0.0) continue;
              if (b.node->needs_grad) b.node->grad.data[static_cast<std::size_t>(o)] += g;
              for (std::int64_t ci = 0; ci < cin; ++ci)
                for (std::int64_t k = 0; k < ker; ++k) {
                  const std::int64_t ti = t * stride + k - pad;
                  if (ti < 0 || ti >= len) continue;
                  if (w.node->needs_grad)
                    w.node->grad.data[static_cast<std::size_t>((o * cin + ci) * ker + k)] +=
                        g * x.node->value.data[static_cast<std::size_t>((r * cin + ci) * len + ti)];
                  if (x.node->needs_grad)
                    x.node->grad.data[static_cast<std::size_t>((r * cin + ci) * len + ti)] +=
                        g * w.node->value.data[static_cast<std::size_t>((o * cin + ci) * ker + k)];
                }
            }
      };
    return Var{n};
  }

  // ---- reductions ----

  // sum over rows of the per-row mean squared difference against a constant
  Var mse_rows(Var pred, Var target) {
    assert(pred.rank() == 2 && pred.val().shape == target.val().shape);
    const std::int64_t r = pred.dim(0), c = pred.dim(1);
    double acc = 0.0;
    for (std::int64_t i = 0; i < r; ++i) {
      double row = 0.0;
      for (std::int64_t j = 0; j < c; ++j) {
        const double dd = pred.val().data[static_cast<std::size_t>(i * c + j)] -
                          target.val().data[static_cast<std::size_t>(i * c + j)];
        row += dd * dd;
      }
      acc += row / static_cast<double>(c);
    }
    Node* n = push(RealArray({1}, {acc}), pred.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, pred, target, r, c] {
        const double g = n->grad.data[0] * 2.0 / static_cast<double>(c);
        for (std::int64_t i = 0; i < r; ++i)
          for (std::int64_t j = 0; j < c; ++j)
            pred.node->grad.data[static_cast<std::size_t>(i * c + j)] +=
                g * (pred.node->value.data[static_cast<std::size_t>(i * c + j)] -
                     target.node->value.data[static_cast<std::size_t>(i * c + j)]);
      };
    return Var{n};
  }

  Var sum_all(Var x) {
    double acc = 0.0;
    for (double e : x.val().data) acc += e;
    Node* n = push(RealArray({1}, {acc}), x.node->needs_grad);
    if (n->needs_grad)
      n->back = [n, x] {
        for (auto& g : x.node->grad.data) g += n->grad.data[0];
      };
    return Var{n};
  }

  void backward(Var loss) {
    assert(loss.val().size() == 1 && loss.node->needs_grad);
    assert(!swept_);
    swept_ = true;
    loss.node->grad.data[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node* n = it->get();
      if (n->needs_grad && n->back) n->back();
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  static void accumulate(Var target, const std::vector<double>& g) {
    if (!target.node->needs_grad) return;
    for (std::size_t i = 0; i < g.size(); ++i) target.node->grad.data[i] += g[i];
  }

  Node* push(RealArray v, bool needs_grad) {
    auto n = std::make_unique<Node>();
    n->value = std::move(v);
    n->needs_grad = needs_grad;
    if (needs_grad) n->grad = RealArray(n->value.shape);
    nodes_.push_back(std::move(n));
    return nodes_.back().get();
  }

  std::vector<std::unique_ptr<Node>> nodes_;
  bool swept_ = false;
};

}  // namespace ephyslab::autodiff
