#include "ditra/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "ditra/error.hpp"

namespace ditra {

// ------------------------------------------------------------------ kernels

namespace detail {

void mm_ab(const double* a, const double* b, double* c, int m, int k, int n,
           bool accum) {
  if (!accum) std::fill(c, c + std::size_t(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* ai = a + std::size_t(i) * k;
    double* ci = c + std::size_t(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + std::size_t(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void mm_abt(const double* a, const double* b, double* c, int m, int k, int n,
            bool accum) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + std::size_t(i) * k;
    double* ci = c + std::size_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + std::size_t(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = accum ? ci[j] + s : s;
    }
  }
}

void mm_atb(const double* a, const double* b, double* c, int m, int k, int n,
            bool accum) {
  if (!accum) std::fill(c, c + std::size_t(k) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* ai = a + std::size_t(i) * k;
    const double* bi = b + std::size_t(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      double* cp = c + std::size_t(p) * n;
      for (int j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

}  // namespace detail

// -------------------------------------------------------------------- tape

static thread_local Tape* g_active_tape = nullptr;
static std::atomic<std::uint64_t> g_tape_gen{1};

Tape::Tape() : gen_(g_tape_gen.fetch_add(1)) {
  prev_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

int Tape::source_node(const Tensor& t) {
  if (!t.defined()) return -1;
  TensorData* d = t.raw();
  if (d->tape_gen == gen_ && d->node >= 0) return d->node;
  if (!d->requires_grad) return -1;
  int id = int(nodes_.size());
  nodes_.push_back({t.size(), nullptr});
  leaves_.push_back(t);
  leaf_node_ids_.push_back(id);
  d->tape_gen = gen_;
  d->node = id;
  return id;
}

int Tape::record(std::size_t out_size,
                 std::function<void(const double*, Tape&)> backward) {
  nodes_.push_back({out_size, std::move(backward)});
  return int(nodes_.size()) - 1;
}

void Tape::attach(const Tensor& out, int node) const {
  out.raw()->tape_gen = gen_;
  out.raw()->node = node;
}

double* Tape::grad(int node) {
  auto& g = grads_[std::size_t(node)];
  if (g.empty()) g.assign(nodes_[std::size_t(node)].out_size, 0.0);
  return g.data();
}

GradMap Tape::backward(const Tensor& loss) {
  if (used_) throw ShapeError("backward() may run only once per tape");
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward() requires a scalar loss, got " +
                     shape_str(loss));
  }
  TensorData* d = loss.raw();
  if (d->tape_gen != gen_ || d->node < 0) {
    throw ShapeError("loss tensor is not recorded on this tape");
  }
  used_ = true;
  grads_.assign(nodes_.size(), {});
  grad(d->node)[0] = 1.0;
  for (int i = d->node; i >= 0; --i) {
    if (grads_[std::size_t(i)].empty()) continue;  // not reachable from loss
    if (nodes_[std::size_t(i)].backward) {
      nodes_[std::size_t(i)].backward(grads_[std::size_t(i)].data(), *this);
    }
  }
  GradMap out;
  for (std::size_t li = 0; li < leaves_.size(); ++li) {
    int node = leaf_node_ids_[li];
    if (grads_[std::size_t(node)].empty()) continue;
    out.g_[leaves_[li].raw()] =
        Tensor::from(leaves_[li].shape(), std::move(grads_[std::size_t(node)]));
  }
  return out;
}

Tensor GradMap::of(const Tensor& param) const {
  auto it = g_.find(param.raw());
  if (it != g_.end()) return it->second;
  return Tensor(param.shape(), 0.0);
}

bool GradMap::has(const Tensor& param) const {
  return g_.count(param.raw()) > 0;
}

// ------------------------------------------------------------------ helpers

namespace {

// Finishes an op: records the node if any source is tracked.
// fn receives (gout, tape); sources already resolved by the caller.
template <class F>
Tensor finish(Tensor out, std::initializer_list<int> parents, F&& fn, Tape* tp) {
  if (!tp) return out;
  bool any = false;
  for (int p : parents) any = any || p >= 0;
  if (!any) return out;
  out.set_requires_grad(true);
  int id = tp->record(out.size(), std::forward<F>(fn));
  tp->attach(out, id);
  return out;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

// --------------------------------------------------------------- matmul ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a) + " and " +
                     shape_str(b));
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  detail::mm_ab(a.data(), b.data(), out.data(), m, k, n, false);
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int pa = tp->source_node(a), pb = tp->source_node(b);
  return finish(
      std::move(out), {pa, pb},
      [a, b, pa, pb, m, k, n](const double* g, Tape& t) {
        if (pa >= 0) detail::mm_abt(g, b.data(), t.grad(pa), m, n, k, true);
        if (pb >= 0) detail::mm_atb(a.data(), g, t.grad(pb), m, k, n, true);
      },
      tp);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: incompatible shapes " + shape_str(a) +
                     " and " + shape_str(b));
  }
  const int m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out({m, n});
  detail::mm_abt(a.data(), b.data(), out.data(), m, k, n, false);
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int pa = tp->source_node(a), pb = tp->source_node(b);
  return finish(
      std::move(out), {pa, pb},
      [a, b, pa, pb, m, k, n](const double* g, Tape& t) {
        if (pa >= 0) detail::mm_ab(g, b.data(), t.grad(pa), m, n, k, true);
        if (pb >= 0) detail::mm_atb(g, a.data(), t.grad(pb), m, n, k, true);
      },
      tp);
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: need rank 2, got " + shape_str(a));
  const int m = a.rows(), n = a.cols();
  Tensor out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int pa = tp->source_node(a);
  return finish(
      std::move(out), {pa},
      [pa, m, n](const double* g, Tape& t) {
        if (pa < 0) return;
        double* da = t.grad(pa);
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < m; ++i)
            da[std::size_t(i) * n + j] += g[std::size_t(j) * m + i];
      },
      tp);
}

// ------------------------------------------------------------ elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int pa = tp->source_node(a), pb = tp->source_node(b);
  return finish(
      std::move(out), {pa, pb},
      [pa, pb, n](const double* g, Tape& t) {
        if (pa >= 0) axpy(1.0, g, t.grad(pa), n);
        if (pb >= 0) axpy(1.0, g, t.grad(pb), n);
      },
      tp);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int pa = tp->source_node(a), pb = tp->source_node(b);
  return finish(
      std::move(out), {pa, pb},
      [a, b, pa, pb, n](const double* g, Tape& t) {
        if (pa >= 0) {
          double* da = t.grad(pa);
          for (std::size_t i = 0; i < n; ++i) da[i] += g[i] * b.data()[i];
        }
        if (pb >= 0) {
          double* db = t.grad(pb);
          for (std::size_t i = 0; i < n; ++i) db[i] += g[i] * a.data()[i];
        }
      },
      tp);
}

Tensor scale(const Tensor& a, double c) {
  Tensor out(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = c * a.data()[i];
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int pa = tp->source_node(a);
  return finish(
      std::move(out), {pa},
      [pa, c, n](const double* g, Tape& t) {
        if (pa >= 0) axpy(c, g, t.grad(pa), n);
      },
      tp);
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw ShapeError("add_rowvec: " + shape_str(x) + " + " + shape_str(b));
  }
  const int m = x.rows(), n = x.cols();
  Tensor out(x.shape());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.data()[std::size_t(i) * n + j] =
          x.data()[std::size_t(i) * n + j] + b.data()[j];
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int px = tp->source_node(x), pb = tp->source_node(b);
  return finish(
      std::move(out), {px, pb},
      [px, pb, m, n](const double* g, Tape& t) {
        if (px >= 0) axpy(1.0, g, t.grad(px), std::size_t(m) * n);
        if (pb >= 0) {
          double* db = t.grad(pb);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) db[j] += g[std::size_t(i) * n + j];
        }
      },
      tp);
}

Tensor mul_rowvec(const Tensor& x, const Tensor& v) {
  if (v.rows() != 1 || v.cols() != x.cols()) {
    throw ShapeError("mul_rowvec: " + shape_str(x) + " * " + shape_str(v));
  }
  const int m = x.rows(), n = x.cols();
  Tensor out(x.shape());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.data()[std::size_t(i) * n + j] =
          x.data()[std::size_t(i) * n + j] * v.data()[j];
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int px = tp->source_node(x), pv = tp->source_node(v);
  return finish(
      std::move(out), {px, pv},
      [x, v, px, pv, m, n](const double* g, Tape& t) {
        if (px >= 0) {
          double* dx = t.grad(px);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
              dx[std::size_t(i) * n + j] +=
                  g[std::size_t(i) * n + j] * v.data()[j];
        }
        if (pv >= 0) {
          double* dv = t.grad(pv);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
              dv[j] += g[std::size_t(i) * n + j] *
                       x.data()[std::size_t(i) * n + j];
        }
      },
      tp);
}

Tensor repeat_rows(const Tensor& row, int n) {
  if (row.rows() != 1 || n < 1) {
    throw ShapeError("repeat_rows: need a [1,c] row and n>=1, got " +
                     shape_str(row) + " n=" + std::to_string(n));
  }
  const int c = row.cols();
  Tensor out({n, c});
  for (int i = 0; i < n; ++i)
    std::copy(row.data(), row.data() + c, out.data() + std::size_t(i) * c);
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int pr = tp->source_node(row);
  return finish(
      std::move(out), {pr},
      [pr, n, c](const double* g, Tape& t) {
        if (pr < 0) return;
        double* dr = t.grad(pr);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < c; ++j) dr[j] += g[std::size_t(i) * c + j];
      },
      tp);
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i)
    out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int px = tp->source_node(x);
  return finish(
      std::move(out), {px},
      [x, px, n](const double* g, Tape& t) {
        if (px < 0) return;
        double* dx = t.grad(px);
        for (std::size_t i = 0; i < n; ++i)
          if (x.data()[i] > 0.0) dx[i] += g[i];
      },
      tp);
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.data()[i];
    // stable in both tails
    out.data()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                             : std::exp(v) / (1.0 + std::exp(v));
  }
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int px = tp->source_node(x);
  Tensor saved = out;  // shares storage; read-only in backward
  return finish(
      std::move(out), {px},
      [saved, px, n](const double* g, Tape& t) {
        if (px < 0) return;
        double* dx = t.grad(px);
        for (std::size_t i = 0; i < n; ++i) {
          const double s = saved.data()[i];
          dx[i] += g[i] * s * (1.0 - s);
        }
      },
      tp);
}

// ----------------------------------------------------------------- softmax

Tensor row_softmax(const Tensor& x, double sc) {
  if (x.cols() == 0) throw ShapeError("row_softmax: empty axis " + shape_str(x));
  const int m = x.rows(), n = x.cols();
  Tensor out(x.shape());
  for (int i = 0; i < m; ++i) {
    const double* xi = x.data() + std::size_t(i) * n;
    double* oi = out.data() + std::size_t(i) * n;
    double mx = sc * xi[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, sc * xi[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      oi[j] = std::exp(sc * xi[j] - mx);
      sum += oi[j];
    }
    for (int j = 0; j < n; ++j) oi[j] /= sum;
  }
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int px = tp->source_node(x);
  Tensor p = out;
  return finish(
      std::move(out), {px},
      [p, px, sc, m, n](const double* g, Tape& t) {
        if (px < 0) return;
        double* dx = t.grad(px);
        for (int i = 0; i < m; ++i) {
          const double* pi = p.data() + std::size_t(i) * n;
          const double* gi = g + std::size_t(i) * n;
          double dot = 0.0;
          for (int j = 0; j < n; ++j) dot += gi[j] * pi[j];
          double* di = dx + std::size_t(i) * n;
          for (int j = 0; j < n; ++j) di[j] += sc * pi[j] * (gi[j] - dot);
        }
      },
      tp);
}

Tensor masked_row_softmax(const Tensor& x,
                          const std::vector<std::uint8_t>& allow, double sc) {
  const int m = x.rows(), n = x.cols();
  if (allow.size() != std::size_t(m) * std::size_t(n)) {
    throw ShapeError("masked_row_softmax: mask size " +
                     std::to_string(allow.size()) + " vs " + shape_str(x));
  }
  Tensor out(x.shape());
  for (int i = 0; i < m; ++i) {
    const double* xi = x.data() + std::size_t(i) * n;
    const std::uint8_t* ai = allow.data() + std::size_t(i) * n;
    double* oi = out.data() + std::size_t(i) * n;
    double mx = 0.0;
    bool seen = false;
    for (int j = 0; j < n; ++j) {
      if (!ai[j]) continue;
      const double v = sc * xi[j];
      mx = seen ? std::max(mx, v) : v;
      seen = true;
    }
    if (!seen) {
      throw ShapeError("masked_row_softmax: row " + std::to_string(i) +
                       " has no allowed entries");
    }
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      oi[j] = ai[j] ? std::exp(sc * xi[j] - mx) : 0.0;
      sum += oi[j];
    }
    for (int j = 0; j < n; ++j) oi[j] /= sum;
  }
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int px = tp->source_node(x);
  Tensor p = out;
  return finish(
      std::move(out), {px},
      [p, px, sc, m, n](const double* g, Tape& t) {
        if (px < 0) return;
        double* dx = t.grad(px);
        for (int i = 0; i < m; ++i) {
          const double* pi = p.data() + std::size_t(i) * n;
          const double* gi = g + std::size_t(i) * n;
          double dot = 0.0;
          for (int j = 0; j < n; ++j) dot += gi[j] * pi[j];
          double* di = dx + std::size_t(i) * n;
          for (int j = 0; j < n; ++j) di[j] += sc * pi[j] * (gi[j] - dot);
        }
      },
      tp);
}

// -------------------------------------------------------------- layer norm

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const int m = x.rows(), n = x.cols();
  if (gamma.size() != std::size_t(n) || beta.size() != std::size_t(n)) {
    throw ShapeError("layer_norm: affine params " + shape_str(gamma) + "/" +
                     shape_str(beta) + " do not match width of " + shape_str(x));
  }
  Tensor out(x.shape());
  Tensor xhat({m, n});
  std::vector<double> inv_s(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double* xi = x.data() + std::size_t(i) * n;
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += xi[j];
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_s[std::size_t(i)] = is;
    double* hi = xhat.data() + std::size_t(i) * n;
    double* oi = out.data() + std::size_t(i) * n;
    for (int j = 0; j < n; ++j) {
      hi[j] = (xi[j] - mu) * is;
      oi[j] = gamma.data()[j] * hi[j] + beta.data()[j];
    }
  }
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int px = tp->source_node(x);
  const int pg = tp->source_node(gamma);
  const int pb = tp->source_node(beta);
  return finish(
      std::move(out), {px, pg, pb},
      [xhat, gamma, inv_s = std::move(inv_s), px, pg, pb, m,
       n](const double* g, Tape& t) {
        if (px >= 0) {
          double* dx = t.grad(px);
          for (int i = 0; i < m; ++i) {
            const double* hi = xhat.data() + std::size_t(i) * n;
            const double* gi = g + std::size_t(i) * n;
            // w = g*gamma; dx = (w - mean(w) - xhat*mean(w*xhat)) * inv_s
            double mean_w = 0.0, mean_wh = 0.0;
            for (int j = 0; j < n; ++j) {
              const double w = gi[j] * gamma.data()[j];
              mean_w += w;
              mean_wh += w * hi[j];
            }
            mean_w /= n;
            mean_wh /= n;
            double* di = dx + std::size_t(i) * n;
            const double is = inv_s[std::size_t(i)];
            for (int j = 0; j < n; ++j) {
              const double w = gi[j] * gamma.data()[j];
              di[j] += (w - mean_w - hi[j] * mean_wh) * is;
            }
          }
        }
        if (pg >= 0) {
          double* dg = t.grad(pg);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
              dg[j] += g[std::size_t(i) * n + j] *
                       xhat.data()[std::size_t(i) * n + j];
        }
        if (pb >= 0) {
          double* db = t.grad(pb);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) db[j] += g[std::size_t(i) * n + j];
        }
      },
      tp);
}

// ------------------------------------------------------- concat and slices

Tensor concat_cols(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_cols: no inputs");
  const int m = xs[0].rows();
  int total = 0;
  for (const Tensor& x : xs) {
    if (x.rows() != m) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(xs[0]) +
                       " vs " + shape_str(x));
    }
    total += x.cols();
  }
  Tensor out({m, total});
  int off = 0;
  for (const Tensor& x : xs) {
    const int c = x.cols();
    for (int i = 0; i < m; ++i)
      std::copy(x.data() + std::size_t(i) * c, x.data() + std::size_t(i + 1) * c,
                out.data() + std::size_t(i) * total + off);
    off += c;
  }
  Tape* tp = Tape::active();
  if (!tp) return out;
  std::vector<int> ps;
  std::vector<int> widths;
  bool any = false;
  for (const Tensor& x : xs) {
    ps.push_back(tp->source_node(x));
    widths.push_back(x.cols());
    any = any || ps.back() >= 0;
  }
  if (!any) return out;
  out.set_requires_grad(true);
  int id = tp->record(out.size(), [ps, widths, m, total](const double* g, Tape& t) {
    int off = 0;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const int c = widths[k];
      if (ps[k] >= 0) {
        double* d = t.grad(ps[k]);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < c; ++j)
            d[std::size_t(i) * c + j] += g[std::size_t(i) * total + off + j];
      }
      off += c;
    }
  });
  tp->attach(out, id);
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_rows: no inputs");
  const int n = xs[0].cols();
  int total = 0;
  for (const Tensor& x : xs) {
    if (x.cols() != n) {
      throw ShapeError("concat_rows: column mismatch " + shape_str(xs[0]) +
                       " vs " + shape_str(x));
    }
    total += x.rows();
  }
  Tensor out({total, n});
  int off = 0;
  for (const Tensor& x : xs) {
    std::copy(x.data(), x.data() + x.size(),
              out.data() + std::size_t(off) * n);
    off += x.rows();
  }
  Tape* tp = Tape::active();
  if (!tp) return out;
  std::vector<int> ps;
  std::vector<int> heights;
  bool any = false;
  for (const Tensor& x : xs) {
    ps.push_back(tp->source_node(x));
    heights.push_back(x.rows());
    any = any || ps.back() >= 0;
  }
  if (!any) return out;
  out.set_requires_grad(true);
  int id = tp->record(out.size(), [ps, heights, n](const double* g, Tape& t) {
    int off = 0;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      if (ps[k] >= 0) {
        axpy(1.0, g + std::size_t(off) * n, t.grad(ps[k]),
             std::size_t(heights[k]) * n);
      }
      off += heights[k];
    }
  });
  tp->attach(out, id);
  return out;
}

Tensor interleave_rows(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "interleave_rows");
  const int m = a.rows(), n = a.cols();
  Tensor out({2 * m, n});
  for (int i = 0; i < m; ++i) {
    std::copy(a.data() + std::size_t(i) * n, a.data() + std::size_t(i + 1) * n,
              out.data() + std::size_t(2 * i) * n);
    std::copy(b.data() + std::size_t(i) * n, b.data() + std::size_t(i + 1) * n,
              out.data() + std::size_t(2 * i + 1) * n);
  }
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int pa = tp->source_node(a), pb = tp->source_node(b);
  return finish(
      std::move(out), {pa, pb},
      [pa, pb, m, n](const double* g, Tape& t) {
        if (pa >= 0) {
          double* da = t.grad(pa);
          for (int i = 0; i < m; ++i)
            axpy(1.0, g + std::size_t(2 * i) * n, da + std::size_t(i) * n,
                 std::size_t(n));
        }
        if (pb >= 0) {
          double* db = t.grad(pb);
          for (int i = 0; i < m; ++i)
            axpy(1.0, g + std::size_t(2 * i + 1) * n, db + std::size_t(i) * n,
                 std::size_t(n));
        }
      },
      tp);
}

Tensor row_slice(const Tensor& x, int r0, int r1) {
  if (r0 < 0 || r1 > x.rows() || r0 >= r1) {
    throw ShapeError("row_slice: range [" + std::to_string(r0) + "," +
                     std::to_string(r1) + ") of " + shape_str(x));
  }
  const int n = x.cols(), m = r1 - r0;
  Tensor out({m, n});
  std::copy(x.data() + std::size_t(r0) * n, x.data() + std::size_t(r1) * n,
            out.data());
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int px = tp->source_node(x);
  return finish(
      std::move(out), {px},
      [px, r0, m, n](const double* g, Tape& t) {
        if (px >= 0)
          axpy(1.0, g, t.grad(px) + std::size_t(r0) * n, std::size_t(m) * n);
      },
      tp);
}

Tensor col_slice(const Tensor& x, int c0, int c1) {
  if (c0 < 0 || c1 > x.cols() || c0 >= c1) {
    throw ShapeError("col_slice: range [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") of " + shape_str(x));
  }
  const int m = x.rows(), n = x.cols(), w = c1 - c0;
  Tensor out({m, w});
  for (int i = 0; i < m; ++i)
    std::copy(x.data() + std::size_t(i) * n + c0,
              x.data() + std::size_t(i) * n + c1,
              out.data() + std::size_t(i) * w);
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int px = tp->source_node(x);
  return finish(
      std::move(out), {px},
      [px, c0, m, n, w](const double* g, Tape& t) {
        if (px < 0) return;
        double* dx = t.grad(px);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < w; ++j)
            dx[std::size_t(i) * n + c0 + j] += g[std::size_t(i) * w + j];
      },
      tp);
}

Tensor row_mean(const Tensor& x) {
  const int m = x.rows(), n = x.cols();
  if (m == 0) throw ShapeError("row_mean: zero rows in " + shape_str(x));
  Tensor out({1, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.data()[j] += x.data()[std::size_t(i) * n + j];
  for (int j = 0; j < n; ++j) out.data()[j] /= m;
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int px = tp->source_node(x);
  return finish(
      std::move(out), {px},
      [px, m, n](const double* g, Tape& t) {
        if (px < 0) return;
        double* dx = t.grad(px);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) dx[std::size_t(i) * n + j] += g[j] / m;
      },
      tp);
}

Tensor mean_all(const Tensor& x) {
  const std::size_t n = x.size();
  if (n == 0) throw ShapeError("mean_all: empty tensor");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x.data()[i];
  Tensor out = Tensor::scalar(s / double(n));
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int px = tp->source_node(x);
  return finish(
      std::move(out), {px},
      [px, n](const double* g, Tape& t) {
        if (px >= 0) {
          double* dx = t.grad(px);
          const double gi = g[0] / double(n);
          for (std::size_t i = 0; i < n; ++i) dx[i] += gi;
        }
      },
      tp);
}

// ---------------------------------------------------------------- lookups

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) {
    throw ShapeError("embedding_lookup: table must be rank 2, got " +
                     shape_str(table));
  }
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  const int v = table.rows(), d = table.cols();
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw ShapeError("embedding_lookup: id " + std::to_string(id) +
                       " outside table " + shape_str(table));
    }
  }
  const int m = int(ids.size());
  Tensor out({m, d});
  for (int i = 0; i < m; ++i)
    std::copy(table.data() + std::size_t(ids[std::size_t(i)]) * d,
              table.data() + std::size_t(ids[std::size_t(i)] + 1) * d,
              out.data() + std::size_t(i) * d);
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int pt = tp->source_node(table);
  return finish(
      std::move(out), {pt},
      [pt, ids, d](const double* g, Tape& t) {
        if (pt < 0) return;
        double* dt = t.grad(pt);
        for (std::size_t i = 0; i < ids.size(); ++i)
          axpy(1.0, g + i * std::size_t(d),
               dt + std::size_t(ids[i]) * std::size_t(d), std::size_t(d));
      },
      tp);
}

// ------------------------------------------------------------------ losses

Tensor cross_entropy_logits(const Tensor& logits,
                            const std::vector<int>& targets) {
  const int m = logits.rows(), v = logits.cols();
  if (targets.size() != std::size_t(m)) {
    throw ShapeError("cross_entropy_logits: " + std::to_string(targets.size()) +
                     " targets for logits " + shape_str(logits));
  }
  int count = 0;
  for (int t : targets) {
    if (t >= v) {
      throw ShapeError("cross_entropy_logits: target " + std::to_string(t) +
                       " outside vocab " + std::to_string(v));
    }
    if (t >= 0) ++count;
  }
  if (count == 0) throw ShapeError("cross_entropy_logits: no counted rows");
  Tensor probs({m, v});  // softmax of counted rows, zeros elsewhere
  double loss = 0.0;
  for (int i = 0; i < m; ++i) {
    if (targets[std::size_t(i)] < 0) continue;
    const double* li = logits.data() + std::size_t(i) * v;
    double mx = li[0];
    for (int j = 1; j < v; ++j) mx = std::max(mx, li[j]);
    double sum = 0.0;
    double* pi = probs.data() + std::size_t(i) * v;
    for (int j = 0; j < v; ++j) {
      pi[j] = std::exp(li[j] - mx);
      sum += pi[j];
    }
    for (int j = 0; j < v; ++j) pi[j] /= sum;
    loss -= std::log(pi[targets[std::size_t(i)]]);
  }
  Tensor out = Tensor::scalar(loss / count);
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int pl = tp->source_node(logits);
  return finish(
      std::move(out), {pl},
      [probs, targets, pl, m, v, count](const double* g, Tape& t) {
        if (pl < 0) return;
        double* dl = t.grad(pl);
        const double s = g[0] / count;
        for (int i = 0; i < m; ++i) {
          const int tgt = targets[std::size_t(i)];
          if (tgt < 0) continue;
          const double* pi = probs.data() + std::size_t(i) * v;
          double* di = dl + std::size_t(i) * v;
          for (int j = 0; j < v; ++j) di[j] += s * pi[j];
          di[tgt] -= s;
        }
      },
      tp);
}

Tensor bce_with_logits(const Tensor& scores, const std::vector<double>& labels) {
  const std::size_t n = scores.size();
  if (labels.size() != n) {
    throw ShapeError("bce_with_logits: " + std::to_string(labels.size()) +
                     " labels for scores " + shape_str(scores));
  }
  if (n == 0) throw ShapeError("bce_with_logits: empty input");
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = scores.data()[i], y = labels[i];
    loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  Tensor out = Tensor::scalar(loss / double(n));
  Tape* tp = Tape::active();
  if (!tp) return out;
  const int ps = tp->source_node(scores);
  return finish(
      std::move(out), {ps},
      [scores, labels, ps, n](const double* g, Tape& t) {
        if (ps < 0) return;
        double* ds = t.grad(ps);
        const double s = g[0] / double(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double x = scores.data()[i];
          const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                      : std::exp(x) / (1.0 + std::exp(x));
          ds[i] += s * (sig - labels[i]);
        }
      },
      tp);
}

}  // namespace ditra
