#include "mtae/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "mtae/error.hpp"

namespace mtae::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

Tape& tape_of(const Var& a, const char* op) {
  if (!a.valid()) throw Error(ErrorCategory::state, std::string(op) + ": empty input");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b, const char* op) {
  Tape& t = tape_of(a, op);
  if (b.tape() != &t) throw Error(ErrorCategory::state, std::string(op) + ": inputs live on different tapes");
  return t;
}

ConstMapMat as_matrix(const Tensor& t) {
  return ConstMapMat(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

MapMat as_matrix(Tensor& t) {
  return MapMat(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void accumulate(Tape& t, const Var& v, const Tensor& g) {
  if (!t.requires_grad(v)) return;
  auto& acc = t.grad(v).storage();
  const auto& src = g.storage();
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw Error(ErrorCategory::shape, std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, "matmul");
  require_rank2(bv, "matmul");
  if (av.dim(1) != bv.dim(0)) {
    throw Error(ErrorCategory::shape, "matmul: inner dimensions differ " + shape_string(av.shape()) + " x " +
                                          shape_string(bv.shape()));
  }
  Tensor out({av.dim(0), bv.dim(1)});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    const auto gm = as_matrix(g);
    if (tp.requires_grad(a)) as_matrix(tp.grad(a)).noalias() += gm * as_matrix(b.value()).transpose();
    if (tp.requires_grad(b)) as_matrix(tp.grad(b)).noalias() += as_matrix(a.value()).transpose() * gm;
  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const auto& bv = b.value().storage();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    accumulate(tp, a, g);
    accumulate(tp, b, g);
  });
}

Var add_row(const Var& a, const Var& bias) {
  Tape& t = tape_of(a, bias, "add_row");
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.size() != av.cols()) throw Error(ErrorCategory::shape, "add_row: bias length does not match columns");
  Tensor out = av;
  const std::size_t n = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bv[c];
  return t.record(std::move(out), {a, bias}, [a, bias](Tape& tp, const Tensor& g) {
    accumulate(tp, a, g);
    if (tp.requires_grad(bias)) {
      Tensor& gb = tp.grad(bias);
      const std::size_t n = gb.size();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const auto& bv = b.value().storage();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad(a);
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad(b);
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tape& t = tape_of(a, "scale");
  Tensor out = a.value();
  for (auto& v : out.storage()) v *= s;
  return t.record(std::move(out), {a}, [a, s](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var sum(const Var& a) {
  Tape& t = tape_of(a, "sum");
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return t.record(Tensor(Shape{}, std::vector<double>{s}), {a}, [a](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    for (auto& v : ga.storage()) v += g[0];
  });
}

Var relu(const Var& a) {
  Tape& t = tape_of(a, "relu");
  Tensor out = a.value();
  for (auto& v : out.storage()) v = v > 0.0 ? v : 0.0;
  return t.record(std::move(out), {a}, [a](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    const Tensor& av = a.value();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] > 0.0) ga[i] += g[i];
  });
}

namespace {

// View of a tensor as [outer, axis, inner].
struct AxisView {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw Error(ErrorCategory::shape, "softmax: axis out of range for " + shape_string(s));
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

}  // namespace

Var softmax(const Var& a, std::size_t axis) {
  Tape& t = tape_of(a, "softmax");
  const AxisView v = axis_view(a.shape(), axis);
  Tensor out = a.value();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      double* base = out.data() + o * v.len * v.inner + in;
      double mx = -INFINITY;
      for (std::size_t k = 0; k < v.len; ++k) mx = std::max(mx, base[k * v.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < v.len; ++k) {
        base[k * v.inner] = std::exp(base[k * v.inner] - mx);
        z += base[k * v.inner];
      }
      for (std::size_t k = 0; k < v.len; ++k) base[k * v.inner] /= z;
    }
  }
  auto y = std::make_shared<Tensor>(out);
  return t.record(std::move(out), {a}, [a, v, y](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t in = 0; in < v.inner; ++in) {
        const std::size_t base = o * v.len * v.inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < v.len; ++k) dot += g[base + k * v.inner] * (*y)[base + k * v.inner];
        for (std::size_t k = 0; k < v.len; ++k) {
          const std::size_t i = base + k * v.inner;
          ga[i] += (*y)[i] * (g[i] - dot);
        }
      }
    }
  });
}

namespace {

struct NormStats {
  std::vector<double> mean, rstd;
};

Tensor normalize_rows(const Tensor& x, NormStats& st) {
  const std::size_t n = x.cols(), rows = x.rows();
  Tensor xhat(x.shape());
  st.mean.resize(rows);
  st.rstd.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * n;
    double m = 0.0;
    for (std::size_t c = 0; c < n; ++c) m += xr[c];
    m /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (xr[c] - m) * (xr[c] - m);
    var /= static_cast<double>(n);
    const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
    st.mean[r] = m;
    st.rstd[r] = rs;
    for (std::size_t c = 0; c < n; ++c) xhat[r * n + c] = (xr[c] - m) * rs;
  }
  return xhat;
}

// dx from d(xhat).
void normalize_backward(const Tensor& xhat, const std::vector<double>& rstd, const std::vector<double>& dxhat,
                        Tensor& gx) {
  const std::size_t n = xhat.cols(), rows = xhat.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xh = xhat.data() + r * n;
    const double* dh = dxhat.data() + r * n;
    double mean_d = 0.0, mean_dx = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      mean_d += dh[c];
      mean_dx += dh[c] * xh[c];
    }
    mean_d /= static_cast<double>(n);
    mean_dx /= static_cast<double>(n);
    for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += rstd[r] * (dh[c] - mean_d - xh[c] * mean_dx);
  }
}

}  // namespace

Var layer_norm(const Var& x) {
  Tape& t = tape_of(x, "layer_norm");
  auto st = std::make_shared<NormStats>();
  Tensor xhat = normalize_rows(x.value(), *st);
  auto saved = std::make_shared<Tensor>(xhat);
  return t.record(std::move(xhat), {x}, [x, st, saved](Tape& tp, const Tensor& g) {
    normalize_backward(*saved, st->rstd, g.storage(), tp.grad(x));
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias) {
  Tape& t = tape_of(x, gain, "layer_norm");
  tape_of(x, bias, "layer_norm");
  const std::size_t n = x.value().cols();
  if (gain.value().size() != n || bias.value().size() != n) {
    throw Error(ErrorCategory::shape, "layer_norm: gain/bias length does not match feature size");
  }
  auto st = std::make_shared<NormStats>();
  auto xhat = std::make_shared<Tensor>(normalize_rows(x.value(), *st));
  Tensor out(x.shape());
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*xhat)[i] * gv[i % n] + bv[i % n];
  return t.record(std::move(out), {x, gain, bias}, [x, gain, bias, st, xhat, n](Tape& tp, const Tensor& g) {
    const Tensor& gv = gain.value();
    if (tp.requires_grad(gain)) {
      Tensor& gg = tp.grad(gain);
      for (std::size_t i = 0; i < g.size(); ++i) gg[i % n] += g[i] * (*xhat)[i];
    }
    if (tp.requires_grad(bias)) {
      Tensor& gb = tp.grad(bias);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
    }
    if (tp.requires_grad(x)) {
      std::vector<double> dxhat(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) dxhat[i] = g[i] * gv[i % n];
      normalize_backward(*xhat, st->rstd, dxhat, tp.grad(x));
    }
  });
}

Var embed(const Var& table, const std::vector<int>& ids) {
  Tape& t = tape_of(table, "embed");
  const Tensor& tv = table.value();
  require_rank2(tv, "embed");
  const std::size_t d = tv.dim(1), vocab = tv.dim(0);
  Tensor out({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
      throw Error(ErrorCategory::range, "embed: id " + std::to_string(ids[r]) + " outside vocabulary of " +
                                            std::to_string(vocab));
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[r]) * d, d, out.data() + r * d);
  }
  return t.record(std::move(out), {table}, [table, ids, d](Tape& tp, const Tensor& g) {
    Tensor& gt = tp.grad(table);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      double* dst = gt.data() + static_cast<std::size_t>(ids[r]) * d;
      const double* src = g.data() + r * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
  });
}

Var dropout(const Var& x, double p, std::uint64_t seed) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw Error(ErrorCategory::range, "dropout probability must be < 1");
  Tape& t = tape_of(x, "dropout");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.value().size());
  const double s = 1.0 / (1.0 - p);
  for (auto& m : *mask) m = keep(rng) ? s : 0.0;
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*mask)[i];
  return t.record(std::move(out), {x}, [x, mask](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
  });
}

Var cross_entropy(const Var& logits, const std::vector<int>& targets) {
  Tape& t = tape_of(logits, "cross_entropy");
  const Tensor& lv = logits.value();
  require_rank2(lv, "cross_entropy");
  const std::size_t n = lv.dim(0), vocab = lv.dim(1);
  if (targets.size() != n) throw Error(ErrorCategory::shape, "cross_entropy: one target per row required");

  auto probs = std::make_shared<Tensor>(lv.shape());
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = lv.data() + r * vocab;
    double* pr = probs->data() + r * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) {
      pr[c] = std::exp(row[c] - mx);
      z += pr[c];
    }
    for (std::size_t c = 0; c < vocab; ++c) pr[c] /= z;
    if (targets[r] < 0) continue;
    if (static_cast<std::size_t>(targets[r]) >= vocab) throw Error(ErrorCategory::range, "cross_entropy: target outside vocabulary");
    total += -(row[targets[r]] - mx - std::log(z));
    ++counted;
  }
  const double denom = counted ? static_cast<double>(counted) : 1.0;
  return t.record(Tensor(Shape{}, std::vector<double>{total / denom}), {logits},
                  [logits, targets, probs, vocab, denom](Tape& tp, const Tensor& g) {
                    Tensor& gl = tp.grad(logits);
                    const double s = g[0] / denom;
                    for (std::size_t r = 0; r < targets.size(); ++r) {
                      if (targets[r] < 0) continue;
                      const double* pr = probs->data() + r * vocab;
                      double* dst = gl.data() + r * vocab;
                      for (std::size_t c = 0; c < vocab; ++c) dst[c] += s * pr[c];
                      dst[targets[r]] -= s;
                    }
                  });
}

Var segment_mean(const Var& x, const std::vector<std::size_t>& lengths, std::size_t stride) {
  Tape& t = tape_of(x, "segment_mean");
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  if (xv.rows() != lengths.size() * stride) throw Error(ErrorCategory::shape, "segment_mean: rows != batch * stride");
  Tensor out({lengths.size(), d});
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    if (lengths[b] == 0 || lengths[b] > stride) throw Error(ErrorCategory::range, "segment_mean: invalid length");
    for (std::size_t i = 0; i < lengths[b]; ++i)
      for (std::size_t c = 0; c < d; ++c) out[b * d + c] += xv[(b * stride + i) * d + c];
    for (std::size_t c = 0; c < d; ++c) out[b * d + c] /= static_cast<double>(lengths[b]);
  }
  return t.record(std::move(out), {x}, [x, lengths, stride, d](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    for (std::size_t b = 0; b < lengths.size(); ++b) {
      const double inv = 1.0 / static_cast<double>(lengths[b]);
      for (std::size_t i = 0; i < lengths[b]; ++i)
        for (std::size_t c = 0; c < d; ++c) gx[(b * stride + i) * d + c] += g[b * d + c] * inv;
    }
  });
}

Var repeat_rows(const Var& z, std::size_t stride) {
  Tape& t = tape_of(z, "repeat_rows");
  const Tensor& zv = z.value();
  const std::size_t batch = zv.rows(), d = zv.cols();
  Tensor out({batch * stride, d});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < stride; ++i) std::copy_n(zv.data() + b * d, d, out.data() + (b * stride + i) * d);
  return t.record(std::move(out), {z}, [z, stride, batch, d](Tape& tp, const Tensor& g) {
    Tensor& gz = tp.grad(z);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < stride; ++i)
        for (std::size_t c = 0; c < d; ++c) gz[b * d + c] += g[(b * stride + i) * d + c];
  });
}

Var concat_cols(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b, "concat_cols");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) throw Error(ErrorCategory::shape, "concat_cols: row counts differ");
  const std::size_t rows = av.rows(), na = av.cols(), nb = bv.cols();
  Tensor out({rows, na + nb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * na, na, out.data() + r * (na + nb));
    std::copy_n(bv.data() + r * nb, nb, out.data() + r * (na + nb) + na);
  }
  return t.record(std::move(out), {a, b}, [a, b, rows, na, nb](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad(a);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < na; ++c) ga[r * na + c] += g[r * (na + nb) + c];
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad(b);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < nb; ++c) gb[r * nb + c] += g[r * (na + nb) + na + c];
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCategory::shape, "concat_rows: no inputs");
  Tape& t = tape_of(parts[0], "concat_rows");
  const std::size_t d = parts[0].value().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    tape_of(parts[0], p, "concat_rows");
    if (p.value().cols() != d) throw Error(ErrorCategory::shape, "concat_rows: column counts differ");
    rows += p.value().rows();
  }
  Tensor out({rows, d});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().storage().begin(), p.value().storage().end(), out.data() + off);
    off += p.value().size();
  }
  return t.record(std::move(out), parts, [parts](Tape& tp, const Tensor& g) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t n = p.value().size();
      if (tp.requires_grad(p)) {
        Tensor& gp = tp.grad(p);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
      }
      off += n;
    }
  });
}

Var gather_rows(const Var& x, const std::vector<long>& index) {
  Tape& t = tape_of(x, "gather_rows");
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  Tensor out({index.size(), d});
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0) continue;
    if (static_cast<std::size_t>(index[r]) >= xv.rows()) throw Error(ErrorCategory::range, "gather_rows: index out of range");
    std::copy_n(xv.data() + static_cast<std::size_t>(index[r]) * d, d, out.data() + r * d);
  }
  return t.record(std::move(out), {x}, [x, index, d](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    for (std::size_t r = 0; r < index.size(); ++r) {
      if (index[r] < 0) continue;
      for (std::size_t c = 0; c < d; ++c) gx[static_cast<std::size_t>(index[r]) * d + c] += g[r * d + c];
    }
  });
}

}  // namespace mtae::ops
