#include "mtae/attention.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

#include "mtae/error.hpp"

namespace mtae::attention {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

long signed_size(std::size_t n) { return static_cast<long>(n); }

}  // namespace

std::size_t relative_rows(RelativeMode mode, std::size_t max_rel) {
  switch (mode) {
    case RelativeMode::none: return 0;
    case RelativeMode::causal: return max_rel + 1;
    case RelativeMode::bidirectional: return 2 * max_rel + 1;
  }
  return 0;
}

std::size_t relative_index(long delta, RelativeMode mode, std::size_t max_rel) {
  const long r = signed_size(max_rel);
  const long hi = mode == RelativeMode::causal ? 0 : r;
  return static_cast<std::size_t>(std::clamp(delta, -r, hi) + r);
}

Tensor expand_relative(const Tensor& table, std::size_t length, RelativeMode mode, std::size_t max_rel) {
  if (mode == RelativeMode::none) throw Error(ErrorCategory::state, "expand_relative: no relative mode");
  if (table.rows() != relative_rows(mode, max_rel)) {
    throw Error(ErrorCategory::shape, "relative table rows do not cover the configured distance");
  }
  const std::size_t dk = table.cols();
  const std::size_t rows = mode == RelativeMode::causal ? length : 2 * length - 1;
  Tensor out({rows, dk});
  for (std::size_t m = 0; m < rows; ++m) {
    const long delta = signed_size(m) - (signed_size(length) - 1);
    const std::size_t src = relative_index(delta, mode, max_rel);
    std::copy_n(table.data() + src * dk, dk, out.data() + m * dk);
  }
  return out;
}

Tensor skew(const Tensor& q_er, RelativeMode mode) {
  const std::size_t len = q_er.rows();
  if (mode == RelativeMode::causal) {
    if (q_er.cols() != len) throw Error(ErrorCategory::shape, "skew: causal input must be [L, L]");
    // Pad a zero column on the left: [L, L+1].
    std::vector<double> padded(len * (len + 1), 0.0);
    for (std::size_t i = 0; i < len; ++i) std::copy_n(q_er.data() + i * len, len, padded.data() + i * (len + 1) + 1);
    // Reshape to [L+1, L] and drop the first row.
    return Tensor({len, len}, std::vector<double>(padded.begin() + static_cast<long>(len), padded.end()));
  }
  if (mode == RelativeMode::bidirectional) {
    const std::size_t width = 2 * len - 1;
    if (q_er.cols() != width) throw Error(ErrorCategory::shape, "skew: bidirectional input must be [L, 2L-1]");
    // Pad a zero column on the right: [L, 2L], flatten.
    std::vector<double> flat(len * 2 * len, 0.0);
    for (std::size_t i = 0; i < len; ++i) std::copy_n(q_er.data() + i * width, width, flat.data() + i * 2 * len);
    // Drop the first L-1 values, view as rows of width 2L-1, keep [L, L].
    Tensor out({len, len});
    const std::size_t shift = len - 1;
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < len; ++j) out[i * len + j] = flat[shift + i * width + j];
    return out;
  }
  throw Error(ErrorCategory::state, "skew: no relative mode");
}

namespace {

// Adjoint of skew: scatter d(logits)[i, j] back to d(Q E^T)[i, j - i + L - 1].
void unskew_add(const RowMat& d_logits, RelativeMode mode, RowMat& d_qer) {
  const long len = d_logits.rows();
  for (long i = 0; i < len; ++i) {
    const long j_end = mode == RelativeMode::causal ? i + 1 : len;
    for (long j = 0; j < j_end; ++j) d_qer(i, j - i + len - 1) += d_logits(i, j);
  }
}

Tensor to_tensor(const RowMat& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<RowMat>(t.data(), m.rows(), m.cols()) = m;
  return t;
}

RowMat to_rowmat(const Tensor& t) {
  return Eigen::Map<const RowMat>(t.data(), static_cast<long>(t.rows()), static_cast<long>(t.cols()));
}

// Softmax-normalised attention weights for one head.
RowMat head_probs(const RowMat& q, const RowMat& k, const RowMat* er_full, RelativeMode mode, std::size_t key_length) {
  const long lq = q.rows(), lk = k.rows();
  RowMat logits = q * k.transpose();
  if (mode != RelativeMode::none) {
    const RowMat q_er = q * er_full->transpose();
    logits += to_rowmat(skew(to_tensor(q_er), mode));
  }
  logits *= 1.0 / std::sqrt(static_cast<double>(q.cols()));
  RowMat probs(lq, lk);
  for (long i = 0; i < lq; ++i) {
    long valid = std::min<long>(lk, static_cast<long>(key_length));
    if (mode == RelativeMode::causal) valid = std::min(valid, i + 1);
    if (valid <= 0) {
      probs.row(i).setZero();
      continue;
    }
    const double mx = logits.row(i).head(valid).maxCoeff();
    double z = 0.0;
    for (long j = 0; j < valid; ++j) {
      probs(i, j) = std::exp(logits(i, j) - mx);
      z += probs(i, j);
    }
    for (long j = 0; j < valid; ++j) probs(i, j) /= z;
    for (long j = valid; j < lk; ++j) probs(i, j) = 0.0;
  }
  return probs;
}

void check_lengths(std::size_t q_len, std::size_t k_len, RelativeMode mode) {
  if (mode != RelativeMode::none && q_len != k_len) {
    throw Error(ErrorCategory::shape, "relative attention requires equal query and key lengths");
  }
}

}  // namespace

Tensor relative_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& table,
                          RelativeMode mode, std::size_t max_rel, std::size_t key_length) {
  if (q.cols() != k.cols() || k.rows() != v.rows()) throw Error(ErrorCategory::shape, "relative_attention: shape mismatch");
  check_lengths(q.rows(), k.rows(), mode);
  const RowMat qm = to_rowmat(q), km = to_rowmat(k), vm = to_rowmat(v);
  RowMat er;
  if (mode != RelativeMode::none) {
    if (table.cols() != q.cols()) throw Error(ErrorCategory::shape, "relative table width must equal key size");
    er = to_rowmat(expand_relative(table, q.rows(), mode, max_rel));
  }
  const RowMat probs = head_probs(qm, km, mode == RelativeMode::none ? nullptr : &er, mode, key_length);
  return to_tensor(probs * vm);
}

Var multihead(const Var& q, const Var& k, const Var& v, const Var& table, const Spec& spec) {
  if (!q.valid()) throw Error(ErrorCategory::state, "multihead: empty input");
  Tape& tape = *q.tape();
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  const std::size_t H = spec.heads, B = spec.batch, Lq = spec.q_len, Lk = spec.k_len;
  if (H == 0 || qv.cols() % H || vv.cols() % H || qv.cols() != kv.cols()) {
    throw Error(ErrorCategory::shape, "multihead: feature sizes must divide into heads");
  }
  if (qv.rows() != B * Lq || kv.rows() != B * Lk || vv.rows() != B * Lk || spec.key_lengths.size() != B) {
    throw Error(ErrorCategory::shape, "multihead: row counts do not match batch layout");
  }
  check_lengths(Lq, Lk, spec.mode);
  const bool relative = spec.mode != RelativeMode::none;
  if (relative && (!table.valid() || table.value().cols() != qv.cols())) {
    throw Error(ErrorCategory::shape, "multihead: relative table must be [rows, H*dk]");
  }
  const std::size_t dk = qv.cols() / H, dv = vv.cols() / H;

  // Expanded relative tables per head.
  auto er = std::make_shared<std::vector<RowMat>>();
  if (relative) {
    const Tensor full = expand_relative(table.value(), Lq, spec.mode, spec.max_rel);
    const RowMat fm = to_rowmat(full);
    for (std::size_t h = 0; h < H; ++h) er->push_back(fm.middleCols(static_cast<long>(h * dk), static_cast<long>(dk)));
  }

  auto block = [](const Tensor& t, std::size_t b, std::size_t len, std::size_t h, std::size_t width) {
    return Eigen::Map<const RowMat>(t.data(), static_cast<long>(t.rows()), static_cast<long>(t.cols()))
        .block(static_cast<long>(b * len), static_cast<long>(h * width), static_cast<long>(len), static_cast<long>(width));
  };

  auto probs = std::make_shared<std::vector<RowMat>>(B * H);
  Tensor out({B * Lq, H * dv});
  Eigen::Map<RowMat> om(out.data(), static_cast<long>(B * Lq), static_cast<long>(H * dv));
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      const RowMat qh = block(qv, b, Lq, h, dk);
      const RowMat kh = block(kv, b, Lk, h, dk);
      RowMat& p = (*probs)[b * H + h];
      p = head_probs(qh, kh, relative ? &(*er)[h] : nullptr, spec.mode, spec.key_lengths[b]);
      om.block(static_cast<long>(b * Lq), static_cast<long>(h * dv), static_cast<long>(Lq), static_cast<long>(dv))
          .noalias() = p * block(vv, b, Lk, h, dv);
    }
  }

  std::vector<Var> inputs{q, k, v};
  if (relative) inputs.push_back(table);
  return tape.record(std::move(out), inputs, [q, k, v, table, spec, er, probs, dk, dv, relative, block](Tape& tp, const Tensor& g) {
    const std::size_t H = spec.heads, B = spec.batch, Lq = spec.q_len, Lk = spec.k_len;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    const Tensor& qv = q.value();
    const Tensor& kv = k.value();
    const Tensor& vv = v.value();
    RowMat gq = RowMat::Zero(static_cast<long>(B * Lq), static_cast<long>(H * dk));
    RowMat gk = RowMat::Zero(static_cast<long>(B * Lk), static_cast<long>(H * dk));
    RowMat gv = RowMat::Zero(static_cast<long>(B * Lk), static_cast<long>(H * dv));
    std::vector<RowMat> g_er;
    if (relative) g_er.assign(H, RowMat::Zero((*er)[0].rows(), static_cast<long>(dk)));

    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < H; ++h) {
        const RowMat& p = (*probs)[b * H + h];
        const RowMat go = block(g, b, Lq, h, dv);
        const RowMat qh = block(qv, b, Lq, h, dk);
        const RowMat kh = block(kv, b, Lk, h, dk);
        const RowMat vh = block(vv, b, Lk, h, dv);
        const RowMat dp = go * vh.transpose();
        gv.block(static_cast<long>(b * Lk), static_cast<long>(h * dv), static_cast<long>(Lk), static_cast<long>(dv)) +=
            p.transpose() * go;
        // Softmax backward; masked entries have p == 0 and receive nothing.
        RowMat ds = p.cwiseProduct(dp);
        const Eigen::VectorXd rowdot = ds.rowwise().sum();
        ds -= p.cwiseProduct(rowdot.replicate(1, ds.cols()));
        ds *= scale;
        gq.block(static_cast<long>(b * Lq), static_cast<long>(h * dk), static_cast<long>(Lq), static_cast<long>(dk)) +=
            ds * kh;
        gk.block(static_cast<long>(b * Lk), static_cast<long>(h * dk), static_cast<long>(Lk), static_cast<long>(dk)) +=
            ds.transpose() * qh;
        if (relative) {
          const RowMat& erh = (*er)[h];
          RowMat d_qer = RowMat::Zero(static_cast<long>(Lq), erh.rows());
          unskew_add(ds, spec.mode, d_qer);
          gq.block(static_cast<long>(b * Lq), static_cast<long>(h * dk), static_cast<long>(Lq), static_cast<long>(dk)) +=
              d_qer * erh;
          g_er[h].noalias() += d_qer.transpose() * qh;
        }
      }
    }
    auto add_into = [&tp](const Var& x, const RowMat& gm) {
      if (!tp.requires_grad(x)) return;
      Tensor& gx = tp.grad(x);
      Eigen::Map<RowMat>(gx.data(), gm.rows(), gm.cols()) += gm;
    };
    add_into(q, gq);
    add_into(k, gk);
    add_into(v, gv);
    if (relative && tp.requires_grad(table)) {
      Tensor& gt = tp.grad(table);
      const std::size_t width = H * dk;
      const long rows = g_er[0].rows();
      const long len = static_cast<long>(Lq);
      for (long m = 0; m < rows; ++m) {
        const std::size_t dst = relative_index(m - (len - 1), spec.mode, spec.max_rel);
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t c = 0; c < dk; ++c) gt[dst * width + h * dk + c] += g_er[h](m, static_cast<long>(c));
      }
    }
  });
}

}  // namespace mtae::attention
