#include "entichart/ops.hpp"

#include "entichart/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace entichart::ad {
namespace {

std::string dims(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shapes " + dims(a) + " and " + dims(b) + " differ");
}

bool is_vector(const Matrix& m) { return m.rows() == 1 || m.cols() == 1; }

// Views a row or column vector as a column.
Eigen::Map<const Vector> as_column(const Matrix& m) { return {m.data(), m.size()}; }

}  // namespace

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) throw ShapeError("matmul: inner dims " + dims(av) + " * " + dims(bv));
  Tape& t = *a.tape();
  return t.record(av * bv, {a, b}, [a, b](Tape& tape, const Matrix& g, const Matrix&) {
    if (tape.requires_grad(a)) tape.accumulate(a, g * b.value().transpose());
    if (tape.requires_grad(b)) tape.accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g, const Matrix&) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g, const Matrix&) {
    tape.accumulate(a, g);
    tape.accumulate(b, -g);
  });
}

Var add_row(Var a, Var row) {
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) throw ShapeError("add_row: row " + dims(rv) + " vs matrix " + dims(av));
  Matrix out = av.rowwise() + rv.row(0);
  return a.tape()->record(std::move(out), {a, row}, [a, row](Tape& tape, const Matrix& g, const Matrix&) {
    tape.accumulate(a, g);
    if (tape.requires_grad(row)) tape.accumulate(row, g.colwise().sum());
  });
}

Var cmul(Var a, Var b) {
  require_same_shape("cmul", a.value(), b.value());
  return a.tape()->record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& tape, const Matrix& g, const Matrix&) {
    if (tape.requires_grad(a)) tape.accumulate(a, g.cwiseProduct(b.value()));
    if (tape.requires_grad(b)) tape.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double s) {
  return a.tape()->record(a.value() * s, {a}, [a, s](Tape& tape, const Matrix& g, const Matrix&) { tape.accumulate(a, g * s); });
}

Var tanh(Var a) {
  return a.tape()->record(a.value().array().tanh().matrix(), {a}, [a](Tape& tape, const Matrix& g, const Matrix& y) {
    tape.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var sigmoid(Var a) {
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape()->record(std::move(out), {a}, [a](Tape& tape, const Matrix& g, const Matrix& y) {
    tape.accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var transpose(Var a) {
  return a.tape()->record(a.value().transpose(), {a},
                          [a](Tape& tape, const Matrix& g, const Matrix&) { tape.accumulate(a, g.transpose()); });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts " + std::to_string(rows) + " and " + std::to_string(p.rows()));
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return parts.front().tape()->record(std::move(out), ins, [ins](Tape& tape, const Matrix& g, const Matrix&) {
    Eigen::Index off = 0;
    for (const Var& p : ins) {
      if (tape.requires_grad(p)) tape.accumulate(p, g.middleCols(off, p.cols()));
      off += p.cols();
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts " + std::to_string(cols) + " and " + std::to_string(p.cols()));
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return parts.front().tape()->record(std::move(out), ins, [ins](Tape& tape, const Matrix& g, const Matrix&) {
    Eigen::Index off = 0;
    for (const Var& p : ins) {
      if (tape.requires_grad(p)) tape.accumulate(p, g.middleRows(off, p.rows()));
      off += p.rows();
    }
  });
}

Var gather_rows(Var a, std::span<const int> ids) {
  const Matrix& av = a.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), av.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] < 0 || ids[k] >= av.rows())
      throw ShapeError("gather_rows: index " + std::to_string(ids[k]) + " outside " + std::to_string(av.rows()) + " rows");
    out.row(static_cast<Eigen::Index>(k)) = av.row(ids[k]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return a.tape()->record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& tape, const Matrix& g, const Matrix&) {
    for (std::size_t k = 0; k < idx.size(); ++k) tape.accumulate_block(a, idx[k], 0, g.row(static_cast<Eigen::Index>(k)));
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& av = a.value();
  if (start < 0 || count < 0 || start + count > av.rows())
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", +" + std::to_string(count) + ") of " + dims(av));
  return a.tape()->record(av.middleRows(start, count), {a}, [a, start](Tape& tape, const Matrix& g, const Matrix&) {
    tape.accumulate_block(a, start, 0, g);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& av = a.value();
  if (start < 0 || count < 0 || start + count > av.cols())
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) + ") of " + dims(av));
  return a.tape()->record(av.middleCols(start, count), {a}, [a, start](Tape& tape, const Matrix& g, const Matrix&) {
    tape.accumulate_block(a, 0, start, g);
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [a](Tape& tape, const Matrix& g, const Matrix&) {
    tape.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var element(Var a, Eigen::Index r, Eigen::Index c) {
  const Matrix& av = a.value();
  if (r < 0 || c < 0 || r >= av.rows() || c >= av.cols())
    throw ShapeError("element: (" + std::to_string(r) + ", " + std::to_string(c) + ") outside " + dims(av));
  Matrix out(1, 1);
  out(0, 0) = av(r, c);
  return a.tape()->record(std::move(out), {a}, [a, r, c](Tape& tape, const Matrix& g, const Matrix&) {
    tape.accumulate_block(a, r, c, g);
  });
}

Var bilinear(Var u, Var w, Var v) {
  const Matrix& uv = u.value();
  const Matrix& wv = w.value();
  const Matrix& vv = v.value();
  if (!is_vector(uv) || !is_vector(vv) || wv.rows() != uv.size() || wv.cols() != vv.size())
    throw ShapeError("bilinear: u " + dims(uv) + ", W " + dims(wv) + ", v " + dims(vv));
  Matrix out(1, 1);
  out(0, 0) = as_column(uv).dot(wv * as_column(vv));
  return u.tape()->record(std::move(out), {u, w, v}, [u, w, v](Tape& tape, const Matrix& g, const Matrix&) {
    const double s = g(0, 0);
    const auto uc = as_column(u.value());
    const auto vc = as_column(v.value());
    const Matrix& W = w.value();
    if (tape.requires_grad(u)) {
      Vector gu = s * (W * vc);
      tape.accumulate(u, Eigen::Map<const Matrix>(gu.data(), u.rows(), u.cols()));
    }
    if (tape.requires_grad(w)) tape.accumulate(w, s * uc * vc.transpose());
    if (tape.requires_grad(v)) {
      Vector gv = s * (W.transpose() * uc);
      tape.accumulate(v, Eigen::Map<const Matrix>(gv.data(), v.rows(), v.cols()));
    }
  });
}

Var bilinear_multi(Var u, Var w, Var v) {
  const Matrix& uv = u.value();
  const Matrix& wv = w.value();
  const Matrix& vv = v.value();
  const Eigen::Index d = uv.size();
  if (!is_vector(uv) || !is_vector(vv) || d == 0 || wv.cols() != vv.size() || wv.rows() % d != 0)
    throw ShapeError("bilinear_multi: u " + dims(uv) + ", W " + dims(wv) + ", v " + dims(vv));
  const Eigen::Index c = wv.rows() / d;
  // Wv stacks W_k v for every k; slice k dotted with u gives score k.
  const Vector wvv = wv * as_column(vv);
  Matrix out(c, 1);
  for (Eigen::Index k = 0; k < c; ++k) out(k, 0) = as_column(uv).dot(wvv.segment(k * d, d));
  return u.tape()->record(std::move(out), {u, w, v}, [u, w, v, c, d](Tape& tape, const Matrix& g, const Matrix&) {
    const auto uc = as_column(u.value());
    const auto vc = as_column(v.value());
    const Matrix& W = w.value();
    if (tape.requires_grad(u)) {
      Vector gu = Vector::Zero(d);
      for (Eigen::Index k = 0; k < c; ++k) gu += g(k, 0) * (W.middleRows(k * d, d) * vc);
      tape.accumulate(u, Eigen::Map<const Matrix>(gu.data(), u.rows(), u.cols()));
    }
    if (tape.requires_grad(w)) {
      Matrix gw(c * d, d);
      const Matrix outer = uc * vc.transpose();
      for (Eigen::Index k = 0; k < c; ++k) gw.middleRows(k * d, d) = g(k, 0) * outer;
      tape.accumulate(w, gw);
    }
    if (tape.requires_grad(v)) {
      Vector gv = Vector::Zero(vc.size());
      for (Eigen::Index k = 0; k < c; ++k) gv += g(k, 0) * (W.middleRows(k * d, d).transpose() * uc);
      tape.accumulate(v, Eigen::Map<const Matrix>(gv.data(), v.rows(), v.cols()));
    }
  });
}

Var bilinear_multi_rows(Var u, Var w, Var v) {
  const Matrix& uv = u.value();
  const Matrix& wv = w.value();
  const Matrix& vv = v.value();
  const Eigen::Index d = uv.cols();
  if (d == 0 || vv.rows() != uv.rows() || vv.cols() != d || wv.cols() != d || wv.rows() % d != 0)
    throw ShapeError("bilinear_multi_rows: U " + dims(uv) + ", W " + dims(wv) + ", V " + dims(vv));
  const Eigen::Index c = wv.rows() / d;
  Matrix out(uv.rows(), c);
  for (Eigen::Index k = 0; k < c; ++k) out.col(k) = (uv * wv.middleRows(k * d, d)).cwiseProduct(vv).rowwise().sum();
  return u.tape()->record(std::move(out), {u, w, v}, [u, w, v, c, d](Tape& tape, const Matrix& g, const Matrix&) {
    const Matrix& U = u.value();
    const Matrix& V = v.value();
    const Matrix& W = w.value();
    Matrix gu = Matrix::Zero(U.rows(), d), gv = Matrix::Zero(V.rows(), d), gw(c * d, d);
    for (Eigen::Index k = 0; k < c; ++k) {
      const auto wk = W.middleRows(k * d, d);
      const auto gk = g.col(k).asDiagonal();
      gu.noalias() += gk * (V * wk.transpose());
      gv.noalias() += gk * (U * wk);
      gw.middleRows(k * d, d).noalias() = U.transpose() * (gk * V);
    }
    tape.accumulate(u, gu);
    tape.accumulate(w, gw);
    tape.accumulate(v, gv);
  });
}

double logsumexp_value(std::span<const double> xs) {
  if (xs.empty()) throw std::domain_error("logsumexp: empty input");
  const double m = *std::max_element(xs.begin(), xs.end());
  if (xs.size() == 1) return m;
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

Var logsumexp(Var a) {
  const Matrix& av = a.value();
  if (av.size() == 0) throw std::domain_error("logsumexp: empty input");
  Matrix out(1, 1);
  out(0, 0) = logsumexp_value(std::span<const double>(av.data(), static_cast<std::size_t>(av.size())));
  const double lse = out(0, 0);
  return a.tape()->record(std::move(out), {a}, [a, lse](Tape& tape, const Matrix& g, const Matrix&) {
    tape.accumulate(a, (g(0, 0) * (a.value().array() - lse).exp()).matrix());
  });
}

Var logsumexp(std::span<const Var> scalars) {
  if (scalars.empty()) throw std::domain_error("logsumexp: empty input");
  if (scalars.size() == 1) return scalars.front();
  return logsumexp(concat_rows(scalars));
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Var softmax_cross_entropy(Var logits, std::span<const int> targets) {
  const Matrix& lv = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != lv.rows())
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " + dims(lv) + " logits");
  Matrix probs = softmax_rows(lv);
  Matrix out(1, 1);
  out(0, 0) = 0.0;
  for (Eigen::Index r = 0; r < lv.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= lv.cols()) throw ShapeError("softmax_cross_entropy: target " + std::to_string(t) + " outside " + std::to_string(lv.cols()) + " classes");
    const double m = lv.row(r).maxCoeff();
    const double lse = m + std::log((lv.row(r).array() - m).exp().sum());
    out(0, 0) += lse - lv(r, t);
  }
  std::vector<int> tg(targets.begin(), targets.end());
  return logits.tape()->record(std::move(out), {logits},
                               [logits, probs = std::move(probs), tg = std::move(tg)](Tape& tape, const Matrix& g, const Matrix&) {
                                 Matrix d = probs;
                                 for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, tg[static_cast<std::size_t>(r)]) -= 1.0;
                                 tape.accumulate(logits, g(0, 0) * d);
                               });
}

Var dropout(Var a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw ContractError("dropout: rate must be below 1");
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  const double s = 1.0 / (1.0 - rate);
  for (Eigen::Index k = 0; k < mask.size(); ++k) mask.data()[k] = keep(rng) ? s : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return a.tape()->record(std::move(out), {a}, [a, mask = std::move(mask)](Tape& tape, const Matrix& g, const Matrix&) {
    tape.accumulate(a, g.cwiseProduct(mask));
  });
}

}  // namespace entichart::ad
