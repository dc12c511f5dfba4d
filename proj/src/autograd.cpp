#include "amclip/autograd.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "amclip/errors.hpp"

namespace amclip::ag {

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(const Matrix& value) {
  Node n;
  n.ref = &value;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Tape::push(Matrix value, std::span<const Var> parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.value;
}

void Tape::accumulate(Var v, const Matrix& g) { accumulate(v.id(), g); }

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.has_grad) {
    n.grad += g;
  } else {
    n.grad = g;
    n.has_grad = true;
  }
}

void Tape::backward(Var loss) {
  if (loss.rows() != 1 || loss.cols() != 1) throw ArgumentError("backward: loss must be a 1x1 node");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  accumulate(loss, Matrix::Ones(1, 1));
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.has_grad && n.backward) n.backward(*this, n.grad);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  const Matrix& val = value(v.id());
  return Matrix::Zero(val.rows(), val.cols());
}

// ----- elementwise / linear algebra ----------------------------------------------

namespace {

void check_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
  }
}

}  // namespace

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  return a.tape()->push(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  return a.tape()->push(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var add_constant(Var a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw ArgumentError("add_constant: shape mismatch");
  return a.tape()->push(a.value() + c, {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var add_row(Var x, Var row) {
  if (row.rows() != 1 || row.cols() != x.cols()) throw ArgumentError("add_row: row must be 1xD");
  Matrix out = x.value().rowwise() + row.value().row(0);
  return x.tape()->push(std::move(out), {x, row}, [x, row](Tape& t, const Matrix& g) {
    t.accumulate(x, g);
    if (t.requires_grad(row.id())) t.accumulate(row, g.colwise().sum());
  });
}

Var scale(Var a, double s) {
  return a.tape()->push(a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ArgumentError("matmul: inner dimensions differ");
  return a.tape()->push(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a.id())) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b.id())) t.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(Var a) {
  return a.tape()->push(a.value().transpose(), {a},
                        [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var linear(Var x, Var w, Var b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw ArgumentError("linear: shape mismatch");
  }
  Matrix out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return x.tape()->push(std::move(out), {x, w, b}, [x, w, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(x.id())) t.accumulate(x, g * w.value().transpose());
    if (t.requires_grad(w.id())) t.accumulate(w, x.value().transpose() * g);
    if (t.requires_grad(b.id())) t.accumulate(b, g.colwise().sum());
  });
}

Var gelu(Var a) {
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); });
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    Matrix d = a.value().unaryExpr([](double v) {
      return 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
    });
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  Tape* tape = a.tape();
  const int self = static_cast<int>(tape->size());
  return tape->push(std::move(out), {a}, [a, self](Tape& t, const Matrix& g) {
    const Matrix& p = t.value(self);
    t.accumulate(a, g.cwiseProduct(p.cwiseProduct((1.0 - p.array()).matrix())));
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& in = x.value();
  const auto d = in.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw ArgumentError("layer_norm: gain/bias must be 1xD");
  }
  Matrix xhat(in.rows(), d);
  Eigen::VectorXd inv_std(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mean = in.row(r).mean();
    const double var = (in.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (in.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return x.tape()->push(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Matrix& g) {
        if (t.requires_grad(gain.id())) t.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
        if (t.requires_grad(bias.id())) t.accumulate(bias, g.colwise().sum());
        if (!t.requires_grad(x.id())) return;
        Matrix dxhat = g.array().rowwise() * gain.value().row(0).array();
        Matrix dx(g.rows(), g.cols());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const double m1 = dxhat.row(r).mean();
          const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
          dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
        }
        t.accumulate(x, dx);
      });
}

Var l2_normalize_rows(Var x) {
  const Matrix& in = x.value();
  Eigen::VectorXd norms = in.rowwise().norm();
  for (Eigen::Index r = 0; r < norms.size(); ++r) {
    if (!(norms(r) > 0.0) || !std::isfinite(norms(r))) {
      throw NumericError("l2_normalize_rows: row " + std::to_string(r) + " has zero or non-finite norm");
    }
  }
  Matrix out = in.array().colwise() / norms.array();
  Tape* tape = x.tape();
  const int self = static_cast<int>(tape->size());
  return tape->push(std::move(out), {x}, [x, self, norms = std::move(norms)](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(self);
    Eigen::VectorXd dots = y.cwiseProduct(g).rowwise().sum();
    Matrix dx = (g - (y.array().colwise() * dots.array()).matrix()).array().colwise() / norms.array();
    t.accumulate(x, dx);
  });
}

// ----- attention ----------------------------------------------------------------------

Var attention(Var q, Var k, Var v, int heads, std::span<const int> q_groups, std::span<const int> kv_groups) {
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  const auto d = Q.cols();
  if (K.cols() != d || V.cols() != d || K.rows() != V.rows()) throw ArgumentError("attention: shape mismatch");
  if (heads < 1 || d % heads != 0) throw ArgumentError("attention: dimension not divisible by head count");
  if (q_groups.size() != kv_groups.size()) throw ArgumentError("attention: group count mismatch");
  Eigen::Index qs = 0, ks = 0;
  for (std::size_t g = 0; g < q_groups.size(); ++g) {
    if (q_groups[g] < 1 || kv_groups[g] < 1) throw ArgumentError("attention: empty group");
    qs += q_groups[g];
    ks += kv_groups[g];
  }
  if (qs != Q.rows() || ks != K.rows()) throw ArgumentError("attention: groups do not cover the rows");

  const int dh = static_cast<int>(d / heads);
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out = Matrix::Zero(Q.rows(), d);
  // Attention weights per (group, head), kept for the backward pass.
  std::vector<Matrix> weights;
  weights.reserve(q_groups.size() * heads);
  Eigen::Index q0 = 0, k0 = 0;
  for (std::size_t g = 0; g < q_groups.size(); ++g) {
    const int nq = q_groups[g], nk = kv_groups[g];
    for (int h = 0; h < heads; ++h) {
      Matrix a = s * Q.block(q0, h * dh, nq, dh) * K.block(k0, h * dh, nk, dh).transpose();
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double m = a.row(r).maxCoeff();
        a.row(r) = (a.row(r).array() - m).exp();
        a.row(r) /= a.row(r).sum();
      }
      out.block(q0, h * dh, nq, dh) = a * V.block(k0, h * dh, nk, dh);
      weights.push_back(std::move(a));
    }
    q0 += nq;
    k0 += nk;
  }
  std::vector<int> qg(q_groups.begin(), q_groups.end()), kg(kv_groups.begin(), kv_groups.end());
  return q.tape()->push(
      std::move(out), {q, k, v},
      [q, k, v, heads, dh, s, qg = std::move(qg), kg = std::move(kg), weights = std::move(weights)](
          Tape& t, const Matrix& g) {
        const Matrix& Q = q.value();
        const Matrix& K = k.value();
        const Matrix& V = v.value();
        Matrix dq = Matrix::Zero(Q.rows(), Q.cols());
        Matrix dk = Matrix::Zero(K.rows(), K.cols());
        Matrix dv = Matrix::Zero(V.rows(), V.cols());
        Eigen::Index q0 = 0, k0 = 0;
        std::size_t w = 0;
        for (std::size_t grp = 0; grp < qg.size(); ++grp) {
          const int nq = qg[grp], nk = kg[grp];
          for (int h = 0; h < heads; ++h, ++w) {
            const Matrix& a = weights[w];
            const auto go = g.block(q0, h * dh, nq, dh);
            dv.block(k0, h * dh, nk, dh) += a.transpose() * go;
            Matrix da = go * V.block(k0, h * dh, nk, dh).transpose();
            Eigen::VectorXd row_dot = a.cwiseProduct(da).rowwise().sum();
            Matrix dscore = a.array() * (da.array().colwise() - row_dot.array());
            dq.block(q0, h * dh, nq, dh) += s * dscore * K.block(k0, h * dh, nk, dh);
            dk.block(k0, h * dh, nk, dh) += s * dscore.transpose() * Q.block(q0, h * dh, nq, dh);
          }
          q0 += nq;
          k0 += nk;
        }
        t.accumulate(q, dq);
        t.accumulate(k, dk);
        t.accumulate(v, dv);
      });
}

// ----- reshaping / reductions -------------------------------------------------------

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_rows: no inputs");
  Eigen::Index rows = 0;
  const auto cols = parts.front().cols();
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ArgumentError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts.front().tape()->push(std::move(out), parts, [ps](Tape& t, const Matrix& g) {
    Eigen::Index r = 0;
    for (const Var& p : ps) {
      if (t.requires_grad(p.id())) t.accumulate(p, g.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var gather_rows(Var x, std::span<const int> rows) {
  const Matrix& in = x.value();
  Matrix out(static_cast<Eigen::Index>(rows.size()), in.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= in.rows()) throw ArgumentError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = in.row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return x.tape()->push(std::move(out), {x}, [x, idx = std::move(idx)](Tape& t, const Matrix& g) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) dx.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(x, dx);
  });
}

Var group_mean_rows(Var x, std::span<const int> groups) {
  const Matrix& in = x.value();
  Matrix out(static_cast<Eigen::Index>(groups.size()), in.cols());
  Eigen::Index r = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g] < 1 || r + groups[g] > in.rows()) throw ArgumentError("group_mean_rows: bad groups");
    out.row(static_cast<Eigen::Index>(g)) = in.middleRows(r, groups[g]).colwise().mean();
    r += groups[g];
  }
  if (r != in.rows()) throw ArgumentError("group_mean_rows: groups do not cover the rows");
  std::vector<int> gs(groups.begin(), groups.end());
  return x.tape()->push(std::move(out), {x}, [x, gs = std::move(gs)](Tape& t, const Matrix& g) {
    Matrix dx(x.rows(), x.cols());
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < gs.size(); ++i) {
      dx.middleRows(r, gs[i]).rowwise() = g.row(static_cast<Eigen::Index>(i)) / static_cast<double>(gs[i]);
      r += gs[i];
    }
    t.accumulate(x, dx);
  });
}

Var sum_all(Var x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape()->push(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var binary_cross_entropy(Var p, const Matrix& targets, double eps) {
  const Matrix& P = p.value();
  if (P.rows() != targets.rows() || P.cols() != targets.cols()) {
    throw ArgumentError("binary_cross_entropy: prediction/label length mismatch");
  }
  const double n = static_cast<double>(P.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < P.size(); ++i) {
    const double pc = std::clamp(P(i), eps, 1.0 - eps);
    const double y = targets(i);
    loss -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
  }
  Matrix out(1, 1);
  out(0, 0) = loss / n;
  return p.tape()->push(std::move(out), {p}, [p, targets, eps, n](Tape& t, const Matrix& g) {
    const Matrix& P = p.value();
    Matrix dp(P.rows(), P.cols());
    for (Eigen::Index i = 0; i < P.size(); ++i) {
      const double v = P(i);
      const double y = targets(i);
      dp(i) = (v < eps || v > 1.0 - eps) ? 0.0 : (-y / v + (1.0 - y) / (1.0 - v)) / n;
    }
    t.accumulate(p, g(0, 0) * dp);
  });
}

}  // namespace amclip::ag
