#include <doctest.h>

#include <functional>
#include <random>

#include "amclip/autograd.hpp"
#include "amclip/errors.hpp"

using namespace amclip;
using ag::Matrix;
using ag::Var;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

using Fn = std::function<Var(ag::Tape&, std::vector<Var>&)>;

// Projects the op output onto fixed random weights so every output element contributes.
double max_rel_error(std::vector<Matrix> inputs, const Fn& fn, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix proj;
  auto eval = [&](bool backward, std::vector<Matrix>* grads) {
    ag::Tape tape;
    std::vector<Var> leaves;
    for (const auto& m : inputs) leaves.push_back(tape.leaf(m));
    Var out = fn(tape, leaves);
    if (proj.size() == 0) proj = random_matrix(static_cast<int>(out.rows()), static_cast<int>(out.cols()), rng);
    Matrix w = proj;
    Var weighted = tape.push(Matrix::Constant(1, 1, out.value().cwiseProduct(w).sum()), {out},
                             [out, w](ag::Tape& t, const Matrix& g) { t.accumulate(out, g(0, 0) * w); });
    if (backward) {
      tape.backward(weighted);
      for (auto& l : leaves) grads->push_back(tape.grad(l));
    }
    return weighted.value()(0, 0);
  };
  std::vector<Matrix> analytic;
  eval(true, &analytic);
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k](i);
      inputs[k](i) = orig + h;
      const double up = eval(false, nullptr);
      inputs[k](i) = orig - h;
      const double down = eval(false, nullptr);
      inputs[k](i) = orig;
      const double fd = (up - down) / (2 * h);
      const double a = analytic[k](i);
      worst = std::max(worst, std::abs(a - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("elementwise and linear ops match finite differences") {
  std::mt19937_64 rng(1);
  CHECK(max_rel_error({random_matrix(3, 4, rng), random_matrix(4, 2, rng)},
                      [](ag::Tape&, std::vector<Var>& v) { return ag::matmul(v[0], v[1]); }, 1) < 1e-6);
  CHECK(max_rel_error({random_matrix(3, 4, rng), random_matrix(4, 5, rng), random_matrix(1, 5, rng)},
                      [](ag::Tape&, std::vector<Var>& v) { return ag::linear(v[0], v[1], v[2]); }, 2) < 1e-6);
  CHECK(max_rel_error({random_matrix(3, 4, rng)},
                      [](ag::Tape&, std::vector<Var>& v) { return ag::gelu(v[0]); }, 3) < 1e-6);
  CHECK(max_rel_error({random_matrix(3, 4, rng)},
                      [](ag::Tape&, std::vector<Var>& v) { return ag::sigmoid(v[0]); }, 4) < 1e-6);
  CHECK(max_rel_error({random_matrix(3, 4, rng), random_matrix(1, 4, rng)},
                      [](ag::Tape&, std::vector<Var>& v) { return ag::add_row(v[0], v[1]); }, 5) < 1e-6);
  CHECK(max_rel_error({random_matrix(3, 4, rng)},
                      [](ag::Tape&, std::vector<Var>& v) { return ag::transpose(ag::scale(v[0], -2.5)); }, 6) <
        1e-6);
}

TEST_CASE("normalization ops match finite differences") {
  std::mt19937_64 rng(2);
  CHECK(max_rel_error({random_matrix(4, 6, rng), random_matrix(1, 6, rng), random_matrix(1, 6, rng)},
                      [](ag::Tape&, std::vector<Var>& v) { return ag::layer_norm(v[0], v[1], v[2]); }, 7) < 1e-6);
  CHECK(max_rel_error({random_matrix(4, 6, rng)},
                      [](ag::Tape&, std::vector<Var>& v) { return ag::l2_normalize_rows(v[0]); }, 8) < 1e-6);
}

TEST_CASE("grouped attention matches finite differences") {
  std::mt19937_64 rng(3);
  const std::vector<int> qg = {3, 2};
  const std::vector<int> kg = {2, 4};
  CHECK(max_rel_error({random_matrix(5, 4, rng), random_matrix(6, 4, rng), random_matrix(6, 4, rng)},
                      [&](ag::Tape&, std::vector<Var>& v) { return ag::attention(v[0], v[1], v[2], 2, qg, kg); },
                      9) < 1e-6);
}

TEST_CASE("reshaping ops match finite differences") {
  std::mt19937_64 rng(4);
  const std::vector<int> rows = {2, 0, 2};
  const std::vector<int> groups = {1, 3};
  CHECK(max_rel_error({random_matrix(3, 2, rng)},
                      [&](ag::Tape&, std::vector<Var>& v) { return ag::gather_rows(v[0], rows); }, 10) < 1e-6);
  CHECK(max_rel_error({random_matrix(4, 2, rng)},
                      [&](ag::Tape&, std::vector<Var>& v) { return ag::group_mean_rows(v[0], groups); }, 11) < 1e-6);
  CHECK(max_rel_error({random_matrix(1, 2, rng), random_matrix(2, 2, rng)},
                      [&](ag::Tape&, std::vector<Var>& v) { return ag::concat_rows(v); }, 12) < 1e-6);
}

TEST_CASE("binary cross entropy gradient") {
  std::mt19937_64 rng(5);
  Matrix p(1, 4);
  p << 0.2, 0.7, 0.45, 0.9;
  Matrix y(1, 4);
  y << 1, 0, 1, 1;
  CHECK(max_rel_error({p}, [&](ag::Tape&, std::vector<Var>& v) { return ag::binary_cross_entropy(v[0], y); }, 13) <
        1e-6);
}

TEST_CASE("tape bookkeeping") {
  ag::Tape tape;
  Matrix w = Matrix::Constant(2, 2, 1.0);
  Var c = tape.constant(Matrix::Identity(2, 2));
  Var l = tape.leaf(w);
  Var out = ag::sum_all(ag::matmul(c, l));
  tape.backward(out);
  CHECK(tape.grad(l) == Matrix::Ones(2, 2));
  CHECK(tape.grad(c) == Matrix::Zero(2, 2));  // constants receive nothing
  CHECK_THROWS_AS(tape.backward(l), ArgumentError);
  CHECK_THROWS_AS(ag::add(c, tape.constant(Matrix::Zero(3, 2))), ArgumentError);
  CHECK_THROWS_AS(ag::l2_normalize_rows(tape.constant(Matrix::Zero(1, 3))), NumericError);
}
