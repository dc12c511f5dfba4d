#pragma once

#include <Eigen/Core>

#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace amclip::ag {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. Nodes are appended in topological order; backward() walks them in reverse.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Matrix value);
  /// Leaf that receives a gradient. The matrix is referenced, not copied, and must outlive the tape.
  Var leaf(const Matrix& value);

  /// Appends an op node; `backward` runs only if some parent requires a gradient.
  Var push(Matrix value, std::initializer_list<Var> parents, Backward backward);
  Var push(Matrix value, std::span<const Var> parents, Backward backward);

  const Matrix& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  /// Seeds d(loss)/d(loss) = 1 for a 1×1 node and propagates.
  void backward(Var loss);

  /// Gradient of the last backward() with respect to `v`; zero matrix if none reached it.
  Matrix grad(Var v) const;

  void accumulate(Var v, const Matrix& g);
  void accumulate(int id, const Matrix& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    Backward backward;
  };

  std::deque<Node> nodes_;
};

// ----- ops --------------------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_constant(Var a, const Matrix& c);
/// x + row, broadcasting a 1×D row over every row of x.
Var add_row(Var x, Var row);
Var scale(Var a, double s);
Var matmul(Var a, Var b);
Var transpose(Var a);
/// x·W + b with b a 1×out row.
Var linear(Var x, Var w, Var b);

Var gelu(Var a);
Var sigmoid(Var a);

/// Row-wise layer normalization with 1×D gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
/// Row-wise division by the Euclidean norm. Throws NumericError on a zero row.
Var l2_normalize_rows(Var x);

/// Scaled dot-product attention within row groups.
/// q rows are split into groups of sizes `q_groups`, k/v rows into `kv_groups` (same count);
/// group g of q attends only to group g of k/v. Columns are split evenly into `heads`.
Var attention(Var q, Var k, Var v, int heads, std::span<const int> q_groups, std::span<const int> kv_groups);

Var concat_rows(std::span<const Var> parts);
Var gather_rows(Var x, std::span<const int> rows);
/// Mean over consecutive row groups; output has one row per group.
Var group_mean_rows(Var x, std::span<const int> groups);
Var sum_all(Var x);

/// Mean binary cross-entropy; probabilities are clamped to [eps, 1 - eps].
Var binary_cross_entropy(Var p, const Matrix& targets, double eps = 1e-7);

}  // namespace amclip::ag
