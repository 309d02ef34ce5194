#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "dacl/matrix.hpp"

namespace dacl::ad {

class Tape;

// Handle to a node in a tape's computation graph. Cheap to copy; valid for
// the lifetime of the owning tape.
class Value {
 public:
  Value() = default;
  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const noexcept { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }

  const Matrix& payload() const;
  const Matrix& grad() const;
  bool requires_grad() const;
  std::size_t rows() const { return payload().rows(); }
  std::size_t cols() const { return payload().cols(); }
  double scalar() const;  // payload entry of a 1x1 node

 private:
  friend class Tape;
  Value(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddRowVec,
  kRelu,
  kLog,
  kClampMin,
  kRowSoftmax,
  kConcatCols,
  kTranspose,
  kMeanRows,
  kSumAll,
  kL1RowDiffMean,
  kFrobSq,
};

// Define-by-run reverse-mode tape over dense matrices, rebuilt per minibatch.
// Nodes are recorded in topological order; backward() walks them in exact
// reverse order. A tape must never be touched from two threads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  Value leaf(Matrix value, bool requires_grad = false);
  // Leaf referencing caller-owned storage (avoids copying parameter blocks).
  // The matrix must outlive the tape and stay unmodified until the last
  // backward() on this tape has run.
  Value leaf_ref(const Matrix* value, bool requires_grad = false);

  const Matrix& value(Value v) const { return node(v).payload(); }
  const Matrix& grad(Value v) const { return node(v).grad; }
  bool requires_grad(Value v) const { return node(v).requires_grad; }

  // Accumulates d(root)/d(node) into every reachable node's grad. The root
  // must be 1x1. Calling it twice doubles the stored gradients.
  void backward(Value root);
  void zero_grads();
  std::size_t node_count() const noexcept { return nodes_.size(); }

  // Low-level node constructor; the op builders below are the intended API.
  Value emit(OpKind op, Matrix value, std::span<const Value> parents, double scalar = 0.0);

 private:
  struct Node {
    Matrix owned;
    const Matrix* ext = nullptr;  // set for leaf_ref nodes
    Matrix grad;
    std::array<std::uint32_t, 2> parent{0, 0};
    std::uint8_t parent_count = 0;
    OpKind op = OpKind::kLeaf;
    bool requires_grad = false;
    double scalar = 0.0;  // kScale factor / kClampMin floor

    const Matrix& payload() const { return ext != nullptr ? *ext : owned; }
  };

  const Node& node(Value v) const;
  Node& node(Value v);
  void propagate(std::uint32_t id, std::vector<Matrix>& pass);

  // deque: payload()/grad() references stay valid while the graph grows.
  std::deque<Node> nodes_;
};

// Operation builders. Operands must live on the same tape; shape violations
// throw std::invalid_argument naming the offending shapes.
Value matmul(Value a, Value b);
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);                // elementwise
Value scale(Value a, double s);
Value add_rowvec(Value a, Value row);       // broadcast a 1xC row over the rows of a
Value relu(Value a);
Value log(Value a);                         // rejects non-positive entries
Value clamp_min(Value a, double floor);     // max(a, floor); zero gradient where clamped
Value row_softmax(Value a);                 // per-row softmax with max-shift
Value concat_cols(Value a, Value b);
Value transpose(Value a);
Value mean_rows(Value a);                   // mean over rows of per-row sums -> 1x1
Value sum_all(Value a);                     // -> 1x1
Value l1_rowdiff_mean(Value a, Value b);    // mean over rows of the L1 row difference -> 1x1
Value frob_sq(Value a);                     // squared Frobenius norm -> 1x1

}  // namespace dacl::ad
