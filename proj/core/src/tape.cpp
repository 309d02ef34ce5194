#include "dacl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dacl::ad {

namespace {

void check_same_tape(Value a, Value b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw std::logic_error("autodiff op: operands must live on the same tape");
  }
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

const Matrix& Value::payload() const { return tape_->value(*this); }
const Matrix& Value::grad() const { return tape_->grad(*this); }
bool Value::requires_grad() const { return tape_->requires_grad(*this); }

double Value::scalar() const {
  const Matrix& m = payload();
  if (m.rows() != 1 || m.cols() != 1) {
    throw std::logic_error("Value::scalar: node is " + m.shape_str() + ", expected 1x1");
  }
  return m(0, 0);
}

const Tape::Node& Tape::node(Value v) const {
  if (!v.valid() || v.tape_ != this || v.id() >= nodes_.size()) {
    throw std::logic_error("Tape: value handle does not belong to this tape");
  }
  return nodes_[v.id()];
}

Tape::Node& Tape::node(Value v) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(v));
}

Value Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.grad = Matrix(value.rows(), value.cols());
  n.owned = std::move(value);
  n.op = OpKind::kLeaf;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Value(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Value Tape::leaf_ref(const Matrix* value, bool requires_grad) {
  Node n;
  n.ext = value;
  n.grad = Matrix(value->rows(), value->cols());
  n.op = OpKind::kLeaf;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Value(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Value Tape::emit(OpKind op, Matrix value, std::span<const Value> parents, double scalar) {
  Node n;
  n.grad = Matrix(value.rows(), value.cols());
  n.owned = std::move(value);
  n.op = op;
  n.scalar = scalar;
  n.parent_count = static_cast<std::uint8_t>(parents.size());
  for (std::size_t i = 0; i < parents.size(); ++i) {
    n.parent[i] = parents[i].id();
    n.requires_grad = n.requires_grad || nodes_[parents[i].id()].requires_grad;
  }
  nodes_.push_back(std::move(n));
  return Value(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::zero_grads() {
  for (Node& n : nodes_) n.grad.fill(0.0);
}

void Tape::backward(Value root) {
  const Node& r = node(root);
  if (r.payload().rows() != 1 || r.payload().cols() != 1) {
    throw std::logic_error("backward: root must be 1x1, got " + r.payload().shape_str());
  }
  // Pass-local gradients, so repeated backward() calls add cleanly into the
  // persistent per-node grads instead of compounding. A default 0x0 entry
  // means no gradient reached the node in this pass.
  std::vector<Matrix> pass(root.id() + 1);
  pass[root.id()] = Matrix(1, 1, 1.0);
  for (std::uint32_t id = root.id() + 1; id-- > 0;) {
    if (pass[id].rows() == 0 && pass[id].cols() == 0) continue;
    if (!nodes_[id].requires_grad) continue;
    propagate(id, pass);
  }
  for (std::uint32_t id = 0; id <= root.id(); ++id) {
    if (pass[id].rows() == 0 && pass[id].cols() == 0) continue;
    if (!nodes_[id].requires_grad) continue;
    Node& n = nodes_[id];
    auto g = n.grad.data();
    auto p = pass[id].data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += p[i];
  }
}

void Tape::propagate(std::uint32_t id, std::vector<Matrix>& pass) {
  Node& n = nodes_[id];
  const Matrix& g = pass[id];

  auto ensure = [&](std::uint32_t pid) -> Matrix& {
    Matrix& m = pass[pid];
    if (m.rows() == 0 && m.cols() == 0) {
      m = Matrix(nodes_[pid].payload().rows(), nodes_[pid].payload().cols());
    }
    return m;
  };
  auto wants = [&](int slot) { return nodes_[n.parent[slot]].requires_grad; };
  auto pvalue = [&](int slot) -> const Matrix& { return nodes_[n.parent[slot]].payload(); };

  switch (n.op) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatMul: {
      if (wants(0)) addmul_nt(ensure(n.parent[0]), g, pvalue(1));  // dA += G B^T
      if (wants(1)) addmul_tn(ensure(n.parent[1]), pvalue(0), g);  // dB += A^T G
      break;
    }
    case OpKind::kAdd: {
      for (int s : {0, 1}) {
        if (!wants(s)) continue;
        auto out = ensure(n.parent[s]).data();
        auto gd = g.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += gd[i];
      }
      break;
    }
    case OpKind::kSub: {
      if (wants(0)) {
        auto out = ensure(n.parent[0]).data();
        auto gd = g.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += gd[i];
      }
      if (wants(1)) {
        auto out = ensure(n.parent[1]).data();
        auto gd = g.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= gd[i];
      }
      break;
    }
    case OpKind::kMul: {
      if (wants(0)) {
        auto out = ensure(n.parent[0]).data();
        auto gd = g.data();
        auto other = pvalue(1).data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += gd[i] * other[i];
      }
      if (wants(1)) {
        auto out = ensure(n.parent[1]).data();
        auto gd = g.data();
        auto other = pvalue(0).data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += gd[i] * other[i];
      }
      break;
    }
    case OpKind::kScale: {
      if (wants(0)) {
        auto out = ensure(n.parent[0]).data();
        auto gd = g.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += n.scalar * gd[i];
      }
      break;
    }
    case OpKind::kAddRowVec: {
      if (wants(0)) {
        auto out = ensure(n.parent[0]).data();
        auto gd = g.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += gd[i];
      }
      if (wants(1)) {
        Matrix& out = ensure(n.parent[1]);  // 1 x C
        for (std::size_t r = 0; r < g.rows(); ++r) {
          const double* grow = g.row_ptr(r);
          for (std::size_t c = 0; c < g.cols(); ++c) out(0, c) += grow[c];
        }
      }
      break;
    }
    case OpKind::kRelu: {
      if (wants(0)) {
        auto out = ensure(n.parent[0]).data();
        auto gd = g.data();
        auto in = pvalue(0).data();
        for (std::size_t i = 0; i < out.size(); ++i) {
          if (in[i] > 0.0) out[i] += gd[i];  // subgradient 0 at exactly 0
        }
      }
      break;
    }
    case OpKind::kLog: {
      if (wants(0)) {
        auto out = ensure(n.parent[0]).data();
        auto gd = g.data();
        auto in = pvalue(0).data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += gd[i] / in[i];
      }
      break;
    }
    case OpKind::kClampMin: {
      if (wants(0)) {
        auto out = ensure(n.parent[0]).data();
        auto gd = g.data();
        auto in = pvalue(0).data();
        for (std::size_t i = 0; i < out.size(); ++i) {
          if (in[i] > n.scalar) out[i] += gd[i];
        }
      }
      break;
    }
    case OpKind::kRowSoftmax: {
      if (wants(0)) {
        Matrix& out = ensure(n.parent[0]);
        const Matrix& y = n.payload();
        for (std::size_t r = 0; r < y.rows(); ++r) {
          const double* yrow = y.row_ptr(r);
          const double* grow = g.row_ptr(r);
          double dot = 0.0;
          for (std::size_t c = 0; c < y.cols(); ++c) dot += grow[c] * yrow[c];
          double* orow = out.row_ptr(r);
          for (std::size_t c = 0; c < y.cols(); ++c) {
            orow[c] += yrow[c] * (grow[c] - dot);
          }
        }
      }
      break;
    }
    case OpKind::kConcatCols: {
      const std::size_t d1 = pvalue(0).cols();
      if (wants(0)) {
        Matrix& out = ensure(n.parent[0]);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < d1; ++c) out(r, c) += g(r, c);
        }
      }
      if (wants(1)) {
        Matrix& out = ensure(n.parent[1]);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += g(r, d1 + c);
        }
      }
      break;
    }
    case OpKind::kTranspose: {
      if (wants(0)) {
        Matrix& out = ensure(n.parent[0]);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) out(c, r) += g(r, c);
        }
      }
      break;
    }
    case OpKind::kMeanRows: {
      if (wants(0)) {
        Matrix& out = ensure(n.parent[0]);
        const double gv = g(0, 0) / static_cast<double>(out.rows());
        for (double& x : out.data()) x += gv;
      }
      break;
    }
    case OpKind::kSumAll: {
      if (wants(0)) {
        Matrix& out = ensure(n.parent[0]);
        const double gv = g(0, 0);
        for (double& x : out.data()) x += gv;
      }
      break;
    }
    case OpKind::kL1RowDiffMean: {
      const double gv = g(0, 0) / static_cast<double>(pvalue(0).rows());
      auto a = pvalue(0).data();
      auto b = pvalue(1).data();
      if (wants(0)) {
        auto out = ensure(n.parent[0]).data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += gv * sign(a[i] - b[i]);
      }
      if (wants(1)) {
        auto out = ensure(n.parent[1]).data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= gv * sign(a[i] - b[i]);
      }
      break;
    }
    case OpKind::kFrobSq: {
      if (wants(0)) {
        auto out = ensure(n.parent[0]).data();
        auto in = pvalue(0).data();
        const double gv = g(0, 0);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += 2.0 * gv * in[i];
      }
      break;
    }
  }
}

// ---- op builders ----

namespace {

Value emit2(Tape& t, OpKind op, Matrix value, Value a, Value b, double scalar = 0.0) {
  const Value parents[2] = {a, b};
  return t.emit(op, std::move(value), parents, scalar);
}

Value emit1(Tape& t, OpKind op, Matrix value, Value a, double scalar = 0.0) {
  const Value parents[1] = {a};
  return t.emit(op, std::move(value), parents, scalar);
}

void check_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
  }
}

}  // namespace

Value matmul(Value a, Value b) {
  check_same_tape(a, b);
  return emit2(a.tape(), OpKind::kMatMul, dacl::matmul(a.payload(), b.payload()), a, b);
}

Value add(Value a, Value b) {
  check_same_tape(a, b);
  check_same_shape("add", a.payload(), b.payload());
  Matrix out = a.payload();
  auto o = out.data();
  auto bd = b.payload().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return emit2(a.tape(), OpKind::kAdd, std::move(out), a, b);
}

Value sub(Value a, Value b) {
  check_same_tape(a, b);
  check_same_shape("sub", a.payload(), b.payload());
  Matrix out = a.payload();
  auto o = out.data();
  auto bd = b.payload().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return emit2(a.tape(), OpKind::kSub, std::move(out), a, b);
}

Value mul(Value a, Value b) {
  check_same_tape(a, b);
  check_same_shape("mul", a.payload(), b.payload());
  Matrix out = a.payload();
  auto o = out.data();
  auto bd = b.payload().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  return emit2(a.tape(), OpKind::kMul, std::move(out), a, b);
}

Value scale(Value a, double s) {
  Matrix out = a.payload();
  for (double& x : out.data()) x *= s;
  return emit1(a.tape(), OpKind::kScale, std::move(out), a, s);
}

Value add_rowvec(Value a, Value row) {
  check_same_tape(a, row);
  const Matrix& r = row.payload();
  if (r.rows() != 1 || r.cols() != a.payload().cols()) {
    throw std::invalid_argument("add_rowvec: need 1x" + std::to_string(a.payload().cols()) +
                                " row, got " + r.shape_str());
  }
  Matrix out = a.payload();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* orow = out.row_ptr(i);
    for (std::size_t j = 0; j < out.cols(); ++j) orow[j] += r(0, j);
  }
  return emit2(a.tape(), OpKind::kAddRowVec, std::move(out), a, row);
}

Value relu(Value a) {
  Matrix out = a.payload();
  for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
  return emit1(a.tape(), OpKind::kRelu, std::move(out), a);
}

Value log(Value a) {
  Matrix out = a.payload();
  for (double& x : out.data()) {
    if (x <= 0.0) {
      throw std::domain_error("log: non-positive entry " + std::to_string(x));
    }
    x = std::log(x);
  }
  return emit1(a.tape(), OpKind::kLog, std::move(out), a);
}

Value clamp_min(Value a, double floor) {
  Matrix out = a.payload();
  for (double& x : out.data()) x = x < floor ? floor : x;
  return emit1(a.tape(), OpKind::kClampMin, std::move(out), a, floor);
}

Value row_softmax(Value a) {
  Matrix out = a.payload();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* row = out.row_ptr(r);
    double mx = row[0];
    for (std::size_t c = 1; c < out.cols(); ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < out.cols(); ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < out.cols(); ++c) row[c] /= sum;
  }
  return emit1(a.tape(), OpKind::kRowSoftmax, std::move(out), a);
}

Value concat_cols(Value a, Value b) {
  check_same_tape(a, b);
  const Matrix& ma = a.payload();
  const Matrix& mb = b.payload();
  if (ma.rows() != mb.rows()) {
    throw std::invalid_argument("concat_cols: row counts disagree: " + ma.shape_str() +
                                " vs " + mb.shape_str());
  }
  Matrix out(ma.rows(), ma.cols() + mb.cols());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* orow = out.row_ptr(r);
    const double* arow = ma.row_ptr(r);
    const double* brow = mb.row_ptr(r);
    std::copy(arow, arow + ma.cols(), orow);
    std::copy(brow, brow + mb.cols(), orow + ma.cols());
  }
  return emit2(a.tape(), OpKind::kConcatCols, std::move(out), a, b);
}

Value transpose(Value a) {
  return emit1(a.tape(), OpKind::kTranspose, transposed(a.payload()), a);
}

Value mean_rows(Value a) {
  const Matrix& m = a.payload();
  if (m.rows() == 0) throw std::invalid_argument("mean_rows: empty input");
  double acc = 0.0;
  for (double x : m.data()) acc += x;
  return emit1(a.tape(), OpKind::kMeanRows,
               Matrix::scalar(acc / static_cast<double>(m.rows())), a);
}

Value sum_all(Value a) {
  double acc = 0.0;
  for (double x : a.payload().data()) acc += x;
  return emit1(a.tape(), OpKind::kSumAll, Matrix::scalar(acc), a);
}

Value l1_rowdiff_mean(Value a, Value b) {
  check_same_tape(a, b);
  check_same_shape("l1_rowdiff_mean", a.payload(), b.payload());
  const Matrix& ma = a.payload();
  if (ma.rows() == 0) throw std::invalid_argument("l1_rowdiff_mean: empty input");
  double acc = 0.0;
  auto ad = ma.data();
  auto bd = b.payload().data();
  for (std::size_t i = 0; i < ad.size(); ++i) acc += std::abs(ad[i] - bd[i]);
  return emit2(a.tape(), OpKind::kL1RowDiffMean,
               Matrix::scalar(acc / static_cast<double>(ma.rows())), a, b);
}

Value frob_sq(Value a) {
  double acc = 0.0;
  for (double x : a.payload().data()) acc += x * x;
  return emit1(a.tape(), OpKind::kFrobSq, Matrix::scalar(acc), a);
}

}  // namespace dacl::ad
