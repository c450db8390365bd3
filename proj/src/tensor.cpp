#include "odemm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace odemm::ad {

namespace {

int product(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) n *= d;
  return n;
}

[[noreturn]] void shape_fail(const std::string& op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(op + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

void check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    throw numeric_error(std::string(op) + ": non-finite value produced");
  }
}

}  // namespace

Tensor::Tensor(std::vector<int> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dimension " + shape_str());
  }
  if (product(shape) != static_cast<int>(data.size())) {
    throw std::invalid_argument("Tensor: shape " + shape_str() + " does not match data length " +
                                std::to_string(data.size()));
  }
  if (!all_finite()) throw numeric_error("Tensor: non-finite entry at construction");
}

Tensor Tensor::zeros(const std::vector<int>& shape) {
  return Tensor(shape, std::vector<double>(static_cast<size_t>(product(shape)), 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vec(std::vector<double> v) {
  int n = static_cast<int>(v.size());
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

int Tensor::numel() const { return product(shape); }

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double x) { return std::isfinite(x); });
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Tensor value, std::vector<int> parents,
                 std::function<void(const Tensor&, std::vector<Tensor>&)> backprop) {
  if (debug_checks) check_finite(value, "record");
  nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backprop)});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

namespace {

Var binary_elementwise(const char* name, Var a, Var b,
                       const std::function<double(double, double)>& fwd,
                       // partials w.r.t. a and b given (a_i, b_i)
                       const std::function<double(double, double)>& da,
                       const std::function<double(double, double)>& db) {
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  if (!va.same_shape(vb)) shape_fail(name, va, vb);
  Tensor out = va;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = fwd(va.data[i], vb.data[i]);
  Tape* tape = a.tape;
  int ia = a.id, ib = b.id;
  return tape->record(std::move(out), {ia, ib},
                      [tape, ia, ib, da, db](const Tensor& g, std::vector<Tensor>& grads) {
                        const Tensor& xa = tape->value(ia);
                        const Tensor& xb = tape->value(ib);
                        for (size_t i = 0; i < g.data.size(); ++i) {
                          grads[static_cast<size_t>(ia)].data[i] += g.data[i] * da(xa.data[i], xb.data[i]);
                          grads[static_cast<size_t>(ib)].data[i] += g.data[i] * db(xa.data[i], xb.data[i]);
                        }
                      });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary_elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2) throw std::invalid_argument("matmul: left operand must be rank 2, got " + A.shape_str());
  bool vec_rhs = B.rank() == 1;
  if (!vec_rhs && B.rank() != 2) throw std::invalid_argument("matmul: right operand rank " + B.shape_str());
  int m = A.rows(), n = A.cols();
  int p = vec_rhs ? 1 : B.cols();
  int bn = vec_rhs ? B.shape[0] : B.rows();
  if (n != bn) shape_fail("matmul", A, B);

  Tensor out = vec_rhs ? Tensor::zeros({m}) : Tensor::zeros({m, p});
  // i-k-j loop order, contiguous inner accesses
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < n; ++k) {
      double aik = A.data[static_cast<size_t>(i) * n + k];
      if (aik == 0.0) continue;
      const double* brow = &B.data[static_cast<size_t>(k) * p];
      double* orow = &out.data[static_cast<size_t>(i) * p];
      for (int j = 0; j < p; ++j) orow[j] += aik * brow[j];
    }
  }
  Tape* tape = a.tape;
  int ia = a.id, ib = b.id;
  return tape->record(
      std::move(out), {ia, ib}, [tape, ia, ib, m, n, p](const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& A = tape->value(ia);
        const Tensor& B = tape->value(ib);
        Tensor& gA = grads[static_cast<size_t>(ia)];
        Tensor& gB = grads[static_cast<size_t>(ib)];
        // dA = g · B^T
        for (int i = 0; i < m; ++i) {
          for (int k = 0; k < n; ++k) {
            const double* grow = &g.data[static_cast<size_t>(i) * p];
            const double* brow = &B.data[static_cast<size_t>(k) * p];
            double acc = 0.0;
            for (int j = 0; j < p; ++j) acc += grow[j] * brow[j];
            gA.data[static_cast<size_t>(i) * n + k] += acc;
          }
        }
        // dB = A^T · g
        for (int i = 0; i < m; ++i) {
          const double* grow = &g.data[static_cast<size_t>(i) * p];
          for (int k = 0; k < n; ++k) {
            double aik = A.data[static_cast<size_t>(i) * n + k];
            if (aik == 0.0) continue;
            double* brow = &gB.data[static_cast<size_t>(k) * p];
            for (int j = 0; j < p; ++j) brow[j] += aik * grow[j];
          }
        }
      });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Tape* tape = parts[0].tape;
  int rank = parts[0].value().rank();
  if (axis < 0 || axis >= std::max(rank, 1)) throw std::invalid_argument("concat: bad axis");
  std::vector<int> parents;
  for (const Var& v : parts) parents.push_back(v.id);

  if (rank == 1) {
    if (axis != 0) throw std::invalid_argument("concat: axis 0 only for vectors");
    std::vector<double> out;
    std::vector<int> lens;
    for (const Var& v : parts) {
      const Tensor& t = v.value();
      if (t.rank() != 1) shape_fail("concat", parts[0].value(), t);
      lens.push_back(t.shape[0]);
      out.insert(out.end(), t.data.begin(), t.data.end());
    }
    return tape->record(Tensor::vec(std::move(out)), parents,
                        [parents, lens](const Tensor& g, std::vector<Tensor>& grads) {
                          size_t off = 0;
                          for (size_t k = 0; k < parents.size(); ++k) {
                            Tensor& gp = grads[static_cast<size_t>(parents[k])];
                            for (int i = 0; i < lens[k]; ++i) gp.data[static_cast<size_t>(i)] += g.data[off + i];
                            off += static_cast<size_t>(lens[k]);
                          }
                        });
  }

  if (rank != 2) throw std::invalid_argument("concat: rank > 2 unsupported");
  if (axis == 0) {
    int cols = parts[0].value().cols();
    std::vector<double> out;
    std::vector<int> rows;
    for (const Var& v : parts) {
      const Tensor& t = v.value();
      if (t.rank() != 2 || t.cols() != cols) shape_fail("concat", parts[0].value(), t);
      rows.push_back(t.rows());
      out.insert(out.end(), t.data.begin(), t.data.end());
    }
    int total_rows = std::accumulate(rows.begin(), rows.end(), 0);
    return tape->record(Tensor::matrix(total_rows, cols, std::move(out)), parents,
                        [parents, rows, cols](const Tensor& g, std::vector<Tensor>& grads) {
                          size_t off = 0;
                          for (size_t k = 0; k < parents.size(); ++k) {
                            Tensor& gp = grads[static_cast<size_t>(parents[k])];
                            size_t n = static_cast<size_t>(rows[k]) * cols;
                            for (size_t i = 0; i < n; ++i) gp.data[i] += g.data[off + i];
                            off += n;
                          }
                        });
  }
  // axis == 1
  int rows = parts[0].value().rows();
  std::vector<int> colw;
  int total_cols = 0;
  for (const Var& v : parts) {
    const Tensor& t = v.value();
    if (t.rank() != 2 || t.rows() != rows) shape_fail("concat", parts[0].value(), t);
    colw.push_back(t.cols());
    total_cols += t.cols();
  }
  Tensor out = Tensor::zeros({rows, total_cols});
  int coff = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = parts[k].value();
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < colw[k]; ++j) out.at(i, coff + j) = t.at(i, j);
    coff += colw[k];
  }
  return tape->record(std::move(out), parents,
                      [parents, colw, rows, total_cols](const Tensor& g, std::vector<Tensor>& grads) {
                        int coff = 0;
                        for (size_t k = 0; k < parents.size(); ++k) {
                          Tensor& gp = grads[static_cast<size_t>(parents[k])];
                          for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < colw[k]; ++j)
                              gp.at(i, j) += g.data[static_cast<size_t>(i) * total_cols + coff + j];
                          coff += colw[k];
                        }
                      });
}

Var slice(Var v, int axis, int start, int end) {
  const Tensor& t = v.value();
  if (t.rank() < 1 || t.rank() > 2) throw std::invalid_argument("slice: rank must be 1 or 2");
  if (axis < 0 || axis >= t.rank()) throw std::invalid_argument("slice: bad axis");
  int dim = t.shape[static_cast<size_t>(axis)];
  if (start < 0 || end > dim || start >= end)
    throw std::invalid_argument("slice: bad range [" + std::to_string(start) + "," +
                                std::to_string(end) + ") for dim " + std::to_string(dim));
  Tape* tape = v.tape;
  int iv = v.id;
  if (t.rank() == 1) {
    Tensor out = Tensor::zeros({end - start});
    for (int i = start; i < end; ++i) out.data[static_cast<size_t>(i - start)] = t.data[static_cast<size_t>(i)];
    return tape->record(std::move(out), {iv},
                        [iv, start, end](const Tensor& g, std::vector<Tensor>& grads) {
                          Tensor& gp = grads[static_cast<size_t>(iv)];
                          for (int i = start; i < end; ++i) gp.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i - start)];
                        });
  }
  int rows = t.rows(), cols = t.cols();
  if (axis == 0) {
    Tensor out = Tensor::zeros({end - start, cols});
    for (int i = start; i < end; ++i)
      for (int j = 0; j < cols; ++j) out.at(i - start, j) = t.at(i, j);
    return tape->record(std::move(out), {iv},
                        [iv, start, end, cols](const Tensor& g, std::vector<Tensor>& grads) {
                          Tensor& gp = grads[static_cast<size_t>(iv)];
                          for (int i = start; i < end; ++i)
                            for (int j = 0; j < cols; ++j)
                              gp.at(i, j) += g.data[static_cast<size_t>(i - start) * cols + j];
                        });
  }
  Tensor out = Tensor::zeros({rows, end - start});
  for (int i = 0; i < rows; ++i)
    for (int j = start; j < end; ++j) out.at(i, j - start) = t.at(i, j);
  return tape->record(std::move(out), {iv},
                      [iv, start, end, rows](const Tensor& g, std::vector<Tensor>& grads) {
                        Tensor& gp = grads[static_cast<size_t>(iv)];
                        int w = end - start;
                        for (int i = 0; i < rows; ++i)
                          for (int j = start; j < end; ++j)
                            gp.at(i, j) += g.data[static_cast<size_t>(i) * w + (j - start)];
                      });
}

Var tanh(Var v) {
  const Tensor& x = v.value();
  Tensor out = x;
  for (double& e : out.data) e = std::tanh(e);
  Tape* tape = v.tape;
  int iv = v.id;
  Tensor saved = out;
  return tape->record(std::move(out), {iv},
                      [iv, saved](const Tensor& g, std::vector<Tensor>& grads) {
                        Tensor& gp = grads[static_cast<size_t>(iv)];
                        for (size_t i = 0; i < g.data.size(); ++i)
                          gp.data[i] += g.data[i] * (1.0 - saved.data[i] * saved.data[i]);
                      });
}

Var sigmoid(Var v) {
  const Tensor& x = v.value();
  Tensor out = x;
  for (double& e : out.data) e = 1.0 / (1.0 + std::exp(-e));
  Tape* tape = v.tape;
  int iv = v.id;
  Tensor saved = out;
  return tape->record(std::move(out), {iv},
                      [iv, saved](const Tensor& g, std::vector<Tensor>& grads) {
                        Tensor& gp = grads[static_cast<size_t>(iv)];
                        for (size_t i = 0; i < g.data.size(); ++i)
                          gp.data[i] += g.data[i] * saved.data[i] * (1.0 - saved.data[i]);
                      });
}

Var softmax(Var v) {
  const Tensor& x = v.value();
  if (x.rank() != 1) throw std::invalid_argument("softmax: rank-1 input required, got " + x.shape_str());
  double mx = *std::max_element(x.data.begin(), x.data.end());
  Tensor out = x;
  double denom = 0.0;
  for (double& e : out.data) {
    e = std::exp(e - mx);
    denom += e;
  }
  for (double& e : out.data) e /= denom;
  Tape* tape = v.tape;
  int iv = v.id;
  Tensor saved = out;
  return tape->record(std::move(out), {iv},
                      [iv, saved](const Tensor& g, std::vector<Tensor>& grads) {
                        Tensor& gp = grads[static_cast<size_t>(iv)];
                        double gd = 0.0;
                        for (size_t i = 0; i < g.data.size(); ++i) gd += g.data[i] * saved.data[i];
                        for (size_t i = 0; i < g.data.size(); ++i)
                          gp.data[i] += saved.data[i] * (g.data[i] - gd);
                      });
}

Var sum(Var v) {
  const Tensor& x = v.value();
  double s = std::accumulate(x.data.begin(), x.data.end(), 0.0);
  Tape* tape = v.tape;
  int iv = v.id;
  return tape->record(Tensor::scalar(s), {iv},
                      [iv](const Tensor& g, std::vector<Tensor>& grads) {
                        Tensor& gp = grads[static_cast<size_t>(iv)];
                        for (double& e : gp.data) e += g.data[0];
                      });
}

Var mean(Var v) {
  const Tensor& x = v.value();
  double n = static_cast<double>(x.numel());
  double s = std::accumulate(x.data.begin(), x.data.end(), 0.0) / n;
  Tape* tape = v.tape;
  int iv = v.id;
  return tape->record(Tensor::scalar(s), {iv},
                      [iv, n](const Tensor& g, std::vector<Tensor>& grads) {
                        Tensor& gp = grads[static_cast<size_t>(iv)];
                        for (double& e : gp.data) e += g.data[0] / n;
                      });
}

Var mean_cols(Var m) {
  const Tensor& x = m.value();
  if (x.rank() != 2) throw std::invalid_argument("mean_cols: rank-2 input required, got " + x.shape_str());
  int rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::zeros({rows});
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < cols; ++j) s += x.at(i, j);
    out.data[static_cast<size_t>(i)] = s / cols;
  }
  Tape* tape = m.tape;
  int iv = m.id;
  return tape->record(std::move(out), {iv},
                      [iv, rows, cols](const Tensor& g, std::vector<Tensor>& grads) {
                        Tensor& gp = grads[static_cast<size_t>(iv)];
                        for (int i = 0; i < rows; ++i)
                          for (int j = 0; j < cols; ++j)
                            gp.at(i, j) += g.data[static_cast<size_t>(i)] / cols;
                      });
}

Var scale(Var v, double c) {
  const Tensor& x = v.value();
  Tensor out = x;
  for (double& e : out.data) e *= c;
  Tape* tape = v.tape;
  int iv = v.id;
  return tape->record(std::move(out), {iv},
                      [iv, c](const Tensor& g, std::vector<Tensor>& grads) {
                        Tensor& gp = grads[static_cast<size_t>(iv)];
                        for (size_t i = 0; i < g.data.size(); ++i) gp.data[i] += c * g.data[i];
                      });
}

Var log(Var v) {
  const Tensor& x = v.value();
  Tensor out = x;
  for (double& e : out.data) e = std::log(e);
  Tape* tape = v.tape;
  int iv = v.id;
  if (tape->debug_checks) check_finite(out, "log");
  return tape->record(std::move(out), {iv},
                      [tape, iv](const Tensor& g, std::vector<Tensor>& grads) {
                        const Tensor& x = tape->value(iv);
                        Tensor& gp = grads[static_cast<size_t>(iv)];
                        for (size_t i = 0; i < g.data.size(); ++i) gp.data[i] += g.data[i] / x.data[i];
                      });
}

Var clamp(Var v, double lo, double hi) {
  const Tensor& x = v.value();
  Tensor out = x;
  for (double& e : out.data) e = std::clamp(e, lo, hi);
  Tape* tape = v.tape;
  int iv = v.id;
  return tape->record(std::move(out), {iv},
                      [tape, iv, lo, hi](const Tensor& g, std::vector<Tensor>& grads) {
                        const Tensor& x = tape->value(iv);
                        Tensor& gp = grads[static_cast<size_t>(iv)];
                        for (size_t i = 0; i < g.data.size(); ++i)
                          if (x.data[i] > lo && x.data[i] < hi) gp.data[i] += g.data[i];
                      });
}

Var dot(Var a, Var b) { return sum(mul(a, b)); }

std::vector<Tensor> backward(Tape& tape, Var root) {
  if (root.tape != &tape) throw std::invalid_argument("backward: root not on this tape");
  if (root.value().rank() != 0) {
    throw std::invalid_argument("backward: root must be scalar, got shape " + root.value().shape_str());
  }
  std::vector<Tensor> grads;
  grads.reserve(static_cast<size_t>(tape.size()));
  for (int i = 0; i < tape.size(); ++i) grads.push_back(Tensor::zeros(tape.value(i).shape.empty()
                                                                         ? std::vector<int>{}
                                                                         : tape.value(i).shape));
  grads[static_cast<size_t>(root.id)].data[0] = 1.0;
  const auto& nodes = tape.nodes();
  for (int i = root.id; i >= 0; --i) {
    const auto& node = nodes[static_cast<size_t>(i)];
    if (!node.backprop) continue;
    const Tensor& g = grads[static_cast<size_t>(i)];
    bool nonzero = std::any_of(g.data.begin(), g.data.end(), [](double x) { return x != 0.0; });
    if (!nonzero) continue;
    node.backprop(g, grads);
  }
  return grads;
}

double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps) {
  if (eps <= 0.0 || eps > 1e-2) throw std::invalid_argument("grad_check: eps must be in (0, 1e-2]");
  Tape tape;
  Var xv = tape.leaf(x);
  Var y = f(tape, xv);
  if (y.value().rank() != 0) throw std::invalid_argument("grad_check: f must be scalar-valued");
  auto grads = backward(tape, y);
  const Tensor& analytic = grads[static_cast<size_t>(xv.id)];

  auto eval = [&](const Tensor& probe) {
    Tape t2;
    Var v = t2.leaf(probe);
    return f(t2, v).value().data[0];
  };
  // determinism probe
  {
    double a = eval(x), b = eval(x);
    if (a != b) throw std::invalid_argument("grad_check: f is not deterministic");
  }
  double worst = 0.0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    Tensor hi = x, lo = x;
    hi.data[i] += eps;
    lo.data[i] -= eps;
    double numeric = (eval(hi) - eval(lo)) / (2.0 * eps);
    double a = analytic.data[i];
    double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace odemm::ad
