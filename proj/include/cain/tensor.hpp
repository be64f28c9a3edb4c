#ifndef CAIN_TENSOR_HPP_
#define CAIN_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cain {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense 64-bit float tensor with an optional same-shape gradient buffer.
// Tensor is a cheap handle: copies share storage. A tensor is either a leaf
// (parameter or input) or the output of a Graph operation.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(int axis) const;
  int rank() const;
  std::int64_t size() const;

  const std::vector<double>& values() const;
  std::vector<double>& values();

  // Gradient buffer, allocated as zeros on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool has_grad() const;
  void zero_grad();

  double at(std::initializer_list<std::int64_t> index) const;
  double grad_at(std::initializer_list<std::int64_t> index) const;

  // Identity within a process; distinct tensors never share an id.
  std::uint64_t id() const;
  const std::string& label() const;
  Tensor& set_label(std::string label);

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
};

// Append-only tape of recorded operations. Forward values are computed
// eagerly; each op pushes a closure that propagates gradients from its
// output to its inputs. backward() replays the tape once, in reverse
// recording order, so gradients accumulate additively when a tensor feeds
// several consumers. A Graph and its tensors belong to one thread.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // --- linear algebra ---
  Tensor matmul(const Tensor& a, const Tensor& b);
  // a[m,k] x b[n,k]^T -> [m,n]; avoids materializing the transpose.
  Tensor matmul_nt(const Tensor& a, const Tensor& b);

  // Temporal convolution over input[T,Din] with filter[fs,Din,Dout] and
  // bias[Dout]. Out-of-range rows are zeros. Output length is
  // floor((T + 2*pad - fs) / stride) + 1. Window placement is anchored at
  // the sequence end: the last window sits flush with the padded end, so a
  // sequence extended with zero rows on the left yields the same trailing
  // outputs. When (T + 2*pad - fs) is divisible by stride this coincides
  // with the usual left-anchored placement.
  Tensor conv1d(const Tensor& input, const Tensor& filter, const Tensor& bias,
                std::int64_t stride, std::int64_t pad);

  // --- elementwise and structural ---
  Tensor relu(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  // Same-shape add, or row broadcast when b is rank-1 matching a's last dim.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& x, double c);
  Tensor concat(std::span<const Tensor> parts, int axis);
  Tensor slice_rows(const Tensor& x, std::int64_t begin, std::int64_t end);
  Tensor gather_rows(const Tensor& x, std::vector<std::int64_t> indices);
  Tensor reshape(const Tensor& x, Shape shape);
  Tensor sum(const Tensor& x);
  Tensor mean_rows(const Tensor& x);
  // Zeroes every row before the validity suffix: rows [0, T - valid) become
  // zero, the last `valid` rows pass through.
  Tensor mask_rows(const Tensor& x, std::int64_t valid);

  // Numerically stable softmax over a rank-1 tensor (max subtraction).
  Tensor softmax(const Tensor& x);

  // Embedding gather: rows of table[vocab,dim] at the given ids. Backward
  // scatters additively into only the touched rows.
  Tensor lookup(const Tensor& table, std::vector<std::int64_t> ids);

  // Mean binary cross entropy of predictions p[n] against labels in {0,1}.
  // Probabilities are clamped to [1e-7, 1 - 1e-7] before the log; the clamp
  // passes zero gradient where active.
  Tensor bce_mean(const Tensor& p, const std::vector<double>& labels);

  // Runs the tape backwards from a scalar loss (seed gradient 1.0) and then
  // verifies every recorded value and gradient is finite.
  void backward(const Tensor& loss);

  std::size_t node_count() const { return records_.size(); }

  // Label of the first recorded tensor holding a non-finite value, or empty.
  std::string first_nonfinite_value() const;

  static constexpr double kProbClamp = 1e-7;

 private:
  struct Record {
    Tensor out;
    std::function<void()> back;
  };
  std::vector<Record> records_;

  Tensor make_output(Shape shape, const char* op);
  void record(Tensor out, std::function<void()> back);
  std::uint64_t op_counter_ = 0;
};

bool all_finite(const std::vector<double>& v);

}  // namespace cain

#endif  // CAIN_TENSOR_HPP_
