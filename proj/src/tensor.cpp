#include "cain/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>

#include "cain/errors.hpp"

namespace cain {

namespace {

std::atomic<std::uint64_t> g_next_tensor_id{1};

void check(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace

std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

struct Tensor::Impl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first touched
  std::string label;
  std::uint64_t id = g_next_tensor_id.fetch_add(1);
};

Tensor Tensor::zeros(Shape shape) {
  const std::int64_t n = shape_size(shape);
  if (n < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->values.assign(static_cast<std::size_t>(n), 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  const std::int64_t n = shape_size(shape);
  if (static_cast<std::int64_t>(values.size()) != n) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return impl_->shape; }

std::int64_t Tensor::dim(int axis) const {
  return impl_->shape.at(static_cast<std::size_t>(axis));
}

int Tensor::rank() const { return static_cast<int>(impl_->shape.size()); }

std::int64_t Tensor::size() const {
  return static_cast<std::int64_t>(impl_->values.size());
}

const std::vector<double>& Tensor::values() const { return impl_->values; }
std::vector<double>& Tensor::values() { return impl_->values; }

std::vector<double>& Tensor::grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
  std::int64_t flat = 0;
  std::size_t k = 0;
  for (std::int64_t i : index) {
    flat = flat * impl_->shape[k] + i;
    ++k;
  }
  return impl_->values[static_cast<std::size_t>(flat)];
}

double Tensor::grad_at(std::initializer_list<std::int64_t> index) const {
  std::int64_t flat = 0;
  std::size_t k = 0;
  for (std::int64_t i : index) {
    flat = flat * impl_->shape[k] + i;
    ++k;
  }
  return grad()[static_cast<std::size_t>(flat)];
}

std::uint64_t Tensor::id() const { return impl_->id; }
const std::string& Tensor::label() const { return impl_->label; }

Tensor& Tensor::set_label(std::string label) {
  impl_->label = std::move(label);
  return *this;
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Graph

Tensor Graph::make_output(Shape shape, const char* op) {
  Tensor t = Tensor::zeros(std::move(shape));
  t.set_label(std::string(op) + "#" + std::to_string(op_counter_++));
  return t;
}

void Graph::record(Tensor out, std::function<void()> back) {
  records_.push_back(Record{std::move(out), std::move(back)});
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  check(a.rank() == 2 && b.rank() == 2,
        "matmul expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
            shape_str(b.shape()));
  check(a.dim(1) == b.dim(0), "matmul inner dimensions disagree: " +
                                  shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = make_output({m, n}, "matmul");
  const double* av = a.values().data();
  const double* bv = b.values().data();
  double* ov = out.values().data();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv + p * n;
      double* orow = ov + i * n;
      for (std::int64_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  record(out, [a, b, out, m, k, n]() mutable {
    const auto& go = out.grad();
    auto& ga = a.grad();
    auto& gb = b.grad();
    const auto& av2 = a.values();
    const auto& bv2 = b.values();
    // dA = dC * B^T
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t p = 0; p < k; ++p) {
        double s = 0.0;
        const double* gorow = go.data() + i * n;
        const double* brow = bv2.data() + p * n;
        for (std::int64_t j = 0; j < n; ++j) s += gorow[j] * brow[j];
        ga[static_cast<std::size_t>(i * k + p)] += s;
      }
    }
    // dB = A^T * dC
    for (std::int64_t p = 0; p < k; ++p) {
      for (std::int64_t i = 0; i < m; ++i) {
        const double aip = av2[static_cast<std::size_t>(i * k + p)];
        if (aip == 0.0) continue;
        const double* gorow = go.data() + i * n;
        double* gbrow = gb.data() + p * n;
        for (std::int64_t j = 0; j < n; ++j) gbrow[j] += aip * gorow[j];
      }
    }
  });
  return out;
}

Tensor Graph::matmul_nt(const Tensor& a, const Tensor& b) {
  check(a.rank() == 2 && b.rank() == 2,
        "matmul_nt expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
            shape_str(b.shape()));
  check(a.dim(1) == b.dim(1), "matmul_nt inner dimensions disagree: " +
                                  shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor out = make_output({m, n}, "matmul_nt");
  const double* av = a.values().data();
  const double* bv = b.values().data();
  double* ov = out.values().data();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      const double* arow = av + i * k;
      const double* brow = bv + j * k;
      for (std::int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      ov[i * n + j] = s;
    }
  }
  record(out, [a, b, out, m, k, n]() mutable {
    const auto& go = out.grad();
    auto& ga = a.grad();
    auto& gb = b.grad();
    const auto& av2 = a.values();
    const auto& bv2 = b.values();
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        const double g = go[static_cast<std::size_t>(i * n + j)];
        if (g == 0.0) continue;
        double* garow = ga.data() + i * k;
        const double* brow = bv2.data() + j * k;
        double* gbrow = gb.data() + j * k;
        const double* arow = av2.data() + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
          garow[p] += g * brow[p];
          gbrow[p] += g * arow[p];
        }
      }
    }
  });
  return out;
}

Tensor Graph::conv1d(const Tensor& input, const Tensor& filter, const Tensor& bias,
                     std::int64_t stride, std::int64_t pad) {
  if (stride <= 0) throw ConfigError("conv1d stride must be positive, got " + std::to_string(stride));
  if (pad < 0) throw ConfigError("conv1d padding must be non-negative, got " + std::to_string(pad));
  check(input.rank() == 2, "conv1d input must be rank-2, got " + shape_str(input.shape()));
  check(filter.rank() == 3, "conv1d filter must be rank-3, got " + shape_str(filter.shape()));
  const std::int64_t t_in = input.dim(0), d_in = input.dim(1);
  const std::int64_t fs = filter.dim(0), d_out = filter.dim(2);
  check(filter.dim(1) == d_in, "conv1d filter in-dim " + shape_str(filter.shape()) +
                                   " does not match input " + shape_str(input.shape()));
  check(bias.rank() == 1 && bias.dim(0) == d_out,
        "conv1d bias " + shape_str(bias.shape()) + " does not match filter out-dim " +
            std::to_string(d_out));
  const std::int64_t span = t_in + 2 * pad - fs;
  if (span < 0) {
    throw ShapeError("conv1d produces empty output: filter size " + std::to_string(fs) +
                     " exceeds padded length " + std::to_string(t_in + 2 * pad));
  }
  const std::int64_t t_out = span / stride + 1;
  // End-anchored placement: the final window sits flush with the padded end.
  const std::int64_t anchor = span % stride;
  Tensor out = make_output({t_out, d_out}, "conv1d");
  const double* in = input.values().data();
  const double* fv = filter.values().data();
  const double* bv = bias.values().data();
  double* ov = out.values().data();
  for (std::int64_t j = 0; j < t_out; ++j) {
    double* orow = ov + j * d_out;
    for (std::int64_t o = 0; o < d_out; ++o) orow[o] = bv[o];
    const std::int64_t start = anchor + j * stride - pad;
    for (std::int64_t u = 0; u < fs; ++u) {
      const std::int64_t t = start + u;
      if (t < 0 || t >= t_in) continue;  // zero padding
      const double* irow = in + t * d_in;
      const double* fslice = fv + u * d_in * d_out;
      for (std::int64_t i = 0; i < d_in; ++i) {
        const double x = irow[i];
        if (x == 0.0) continue;
        const double* frow = fslice + i * d_out;
        for (std::int64_t o = 0; o < d_out; ++o) orow[o] += x * frow[o];
      }
    }
  }
  record(out, [input, filter, bias, out, t_in, d_in, fs, d_out, t_out, stride, pad, anchor]() mutable {
    const auto& go = out.grad();
    auto& gin = input.grad();
    auto& gf = filter.grad();
    auto& gb = bias.grad();
    const auto& in2 = input.values();
    const auto& fv2 = filter.values();
    for (std::int64_t j = 0; j < t_out; ++j) {
      const double* gorow = go.data() + j * d_out;
      for (std::int64_t o = 0; o < d_out; ++o) gb[static_cast<std::size_t>(o)] += gorow[o];
      const std::int64_t start = anchor + j * stride - pad;
      for (std::int64_t u = 0; u < fs; ++u) {
        const std::int64_t t = start + u;
        if (t < 0 || t >= t_in) continue;
        const double* irow = in2.data() + t * d_in;
        double* girow = gin.data() + t * d_in;
        const double* fslice = fv2.data() + u * d_in * d_out;
        double* gfslice = gf.data() + u * d_in * d_out;
        for (std::int64_t i = 0; i < d_in; ++i) {
          const double* frow = fslice + i * d_out;
          double* gfrow = gfslice + i * d_out;
          const double x = irow[i];
          double s = 0.0;
          for (std::int64_t o = 0; o < d_out; ++o) {
            const double g = gorow[o];
            s += g * frow[o];
            gfrow[o] += g * x;
          }
          girow[i] += s;
        }
      }
    }
  });
  return out;
}

Tensor Graph::relu(const Tensor& x) {
  Tensor out = make_output(x.shape(), "relu");
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  record(out, [x, out]() mutable {
    const auto& go = out.grad();
    auto& gx = x.grad();
    const auto& xv2 = x.values();
    // Subgradient at 0 is 0.
    for (std::size_t i = 0; i < xv2.size(); ++i) {
      if (xv2[i] > 0.0) gx[i] += go[i];
    }
  });
  return out;
}

Tensor Graph::sigmoid(const Tensor& x) {
  Tensor out = make_output(x.shape(), "sigmoid");
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double z = xv[i];
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                              : std::exp(z) / (1.0 + std::exp(z));
    // Keep the output strictly inside (0, 1) even when z saturates.
    ov[i] = std::min(1.0 - 1e-15, std::max(1e-15, s));
  }
  record(out, [x, out]() mutable {
    const auto& go = out.grad();
    auto& gx = x.grad();
    const auto& ov2 = out.values();
    for (std::size_t i = 0; i < ov2.size(); ++i) {
      gx[i] += go[i] * ov2[i] * (1.0 - ov2[i]);
    }
  });
  return out;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    Tensor out = make_output(a.shape(), "add");
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[i];
    record(out, [a, b, out]() mutable {
      const auto& go = out.grad();
      auto& ga = a.grad();
      auto& gb = b.grad();
      for (std::size_t i = 0; i < go.size(); ++i) {
        ga[i] += go[i];
        gb[i] += go[i];
      }
    });
    return out;
  }
  // Row broadcast: b is rank-1 matching a's last dimension.
  if (a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.dim(0)) {
    const std::int64_t rows = a.dim(0), cols = a.dim(1);
    Tensor out = make_output(a.shape(), "add_row");
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t c = 0; c < cols; ++c) {
        ov[static_cast<std::size_t>(r * cols + c)] =
            av[static_cast<std::size_t>(r * cols + c)] + bv[static_cast<std::size_t>(c)];
      }
    }
    record(out, [a, b, out, rows, cols]() mutable {
      const auto& go = out.grad();
      auto& ga = a.grad();
      auto& gb = b.grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < cols; ++c) {
          const double g = go[static_cast<std::size_t>(r * cols + c)];
          ga[static_cast<std::size_t>(r * cols + c)] += g;
          gb[static_cast<std::size_t>(c)] += g;
        }
      }
    });
    return out;
  }
  throw ShapeError("add shapes incompatible: " + shape_str(a.shape()) + " vs " +
                   shape_str(b.shape()));
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  check(a.shape() == b.shape(), "mul shapes differ: " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
  Tensor out = make_output(a.shape(), "mul");
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] * bv[i];
  record(out, [a, b, out]() mutable {
    const auto& go = out.grad();
    auto& ga = a.grad();
    auto& gb = b.grad();
    const auto& av2 = a.values();
    const auto& bv2 = b.values();
    for (std::size_t i = 0; i < go.size(); ++i) {
      ga[i] += go[i] * bv2[i];
      gb[i] += go[i] * av2[i];
    }
  });
  return out;
}

Tensor Graph::scale(const Tensor& x, double c) {
  Tensor out = make_output(x.shape(), "scale");
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] * c;
  record(out, [x, out, c]() mutable {
    const auto& go = out.grad();
    auto& gx = x.grad();
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * c;
  });
  return out;
}

Tensor Graph::concat(std::span<const Tensor> parts, int axis) {
  check(!parts.empty(), "concat of zero tensors");
  const int rank = parts[0].rank();
  check(axis >= 0 && axis < rank, "concat axis out of range");
  check(rank == 1 || rank == 2, "concat supports rank-1 and rank-2 tensors");
  for (const Tensor& p : parts) {
    check(p.rank() == rank, "concat rank mismatch: " + shape_str(parts[0].shape()) +
                                " vs " + shape_str(p.shape()));
  }
  if (rank == 1) {
    std::int64_t total = 0;
    for (const Tensor& p : parts) total += p.dim(0);
    Tensor out = make_output({total}, "concat");
    auto& ov = out.values();
    std::int64_t off = 0;
    for (const Tensor& p : parts) {
      std::copy(p.values().begin(), p.values().end(), ov.begin() + off);
      off += p.dim(0);
    }
    std::vector<Tensor> held(parts.begin(), parts.end());
    record(out, [held, out]() mutable {
      const auto& go = out.grad();
      std::int64_t off2 = 0;
      for (Tensor& p : held) {
        auto& gp = p.grad();
        for (std::int64_t i = 0; i < p.dim(0); ++i) gp[static_cast<std::size_t>(i)] += go[static_cast<std::size_t>(off2 + i)];
        off2 += p.dim(0);
      }
    });
    return out;
  }
  if (axis == 0) {
    const std::int64_t cols = parts[0].dim(1);
    std::int64_t rows = 0;
    for (const Tensor& p : parts) {
      check(p.dim(1) == cols, "concat axis-0 column mismatch: " + shape_str(parts[0].shape()) +
                                  " vs " + shape_str(p.shape()));
      rows += p.dim(0);
    }
    Tensor out = make_output({rows, cols}, "concat");
    auto& ov = out.values();
    std::int64_t off = 0;
    for (const Tensor& p : parts) {
      std::copy(p.values().begin(), p.values().end(), ov.begin() + off * cols);
      off += p.dim(0);
    }
    std::vector<Tensor> held(parts.begin(), parts.end());
    record(out, [held, out, cols]() mutable {
      const auto& go = out.grad();
      std::int64_t off2 = 0;
      for (Tensor& p : held) {
        auto& gp = p.grad();
        const std::int64_t n = p.size();
        for (std::int64_t i = 0; i < n; ++i) gp[static_cast<std::size_t>(i)] += go[static_cast<std::size_t>(off2 * cols + i)];
        off2 += p.dim(0);
      }
    });
    return out;
  }
  // axis == 1
  const std::int64_t rows = parts[0].dim(0);
  std::int64_t cols = 0;
  for (const Tensor& p : parts) {
    check(p.dim(0) == rows, "concat axis-1 row mismatch: " + shape_str(parts[0].shape()) +
                                " vs " + shape_str(p.shape()));
    cols += p.dim(1);
  }
  Tensor out = make_output({rows, cols}, "concat");
  auto& ov = out.values();
  std::int64_t coff = 0;
  for (const Tensor& p : parts) {
    const std::int64_t pc = p.dim(1);
    const auto& pv = p.values();
    for (std::int64_t r = 0; r < rows; ++r) {
      std::copy(pv.begin() + r * pc, pv.begin() + (r + 1) * pc, ov.begin() + r * cols + coff);
    }
    coff += pc;
  }
  std::vector<Tensor> held(parts.begin(), parts.end());
  record(out, [held, out, rows, cols]() mutable {
    const auto& go = out.grad();
    std::int64_t coff2 = 0;
    for (Tensor& p : held) {
      const std::int64_t pc = p.dim(1);
      auto& gp = p.grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < pc; ++c) {
          gp[static_cast<std::size_t>(r * pc + c)] += go[static_cast<std::size_t>(r * cols + coff2 + c)];
        }
      }
      coff2 += pc;
    }
  });
  return out;
}

Tensor Graph::slice_rows(const Tensor& x, std::int64_t begin, std::int64_t end) {
  check(x.rank() == 2, "slice_rows expects rank-2, got " + shape_str(x.shape()));
  check(0 <= begin && begin <= end && end <= x.dim(0),
        "slice_rows range [" + std::to_string(begin) + "," + std::to_string(end) +
            ") out of bounds for " + shape_str(x.shape()));
  const std::int64_t cols = x.dim(1);
  Tensor out = make_output({end - begin, cols}, "slice_rows");
  std::copy(x.values().begin() + begin * cols, x.values().begin() + end * cols,
            out.values().begin());
  record(out, [x, out, begin, cols]() mutable {
    const auto& go = out.grad();
    auto& gx = x.grad();
    for (std::size_t i = 0; i < go.size(); ++i) {
      gx[static_cast<std::size_t>(begin * cols) + i] += go[i];
    }
  });
  return out;
}

Tensor Graph::gather_rows(const Tensor& x, std::vector<std::int64_t> indices) {
  check(x.rank() == 2, "gather_rows expects rank-2, got " + shape_str(x.shape()));
  const std::int64_t rows = x.dim(0), cols = x.dim(1);
  for (std::int64_t i : indices) {
    if (i < 0 || i >= rows) {
      throw IndexError("gather_rows index " + std::to_string(i) + " out of range for " +
                       shape_str(x.shape()));
    }
  }
  Tensor out = make_output({static_cast<std::int64_t>(indices.size()), cols}, "gather_rows");
  auto& ov = out.values();
  const auto& xv = x.values();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy(xv.begin() + indices[r] * cols, xv.begin() + (indices[r] + 1) * cols,
              ov.begin() + static_cast<std::int64_t>(r) * cols);
  }
  record(out, [x, out, idx = std::move(indices), cols]() mutable {
    const auto& go = out.grad();
    auto& gx = x.grad();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::int64_t c = 0; c < cols; ++c) {
        gx[static_cast<std::size_t>(idx[r] * cols + c)] +=
            go[static_cast<std::size_t>(static_cast<std::int64_t>(r) * cols + c)];
      }
    }
  });
  return out;
}

Tensor Graph::reshape(const Tensor& x, Shape shape) {
  check(shape_size(shape) == x.size(), "reshape to " + shape_str(shape) +
                                           " changes element count of " + shape_str(x.shape()));
  Tensor out = make_output(std::move(shape), "reshape");
  out.values() = x.values();
  record(out, [x, out]() mutable {
    const auto& go = out.grad();
    auto& gx = x.grad();
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
  });
  return out;
}

Tensor Graph::sum(const Tensor& x) {
  Tensor out = make_output({1}, "sum");
  double s = 0.0;
  for (double v : x.values()) s += v;
  out.values()[0] = s;
  record(out, [x, out]() mutable {
    const double g = out.grad()[0];
    auto& gx = x.grad();
    for (double& v : gx) v += g;
  });
  return out;
}

Tensor Graph::mean_rows(const Tensor& x) {
  check(x.rank() == 2, "mean_rows expects rank-2, got " + shape_str(x.shape()));
  const std::int64_t rows = x.dim(0), cols = x.dim(1);
  check(rows > 0, "mean_rows of an empty tensor");
  Tensor out = make_output({cols}, "mean_rows");
  auto& ov = out.values();
  const auto& xv = x.values();
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) ov[static_cast<std::size_t>(c)] += xv[static_cast<std::size_t>(r * cols + c)];
  }
  const double inv = 1.0 / static_cast<double>(rows);
  for (double& v : ov) v *= inv;
  record(out, [x, out, rows, cols, inv]() mutable {
    const auto& go = out.grad();
    auto& gx = x.grad();
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t c = 0; c < cols; ++c) {
        gx[static_cast<std::size_t>(r * cols + c)] += go[static_cast<std::size_t>(c)] * inv;
      }
    }
  });
  return out;
}

Tensor Graph::mask_rows(const Tensor& x, std::int64_t valid) {
  check(x.rank() == 2, "mask_rows expects rank-2, got " + shape_str(x.shape()));
  check(valid >= 0 && valid <= x.dim(0),
        "mask_rows validity " + std::to_string(valid) + " out of range for " + shape_str(x.shape()));
  const std::int64_t rows = x.dim(0), cols = x.dim(1);
  const std::int64_t first = rows - valid;
  Tensor out = make_output(x.shape(), "mask_rows");
  std::copy(x.values().begin() + first * cols, x.values().end(),
            out.values().begin() + first * cols);
  record(out, [x, out, first, cols]() mutable {
    const auto& go = out.grad();
    auto& gx = x.grad();
    for (std::size_t i = static_cast<std::size_t>(first * cols); i < go.size(); ++i) {
      gx[i] += go[i];
    }
  });
  return out;
}

Tensor Graph::softmax(const Tensor& x) {
  check(x.rank() == 1, "softmax expects a rank-1 tensor, got " + shape_str(x.shape()));
  const std::int64_t n = x.dim(0);
  check(n >= 1, "softmax of an empty tensor");
  Tensor out = make_output(x.shape(), "softmax");
  const auto& xv = x.values();
  auto& ov = out.values();
  double mx = xv[0];
  for (double v : xv) mx = std::max(mx, v);
  double denom = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    ov[static_cast<std::size_t>(i)] = std::exp(xv[static_cast<std::size_t>(i)] - mx);
    denom += ov[static_cast<std::size_t>(i)];
  }
  for (double& v : ov) v /= denom;
  record(out, [x, out, n]() mutable {
    const auto& go = out.grad();
    const auto& ov2 = out.values();
    auto& gx = x.grad();
    double dot = 0.0;
    for (std::int64_t i = 0; i < n; ++i) dot += go[static_cast<std::size_t>(i)] * ov2[static_cast<std::size_t>(i)];
    for (std::int64_t i = 0; i < n; ++i) {
      gx[static_cast<std::size_t>(i)] += ov2[static_cast<std::size_t>(i)] * (go[static_cast<std::size_t>(i)] - dot);
    }
  });
  return out;
}

Tensor Graph::lookup(const Tensor& table, std::vector<std::int64_t> ids) {
  check(table.rank() == 2, "lookup table must be rank-2, got " + shape_str(table.shape()));
  const std::int64_t vocab = table.dim(0), dim = table.dim(1);
  for (std::int64_t id : ids) {
    if (id < 0 || id >= vocab) {
      throw IndexError("lookup id " + std::to_string(id) + " out of range for table " +
                       (table.label().empty() ? shape_str(table.shape()) : table.label()) +
                       " with vocab " + std::to_string(vocab));
    }
  }
  Tensor out = make_output({static_cast<std::int64_t>(ids.size()), dim}, "lookup");
  auto& ov = out.values();
  const auto& tv = table.values();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::copy(tv.begin() + ids[r] * dim, tv.begin() + (ids[r] + 1) * dim,
              ov.begin() + static_cast<std::int64_t>(r) * dim);
  }
  record(out, [table, out, ids = std::move(ids), dim]() mutable {
    const auto& go = out.grad();
    auto& gt = table.grad();
    for (std::size_t r = 0; r < ids.size(); ++r) {
      for (std::int64_t c = 0; c < dim; ++c) {
        gt[static_cast<std::size_t>(ids[r] * dim + c)] +=
            go[static_cast<std::size_t>(static_cast<std::int64_t>(r) * dim + c)];
      }
    }
  });
  return out;
}

Tensor Graph::bce_mean(const Tensor& p, const std::vector<double>& labels) {
  check(p.rank() == 1, "bce_mean expects rank-1 predictions, got " + shape_str(p.shape()));
  const std::int64_t n = p.dim(0);
  if (n == 0) throw UsageError("bce_mean over an empty batch");
  check(static_cast<std::int64_t>(labels.size()) == n,
        "bce_mean label count " + std::to_string(labels.size()) + " does not match " +
            shape_str(p.shape()));
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw UsageError("bce_mean labels must be 0 or 1");
  }
  Tensor out = make_output({1}, "bce_mean");
  const auto& pv = p.values();
  double loss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double pc = std::min(1.0 - kProbClamp, std::max(kProbClamp, pv[static_cast<std::size_t>(i)]));
    const double y = labels[static_cast<std::size_t>(i)];
    loss -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
  }
  out.values()[0] = loss / static_cast<double>(n);
  record(out, [p, out, labels, n]() mutable {
    const double g = out.grad()[0] / static_cast<double>(n);
    auto& gp = p.grad();
    const auto& pv2 = p.values();
    for (std::int64_t i = 0; i < n; ++i) {
      const double raw = pv2[static_cast<std::size_t>(i)];
      if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue;  // clamp is flat
      const double y = labels[static_cast<std::size_t>(i)];
      gp[static_cast<std::size_t>(i)] += g * (raw - y) / (raw * (1.0 - raw));
    }
  });
  return out;
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw UsageError("backward requires a scalar loss tensor");
  }
  loss.grad()[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (!it->out.has_grad()) continue;  // nothing flowed into this node
    it->back();
  }
  for (const Record& r : records_) {
    if (!all_finite(r.out.values()) || (r.out.has_grad() && !all_finite(r.out.grad()))) {
      throw NumericError("non-finite value or gradient in tensor " + r.out.label());
    }
  }
}

std::string Graph::first_nonfinite_value() const {
  for (const Record& r : records_) {
    if (!all_finite(r.out.values())) return r.out.label();
  }
  return {};
}

}  // namespace cain
