#include "driveid/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "driveid/error.hpp"

namespace driveid::numerics {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                       to_string(b));
}

void require_rank(const char* op, const Var& v, std::size_t rank) {
  if (v.shape().size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + to_string(v.shape()));
  }
}

std::size_t tail_length(std::size_t length, std::size_t stride) {
  return (length - 1) / stride + 1;
}

/// Fills a (Cin*K) x Lout im2col matrix for one batch item.
void fill_columns(const double* x, std::size_t cin, std::size_t length, std::size_t taps,
                  std::size_t dilation, std::size_t stride, RowMatrix& cols) {
  const std::size_t lout = tail_length(length, stride);
  const std::size_t first = (length - 1) % stride;
  for (std::size_t j = 0; j < cin; ++j) {
    const double* row_in = x + j * length;
    for (std::size_t k = 0; k < taps; ++k) {
      double* row = cols.data() + (j * taps + k) * lout;
      const std::size_t shift = (taps - 1 - k) * dilation;
      for (std::size_t i = 0; i < lout; ++i) {
        const std::size_t t = first + i * stride;
        row[i] = t >= shift ? row_in[t - shift] : 0.0;
      }
    }
  }
}

/// Scatter-adds column gradients back into the input gradient of one item.
void scatter_columns(const RowMatrix& dcols, std::size_t cin, std::size_t length,
                     std::size_t taps, std::size_t dilation, std::size_t stride, double* dx) {
  const std::size_t lout = tail_length(length, stride);
  const std::size_t first = (length - 1) % stride;
  for (std::size_t j = 0; j < cin; ++j) {
    double* row_out = dx + j * length;
    for (std::size_t k = 0; k < taps; ++k) {
      const double* row = dcols.data() + (j * taps + k) * lout;
      const std::size_t shift = (taps - 1 - k) * dilation;
      for (std::size_t i = 0; i < lout; ++i) {
        const std::size_t t = first + i * stride;
        if (t >= shift) row_out[t - shift] += row[i];
      }
    }
  }
}

}  // namespace

Var linear(Var x, Var w, Var bias) {
  require_rank("linear", x, 2);
  require_rank("linear", w, 2);
  const std::size_t batch = x.shape()[0];
  const std::size_t in = x.shape()[1];
  const std::size_t out = w.shape()[1];
  if (w.shape()[0] != in) shape_mismatch("linear", x.shape(), w.shape());
  if (bias.shape() != Shape{out}) shape_mismatch("linear", w.shape(), bias.shape());

  const Tensor* xv = &x.value();
  const Tensor* wv = &w.value();
  Tensor y({batch, out});
  {
    ConstMatrixMap X(xv->data(), batch, in);
    ConstMatrixMap W(wv->data(), in, out);
    MatrixMap Y(y.data(), batch, out);
    Y.noalias() = X * W;
    Y.rowwise() += ConstVectorMap(bias.value().data(), out).transpose();
  }
  return x.tape().record(std::move(y), {x, w, bias}, [=](const Backprop& bp) {
    ConstMatrixMap dY(bp.output_grad.data(), batch, out);
    if (Tensor* dx = bp.input_grads[0]) {
      MatrixMap(dx->data(), batch, in).noalias() +=
          dY * ConstMatrixMap(wv->data(), in, out).transpose();
    }
    if (Tensor* dw = bp.input_grads[1]) {
      MatrixMap(dw->data(), in, out).noalias() +=
          ConstMatrixMap(xv->data(), batch, in).transpose() * dY;
    }
    if (Tensor* db = bp.input_grads[2]) {
      VectorMap(db->data(), out) += dY.colwise().sum().transpose();
    }
  });
}

Var conv1d_causal(Var x, Var w, Var bias, std::size_t dilation, std::size_t output_stride) {
  if (dilation < 1) throw ParameterError("conv1d_causal: dilation must be >= 1");
  if (output_stride < 1) throw ParameterError("conv1d_causal: output_stride must be >= 1");
  require_rank("conv1d_causal", x, 3);
  require_rank("conv1d_causal", w, 3);
  const std::size_t batch = x.shape()[0];
  const std::size_t cin = x.shape()[1];
  const std::size_t length = x.shape()[2];
  const std::size_t cout = w.shape()[0];
  const std::size_t taps = w.shape()[2];
  if (w.shape()[1] != cin) shape_mismatch("conv1d_causal", x.shape(), w.shape());
  if (bias.shape() != Shape{cout}) shape_mismatch("conv1d_causal", w.shape(), bias.shape());
  const std::size_t lout = tail_length(length, output_stride);

  const Tensor* xv = &x.value();
  const Tensor* wv = &w.value();
  Tensor y({batch, cout, lout});
  {
    RowMatrix cols(cin * taps, lout);
    ConstMatrixMap W(wv->data(), cout, cin * taps);
    ConstVectorMap b(bias.value().data(), cout);
    for (std::size_t n = 0; n < batch; ++n) {
      fill_columns(xv->data() + n * cin * length, cin, length, taps, dilation, output_stride,
                   cols);
      MatrixMap Y(y.data() + n * cout * lout, cout, lout);
      Y.noalias() = W * cols;
      Y.colwise() += b;
    }
  }
  return x.tape().record(std::move(y), {x, w, bias}, [=](const Backprop& bp) {
    Tensor* dx = bp.input_grads[0];
    Tensor* dw = bp.input_grads[1];
    Tensor* db = bp.input_grads[2];
    ConstMatrixMap W(wv->data(), cout, cin * taps);
    RowMatrix cols(cin * taps, lout);
    RowMatrix dcols;
    for (std::size_t n = 0; n < batch; ++n) {
      ConstMatrixMap dY(bp.output_grad.data() + n * cout * lout, cout, lout);
      if (db != nullptr) VectorMap(db->data(), cout) += dY.rowwise().sum();
      if (dw != nullptr) {
        fill_columns(xv->data() + n * cin * length, cin, length, taps, dilation, output_stride,
                     cols);
        MatrixMap(dw->data(), cout, cin * taps).noalias() += dY * cols.transpose();
      }
      if (dx != nullptr) {
        dcols.noalias() = W.transpose() * dY;
        scatter_columns(dcols, cin, length, taps, dilation, output_stride,
                        dx->data() + n * cin * length);
      }
    }
  });
}

Var relu(Var x) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] <= 0.0 ? 0.0 : xv[i];  // NaN passes through
  return x.tape().record(std::move(y), {x}, [](const Backprop& bp) {
    Tensor& dx = *bp.input_grads[0];
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (bp.output[i] > 0.0) dx[i] += bp.output_grad[i];
    }
  });
}

Var add(Var x, Var y) {
  if (x.shape() != y.shape()) shape_mismatch("add", x.shape(), y.shape());
  Tensor z = x.value();
  const Tensor& yv = y.value();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += yv[i];
  return x.tape().record(std::move(z), {x, y}, [](const Backprop& bp) {
    for (Tensor* g : bp.input_grads) {
      if (g == nullptr) continue;
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += bp.output_grad[i];
    }
  });
}

Var sub(Var x, Var y) {
  if (x.shape() != y.shape()) shape_mismatch("sub", x.shape(), y.shape());
  Tensor z = x.value();
  const Tensor& yv = y.value();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] -= yv[i];
  return x.tape().record(std::move(z), {x, y}, [](const Backprop& bp) {
    if (Tensor* dx = bp.input_grads[0]) {
      for (std::size_t i = 0; i < dx->size(); ++i) (*dx)[i] += bp.output_grad[i];
    }
    if (Tensor* dy = bp.input_grads[1]) {
      for (std::size_t i = 0; i < dy->size(); ++i) (*dy)[i] -= bp.output_grad[i];
    }
  });
}

Var scale(Var x, double factor) {
  Tensor y = x.value();
  for (double& v : y.values()) v *= factor;
  return x.tape().record(std::move(y), {x}, [factor](const Backprop& bp) {
    Tensor& dx = *bp.input_grads[0];
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += factor * bp.output_grad[i];
  });
}

Var add_scalar(Var x, double offset) {
  Tensor y = x.value();
  for (double& v : y.values()) v += offset;
  return x.tape().record(std::move(y), {x}, [](const Backprop& bp) {
    Tensor& dx = *bp.input_grads[0];
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += bp.output_grad[i];
  });
}

Var dropout(Var x, double p, bool training, DropoutStream& stream) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ParameterError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  const std::uint64_t key = stream.next_key();
  const double keep_scale = 1.0 / (1.0 - p);
  const Tensor& xv = x.value();
  std::vector<double> mask(xv.size());
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = counter_uniform(key, i) < p ? 0.0 : keep_scale;
    y[i] = xv[i] * mask[i];
  }
  return x.tape().record(std::move(y), {x}, [mask = std::move(mask)](const Backprop& bp) {
    Tensor& dx = *bp.input_grads[0];
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += mask[i] * bp.output_grad[i];
  });
}

Var squared_l2_distance(Var a, Var b) {
  if (a.shape() != b.shape()) shape_mismatch("squared_l2_distance", a.shape(), b.shape());
  const Tensor* av = &a.value();
  const Tensor* bv = &b.value();
  double total = 0.0;
  for (std::size_t i = 0; i < av->size(); ++i) {
    const double d = (*av)[i] - (*bv)[i];
    total += d * d;
  }
  return a.tape().record(Tensor::scalar(total), {a, b}, [=](const Backprop& bp) {
    const double g = 2.0 * bp.output_grad[0];
    Tensor* da = bp.input_grads[0];
    Tensor* db = bp.input_grads[1];
    for (std::size_t i = 0; i < av->size(); ++i) {
      const double d = g * ((*av)[i] - (*bv)[i]);
      if (da != nullptr) (*da)[i] += d;
      if (db != nullptr) (*db)[i] -= d;
    }
  });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return x.tape().record(Tensor::scalar(total), {x}, [](const Backprop& bp) {
    Tensor& dx = *bp.input_grads[0];
    for (double& v : dx.values()) v += bp.output_grad[0];
  });
}

Var last_frame(Var x) {
  require_rank("last_frame", x, 3);
  const std::size_t rows = x.shape()[0] * x.shape()[1];
  const std::size_t length = x.shape()[2];
  const Tensor& xv = x.value();
  Tensor y({x.shape()[0], x.shape()[1]});
  for (std::size_t r = 0; r < rows; ++r) y[r] = xv[r * length + length - 1];
  return x.tape().record(std::move(y), {x}, [rows, length](const Backprop& bp) {
    Tensor& dx = *bp.input_grads[0];
    for (std::size_t r = 0; r < rows; ++r) dx[r * length + length - 1] += bp.output_grad[r];
  });
}

Var decimate_tail(Var x, std::size_t stride) {
  if (stride < 1) throw ParameterError("decimate_tail: stride must be >= 1");
  require_rank("decimate_tail", x, 3);
  if (stride == 1) return x;
  const std::size_t rows = x.shape()[0] * x.shape()[1];
  const std::size_t length = x.shape()[2];
  const std::size_t lout = tail_length(length, stride);
  const std::size_t first = (length - 1) % stride;
  const Tensor& xv = x.value();
  Tensor y({x.shape()[0], x.shape()[1], lout});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < lout; ++i) y[r * lout + i] = xv[r * length + first + i * stride];
  }
  return x.tape().record(std::move(y), {x}, [=](const Backprop& bp) {
    Tensor& dx = *bp.input_grads[0];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < lout; ++i) {
        dx[r * length + first + i * stride] += bp.output_grad[r * lout + i];
      }
    }
  });
}

Var concat_columns(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_columns: no inputs");
  const std::size_t rows = parts.front().shape().at(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank("concat_columns", p, 2);
    if (p.shape()[0] != rows) shape_mismatch("concat_columns", parts.front().shape(), p.shape());
    widths.push_back(p.shape()[1]);
    total += p.shape()[1];
  }
  Tensor y({rows, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * widths[k], widths[k], y.data() + r * total + offset);
    }
    offset += widths[k];
  }
  return parts.front().tape().record(
      std::move(y), parts, [rows, total, widths = std::move(widths)](const Backprop& bp) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          if (Tensor* g = bp.input_grads[k]) {
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < widths[k]; ++c) {
                (*g)[r * widths[k] + c] += bp.output_grad[r * total + off + c];
              }
            }
          }
          off += widths[k];
        }
      });
}

Var reshape(Var x, Shape shape) {
  if (element_count(shape) != x.value().size()) shape_mismatch("reshape", x.shape(), shape);
  Tensor y(std::move(shape), std::vector<double>(x.value().values().begin(),
                                                  x.value().values().end()));
  return x.tape().record(std::move(y), {x}, [](const Backprop& bp) {
    Tensor& dx = *bp.input_grads[0];
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += bp.output_grad[i];
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  require_rank("softmax_cross_entropy", logits, 2);
  const std::size_t batch = logits.shape()[0];
  const std::size_t classes = logits.shape()[1];
  if (labels.size() != batch) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(batch) + " rows");
  }
  const Tensor& z = logits.value();
  std::vector<double> probs(batch * classes);
  std::vector<int> targets(labels.begin(), labels.end());
  double loss = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= classes) {
      throw ContractError("softmax_cross_entropy: label " + std::to_string(targets[r]) +
                          " outside [0, " + std::to_string(classes) + ")");
    }
    const double* row = z.data() + r * classes;
    const double top = *std::max_element(row, row + classes);
    double norm = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[r * classes + c] = std::exp(row[c] - top);
      norm += probs[r * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] /= norm;
    loss += -(row[targets[r]] - top - std::log(norm));
  }
  loss /= static_cast<double>(batch);
  return logits.tape().record(
      Tensor::scalar(loss), {logits},
      [=, probs = std::move(probs), targets = std::move(targets)](const Backprop& bp) {
        Tensor& dz = *bp.input_grads[0];
        const double g = bp.output_grad[0] / static_cast<double>(batch);
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t c = 0; c < classes; ++c) {
            const double onehot = static_cast<int>(c) == targets[r] ? 1.0 : 0.0;
            dz[r * classes + c] += g * (probs[r * classes + c] - onehot);
          }
        }
      });
}

}  // namespace driveid::numerics
