// SPDX-License-Identifier: Apache-2.0
#include "warp/gradengine/tape.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "warp/errors.hpp"
#include "warp/numkit/fft.hpp"

namespace warp::grad {

using numkit::gemm;
using numkit::Spectrum;

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double unary_value(Unary f, double x) {
  switch (f) {
    case Unary::relu: return x > 0.0 ? x : 0.0;
    case Unary::swish: return x * sigmoid(x);
    case Unary::tanh: return std::tanh(x);
    case Unary::sigmoid: return sigmoid(x);
    case Unary::softplus: return rootnet::softplus(x);
    case Unary::sin: return std::sin(x);
  }
  return x;
}

double unary_grad(Unary f, double x) {
  switch (f) {
    case Unary::relu: return x > 0.0 ? 1.0 : 0.0;
    case Unary::swish: {
      const double s = sigmoid(x);
      return s + x * s * (1.0 - s);
    }
    case Unary::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Unary::sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case Unary::softplus: return sigmoid(x);
    case Unary::sin: return std::cos(x);
  }
  return 1.0;
}

void same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
}

Matrix& grad_ref(std::vector<Matrix>& grads, NodeId id, std::size_t rows, std::size_t cols) {
  Matrix& g = grads[id];
  if (g.empty() && rows * cols > 0) g = Matrix(rows, cols);
  return g;
}

struct LayerOffsets {
  std::vector<std::size_t> w_off;
  std::vector<std::size_t> b_off;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
};

LayerOffsets layer_offsets(const rootnet::RootSpec& spec) {
  LayerOffsets lo;
  lo.shapes = rootnet::layer_shapes(spec);
  std::size_t off = 0;
  for (auto [r, c] : lo.shapes) {
    lo.w_off.push_back(off);
    off += r * c;
    lo.b_off.push_back(off);
    off += r;
  }
  return lo;
}

}  // namespace

void Tape::check_id(NodeId id) const {
  if (id >= nodes_.size()) throw ContractViolation("Tape: unknown node id " + std::to_string(id));
}

NodeId Tape::push(Node n) {
  for (NodeId i : n.in) {
    check_id(i);
    n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
  }
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

const Matrix& Tape::value(NodeId id) const {
  check_id(id);
  return val(id);
}

double Tape::scalar(NodeId id) const {
  const Matrix& v = value(id);
  require(v.rows() == 1 && v.cols() == 1, "Tape::scalar: node is not 1x1");
  return v(0, 0);
}

NodeId Tape::constant(Matrix v) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(v);
  return push(std::move(n));
}

NodeId Tape::parameter(std::size_t slot, const Matrix& value) {
  Node n;
  n.op = Op::parameter;
  n.external = &value;
  n.slot = slot;
  n.needs_grad = true;
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  const Matrix& va = val(a);
  const Matrix& vb = val(b);
  if (va.cols() != vb.rows()) throw ContractViolation("matmul: inner dimensions differ");
  Node n;
  n.op = Op::matmul;
  n.in = {a, b};
  n.value = Matrix(va.rows(), vb.cols());
  gemm(1.0, va, false, vb, false, 0.0, n.value);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  same_shape(val(a), val(b), "add");
  Node n;
  n.op = Op::add;
  n.in = {a, b};
  n.value = val(a);
  auto out = n.value.flat();
  auto vb = val(b).flat();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  same_shape(val(a), val(b), "sub");
  Node n;
  n.op = Op::sub;
  n.in = {a, b};
  n.value = val(a);
  auto out = n.value.flat();
  auto vb = val(b).flat();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  same_shape(val(a), val(b), "mul");
  Node n;
  n.op = Op::mul;
  n.in = {a, b};
  n.value = val(a);
  auto out = n.value.flat();
  auto vb = val(b).flat();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  return push(std::move(n));
}

NodeId Tape::mul_const(NodeId x, Matrix c) {
  check_id(x);
  same_shape(val(x), c, "mul_const");
  Node n;
  n.op = Op::mul_const;
  n.in = {x};
  n.value = val(x);
  auto out = n.value.flat();
  auto vc = c.flat();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vc[i];
  n.aux = std::move(c);
  return push(std::move(n));
}

NodeId Tape::add_bias(NodeId x, NodeId bias) {
  check_id(x);
  check_id(bias);
  const Matrix& vx = val(x);
  const Matrix& vb = val(bias);
  require(vb.cols() == 1 && vb.rows() == vx.rows(), "add_bias: bias must be rows x 1");
  Node n;
  n.op = Op::add_bias;
  n.in = {x, bias};
  n.value = vx;
  for (std::size_t r = 0; r < vx.rows(); ++r)
    for (double& v : n.value.row(r)) v += vb(r, 0);
  return push(std::move(n));
}

NodeId Tape::mul_rows(NodeId d, NodeId x) {
  check_id(d);
  check_id(x);
  const Matrix& vd = val(d);
  const Matrix& vx = val(x);
  require(vd.cols() == 1 && vd.rows() == vx.rows(), "mul_rows: scale must be rows x 1");
  Node n;
  n.op = Op::mul_rows;
  n.in = {d, x};
  n.value = vx;
  for (std::size_t r = 0; r < vx.rows(); ++r)
    for (double& v : n.value.row(r)) v *= vd(r, 0);
  return push(std::move(n));
}

NodeId Tape::broadcast_cols(NodeId x, std::size_t cols) {
  check_id(x);
  const Matrix& vx = val(x);
  require(vx.cols() == 1, "broadcast_cols: input must be a column");
  Node n;
  n.op = Op::broadcast_cols;
  n.in = {x};
  n.value = Matrix(vx.rows(), cols);
  for (std::size_t r = 0; r < vx.rows(); ++r)
    for (double& v : n.value.row(r)) v = vx(r, 0);
  return push(std::move(n));
}

NodeId Tape::scale(NodeId x, double s) {
  check_id(x);
  Node n;
  n.op = Op::scale;
  n.in = {x};
  n.s0 = s;
  n.value = val(x);
  for (double& v : n.value.flat()) v *= s;
  return push(std::move(n));
}

NodeId Tape::add_const(NodeId x, double c) {
  check_id(x);
  Node n;
  n.op = Op::add_const;
  n.in = {x};
  n.value = val(x);
  for (double& v : n.value.flat()) v += c;
  return push(std::move(n));
}

NodeId Tape::unary(Unary f, NodeId x) {
  check_id(x);
  Node n;
  n.op = Op::unary;
  n.fn = f;
  n.in = {x};
  n.value = val(x);
  for (double& v : n.value.flat()) v = unary_value(f, v);
  return push(std::move(n));
}

NodeId Tape::activation(rootnet::Activation a, NodeId x) {
  check_id(x);
  Node n;
  n.op = Op::activation;
  n.act = a;
  n.in = {x};
  n.value = val(x);
  for (double& v : n.value.flat()) v = rootnet::activate(a, v);
  return push(std::move(n));
}

NodeId Tape::clamp(NodeId x, double lo, double hi) {
  check_id(x);
  require(lo <= hi, "clamp: lo > hi");
  Node n;
  n.op = Op::clamp;
  n.in = {x};
  n.s0 = lo;
  n.s1 = hi;
  n.value = val(x);
  for (double& v : n.value.flat()) v = std::clamp(v, lo, hi);
  return push(std::move(n));
}

NodeId Tape::slice_rows(NodeId x, std::size_t begin, std::size_t count) {
  check_id(x);
  const Matrix& vx = val(x);
  require(begin + count <= vx.rows(), "slice_rows: range out of bounds");
  Node n;
  n.op = Op::slice_rows;
  n.in = {x};
  n.i0 = begin;
  n.i1 = count;
  n.value = Matrix(count, vx.cols(),
                   std::vector<double>(vx.data() + begin * vx.cols(), vx.data() + (begin + count) * vx.cols()));
  return push(std::move(n));
}

NodeId Tape::vstack(std::span<const NodeId> parts) {
  require(!parts.empty(), "vstack: no inputs");
  std::size_t rows = 0;
  const std::size_t cols = value(parts[0]).cols();
  for (NodeId p : parts) {
    check_id(p);
    require(val(p).cols() == cols, "vstack: column counts differ");
    rows += val(p).rows();
  }
  Node n;
  n.op = Op::vstack;
  n.in.assign(parts.begin(), parts.end());
  std::vector<double> data;
  data.reserve(rows * cols);
  for (NodeId p : parts) data.insert(data.end(), val(p).flat().begin(), val(p).flat().end());
  n.value = Matrix(rows, cols, std::move(data));
  return push(std::move(n));
}

NodeId Tape::add_n(std::span<const NodeId> parts) {
  require(!parts.empty(), "add_n: no inputs");
  Node n;
  n.op = Op::add_n;
  n.in.assign(parts.begin(), parts.end());
  n.value = value(parts[0]);
  for (std::size_t k = 1; k < parts.size(); ++k) {
    check_id(parts[k]);
    same_shape(n.value, val(parts[k]), "add_n");
    auto out = n.value.flat();
    auto v = val(parts[k]).flat();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  return push(std::move(n));
}

NodeId Tape::blend(std::vector<double> mask, NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  const Matrix& va = val(a);
  const Matrix& vb = val(b);
  same_shape(va, vb, "blend");
  require(mask.size() == va.cols(), "blend: mask length must equal column count");
  Node n;
  n.op = Op::blend;
  n.in = {a, b};
  n.value = Matrix(va.rows(), va.cols());
  for (std::size_t r = 0; r < va.rows(); ++r)
    for (std::size_t c = 0; c < va.cols(); ++c) n.value(r, c) = mask[c] != 0.0 ? va(r, c) : vb(r, c);
  n.mask = std::move(mask);
  return push(std::move(n));
}

NodeId Tape::col_matvec(NodeId m, NodeId v, std::size_t rows) {
  check_id(m);
  check_id(v);
  const Matrix& vm = val(m);
  const Matrix& vv = val(v);
  const std::size_t k = vv.rows();
  require(vm.rows() == rows * k && vm.cols() == vv.cols(), "col_matvec: shape mismatch");
  Node n;
  n.op = Op::col_matvec;
  n.in = {m, v};
  n.i0 = rows;
  n.value = Matrix(rows, vv.cols());
  for (std::size_t b = 0; b < vv.cols(); ++b)
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < k; ++c) acc += vm(r * k + c, b) * vv(c, b);
      n.value(r, b) = acc;
    }
  return push(std::move(n));
}

NodeId Tape::root_eval(NodeId theta, const rootnet::RootSpec& spec, double tau) {
  check_id(theta);
  const Matrix& vt = val(theta);
  const std::size_t d = rootnet::param_count(spec);
  if (vt.rows() != d) throw ContractViolation("root_eval: state length does not match root spec");
  const std::size_t batch = vt.cols();
  const LayerOffsets lo = layer_offsets(spec);
  const std::size_t hidden = spec.width * spec.depth;

  Node n;
  n.op = Op::root_eval;
  n.in = {theta};
  n.spec = spec;
  n.s0 = tau;
  n.value = Matrix(spec.out_dim, batch);
  n.aux = Matrix(batch, hidden);
  const Matrix th = vt.transposed();
  std::vector<double> h(spec.width), z(spec.width);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* p = th.data() + b * d;
    double* pre = n.aux.data() + b * hidden;
    std::vector<double> in{tau};
    for (std::size_t l = 0; l < lo.shapes.size(); ++l) {
      const auto [rows, cols] = lo.shapes[l];
      const double* w = p + lo.w_off[l];
      const double* bias = p + lo.b_off[l];
      const bool last = l + 1 == lo.shapes.size();
      std::vector<double> out(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = bias[r];
        for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * in[c];
        if (last) {
          out[r] = acc;
        } else {
          pre[l * spec.width + r] = acc;
          out[r] = rootnet::activate(spec.activation, acc);
        }
        if (!std::isfinite(out[r]))
          throw OverflowError("root network produced a non-finite value in layer " + std::to_string(l));
      }
      in = std::move(out);
    }
    for (std::size_t r = 0; r < spec.out_dim; ++r) n.value(r, b) = in[r];
  }
  return push(std::move(n));
}

NodeId Tape::dyn_tanh(NodeId x, NodeId p) {
  check_id(x);
  check_id(p);
  const Matrix& vp = val(p);
  require(vp.rows() == 4 && vp.cols() == 1, "dyn_tanh: parameters must be 4 x 1");
  require(vp(0, 0) != 0.0, "dyn_tanh: scale a must be nonzero");
  Node n;
  n.op = Op::dyn_tanh;
  n.in = {x, p};
  n.value = val(x);
  for (double& v : n.value.flat()) v = vp(2, 0) * std::tanh((v - vp(1, 0)) / vp(0, 0)) + vp(3, 0);
  return push(std::move(n));
}

NodeId Tape::causal_conv(NodeId kernel, NodeId signal, std::size_t steps) {
  check_id(kernel);
  check_id(signal);
  const Matrix& vk = val(kernel);
  const Matrix& vs = val(signal);
  require(steps >= 1, "causal_conv: steps must be >= 1");
  require(vk.rows() % steps == 0 && vs.rows() % steps == 0, "causal_conv: rows not divisible by steps");
  const std::size_t d = vk.rows() / steps;
  const std::size_t dx = vk.cols();
  require(vs.rows() == steps * dx, "causal_conv: signal rows must be steps * kernel cols");
  const std::size_t batch = vs.cols();
  const std::size_t nfft = numkit::next_pow2(2 * steps - 1);

  std::vector<Spectrum> fk(d * dx), fs(dx * batch);
  std::vector<double> series(steps);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < dx; ++j) {
      for (std::size_t l = 0; l < steps; ++l) series[l] = vk(l * d + i, j);
      fk[i * dx + j] = numkit::spectrum_padded(series, nfft);
    }
  for (std::size_t j = 0; j < dx; ++j)
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < steps; ++t) series[t] = vs(t * dx + j, b);
      fs[j * batch + b] = numkit::spectrum_padded(series, nfft);
    }

  Node n;
  n.op = Op::causal_conv;
  n.in = {kernel, signal};
  n.i0 = steps;
  n.value = Matrix(steps * d, batch);
  Spectrum acc(nfft);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t b = 0; b < batch; ++b) {
      std::fill(acc.begin(), acc.end(), std::complex<double>{});
      for (std::size_t j = 0; j < dx; ++j) {
        const Spectrum& a = fk[i * dx + j];
        const Spectrum& s = fs[j * batch + b];
        for (std::size_t f = 0; f < nfft; ++f) acc[f] += a[f] * s[f];
      }
      numkit::fft_inplace(acc, true);
      for (std::size_t t = 0; t < steps; ++t) n.value(t * d + i, b) = acc[t].real();
    }
  return push(std::move(n));
}

NodeId Tape::mse(NodeId pred, Matrix target) {
  check_id(pred);
  same_shape(val(pred), target, "mse");
  const Matrix& vp = val(pred);
  require(vp.cols() >= 1, "mse: empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < vp.size(); ++i) {
    const double e = vp.flat()[i] - target.flat()[i];
    s += e * e;
  }
  Node n;
  n.op = Op::mse;
  n.in = {pred};
  n.value = Matrix(1, 1, s / static_cast<double>(vp.cols()));
  n.aux = std::move(target);
  return push(std::move(n));
}

NodeId Tape::gaussian_nll(NodeId mu, NodeId sigma, Matrix target) {
  check_id(mu);
  check_id(sigma);
  const Matrix& vm = val(mu);
  const Matrix& vs = val(sigma);
  same_shape(vm, target, "gaussian_nll");
  same_shape(vs, target, "gaussian_nll");
  require(vm.cols() >= 1, "gaussian_nll: empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < vm.size(); ++i) {
    const double sg = vs.flat()[i];
    require(sg > 0.0, "gaussian_nll: sigma must be positive");
    const double e = target.flat()[i] - vm.flat()[i];
    s += e * e / (2.0 * sg * sg) + std::log(sg);
  }
  Node n;
  n.op = Op::gaussian_nll;
  n.in = {mu, sigma};
  n.value = Matrix(1, 1, s / static_cast<double>(vm.cols()));
  n.aux = std::move(target);
  return push(std::move(n));
}

NodeId Tape::softmax_cce(NodeId logits, std::vector<std::size_t> labels) {
  check_id(logits);
  const Matrix& vl = val(logits);
  require(labels.size() == vl.cols() && !labels.empty(), "softmax_cce: one label per column required");
  Node n;
  n.op = Op::softmax_cce;
  n.in = {logits};
  n.aux = Matrix(vl.rows(), vl.cols());
  double s = 0.0;
  for (std::size_t b = 0; b < vl.cols(); ++b) {
    if (labels[b] >= vl.rows()) throw ContractViolation("softmax_cce: label out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < vl.rows(); ++c) mx = std::max(mx, vl(c, b));
    double z = 0.0;
    for (std::size_t c = 0; c < vl.rows(); ++c) z += std::exp(vl(c, b) - mx);
    for (std::size_t c = 0; c < vl.rows(); ++c) n.aux(c, b) = std::exp(vl(c, b) - mx) / z;
    s += -(vl(labels[b], b) - mx - std::log(z));
  }
  n.value = Matrix(1, 1, s / static_cast<double>(vl.cols()));
  n.labels = std::move(labels);
  return push(std::move(n));
}

void Tape::backward(NodeId seed, GradStore& store) const {
  check_id(seed);
  require(val(seed).rows() == 1 && val(seed).cols() == 1, "backward: seed node must be 1x1");
  std::vector<Matrix> grads(nodes_.size());
  grads[seed] = Matrix(1, 1, 1.0);
  for (NodeId id = seed + 1; id-- > 0;) {
    if (grads[id].empty() || !nodes_[id].needs_grad) continue;
    const Node& n = nodes_[id];
    if (n.op == Op::parameter) {
      require(n.slot < store.size(), "backward: gradient store does not cover parameter slot");
      Matrix& g = store[n.slot];
      same_shape(g, grads[id], "backward");
      auto dst = g.flat();
      auto src = grads[id].flat();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    } else {
      backprop_node(id, grads);
    }
    grads[id] = Matrix();
  }
}

void Tape::backprop_node(NodeId id, std::vector<Matrix>& grads) const {
  const Node& n = nodes_[id];
  const Matrix& g = grads[id];
  auto needs = [&](std::size_t k) { return nodes_[n.in[k]].needs_grad; };
  auto target = [&](std::size_t k) -> Matrix& {
    const Matrix& v = val(n.in[k]);
    return grad_ref(grads, n.in[k], v.rows(), v.cols());
  };

  switch (n.op) {
    case Op::constant:
    case Op::parameter:
      break;

    case Op::matmul: {
      const Matrix& a = val(n.in[0]);
      const Matrix& b = val(n.in[1]);
      if (needs(0)) gemm(1.0, g, false, b, true, 1.0, target(0));
      if (needs(1)) gemm(1.0, a, true, g, false, 1.0, target(1));
      break;
    }

    case Op::add:
    case Op::sub: {
      const double sign = n.op == Op::sub ? -1.0 : 1.0;
      if (needs(0)) {
        auto d = target(0).flat();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g.flat()[i];
      }
      if (needs(1)) {
        auto d = target(1).flat();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += sign * g.flat()[i];
      }
      break;
    }

    case Op::mul: {
      const Matrix& a = val(n.in[0]);
      const Matrix& b = val(n.in[1]);
      if (needs(0)) {
        auto d = target(0).flat();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g.flat()[i] * b.flat()[i];
      }
      if (needs(1)) {
        auto d = target(1).flat();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g.flat()[i] * a.flat()[i];
      }
      break;
    }

    case Op::mul_const: {
      if (needs(0)) {
        auto d = target(0).flat();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g.flat()[i] * n.aux.flat()[i];
      }
      break;
    }

    case Op::add_bias: {
      if (needs(0)) {
        auto d = target(0).flat();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g.flat()[i];
      }
      if (needs(1)) {
        Matrix& d = target(1);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double s = 0.0;
          for (double v : g.row(r)) s += v;
          d(r, 0) += s;
        }
      }
      break;
    }

    case Op::mul_rows: {
      const Matrix& dv = val(n.in[0]);
      const Matrix& x = val(n.in[1]);
      if (needs(0)) {
        Matrix& d = target(0);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double s = 0.0;
          for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c) * x(r, c);
          d(r, 0) += s;
        }
      }
      if (needs(1)) {
        Matrix& d = target(1);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) d(r, c) += g(r, c) * dv(r, 0);
      }
      break;
    }

    case Op::broadcast_cols: {
      if (needs(0)) {
        Matrix& d = target(0);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double s = 0.0;
          for (double v : g.row(r)) s += v;
          d(r, 0) += s;
        }
      }
      break;
    }

    case Op::scale: {
      if (needs(0)) {
        auto d = target(0).flat();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += n.s0 * g.flat()[i];
      }
      break;
    }

    case Op::add_const: {
      if (needs(0)) {
        auto d = target(0).flat();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g.flat()[i];
      }
      break;
    }

    case Op::unary:
    case Op::activation: {
      if (needs(0)) {
        const Matrix& x = val(n.in[0]);
        auto d = target(0).flat();
        for (std::size_t i = 0; i < d.size(); ++i) {
          const double dg = n.op == Op::unary ? unary_grad(n.fn, x.flat()[i])
                                              : rootnet::activate_grad(n.act, x.flat()[i]);
          d[i] += g.flat()[i] * dg;
        }
      }
      break;
    }

    case Op::clamp: {
      if (needs(0)) {
        const Matrix& x = val(n.in[0]);
        auto d = target(0).flat();
        for (std::size_t i = 0; i < d.size(); ++i) {
          const double v = x.flat()[i];
          if (v > n.s0 && v < n.s1) d[i] += g.flat()[i];
        }
      }
      break;
    }

    case Op::slice_rows: {
      if (needs(0)) {
        Matrix& d = target(0);
        const std::size_t cols = g.cols();
        double* dst = d.data() + n.i0 * cols;
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g.flat()[i];
      }
      break;
    }

    case Op::vstack: {
      std::size_t off = 0;
      for (std::size_t k = 0; k < n.in.size(); ++k) {
        const std::size_t len = val(n.in[k]).size();
        if (needs(k)) {
          auto d = target(k).flat();
          for (std::size_t i = 0; i < len; ++i) d[i] += g.flat()[off + i];
        }
        off += len;
      }
      break;
    }

    case Op::add_n: {
      for (std::size_t k = 0; k < n.in.size(); ++k) {
        if (!needs(k)) continue;
        auto d = target(k).flat();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g.flat()[i];
      }
      break;
    }

    case Op::blend: {
      for (std::size_t k = 0; k < 2; ++k) {
        if (!needs(k)) continue;
        Matrix& d = target(k);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) {
            const bool take_a = n.mask[c] != 0.0;
            if (take_a == (k == 0)) d(r, c) += g(r, c);
          }
      }
      break;
    }

    case Op::col_matvec: {
      const Matrix& m = val(n.in[0]);
      const Matrix& v = val(n.in[1]);
      const std::size_t rows = n.i0;
      const std::size_t k = v.rows();
      if (needs(0)) {
        Matrix& d = target(0);
        for (std::size_t b = 0; b < g.cols(); ++b)
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < k; ++c) d(r * k + c, b) += g(r, b) * v(c, b);
      }
      if (needs(1)) {
        Matrix& d = target(1);
        for (std::size_t b = 0; b < g.cols(); ++b)
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < k; ++c) d(c, b) += g(r, b) * m(r * k + c, b);
      }
      break;
    }

    case Op::root_eval: {
      if (!needs(0)) break;
      const rootnet::RootSpec& spec = n.spec;
      const Matrix& vt = val(n.in[0]);
      const std::size_t d = vt.rows();
      const std::size_t batch = vt.cols();
      const std::size_t hidden = spec.width * spec.depth;
      const LayerOffsets lo = layer_offsets(spec);
      const Matrix th = vt.transposed();
      Matrix gt(batch, d);
      const std::size_t w = spec.width;
      std::vector<double> delta, delta_h(w), act_in(w);
      for (std::size_t b = 0; b < batch; ++b) {
        const double* p = th.data() + b * d;
        double* gp = gt.data() + b * d;
        const double* pre = n.aux.data() + b * hidden;
        delta.assign(spec.out_dim, 0.0);
        for (std::size_t r = 0; r < spec.out_dim; ++r) delta[r] = g(r, b);
        for (std::size_t l = lo.shapes.size(); l-- > 0;) {
          const auto [rows, cols] = lo.shapes[l];
          const double* wl = p + lo.w_off[l];
          double* gw = gp + lo.w_off[l];
          double* gb = gp + lo.b_off[l];
          if (l == 0) {
            act_in.assign(1, n.s0);
          } else {
            act_in.resize(cols);
            for (std::size_t c = 0; c < cols; ++c)
              act_in[c] = rootnet::activate(spec.activation, pre[(l - 1) * w + c]);
          }
          for (std::size_t r = 0; r < rows; ++r) {
            gb[r] += delta[r];
            for (std::size_t c = 0; c < cols; ++c) gw[r * cols + c] += delta[r] * act_in[c];
          }
          if (l == 0) break;
          std::fill(delta_h.begin(), delta_h.end(), 0.0);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) delta_h[c] += wl[r * cols + c] * delta[r];
          delta.resize(cols);
          for (std::size_t c = 0; c < cols; ++c)
            delta[c] = delta_h[c] * rootnet::activate_grad(spec.activation, pre[(l - 1) * w + c]);
        }
      }
      Matrix& dst = target(0);
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t b = 0; b < batch; ++b) dst(r, b) += gt(b, r);
      break;
    }

    case Op::dyn_tanh: {
      const Matrix& x = val(n.in[0]);
      const Matrix& p = val(n.in[1]);
      const double a = p(0, 0), bsh = p(1, 0), alpha = p(2, 0);
      double ga = 0.0, gbs = 0.0, galpha = 0.0, gbeta = 0.0;
      Matrix* dx = needs(0) ? &target(0) : nullptr;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double u = (x.flat()[i] - bsh) / a;
        const double t = std::tanh(u);
        const double dydu = alpha * (1.0 - t * t);
        const double gi = g.flat()[i];
        if (dx) dx->flat()[i] += gi * dydu / a;
        ga += gi * (-dydu * u / a);
        gbs += gi * (-dydu / a);
        galpha += gi * t;
        gbeta += gi;
      }
      if (needs(1)) {
        Matrix& dp = target(1);
        dp(0, 0) += ga;
        dp(1, 0) += gbs;
        dp(2, 0) += galpha;
        dp(3, 0) += gbeta;
      }
      break;
    }

    case Op::causal_conv: {
      const Matrix& vk = val(n.in[0]);
      const Matrix& vs = val(n.in[1]);
      const std::size_t steps = n.i0;
      const std::size_t d = vk.rows() / steps;
      const std::size_t dx = vk.cols();
      const std::size_t batch = vs.cols();
      const std::size_t nfft = numkit::next_pow2(2 * steps - 1);
      std::vector<double> series(steps);

      std::vector<Spectrum> fgr(d * batch);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t t = 0; t < steps; ++t) series[t] = g((steps - 1 - t) * d + i, b);
          fgr[i * batch + b] = numkit::spectrum_padded(series, nfft);
        }
      Spectrum acc(nfft);
      if (needs(0)) {
        std::vector<Spectrum> fs(dx * batch);
        for (std::size_t j = 0; j < dx; ++j)
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < steps; ++t) series[t] = vs(t * dx + j, b);
            fs[j * batch + b] = numkit::spectrum_padded(series, nfft);
          }
        Matrix& dk = target(0);
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < dx; ++j) {
            std::fill(acc.begin(), acc.end(), std::complex<double>{});
            for (std::size_t b = 0; b < batch; ++b) {
              const Spectrum& a = fgr[i * batch + b];
              const Spectrum& s = fs[j * batch + b];
              for (std::size_t f = 0; f < nfft; ++f) acc[f] += a[f] * s[f];
            }
            numkit::fft_inplace(acc, true);
            for (std::size_t l = 0; l < steps; ++l) dk(l * d + i, j) += acc[steps - 1 - l].real();
          }
      }
      if (needs(1)) {
        std::vector<Spectrum> fk(d * dx);
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < dx; ++j) {
            for (std::size_t l = 0; l < steps; ++l) series[l] = vk(l * d + i, j);
            fk[i * dx + j] = numkit::spectrum_padded(series, nfft);
          }
        Matrix& ds = target(1);
        for (std::size_t j = 0; j < dx; ++j)
          for (std::size_t b = 0; b < batch; ++b) {
            std::fill(acc.begin(), acc.end(), std::complex<double>{});
            for (std::size_t i = 0; i < d; ++i) {
              const Spectrum& a = fgr[i * batch + b];
              const Spectrum& k = fk[i * dx + j];
              for (std::size_t f = 0; f < nfft; ++f) acc[f] += a[f] * k[f];
            }
            numkit::fft_inplace(acc, true);
            for (std::size_t u = 0; u < steps; ++u) ds(u * dx + j, b) += acc[steps - 1 - u].real();
          }
      }
      break;
    }

    case Op::mse: {
      if (!needs(0)) break;
      const Matrix& p = val(n.in[0]);
      const double k = 2.0 * g(0, 0) / static_cast<double>(p.cols());
      auto d = target(0).flat();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += k * (p.flat()[i] - n.aux.flat()[i]);
      break;
    }

    case Op::gaussian_nll: {
      const Matrix& mu = val(n.in[0]);
      const Matrix& sg = val(n.in[1]);
      const double k = g(0, 0) / static_cast<double>(mu.cols());
      Matrix* dm = needs(0) ? &target(0) : nullptr;
      Matrix* ds = needs(1) ? &target(1) : nullptr;
      for (std::size_t i = 0; i < mu.size(); ++i) {
        const double s = sg.flat()[i];
        const double e = n.aux.flat()[i] - mu.flat()[i];
        if (dm) dm->flat()[i] += k * (-e / (s * s));
        if (ds) ds->flat()[i] += k * (-e * e / (s * s * s) + 1.0 / s);
      }
      break;
    }

    case Op::softmax_cce: {
      if (!needs(0)) break;
      const double k = g(0, 0) / static_cast<double>(n.aux.cols());
      Matrix& d = target(0);
      for (std::size_t b = 0; b < n.aux.cols(); ++b)
        for (std::size_t c = 0; c < n.aux.rows(); ++c)
          d(c, b) += k * (n.aux(c, b) - (c == n.labels[b] ? 1.0 : 0.0));
      break;
    }
  }
}

}  // namespace warp::grad
