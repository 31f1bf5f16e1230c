#include "csp/net.hpp"

#include <cmath>
#include <string>

namespace csp {

namespace {

inline double apply_act(Act a, double x) {
  switch (a) {
    case Act::LeakyRelu:
      return x > 0.0 ? x : kLeakySlope * x;
    case Act::Tanh:
      return std::tanh(x);
    case Act::Identity:
      return x;
  }
  return x;
}

inline double act_deriv(Act a, double pre, double post) {
  switch (a) {
    case Act::LeakyRelu:
      return pre > 0.0 ? 1.0 : kLeakySlope;
    case Act::Tanh:
      return 1.0 - post * post;
    case Act::Identity:
      return 1.0;
  }
  return 1.0;
}

}  // namespace

ArchSignature ArchSignature::mlp(std::vector<int> w) {
  std::vector<Act> acts(w.size() - 1, Act::LeakyRelu);
  acts.back() = Act::Identity;
  return ArchSignature(std::move(w), std::move(acts));
}

void ArchSignature::validate() const {
  if (widths.size() < 2)
    throw ConfigError("signature needs at least 2 widths");
  for (int w : widths)
    if (w <= 0) throw ConfigError("signature widths must be positive");
  if (activations.size() != widths.size() - 1)
    throw ConfigError("signature needs one activation per layer boundary");
}

long ArchSignature::param_count() const {
  long p = 0;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    p += static_cast<long>(widths[i]) * widths[i + 1] + widths[i + 1];
  return p;
}

long ArchSignature::layer_offset(int layer) const {
  long off = 0;
  for (int l = 0; l < layer; ++l)
    off += static_cast<long>(widths[l]) * widths[l + 1] + widths[l + 1];
  return off;
}

void ParamVector::check() const {
  if (static_cast<long>(values.size()) != signature.param_count())
    throw InputError("parameter vector length does not match signature");
  for (double v : values)
    if (!std::isfinite(v)) throw InputError("non-finite parameter value");
}

ParamVector init_params(const ArchSignature& sig, std::uint64_t seed) {
  sig.validate();
  ParamVector p(sig);
  Rng rng = make_rng(seed);
  long off = 0;
  for (int l = 0; l < sig.layer_count(); ++l) {
    const int in = sig.widths[l];
    const int out = sig.widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (long i = 0; i < static_cast<long>(out) * in + out; ++i)
      p.values[off + i] = dist(rng);
    off += static_cast<long>(out) * in + out;
  }
  return p;
}

std::vector<double> forward(const ParamVector& params,
                            std::span<const double> input) {
  const ArchSignature& sig = params.signature;
  if (static_cast<int>(input.size()) != sig.input_dim())
    throw InputError("forward: input length does not match signature");
  std::vector<double> cur(input.begin(), input.end());
  std::vector<double> next;
  long off = 0;
  for (int l = 0; l < sig.layer_count(); ++l) {
    const int in = sig.widths[l];
    const int out = sig.widths[l + 1];
    const double* w = params.values.data() + off;
    const double* b = w + static_cast<long>(out) * in;
    next.assign(out, 0.0);
    for (int o = 0; o < out; ++o) {
      double acc = b[o];
      const double* row = w + static_cast<long>(o) * in;
      for (int i = 0; i < in; ++i) acc += row[i] * cur[i];
      next[o] = apply_act(sig.activations[l], acc);
    }
    cur.swap(next);
    off += static_cast<long>(out) * in + out;
  }
  return cur;
}

void backward(const ParamVector& params, std::span<const double> input,
              std::span<const double> cotangent, Gradient* param_grad,
              std::vector<double>* input_grad) {
  const ArchSignature& sig = params.signature;
  if (static_cast<int>(input.size()) != sig.input_dim())
    throw InputError("backward: input length does not match signature");
  if (static_cast<int>(cotangent.size()) != sig.output_dim())
    throw InputError("backward: cotangent length does not match signature");

  const int layers = sig.layer_count();
  std::vector<std::vector<double>> pre(layers), post(layers + 1);
  post[0].assign(input.begin(), input.end());
  long off = 0;
  for (int l = 0; l < layers; ++l) {
    const int in = sig.widths[l];
    const int out = sig.widths[l + 1];
    const double* w = params.values.data() + off;
    const double* b = w + static_cast<long>(out) * in;
    pre[l].assign(out, 0.0);
    post[l + 1].assign(out, 0.0);
    for (int o = 0; o < out; ++o) {
      double acc = b[o];
      const double* row = w + static_cast<long>(o) * in;
      for (int i = 0; i < in; ++i) acc += row[i] * post[l][i];
      pre[l][o] = acc;
      post[l + 1][o] = apply_act(sig.activations[l], acc);
    }
    off += static_cast<long>(out) * in + out;
  }

  if (param_grad &&
      param_grad->values.size() != static_cast<std::size_t>(sig.param_count()))
    param_grad->values.assign(sig.param_count(), 0.0);

  std::vector<double> delta(cotangent.begin(), cotangent.end());
  std::vector<double> prev_delta;
  for (int l = layers - 1; l >= 0; --l) {
    const int in = sig.widths[l];
    const int out = sig.widths[l + 1];
    off = sig.layer_offset(l);
    const double* w = params.values.data() + off;
    for (int o = 0; o < out; ++o)
      delta[o] *= act_deriv(sig.activations[l], pre[l][o], post[l + 1][o]);
    if (param_grad) {
      double* gw = param_grad->values.data() + off;
      double* gb = gw + static_cast<long>(out) * in;
      for (int o = 0; o < out; ++o) {
        double* grow = gw + static_cast<long>(o) * in;
        for (int i = 0; i < in; ++i) grow[i] += delta[o] * post[l][i];
        gb[o] += delta[o];
      }
    }
    if (l > 0 || input_grad) {
      prev_delta.assign(in, 0.0);
      for (int o = 0; o < out; ++o) {
        const double* row = w + static_cast<long>(o) * in;
        for (int i = 0; i < in; ++i) prev_delta[i] += row[i] * delta[o];
      }
      delta.swap(prev_delta);
    }
  }
  if (input_grad) *input_grad = delta;
}

const Matrix& forward_batch(const ParamVector& params, const Matrix& input,
                            BatchWorkspace& ws) {
  const ArchSignature& sig = params.signature;
  if (static_cast<int>(input.cols()) != sig.input_dim())
    throw InputError("forward_batch: input width does not match signature");
  const int layers = sig.layer_count();
  ws.pre.resize(layers);
  ws.post.resize(layers + 1);
  ws.post[0] = input;
  long off = 0;
  for (int l = 0; l < layers; ++l) {
    const int in = sig.widths[l];
    const int out = sig.widths[l + 1];
    Eigen::Map<const Matrix> w(params.values.data() + off, out, in);
    Eigen::Map<const Eigen::VectorXd> b(
        params.values.data() + off + static_cast<long>(out) * in, out);
    ws.pre[l].noalias() = ws.post[l] * w.transpose();
    ws.pre[l].rowwise() += b.transpose();
    ws.post[l + 1].resize(ws.pre[l].rows(), out);
    const Act a = sig.activations[l];
    switch (a) {
      case Act::LeakyRelu:
        ws.post[l + 1] =
            ws.pre[l].unaryExpr([](double x) { return x > 0.0 ? x : kLeakySlope * x; });
        break;
      case Act::Tanh:
        ws.post[l + 1] = ws.pre[l].array().tanh();
        break;
      case Act::Identity:
        ws.post[l + 1] = ws.pre[l];
        break;
    }
    off += static_cast<long>(out) * in + out;
  }
  return ws.post.back();
}

void backward_batch(const ParamVector& params, BatchWorkspace& ws,
                    const Matrix& cotangent, Gradient* param_grad,
                    Matrix* input_grad) {
  const ArchSignature& sig = params.signature;
  const int layers = sig.layer_count();
  if (param_grad &&
      param_grad->values.size() != static_cast<std::size_t>(sig.param_count()))
    param_grad->values.assign(sig.param_count(), 0.0);

  Matrix delta = cotangent;
  for (int l = layers - 1; l >= 0; --l) {
    const int in = sig.widths[l];
    const int out = sig.widths[l + 1];
    const long off = sig.layer_offset(l);
    switch (sig.activations[l]) {
      case Act::LeakyRelu:
        delta.array() *=
            ws.pre[l].unaryExpr([](double x) { return x > 0.0 ? 1.0 : kLeakySlope; }).array();
        break;
      case Act::Tanh:
        delta.array() *= (1.0 - ws.post[l + 1].array().square());
        break;
      case Act::Identity:
        break;
    }
    if (param_grad) {
      Eigen::Map<Matrix> gw(param_grad->values.data() + off, out, in);
      Eigen::Map<Eigen::VectorXd> gb(
          param_grad->values.data() + off + static_cast<long>(out) * in, out);
      gw.noalias() += delta.transpose() * ws.post[l];
      gb.noalias() += delta.colwise().sum().transpose();
    }
    if (l > 0 || input_grad) {
      Eigen::Map<const Matrix> w(params.values.data() + off, out, in);
      Matrix prev = delta * w;
      delta.swap(prev);
    }
  }
  if (input_grad) *input_grad = std::move(delta);
}

void adam_step_values(AdamState& state, std::span<double> values,
                      std::span<const double> grad) {
  if (values.size() != grad.size() || state.m.size() != values.size())
    throw InputError("adam_step: misaligned lengths");
  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = grad[i];
    if (!std::isfinite(g)) throw TrainingFault("non-finite gradient in adam_step");
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    values[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps_num);
  }
}

void adam_step(AdamState& state, ParamVector& params, const Gradient& grad) {
  adam_step_values(state, params.values, grad.values);
}

}  // namespace csp
