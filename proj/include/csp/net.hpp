#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "csp/common.hpp"

namespace csp {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Act : std::uint8_t { LeakyRelu = 0, Tanh = 1, Identity = 2 };

constexpr double kLeakySlope = 0.2;

// Fully-connected network layout. Flat parameter order per layer:
// weight matrix (out x in, row-major) followed by the bias vector.
struct ArchSignature {
  std::vector<int> widths;
  std::vector<Act> activations;  // one per layer boundary

  ArchSignature() = default;
  ArchSignature(std::vector<int> w, std::vector<Act> a)
      : widths(std::move(w)), activations(std::move(a)) {
    validate();
  }

  // Hidden layers use leaky ReLU, the output boundary is linear.
  static ArchSignature mlp(std::vector<int> w);

  void validate() const;
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  int layer_count() const { return static_cast<int>(widths.size()) - 1; }
  long param_count() const;
  long layer_offset(int layer) const;  // offset of layer's weight block

  bool operator==(const ArchSignature&) const = default;
};

struct ParamVector {
  ArchSignature signature;
  std::vector<double> values;

  ParamVector() = default;
  explicit ParamVector(ArchSignature sig)
      : signature(std::move(sig)),
        values(static_cast<std::size_t>(signature.param_count()), 0.0) {}

  void check() const;  // length and finiteness
};

struct Gradient {
  std::vector<double> values;

  Gradient() = default;
  explicit Gradient(std::size_t n) : values(n, 0.0) {}
};

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_num = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n, double lr_) : m(n, 0.0), v(n, 0.0), lr(lr_) {}
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per layer, weights then biases.
ParamVector init_params(const ArchSignature& sig, std::uint64_t seed);

std::vector<double> forward(const ParamVector& params,
                            std::span<const double> input);

// Gradient of <cotangent, forward(params, input)>. Either output may be null.
void backward(const ParamVector& params, std::span<const double> input,
              std::span<const double> cotangent, Gradient* param_grad,
              std::vector<double>* input_grad);

// Scratch for batched passes; reused across calls to avoid reallocation.
struct BatchWorkspace {
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // post-activation per layer; post[0] = input
};

// Rows of `input` are samples. Returns a reference to the output rows held in
// the workspace (valid until the next call with the same workspace).
const Matrix& forward_batch(const ParamVector& params, const Matrix& input,
                            BatchWorkspace& ws);

// Batched reverse pass using the caches left by forward_batch. The parameter
// gradient is summed over rows; `input_grad` (optional) gets one row each.
void backward_batch(const ParamVector& params, BatchWorkspace& ws,
                    const Matrix& cotangent, Gradient* param_grad,
                    Matrix* input_grad);

// Bias-corrected adaptive-moment step; updates params in place.
// Throws TrainingFault on non-finite gradient entries.
void adam_step(AdamState& state, ParamVector& params, const Gradient& grad);
void adam_step_values(AdamState& state, std::span<double> values,
                      std::span<const double> grad);

}  // namespace csp
