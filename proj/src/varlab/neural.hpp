#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "varlab/json_io.hpp"
#include "varlab/types.hpp"

namespace varlab::nn {

enum class Activation { kRelu };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Dense feed-forward network. Layer i maps dims[i] -> dims[i+1]; hidden layers
// apply the activation, the final layer is linear (logits).
struct MlpModel {
  std::vector<int> layer_dims;
  std::vector<Eigen::MatrixXd> weights;  // dims[i+1] x dims[i]
  std::vector<Eigen::VectorXd> biases;   // dims[i+1]
  Activation activation = Activation::kRelu;

  static MlpModel zeros(std::vector<int> dims, Activation act = Activation::kRelu);
  // Uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static MlpModel glorot(std::vector<int> dims, std::uint64_t seed,
                         Activation act = Activation::kRelu);

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::size_t num_layers() const { return weights.size(); }

  // Throws kInputShape on inconsistent shapes and kValidation on non-finite
  // parameters.
  void validate() const;

  // Flat view over all parameters: weights (row-major) then biases, layer by
  // layer. Used for perturbation and finite-difference checks.
  std::size_t parameter_count() const;
  double parameter(std::size_t index) const;
  void set_parameter(std::size_t index, double value);

  bool operator==(const MlpModel& other) const;
};

struct GradBundle {
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;
  double loss_value = 0.0;

  static GradBundle zeros_like(const MlpModel& model);
  double parameter(std::size_t index) const;
};

// Per-layer values kept from the forward pass for backpropagation.
// post[0] is the input batch, post[i+1] the output of layer i.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
};

Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& x);
// inputs: one column per example.
Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& inputs,
                              ForwardCache* cache = nullptr);

// Propagates d(loss)/d(output) back through the network. Either output may be
// null when the caller does not need it.
void backward(const MlpModel& model, const ForwardCache& cache, const Eigen::MatrixXd& d_output,
              GradBundle* param_grads, Eigen::MatrixXd* d_input);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
// Column-wise softmax.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

// Mean (or weighted-mean, when weights is non-empty) cross-entropy over a
// batch and its exact parameter gradient.
GradBundle loss_and_param_grads(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                std::span<const int> labels,
                                std::span<const double> weights = {});

// A differentiable scalar function of the class-probability vector.
struct ProbabilityLoss {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

// d/dx of loss(softmax(forward(model, x))).
Eigen::VectorXd input_gradient(const MlpModel& model, const Eigen::VectorXd& x,
                               const ProbabilityLoss& loss);

struct AdamState {
  std::uint64_t step_count = 0;
  GradBundle first_moment;
  GradBundle second_moment;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_model(const MlpModel& model, double lr);
};

// Bias-corrected Adam update, in place.
void adam_step(AdamState& state, MlpModel& model, const GradBundle& grads);

// Central difference of a scalar function along one coordinate; the generic
// oracle behind all gradient checks.
double central_difference(const std::function<double(double)>& f, double at, double h);

Json model_to_json(const MlpModel& model);
MlpModel model_from_json(const Json& j);

}  // namespace varlab::nn
