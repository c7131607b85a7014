#include "varlab/neural.hpp"

#include <cmath>

#include "varlab/error.hpp"

namespace varlab::nn {

namespace {

struct ParamLocation {
  std::size_t layer;
  bool is_bias;
  Eigen::Index row;
  Eigen::Index col;
};

ParamLocation locate(const std::vector<Eigen::MatrixXd>& weights,
                     const std::vector<Eigen::VectorXd>& biases, std::size_t index) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto w_size = static_cast<std::size_t>(weights[l].size());
    if (index < w_size) {
      const auto cols = static_cast<std::size_t>(weights[l].cols());
      return {l, false, static_cast<Eigen::Index>(index / cols),
              static_cast<Eigen::Index>(index % cols)};
    }
    index -= w_size;
    const auto b_size = static_cast<std::size_t>(biases[l].size());
    if (index < b_size) return {l, true, static_cast<Eigen::Index>(index), 0};
    index -= b_size;
  }
  fail(ErrorCode::kInputShape, "parameter index out of range");
}

Eigen::MatrixXd apply_activation(Activation, const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

Eigen::MatrixXd activation_derivative(Activation, const Eigen::MatrixXd& z) {
  return (z.array() > 0.0).cast<double>().matrix();
}

void check_input(const MlpModel& model, Eigen::Index rows) {
  if (rows != model.input_dim()) {
    fail(ErrorCode::kInputShape, "input dimension " + std::to_string(rows) +
                                     " does not match model input " +
                                     std::to_string(model.input_dim()));
  }
}

}  // namespace

const char* to_string(Activation) { return "relu"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  fail(ErrorCode::kValidation, "unknown activation '" + name + "'");
}

MlpModel MlpModel::zeros(std::vector<int> dims, Activation act) {
  require(dims.size() >= 2, ErrorCode::kConfig, "an MLP needs at least two layer dimensions");
  MlpModel m;
  m.layer_dims = std::move(dims);
  m.activation = act;
  for (std::size_t i = 0; i + 1 < m.layer_dims.size(); ++i) {
    require(m.layer_dims[i] > 0 && m.layer_dims[i + 1] > 0, ErrorCode::kConfig,
            "layer dimensions must be positive");
    m.weights.push_back(Eigen::MatrixXd::Zero(m.layer_dims[i + 1], m.layer_dims[i]));
    m.biases.push_back(Eigen::VectorXd::Zero(m.layer_dims[i + 1]));
  }
  return m;
}

MlpModel MlpModel::glorot(std::vector<int> dims, std::uint64_t seed, Activation act) {
  MlpModel m = zeros(std::move(dims), act);
  Rng rng(seed);
  for (auto& w : m.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
  }
  return m;
}

void MlpModel::validate() const {
  require(layer_dims.size() >= 2, ErrorCode::kInputShape, "an MLP needs at least two layers");
  require(weights.size() + 1 == layer_dims.size() && biases.size() == weights.size(),
          ErrorCode::kInputShape, "layer count does not match layer_dims");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(layer_dims[i] > 0 && layer_dims[i + 1] > 0, ErrorCode::kInputShape,
            "layer dimensions must be positive");
    require(weights[i].rows() == layer_dims[i + 1] && weights[i].cols() == layer_dims[i],
            ErrorCode::kInputShape, "weight matrix " + std::to_string(i) + " has wrong shape");
    require(biases[i].size() == layer_dims[i + 1], ErrorCode::kInputShape,
            "bias vector " + std::to_string(i) + " has wrong length");
    require(weights[i].allFinite() && biases[i].allFinite(), ErrorCode::kValidation,
            "non-finite parameter in layer " + std::to_string(i));
  }
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

double MlpModel::parameter(std::size_t index) const {
  const auto loc = locate(weights, biases, index);
  return loc.is_bias ? biases[loc.layer][loc.row] : weights[loc.layer](loc.row, loc.col);
}

void MlpModel::set_parameter(std::size_t index, double value) {
  const auto loc = locate(weights, biases, index);
  if (loc.is_bias) {
    biases[loc.layer][loc.row] = value;
  } else {
    weights[loc.layer](loc.row, loc.col) = value;
  }
}

bool MlpModel::operator==(const MlpModel& other) const {
  if (layer_dims != other.layer_dims || activation != other.activation) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) return false;
  }
  return true;
}

GradBundle GradBundle::zeros_like(const MlpModel& model) {
  GradBundle g;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    g.d_weights.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
    g.d_biases.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
  }
  return g;
}

double GradBundle::parameter(std::size_t index) const {
  const auto loc = locate(d_weights, d_biases, index);
  return loc.is_bias ? d_biases[loc.layer][loc.row] : d_weights[loc.layer](loc.row, loc.col);
}

Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& inputs,
                              ForwardCache* cache) {
  check_input(model, inputs.rows());
  if (cache) {
    cache->pre.clear();
    cache->post.clear();
    cache->post.push_back(inputs);
  }
  Eigen::MatrixXd h = inputs;
  const std::size_t layers = model.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = model.weights[l] * h;
    z.colwise() += model.biases[l];
    h = (l + 1 < layers) ? apply_activation(model.activation, z) : z;
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(h);
    }
  }
  return h;
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& x) {
  return forward_batch(model, x);
}

void backward(const MlpModel& model, const ForwardCache& cache, const Eigen::MatrixXd& d_output,
              GradBundle* param_grads, Eigen::MatrixXd* d_input) {
  const std::size_t layers = model.num_layers();
  if (param_grads && param_grads->d_weights.size() != layers) {
    *param_grads = GradBundle::zeros_like(model);
  }
  Eigen::MatrixXd delta = d_output;
  for (std::size_t l = layers; l-- > 0;) {
    if (param_grads) {
      param_grads->d_weights[l] = delta * cache.post[l].transpose();
      param_grads->d_biases[l] = delta.rowwise().sum();
    }
    if (l > 0) {
      delta = (model.weights[l].transpose() * delta)
                  .cwiseProduct(activation_derivative(model.activation, cache.pre[l - 1]));
    } else if (d_input) {
      *d_input = model.weights[0].transpose() * delta;
    }
  }
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) out.col(c) = softmax(logits.col(c));
  return out;
}

GradBundle loss_and_param_grads(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                std::span<const int> labels, std::span<const double> weights) {
  require(inputs.cols() > 0 && !labels.empty(), ErrorCode::kEmptyInput, "empty batch");
  require(static_cast<std::size_t>(inputs.cols()) == labels.size(), ErrorCode::kInputShape,
          "inputs and labels differ in length");
  require(weights.empty() || weights.size() == labels.size(), ErrorCode::kInputShape,
          "weights and labels differ in length");

  ForwardCache cache;
  const Eigen::MatrixXd logits = forward_batch(model, inputs, &cache);
  const Eigen::Index k = logits.rows();

  double total_weight = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) total_weight += weights.empty() ? 1.0 : weights[i];
  require(total_weight > 0.0, ErrorCode::kValidation, "batch weights sum to zero");

  Eigen::MatrixXd d_logits(k, logits.cols());
  double loss = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const int y = labels[static_cast<std::size_t>(c)];
    require(y >= 0 && y < k, ErrorCode::kValidation, "label out of range");
    const double w = (weights.empty() ? 1.0 : weights[static_cast<std::size_t>(c)]) / total_weight;
    const double m = logits.col(c).maxCoeff();
    const double log_z = m + std::log((logits.col(c).array() - m).exp().sum());
    loss += w * (log_z - logits(y, c));
    d_logits.col(c) = (logits.col(c).array() - log_z).exp() * w;
    d_logits(y, c) -= w;
  }

  GradBundle grads = GradBundle::zeros_like(model);
  backward(model, cache, d_logits, &grads, nullptr);
  grads.loss_value = loss;
  return grads;
}

Eigen::VectorXd input_gradient(const MlpModel& model, const Eigen::VectorXd& x,
                               const ProbabilityLoss& loss) {
  ForwardCache cache;
  const Eigen::VectorXd logits = forward_batch(model, x, &cache);
  const Eigen::VectorXd p = softmax(logits);
  const Eigen::VectorXd g = loss.gradient(p);
  require(g.size() == p.size(), ErrorCode::kInputShape, "loss gradient has wrong length");
  // Softmax Jacobian-vector product: J^T g = p * (g - <p, g>).
  const Eigen::VectorXd d_logits = p.cwiseProduct((g.array() - p.dot(g)).matrix());
  Eigen::MatrixXd d_input;
  backward(model, cache, d_logits, nullptr, &d_input);
  return d_input.col(0);
}

AdamState AdamState::for_model(const MlpModel& model, double lr) {
  AdamState s;
  s.first_moment = GradBundle::zeros_like(model);
  s.second_moment = GradBundle::zeros_like(model);
  s.lr = lr;
  return s;
}

void adam_step(AdamState& state, MlpModel& model, const GradBundle& grads) {
  const std::size_t layers = model.num_layers();
  require(grads.d_weights.size() == layers && grads.d_biases.size() == layers,
          ErrorCode::kInputShape, "gradient layer count does not match model");
  if (state.first_moment.d_weights.size() != layers) {
    require(state.step_count == 0, ErrorCode::kInputShape, "optimizer state does not match model");
    state.first_moment = GradBundle::zeros_like(model);
    state.second_moment = GradBundle::zeros_like(model);
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    require(param.rows() == g.rows() && param.cols() == g.cols(), ErrorCode::kInputShape,
            "gradient shape does not match parameter shape");
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t l = 0; l < layers; ++l) {
    update(model.weights[l], grads.d_weights[l], state.first_moment.d_weights[l],
           state.second_moment.d_weights[l]);
    update(model.biases[l], grads.d_biases[l], state.first_moment.d_biases[l],
           state.second_moment.d_biases[l]);
  }
}

double central_difference(const std::function<double(double)>& f, double at, double h) {
  return (f(at + h) - f(at - h)) / (2.0 * h);
}

Json model_to_json(const MlpModel& model) {
  Json weights = Json::array();
  Json biases = Json::array();
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Json w = Json::array();
    const auto& m = model.weights[l];
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) w.push_back(m(r, c));
    weights.push_back(std::move(w));
    biases.push_back(to_json(model.biases[l]));
  }
  return Json{{"layer_dims", model.layer_dims},
              {"activation", to_string(model.activation)},
              {"weights", std::move(weights)},
              {"biases", std::move(biases)}};
}

MlpModel model_from_json(const Json& j) {
  require(j.is_object() && j.contains("layer_dims") && j.contains("weights") &&
              j.contains("biases"),
          ErrorCode::kValidation, "checkpoint is missing layer_dims, weights or biases");
  std::vector<int> dims = j.at("layer_dims").get<std::vector<int>>();
  for (int d : dims) require(d > 0, ErrorCode::kInputShape, "layer dimensions must be positive");
  const Activation act = activation_from_string(j.value("activation", std::string("relu")));
  MlpModel m = MlpModel::zeros(dims, act);
  const Json& weights = j.at("weights");
  const Json& biases = j.at("biases");
  require(weights.size() == m.num_layers() && biases.size() == m.num_layers(),
          ErrorCode::kInputShape, "checkpoint layer count does not match layer_dims");
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    auto& w = m.weights[l];
    const Json& flat = weights[l];
    require(flat.size() == static_cast<std::size_t>(w.size()), ErrorCode::kInputShape,
            "weight array " + std::to_string(l) + " has wrong length");
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[i++].get<double>();
    const Eigen::VectorXd b = vector_from_json(biases[l]);
    require(b.size() == m.biases[l].size(), ErrorCode::kInputShape,
            "bias array " + std::to_string(l) + " has wrong length");
    m.biases[l] = b;
  }
  m.validate();
  return m;
}

}  // namespace varlab::nn
