#include "hmtm/net_tensor.hpp"

#include "hmtm/kernels.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

namespace hmtm {

NetworkTensor::NetworkTensor(int nodes, int n_layers_)
    : n_nodes(nodes), n_layers(n_layers_), layers(n_layers_, Matrix::Zero(nodes, nodes)) {
  if (nodes <= 0 || n_layers_ <= 0)
    throw std::invalid_argument("tensor dimensions must be positive");
}

bool is_symmetric_layer(const Matrix& layer, double tol) {
  if (layer.rows() != layer.cols()) return false;
  const Eigen::Index n = layer.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(layer(i, i)) > tol) return false;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(layer(i, j))) return false;
      if (std::abs(layer(i, j) - layer(j, i)) > tol) return false;
    }
  }
  return true;
}

void NetworkTensor::validate() const {
  if (n_nodes <= 0 || n_layers <= 0) throw std::invalid_argument("tensor dimensions must be positive");
  if (static_cast<int>(layers.size()) != n_layers)
    throw std::invalid_argument("tensor has " + std::to_string(layers.size()) + " layers, expected " +
                                std::to_string(n_layers));
  if (!node_labels.empty() && static_cast<int>(node_labels.size()) != n_nodes)
    throw std::invalid_argument("node_labels length does not match n_nodes");
  for (int t = 0; t < n_layers; ++t) {
    const Matrix& y = layers[t];
    if (y.rows() != n_nodes || y.cols() != n_nodes)
      throw std::invalid_argument("layer " + std::to_string(t) + " has wrong shape");
    for (int i = 0; i < n_nodes; ++i) {
      if (y(i, i) != 0.0) throw std::invalid_argument("layer " + std::to_string(t) + " has a nonzero diagonal");
      for (int j = 0; j < n_nodes; ++j) {
        if (!std::isfinite(y(i, j)))
          throw std::invalid_argument("layer " + std::to_string(t) + " has a non-finite value");
        if (y(i, j) != y(j, i)) throw std::invalid_argument("layer " + std::to_string(t) + " is not symmetric");
      }
    }
  }
}

std::string to_string(NullModelKind kind) {
  switch (kind) {
    case NullModelKind::None: return "none";
    case NullModelKind::PrincipalEigen: return "eigen";
    case NullModelKind::Modularity: return "modularity";
  }
  return "none";
}

NullModelKind null_model_from_string(const std::string& name) {
  if (name == "none") return NullModelKind::None;
  if (name == "eigen" || name == "principal-eigen") return NullModelKind::PrincipalEigen;
  if (name == "modularity") return NullModelKind::Modularity;
  throw std::invalid_argument("unknown null model '" + name + "' (expected none|eigen|modularity)");
}

Matrix NullModel::omega(int t) const {
  Matrix out;
  switch (kind) {
    case NullModelKind::None:
      throw std::logic_error("omega() on an empty null model");
    case NullModelKind::PrincipalEigen:
      out = lambda[t] * vectors[t] * vectors[t].transpose();
      break;
    case NullModelKind::Modularity:
      out = vectors[t] * vectors[t].transpose() / (2.0 * total_m[t]);
      break;
  }
  out.diagonal().setZero();
  return out;
}

Matrix CorrectedTensor::reconstruct(int t) const {
  if (null_model.kind == NullModelKind::None) return layers[t];
  return layers[t] + null_model.omega(t);
}

NetworkTensor load_tensor(std::span<const Edge> edges, int n_nodes, int n_layers, IndexBase base) {
  NetworkTensor out(n_nodes, n_layers);
  const int offset = base == IndexBase::One ? 1 : 0;
  std::map<std::tuple<int, int, int>, double> seen;
  for (const Edge& e : edges) {
    const int i = e.i - offset, j = e.j - offset, t = e.t - offset;
    if (i < 0 || i >= n_nodes || j < 0 || j >= n_nodes || t < 0 || t >= n_layers)
      throw std::invalid_argument("edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + "," +
                                  std::to_string(e.t) + ") index out of range");
    if (i == j) throw std::invalid_argument("self-loop at node " + std::to_string(e.i));
    if (!std::isfinite(e.value)) throw std::invalid_argument("non-finite edge value");
    const auto key = std::make_tuple(std::min(i, j), std::max(i, j), t);
    if (auto it = seen.find(key); it != seen.end()) {
      if (it->second != e.value)
        throw std::invalid_argument("conflicting duplicate entry for dyad (" + std::to_string(e.i) + "," +
                                    std::to_string(e.j) + ") in layer " + std::to_string(e.t));
      continue;
    }
    seen.emplace(key, e.value);
    out.layers[t](i, j) = e.value;
    out.layers[t](j, i) = e.value;
  }
  return out;
}

EigenPair principal_eigen(const Matrix& layer) {
  const Eigen::Index n = layer.rows();
  if (n == 0 || layer.cols() != n) throw std::invalid_argument("principal_eigen: input must be square and non-empty");
  if (!layer.allFinite()) throw std::invalid_argument("principal_eigen: non-finite input");
  const double tol = 1e-12 * std::max(1.0, layer.cwiseAbs().maxCoeff());
  if ((layer - layer.transpose()).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("principal_eigen: input is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(layer);
  if (solver.info() != Eigen::Success) throw std::runtime_error("principal_eigen: eigensolver did not converge");
  // Eigenvalues come back in ascending order.
  const double lo = solver.eigenvalues()(0);
  const double hi = solver.eigenvalues()(n - 1);
  const double scale = std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
  const bool take_hi = std::abs(hi) >= std::abs(lo) - 1e-12 * scale;
  EigenPair out;
  out.value = take_hi ? hi : lo;
  out.vector = solver.eigenvectors().col(take_hi ? n - 1 : 0);
  out.vector.normalize();
  Eigen::Index arg = 0;
  out.vector.cwiseAbs().maxCoeff(&arg);
  if (out.vector(arg) < 0.0) out.vector = -out.vector;
  return out;
}

CorrectedTensor degree_correct(const NetworkTensor& tensor, NullModelKind kind) {
  tensor.validate();
  if (kind == NullModelKind::None) return uncorrected(tensor);
  CorrectedTensor out;
  out.n_nodes = tensor.n_nodes;
  out.n_layers = tensor.n_layers;
  out.null_model.kind = kind;
  out.layers.resize(tensor.n_layers);
  out.null_model.vectors.resize(tensor.n_layers);
  if (kind == NullModelKind::PrincipalEigen) {
    out.null_model.lambda.resize(tensor.n_layers);
  } else {
    out.null_model.total_m.resize(tensor.n_layers);
    for (int t = 0; t < tensor.n_layers; ++t) {
      const Vector degree = tensor.layers[t].rowwise().sum();
      if (degree.sum() == 0.0)
        throw std::invalid_argument("degenerate layer " + std::to_string(t) + ": total degree is zero");
    }
  }
  kernels::correct_layers(tensor.layers, out.null_model, out.layers);
  return out;
}

CorrectedTensor uncorrected(const NetworkTensor& tensor) {
  tensor.validate();
  CorrectedTensor out;
  out.n_nodes = tensor.n_nodes;
  out.n_layers = tensor.n_layers;
  out.layers = tensor.layers;
  out.null_model.kind = NullModelKind::None;
  return out;
}

}  // namespace hmtm
