#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace hmtm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// N x N x T array of undirected layers: symmetric, zero diagonal, finite.
struct NetworkTensor {
  int n_nodes = 0;
  int n_layers = 0;
  std::vector<Matrix> layers;
  std::vector<std::string> node_labels;  // empty or length n_nodes

  NetworkTensor() = default;
  NetworkTensor(int nodes, int n_layers_);

  double operator()(int i, int j, int t) const { return layers[t](i, j); }

  // Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
};

enum class NullModelKind { None, PrincipalEigen, Modularity };

std::string to_string(NullModelKind kind);
NullModelKind null_model_from_string(const std::string& name);

// Per-layer null model Omega_t subtracted from the raw layer.
struct NullModel {
  NullModelKind kind = NullModelKind::None;
  // PrincipalEigen: `lambda` and unit eigenvector `vectors` per layer.
  // Modularity: degree vector k in `vectors` and m = sum(k) / 2 in `total_m`.
  std::vector<double> lambda;
  std::vector<Vector> vectors;
  std::vector<double> total_m;

  // Omega_t with its diagonal zeroed.
  Matrix omega(int t) const;
};

// B_t = Y_t - Omega_t with the diagonal zeroed.
struct CorrectedTensor {
  int n_nodes = 0;
  int n_layers = 0;
  std::vector<Matrix> layers;
  NullModel null_model;

  // Y_t recovered off the diagonal.
  Matrix reconstruct(int t) const;
};

struct Edge {
  int i = 0;
  int j = 0;
  int t = 0;
  double value = 1.0;
};

enum class IndexBase { Zero, One };

// Builds a symmetric tensor from an edge list. Unlisted dyads are zero.
// Throws on out-of-range indices, self-loops, non-finite values, and
// conflicting duplicates of the same dyad-layer.
NetworkTensor load_tensor(std::span<const Edge> edges, int n_nodes, int n_layers,
                          IndexBase base = IndexBase::Zero);

struct EigenPair {
  double value = 0.0;
  Vector vector;
};

// Eigenpair whose eigenvalue has the largest magnitude. Ties in magnitude go to
// the positive eigenvalue; the vector is unit length with its largest-magnitude
// component positive.
EigenPair principal_eigen(const Matrix& layer);

CorrectedTensor degree_correct(const NetworkTensor& tensor, NullModelKind kind);

// Tensor with a zero null model, B == Y.
CorrectedTensor uncorrected(const NetworkTensor& tensor);

// Checks the symmetric/zero-diagonal/finite layer invariants with a tolerance.
bool is_symmetric_layer(const Matrix& layer, double tol = 0.0);

}  // namespace hmtm
