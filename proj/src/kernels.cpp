#include "hmtm/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace hmtm::kernels {

namespace {

// Per-element bodies shared by the serial and parallel loops.

void correct_one(const Matrix& y, NullModelKind kind, double& lambda, Vector& vec, double& total_m, Matrix& out) {
  switch (kind) {
    case NullModelKind::PrincipalEigen: {
      const EigenPair pair = principal_eigen(y);
      lambda = pair.value;
      vec = pair.vector;
      out = y - lambda * vec * vec.transpose();
      break;
    }
    case NullModelKind::Modularity: {
      vec = y.rowwise().sum();
      total_m = vec.sum() / 2.0;
      out = y - vec * vec.transpose() / (2.0 * total_m);
      break;
    }
    case NullModelKind::None:
      out = y;
      break;
  }
  out.diagonal().setZero();
  // Rank-1 updates are symmetric in exact arithmetic; make it exact in floating point.
  const Eigen::Index n = out.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) out(j, i) = out(i, j);
}

double lu_entry_row(const Matrix& b, const Matrix& U, Eigen::Index i, Eigen::Index r, double beta) {
  double s = 0.0;
  const Eigen::Index n = b.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == i) continue;
    s += (b(i, j) - beta) * U(j, r);
  }
  return s;
}

void lu_row(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, const Matrix& V,
            const Vector& weights, double beta, Eigen::Index i, Matrix& L) {
  const Eigen::Index R = U.cols();
  for (Eigen::Index r = 0; r < R; ++r) {
    double acc = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const int t = idx[k];
      acc += weights(t) * V(t, r) * lu_entry_row(layers[t], U, i, r, beta);
    }
    L(i, r) = acc;
  }
}

void lv_row(const Matrix& b, const Matrix& U, double beta, Eigen::Index k, Matrix& L) {
  const Eigen::Index n = b.rows();
  const Eigen::Index R = U.cols();
  for (Eigen::Index r = 0; r < R; ++r) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) acc += (b(i, j) - beta) * U(i, r) * U(j, r);
    L(k, r) = acc;
  }
}

void prepare_null_model(NullModel& nm, std::size_t T) {
  nm.vectors.resize(T);
  if (nm.kind == NullModelKind::PrincipalEigen) nm.lambda.resize(T);
  if (nm.kind == NullModelKind::Modularity) nm.total_m.resize(T);
}

void check_states(std::span<const Matrix> layers, std::span<const int> states) {
  if (states.size() != layers.size()) throw std::invalid_argument("path_ssr: states length differs from T");
}

}  // namespace

double layer_ssr(const Matrix& layer, const Matrix& U, const Vector& v, double beta) {
  const Eigen::Index n = layer.rows();
  const Eigen::Index R = U.cols();
  double ssr = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double mu = 0.0;
      for (Eigen::Index r = 0; r < R; ++r) mu += U(i, r) * v(r) * U(j, r);
      const double e = layer(i, j) - beta - mu;
      ssr += e * e;
    }
  }
  return ssr;
}

double layer_residual_sum(const Matrix& layer, const Matrix& U, const Vector& v) {
  const Eigen::Index n = layer.rows();
  const Eigen::Index R = U.cols();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double mu = 0.0;
      for (Eigen::Index r = 0; r < R; ++r) mu += U(i, r) * v(r) * U(j, r);
      sum += layer(i, j) - mu;
    }
  }
  return sum;
}

namespace serial {

void correct_layers(std::span<const Matrix> raw, NullModel& nm, std::vector<Matrix>& out) {
  const std::size_t T = raw.size();
  prepare_null_model(nm, T);
  out.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    double lambda = 0.0, m = 0.0;
    correct_one(raw[t], nm.kind, lambda, nm.vectors[t], m, out[t]);
    if (nm.kind == NullModelKind::PrincipalEigen) nm.lambda[t] = lambda;
    if (nm.kind == NullModelKind::Modularity) nm.total_m[t] = m;
  }
}

Matrix regime_ssr(std::span<const Matrix> layers, std::span<const Matrix> U, const Matrix& V, double beta) {
  const auto T = static_cast<Eigen::Index>(layers.size());
  const auto M = static_cast<Eigen::Index>(U.size());
  Matrix out(T, M);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index m = 0; m < M; ++m) out(t, m) = layer_ssr(layers[t], U[m], V.row(t).transpose(), beta);
  return out;
}

Vector path_ssr(std::span<const Matrix> layers, std::span<const Matrix> U, std::span<const int> states,
                const Matrix& V, double beta) {
  check_states(layers, states);
  const auto T = static_cast<Eigen::Index>(layers.size());
  Vector out(T);
  for (Eigen::Index t = 0; t < T; ++t) out(t) = layer_ssr(layers[t], U[states[t]], V.row(t).transpose(), beta);
  return out;
}

Matrix accumulate_lu(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, const Matrix& V,
                     const Vector& weights, double beta) {
  Matrix L(U.rows(), U.cols());
  for (Eigen::Index i = 0; i < U.rows(); ++i) lu_row(layers, idx, U, V, weights, beta, i, L);
  return L;
}

Matrix accumulate_lv(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, double beta) {
  Matrix L(static_cast<Eigen::Index>(idx.size()), U.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) lv_row(layers[idx[k]], U, beta, static_cast<Eigen::Index>(k), L);
  return L;
}

}  // namespace serial

namespace parallel {

void correct_layers(std::span<const Matrix> raw, NullModel& nm, std::vector<Matrix>& out) {
  const auto T = static_cast<long>(raw.size());
  prepare_null_model(nm, raw.size());
  out.resize(raw.size());
  bool failed = false;
  std::string message;
#pragma omp parallel for schedule(static)
  for (long t = 0; t < T; ++t) {
    try {
      double lambda = 0.0, m = 0.0;
      correct_one(raw[t], nm.kind, lambda, nm.vectors[t], m, out[t]);
      if (nm.kind == NullModelKind::PrincipalEigen) nm.lambda[t] = lambda;
      if (nm.kind == NullModelKind::Modularity) nm.total_m[t] = m;
    } catch (const std::exception& e) {
#pragma omp critical(hmtm_kernel_error)
      {
        if (!failed) message = "layer " + std::to_string(t) + ": " + e.what();
        failed = true;
      }
    }
  }
  if (failed) throw std::runtime_error(message);
}

Matrix regime_ssr(std::span<const Matrix> layers, std::span<const Matrix> U, const Matrix& V, double beta) {
  const auto T = static_cast<long>(layers.size());
  const auto M = static_cast<long>(U.size());
  Matrix out(T, M);
#pragma omp parallel for collapse(2) schedule(static)
  for (long t = 0; t < T; ++t)
    for (long m = 0; m < M; ++m) out(t, m) = layer_ssr(layers[t], U[m], V.row(t).transpose(), beta);
  return out;
}

Vector path_ssr(std::span<const Matrix> layers, std::span<const Matrix> U, std::span<const int> states,
                const Matrix& V, double beta) {
  check_states(layers, states);
  const auto T = static_cast<long>(layers.size());
  Vector out(T);
#pragma omp parallel for schedule(static)
  for (long t = 0; t < T; ++t) out(t) = layer_ssr(layers[t], U[states[t]], V.row(t).transpose(), beta);
  return out;
}

Matrix accumulate_lu(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, const Matrix& V,
                     const Vector& weights, double beta) {
  Matrix L(U.rows(), U.cols());
  const long n = static_cast<long>(U.rows());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) lu_row(layers, idx, U, V, weights, beta, i, L);
  return L;
}

Matrix accumulate_lv(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, double beta) {
  const auto K = static_cast<long>(idx.size());
  Matrix L(K, U.cols());
#pragma omp parallel for schedule(static)
  for (long k = 0; k < K; ++k) lv_row(layers[idx[k]], U, beta, k, L);
  return L;
}

}  // namespace parallel

#if defined(_OPENMP)
namespace active = parallel;
#else
namespace active = serial;
#endif

void correct_layers(std::span<const Matrix> raw, NullModel& nm, std::vector<Matrix>& out) {
  active::correct_layers(raw, nm, out);
}
Matrix regime_ssr(std::span<const Matrix> layers, std::span<const Matrix> U, const Matrix& V, double beta) {
  return active::regime_ssr(layers, U, V, beta);
}
Vector path_ssr(std::span<const Matrix> layers, std::span<const Matrix> U, std::span<const int> states,
                const Matrix& V, double beta) {
  return active::path_ssr(layers, U, states, V, beta);
}
Matrix accumulate_lu(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, const Matrix& V,
                     const Vector& weights, double beta) {
  return active::accumulate_lu(layers, idx, U, V, weights, beta);
}
Matrix accumulate_lv(std::span<const Matrix> layers, std::span<const int> idx, const Matrix& U, double beta) {
  return active::accumulate_lv(layers, idx, U, beta);
}

int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace hmtm::kernels
