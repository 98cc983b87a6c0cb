#include <doctest.h>

#include "hmtm/kernels.hpp"
#include "hmtm/net_tensor.hpp"
#include "hmtm/sampler.hpp"
#include "oracles.hpp"

#include <omp.h>

using namespace hmtm;

namespace {

struct Problem {
  CorrectedTensor B;
  std::vector<Matrix> U;
  Matrix V;
  std::vector<int> states;
  std::vector<int> idx;
  Vector w;
};

Problem make(Rng& rng) {
  Problem p;
  const int N = 3 + static_cast<int>(rng.uniform_index(30));
  const int T = 1 + static_cast<int>(rng.uniform_index(12));
  const int R = 1 + static_cast<int>(rng.uniform_index(3));
  const int M = 1 + static_cast<int>(rng.uniform_index(std::min(T, 3)));
  p.B = oracle::random_tensor(N, T, 1.0, rng);
  const HmtmState s = oracle::random_state(N, T, R, M, rng);
  p.U = s.U;
  p.V = s.V;
  p.states = s.path.states;
  for (int t = 0; t < T; ++t)
    if (rng.bernoulli(0.6)) p.idx.push_back(t);
  if (p.idx.empty()) p.idx.push_back(0);
  p.w = Vector::Zero(T);
  for (int t = 0; t < T; ++t) p.w(t) = 0.5 + rng.uniform();
  return p;
}

}  // namespace

TEST_CASE("serial and parallel kernels agree bitwise") {
  omp_set_num_threads(4);
  Rng rng(51);
  for (int rep = 0; rep < 1000; ++rep) {
    const Problem p = make(rng);
    const double beta = rng.normal();
    CHECK(kernels::serial::regime_ssr(p.B.layers, p.U, p.V, beta) ==
          kernels::parallel::regime_ssr(p.B.layers, p.U, p.V, beta));
    CHECK(kernels::serial::path_ssr(p.B.layers, p.U, p.states, p.V, beta) ==
          kernels::parallel::path_ssr(p.B.layers, p.U, p.states, p.V, beta));
    CHECK(kernels::serial::accumulate_lu(p.B.layers, p.idx, p.U[0], p.V, p.w, beta) ==
          kernels::parallel::accumulate_lu(p.B.layers, p.idx, p.U[0], p.V, p.w, beta));
    CHECK(kernels::serial::accumulate_lv(p.B.layers, p.idx, p.U[0], beta) ==
          kernels::parallel::accumulate_lv(p.B.layers, p.idx, p.U[0], beta));
  }
}

TEST_CASE("serial and parallel degree correction agree bitwise") {
  omp_set_num_threads(4);
  Rng rng(52);
  for (int rep = 0; rep < 200; ++rep) {
    const int N = 3 + static_cast<int>(rng.uniform_index(20)), T = 1 + static_cast<int>(rng.uniform_index(8));
    std::vector<Matrix> raw;
    for (int t = 0; t < T; ++t) {
      Matrix L = Matrix::Zero(N, N);
      for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j)
          if (rng.bernoulli(0.3)) L(i, j) = L(j, i) = 1.0;
      L(0, 1) = L(1, 0) = 1.0;
      raw.push_back(L);
    }
    for (NullModelKind kind : {NullModelKind::PrincipalEigen, NullModelKind::Modularity}) {
      NullModel a, b;
      a.kind = b.kind = kind;
      std::vector<Matrix> oa, ob;
      kernels::serial::correct_layers(raw, a, oa);
      kernels::parallel::correct_layers(raw, b, ob);
      for (int t = 0; t < T; ++t) CHECK(oa[t] == ob[t]);
      CHECK(a.lambda == b.lambda);
      CHECK(a.total_m == b.total_m);
    }
  }
}

TEST_CASE("kernels match naive loops") {
  Rng rng(53);
  for (int rep = 0; rep < 100; ++rep) {
    const Problem p = make(rng);
    const double beta = rng.normal();
    const Matrix table = kernels::regime_ssr(p.B.layers, p.U, p.V, beta);
    for (int t = 0; t < p.B.n_layers; ++t)
      for (std::size_t m = 0; m < p.U.size(); ++m)
        CHECK(table(t, m) ==
              doctest::Approx(oracle::naive_ssr(p.B.layers[t], p.U[m], p.V.row(t).transpose(), beta)).epsilon(1e-12));

    const Matrix& U = p.U[0];
    const int N = p.B.n_nodes, R = static_cast<int>(U.cols());
    const Matrix lv = kernels::accumulate_lv(p.B.layers, p.idx, U, beta);
    const Matrix lu = kernels::accumulate_lu(p.B.layers, p.idx, U, p.V, p.w, beta);
    Matrix lv_ref = Matrix::Zero(static_cast<Eigen::Index>(p.idx.size()), R);
    Matrix lu_ref = Matrix::Zero(N, R);
    for (std::size_t k = 0; k < p.idx.size(); ++k) {
      const int t = p.idx[k];
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
          if (i == j) continue;
          const double b = p.B.layers[t](i, j) - beta;
          for (int r = 0; r < R; ++r) {
            if (i < j) lv_ref(k, r) += b * U(i, r) * U(j, r);
            lu_ref(i, r) += p.w(t) * p.V(t, r) * b * U(j, r);
          }
        }
    }
    CHECK((lv - lv_ref).cwiseAbs().maxCoeff() <= 1e-10 * (1 + lv_ref.cwiseAbs().maxCoeff()));
    CHECK((lu - lu_ref).cwiseAbs().maxCoeff() <= 1e-10 * (1 + lu_ref.cwiseAbs().maxCoeff()));

    const Vector v = p.V.row(0).transpose();
    double rsum = 0;
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j) {
        double fit = 0;
        for (int r = 0; r < R; ++r) fit += U(i, r) * v(r) * U(j, r);
        rsum += p.B.layers[0](i, j) - fit;
      }
    CHECK(kernels::layer_residual_sum(p.B.layers[0], U, v) == doctest::Approx(rsum).epsilon(1e-12));
  }
}

TEST_CASE("a chain does not depend on the thread count") {
  Rng rng(54);
  const CorrectedTensor B = oracle::random_tensor(12, 10, 1.0, rng);
  HmtmConfig c;
  c.n_breaks = 1;
  c.burnin = 20;
  c.mcmc = 20;
  omp_set_num_threads(1);
  const McmcTrace a = fit_hmtm(B, c);
  omp_set_num_threads(4);
  const McmcTrace b = fit_hmtm(B, c);
  CHECK(a.loglayer == b.loglayer);
}
