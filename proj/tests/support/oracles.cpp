#include "oracles.hpp"

#include "hmtm/diagnostics.hpp"
#include "hmtm/gibbs.hpp"
#include "hmtm/marginal.hpp"
#include "hmtm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

namespace hmtm::oracle {

bool Moments::ok(double k) const { return std::abs(z_mean) <= k && std::abs(z_var) <= k; }

Moments moments(const std::vector<double>& x, double mean, double var) {
  const double n = static_cast<double>(x.size());
  double m = 0;
  for (double v : x) m += v;
  m /= n;
  double m2 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const double s2 = m2 / (n - 1);
  m4 /= n;
  Moments out;
  out.mean = m;
  out.var = s2;
  out.z_mean = (m - mean) / std::sqrt(var / n);
  out.z_var = (s2 - var) / std::sqrt(std::max(m4 - s2 * s2, 1e-300) / n);
  return out;
}

CorrectedTensor random_tensor(int N, int T, double scale, Rng& rng) {
  CorrectedTensor B;
  B.n_nodes = N;
  B.n_layers = T;
  for (int t = 0; t < T; ++t) {
    Matrix L = Matrix::Zero(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j) L(i, j) = L(j, i) = scale * rng.normal();
    B.layers.push_back(L);
  }
  return B;
}

HmtmState random_state(int N, int T, int R, int M, Rng& rng) {
  HmtmState s;
  for (int m = 0; m < M; ++m) {
    Matrix U(N, R);
    for (int i = 0; i < N; ++i)
      for (int r = 0; r < R; ++r) U(i, r) = rng.normal();
    gibbs::orthogonalize_columns(U);
    s.U.push_back(U);
    Vector mu(R), pu(R), mv(R), pv(R);
    for (int r = 0; r < R; ++r) {
      mu(r) = 0.3 * rng.normal();
      mv(r) = 0.3 * rng.normal();
      pu(r) = 0.5 + rng.uniform();
      pv(r) = 0.5 + rng.uniform();
    }
    s.mu_u.push_back(mu);
    s.psi_u.push_back(pu);
    s.mu_v.push_back(mv);
    s.psi_v.push_back(pv);
    s.sigma2.push_back(0.5 + rng.uniform());
  }
  s.V.resize(T, R);
  for (int t = 0; t < T; ++t)
    for (int r = 0; r < R; ++r) s.V(t, r) = rng.normal();
  s.gamma = Vector::Ones(T);
  s.path.states.resize(T);
  for (int t = 0; t < T; ++t) s.path.states[t] = (t * M) / T;
  std::vector<double> stay(M - 1);
  for (double& p : stay) p = 0.5 + 0.45 * rng.uniform();
  s.path.transition = gibbs::transition_from_diagonal(stay);
  return s;
}

double naive_ssr(const Matrix& layer, const Matrix& U, const Vector& v, double beta) {
  double ssr = 0;
  for (Eigen::Index i = 0; i < layer.rows(); ++i)
    for (Eigen::Index j = i + 1; j < layer.cols(); ++j) {
      double fit = beta;
      for (Eigen::Index r = 0; r < U.cols(); ++r) fit += U(i, r) * v(r) * U(j, r);
      const double e = layer(i, j) - fit;
      ssr += e * e;
    }
  return ssr;
}

namespace {

double cells(int n) { return n * (n - 1) / 2.0; }

double ig_mean(double a, double b) { return b / (a - 1); }
double ig_var(double a, double b) { return b * b / ((a - 1) * (a - 1) * (a - 2)); }

void add_check(std::vector<Check>& out, const std::string& name, const std::vector<double>& x, double mean,
               double var) {
  const Moments mo = moments(x, mean, var);
  std::ostringstream d;
  d << "mean " << mo.mean << " vs " << mean << " (z " << mo.z_mean << "), var " << mo.var << " vs " << var
    << " (z " << mo.z_var << ")";
  out.push_back({name, mo.ok(), d.str()});
}

double log_layer(double ssr, double D, double sigma2, double gamma) {
  return -0.5 * D * std::log(2 * std::numbers::pi * sigma2 / gamma) - 0.5 * gamma * ssr / sigma2;
}

void for_each_path(int T, int M, bool terminal, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> path(T, 0);
  std::function<void(int)> rec = [&](int t) {
    if (t == T) {
      if (!terminal || path.back() == M - 1) f(path);
      return;
    }
    for (int step = 0; step <= 1; ++step) {
      const int s = path[t - 1] + step;
      if (s >= M) continue;
      path[t] = s;
      rec(t + 1);
    }
  };
  if (T == 1) {
    if (!terminal || M == 1) f(path);
    return;
  }
  rec(1);
}

double path_log_weight(const CorrectedTensor& B, const HmtmState& s, const std::vector<int>& path) {
  const double D = cells(B.n_nodes);
  double lw = 0;
  for (int t = 0; t < B.n_layers; ++t) {
    const int m = path[t];
    lw += log_layer(naive_ssr(B.layers[t], s.U[m], s.V.row(t).transpose(), s.beta), D, s.sigma2[m], s.gamma(t));
    if (t > 0) lw += std::log(s.path.transition(path[t - 1], m));
  }
  return lw;
}

}  // namespace

std::vector<Check> conditional_moment_suite(std::uint64_t seed, int draws) {
  std::vector<Check> out;
  Rng rng(seed);
  Rng data_rng = Rng::stream(seed, 1);
  Priors pr;
  pr.u0 = 4;
  pr.u1 = 2;
  pr.v0 = 4;
  pr.v1 = 3;
  pr.c0 = 2;
  pr.d0 = 1.5;
  pr.nu0 = 3;
  pr.nu1 = 2;
  pr.a0 = 2.5;
  pr.b0 = 1.5;
  pr.beta_mean = 0.2;
  pr.beta_var = 4;

  // psi_u: IG((u0 + N)/2, (u1 + u_r'u_r)/2)
  {
    const int N = 20;
    Matrix U(N, 2);
    for (int i = 0; i < N; ++i) U.row(i) << data_rng.normal(), 0.5 * data_rng.normal();
    std::vector<std::vector<double>> x(2);
    for (int k = 0; k < draws; ++k) {
      const Vector d = gibbs::sample_psi_u(U, pr, rng);
      x[0].push_back(d(0));
      x[1].push_back(d(1));
    }
    for (int r = 0; r < 2; ++r) {
      const double a = (pr.u0 + N) / 2, b = (pr.u1 + U.col(r).squaredNorm()) / 2;
      add_check(out, "psi_u[" + std::to_string(r) + "]", x[r], ig_mean(a, b), ig_var(a, b));
    }
  }
  // psi_v: IG((v0 + T_m)/2, (v1 + v_r'v_r)/2) over the regime's rows
  {
    const int Tm = 15;
    Matrix Vm(Tm, 2);
    for (int t = 0; t < Tm; ++t) Vm.row(t) << 1 + data_rng.normal(), data_rng.normal();
    std::vector<std::vector<double>> x(2);
    for (int k = 0; k < draws; ++k) {
      const Vector d = gibbs::sample_psi_v(Vm, pr, rng);
      x[0].push_back(d(0));
      x[1].push_back(d(1));
    }
    for (int r = 0; r < 2; ++r) {
      const double a = (pr.v0 + Tm) / 2, b = (pr.v1 + Vm.col(r).squaredNorm()) / 2;
      add_check(out, "psi_v[" + std::to_string(r) + "]", x[r], ig_mean(a, b), ig_var(a, b));
    }
  }
  // mu_u and mu_v: N((X'1 + mu0)/(n + 1), psi/(n + 1))
  for (const char* which : {"mu_u", "mu_v"}) {
    const int n = std::string(which) == "mu_u" ? 6 : 9;
    Matrix X(n, 2);
    for (int i = 0; i < n; ++i) X.row(i) << data_rng.normal(), 2 + data_rng.normal();
    Vector psi(2), mu0(2);
    psi << 0.7, 1.9;
    mu0 << 0.5, -1.0;
    std::vector<std::vector<double>> x(2);
    for (int k = 0; k < draws; ++k) {
      const Vector d = std::string(which) == "mu_u" ? gibbs::sample_mu_u(X, psi, mu0, rng)
                                                    : gibbs::sample_mu_v(X, psi, mu0, rng);
      x[0].push_back(d(0));
      x[1].push_back(d(1));
    }
    for (int r = 0; r < 2; ++r)
      add_check(out, std::string(which) + "[" + std::to_string(r) + "]", x[r], (X.col(r).sum() + mu0(r)) / (n + 1),
                psi(r) / (n + 1));
  }

  // Blocks that need data: a small tensor and state with two regimes.
  const int N = 5, T = 6, R = 2, M = 2;
  const CorrectedTensor B = random_tensor(N, T, 1.0, data_rng);
  HmtmState s = random_state(N, T, R, M, data_rng);
  s.beta = 0.3;
  for (int t = 0; t < T; ++t) s.gamma(t) = 0.5 + data_rng.uniform();
  const double D = cells(N);

  // sigma2_m: IG((c0 + E_m)/2, (d0 + sum gamma_t SSR_t)/2)
  for (int m = 0; m < M; ++m) {
    double ssr = 0, layers = 0;
    for (int t = 0; t < T; ++t)
      if (s.path.states[t] == m) {
        ssr += s.gamma(t) * naive_ssr(B.layers[t], s.U[m], s.V.row(t).transpose(), s.beta);
        ++layers;
      }
    const double a = (pr.c0 + D * layers) / 2, b = (pr.d0 + ssr) / 2;
    std::vector<double> x;
    for (int k = 0; k < draws; ++k) x.push_back(gibbs::sample_sigma2(B, s, m, pr, rng));
    add_check(out, "sigma2[" + std::to_string(m) + "]", x, ig_mean(a, b), ig_var(a, b));
  }
  // beta: precision 1/B0 + sum_t gamma_t D / sigma2, mean from the residual sums
  {
    double prec = 1 / pr.beta_var, lin = pr.beta_mean / pr.beta_var;
    for (int t = 0; t < T; ++t) {
      const int m = s.path.states[t];
      const double w = s.gamma(t) / s.sigma2[m];
      double rsum = 0;
      for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j) {
          double fit = 0;
          for (int r = 0; r < R; ++r) fit += s.U[m](i, r) * s.V(t, r) * s.U[m](j, r);
          rsum += B.layers[t](i, j) - fit;
        }
      prec += w * D;
      lin += w * rsum;
    }
    std::vector<double> x;
    for (int k = 0; k < draws; ++k) x.push_back(gibbs::sample_beta(B, s, pr, rng));
    add_check(out, "beta", x, lin / prec, 1 / prec);
  }
  // gamma_t: Gamma((nu0 + D)/2, rate (nu1 + SSR_t / sigma2)/2)
  {
    std::vector<std::vector<double>> x(T);
    for (int k = 0; k < draws; ++k) {
      const Vector g = gibbs::sample_gamma(B, s, pr, rng);
      for (int t = 0; t < T; ++t) x[t].push_back(g(t));
    }
    for (int t : {0, T - 1}) {
      const int m = s.path.states[t];
      const double a = (pr.nu0 + D) / 2;
      const double b = (pr.nu1 + naive_ssr(B.layers[t], s.U[m], s.V.row(t).transpose(), s.beta) / s.sigma2[m]) / 2;
      add_check(out, "gamma[" + std::to_string(t) + "]", x[t], a / b, a / (b * b));
    }
  }
  // p_kk: Beta(a0 + j_kk - 1, b0 + j_k,k+1)
  {
    const std::vector<int> path{0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2};
    std::vector<std::vector<double>> x(2);
    for (int k = 0; k < draws; ++k) {
      const Matrix P = gibbs::sample_transition(path, 3, pr, rng);
      x[0].push_back(P(0, 0));
      x[1].push_back(P(1, 1));
    }
    const int stays[2] = {4, 3};
    for (int k = 0; k < 2; ++k) {
      const double a = pr.a0 + stays[k] - 1, b = pr.b0 + 1;
      add_check(out, "p_" + std::to_string(k + 1) + std::to_string(k + 1), x[k], a / (a + b),
                a * b / ((a + b) * (a + b) * (a + b + 1)));
    }
  }
  return out;
}

std::vector<PathFrequency> enumerate_paths(const CorrectedTensor& B, const HmtmState& s) {
  const int M = s.n_regimes();
  std::vector<PathFrequency> out;
  std::vector<double> lw;
  for_each_path(B.n_layers, M, true, [&](const std::vector<int>& p) {
    out.push_back({p, 0, 0, 0});
    lw.push_back(path_log_weight(B, s, p));
  });
  const double hi = *std::max_element(lw.begin(), lw.end());
  double z = 0;
  for (double w : lw) z += std::exp(w - hi);
  for (std::size_t k = 0; k < out.size(); ++k) out[k].expected = std::exp(lw[k] - hi) / z;
  return out;
}

double brute_force_loglik(const CorrectedTensor& B, const HmtmState& s) {
  std::vector<double> lw;
  for_each_path(B.n_layers, s.n_regimes(), false,
                [&](const std::vector<int>& p) { lw.push_back(path_log_weight(B, s, p)); });
  const double hi = *std::max_element(lw.begin(), lw.end());
  double z = 0;
  for (double w : lw) z += std::exp(w - hi);
  return hi + std::log(z);
}

std::vector<PathFrequency> ffbs_enumeration(int N, int T, int M, std::uint64_t seed, int draws) {
  Rng data_rng = Rng::stream(seed, 1);
  const CorrectedTensor B = random_tensor(N, T, 1.0, data_rng);
  HmtmState s = random_state(N, T, 2, M, data_rng);
  for (double& v : s.sigma2) v = 1.5;  // keeps the path posterior spread out
  std::vector<PathFrequency> paths = enumerate_paths(B, s);
  std::map<std::vector<int>, int> counts;
  Rng rng(seed);
  for (int k = 0; k < draws; ++k) ++counts[gibbs::sample_states(B, s, rng).states];
  for (PathFrequency& p : paths) {
    p.observed = static_cast<double>(counts[p.path]) / draws;
    const double se = std::sqrt(std::max(p.expected * (1 - p.expected), 1e-300) / draws);
    p.z = (p.observed - p.expected) / se;
  }
  return paths;
}

ToyResult conjugate_toy(std::uint64_t seed, int burnin, int mcmc) {
  Rng data_rng = Rng::stream(seed, 1);
  const int N = 3, T = 2;
  Matrix U(N, 1);
  U << 0.8, -0.5, 0.3;
  Matrix V(T, 1);
  V << 1.5, -0.7;
  CorrectedTensor B;
  B.n_nodes = N;
  B.n_layers = T;
  for (int t = 0; t < T; ++t) {
    Matrix L = U * V(t, 0) * U.transpose();
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j) L(j, i) = L(i, j) = L(i, j) + 0.6 * data_rng.normal();
    L.diagonal().setZero();
    B.layers.push_back(L);
  }

  HmtmConfig c;
  c.n_breaks = 0;
  c.rank = 1;
  c.burnin = burnin;
  c.mcmc = mcmc;
  c.seed = seed;
  c.fixed.U = std::vector<Matrix>{U};
  c.fixed.V = V;
  c.fixed.mu_u = std::vector<Vector>{Vector::Zero(1)};
  c.fixed.psi_u = std::vector<Vector>{Vector::Ones(1)};
  c.fixed.mu_v = std::vector<Vector>{Vector::Zero(1)};
  c.fixed.psi_v = std::vector<Vector>{Vector::Ones(1)};

  double ssr = 0;
  for (int t = 0; t < T; ++t) ssr += naive_ssr(B.layers[t], U, V.row(t).transpose(), 0.0);
  const double n = N * (N - 1) / 2.0 * T;
  const double a = c.priors.c0 / 2, b = c.priors.d0 / 2;
  const double log_m = -0.5 * n * std::log(2 * std::numbers::pi) + std::lgamma(a + n / 2) - std::lgamma(a) +
                       a * std::log(b) - (a + n / 2) * std::log(b + ssr / 2);

  const McmcTrace trace = fit_hmtm(B, c);
  const MarginalLikelihood ml = chib_marginal_likelihood(B, c, trace);
  return {-2 * log_m, ml.neg2_log_marginal()};
}

std::vector<Check> invariant_suite(std::uint64_t seed, int cases) {
  Rng rng(seed);
  std::vector<Check> out;
  auto report = [&](const std::string& name, int bad, int total) {
    out.push_back({name, bad == 0, std::to_string(bad) + " violations in " + std::to_string(total) + " cases"});
  };
  auto randint = [&](int lo, int hi) { return lo + static_cast<int>(rng.uniform_index(hi - lo + 1)); };
  auto random_path = [&](int T, int M) {
    std::vector<int> pos(T - 1);
    for (int k = 0; k < T - 1; ++k) pos[k] = k + 1;
    for (int k = 0; k < M - 1; ++k) std::swap(pos[k], pos[k + rng.uniform_index(T - 1 - k)]);
    std::vector<int> starts(pos.begin(), pos.begin() + (M - 1));
    std::sort(starts.begin(), starts.end());
    std::vector<int> s(T, 0);
    for (int t = 0, m = 0; t < T; ++t) {
      while (m < M - 1 && t >= starts[m]) ++m;
      s[t] = m;
    }
    return s;
  };

  // Path monotonicity: repair_path, perturb_singletons and backward sampling.
  {
    int bad = 0;
    for (int c = 0; c < cases; ++c) {
      const int T = randint(2, 30), M = randint(1, std::min(T, 5));
      std::vector<int> votes(T);
      for (int& v : votes) v = randint(0, M - 1);
      if (!is_valid_path(repair_path(votes, M), M)) ++bad;
      const std::vector<int> p = random_path(T, M);
      std::vector<double> w(M);
      for (double& x : w) x = 0.1 + rng.uniform();
      double tot = 0;
      for (double x : w) tot += x;
      for (double& x : w) x /= tot;
      if (!is_valid_path(gibbs::perturb_singletons(p, M, std::vector<double>(M, 1.0 / M), rng), M)) ++bad;
      if (!is_valid_path(gibbs::perturb_singletons(p, M, w, rng), M)) ++bad;
      Matrix ll(T, M);
      for (int t = 0; t < T; ++t)
        for (int m = 0; m < M; ++m) ll(t, m) = 5 * rng.normal();
      std::vector<double> stay(M - 1);
      for (double& x : stay) x = 0.05 + 0.9 * rng.uniform();
      const Matrix P = gibbs::transition_from_diagonal(stay);
      if (!is_valid_path(gibbs::backward_sample(gibbs::forward_filter(ll, P), P, rng), M)) ++bad;
    }
    report("path monotonicity", bad, cases);
  }
  // Transition structure of sampled P.
  {
    int bad = 0;
    Priors pr;
    for (int c = 0; c < cases; ++c) {
      const int T = randint(2, 40), M = randint(1, std::min(T, 5));
      const std::vector<int> p = random_path(T, M);
      const Matrix P = gibbs::sample_transition(p, M, pr, rng);
      RegimePath path{p, P};
      try {
        path.validate(M);
      } catch (const std::logic_error&) {
        ++bad;
        continue;
      }
      for (int k = 0; k < M; ++k)
        if (std::abs(P.row(k).sum() - 1.0) > 1e-15) ++bad;
    }
    report("transition structure", bad, cases);
  }
  // U orthogonality after the row-wise update.
  {
    int bad = 0;
    for (int c = 0; c < cases; ++c) {
      const int N = randint(3, 8), T = randint(1, 4), R = randint(1, std::min(N - 1, 3));
      const CorrectedTensor B = random_tensor(N, T, 1.0, rng);
      const HmtmState s = random_state(N, T, R, 1, rng);
      const Matrix U = gibbs::sample_U_rowwise(B, s, 0, rng);
      for (int r = 0; r < R; ++r)
        for (int q = r + 1; q < R; ++q)
          if (std::abs(U.col(r).dot(U.col(q))) > 1e-8 * U.col(r).norm() * U.col(q).norm()) ++bad;
    }
    report("U orthogonality", bad, cases);
  }
  // Correction: symmetric zero-diagonal output and exact reconstruction.
  {
    int bad = 0;
    for (int c = 0; c < cases; ++c) {
      const int N = randint(2, 12), T = randint(1, 3);
      NetworkTensor Y(N, T);
      for (int t = 0; t < T; ++t) {
        for (int i = 0; i < N; ++i)
          for (int j = i + 1; j < N; ++j)
            if (rng.bernoulli(0.4)) Y.layers[t](i, j) = Y.layers[t](j, i) = c % 2 ? 1.0 : 0.5 + rng.uniform();
        if (Y.layers[t].sum() == 0) Y.layers[t](0, 1) = Y.layers[t](1, 0) = 1.0;
      }
      for (NullModelKind kind : {NullModelKind::PrincipalEigen, NullModelKind::Modularity}) {
        const CorrectedTensor Bc = degree_correct(Y, kind);
        for (int t = 0; t < T; ++t) {
          if (!is_symmetric_layer(Bc.layers[t], 1e-12)) ++bad;
          Matrix back = Bc.reconstruct(t);
          back.diagonal().setZero();
          if ((back - Y.layers[t]).cwiseAbs().maxCoeff() > 1e-10) ++bad;
        }
      }
    }
    report("correction symmetry and round trip", bad, cases);
  }
  // WAIC penalty and average loss are non-negative.
  {
    int bad = 0;
    for (int c = 0; c < cases; ++c) {
      const int G = randint(2, 50), T = randint(1, 10);
      Matrix ll(G, T);
      const double scale = std::exp(4 * rng.normal());
      for (int g = 0; g < G; ++g)
        for (int t = 0; t < T; ++t) ll(g, t) = -100 + scale * rng.normal();
      if (!(waic_penalty(ll) >= 0) || !std::isfinite(waic(ll))) ++bad;
    }
    report("WAIC penalty >= 0", bad, cases);
  }
  {
    int bad = 0;
    for (int c = 0; c < cases; ++c) {
      const int G = randint(1, 50), T = randint(3, 40), M = randint(2, std::min(T, 5));
      Eigen::MatrixXi bp(G, M - 1);
      for (int g = 0; g < G; ++g) {
        const std::vector<int> p = random_path(T, M);
        int k = 0;
        for (int t = 0; t + 1 < T; ++t)
          if (p[t + 1] != p[t]) bp(g, k++) = t + 1;
      }
      const auto loss = average_loss(bp);
      if (!loss || !(*loss >= 0)) ++bad;
    }
    report("average loss >= 0", bad, cases);
  }
  // Full sweeps keep every state invariant.
  {
    int bad = 0;
    for (int c = 0; c < cases; ++c) {
      const int N = randint(4, 7), T = randint(2, 8);
      HmtmConfig cfg;
      cfg.n_breaks = randint(0, std::min(T / 2, 3) - 1);
      cfg.rank = randint(1, 2);
      cfg.with_intercept = rng.bernoulli(0.5);
      cfg.error_kind = rng.bernoulli(0.5) ? ErrorKind::StudentT : ErrorKind::Normal;
      cfg.seed = rng.next_u64();
      const CorrectedTensor B = random_tensor(N, T, 1.0, rng);
      try {
        HmtmSampler sampler(B, cfg);
        sampler.state().validate();
        for (int k = 0; k < 3; ++k) {
          sampler.sweep(k < 2);
          sampler.state().validate();
        }
      } catch (const std::exception&) {
        ++bad;
      }
    }
    report("state invariants across sweeps", bad, cases);
  }
  return out;
}

}  // namespace hmtm::oracle
