#include "hmtm/sampler.hpp"

#include "hmtm/kernels.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hmtm {

namespace {

// Shared subspace of a regime's layers: leading eigenvectors of sum_t A_t^2
// (diagonals imputed from the current rank-R fit), so layers of opposite sign
// reinforce rather than cancel. Column r is scaled by sqrt of the mean |e_r' A_t e_r|.
Matrix low_rank_factor(std::vector<Matrix> A, int R) {
  const Eigen::Index n = A.front().rows();
  for (Matrix& a : A) a.diagonal().setZero();
  Matrix E = Matrix::Zero(n, R);
  for (int iter = 0; iter < 200; ++iter) {
    Matrix S = Matrix::Zero(n, n);
    for (const Matrix& a : A) S.noalias() += a * a;
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    E = es.eigenvectors().rightCols(R).rowwise().reverse();
    double change = 0.0, size = 1.0;
    for (Matrix& a : A) {
      const Matrix proj = E.transpose() * a * E;
      const Vector diag = (E * proj).cwiseProduct(E).rowwise().sum();
      change += (a.diagonal() - diag).squaredNorm();
      size += a.squaredNorm();
      a.diagonal() = diag;
    }
    if (change <= 1e-26 * size) break;
  }
  Matrix factor(n, R);
  for (int r = 0; r < R; ++r) {
    Vector e = E.col(r);
    Eigen::Index arg = 0;
    e.cwiseAbs().maxCoeff(&arg);
    if (e(arg) < 0) e = -e;
    double scale = 0.0;
    for (const Matrix& a : A) scale += std::abs(e.dot(a * e));
    factor.col(r) = std::sqrt(scale / A.size()) * e;
  }
  return factor;
}

// Least-squares v for one layer given U, using the upper-triangular cells.
Vector least_squares_weights(const CorrectedTensor& B, int t, const Matrix& U, double beta) {
  const Matrix g = U.transpose() * U;
  Matrix q = g.cwiseProduct(g);
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    const Vector sq = U.row(i).transpose().cwiseAbs2();
    q -= sq * sq.transpose();
  }
  q *= 0.5;
  const std::vector<int> idx{t};
  const Vector rhs = kernels::accumulate_lv(B.layers, idx, U, beta).row(0).transpose();
  q.diagonal().array() += 1e-10 * (q.trace() + 1.0);
  return q.ldlt().solve(rhs);
}

double prior_mean_ig(double shape2, double scale2) {
  // IG(a/2, b/2) has mean b/(a-2) when a > 2
  return shape2 > 2.0 ? scale2 / (shape2 - 2.0) : scale2 / shape2;
}

}  // namespace

HmtmState initialize_state(const CorrectedTensor& B, const HmtmConfig& cfg) {
  const int N = B.n_nodes, T = B.n_layers, M = cfg.n_regimes(), R = cfg.rank;
  const FixedBlocks& fx = cfg.fixed;
  const Priors& pr = cfg.priors;
  HmtmState s;

  if (fx.states) {
    s.path.states = *fx.states;
  } else {
    s.path.states.resize(T);
    for (int m = 0; m < M; ++m)
      for (int t = (m * T) / M; t < ((m + 1) * T) / M; ++t) s.path.states[t] = m;
  }

  if (fx.beta) {
    s.beta = *fx.beta;
  } else if (cfg.with_intercept) {
    double total = 0.0;
    for (const Matrix& b : B.layers) total += b.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().sum();
    s.beta = total / (gibbs::cells_per_layer(N) * T);
  }

  s.U.resize(M);
  s.V = Matrix::Zero(T, R);
  for (int m = 0; m < M; ++m) {
    const std::vector<int> idx = layers_in_regime(s.path.states, m);
    if (fx.U) {
      s.U[m] = (*fx.U)[m];
    } else {
      std::vector<Matrix> A;
      for (int t : idx) A.push_back(B.layers[t].array() - s.beta);
      s.U[m] = low_rank_factor(std::move(A), R);
    }
    if (!fx.V)
      for (int t : idx) s.V.row(t) = least_squares_weights(B, t, s.U[m], s.beta).transpose();
  }
  if (fx.V) s.V = *fx.V;

  s.gamma = fx.gamma ? *fx.gamma : Vector::Ones(T);

  s.sigma2.resize(M);
  for (int m = 0; m < M; ++m) {
    if (fx.sigma2) {
      s.sigma2[m] = (*fx.sigma2)[m];
      continue;
    }
    const std::vector<int> idx = layers_in_regime(s.path.states, m);
    double ssr = 0.0;
    for (int t : idx) ssr += kernels::layer_ssr(B.layers[t], s.U[m], s.V.row(t).transpose(), s.beta);
    s.sigma2[m] = std::max(ssr / (gibbs::cells_per_layer(N) * static_cast<double>(idx.size())), 1e-10);
  }

  const Vector mu0u = pr.mu0_u_or_zero(R), mu0v = pr.mu0_v_or_zero(R);
  s.mu_u = fx.mu_u ? *fx.mu_u : std::vector<Vector>(M, mu0u);
  s.mu_v = fx.mu_v ? *fx.mu_v : std::vector<Vector>(M, mu0v);
  s.psi_u = fx.psi_u ? *fx.psi_u : std::vector<Vector>(M, Vector::Constant(R, prior_mean_ig(pr.u0, pr.u1)));
  s.psi_v = fx.psi_v ? *fx.psi_v : std::vector<Vector>(M, Vector::Constant(R, prior_mean_ig(pr.v0, pr.v1)));

  if (fx.transition) {
    s.path.transition = *fx.transition;
  } else {
    const std::vector<int> len = s.path.regime_lengths(M);
    std::vector<double> stay(M - 1);
    for (int k = 0; k + 1 < M; ++k) stay[k] = (len[k] - 1.0) / len[k];
    s.path.transition = gibbs::transition_from_diagonal(stay);
  }
  return s;
}

Vector layer_log_density(const CorrectedTensor& B, const HmtmState& s, const HmtmConfig& cfg) {
  const bool marginal = cfg.error_kind == ErrorKind::StudentT && !cfg.fixed.gamma;
  HmtmState view = s;
  if (cfg.error_kind == ErrorKind::Normal) view.gamma = Vector::Ones(B.n_layers);
  const Matrix table =
      marginal ? gibbs::layer_loglik_table_marginal(B, view, cfg.priors) : gibbs::layer_loglik_table(B, view);
  Vector out(B.n_layers);
  for (int t = 0; t < B.n_layers; ++t) out(t) = table(t, s.path.states[t]);
  return out;
}

HmtmSampler::HmtmSampler(const CorrectedTensor& B, HmtmConfig config)
    : B_(B), config_(std::move(config)), rng_(config_.seed) {
  config_.validate(B.n_nodes, B.n_layers);
  state_ = initialize_state(B_, config_);
}

HmtmSampler::HmtmSampler(const CorrectedTensor& B, HmtmConfig config, HmtmState start)
    : B_(B), config_(std::move(config)), state_(std::move(start)), rng_(config_.seed) {
  config_.validate(B.n_nodes, B.n_layers);
  if (state_.n_regimes() != config_.n_regimes() || state_.V.rows() != B.n_layers)
    throw std::invalid_argument("starting state does not match the config");
  apply_fixed();
}

void HmtmSampler::apply_fixed() {
  const FixedBlocks& fx = config_.fixed;
  if (fx.U) state_.U = *fx.U;
  if (fx.V) state_.V = *fx.V;
  if (fx.mu_u) state_.mu_u = *fx.mu_u;
  if (fx.psi_u) state_.psi_u = *fx.psi_u;
  if (fx.mu_v) state_.mu_v = *fx.mu_v;
  if (fx.psi_v) state_.psi_v = *fx.psi_v;
  if (fx.sigma2) state_.sigma2 = *fx.sigma2;
  if (fx.beta) state_.beta = *fx.beta;
  if (fx.gamma) state_.gamma = *fx.gamma;
  if (fx.states) state_.path.states = *fx.states;
  if (fx.transition) state_.path.transition = *fx.transition;
}

void HmtmSampler::sweep(bool burnin) {
  const FixedBlocks& fx = config_.fixed;
  const Priors& pr = config_.priors;
  const int M = config_.n_regimes();
  const int R = config_.rank;
  HmtmState& s = state_;

  for (int m = 0; m < M; ++m) {
    if (!fx.psi_u) s.psi_u[m] = gibbs::sample_psi_u(s.U[m], pr, rng_);
    if (!fx.mu_u) s.mu_u[m] = gibbs::sample_mu_u(s.U[m], s.psi_u[m], pr.mu0_u_or_zero(R), rng_);
    if (fx.U) continue;
    s.U[m] = config_.u_update == UUpdate::RowWise ? gibbs::sample_U_rowwise(B_, s, m, rng_)
                                                  : gibbs::sample_U(B_, s, m, rng_);
    if (config_.anchor_scale && !fx.V) gibbs::anchor_scale(s, m);
  }
  for (int m = 0; m < M; ++m) {
    const Matrix Vm = gibbs::rows_of(s.V, layers_in_regime(s.path.states, m));
    if (!fx.psi_v) s.psi_v[m] = gibbs::sample_psi_v(Vm, pr, rng_);
    if (!fx.mu_v) s.mu_v[m] = gibbs::sample_mu_v(Vm, s.psi_v[m], pr.mu0_v_or_zero(R), rng_);
    if (!fx.V) gibbs::sample_V(B_, s, m, rng_);
  }
  if (config_.with_intercept && !fx.beta) s.beta = gibbs::sample_beta(B_, s, pr, rng_);
  if (!fx.sigma2)
    for (int m = 0; m < M; ++m) s.sigma2[m] = gibbs::sample_sigma2(B_, s, m, pr, rng_);
  if (config_.error_kind == ErrorKind::StudentT && !fx.gamma) s.gamma = gibbs::sample_gamma(B_, s, pr, rng_);
  if (M > 1 && !fx.states) {
    const gibbs::FfbsResult res = gibbs::sample_states(B_, s, rng_);
    last_loglik_ = res.log_likelihood;
    s.path.states = res.states;
    if (burnin)
      s.path.states = gibbs::perturb_singletons(s.path.states, M, config_.perturb_weights_or_uniform(), rng_);
  }
  if (M > 1 && !fx.transition) s.path.transition = gibbs::sample_transition(s.path.states, M, pr, rng_);
}

McmcTrace fit_hmtm(const CorrectedTensor& B, const HmtmConfig& config, const SweepCallback& on_sweep) {
  HmtmSampler sampler(B, config);
  McmcTrace trace;
  trace.config = config;
  trace.n_nodes = B.n_nodes;
  trace.n_layers = B.n_layers;
  const int G = config.mcmc / config.thin;
  const int M = config.n_regimes();
  trace.draws.reserve(G);
  trace.loglayer.resize(G, B.n_layers);
  trace.breakpoints.resize(G, M - 1);
  const int total = config.burnin + config.mcmc;
  int g = 0;
  for (int it = 0; it < total; ++it) {
    const bool burnin = it < config.burnin;
    sampler.sweep(burnin);
    if (on_sweep) on_sweep(it, burnin, sampler.state());
    if (burnin || (it - config.burnin + 1) % config.thin != 0 || g >= G) continue;
    const HmtmState& s = sampler.state();
    trace.draws.push_back(s);
    trace.loglayer.row(g) = layer_log_density(B, s, config).transpose();
    const std::vector<int> bp = s.path.breakpoints(M);
    for (int k = 0; k + 1 < M; ++k) trace.breakpoints(g, k) = bp[k];
    ++g;
  }
  return trace;
}

}  // namespace hmtm
