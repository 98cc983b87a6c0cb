#include "hmtm/gibbs.hpp"

#include "hmtm/distributions.hpp"
#include "hmtm/kernels.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hmtm::gibbs {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector standard_normal(int n, Rng& rng) {
  Vector z(n);
  for (int k = 0; k < n; ++k) z(k) = rng.normal();
  return z;
}

std::vector<InvGammaParams> psi_conditional(const Matrix& X, double shape0, double scale0) {
  std::vector<InvGammaParams> out(X.cols());
  for (Eigen::Index r = 0; r < X.cols(); ++r)
    out[r] = {(shape0 + static_cast<double>(X.rows())) / 2.0, (X.col(r).squaredNorm() + scale0) / 2.0};
  return out;
}

DiagNormalParams mean_conditional(const Matrix& X, const Vector& psi, const Vector& mu0) {
  const double n1 = static_cast<double>(X.rows()) + 1.0;
  return {(X.colwise().sum().transpose() + mu0) / n1, psi / n1};
}

Vector draw_inv_gamma(const std::vector<InvGammaParams>& p, Rng& rng) {
  Vector out(static_cast<Eigen::Index>(p.size()));
  for (std::size_t r = 0; r < p.size(); ++r) out(static_cast<Eigen::Index>(r)) = rng.inv_gamma(p[r].shape, p[r].scale);
  return out;
}

Vector draw_diag_normal(const DiagNormalParams& p, Rng& rng) {
  Vector out(p.mean.size());
  for (Eigen::Index r = 0; r < p.mean.size(); ++r) out(r) = rng.normal(p.mean(r), std::sqrt(p.var(r)));
  return out;
}

// Q_v[r,s] = sum_{i<j} u_ir u_is u_jr u_js.
Matrix upper_pair_gram(const Matrix& U) {
  const Matrix g = U.transpose() * U;
  Matrix q = g.cwiseProduct(g);
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    const Vector sq = U.row(i).transpose().cwiseAbs2();
    q -= sq * sq.transpose();
  }
  return 0.5 * q;
}

double log_layer_normal(double ssr, double D, double sigma2, double gamma) {
  return -0.5 * D * std::log(2.0 * std::numbers::pi * sigma2 / gamma) - 0.5 * gamma * ssr / sigma2;
}

double log_layer_student(double ssr, double D, double sigma2, const Priors& p) {
  const double a = 0.5 * (p.nu0 + D);
  return std::lgamma(a) - std::lgamma(0.5 * p.nu0) + 0.5 * p.nu0 * std::log(0.5 * p.nu1) -
         0.5 * D * std::log(2.0 * std::numbers::pi * sigma2) - a * std::log(0.5 * (p.nu1 + ssr / sigma2));
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double log_prob(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

}  // namespace

double cells_per_layer(int n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

std::vector<InvGammaParams> psi_u_conditional(const Matrix& U, const Priors& priors) {
  return psi_conditional(U, priors.u0, priors.u1);
}

Vector sample_psi_u(const Matrix& U, const Priors& priors, Rng& rng) {
  return draw_inv_gamma(psi_u_conditional(U, priors), rng);
}

DiagNormalParams mu_u_conditional(const Matrix& U, const Vector& psi, const Vector& mu0) {
  return mean_conditional(U, psi, mu0);
}

Vector sample_mu_u(const Matrix& U, const Vector& psi, const Vector& mu0, Rng& rng) {
  return draw_diag_normal(mu_u_conditional(U, psi, mu0), rng);
}

std::vector<InvGammaParams> psi_v_conditional(const Matrix& V_m, const Priors& priors) {
  return psi_conditional(V_m, priors.v0, priors.v1);
}

Vector sample_psi_v(const Matrix& V_m, const Priors& priors, Rng& rng) {
  return draw_inv_gamma(psi_v_conditional(V_m, priors), rng);
}

DiagNormalParams mu_v_conditional(const Matrix& V_m, const Vector& psi, const Vector& mu0) {
  return mean_conditional(V_m, psi, mu0);
}

Vector sample_mu_v(const Matrix& V_m, const Vector& psi, const Vector& mu0, Rng& rng) {
  return draw_diag_normal(mu_v_conditional(V_m, psi, mu0), rng);
}

Matrix rows_of(const Matrix& V, const std::vector<int>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), V.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = V.row(idx[k]);
  return out;
}

MatrixNormalParams U_conditional(const CorrectedTensor& B, const HmtmState& s, int m) {
  const std::vector<int> idx = layers_in_regime(s.path.states, m);
  const Matrix& U = s.U[m];
  const Matrix Vm = rows_of(s.V, idx);
  Vector g(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) g(static_cast<Eigen::Index>(k)) = s.gamma(idx[k]);
  const Matrix Q = (U.transpose() * U).cwiseProduct(Vm.transpose() * g.asDiagonal() * Vm);
  const Matrix L = kernels::accumulate_lu(B.layers, idx, U, s.V, s.gamma, s.beta);

  const double sig2 = s.sigma2[m];
  const Vector psi_inv = s.psi_u[m].cwiseInverse();
  Matrix prec = Q / sig2;
  prec.diagonal() += psi_inv;
  const Eigen::Index R = U.cols();
  const Matrix cov = prec.llt().solve(Matrix::Identity(R, R));
  const Vector prior_term = psi_inv.cwiseProduct(s.mu_u[m]);

  MatrixNormalParams out;
  out.row_cov = 0.5 * (cov + cov.transpose());
  out.mean = ((L / sig2).rowwise() + prior_term.transpose()) * out.row_cov;
  return out;
}

Matrix sample_U(const CorrectedTensor& B, const HmtmState& state, int m, Rng& rng) {
  const MatrixNormalParams p = U_conditional(B, state, m);
  const Eigen::LLT<Matrix> chol(p.row_cov);
  if (chol.info() != Eigen::Success) throw std::runtime_error("U update: row covariance is not positive definite");
  const Matrix C = chol.matrixL();
  Matrix Z(p.mean.rows(), p.mean.cols());
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    for (Eigen::Index r = 0; r < Z.cols(); ++r) Z(i, r) = rng.normal();
  Matrix U = p.mean + Z * C.transpose();
  orthogonalize_columns(U);
  return U;
}

namespace {

struct RowContext {
  std::vector<int> idx;
  Matrix weighted_gram;  // V_m' Gamma V_m
  Vector psi_inv;
  Vector prior_term;
  double sigma2;
};

RowContext row_context(const HmtmState& s, int m) {
  RowContext c;
  c.idx = layers_in_regime(s.path.states, m);
  const Matrix Vm = rows_of(s.V, c.idx);
  Vector g(static_cast<Eigen::Index>(c.idx.size()));
  for (std::size_t k = 0; k < c.idx.size(); ++k) g(static_cast<Eigen::Index>(k)) = s.gamma(c.idx[k]);
  c.weighted_gram = Vm.transpose() * g.asDiagonal() * Vm;
  c.psi_inv = s.psi_u[m].cwiseInverse();
  c.prior_term = c.psi_inv.cwiseProduct(s.mu_u[m]);
  c.sigma2 = s.sigma2[m];
  return c;
}

// Precision and linear term of row i given the other rows of U.
void row_system(const CorrectedTensor& B, const HmtmState& s, const RowContext& c, const Matrix& U,
                const Matrix& gram, const Vector& colsum, int i, Matrix& prec, Vector& lin) {
  const Vector ui = U.row(i).transpose();
  prec = (gram - ui * ui.transpose()).cwiseProduct(c.weighted_gram) / c.sigma2;
  prec.diagonal() += c.psi_inv;
  const Vector others = colsum - ui;
  Vector L = Vector::Zero(U.cols());
  for (int t : c.idx) {
    const Vector bu = U.transpose() * B.layers[t].row(i).transpose() - s.beta * others;
    L += s.gamma(t) * s.V.row(t).transpose().cwiseProduct(bu);
  }
  lin = L / c.sigma2 + c.prior_term;
}

}  // namespace

std::pair<Vector, Matrix> U_row_conditional(const CorrectedTensor& B, const HmtmState& s, int m, int i) {
  const RowContext c = row_context(s, m);
  const Matrix& U = s.U[m];
  Matrix prec;
  Vector lin;
  row_system(B, s, c, U, U.transpose() * U, U.colwise().sum().transpose(), i, prec, lin);
  const Matrix cov = prec.llt().solve(Matrix::Identity(U.cols(), U.cols()));
  return {cov * lin, 0.5 * (cov + cov.transpose())};
}

Matrix sample_U_rowwise(const CorrectedTensor& B, const HmtmState& s, int m, Rng& rng) {
  const RowContext c = row_context(s, m);
  Matrix U = s.U[m];
  Matrix gram = U.transpose() * U;
  Vector colsum = U.colwise().sum().transpose();
  Matrix prec;
  Vector lin;
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    row_system(B, s, c, U, gram, colsum, static_cast<int>(i), prec, lin);
    const Eigen::LLT<Matrix> chol(prec);
    if (chol.info() != Eigen::Success)
      throw std::runtime_error("U update: precision of row " + std::to_string(i + 1) + " in regime " +
                               std::to_string(m + 1) + " is not positive definite");
    const Vector z = standard_normal(static_cast<int>(U.cols()), rng);
    const Vector old = U.row(i).transpose();
    const Vector fresh = chol.solve(lin) + chol.matrixU().solve(z);
    U.row(i) = fresh.transpose();
    gram += fresh * fresh.transpose() - old * old.transpose();
    colsum += fresh - old;
  }
  orthogonalize_columns(U);
  return U;
}

void orthogonalize_columns(Matrix& U) {
  for (Eigen::Index r = 1; r < U.cols(); ++r) {
    for (Eigen::Index s = 0; s < r; ++s) {
      const double nn = U.col(s).squaredNorm();
      if (nn == 0.0) continue;
      U.col(r) -= (U.col(r).dot(U.col(s)) / nn) * U.col(s);
    }
  }
}

void anchor_scale(HmtmState& s, int m) {
  const std::vector<int> idx = layers_in_regime(s.path.states, m);
  Matrix& U = s.U[m];
  for (Eigen::Index r = 0; r < U.cols(); ++r) {
    const double n2 = U.col(r).squaredNorm();
    if (n2 == 0.0) continue;
    U.col(r) /= std::sqrt(n2);
    for (int t : idx) s.V(t, r) *= n2;
  }
}

std::pair<Vector, Matrix> V_row_conditional(const CorrectedTensor& B, const HmtmState& s, int t) {
  const int m = s.path.states[t];
  const Matrix& U = s.U[m];
  const std::vector<int> idx{t};
  const Vector lv = kernels::accumulate_lv(B.layers, idx, U, s.beta).row(0).transpose();
  const double w = s.gamma(t) / s.sigma2[m];
  const Vector psi_inv = s.psi_v[m].cwiseInverse();
  Matrix prec = w * upper_pair_gram(U);
  prec.diagonal() += psi_inv;
  const Matrix cov = prec.llt().solve(Matrix::Identity(U.cols(), U.cols()));
  const Vector mean = cov * (w * lv + psi_inv.cwiseProduct(s.mu_v[m]));
  return {mean, 0.5 * (cov + cov.transpose())};
}

void sample_V(const CorrectedTensor& B, HmtmState& s, int m, Rng& rng) {
  const std::vector<int> idx = layers_in_regime(s.path.states, m);
  const Matrix& U = s.U[m];
  const Matrix Qv = upper_pair_gram(U);
  const Matrix Lv = kernels::accumulate_lv(B.layers, idx, U, s.beta);
  const Vector psi_inv = s.psi_v[m].cwiseInverse();
  const Vector prior_term = psi_inv.cwiseProduct(s.mu_v[m]);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const int t = idx[k];
    const double w = s.gamma(t) / s.sigma2[m];
    Matrix prec = w * Qv;
    prec.diagonal() += psi_inv;
    const Eigen::LLT<Matrix> chol(prec);
    if (chol.info() != Eigen::Success) throw std::runtime_error("V update: precision is not positive definite");
    const Vector mean = chol.solve(w * Lv.row(static_cast<Eigen::Index>(k)).transpose() + prior_term);
    const Vector z = standard_normal(static_cast<int>(U.cols()), rng);
    s.V.row(t) = (mean + chol.matrixU().solve(z)).transpose();
  }
}

InvGammaParams sigma2_conditional(const CorrectedTensor& B, const HmtmState& s, int m, const Priors& priors) {
  const std::vector<int> idx = layers_in_regime(s.path.states, m);
  double weighted = 0.0;
  for (int t : idx) weighted += s.gamma(t) * kernels::layer_ssr(B.layers[t], s.U[m], s.V.row(t).transpose(), s.beta);
  const double E = cells_per_layer(B.n_nodes) * static_cast<double>(idx.size());
  return {(priors.c0 + E) / 2.0, (priors.d0 + weighted) / 2.0};
}

double sample_sigma2(const CorrectedTensor& B, const HmtmState& s, int m, const Priors& priors, Rng& rng) {
  const InvGammaParams p = sigma2_conditional(B, s, m, priors);
  return rng.inv_gamma(p.shape, p.scale);
}

ScalarNormalParams beta_conditional(const CorrectedTensor& B, const HmtmState& s, const Priors& priors) {
  const double D = cells_per_layer(B.n_nodes);
  double prec = 1.0 / priors.beta_var;
  double lin = priors.beta_mean / priors.beta_var;
  for (int t = 0; t < B.n_layers; ++t) {
    const int m = s.path.states[t];
    const double w = s.gamma(t) / s.sigma2[m];
    prec += w * D;
    lin += w * kernels::layer_residual_sum(B.layers[t], s.U[m], s.V.row(t).transpose());
  }
  return {lin / prec, 1.0 / prec};
}

double sample_beta(const CorrectedTensor& B, const HmtmState& s, const Priors& priors, Rng& rng) {
  const ScalarNormalParams p = beta_conditional(B, s, priors);
  return rng.normal(p.mean, std::sqrt(p.var));
}

std::vector<GammaParams> gamma_conditional(const CorrectedTensor& B, const HmtmState& s, const Priors& priors) {
  const Vector ssr = kernels::path_ssr(B.layers, s.U, s.path.states, s.V, s.beta);
  const double D = cells_per_layer(B.n_nodes);
  std::vector<GammaParams> out(B.n_layers);
  for (int t = 0; t < B.n_layers; ++t)
    out[t] = {(priors.nu0 + D) / 2.0, (priors.nu1 + ssr(t) / s.sigma2[s.path.states[t]]) / 2.0};
  return out;
}

Vector sample_gamma(const CorrectedTensor& B, const HmtmState& s, const Priors& priors, Rng& rng) {
  const auto params = gamma_conditional(B, s, priors);
  Vector out(B.n_layers);
  for (int t = 0; t < B.n_layers; ++t) out(t) = rng.gamma(params[t].shape, params[t].rate);
  return out;
}

Matrix layer_loglik_table(const CorrectedTensor& B, const HmtmState& s) {
  Matrix table = kernels::regime_ssr(B.layers, s.U, s.V, s.beta);
  const double D = cells_per_layer(B.n_nodes);
  for (Eigen::Index t = 0; t < table.rows(); ++t)
    for (Eigen::Index m = 0; m < table.cols(); ++m)
      table(t, m) = log_layer_normal(table(t, m), D, s.sigma2[m], s.gamma(t));
  return table;
}

Matrix layer_loglik_table_marginal(const CorrectedTensor& B, const HmtmState& s, const Priors& priors) {
  Matrix table = kernels::regime_ssr(B.layers, s.U, s.V, s.beta);
  const double D = cells_per_layer(B.n_nodes);
  for (Eigen::Index t = 0; t < table.rows(); ++t)
    for (Eigen::Index m = 0; m < table.cols(); ++m)
      table(t, m) = log_layer_student(table(t, m), D, s.sigma2[m], priors);
  return table;
}

ForwardFilter forward_filter(const Matrix& loglik, const Matrix& P) {
  const Eigen::Index T = loglik.rows(), M = loglik.cols();
  if (P.rows() != M || P.cols() != M) throw std::invalid_argument("forward filter: transition shape mismatch");
  ForwardFilter out;
  out.log_filtered.resize(T, M);
  Vector pred = Vector::Constant(M, kNegInf);
  pred(0) = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (t > 0) {
      for (Eigen::Index k = 0; k < M; ++k) {
        double v = out.log_filtered(t - 1, k) + log_prob(P(k, k));
        if (k > 0) v = log_add(v, out.log_filtered(t - 1, k - 1) + log_prob(P(k - 1, k)));
        pred(k) = v;
      }
    }
    double norm = kNegInf;
    for (Eigen::Index k = 0; k < M; ++k) {
      out.log_filtered(t, k) = pred(k) == kNegInf ? kNegInf : pred(k) + loglik(t, k);
      norm = log_add(norm, out.log_filtered(t, k));
    }
    if (!std::isfinite(norm))
      throw std::runtime_error("forward filter: all regimes have zero probability at layer " + std::to_string(t + 1));
    out.log_filtered.row(t).array() -= norm;
    out.log_likelihood += norm;
  }
  return out;
}

std::vector<int> backward_sample(const ForwardFilter& f, const Matrix& P, Rng& rng) {
  const auto T = static_cast<int>(f.log_filtered.rows());
  const auto M = static_cast<int>(f.log_filtered.cols());
  std::vector<int> s(T);
  if (f.log_filtered(T - 1, M - 1) == kNegInf)
    throw std::runtime_error("backward sampling: final regime unreachable at layer " + std::to_string(T));
  s[T - 1] = M - 1;
  for (int t = T - 2; t >= 0; --t) {
    const int next = s[t + 1];
    const double stay = f.log_filtered(t, next) + log_prob(P(next, next));
    const double move = next > 0 ? f.log_filtered(t, next - 1) + log_prob(P(next - 1, next)) : kNegInf;
    const double norm = log_add(stay, move);
    if (norm == kNegInf)
      throw std::runtime_error("backward sampling: zero probability path at layer " + std::to_string(t + 1));
    s[t] = rng.uniform() < std::exp(move - norm) ? next - 1 : next;
  }
  return s;
}

FfbsResult sample_states(const CorrectedTensor& B, const HmtmState& s, Rng& rng) {
  const Matrix table = layer_loglik_table(B, s);
  const ForwardFilter f = forward_filter(table, s.path.transition);
  return {backward_sample(f, s.path.transition, rng), f.log_likelihood};
}

bool has_singleton(const std::vector<int>& states, int M) {
  std::vector<int> count(M, 0);
  for (int k : states) ++count[k];
  return std::find(count.begin(), count.end(), 1) != count.end();
}

std::vector<int> perturb_singletons(const std::vector<int>& states, int M, const std::vector<double>& weights,
                                    Rng& rng) {
  if (!has_singleton(states, M)) return states;
  if (static_cast<int>(weights.size()) != M) throw std::invalid_argument("perturbation weights need length M");
  const std::size_t T = states.size();
  if (T < static_cast<std::size_t>(M)) throw std::invalid_argument("fewer layers than regimes");
  std::vector<int> out(T);
  const bool uniform = std::all_of(weights.begin(), weights.end(), [&](double w) { return w == weights[0]; });
  if (uniform) {
    // M-1 distinct break positions out of 1..T-1, every subset equally likely
    std::vector<int> pos(T - 1);
    std::iota(pos.begin(), pos.end(), 1);
    for (int k = 0; k < M - 1; ++k) {
      const std::size_t j = k + rng.uniform_index(pos.size() - k);
      std::swap(pos[k], pos[j]);
    }
    std::sort(pos.begin(), pos.begin() + (M - 1));
    int regime = 0;
    for (std::size_t t = 0; t < T; ++t) {
      while (regime < M - 1 && static_cast<int>(t) >= pos[regime]) ++regime;
      out[t] = regime;
    }
    return out;
  }
  // Weighted: iid labels from the weights, sorted, until every regime occurs.
  while (true) {
    std::vector<int> seen(M, 0);
    for (std::size_t t = 0; t < T; ++t) {
      out[t] = static_cast<int>(rng.categorical(weights));
      seen[out[t]] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) == seen.end()) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<BetaParams> transition_conditional(const std::vector<int>& states, int M, const Priors& priors) {
  std::vector<double> stay(M, 0.0), move(M, 0.0);
  for (std::size_t t = 1; t < states.size(); ++t) {
    if (states[t] == states[t - 1]) stay[states[t - 1]] += 1.0;
    else move[states[t - 1]] += 1.0;
  }
  std::vector<BetaParams> out(std::max(0, M - 1));
  for (int k = 0; k + 1 < M; ++k) {
    out[k] = {priors.a0 + stay[k] - 1.0, priors.b0 + move[k]};
    if (!(out[k].a > 0.0))
      throw std::domain_error("transition update: regime " + std::to_string(k + 1) +
                              " has insufficient dwell count for prior a0 = " + std::to_string(priors.a0));
  }
  return out;
}

Matrix transition_from_diagonal(const std::vector<double>& p_stay) {
  const auto M = static_cast<Eigen::Index>(p_stay.size()) + 1;
  Matrix P = Matrix::Zero(M, M);
  for (Eigen::Index k = 0; k + 1 < M; ++k) {
    P(k, k) = p_stay[k];
    P(k, k + 1) = 1.0 - p_stay[k];
  }
  P(M - 1, M - 1) = 1.0;
  return P;
}

Matrix sample_transition(const std::vector<int>& states, int M, const Priors& priors, Rng& rng) {
  const auto params = transition_conditional(states, M, priors);
  std::vector<double> p(params.size());
  // keep both moves possible in floating point
  for (std::size_t k = 0; k < params.size(); ++k)
    p[k] = std::clamp(rng.beta(params[k].a, params[k].b), 1e-300, 1.0 - 1e-15);
  return transition_from_diagonal(p);
}

}  // namespace hmtm::gibbs
