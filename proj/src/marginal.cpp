#include "hmtm/marginal.hpp"

#include "hmtm/diagnostics.hpp"
#include "hmtm/distributions.hpp"
#include "hmtm/gibbs.hpp"
#include "hmtm/sampler.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace hmtm {

namespace {

enum class Block { MuU, PsiU, MuV, PsiV, Beta, Sigma2, P };

const char* name(Block b) {
  switch (b) {
    case Block::MuU: return "mu_u";
    case Block::PsiU: return "psi_u";
    case Block::MuV: return "mu_v";
    case Block::PsiV: return "psi_v";
    case Block::Beta: return "beta";
    case Block::Sigma2: return "sigma2";
    case Block::P: return "P";
  }
  return "?";
}

std::vector<double> stay_probs(const Matrix& P) {
  std::vector<double> out(P.rows() > 0 ? P.rows() - 1 : 0);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = P(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  return out;
}

double log_diag_normal(const Vector& x, const Vector& mean, const Vector& var) {
  double s = 0.0;
  for (Eigen::Index r = 0; r < x.size(); ++r) s += dist::log_normal(x(r), mean(r), var(r));
  return s;
}

double log_ig(const Vector& x, const std::vector<gibbs::InvGammaParams>& p) {
  double s = 0.0;
  for (Eigen::Index r = 0; r < x.size(); ++r) s += dist::log_inv_gamma(x(r), p[r].shape, p[r].scale);
  return s;
}

bool is_fixed(const FixedBlocks& fx, Block b) {
  switch (b) {
    case Block::MuU: return fx.mu_u.has_value();
    case Block::PsiU: return fx.psi_u.has_value();
    case Block::MuV: return fx.mu_v.has_value();
    case Block::PsiV: return fx.psi_v.has_value();
    case Block::Beta: return fx.beta.has_value();
    case Block::Sigma2: return fx.sigma2.has_value();
    case Block::P: return fx.transition.has_value();
  }
  return false;
}

void fix_at(FixedBlocks& fx, Block b, const HmtmState& star) {
  switch (b) {
    case Block::MuU: fx.mu_u = star.mu_u; break;
    case Block::PsiU: fx.psi_u = star.psi_u; break;
    case Block::MuV: fx.mu_v = star.mu_v; break;
    case Block::PsiV: fx.psi_v = star.psi_v; break;
    case Block::Beta: fx.beta = star.beta; break;
    case Block::Sigma2: fx.sigma2 = star.sigma2; break;
    case Block::P: fx.transition = star.path.transition; break;
  }
}

double log_prior(Block b, const HmtmState& star, const HmtmConfig& cfg) {
  const Priors& p = cfg.priors;
  const int M = cfg.n_regimes(), R = cfg.rank;
  double s = 0.0;
  switch (b) {
    case Block::MuU:
      for (int m = 0; m < M; ++m) s += log_diag_normal(star.mu_u[m], p.mu0_u_or_zero(R), star.psi_u[m]);
      break;
    case Block::PsiU:
      for (int m = 0; m < M; ++m)
        for (int r = 0; r < R; ++r) s += dist::log_inv_gamma(star.psi_u[m](r), p.u0 / 2, p.u1 / 2);
      break;
    case Block::MuV:
      for (int m = 0; m < M; ++m) s += log_diag_normal(star.mu_v[m], p.mu0_v_or_zero(R), star.psi_v[m]);
      break;
    case Block::PsiV:
      for (int m = 0; m < M; ++m)
        for (int r = 0; r < R; ++r) s += dist::log_inv_gamma(star.psi_v[m](r), p.v0 / 2, p.v1 / 2);
      break;
    case Block::Beta: s = dist::log_normal(star.beta, p.beta_mean, p.beta_var); break;
    case Block::Sigma2:
      for (int m = 0; m < M; ++m) s += dist::log_inv_gamma(star.sigma2[m], p.c0 / 2, p.d0 / 2);
      break;
    case Block::P:
      if (p.a0 <= 1.0) throw std::invalid_argument("marginal likelihood needs a0 > 1 for a proper prior on P");
      for (double q : stay_probs(star.path.transition)) s += dist::log_beta(q, p.a0 - 1.0, p.b0);
      break;
  }
  return s;
}

// log of the full conditional of block b, evaluated at its star value, given the rest of `s`.
double log_ordinate(Block b, const HmtmState& star, const HmtmState& s, const CorrectedTensor& B,
                    const HmtmConfig& cfg) {
  const Priors& p = cfg.priors;
  const int M = cfg.n_regimes(), R = cfg.rank;
  double v = 0.0;
  switch (b) {
    case Block::MuU:
      for (int m = 0; m < M; ++m) {
        const auto c = gibbs::mu_u_conditional(s.U[m], s.psi_u[m], p.mu0_u_or_zero(R));
        v += log_diag_normal(star.mu_u[m], c.mean, c.var);
      }
      break;
    case Block::PsiU:
      for (int m = 0; m < M; ++m) v += log_ig(star.psi_u[m], gibbs::psi_u_conditional(s.U[m], p));
      break;
    case Block::MuV:
      for (int m = 0; m < M; ++m) {
        const Matrix Vm = gibbs::rows_of(s.V, layers_in_regime(s.path.states, m));
        const auto c = gibbs::mu_v_conditional(Vm, s.psi_v[m], p.mu0_v_or_zero(R));
        v += log_diag_normal(star.mu_v[m], c.mean, c.var);
      }
      break;
    case Block::PsiV:
      for (int m = 0; m < M; ++m) {
        const Matrix Vm = gibbs::rows_of(s.V, layers_in_regime(s.path.states, m));
        v += log_ig(star.psi_v[m], gibbs::psi_v_conditional(Vm, p));
      }
      break;
    case Block::Beta: {
      const auto c = gibbs::beta_conditional(B, s, p);
      v = dist::log_normal(star.beta, c.mean, c.var);
      break;
    }
    case Block::Sigma2:
      for (int m = 0; m < M; ++m) {
        const auto c = gibbs::sigma2_conditional(B, s, m, p);
        v += dist::log_inv_gamma(star.sigma2[m], c.shape, c.scale);
      }
      break;
    case Block::P: {
      const auto c = gibbs::transition_conditional(s.path.states, M, p);
      const auto q = stay_probs(star.path.transition);
      for (std::size_t k = 0; k < c.size(); ++k) v += dist::log_beta(q[k], c[k].a, c[k].b);
      break;
    }
  }
  return v;
}

Ordinate summarize(Block b, const std::vector<double>& values) {
  Ordinate o;
  o.block = name(b);
  o.log_value = dist::log_mean_exp(values);
  const double hi = *std::max_element(values.begin(), values.end());
  double mean = 0.0, sq = 0.0;
  for (double x : values) {
    const double w = std::exp(x - hi);
    mean += w;
    sq += w * w;
  }
  const double n = static_cast<double>(values.size());
  mean /= n;
  const double var = n > 1 ? std::max(0.0, (sq / n - mean * mean) * n / (n - 1)) : 0.0;
  o.rel_se = mean > 0 ? std::sqrt(var / n) / mean : 0.0;
  return o;
}

}  // namespace

HmtmState posterior_means(const McmcTrace& trace) {
  if (trace.draws.empty()) throw std::invalid_argument("posterior means of an empty trace");
  const double G = static_cast<double>(trace.draws.size());
  HmtmState out = trace.draws.front();
  const int M = out.n_regimes();
  std::vector<double> stay(std::max(0, M - 1), 0.0);
  for (std::size_t g = 0; g < trace.draws.size(); ++g) {
    const HmtmState& s = trace.draws[g];
    const auto q = stay_probs(s.path.transition);
    for (std::size_t k = 0; k < stay.size(); ++k) stay[k] += q[k] / G;
    if (g == 0) continue;
    for (int m = 0; m < M; ++m) {
      out.U[m] += s.U[m];
      out.mu_u[m] += s.mu_u[m];
      out.psi_u[m] += s.psi_u[m];
      out.mu_v[m] += s.mu_v[m];
      out.psi_v[m] += s.psi_v[m];
      out.sigma2[m] += s.sigma2[m];
    }
    out.V += s.V;
    out.beta += s.beta;
    out.gamma += s.gamma;
  }
  for (int m = 0; m < M; ++m) {
    out.U[m] /= G;
    out.mu_u[m] /= G;
    out.psi_u[m] /= G;
    out.mu_v[m] /= G;
    out.psi_v[m] /= G;
    out.sigma2[m] /= G;
  }
  out.V /= G;
  out.beta /= G;
  out.gamma /= G;
  out.path.states = posterior_mode_states(trace);
  out.path.transition = gibbs::transition_from_diagonal(stay);
  // fixed values pass through averaging unchanged up to rounding; restore them exactly
  const FixedBlocks& fx = trace.config.fixed;
  if (fx.U) out.U = *fx.U;
  if (fx.V) out.V = *fx.V;
  if (fx.mu_u) out.mu_u = *fx.mu_u;
  if (fx.psi_u) out.psi_u = *fx.psi_u;
  if (fx.mu_v) out.mu_v = *fx.mu_v;
  if (fx.psi_v) out.psi_v = *fx.psi_v;
  if (fx.sigma2) out.sigma2 = *fx.sigma2;
  if (fx.beta) out.beta = *fx.beta;
  if (fx.gamma) out.gamma = *fx.gamma;
  if (fx.states) out.path.states = *fx.states;
  if (fx.transition) out.path.transition = *fx.transition;
  return out;
}

double marginal_log_likelihood(const CorrectedTensor& B, const HmtmState& at, const HmtmConfig& cfg) {
  HmtmState view = at;
  if (cfg.error_kind == ErrorKind::Normal) view.gamma = Vector::Ones(B.n_layers);
  const bool integrate_gamma = cfg.error_kind == ErrorKind::StudentT && !cfg.fixed.gamma;
  const Matrix table = integrate_gamma ? gibbs::layer_loglik_table_marginal(B, view, cfg.priors)
                                       : gibbs::layer_loglik_table(B, view);
  const int M = cfg.n_regimes();
  if (M == 1 || cfg.fixed.states) {
    const std::vector<int> states = cfg.fixed.states ? *cfg.fixed.states : std::vector<int>(B.n_layers, 0);
    double s = 0.0;
    for (int t = 0; t < B.n_layers; ++t) s += table(t, states[t]);
    return s;
  }
  return gibbs::forward_filter(table, at.path.transition).log_likelihood;
}

MarginalLikelihood chib_marginal_likelihood(const CorrectedTensor& B, const HmtmConfig& config,
                                            const McmcTrace& trace, const MarginalOptions& opt) {
  if (trace.draws.empty()) throw std::invalid_argument("marginal likelihood needs a completed run");
  const int M = config.n_regimes();
  const HmtmState star = posterior_means(trace);

  std::vector<Block> blocks;
  for (Block b : {Block::MuU, Block::PsiU, Block::MuV, Block::PsiV, Block::Beta, Block::Sigma2, Block::P}) {
    if (b == Block::Beta && !config.with_intercept) continue;
    if (b == Block::P && M == 1) continue;
    if (!is_fixed(config.fixed, b)) blocks.push_back(b);
  }

  MarginalLikelihood out;
  out.log_likelihood = marginal_log_likelihood(B, star, config);
  for (Block b : blocks) out.log_prior += log_prior(b, star, config);

  const int reduced_mcmc = opt.reduced_mcmc > 0 ? opt.reduced_mcmc : config.mcmc;
  HmtmConfig reduced = config;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    std::vector<double> values;
    if (k == 0) {
      values.reserve(trace.draws.size());
      for (const HmtmState& s : trace.draws) values.push_back(log_ordinate(blocks[k], star, s, B, config));
    } else {
      fix_at(reduced.fixed, blocks[k - 1], star);
      reduced.seed = Rng::stream(config.seed, 101 + k).next_u64();
      HmtmSampler sampler(B, reduced, trace.draws.back());
      for (int it = 0; it < opt.reduced_burnin; ++it) sampler.sweep(false);
      values.reserve(reduced_mcmc);
      for (int it = 0; it < reduced_mcmc; ++it) {
        sampler.sweep(false);
        values.push_back(log_ordinate(blocks[k], star, sampler.state(), B, reduced));
      }
    }
    Ordinate o = summarize(blocks[k], values);
    out.log_posterior += o.log_value;
    if (o.rel_se > opt.se_warn) {
      std::ostringstream os;
      os << "ordinate " << o.block << ": relative Monte-Carlo SE " << o.rel_se << " exceeds " << opt.se_warn;
      out.warnings.push_back(os.str());
    }
    out.ordinates.push_back(std::move(o));
  }
  return out;
}

nlohmann::json to_json(const MarginalLikelihood& ml) {
  nlohmann::json ords = nlohmann::json::array();
  for (const auto& o : ml.ordinates) ords.push_back({{"block", o.block}, {"log_value", o.log_value}, {"rel_se", o.rel_se}});
  return {{"log_likelihood", ml.log_likelihood},
          {"log_prior", ml.log_prior},
          {"log_posterior", ml.log_posterior},
          {"neg2_log_marginal", ml.neg2_log_marginal()},
          {"ordinates", ords},
          {"warnings", ml.warnings}};
}

MarginalLikelihood marginal_from_json(const nlohmann::json& j) {
  MarginalLikelihood ml;
  ml.log_likelihood = j.at("log_likelihood");
  ml.log_prior = j.at("log_prior");
  ml.log_posterior = j.at("log_posterior");
  for (const auto& o : j.at("ordinates")) ml.ordinates.push_back({o.at("block"), o.at("log_value"), o.at("rel_se")});
  ml.warnings = j.value("warnings", std::vector<std::string>{});
  return ml;
}

}  // namespace hmtm
