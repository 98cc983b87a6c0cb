#include "hmtm/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hmtm {

std::string to_string(ErrorKind kind) { return kind == ErrorKind::Normal ? "normal" : "t"; }

ErrorKind error_kind_from_string(const std::string& name) {
  if (name == "normal") return ErrorKind::Normal;
  if (name == "t" || name == "student-t" || name == "studentt") return ErrorKind::StudentT;
  throw std::invalid_argument("unknown error kind '" + name + "' (expected normal|t)");
}

std::string to_string(UUpdate kind) { return kind == UUpdate::RowWise ? "rowwise" : "joint"; }

UUpdate u_update_from_string(const std::string& name) {
  if (name == "rowwise") return UUpdate::RowWise;
  if (name == "joint") return UUpdate::Joint;
  throw std::invalid_argument("unknown U update '" + name + "' (expected rowwise|joint)");
}

Vector Priors::mu0_u_or_zero(int rank) const { return mu0_u.size() == 0 ? Vector::Zero(rank) : mu0_u; }
Vector Priors::mu0_v_or_zero(int rank) const { return mu0_v.size() == 0 ? Vector::Zero(rank) : mu0_v; }

bool FixedBlocks::any() const {
  return U || V || mu_u || psi_u || mu_v || psi_v || sigma2 || beta || gamma || states || transition;
}

std::vector<double> HmtmConfig::perturb_weights_or_uniform() const {
  if (!perturb_weights.empty()) return perturb_weights;
  return std::vector<double>(n_regimes(), 1.0 / n_regimes());
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid config: " + what);
}

template <typename T>
void require_size(const std::optional<std::vector<T>>& v, int M, const char* name) {
  if (v) require(static_cast<int>(v->size()) == M, std::string("fixed ") + name + " needs one entry per regime");
}

}  // namespace

void HmtmConfig::validate(int n_nodes, int n_layers) const {
  const int M = n_regimes();
  require(n_breaks >= 0, "n_breaks must be >= 0");
  require(rank >= 1, "rank must be >= 1");
  require(rank <= n_nodes, "rank must not exceed the number of nodes");
  require(burnin >= 0 && mcmc >= 1 && thin >= 1, "burnin >= 0, mcmc >= 1, thin >= 1");
  require(mcmc / thin >= 1, "mcmc / thin must leave at least one draw");
  require(n_layers >= 2 * M || M == 1, "T must be at least 2M so each regime can hold two layers");
  const Priors& p = priors;
  for (double x : {p.u0, p.u1, p.v0, p.v1, p.c0, p.d0, p.b0, p.nu0, p.nu1, p.beta_var})
    require(x > 0.0 && std::isfinite(x), "prior scale parameters must be positive");
  require(p.a0 > 0.0 && std::isfinite(p.a0), "a0 must be positive");
  require(p.mu0_u.size() == 0 || p.mu0_u.size() == rank, "mu0_u must have length R");
  require(p.mu0_v.size() == 0 || p.mu0_v.size() == rank, "mu0_v must have length R");
  if (!perturb_weights.empty()) {
    require(static_cast<int>(perturb_weights.size()) == M, "perturb_weights must have length M");
    double total = 0.0;
    for (double w : perturb_weights) {
      require(w >= 0.0, "perturb_weights must be non-negative");
      total += w;
    }
    require(std::abs(total - 1.0) < 1e-9, "perturb_weights must sum to 1");
  }
  require_size(fixed.U, M, "U");
  require_size(fixed.mu_u, M, "mu_u");
  require_size(fixed.psi_u, M, "psi_u");
  require_size(fixed.mu_v, M, "mu_v");
  require_size(fixed.psi_v, M, "psi_v");
  require_size(fixed.sigma2, M, "sigma2");
  if (fixed.U)
    for (const Matrix& u : *fixed.U) require(u.rows() == n_nodes && u.cols() == rank, "fixed U must be N x R");
  if (fixed.V) require(fixed.V->rows() == n_layers && fixed.V->cols() == rank, "fixed V must be T x R");
  if (fixed.gamma) require(fixed.gamma->size() == n_layers, "fixed gamma must have length T");
  if (fixed.states) require(is_valid_path(*fixed.states, M) && static_cast<int>(fixed.states->size()) == n_layers,
                            "fixed states must be a valid forward-moving path of length T");
  if (fixed.transition) require(fixed.transition->rows() == M && fixed.transition->cols() == M,
                                "fixed transition must be M x M");
}

bool is_valid_path(const std::vector<int>& s, int M) {
  if (s.empty() || s.front() != 0 || s.back() != M - 1) return false;
  for (std::size_t t = 1; t < s.size(); ++t) {
    const int step = s[t] - s[t - 1];
    if (step != 0 && step != 1) return false;
  }
  return true;
}

void RegimePath::validate(int M) const {
  if (!is_valid_path(states, M)) throw std::logic_error("regime path is not forward-moving from 1 to M");
  if (transition.rows() != M || transition.cols() != M) throw std::logic_error("transition matrix has wrong shape");
  for (int k = 0; k < M; ++k) {
    double row = 0.0;
    for (int l = 0; l < M; ++l) {
      const double p = transition(k, l);
      if (l != k && l != k + 1 && p != 0.0) throw std::logic_error("transition matrix is not upper bidiagonal");
      if (p < 0.0 || p > 1.0) throw std::logic_error("transition probability outside [0, 1]");
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-12) throw std::logic_error("transition row does not sum to 1");
  }
  if (transition(M - 1, M - 1) != 1.0) throw std::logic_error("last regime must be absorbing");
}

std::vector<int> RegimePath::breakpoints(int M) const {
  std::vector<int> out(std::max(0, M - 1), 0);
  for (int s : states)
    for (int m = s; m < M - 1; ++m) ++out[m];
  return out;
}

std::vector<int> RegimePath::regime_lengths(int M) const {
  std::vector<int> out(M, 0);
  for (int s : states) ++out[s];
  return out;
}

void HmtmState::validate(double orth_tol) const {
  const int M = n_regimes();
  if (M < 1) throw std::logic_error("state has no regimes");
  path.validate(M);
  for (int m = 0; m < M; ++m) {
    if (sigma2[m] <= 0.0 || !std::isfinite(sigma2[m])) throw std::logic_error("sigma2 must be positive");
    if ((psi_u[m].array() <= 0.0).any() || (psi_v[m].array() <= 0.0).any())
      throw std::logic_error("psi must be positive");
    const Matrix gram = U[m].transpose() * U[m];
    const Vector norms = gram.diagonal().cwiseSqrt();
    for (Eigen::Index r = 0; r < gram.rows(); ++r)
      for (Eigen::Index s = r + 1; s < gram.cols(); ++s)
        if (std::abs(gram(r, s)) > orth_tol * std::max(norms(r) * norms(s), 1e-300))
          throw std::logic_error("U columns are not mutually orthogonal");
  }
  if ((gamma.array() <= 0.0).any()) throw std::logic_error("gamma must be positive");
}

std::vector<int> layers_in_regime(const std::vector<int>& states, int m) {
  std::vector<int> out;
  for (std::size_t t = 0; t < states.size(); ++t)
    if (states[t] == m) out.push_back(static_cast<int>(t));
  return out;
}

}  // namespace hmtm
