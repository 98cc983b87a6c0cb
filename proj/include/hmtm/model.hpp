#pragma once

#include "hmtm/net_tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hmtm {

enum class ErrorKind { Normal, StudentT };

std::string to_string(ErrorKind kind);
ErrorKind error_kind_from_string(const std::string& name);

// RowWise: each row of U_m drawn from its exact conditional given the other
// rows, node i's own term left out of Q. Joint: all rows at once from the
// matrix normal with Q = (U'U) o (V'V), self-term included; this variant lets
// the U/V scale drift (U shrinks, V grows) and is kept for comparison.
enum class UUpdate { RowWise, Joint };

std::string to_string(UUpdate kind);
UUpdate u_update_from_string(const std::string& name);

// Hyperparameters. Vectors left empty are read as zeros of length R.
struct Priors {
  double u0 = 10.0, u1 = 1.0;  // psi_{r,u,m} ~ IG(u0/2, u1/2)
  double v0 = 10.0, v1 = 1.0;  // psi_{r,v,m} ~ IG(v0/2, v1/2)
  double c0 = 1.0, d0 = 1.0;   // sigma^2_m ~ IG(c0/2, d0/2)
  // p_kk | S ~ Beta(a0 + j_kk - 1, b0 + j_{k,k+1}), i.e. an effective
  // Beta(a0 - 1, b0) prior on the staying probability.
  double a0 = 2.0, b0 = 1.0;
  double nu0 = 5.0, nu1 = 5.0;  // gamma_t ~ Gamma(nu0/2, rate nu1/2), Student-t errors only
  Vector mu0_u, mu0_v;
  double beta_mean = 0.0;  // b0 of the intercept prior
  double beta_var = 10.0;  // B0 of the intercept prior

  Vector mu0_u_or_zero(int rank) const;
  Vector mu0_v_or_zero(int rank) const;
};

// Blocks held at known values. A fixed block is never updated by the sampler
// and acts as a point-mass prior in the marginal likelihood.
struct FixedBlocks {
  std::optional<std::vector<Matrix>> U;
  std::optional<Matrix> V;
  std::optional<std::vector<Vector>> mu_u, psi_u, mu_v, psi_v;
  std::optional<std::vector<double>> sigma2;
  std::optional<double> beta;
  std::optional<Vector> gamma;
  std::optional<std::vector<int>> states;  // 0-based regimes
  std::optional<Matrix> transition;

  bool any() const;
};

struct HmtmConfig {
  int n_breaks = 0;  // M - 1
  int rank = 2;      // R
  int burnin = 1000;
  int mcmc = 1000;
  int thin = 1;
  Priors priors;
  ErrorKind error_kind = ErrorKind::Normal;
  bool with_intercept = false;
  UUpdate u_update = UUpdate::RowWise;
  // After each U_m draw, rescale its columns to unit length and move the
  // factor into v_t of the regime's layers (U diag(v) U' is unchanged).
  bool anchor_scale = true;
  std::vector<double> perturb_weights;  // empty means uniform
  std::uint64_t seed = 1;
  FixedBlocks fixed;

  int n_regimes() const { return n_breaks + 1; }
  std::vector<double> perturb_weights_or_uniform() const;
  // Throws std::invalid_argument; dims are those of the data to be fitted.
  void validate(int n_nodes, int n_layers) const;
};

// Forward-moving hidden state path. States are 0-based here (regime m is
// reported as m + 1 in files): states[0] == 0, states[T-1] == M-1 and each
// step stays or advances by one. `transition` is upper bidiagonal with
// rows summing to one and p_{M-1,M-1} == 1.
struct RegimePath {
  std::vector<int> states;
  Matrix transition;

  // Throws std::logic_error describing the violated invariant.
  void validate(int n_regimes) const;
  // 1-based last layer of each of the first M-1 regimes.
  std::vector<int> breakpoints(int n_regimes) const;
  std::vector<int> regime_lengths(int n_regimes) const;
};

bool is_valid_path(const std::vector<int>& states, int n_regimes);

struct HmtmState {
  std::vector<Matrix> U;        // M matrices, N x R
  std::vector<Vector> mu_u;     // M
  std::vector<Vector> psi_u;    // M, diagonal of Psi_{u,m}
  Matrix V;                     // T x R, row t is v_t
  std::vector<Vector> mu_v;     // M
  std::vector<Vector> psi_v;    // M
  std::vector<double> sigma2;   // M
  double beta = 0.0;
  Vector gamma;                 // T, all ones under Normal errors
  RegimePath path;

  int n_regimes() const { return static_cast<int>(U.size()); }
  // Checks positivity, path structure and column orthogonality of each U_m.
  void validate(double orth_tol = 1e-8) const;
};

// Layers (0-based) assigned to regime m.
std::vector<int> layers_in_regime(const std::vector<int>& states, int m);

struct McmcTrace {
  HmtmConfig config;
  int n_nodes = 0;
  int n_layers = 0;
  std::vector<HmtmState> draws;  // G stored draws after burn-in and thinning
  Matrix loglayer;               // G x T per-layer log densities over upper-triangular cells
  Eigen::MatrixXi breakpoints;   // G x (M-1), 1-based last layer of each regime

  int n_draws() const { return static_cast<int>(draws.size()); }
};

}  // namespace hmtm
