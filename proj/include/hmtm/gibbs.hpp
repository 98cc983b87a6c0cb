#pragma once

// Full-conditional parameters and single-block updates of the sampler. The
// `*_conditional` functions return distribution parameters so that the
// marginal-likelihood ordinates and the tests can evaluate them; the
// `sample_*` functions draw from them.

#include "hmtm/model.hpp"
#include "hmtm/rng.hpp"

#include <vector>

namespace hmtm::gibbs {

struct InvGammaParams {
  double shape = 1.0;
  double scale = 1.0;
};

struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;
};

struct BetaParams {
  double a = 1.0;
  double b = 1.0;
};

// Independent normals, one per coordinate.
struct DiagNormalParams {
  Vector mean;
  Vector var;
};

struct ScalarNormalParams {
  double mean = 0.0;
  double var = 1.0;
};

// Rows of U are independent N(mean.row(i), row_cov).
struct MatrixNormalParams {
  Matrix mean;     // N x R
  Matrix row_cov;  // R x R
};

// Number of upper-triangular cells per layer, N(N-1)/2.
double cells_per_layer(int n_nodes);

// psi_{r,u,m} | U_m ~ IG((u0 + N)/2, (U_r'U_r + u1)/2), one entry per column r.
std::vector<InvGammaParams> psi_u_conditional(const Matrix& U, const Priors& priors);
Vector sample_psi_u(const Matrix& U, const Priors& priors, Rng& rng);

// mu_{u,m} | U_m, psi ~ N((U'1 + mu0)/(N+1), psi/(N+1)).
DiagNormalParams mu_u_conditional(const Matrix& U, const Vector& psi, const Vector& mu0);
Vector sample_mu_u(const Matrix& U, const Vector& psi, const Vector& mu0, Rng& rng);

// Same forms for the layer weights of regime m, with the regime's T_m rows.
std::vector<InvGammaParams> psi_v_conditional(const Matrix& V_m, const Priors& priors);
Vector sample_psi_v(const Matrix& V_m, const Priors& priors, Rng& rng);
DiagNormalParams mu_v_conditional(const Matrix& V_m, const Vector& psi, const Vector& mu0);
Vector sample_mu_v(const Matrix& V_m, const Vector& psi, const Vector& mu0, Rng& rng);

// Rows of V (T x R) whose layers are listed in idx.
Matrix rows_of(const Matrix& V, const std::vector<int>& idx);

// Joint update of U_m given everything else. Q = (U'U) o (V_m' Gamma V_m),
// L[i,r] = sum_t gamma_t v_tr sum_{j != i} (b_ijt - beta) u_jr.
MatrixNormalParams U_conditional(const CorrectedTensor& B, const HmtmState& state, int m);
Matrix sample_U(const CorrectedTensor& B, const HmtmState& state, int m, Rng& rng);

// Conditional of row i of U_m given all other rows:
// Q_i = (U'U - u_i u_i') o (V_m' Gamma V_m), L_i as above.
std::pair<Vector, Matrix> U_row_conditional(const CorrectedTensor& B, const HmtmState& state, int m, int i);
// Rows updated in order 0..N-1, each from U_row_conditional at the current
// values, then the columns orthogonalized.
Matrix sample_U_rowwise(const CorrectedTensor& B, const HmtmState& state, int m, Rng& rng);

// Modified Gram-Schmidt without normalization, in place. Column lengths are
// kept as the scale of each latent dimension.
void orthogonalize_columns(Matrix& U);

// u_r <- u_r / |u_r| and v_tr <- v_tr |u_r|^2 for the layers of regime m.
// Leaves every fitted mean U_m diag(v_t) U_m' unchanged.
void anchor_scale(HmtmState& state, int m);

// v_t | U_m, ... for each layer t of regime m (rows written into state.V).
// Precision gamma_t Q_v / sigma2_m + Psi_v^{-1} with
// Q_v[r,s] = sum_{i<j} u_ir u_jr u_is u_js.
void sample_V(const CorrectedTensor& B, HmtmState& state, int m, Rng& rng);
// Mean and covariance of row t under the current state.
std::pair<Vector, Matrix> V_row_conditional(const CorrectedTensor& B, const HmtmState& state, int t);

// sigma2_m ~ IG((c0 + E_m)/2, (d0 + sum_{t in m} gamma_t SSR_t)/2), E_m = N(N-1)/2 * T_m.
InvGammaParams sigma2_conditional(const CorrectedTensor& B, const HmtmState& state, int m, const Priors& priors);
double sample_sigma2(const CorrectedTensor& B, const HmtmState& state, int m, const Priors& priors, Rng& rng);

// Common intercept: precision 1/B0 + sum_t gamma_t D / sigma2_{S_t}.
ScalarNormalParams beta_conditional(const CorrectedTensor& B, const HmtmState& state, const Priors& priors);
double sample_beta(const CorrectedTensor& B, const HmtmState& state, const Priors& priors, Rng& rng);

// gamma_t ~ Gamma((nu0 + D)/2, rate (nu1 + SSR_t / sigma2_{S_t})/2).
std::vector<GammaParams> gamma_conditional(const CorrectedTensor& B, const HmtmState& state, const Priors& priors);
Vector sample_gamma(const CorrectedTensor& B, const HmtmState& state, const Priors& priors, Rng& rng);

// T x M: log density of layer t's upper triangle if it belonged to regime m,
// conditional on gamma_t.
Matrix layer_loglik_table(const CorrectedTensor& B, const HmtmState& state);

// Same with gamma_t integrated out against its Gamma(nu0/2, nu1/2) prior
// (a multivariate Student-t density).
Matrix layer_loglik_table_marginal(const CorrectedTensor& B, const HmtmState& state, const Priors& priors);

struct ForwardFilter {
  Matrix log_filtered;       // T x M, log p(S_t = k | B_1..t), normalized per row
  double log_likelihood = 0;  // log p(B_1..T), terminal state unconstrained
};

// Filter for a forward-moving chain started in regime 1.
ForwardFilter forward_filter(const Matrix& loglik, const Matrix& transition);

// Backward sampling with S_T = M imposed. Throws std::runtime_error naming
// the layer if the path has zero probability.
std::vector<int> backward_sample(const ForwardFilter& filter, const Matrix& transition, Rng& rng);

// Forward filtering, backward sampling of the regime path.
struct FfbsResult {
  std::vector<int> states;
  double log_likelihood = 0;
};
FfbsResult sample_states(const CorrectedTensor& B, const HmtmState& state, Rng& rng);

// Burn-in only. When some regime holds a single layer the break points are
// redrawn: uniformly over all strictly increasing positions when the weights
// are uniform, otherwise as T iid labels drawn from `weights`, sorted, and
// redrawn until every regime is occupied. Identity when no regime is a singleton.
std::vector<int> perturb_singletons(const std::vector<int>& states, int n_regimes,
                                    const std::vector<double>& weights, Rng& rng);
bool has_singleton(const std::vector<int>& states, int n_regimes);

// p_kk | S ~ Beta(a0 + j_kk - 1, b0 + j_{k,k+1}) for k < M. Throws
// std::domain_error if a first parameter is not positive.
std::vector<BetaParams> transition_conditional(const std::vector<int>& states, int n_regimes, const Priors& priors);
Matrix sample_transition(const std::vector<int>& states, int n_regimes, const Priors& priors, Rng& rng);
// Upper-bidiagonal matrix from its diagonal.
Matrix transition_from_diagonal(const std::vector<double>& p_stay);

}  // namespace hmtm::gibbs
