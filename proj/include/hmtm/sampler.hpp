#pragma once

#include "hmtm/gibbs.hpp"
#include "hmtm/model.hpp"
#include "hmtm/rng.hpp"

#include <functional>

namespace hmtm {

// Starting point of a chain: the layers are split into M equal consecutive
// segments; U_m comes from the leading eigenvectors of the sum of the
// segment's squared layers (diagonals imputed), v_t by least squares given U_m, sigma2_m from the
// residuals. Hyperparameters start at their prior means. Fixed blocks win.
HmtmState initialize_state(const CorrectedTensor& B, const HmtmConfig& config);

// Per-layer log density of B_t under the regime the state assigns to t.
// Student-t errors integrate gamma_t out; Normal errors use gamma_t = 1.
Vector layer_log_density(const CorrectedTensor& B, const HmtmState& state, const HmtmConfig& config);

class HmtmSampler {
 public:
  // Validates the config against B and initializes the chain.
  HmtmSampler(const CorrectedTensor& B, HmtmConfig config);
  // Starts from a given state instead; fixed blocks in the config override it.
  HmtmSampler(const CorrectedTensor& B, HmtmConfig config, HmtmState start);

  // One full sweep: hyperparameters and U per regime, then hyperparameters
  // and V per regime, intercept, variances, gamma, the regime path (with the
  // singleton perturbation when `burnin`) and the transition matrix.
  void sweep(bool burnin);

  const HmtmState& state() const { return state_; }
  const HmtmConfig& config() const { return config_; }
  // Forward-filter log likelihood computed during the last path update.
  double last_path_loglik() const { return last_loglik_; }

 private:
  void apply_fixed();

  const CorrectedTensor& B_;
  HmtmConfig config_;
  HmtmState state_;
  Rng rng_;
  double last_loglik_ = 0.0;
};

// Called after every sweep with (iteration, burnin?, state).
using SweepCallback = std::function<void(int, bool, const HmtmState&)>;

// Runs burnin + mcmc sweeps and stores every thin-th post-burn-in draw.
// Deterministic given config.seed.
McmcTrace fit_hmtm(const CorrectedTensor& B, const HmtmConfig& config, const SweepCallback& on_sweep = {});

}  // namespace hmtm
