#pragma once

#include "hmtm/model.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace hmtm {

struct MarginalOptions {
  int reduced_mcmc = 0;     // 0: same as the main run's mcmc
  int reduced_burnin = 100;
  double se_warn = 0.1;     // relative Monte-Carlo SE of an ordinate that triggers a warning
};

struct Ordinate {
  std::string block;
  double log_value = 0.0;
  double rel_se = 0.0;  // SE of the ordinate's Monte-Carlo mean relative to the mean
};

// Candidate's-formula estimate: log m(B) = log p(B | theta*) + log prior(theta*) - log posterior(theta*).
struct MarginalLikelihood {
  double log_likelihood = 0.0;
  double log_prior = 0.0;
  double log_posterior = 0.0;
  std::vector<Ordinate> ordinates;
  std::vector<std::string> warnings;

  double log_marginal() const { return log_likelihood + log_prior - log_posterior; }
  double neg2_log_marginal() const { return -2.0 * log_marginal(); }
  double neg2_log_likelihood() const { return -2.0 * log_likelihood; }
};

nlohmann::json to_json(const MarginalLikelihood& ml);
MarginalLikelihood marginal_from_json(const nlohmann::json& j);

// Posterior means of every block over the stored draws. The path is taken
// from the posterior mode; the transition matrix from the mean staying
// probabilities.
HmtmState posterior_means(const McmcTrace& trace);

// log p(B^upper | U, V, beta, sigma2, gamma, P) with the regime path summed
// out by the forward filter. Student-t errors integrate gamma out unless it
// is fixed in the config. With fixed states the path is not summed over.
double marginal_log_likelihood(const CorrectedTensor& B, const HmtmState& at, const HmtmConfig& config);

// Ordinates in the order mu_u, psi_u, mu_v, psi_v, beta (with an
// intercept), sigma2, P (M > 1). The first free block is Rao-Blackwellized
// over the main draws; each later block over a reduced run that holds the
// blocks before it at their posterior means. Fixed blocks are skipped in the
// prior and posterior terms.
MarginalLikelihood chib_marginal_likelihood(const CorrectedTensor& B, const HmtmConfig& config,
                                            const McmcTrace& trace, const MarginalOptions& options = {});

}  // namespace hmtm
