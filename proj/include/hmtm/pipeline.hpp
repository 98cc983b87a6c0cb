#pragma once

#include "hmtm/model.hpp"
#include "hmtm/net_tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace hmtm {

// Exit codes by stage.
enum class Stage { Config = 2, Generate = 3, Correct = 4, Fit = 5, Compare = 6, Export = 7 };

std::string to_string(Stage stage);
inline int exit_code(Stage stage) { return static_cast<int>(stage); }

class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, const std::string& what) : std::runtime_error(what), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

// Flat key = value config; every key is also a command-line flag of the same
// name (`--burnin 500`). Keys:
//   input        edge list or tensor JSON; empty means generate `scenario`
//   scenario     constant|split|merge|mergesplit|splitmerge
//   n, T, p_in, p_out           generator settings
//   correction   eigen|modularity|none
//   breaks       candidate break counts, e.g. 0,1,2,3
//   rank, burnin, mcmc, thin, error (normal|t), intercept
//   seed         master seed; data and chain seeds are derived from it
//   out          output directory
//   stop_after   generate|correct|fit|compare|export
//   skip_marglik, reduced_mcmc  marginal-likelihood settings
//   k, restarts  k-means on the selected model's latent positions (k = 0: off)
struct RunConfig {
  std::string input;
  std::string scenario = "split";
  int n = 10;
  int T = 40;
  double p_in = 0.5;
  double p_out = 0.05;
  std::string correction = "eigen";
  std::vector<int> breaks{0, 1, 2, 3};
  int rank = 2;
  int burnin = 1000;
  int mcmc = 1000;
  int thin = 1;
  std::string error = "normal";
  bool intercept = false;
  std::uint64_t seed = 1;
  std::string out = "hmtm_out";
  std::string stop_after = "export";
  bool skip_marglik = false;
  int reduced_mcmc = 0;
  int k = 0;
  int restarts = 20;

  // Throws StageError(Stage::Config).
  void validate() const;
  // Sampler config for a candidate with `n_breaks` breaks; chain seed derived from `seed`.
  HmtmConfig sampler_config(int n_breaks) const;
  std::uint64_t data_seed() const;
  nlohmann::json to_json() const;
};

// Registers every RunConfig key as an option of `app`, plus `--config <file>`.
void add_run_options(CLI::App& app, RunConfig& config);

// Parses `key = value` text (the config file format) into a RunConfig.
RunConfig parse_run_config(const std::string& text);

struct PipelineResult {
  int exit_code = 0;
  std::string stage;    // failing stage, empty on success
  std::string message;
  std::vector<std::filesystem::path> artifacts;  // relative to the output directory
  nlohmann::json summary;                        // comparison verdict etc.
};

// Runs generate -> correct -> fit -> compare -> export. Candidate models are
// fitted concurrently (one chain per worker); files are written afterwards by
// one thread. A manifest.json with the version, seeds and SHA-256 of every
// artifact closes the run. Never throws; failures come back as stage codes.
PipelineResult run_pipeline(const RunConfig& config);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace hmtm
