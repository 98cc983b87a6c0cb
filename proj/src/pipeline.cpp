#include "hmtm/pipeline.hpp"

#include "hmtm/diagnostics.hpp"
#include "hmtm/marginal.hpp"
#include "hmtm/postprocess.hpp"
#include "hmtm/rng.hpp"
#include "hmtm/sampler.hpp"
#include "hmtm/synth.hpp"
#include "hmtm/tensor_io.hpp"
#include "hmtm/trace_io.hpp"
#include "hmtm/version.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace hmtm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDataStream = 0;
constexpr std::uint64_t kChainStreamBase = 1000;
constexpr std::uint64_t kClusterStream = 2000;

const std::array<std::string, 5> kStages{"generate", "correct", "fit", "compare", "export"};

int stage_rank(const std::string& name) {
  const auto it = std::find(kStages.begin(), kStages.end(), name);
  return it == kStages.end() ? -1 : static_cast<int>(it - kStages.begin());
}

struct Candidate {
  McmcTrace trace;
  std::optional<MarginalLikelihood> marginal;
  std::string error;
};

}  // namespace

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::Config: return "config";
    case Stage::Generate: return "generate";
    case Stage::Correct: return "correct";
    case Stage::Fit: return "fit";
    case Stage::Compare: return "compare";
    case Stage::Export: return "export";
  }
  return "unknown";
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw StageError(Stage::Config, "invalid run config: " + msg); };
  if (breaks.empty()) fail("breaks is empty");
  std::set<int> seen;
  for (int b : breaks) {
    if (b < 0) fail("break counts must be >= 0");
    if (!seen.insert(b).second) fail("break count " + std::to_string(b) + " listed twice");
  }
  if (stage_rank(stop_after) < 0) fail("stop_after must be one of generate|correct|fit|compare|export");
  if (out.empty()) fail("out is empty");
  if (k < 0 || restarts < 1) fail("k must be >= 0 and restarts >= 1");
  if (reduced_mcmc < 0) fail("reduced_mcmc must be >= 0");
  try {
    null_model_from_string(correction);
    error_kind_from_string(error);
    if (input.empty()) {
      synth::scenario_from_string(scenario);
      synth::EdgeProbabilities{p_in, p_out}.validate();
      if (n < 1 || T < 1) fail("n and T must be positive");
    }
    for (int b : breaks) {
      const HmtmConfig c = sampler_config(b);
      if (c.rank < 1 || c.burnin < 0 || c.mcmc < 1 || c.thin < 1 || c.mcmc / c.thin < 1)
        fail("rank, burnin, mcmc and thin must give at least one stored draw");
    }
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
}

HmtmConfig RunConfig::sampler_config(int n_breaks) const {
  HmtmConfig c;
  c.n_breaks = n_breaks;
  c.rank = rank;
  c.burnin = burnin;
  c.mcmc = mcmc;
  c.thin = thin;
  c.error_kind = error_kind_from_string(error);
  c.with_intercept = intercept;
  c.seed = Rng::stream(seed, kChainStreamBase + static_cast<std::uint64_t>(n_breaks)).next_u64();
  return c;
}

std::uint64_t RunConfig::data_seed() const { return Rng::stream(seed, kDataStream).next_u64(); }

json RunConfig::to_json() const {
  return json{{"input", input},     {"scenario", scenario},       {"n", n},
              {"T", T},             {"p_in", p_in},               {"p_out", p_out},
              {"correction", correction}, {"breaks", breaks},     {"rank", rank},
              {"burnin", burnin},   {"mcmc", mcmc},               {"thin", thin},
              {"error", error},     {"intercept", intercept},     {"seed", seed},
              {"out", out},         {"stop_after", stop_after},   {"skip_marglik", skip_marglik},
              {"reduced_mcmc", reduced_mcmc}, {"k", k},           {"restarts", restarts}};
}

void add_run_options(CLI::App& app, RunConfig& c) {
  app.set_config("--config", "", "flat key = value run config");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("--input", c.input, "edge list or tensor JSON (empty: generate)");
  app.add_option("--scenario", c.scenario, "constant|split|merge|mergesplit|splitmerge");
  app.add_option("--n", c.n, "block size");
  app.add_option("--T", c.T, "number of layers");
  app.add_option("--p_in,--p-in", c.p_in, "within-block link probability");
  app.add_option("--p_out,--p-out", c.p_out, "between-block link probability");
  app.add_option("--correction", c.correction, "eigen|modularity|none");
  app.add_option("--breaks", c.breaks, "candidate break counts")->delimiter(',');
  app.add_option("--rank", c.rank);
  app.add_option("--burnin", c.burnin);
  app.add_option("--mcmc", c.mcmc);
  app.add_option("--thin", c.thin);
  app.add_option("--error", c.error, "normal|t");
  app.add_flag("--intercept", c.intercept);
  app.add_option("--seed", c.seed);
  app.add_option("--out", c.out, "output directory");
  app.add_option("--stop_after,--stop-after", c.stop_after, "generate|correct|fit|compare|export");
  app.add_flag("--skip_marglik,--skip-marglik", c.skip_marglik);
  app.add_option("--reduced_mcmc,--reduced-mcmc", c.reduced_mcmc);
  app.add_option("--k", c.k, "k-means clusters on latent positions (0: off)");
  app.add_option("--restarts", c.restarts);
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  CLI::App app;
  add_run_options(app, c);
  std::istringstream in(text);
  try {
    app.parse_from_stream(in);
  } catch (const CLI::ParseError& e) {
    throw StageError(Stage::Config, std::string("invalid run config: ") + e.what());
  }
  return c;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

namespace {

PipelineResult run_stages(const RunConfig& rc) {
  rc.validate();
  PipelineResult result;
  const fs::path dir(rc.out);
  const int last = stage_rank(rc.stop_after);
  json seeds{{"master", rc.seed}};
  auto add = [&](const fs::path& rel) { result.artifacts.push_back(rel); };

  // generate
  NetworkTensor Y;
  std::string source;
  try {
    fs::create_directories(dir);
    if (rc.input.empty()) {
      const auto schedule = synth::default_schedule(synth::scenario_from_string(rc.scenario), rc.n, rc.T);
      seeds["data"] = rc.data_seed();
      Y = synth::make_block_network_change(schedule, {rc.p_in, rc.p_out}, rc.data_seed());
      source = "scenario:" + rc.scenario;
    } else {
      Y = io::load_network(rc.input);
      source = rc.input;
    }
    io::write_json(dir / "tensor.json", io::tensor_to_json(Y));
    add("tensor.json");
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(Stage::Generate, e.what());
  }

  CorrectedTensor B;
  if (last >= 1) {
    try {
      B = degree_correct(Y, null_model_from_string(rc.correction));
      io::write_json(dir / "corrected.json", io::corrected_to_json(B));
      add("corrected.json");
    } catch (const std::exception& e) {
      throw StageError(Stage::Correct, e.what());
    }
  }

  std::vector<Candidate> fits(rc.breaks.size());
  if (last >= 2) {
    // One chain per worker; the kernels inside each chain run serially here.
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t i = 0; i < rc.breaks.size(); ++i) {
      try {
        const HmtmConfig cfg = rc.sampler_config(rc.breaks[i]);
        cfg.validate(B.n_nodes, B.n_layers);
        fits[i].trace = fit_hmtm(B, cfg);
        if (!rc.skip_marglik && last >= 3) {
          MarginalOptions opt;
          opt.reduced_mcmc = rc.reduced_mcmc;
          fits[i].marginal = chib_marginal_likelihood(B, cfg, fits[i].trace, opt);
        }
      } catch (const std::exception& e) {
        fits[i].error = "M" + std::to_string(rc.breaks[i]) + ": " + e.what();
      }
    }
    json chain_seeds = json::object();
    for (std::size_t i = 0; i < fits.size(); ++i) {
      if (!fits[i].error.empty()) throw StageError(Stage::Fit, fits[i].error);
      chain_seeds["M" + std::to_string(rc.breaks[i])] = fits[i].trace.config.seed;
    }
    seeds["chains"] = chain_seeds;
    try {
      for (std::size_t i = 0; i < fits.size(); ++i) {
        const fs::path rel = "trace_M" + std::to_string(rc.breaks[i]) + ".json";
        io::TraceFile tf{fits[i].trace, B, source, Y.node_labels, fits[i].marginal};
        io::write_trace(dir / rel, tf);
        add(rel);
      }
    } catch (const std::exception& e) {
      throw StageError(Stage::Fit, e.what());
    }
  }

  std::optional<ModelComparison> comparison;
  if (last >= 3) {
    try {
      std::vector<DiagnosticsReport> reports;
      for (const Candidate& c : fits) reports.push_back(make_report(c.trace, c.marginal ? &*c.marginal : nullptr));
      comparison = compare_models(std::move(reports));
      io::write_json(dir / "report.json", to_json(*comparison), 2);
      std::ofstream txt(dir / "report.txt");
      txt << format_comparison(*comparison);
      if (!txt) throw std::runtime_error("cannot write report.txt");
      add("report.json");
      add("report.txt");
      result.summary = to_json(*comparison);
    } catch (const std::exception& e) {
      throw StageError(Stage::Compare, e.what());
    }
  }

  if (last >= 4) {
    try {
      std::size_t best = 0;
      while (rc.breaks[best] != comparison->verdict_breaks) ++best;
      const McmcTrace& trace = fits[best].trace;
      std::vector<RegimeSummary> summaries = summarize_regimes(trace);
      if (rc.k > 0) {
        seeds["cluster"] = Rng::stream(rc.seed, kClusterStream).next_u64();
        for (RegimeSummary& s : summaries)
          s.cluster_labels = kmeans_blocks(s.positions, rc.k, rc.restarts, seeds["cluster"].get<std::uint64_t>());
      }
      for (const fs::path& p : export_latent(summaries, Y.node_labels, dir)) add(p.filename());
      export_rules(trace, dir / "rules.csv");
      add("rules.csv");
    } catch (const std::exception& e) {
      throw StageError(Stage::Export, e.what());
    }
  }

  json files = json::object();
  for (const fs::path& rel : result.artifacts) files[rel.generic_string()] = sha256_file(dir / rel);
  json manifest{{"tool", "hmtm"},
                {"version", kVersion},
                {"rng", std::string(Rng::kAlgorithm)},
                {"config", rc.to_json()},
                {"seeds", seeds},
                {"files", files}};
  io::write_json(dir / "manifest.json", manifest, 2);
  result.artifacts.push_back("manifest.json");
  return result;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config) {
  try {
    return run_stages(config);
  } catch (const StageError& e) {
    PipelineResult r;
    r.exit_code = exit_code(e.stage());
    r.stage = to_string(e.stage());
    r.message = e.what();
    return r;
  } catch (const std::exception& e) {
    PipelineResult r;
    r.exit_code = 1;
    r.stage = "internal";
    r.message = e.what();
    return r;
  }
}

}  // namespace hmtm
