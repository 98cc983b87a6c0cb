#include "hmtm/diagnostics.hpp"
#include "hmtm/marginal.hpp"
#include "hmtm/pipeline.hpp"
#include "hmtm/postprocess.hpp"
#include "hmtm/sampler.hpp"
#include "hmtm/synth.hpp"
#include "hmtm/tensor_io.hpp"
#include "hmtm/trace_io.hpp"
#include "hmtm/version.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hmtm;

namespace {

bool g_json = false;

void emit(const json& j, const std::string& text) {
  if (g_json)
    std::cout << j.dump(2) << '\n';
  else if (!text.empty())
    std::cout << text;
}

int fail(Stage stage, const std::string& msg) {
  if (g_json)
    std::cout << json{{"ok", false}, {"stage", to_string(stage)}, {"error", msg}}.dump(2) << '\n';
  std::cerr << "hmtm " << to_string(stage) << ": " << msg << '\n';
  return exit_code(stage);
}

struct GenerateArgs {
  std::string scenario = "split";
  int n = 10, T = 40;
  double p_in = 0.5, p_out = 0.05;
  std::uint64_t seed = 1;
  std::string out = "tensor.json";
};

int run_generate(const GenerateArgs& a) {
  try {
    const auto schedule = synth::default_schedule(synth::scenario_from_string(a.scenario), a.n, a.T);
    const NetworkTensor Y = synth::make_block_network_change(schedule, {a.p_in, a.p_out}, a.seed);
    io::write_json(a.out, io::tensor_to_json(Y));
    json j{{"ok", true}, {"out", a.out}, {"n_nodes", Y.n_nodes}, {"n_layers", Y.n_layers},
           {"break_times", schedule.break_times}};
    emit(j, "wrote " + a.out + " (" + std::to_string(Y.n_nodes) + " nodes, " + std::to_string(Y.n_layers) +
                " layers)\n");
    return 0;
  } catch (const std::exception& e) {
    return fail(Stage::Generate, e.what());
  }
}

struct CorrectArgs {
  std::string input, kind = "eigen", out = "corrected.json";
};

int run_correct(const CorrectArgs& a) {
  try {
    const CorrectedTensor B = degree_correct(io::load_network(a.input), null_model_from_string(a.kind));
    io::write_json(a.out, io::corrected_to_json(B));
    emit(json{{"ok", true}, {"out", a.out}, {"null_model", to_string(B.null_model.kind)}},
         "wrote " + a.out + " (" + to_string(B.null_model.kind) + ")\n");
    return 0;
  } catch (const std::exception& e) {
    return fail(Stage::Correct, e.what());
  }
}

struct FitArgs {
  std::string input, correction = "eigen", error = "normal", out = "trace.json", u_update = "rowwise";
  int breaks = 0, rank = 2, burnin = 1000, mcmc = 1000, thin = 1;
  bool intercept = false, marglik = false;
  std::uint64_t seed = 1;
};

int run_fit(const FitArgs& a) {
  HmtmConfig c;
  CorrectedTensor B;
  try {
    c.n_breaks = a.breaks;
    c.rank = a.rank;
    c.burnin = a.burnin;
    c.mcmc = a.mcmc;
    c.thin = a.thin;
    c.seed = a.seed;
    c.with_intercept = a.intercept;
    c.error_kind = error_kind_from_string(a.error);
    c.u_update = u_update_from_string(a.u_update);
    B = io::load_corrected(a.input, null_model_from_string(a.correction));
    c.validate(B.n_nodes, B.n_layers);
  } catch (const std::exception& e) {
    return fail(Stage::Config, e.what());
  }
  try {
    io::TraceFile tf;
    tf.trace = fit_hmtm(B, c);
    if (a.marglik) tf.marginal = chib_marginal_likelihood(B, c, tf.trace);
    tf.data = B;
    tf.source_path = a.input;
    io::write_trace(a.out, tf);
    const DiagnosticsReport r = make_report(tf.trace, tf.marginal ? &*tf.marginal : nullptr);
    json j = to_json(r);
    j["ok"] = true;
    j["out"] = a.out;
    std::string text = "wrote " + a.out + "\nWAIC " + std::to_string(r.waic) + "\n";
    if (!r.mode_breaks.empty()) {
      text += "breaks";
      for (int b : r.mode_breaks) text += " " + std::to_string(b);
      text += "\n";
    }
    emit(j, text);
    return 0;
  } catch (const std::exception& e) {
    return fail(Stage::Fit, e.what());
  }
}

struct CompareArgs {
  std::vector<std::string> traces;
  bool skip_marglik = false;
  int reduced_mcmc = 0;
  std::string out;
};

int run_compare(const CompareArgs& a) {
  try {
    std::vector<DiagnosticsReport> reports;
    for (const std::string& path : a.traces) {
      io::TraceFile tf = io::read_trace(path);
      if (!a.skip_marglik && !tf.marginal) {
        MarginalOptions opt;
        opt.reduced_mcmc = a.reduced_mcmc;
        tf.marginal = chib_marginal_likelihood(tf.data, tf.trace.config, tf.trace, opt);
      }
      const MarginalLikelihood* ml = a.skip_marglik || !tf.marginal ? nullptr : &*tf.marginal;
      reports.push_back(make_report(tf.trace, ml));
    }
    const ModelComparison cmp = compare_models(std::move(reports));
    if (!a.out.empty()) io::write_json(a.out, to_json(cmp), 2);
    emit(to_json(cmp), format_comparison(cmp));
    return 0;
  } catch (const std::exception& e) {
    return fail(Stage::Compare, e.what());
  }
}

struct ExportArgs {
  std::string trace, what = "latent", out = ".";
  int k = 0, restarts = 20;
  std::uint64_t seed = 1;
};

int run_export(const ExportArgs& a) {
  try {
    const io::TraceFile tf = io::read_trace(a.trace);
    json files = json::array();
    if (a.what == "latent") {
      std::vector<RegimeSummary> summaries = summarize_regimes(tf.trace);
      if (a.k > 0)
        for (RegimeSummary& s : summaries) s.cluster_labels = kmeans_blocks(s.positions, a.k, a.restarts, a.seed);
      fs::create_directories(a.out);
      for (const fs::path& p : export_latent(summaries, tf.node_labels, a.out)) files.push_back(p.string());
    } else if (a.what == "rules") {
      fs::path file = a.out;
      if (fs::is_directory(file) || file.extension().empty()) {
        fs::create_directories(file);
        file /= "rules.csv";
      }
      export_rules(tf.trace, file);
      files.push_back(file.string());
    } else {
      throw std::invalid_argument("--what must be latent or rules");
    }
    std::string text;
    for (const auto& f : files) text += "wrote " + f.get<std::string>() + "\n";
    emit(json{{"ok", true}, {"files", files}}, text);
    return 0;
  } catch (const std::exception& e) {
    return fail(Stage::Export, e.what());
  }
}

int run_pipeline_cmd(const RunConfig& rc) {
  try {
    rc.validate();
  } catch (const StageError& e) {
    return fail(e.stage(), e.what());
  }
  const PipelineResult r = run_pipeline(rc);
  if (r.exit_code != 0) {
    if (g_json) std::cout << json{{"ok", false}, {"stage", r.stage}, {"error", r.message}}.dump(2) << '\n';
    std::cerr << "hmtm " << r.stage << ": " << r.message << '\n';
    return r.exit_code;
  }
  json files = json::array();
  for (const fs::path& p : r.artifacts) files.push_back(p.generic_string());
  json j{{"ok", true}, {"out", rc.out}, {"files", files}};
  if (!r.summary.is_null()) j["comparison"] = r.summary;
  std::string text = "wrote " + std::to_string(files.size()) + " files to " + rc.out + "\n";
  if (!r.summary.is_null()) text += "WAIC selects M" + std::to_string(r.summary.value("verdict_breaks", 0)) + "\n";
  emit(j, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hidden Markov multilinear tensor model for longitudinal networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("hmtm ") + kVersion);
  app.add_flag("--json", g_json, "machine-readable output");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "planted-partition network with block changes");
  gen->add_option("--scenario", ga.scenario, "constant|split|merge|mergesplit|splitmerge");
  gen->add_option("--n", ga.n, "block size");
  gen->add_option("--T", ga.T, "number of layers");
  gen->add_option("--p-in", ga.p_in);
  gen->add_option("--p-out", ga.p_out);
  gen->add_option("--seed", ga.seed);
  gen->add_option("--out", ga.out, "tensor JSON");

  CorrectArgs ca;
  auto* cor = app.add_subcommand("correct", "subtract a null model from each layer");
  cor->add_option("--input", ca.input)->required();
  cor->add_option("--kind", ca.kind, "eigen|modularity|none");
  cor->add_option("--out", ca.out);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "run the Gibbs sampler for one break count");
  fit->add_option("--input", fa.input, "tensor JSON, corrected JSON or edge list")->required();
  fit->add_option("--correction", fa.correction, "null model for raw input: eigen|modularity|none");
  fit->add_option("--breaks", fa.breaks, "number of breaks M-1");
  fit->add_option("--rank", fa.rank);
  fit->add_option("--burnin", fa.burnin);
  fit->add_option("--mcmc", fa.mcmc);
  fit->add_option("--thin", fa.thin);
  fit->add_option("--seed", fa.seed);
  fit->add_option("--error", fa.error, "normal|t");
  fit->add_flag("--intercept", fa.intercept);
  fit->add_option("--u-update", fa.u_update, "rowwise|joint");
  fit->add_flag("--marglik", fa.marglik, "store the marginal-likelihood estimate in the trace");
  fit->add_option("--out", fa.out, "trace JSON");

  CompareArgs pa;
  auto* cmp = app.add_subcommand("compare", "rank fitted models by WAIC");
  cmp->add_option("traces", pa.traces, "trace files")->required();
  cmp->add_flag("--skip-marglik", pa.skip_marglik, "omit the marginal likelihood");
  cmp->add_option("--reduced-mcmc", pa.reduced_mcmc, "reduced-run length (0: chain length)");
  cmp->add_option("--out", pa.out, "report JSON");

  ExportArgs ea;
  auto* exp = app.add_subcommand("export", "write latent positions or generation rules as CSV");
  exp->add_option("--trace", ea.trace)->required();
  exp->add_option("--what", ea.what, "latent|rules");
  exp->add_option("--k", ea.k, "k-means clusters (0: off)");
  exp->add_option("--restarts", ea.restarts);
  exp->add_option("--seed", ea.seed);
  exp->add_option("--out", ea.out, "output directory");

  // Options of `pipeline` are parsed by a dedicated top-level parser so that
  // --config files are honoured; see run_pipeline_args.
  auto* pipe = app.add_subcommand("pipeline", "generate, correct, fit, compare and export in one run (see pipeline --help)");
  pipe->prefix_command();
  pipe->set_help_flag();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code(Stage::Config);
  }

  if (*gen) return run_generate(ga);
  if (*cor) return run_correct(ca);
  if (*fit) return run_fit(fa);
  if (*cmp) return run_compare(pa);
  if (*exp) return run_export(ea);
  std::vector<std::string> rest = pipe->remaining();
  std::reverse(rest.begin(), rest.end());
  RunConfig rc;
  CLI::App papp{"hmtm pipeline: flat key = value config; every key is also a flag", "hmtm pipeline"};
  add_run_options(papp, rc);
  try {
    papp.parse(rest);
  } catch (const CLI::CallForHelp& e) {
    return papp.exit(e);
  } catch (const CLI::ParseError& e) {
    papp.exit(e);
    return exit_code(Stage::Config);
  }
  return run_pipeline_cmd(rc);
}
