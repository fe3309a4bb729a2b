#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "plasticnet/io.hpp"

using namespace plasticnet;

namespace {

int run(int argc, char** argv) {
  CLI::App app{"simulation and fully Bayesian inference for plastic spiking networks"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "sample a network and simulate spike trains");
  std::string sim_config, sim_preset, sim_out;
  uint64_t sim_seed = 0;
  sim->add_option("-c,--config", sim_config, "simulation config JSON")
      ->check(CLI::ExistingFile);
  sim->add_option("--preset", sim_preset,
                  "two_neuron_static|two_neuron_additive|two_neuron_multiplicative|"
                  "ten_neuron_additive");
  sim->add_option("-o,--out", sim_out, "output directory")->required();
  sim->add_option("--seed", sim_seed, "master seed");

  // infer
  auto* inf = app.add_subcommand("infer", "run the Gibbs sampler on a dataset");
  std::string inf_data, inf_config, inf_out, inf_rule, inf_link;
  uint64_t inf_seed = 0;
  int particles = 0, sweeps = 0, threads = 1, thin = 1;
  double burn_in = 0.5, train_end = -1.0, noise_std = 0.0;
  bool resume = false;
  inf->add_option("-d,--data", inf_data, "dataset directory or spikes.csv")->required();
  inf->add_option("-c,--config", inf_config, "inference config JSON")->check(CLI::ExistingFile);
  inf->add_option("-o,--out", inf_out, "output directory")->required();
  inf->add_option("--rule", inf_rule, "static|additive|additive_bounded|multiplicative");
  inf->add_option("--link", inf_link, "exp|softplus");
  inf->add_option("--particles", particles, "particles per conditional SMC update");
  inf->add_option("--sweeps", sweeps, "total Gibbs sweeps");
  inf->add_option("--burn-in", burn_in, "burn-in fraction for the summary");
  inf->add_option("--train-end", train_end, "fit only [0, train-end) seconds, score the rest");
  inf->add_option("--noise-std", noise_std, "weight innovation std per sqrt(second)");
  inf->add_option("--thin", thin, "record every thin-th sweep");
  inf->add_option("--seed", inf_seed, "master seed");
  inf->add_option("--threads", threads, "worker threads (result is thread-count invariant)");
  inf->add_flag("--resume", resume, "continue an interrupted chain in --out");

  // baseline
  auto* base = app.add_subcommand("baseline", "static connectivity baselines");
  std::string b_method = "xcorr", b_data, b_config, b_out;
  double b_lambda = -1.0, b_train_end = -1.0, b_max_lag = 0.1, b_bin = 2e-3;
  base->add_option("-m,--method", b_method, "xcorr|map_glasso")->required();
  base->add_option("-d,--data", b_data, "dataset directory or spikes.csv")->required();
  base->add_option("-c,--config", b_config, "baseline config JSON")->check(CLI::ExistingFile);
  base->add_option("-o,--out", b_out, "output directory")->required();
  base->add_option("--lambda", b_lambda, "group penalty (map_glasso); <0 selects from a grid");
  base->add_option("--train-end", b_train_end, "use only [0, train-end) seconds");
  base->add_option("--max-lag", b_max_lag, "correlogram window (xcorr), seconds");
  base->add_option("--bin", b_bin, "correlogram bin width (xcorr), seconds");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score a chain or baseline against ground truth");
  std::string e_chain, e_scores, e_data, e_adj, e_weights, e_config, e_out;
  double e_train_end = -1.0, e_burn_in = 0.5;
  ev->add_option("--chain", e_chain, "chain.jsonl from infer")->check(CLI::ExistingFile);
  ev->add_option("--scores", e_scores, "scores.csv from baseline")->check(CLI::ExistingFile);
  ev->add_option("-d,--data", e_data, "dataset (for held-out predictive likelihood)");
  ev->add_option("--truth-adjacency", e_adj, "truth_adjacency.csv")->check(CLI::ExistingFile);
  ev->add_option("--truth-weights", e_weights, "truth_weights.csv")->check(CLI::ExistingFile);
  ev->add_option("-c,--config", e_config, "evaluate config JSON")->check(CLI::ExistingFile);
  ev->add_option("-o,--out", e_out, "output directory")->required();
  ev->add_option("--train-end", e_train_end, "train/held-out boundary in seconds");
  ev->add_option("--burn-in", e_burn_in, "burn-in fraction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : 1;
  }

  if (*sim) {
    Json j = Json::object();
    if (!sim_config.empty()) j = read_json_file(sim_config);
    if (!sim_preset.empty() && !j.contains("preset")) j["preset"] = sim_preset;
    SimConfig cfg = sim_config_from_json(j);
    if (sim->count("--seed")) cfg.seed = sim_seed;
    cmd_simulate(cfg, sim_out);
  } else if (*inf) {
    InferJob job;
    if (!inf_config.empty()) job = infer_job_from_json(read_json_file(inf_config), job);
    if (inf->count("--rule")) job.options.rule = rule_kind_from_name(inf_rule);
    if (inf->count("--link")) job.options.link = link_from_name(inf_link);
    if (inf->count("--particles")) job.options.n_particles = particles;
    if (inf->count("--sweeps")) job.options.total_sweeps = sweeps;
    if (inf->count("--seed")) job.options.seed = inf_seed;
    if (inf->count("--noise-std")) job.options.noise_std = noise_std;
    if (inf->count("--burn-in")) job.burn_in_frac = burn_in;
    if (inf->count("--train-end")) job.train_end_s = train_end;
    if (inf->count("--thin")) job.thin = thin;
    job.options.threads = threads;
    job.resume = resume;
    cmd_infer(inf_data, job, inf_out);
  } else if (*base) {
    BaselineJob job;
    if (!b_config.empty()) job = baseline_job_from_json(read_json_file(b_config), job);
    job.method = b_method;
    if (base->count("--lambda")) job.lambda = b_lambda;
    if (base->count("--train-end")) job.train_end_s = b_train_end;
    if (base->count("--max-lag")) job.max_lag_s = b_max_lag;
    if (base->count("--bin")) job.bin_s = b_bin;
    cmd_baseline(b_data, job, b_out);
  } else if (*ev) {
    EvaluateJob job;
    if (!e_config.empty()) job = evaluate_job_from_json(read_json_file(e_config), job);
    if (ev->count("--chain")) job.chain_path = e_chain;
    if (ev->count("--scores")) job.scores_path = e_scores;
    if (ev->count("--data")) job.data_path = e_data;
    if (ev->count("--truth-adjacency")) job.truth_adjacency_path = e_adj;
    if (ev->count("--truth-weights")) job.truth_weights_path = e_weights;
    if (ev->count("--train-end")) job.train_end_s = e_train_end;
    if (ev->count("--burn-in")) job.burn_in_frac = e_burn_in;
    cmd_evaluate(job, e_out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const param_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const numeric_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
