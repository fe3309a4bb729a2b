#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plasticnet/baselines.hpp"
#include "plasticnet/eval.hpp"
#include "plasticnet/netsim.hpp"
#include "plasticnet/samplers.hpp"

namespace plasticnet {

using Json = nlohmann::json;

// canonical names used in configs, chain files and CLI flags
std::string rule_kind_name(RuleKind kind);
RuleKind rule_kind_from_name(const std::string& name);
std::string link_name(LinkKind link);
LinkKind link_from_name(const std::string& name);

// ---- small filesystem helpers ----
void ensure_dir(const std::string& path);
std::string path_join(const std::string& dir, const std::string& name);
bool file_exists(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);
Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

// ---- CSV formats ----
// spikes.csv: header neuron_id,time_s; times with 6 decimals, grouped by
// neuron in ascending time order
void write_spikes_csv(const std::string& path, const SpikeData& spikes);
// events indexed by neuron id; n_neurons = max id + 1 unless a larger hint
std::vector<std::vector<double>> read_spike_events_csv(const std::string& path,
                                                       int n_neurons_hint = -1);

// truth_weights.csv / weights_mean.csv: header edge,coarse_index,value over
// the off-diagonal pairs; edge = pre*N + post
void write_weights_csv(const std::string& path, const Mat& weights, int n_neurons);
Mat read_weights_csv(const std::string& path, int n_neurons);

// truth_adjacency.csv: header pre,post,value over all ordered pairs
void write_adjacency_csv(const std::string& path, const IMat& adjacency);
IMat read_adjacency_csv(const std::string& path);

// scores.csv: header pre,post,score over the off-diagonal pairs
void write_scores_csv(const std::string& path, const Mat& scores);
Mat read_scores_csv(const std::string& path);

// roc.csv: header threshold,fpr,tpr
void write_roc_csv(const std::string& path, const RocResult& roc);

// rule_curve.csv: header lag_s,l_plus,l_minus; the pairwise STDP kernel
// amplitude at signed lags (post minus pre time)
void write_rule_curve_csv(const std::string& path, const LearningRuleParams& rule,
                          double lag_max_s = 0.1, int n_points = 201);

// ---- chain persistence (one JSON object per line) ----
Json chain_record_to_json(const ChainRecord& record);
ChainRecord chain_record_from_json(const Json& j);
void append_chain_record(const std::string& path, const ChainRecord& record);
// reads every complete record; *valid_bytes (when given) receives the file
// offset just past the last parseable line so a torn tail can be truncated
PosteriorChain read_chain(const std::string& path, long long* valid_bytes = nullptr);
void truncate_file(const std::string& path, long long size);

// ---- configuration documents ----
Json sim_config_to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const Json& j);

Json priors_to_json(const PriorSpec& priors);
PriorSpec priors_from_json(const Json& j, PriorSpec base = {});

struct InferJob {
  GibbsOptions options;
  PriorSpec priors;
  double train_end_s = -1.0;  // <= 0: fit the full duration, no held-out score
  double duration_s = -1.0;   // < 0: from the dataset's config.json or spike times
  double fine_dt_s = -1.0;    // < 0: from the dataset's config.json, else 1e-3
  double coarse_dt_s = -1.0;  // < 0: from the dataset's config.json, else 1.0
  int n_neurons = -1;         // < 0: from the dataset
  int n_basis = 6;
  double lag_max_s = 0.1;
  double burn_in_frac = 0.5;
  int thin = 1;  // record every thin-th sweep (plus the initial state)
  bool resume = false;
};
Json infer_job_to_json(const InferJob& job);
InferJob infer_job_from_json(const Json& j, InferJob base = {});

struct BaselineJob {
  std::string method = "xcorr";  // xcorr | map_glasso
  double lambda = -1.0;          // < 0: pick from lambda_grid by held-out fit
  std::vector<double> lambda_grid{0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0};
  double max_lag_s = 0.1;
  double bin_s = 2e-3;
  double train_end_s = -1.0;  // restrict fitting to [0, train_end_s)
  double duration_s = -1.0;
  double fine_dt_s = -1.0;
  double coarse_dt_s = -1.0;
  int n_neurons = -1;
  int n_basis = 6;
  double lag_max_s = 0.1;
};
Json baseline_job_to_json(const BaselineJob& job);
BaselineJob baseline_job_from_json(const Json& j, BaselineJob base = {});

struct EvaluateJob {
  std::string chain_path;            // chain.jsonl (optional if scores given)
  std::string scores_path;           // scores.csv (optional if chain given)
  std::string data_path;             // dataset dir or spikes.csv, for predictive LL
  std::string truth_adjacency_path;  // optional: enables ROC/AUC
  std::string truth_weights_path;    // optional: enables trajectory RMSE
  double train_end_s = -1.0;         // needed for predictive LL
  double burn_in_frac = 0.5;
  double duration_s = -1.0;
  double fine_dt_s = -1.0;
  double coarse_dt_s = -1.0;
  int n_neurons = -1;
  int n_basis = 6;
  double lag_max_s = 0.1;
};
Json evaluate_job_to_json(const EvaluateJob& job);
EvaluateJob evaluate_job_from_json(const Json& j, EvaluateJob base = {});

// ---- datasets ----
struct Dataset {
  SpikeData spikes;
  TimeGrid grid;
};
// data_path: either a directory holding spikes.csv (and optionally the
// config.json written by simulate, supplying defaults) or a spikes.csv path.
Dataset load_dataset(const std::string& data_path, double duration_s, double fine_dt_s,
                     double coarse_dt_s, int n_neurons);

// ---- commands (CLI semantics, exceptions map to exit codes in main) ----
void cmd_simulate(const SimConfig& config, const std::string& out_dir);
void cmd_infer(const std::string& data_path, const InferJob& job, const std::string& out_dir);
void cmd_baseline(const std::string& data_path, const BaselineJob& job,
                  const std::string& out_dir);
void cmd_evaluate(const EvaluateJob& job, const std::string& out_dir);

}  // namespace plasticnet
