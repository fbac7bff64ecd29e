// Command-line driver: simulate | train | loglik | predict | evaluate | metrics.
//
// Every subcommand reads an optional key=value config file; flags override
// file values, and DYNMDND_OUT overrides the configured output directory.
// All outputs land under the output directory and are reproducible given
// --seed.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynmdnd/dynmdnd.hpp"

namespace fs = std::filesystem;
using namespace dynmdnd;

namespace {

struct CliState {
  std::string config_path;
  std::map<std::string, std::string> overrides;  // config keys set via flags
};

// Registers a flag that funnels into RunConfig::set under `key`.
void add_kv_option(CLI::App* cmd, CliState& st, const std::string& flag, const std::string& key,
                   const std::string& desc) {
  cmd->add_option_function<std::string>(
      flag, [&st, key](const std::string& v) { st.overrides[key] = v; }, desc);
}

void add_kv_flag(CLI::App* cmd, CliState& st, const std::string& flag, const std::string& key,
                 const std::string& desc) {
  cmd->add_flag_callback(
      flag, [&st, key]() { st.overrides[key] = "true"; }, desc);
}

void add_common(CLI::App* cmd, CliState& st) {
  cmd->add_option("--config", st.config_path, "key=value config file");
  add_kv_option(cmd, st, "--out", "out_dir", "output directory");
  add_kv_option(cmd, st, "--seed", "seed", "RNG seed; equal seeds reproduce runs exactly");
  add_kv_option(cmd, st, "--alpha", "alpha", "seating self-link mass");
  add_kv_option(cmd, st, "--gamma", "gamma", "global concentration");
  add_kv_option(cmd, st, "--tau", "tau", "per-cluster concentration");
  add_kv_option(cmd, st, "--tau-recipient", "tau_recipient",
                "separate concentration for recipient restaurants");
  add_kv_option(cmd, st, "--decay", "decay", "identity|exponential|logistic|window");
  add_kv_option(cmd, st, "--decay-scale", "decay_scale", "decay width parameter");
}

void add_dataset(CLI::App* cmd, CliState& st) {
  add_kv_option(cmd, st, "--data", "dataset.path", "edge list file");
  add_kv_option(cmd, st, "--delimiter", "dataset.delimiter", "field delimiter (auto|tab|<char>)");
  add_kv_option(cmd, st, "--col-sender", "dataset.col_sender", "sender column index");
  add_kv_option(cmd, st, "--col-recipient", "dataset.col_recipient", "recipient column index");
  add_kv_option(cmd, st, "--col-time", "dataset.col_time", "timestamp column index");
  add_kv_flag(cmd, st, "--header", "dataset.header", "skip the first non-comment line");
  add_kv_option(cmd, st, "--time-unit", "dataset.time_unit", "multiplier to seconds");
  add_kv_flag(cmd, st, "--symmetrize", "dataset.symmetrize", "add the reverse of every edge");
  add_kv_option(cmd, st, "--slotting", "dataset.slotting",
                "none|fixed-width|boundaries|per-file");
  add_kv_option(cmd, st, "--slot-width", "dataset.slot_width", "slot width (fixed-width mode)");
  add_kv_option(cmd, st, "--slot-boundaries", "dataset.slot_boundaries",
                "comma-separated boundaries");
  add_kv_option(cmd, st, "--slot-column", "dataset.slot_column", "slot column (per-file mode)");
}

void add_chain(CLI::App* cmd, CliState& st) {
  add_kv_option(cmd, st, "--sweeps", "sweeps", "Gibbs sweeps per chain");
  add_kv_option(cmd, st, "--burn-in", "burn_in", "sweeps discarded before retaining samples");
  add_kv_option(cmd, st, "--thin", "thin", "keep every thin-th sweep");
  add_kv_option(cmd, st, "--chains", "chains", "independent chains run in parallel");
  add_kv_flag(cmd, st, "--hyper-resample", "hyper_resample",
              "slice-sample alpha, gamma, tau between sweeps");
  add_kv_option(cmd, st, "--exact-cutoff", "exact_cutoff",
                "component size up to which link moves are exact");
  add_kv_flag(cmd, st, "--debug-checks", "debug_checks", "rebuild counts after every sweep");
}

RunConfig resolve(const CliState& st) {
  RunConfig cfg;
  if (!st.config_path.empty()) cfg = load_config(st.config_path);
  if (const char* env = std::getenv("DYNMDND_OUT")) cfg.out_dir = env;
  for (const auto& [k, v] : st.overrides) cfg.set(k, v);
  cfg.chain.seed = cfg.seed;
  return cfg;
}

fs::path prepare_out(const RunConfig& cfg) {
  fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_meta(const fs::path& dir, const RunConfig& cfg, const std::string& command) {
  nlohmann::json j = config_to_json(cfg);
  j["command"] = command;
  write_json((dir / "meta.json").string(), j);
}

void attach_fixed_slots(EdgeSequence& edges, double width) {
  if (!(width > 0.0) || edges.empty()) return;
  const double t0 = edges.edges.front().time;
  const double t1 = edges.edges.back().time;
  double b = t0 + width;
  while (true) {
    edges.slot_boundaries.push_back(b);
    if (b > t1) break;
    b += width;
  }
}

int cmd_simulate(const CliState& st) {
  RunConfig cfg = resolve(st);
  SimConfig sc{cfg.sim_edges, cfg.hp, cfg.time_process, cfg.rate, cfg.seed};
  SimResult res = simulate(sc);
  attach_fixed_slots(res.edges, cfg.slot_width);

  const fs::path dir = prepare_out(cfg);
  export_edges((dir / "edges.tsv").string(), res.edges);
  nlohmann::json truth;
  truth["links"] = res.seating.links;
  truth["clusters"] = res.seating.clusters;
  truth["n_vertices"] = res.n_vertices;
  truth["n_clusters"] = res.counts.n_clusters();
  truth["log_prob"] = res.log_prob;
  truth["seed"] = cfg.seed;
  write_json((dir / "truth.json").string(), truth);
  write_meta(dir, cfg, "simulate");
  std::cout << "simulated " << res.edges.size() << " edges, " << res.n_vertices << " vertices, "
            << res.counts.n_clusters() << " clusters -> " << dir.string() << "\n";
  return 0;
}

int cmd_train(const CliState& st) {
  RunConfig cfg = resolve(st);
  Ingested data = ingest(cfg.dataset);
  const auto result = run_chain(data.edges, cfg.hp, cfg.chain);

  const fs::path dir = prepare_out(cfg);
  save_samples((dir / "posterior.json").string(), result.samples, data.edges.size(), cfg.seed);
  write_trace_csv((dir / "trace.csv").string(), result.trace);
  write_vertex_map((dir / "vertices.csv").string(), data.labels);
  write_meta(dir, cfg, "train");
  std::cout << "ingested M=" << data.n_vertices << " N=" << data.n_edges << " T=" << data.n_slots
            << "; retained " << result.samples.size() << " samples -> " << dir.string() << "\n";
  return 0;
}

int cmd_loglik(const CliState& st) {
  RunConfig cfg = resolve(st);
  Ingested data = ingest(cfg.dataset);
  const auto split = split_edges(data.edges, cfg.split, cfg.seed);
  const auto result = run_chain(split.train, cfg.hp, cfg.chain);
  const double hl = heldout_loglik(result.samples, split.train, split.test);

  const fs::path dir = prepare_out(cfg);
  save_samples((dir / "posterior.json").string(), result.samples, split.train.size(), cfg.seed);
  write_trace_csv((dir / "trace.csv").string(), result.trace);
  nlohmann::json j;
  j["heldout_loglik"] = hl;
  j["n_train"] = split.train.size();
  j["n_test"] = split.test.size();
  j["n_samples"] = result.samples.size();
  j["config"] = config_to_json(cfg);
  write_json((dir / "heldout.json").string(), j);
  write_meta(dir, cfg, "loglik");
  std::cout << "heldout_loglik " << fmt(hl) << " over " << split.test.size() << " test edges\n";
  return 0;
}

int cmd_predict(const CliState& st, const std::string& posterior_path) {
  RunConfig cfg = resolve(st);
  Ingested data = ingest(cfg.dataset);
  LoadedSamples loaded = load_samples(posterior_path);
  if (loaded.n_edges != data.edges.size())
    throw std::runtime_error("posterior snapshot was trained on a different edge count");

  double t_query = cfg.predict_at;
  if (t_query < 0.0) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < data.edges.size(); ++i)
      gaps.push_back(data.edges[i].time - data.edges[i - 1].time);
    double med = 1.0;
    if (!gaps.empty()) {
      std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
      med = gaps[gaps.size() / 2];
    }
    t_query = data.edges.edges.back().time + med;
  }

  const auto candidates = training_pair_grid(data.edges);
  RankedPrediction ranked =
      score_candidate_edges(loaded.samples, data.edges, candidates, t_query);
  if (cfg.top_n > 0 && static_cast<int>(ranked.edges.size()) > cfg.top_n)
    ranked.edges.resize(cfg.top_n);

  const fs::path dir = prepare_out(cfg);
  write_predictions_csv((dir / "predictions.csv").string(), ranked, &data.labels);
  nlohmann::json j;
  j["t_query"] = t_query;
  j["new_vertex_mass"] = ranked.new_vertex_mass;
  j["n_candidates"] = candidates.size();
  j["had_duplicates"] = ranked.had_duplicates;
  write_json((dir / "predict.json").string(), j);
  write_meta(dir, cfg, "predict");
  std::cout << "ranked " << candidates.size() << " candidates at t=" << fmt(t_query) << " -> "
            << dir.string() << "\n";
  return 0;
}

int cmd_evaluate(const CliState& st) {
  RunConfig cfg = resolve(st);
  Ingested data = ingest(cfg.dataset);
  const MetricReport report =
      evaluate_next_slot(data.edges, cfg.hp, cfg.chain, cfg.eval, cfg.split.target_slot);

  const fs::path dir = prepare_out(cfg);
  write_metrics_csv((dir / "metrics.csv").string(), report);
  nlohmann::json j = report_to_json(report);
  j["config"] = config_to_json(cfg);
  write_json((dir / "summary.json").string(), j);
  write_meta(dir, cfg, "evaluate");
  for (const auto& a : report.aggregates)
    std::cout << a.metric << "@" << a.k << " " << fmt(a.mean) << " +- " << fmt(a.stddev) << "\n";
  return 0;
}

int cmd_metrics(const CliState& st, const std::string& predictions_path) {
  RunConfig cfg = resolve(st);
  Ingested truth_data = ingest(cfg.dataset);
  const EdgePairSet truth = distinct_pairs(truth_data.edges);

  std::map<std::string, VertexId> ids;
  for (std::size_t i = 0; i < truth_data.labels.size(); ++i)
    ids[truth_data.labels[i]] = static_cast<VertexId>(i);
  VertexId next_id = static_cast<VertexId>(truth_data.labels.size());

  std::ifstream in(predictions_path);
  if (!in) throw std::runtime_error("cannot open predictions: " + predictions_path);
  std::vector<EdgePair> ranked;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto fields = detail::split_fields(line, ',');
    if (fields.size() < 2) throw std::runtime_error("bad predictions row: " + line);
    auto id_of = [&](const std::string& label) {
      auto [it, fresh] = ids.try_emplace(label, next_id);
      if (fresh) ++next_id;
      return it->second;
    };
    ranked.emplace_back(id_of(fields[0]), id_of(fields[1]));
  }
  if (ranked.empty()) throw std::runtime_error("no predictions in " + predictions_path);

  MetricReport report;
  report.n_truth = static_cast<int>(truth.size());
  report.n_predicted = report.n_truth;
  report.hits_mode =
      cfg.eval.hits_mode == HitsMode::PrecisionAtK ? "precision@k" : "recall-style";
  detail::score_ranking(report, "", ranked, truth, cfg.eval, 0);
  detail::aggregate_rows(report);

  const fs::path dir = prepare_out(cfg);
  write_metrics_csv((dir / "metrics.csv").string(), report);
  write_json((dir / "summary.json").string(), report_to_json(report));
  for (const auto& a : report.aggregates)
    std::cout << a.metric << "@" << a.k << " " << fmt(a.mean) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynmdnd: edge-clustered temporal multigraph model"};
  app.require_subcommand(1);

  CliState st;
  auto* sim = app.add_subcommand("simulate", "generate a synthetic network with known latents");
  add_common(sim, st);
  add_kv_option(sim, st, "--edges", "sim_edges", "number of edges to generate");
  add_kv_option(sim, st, "--time-process", "time_process", "unit-spaced|poisson-rate");
  add_kv_option(sim, st, "--rate", "rate", "arrival rate (poisson-rate)");
  add_kv_option(sim, st, "--slot-width", "slot_width", "attach fixed-width slots to the output");

  auto* train = app.add_subcommand("train", "run the Gibbs sampler and save posterior samples");
  add_common(train, st);
  add_dataset(train, st);
  add_chain(train, st);

  auto* loglik = app.add_subcommand("loglik", "held-out predictive log-likelihood");
  add_common(loglik, st);
  add_dataset(loglik, st);
  add_chain(loglik, st);
  add_kv_option(loglik, st, "--fraction", "fraction", "held-out share per slot");
  add_kv_option(loglik, st, "--split-mode", "split_mode", "within-slot|next-slot");
  add_kv_option(loglik, st, "--target-slot", "target_slot", "next-slot target");

  std::string posterior_path = "posterior.json";
  auto* predict = app.add_subcommand("predict", "rank candidate edges under saved samples");
  add_common(predict, st);
  add_dataset(predict, st);
  predict->add_option("--posterior", posterior_path, "posterior snapshot file");
  add_kv_option(predict, st, "--at", "predict_at", "query time (default: just past the data)");
  add_kv_option(predict, st, "--top", "top_n", "predictions kept in the output");

  auto* evaluate = app.add_subcommand("evaluate", "next-slot link prediction with metrics");
  add_common(evaluate, st);
  add_dataset(evaluate, st);
  add_chain(evaluate, st);
  add_kv_option(evaluate, st, "--target-slot", "target_slot", "slot to predict (default last)");
  add_kv_option(evaluate, st, "--ks", "ks", "comma-separated k values");
  add_kv_option(evaluate, st, "--reps", "repetitions", "independent repetitions");
  add_kv_option(evaluate, st, "--hits-mode", "hits_mode", "precision|recall");
  add_kv_flag(evaluate, st, "--baselines", "baselines", "include frequency/recency baselines");

  std::string predictions_path;
  auto* metrics = app.add_subcommand("metrics", "score an existing ranking against a truth set");
  add_common(metrics, st);
  add_dataset(metrics, st);
  metrics->add_option("--predictions", predictions_path, "predictions.csv to score")->required();
  add_kv_option(metrics, st, "--ks", "ks", "comma-separated k values");
  add_kv_option(metrics, st, "--hits-mode", "hits_mode", "precision|recall");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(st);
    if (train->parsed()) return cmd_train(st);
    if (loglik->parsed()) return cmd_loglik(st);
    if (predict->parsed()) return cmd_predict(st, posterior_path);
    if (evaluate->parsed()) return cmd_evaluate(st);
    if (metrics->parsed()) return cmd_metrics(st, predictions_path);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
