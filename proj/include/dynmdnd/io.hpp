#pragma once

// Dataset ingestion, run configuration, and result/posterior persistence.
//
// Input is delimited text with one interaction per row; a descriptor names
// the sender/recipient/timestamp columns. Raw vertex labels are mapped to
// dense integer ids in first-appearance order and the mapping is persisted
// next to the outputs. Timestamps are normalized to floating seconds.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynmdnd/eval.hpp"
#include "dynmdnd/gibbs.hpp"
#include "dynmdnd/predict.hpp"
#include "dynmdnd/simulate.hpp"
#include "dynmdnd/types.hpp"

namespace dynmdnd {

struct SlottingSpec {
  enum class Mode { None, FixedWidth, Boundaries, PerFile };
  Mode mode = Mode::None;
  double width = 0.0;                // FixedWidth
  std::vector<double> boundaries;    // Boundaries
  int slot_column = -1;              // PerFile: column carrying the slot index

  void validate() const {
    switch (mode) {
      case Mode::FixedWidth:
        if (!(width > 0.0)) throw std::invalid_argument("slotting: width must be > 0");
        break;
      case Mode::Boundaries:
        if (boundaries.empty()) throw std::invalid_argument("slotting: boundaries required");
        break;
      case Mode::PerFile:
        if (slot_column < 0) throw std::invalid_argument("slotting: slot column required");
        break;
      case Mode::None:
        break;
    }
  }
};

struct DatasetSpec {
  std::string path;
  char delimiter = '\0';  // '\0' = any whitespace
  int col_sender = 0;
  int col_recipient = 1;
  int col_time = 2;
  bool has_header = false;
  double time_unit = 1.0;  // multiplier to seconds
  bool symmetrize = false;
  SlottingSpec slotting;

  void validate() const {
    if (path.empty()) throw std::invalid_argument("dataset: path required");
    if (col_sender == col_recipient || col_sender == col_time || col_recipient == col_time)
      throw std::invalid_argument("dataset: column indices must be distinct");
    if (col_sender < 0 || col_recipient < 0 || col_time < 0)
      throw std::invalid_argument("dataset: column indices must be non-negative");
    if (!(time_unit > 0.0)) throw std::invalid_argument("dataset: time unit must be > 0");
    slotting.validate();
  }
};

struct Ingested {
  EdgeSequence edges;
  std::vector<std::string> labels;  // dense id -> raw label
  int n_vertices = 0;
  int n_edges = 0;
  int n_slots = 0;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  if (delim == '\0') {
    std::istringstream ss(line);
    std::string f;
    while (ss >> f) out.push_back(f);
  } else {
    std::string cur;
    for (char c : line) {
      if (c == delim) {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
  }
  return out;
}

inline double parse_number(const std::string& s, int lineno, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(lineno) + ": bad " + what + " '" + s + "'");
  }
}

}  // namespace detail

inline Ingested ingest(const DatasetSpec& spec) {
  spec.validate();
  std::ifstream in(spec.path);
  if (!in) throw std::runtime_error("cannot open dataset: " + spec.path);

  struct Row {
    std::string s, r;
    double t;
    long slot;
  };
  std::vector<Row> rows;
  int max_col = std::max({spec.col_sender, spec.col_recipient, spec.col_time,
                          spec.slotting.mode == SlottingSpec::Mode::PerFile
                              ? spec.slotting.slot_column
                              : 0});
  std::string line;
  int lineno = 0;
  bool skip_header = spec.has_header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (skip_header) {
      skip_header = false;
      continue;
    }
    auto fields = detail::split_fields(line, spec.delimiter);
    if (static_cast<int>(fields.size()) <= max_col)
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected at least " +
                               std::to_string(max_col + 1) + " columns, got " +
                               std::to_string(fields.size()));
    Row row;
    row.s = fields[spec.col_sender];
    row.r = fields[spec.col_recipient];
    row.t = detail::parse_number(fields[spec.col_time], lineno, "timestamp") * spec.time_unit;
    row.slot = spec.slotting.mode == SlottingSpec::Mode::PerFile
                   ? static_cast<long>(
                         detail::parse_number(fields[spec.slotting.slot_column], lineno, "slot"))
                   : 0;
    rows.push_back(row);
    if (spec.symmetrize) rows.push_back({row.r, row.s, row.t, row.slot});
  }
  if (rows.empty()) throw std::runtime_error("empty dataset: " + spec.path);

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });

  Ingested out;
  std::map<std::string, VertexId> ids;
  for (const auto& row : rows) {
    auto sid = ids.try_emplace(row.s, static_cast<VertexId>(ids.size()));
    if (sid.second) out.labels.push_back(row.s);
    auto rid = ids.try_emplace(row.r, static_cast<VertexId>(ids.size()));
    if (rid.second) out.labels.push_back(row.r);
    out.edges.edges.push_back({sid.first->second, rid.first->second, row.t});
  }

  switch (spec.slotting.mode) {
    case SlottingSpec::Mode::None:
      break;
    case SlottingSpec::Mode::FixedWidth: {
      const double t0 = rows.front().t;
      const double t1 = rows.back().t;
      double b = t0 + spec.slotting.width;
      while (true) {
        out.edges.slot_boundaries.push_back(b);
        if (b > t1) break;
        b += spec.slotting.width;
      }
      break;
    }
    case SlottingSpec::Mode::Boundaries:
      out.edges.slot_boundaries = spec.slotting.boundaries;
      break;
    case SlottingSpec::Mode::PerFile: {
      for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].slot < rows[i - 1].slot)
          throw std::runtime_error("per-file slot ids must be non-decreasing in time");
      for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].slot != rows[i - 1].slot)
          out.edges.slot_boundaries.push_back(0.5 * (rows[i - 1].t + rows[i].t));
      out.edges.slot_boundaries.push_back(rows.back().t + 1.0);
      break;
    }
  }

  out.edges.validate();
  out.n_edges = static_cast<int>(out.edges.size());
  out.n_vertices = static_cast<int>(out.labels.size());
  out.n_slots = out.edges.n_slots();
  return out;
}

// Fixed formatting so equal seeds give byte-identical output files.
inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline void export_edges(const std::string& path, const EdgeSequence& seq,
                         const std::vector<std::string>* labels = nullptr) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  char buf[64];
  for (const auto& e : seq.edges) {
    std::snprintf(buf, sizeof buf, "%.17g", e.time);
    if (labels)
      out << (*labels)[e.sender] << '\t' << (*labels)[e.recipient] << '\t' << buf << '\n';
    else
      out << e.sender << '\t' << e.recipient << '\t' << buf << '\n';
  }
}

inline void write_vertex_map(const std::string& path, const std::vector<std::string>& labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "id,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

// --- posterior snapshots --------------------------------------------------

inline nlohmann::json hyperparams_to_json(const Hyperparams& hp) {
  nlohmann::json j{{"gamma", hp.gamma},
                   {"tau", hp.tau},
                   {"alpha", hp.alpha},
                   {"decay", {{"kind", to_string(hp.decay.kind)}, {"scale", hp.decay.scale}}}};
  if (hp.tau_recipient) j["tau_recipient"] = *hp.tau_recipient;
  return j;
}

inline Hyperparams hyperparams_from_json(const nlohmann::json& j) {
  Hyperparams hp;
  hp.gamma = j.at("gamma").get<double>();
  hp.tau = j.at("tau").get<double>();
  hp.alpha = j.at("alpha").get<double>();
  hp.decay.kind = decay_kind_from_string(j.at("decay").at("kind").get<std::string>());
  hp.decay.scale = j.at("decay").at("scale").get<double>();
  if (j.contains("tau_recipient")) hp.tau_recipient = j["tau_recipient"].get<double>();
  return hp;
}

// Serializes retained samples: links, cluster labels, table counts and
// hyperparameters; enough to score new edges without the training chain.
inline void save_samples(const std::string& path, const std::vector<PosteriorSample>& samples,
                         std::size_t n_edges, std::uint64_t seed) {
  nlohmann::json j;
  j["format"] = "dynmdnd-posterior-v1";
  j["n_edges"] = n_edges;
  j["seed"] = seed;
  auto& arr = j["samples"] = nlohmann::json::array();
  for (const auto& s : samples) {
    nlohmann::json js;
    js["sweep"] = s.sweep;
    js["hyperparams"] = hyperparams_to_json(s.hp);
    js["links"] = s.links;
    js["clusters"] = s.clusters;
    auto& clusters = js["counts"]["clusters"] = nlohmann::json::array();
    for (const auto& [k, sides] : s.counts.clusters()) {
      nlohmann::json jc;
      jc["id"] = k;
      for (int side = 0; side < 2; ++side) {
        auto& cells = jc[side == 0 ? "sender" : "recipient"] = nlohmann::json::array();
        for (const auto& [v, cell] : sides[side].cells)
          cells.push_back({v, cell.count, static_cast<int>(cell.tables.size())});
      }
      clusters.push_back(std::move(jc));
    }
    arr.push_back(std::move(js));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << j.dump(1, '\t') << '\n';
}

struct LoadedSamples {
  std::vector<PosteriorSample> samples;
  std::size_t n_edges = 0;
  std::uint64_t seed = 0;
};

inline LoadedSamples load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open posterior file: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != "dynmdnd-posterior-v1")
    throw std::runtime_error("not a posterior snapshot: " + path);
  LoadedSamples out;
  out.n_edges = j.at("n_edges").get<std::size_t>();
  out.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& js : j.at("samples")) {
    PosteriorSample s;
    s.sweep = js.at("sweep").get<int>();
    s.hp = hyperparams_from_json(js.at("hyperparams"));
    s.links = js.at("links").get<std::vector<int>>();
    s.clusters = js.at("clusters").get<std::vector<int>>();
    // reconstruct a table configuration matching the stored (count, tables)
    // pairs; the occupancy split within a cell does not affect predictives
    for (const auto& jc : js.at("counts").at("clusters")) {
      const ClusterId k = jc.at("id").get<int>();
      for (int side = 0; side < 2; ++side) {
        for (const auto& cell : jc.at(side == 0 ? "sender" : "recipient")) {
          const VertexId v = cell.at(0).get<int>();
          const int n = cell.at(1).get<int>();
          const int m = cell.at(2).get<int>();
          if (m < 1 || m > n) throw std::runtime_error("corrupt cell in " + path);
          for (int t = 0; t < m; ++t) {
            const TableId tid = s.counts.fresh_table_id();
            const int occ = t == 0 ? n - m + 1 : 1;
            for (int q = 0; q < occ; ++q)
              s.counts.seat(k, static_cast<Side>(side), v, tid);
          }
        }
      }
    }
    s.counts.check_invariants();
    out.samples.push_back(std::move(s));
  }
  return out;
}

// --- reports ----------------------------------------------------------------

inline void write_trace_csv(const std::string& path, const std::vector<SweepStats>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "chain,sweep,joint_log_prob,n_clusters,alpha,gamma,tau\n";
  for (const auto& t : trace)
    out << t.chain << ',' << t.sweep << ',' << fmt(t.joint_log_prob) << ',' << t.n_clusters << ','
        << fmt(t.alpha) << ',' << fmt(t.gamma) << ',' << fmt(t.tau) << '\n';
}

inline void write_metrics_csv(const std::string& path, const MetricReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "metric,k,repetition,value\n";
  for (const auto& r : report.rows)
    out << r.metric << ',' << r.k << ',' << r.repetition << ',' << fmt(r.value) << '\n';
  for (const auto& a : report.aggregates) {
    out << a.metric << ',' << a.k << ",mean," << fmt(a.mean) << '\n';
    out << a.metric << ',' << a.k << ",stddev," << fmt(a.stddev) << '\n';
  }
}

inline nlohmann::json report_to_json(const MetricReport& report) {
  nlohmann::json j;
  j["n_predicted"] = report.n_predicted;
  j["n_truth"] = report.n_truth;
  j["t_query"] = report.t_query;
  j["hits_mode"] = report.hits_mode;
  auto& arr = j["metrics"] = nlohmann::json::array();
  for (const auto& a : report.aggregates)
    arr.push_back({{"metric", a.metric}, {"k", a.k}, {"mean", a.mean}, {"stddev", a.stddev}});
  return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << j.dump(1, '\t') << '\n';
}

inline void write_predictions_csv(const std::string& path, const RankedPrediction& ranked,
                                  const std::vector<std::string>* labels = nullptr) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "sender,recipient,score\n";
  for (const auto& e : ranked.edges) {
    if (labels)
      out << (*labels)[e.sender] << ',' << (*labels)[e.recipient];
    else
      out << e.sender << ',' << e.recipient;
    out << ',' << fmt(e.score) << '\n';
  }
}

// --- run configuration ------------------------------------------------------

// One flat key=value config file drives every subcommand; unknown keys are
// rejected so typos surface as usage errors. CLI flags override file values.
struct RunConfig {
  DatasetSpec dataset;
  Hyperparams hp;
  ChainConfig chain;
  SplitSpec split;
  EvalConfig eval;
  // simulation
  int sim_edges = 200;
  TimeProcess time_process = TimeProcess::UnitSpaced;
  double rate = 1.0;
  double slot_width = 0.0;  // simulate: attach fixed-width slots when > 0
  // prediction
  double predict_at = -1.0;  // query time; -1 = just past the last edge
  int top_n = 50;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  void set(const std::string& key, const std::string& value);
};

namespace detail {

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected boolean, got '" + v + "'");
}

inline std::vector<double> parse_doubles(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

inline std::vector<int> parse_ints(const std::string& v) {
  std::vector<int> out;
  for (double d : parse_doubles(v)) out.push_back(static_cast<int>(d));
  return out;
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  using detail::parse_bool;
  if (key == "dataset.path") dataset.path = value;
  else if (key == "dataset.delimiter") dataset.delimiter = value == "auto" ? '\0' : (value == "tab" ? '\t' : value.at(0));
  else if (key == "dataset.col_sender") dataset.col_sender = std::stoi(value);
  else if (key == "dataset.col_recipient") dataset.col_recipient = std::stoi(value);
  else if (key == "dataset.col_time") dataset.col_time = std::stoi(value);
  else if (key == "dataset.header") dataset.has_header = parse_bool(value);
  else if (key == "dataset.time_unit") dataset.time_unit = std::stod(value);
  else if (key == "dataset.symmetrize") dataset.symmetrize = parse_bool(value);
  else if (key == "dataset.slotting") {
    if (value == "none") dataset.slotting.mode = SlottingSpec::Mode::None;
    else if (value == "fixed-width") dataset.slotting.mode = SlottingSpec::Mode::FixedWidth;
    else if (value == "boundaries") dataset.slotting.mode = SlottingSpec::Mode::Boundaries;
    else if (value == "per-file") dataset.slotting.mode = SlottingSpec::Mode::PerFile;
    else throw std::invalid_argument("unknown slotting mode: " + value);
  }
  else if (key == "dataset.slot_width") dataset.slotting.width = std::stod(value);
  else if (key == "dataset.slot_boundaries") dataset.slotting.boundaries = detail::parse_doubles(value);
  else if (key == "dataset.slot_column") dataset.slotting.slot_column = std::stoi(value);
  else if (key == "gamma") hp.gamma = std::stod(value);
  else if (key == "tau") hp.tau = std::stod(value);
  else if (key == "tau_recipient") hp.tau_recipient = std::stod(value);
  else if (key == "alpha") hp.alpha = std::stod(value);
  else if (key == "decay") hp.decay.kind = decay_kind_from_string(value);
  else if (key == "decay_scale") hp.decay.scale = std::stod(value);
  else if (key == "sweeps") chain.n_sweeps = std::stoi(value);
  else if (key == "burn_in") chain.burn_in = std::stoi(value);
  else if (key == "thin") chain.thin = std::stoi(value);
  else if (key == "chains") chain.n_chains = std::stoi(value);
  else if (key == "hyper_resample") chain.hyper_resample = parse_bool(value);
  else if (key == "exact_cutoff") chain.exact_component_cutoff = std::stoi(value);
  else if (key == "debug_checks") chain.debug_checks = parse_bool(value);
  else if (key == "split_mode") {
    if (value == "within-slot") split.mode = SplitSpec::Mode::WithinSlotHoldout;
    else if (value == "next-slot") split.mode = SplitSpec::Mode::NextSlot;
    else throw std::invalid_argument("unknown split mode: " + value);
  }
  else if (key == "fraction") split.fraction = std::stod(value);
  else if (key == "target_slot") split.target_slot = std::stoi(value);
  else if (key == "ks") eval.ks = detail::parse_ints(value);
  else if (key == "repetitions") eval.repetitions = std::stoi(value);
  else if (key == "hits_mode") {
    if (value == "precision") eval.hits_mode = HitsMode::PrecisionAtK;
    else if (value == "recall") eval.hits_mode = HitsMode::RecallStyle;
    else throw std::invalid_argument("unknown hits mode: " + value);
  }
  else if (key == "baselines") eval.baselines = parse_bool(value);
  else if (key == "sim_edges") sim_edges = std::stoi(value);
  else if (key == "time_process") {
    if (value == "unit-spaced") time_process = TimeProcess::UnitSpaced;
    else if (value == "poisson-rate") time_process = TimeProcess::PoissonRate;
    else throw std::invalid_argument("unknown time process: " + value);
  }
  else if (key == "rate") rate = std::stod(value);
  else if (key == "slot_width") slot_width = std::stod(value);
  else if (key == "predict_at") predict_at = std::stod(value);
  else if (key == "top_n") top_n = std::stoi(value);
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "out_dir") out_dir = value;
  else throw std::invalid_argument("unknown config key: " + key);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["dataset"] = {{"path", cfg.dataset.path},
                  {"delimiter", cfg.dataset.delimiter == '\0'
                                    ? std::string("auto")
                                    : std::string(1, cfg.dataset.delimiter)},
                  {"col_sender", cfg.dataset.col_sender},
                  {"col_recipient", cfg.dataset.col_recipient},
                  {"col_time", cfg.dataset.col_time},
                  {"header", cfg.dataset.has_header},
                  {"time_unit", cfg.dataset.time_unit},
                  {"symmetrize", cfg.dataset.symmetrize}};
  j["hyperparams"] = hyperparams_to_json(cfg.hp);
  j["chain"] = {{"sweeps", cfg.chain.n_sweeps},     {"burn_in", cfg.chain.burn_in},
                {"thin", cfg.chain.thin},           {"chains", cfg.chain.n_chains},
                {"hyper_resample", cfg.chain.hyper_resample},
                {"exact_cutoff", cfg.chain.exact_component_cutoff}};
  j["split"] = {{"mode", cfg.split.mode == SplitSpec::Mode::WithinSlotHoldout ? "within-slot"
                                                                              : "next-slot"},
                {"fraction", cfg.split.fraction},
                {"target_slot", cfg.split.target_slot}};
  j["eval"] = {{"ks", cfg.eval.ks},
               {"repetitions", cfg.eval.repetitions},
               {"hits_mode",
                cfg.eval.hits_mode == HitsMode::PrecisionAtK ? "precision" : "recall"},
               {"baselines", cfg.eval.baselines}};
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  return j;
}

}  // namespace dynmdnd
