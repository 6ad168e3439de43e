#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "convdysat/checkpoint.hpp"
#include "convdysat/config.hpp"
#include "convdysat/error.hpp"
#include "convdysat/evaluation.hpp"
#include "convdysat/gradcheck.hpp"
#include "convdysat/graph.hpp"
#include "convdysat/ops.hpp"
#include "convdysat/parallel.hpp"
#include "convdysat/synthetic.hpp"
#include "convdysat/training.hpp"

namespace convdysat::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

void write_text(const fs::path& path, const std::string& text) { open_output(path) << text; }

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

ordered_json dataset_manifest(const DynamicGraph& graph, const std::string& source, std::size_t interactions,
                              SnapshotMode mode) {
  ordered_json j;
  j["source"] = source;
  j["nodes"] = graph.node_count();
  j["steps"] = graph.num_steps();
  j["mode"] = to_string(mode);
  j["interactions"] = interactions;
  std::vector<std::size_t> links;
  for (int t = 1; t <= graph.num_steps(); ++t) links.push_back(graph.snapshot(t).edges().size());
  j["links_per_step"] = links;
  return j;
}

struct Dataset {
  DynamicGraph graph;
  std::size_t interactions;
};

Dataset load_dataset(const RunConfig& cfg) {
  const auto records = read_edge_list_file(cfg.dataset_path);
  return {build_snapshots(records, cfg.steps, cfg.mode), records.size()};
}

RunConfig load_config(const std::string& path, const std::string& out_override) {
  RunConfig cfg = load_run_config(path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  cfg.validate();
  return cfg;
}

// ---- ingest -------------------------------------------------------------------------

struct IngestArgs {
  std::string edges;
  int steps = 16;
  std::string mode = "cumulative";
  std::string out;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
  const auto records = read_edge_list_file(a.edges);
  const SnapshotMode mode = parse_snapshot_mode(a.mode);
  const DynamicGraph graph = build_snapshots(records, a.steps, mode);
  make_dir(a.out);
  for (int t = 1; t <= graph.num_steps(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "snapshot_%03d.txt", t);
    auto file = open_output(fs::path(a.out) / name);
    write_snapshot(file, graph, t);
  }
  write_text(fs::path(a.out) / "manifest.json", dataset_manifest(graph, a.edges, records.size(), mode).dump(2) + "\n");
  out << "ingested " << records.size() << " interactions: " << graph.node_count() << " nodes, " << graph.num_steps()
      << " snapshots -> " << a.out << "\n";
  return kOk;
}

// ---- train --------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out;
  bool resume = false;
  std::optional<std::size_t> max_epochs;
};

void write_train_outputs(const fs::path& dir, const TrainState& state, std::uint64_t hash) {
  {
    auto metrics = open_output(dir / "metrics.csv");
    write_metrics_csv(metrics, state.log);
  }
  {
    auto timing = open_output(dir / "timing.csv");
    write_timing_csv(timing, state.log);
  }
  save_checkpoint((dir / "checkpoint.bin").string(), state, hash);
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(a.config, a.out);
  const Dataset data = load_dataset(cfg);
  const fs::path dir = cfg.output_dir;
  make_dir(dir);
  write_text(dir / "config.json", to_json(cfg));
  write_text(dir / "manifest.json",
             dataset_manifest(data.graph, cfg.dataset_path, data.interactions, cfg.mode).dump(2) + "\n");

  const std::uint64_t hash = config_hash(cfg);
  Trainer trainer(data.graph, cfg.model, cfg.walk, cfg.train);
  TrainState state;
  if (a.resume) {
    std::uint64_t stored = 0;
    state = load_checkpoint((dir / "checkpoint.bin").string(), &stored);
    if (stored != hash) {
      throw InputError("checkpoint was written with a different configuration (hash " + hash_string(stored) +
                       ", expected " + hash_string(hash) + ")");
    }
    check_parameters(state.params, cfg.model, data.graph.node_count(), data.graph.num_steps());
  } else {
    state = trainer.initial_state();
  }

  bool finished = false;
  try {
    finished = trainer.run(state, a.max_epochs, [&](const LossRecord& r) {
      if (r.epoch + 1 == cfg.train.epochs_per_step) {
        out << "step " << r.time_step << ": loss " << fixed(r.loss, 6) << " after " << (r.epoch + 1) << " epochs\n";
      }
    });
  } catch (const DivergenceError& e) {
    write_train_outputs(dir, state, hash);
    err << "error: " << e.what() << " (checkpoint of the last completed epoch kept in " << dir.string() << ")\n";
    return kDivergence;
  }
  write_train_outputs(dir, state, hash);
  if (finished) {
    out << "training complete: " << state.log.size() << " epochs logged -> " << dir.string() << "\n";
  } else {
    out << "paused at step " << state.step << ", epoch " << state.epoch << "; resume with --resume\n";
  }
  return kOk;
}

// ---- evaluate -----------------------------------------------------------------------

struct EvaluateArgs {
  std::string config;
  std::string checkpoint;
  std::string out;
  std::optional<std::size_t> seeds;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(a.config, a.out);
  const Dataset data = load_dataset(cfg);
  const fs::path dir = cfg.output_dir;
  make_dir(dir);
  const std::string ckpt = a.checkpoint.empty() ? (dir / "checkpoint.bin").string() : a.checkpoint;
  std::uint64_t stored = 0;
  const TrainState state = load_checkpoint(ckpt, &stored);
  if (stored != config_hash(cfg)) {
    err << "warning: checkpoint configuration hash " << hash_string(stored) << " differs from "
        << hash_string(config_hash(cfg)) << "\n";
  }
  if (state.step_params.empty()) throw InputError("checkpoint holds no completed training step to evaluate");

  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (a.seeds) {
    if (*a.seeds == 0) throw InputError("--seeds must be at least 1");
    seeds.clear();
    for (std::uint64_t s = 1; s <= *a.seeds; ++s) seeds.push_back(s);
  }
  EvalReport report = evaluate(data.graph, state.step_params, cfg.model, seeds, cfg.eval);
  report.config_hash = hash_string(stored);
  {
    auto csv = open_output(dir / "eval.csv");
    write_eval_csv(csv, report);
  }
  write_text(dir / "summary.json", summary_json(report) + "\n");
  if (!report.skipped_steps.empty()) {
    err << "note: " << report.skipped_steps.size() << " step(s) without a usable split were skipped\n";
  }
  out << "micro-AUC " << fixed(report.micro_mean(), 4) << " +/- " << fixed(report.micro_std(), 4) << "\n";
  out << "macro-AUC " << fixed(report.macro_mean(), 4) << " +/- " << fixed(report.macro_std(), 4) << "\n";
  return kOk;
}

// ---- gradcheck ----------------------------------------------------------------------

struct GradcheckArgs {
  std::string sizes = "small";
  std::string fault_op;
  double fault_factor = 1.5;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  if (a.sizes != "small") throw InputError("--sizes: only 'small' is available");
  struct FaultGuard {
    explicit FaultGuard(const GradcheckArgs& a) {
      if (!a.fault_op.empty()) testing::inject_backward_fault(a.fault_op, a.fault_factor);
    }
    ~FaultGuard() { testing::inject_backward_fault("", 1.0); }
  } guard(a);

  const auto checks = run_gradcheck_suite();
  std::vector<std::string> failed;
  for (const auto& c : checks) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-22s max_rel_err %.3e  threshold %.0e  %s\n", c.component.c_str(),
                  c.result.max_rel_error, c.threshold, c.passed() ? "ok" : "FAIL");
    out << line;
    if (!c.passed()) failed.push_back(c.component);
  }
  if (!failed.empty()) {
    std::string names;
    for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
    err << "error: gradient check failed for " << names << "\n";
    return kGradcheckFailed;
  }
  return kOk;
}

// ---- synth --------------------------------------------------------------------------

struct SynthArgs {
  std::string kind = "toy";
  std::string out;
  std::uint64_t seed = 1;
  std::size_t nodes = 50;
  int steps = 6;
  double p = 0.1;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  std::vector<EdgeRecord> records;
  if (a.kind == "toy") {
    records = toy_dataset();
  } else if (a.kind == "random") {
    records = random_graph_dataset(a.nodes, a.steps, a.p, a.seed);
  } else if (a.kind == "persistence") {
    records = persistence_dataset(a.nodes, a.steps, 5, 0.4, 0.02, a.seed);
  } else if (a.kind == "email") {
    EmailLikeOptions o;
    o.seed = a.seed;
    records = email_like_dataset(o);
  } else {
    throw InputError("--kind must be toy, random, persistence or email");
  }
  if (const auto parent = fs::path(a.out).parent_path(); !parent.empty()) make_dir(parent);
  auto file = open_output(a.out);
  write_edge_list(file, records);
  out << "wrote " << records.size() << " interactions to " << a.out << "\n";
  return kOk;
}

std::size_t default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"convdysat: dynamic graph embeddings with convolutional temporal attention", "convdysat"};
  app.require_subcommand(1);
  std::size_t threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (1 = fully serial)")->envname("CONVDYSAT_THREADS")->check(CLI::PositiveNumber);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Bin an edge list into snapshots and write a manifest");
  ingest_cmd->add_option("--edges", ingest.edges, "Edge list: 'u v [weight] timestamp' per line")->required();
  ingest_cmd->add_option("--steps", ingest.steps, "Number of snapshots T")->check(CLI::Range(2, 1 << 20));
  ingest_cmd->add_option("--mode", ingest.mode, "binned or cumulative");
  ingest_cmd->add_option("--out", ingest.out, "Output directory")->required();

  TrainArgs train;
  std::size_t max_epochs = 0;
  auto* train_cmd = app.add_subcommand("train", "Train on every time step of the configured dataset");
  train_cmd->add_option("--config", train.config, "Run configuration (flat JSON)")->required();
  train_cmd->add_option("--out", train.out, "Override output.dir");
  train_cmd->add_flag("--resume", train.resume, "Continue from <out>/checkpoint.bin");
  auto* max_opt = train_cmd->add_option("--max-epochs", max_epochs, "Stop after this many epochs in this invocation");

  EvaluateArgs evaluate_args;
  std::size_t seeds = 0;
  auto* eval_cmd = app.add_subcommand("evaluate", "Link-prediction AUC of a trained checkpoint");
  eval_cmd->add_option("--config", evaluate_args.config, "Run configuration (flat JSON)")->required();
  eval_cmd->add_option("--checkpoint", evaluate_args.checkpoint, "Defaults to <out>/checkpoint.bin");
  eval_cmd->add_option("--out", evaluate_args.out, "Override output.dir");
  auto* seeds_opt = eval_cmd->add_option("--seeds", seeds, "Use seeds 1..N instead of eval.seeds");

  GradcheckArgs gradcheck;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every layer and the model loss");
  gc_cmd->add_option("--sizes", gradcheck.sizes, "Problem size (small)");
  gc_cmd->add_option("--inject-fault", gradcheck.fault_op)->group("");
  gc_cmd->add_option("--fault-factor", gradcheck.fault_factor)->group("");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic edge list");
  synth_cmd->add_option("--kind", synth.kind, "toy, random, persistence or email");
  synth_cmd->add_option("--out", synth.out, "Output file")->required();
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--nodes", synth.nodes);
  synth_cmd->add_option("--steps", synth.steps);
  synth_cmd->add_option("--p", synth.p, "Link probability for --kind random");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  try {
    set_num_threads(threads);
    if (ingest_cmd->parsed()) return cmd_ingest(ingest, out);
    if (train_cmd->parsed()) {
      if (max_opt->count() > 0) train.max_epochs = max_epochs;
      return cmd_train(train, out, err);
    }
    if (eval_cmd->parsed()) {
      if (seeds_opt->count() > 0) evaluate_args.seeds = seeds;
      return cmd_evaluate(evaluate_args, out, err);
    }
    if (gc_cmd->parsed()) return cmd_gradcheck(gradcheck, out, err);
    if (synth_cmd->parsed()) return cmd_synth(synth, out);
  } catch (const ShapeMismatchError& e) {
    err << "error: " << e.what() << "\n";
    return kShapeMismatch;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace convdysat::cli
