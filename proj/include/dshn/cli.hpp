#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <functional>
#include <iostream>
#include <list>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "CLI11.hpp"
#include "dshn/data.hpp"
#include "dshn/laplacian.hpp"
#include "dshn/manifest.hpp"
#include "dshn/spectral.hpp"
#include "dshn/theorems.hpp"
#include "dshn/train.hpp"

namespace dshn::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kDiverged = 3 };

inline constexpr double kMaxCliCharge = 0.25;

/// Options bound to CLI11 plus a serializer per option, so a run's full flag
/// set (defaults included) can be written to its manifest and replayed.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* option(const std::string& name, T& var, const std::string& desc, bool is_output = false) {
    auto* o = app_->add_option("--" + name, var, desc);
    if constexpr (std::is_same_v<T, std::vector<double>>) o->delimiter(',');
    entries_.push_back({name, [&var] { return serialize(var); }, is_output});
    return o;
  }

  /// Boolean flag; with `negation` also accepts --no-<name>.
  CLI::Option* flag(const std::string& name, bool& var, const std::string& desc, bool negation = false) {
    const std::string spec = negation ? "--" + name + ",!--no-" + name : "--" + name;
    auto* o = app_->add_flag(spec, var, desc);
    entries_.push_back({name, [&var] { return serialize(var); }, false});
    return o;
  }

  RunManifest::Entries values() const {
    RunManifest::Entries out;
    for (const auto& e : entries_) out.emplace_back(e.name, e.value());
    return out;
  }

  bool is_output(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e.output;
    return false;
  }

  bool has(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return true;
    return false;
  }

  CLI::App* app() const { return app_; }

 private:
  struct Entry {
    std::string name;
    std::function<std::string()> value;
    bool output;
  };

  static std::string serialize(bool v) { return v ? "true" : "false"; }
  static std::string serialize(double v) { return detail::format_double(v); }
  static std::string serialize(const std::string& v) { return v; }
  template <std::integral T>
  static std::string serialize(T v) {
    return std::to_string(v);
  }
  static std::string serialize(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ",") + detail::format_double(x);
    return s;
  }

  CLI::App* app_;
  std::vector<Entry> entries_;
};

/// Per-run state: stdout capture (for digesting) and the manifest being built.
class Run {
 public:
  Run(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  void emit(const std::string& s) {
    out_ << s;
    out_.flush();
    text_ << s;
  }
  std::ostream& err() { return err_; }

  void input(const std::string& path) { manifest.inputs.emplace_back(path, file_digest(path)); }
  void output(const std::string& path) { manifest.outputs.emplace_back(path, file_digest(path)); }
  void seed(const std::string& name, std::uint64_t v) { manifest.seeds.emplace_back(name, std::to_string(v)); }

  std::string captured() const { return text_.str(); }

  RunManifest manifest;

 private:
  std::ostream& out_;
  std::ostream& err_;
  std::ostringstream text_;
};

namespace detail {

inline std::string join_row(std::initializer_list<std::string> cells) {
  std::string s;
  for (const auto& c : cells) s += (s.empty() ? "" : ",") + c;
  return s + '\n';
}

inline std::string fmt(double v) { return dshn::detail::format_double(v); }

}  // namespace detail

struct Command {
  std::unique_ptr<FlagSet> flags;
  std::string manifest_path;
  std::string config_path;
  std::function<std::string()> primary_output;  // default manifest location
  std::function<int(Run&)> run;
};

// ---------------------------------------------------------------------------
// Subcommands

struct GenSyntheticArgs {
  SyntheticConfig cfg;
  std::string out;
};

inline int gen_synthetic(const GenSyntheticArgs& a, Run& r) {
  const auto d = generate_synthetic(a.cfg);
  r.seed("base", a.cfg.seed);
  r.seed("split", derive_seed(a.cfg.seed, 1));
  write_dataset(d, a.out);
  for (const auto& p : dataset_files(a.out)) r.output(p);
  r.emit("vertices=" + std::to_string(d.hypergraph.num_vertices()) +
         " hyperedges=" + std::to_string(d.hypergraph.num_hyperedges()) + '\n');
  return kOk;
}

struct TransformArgs {
  std::string input, out;
};

inline int transform_graph(const TransformArgs& a, Run& r) {
  r.input(a.input);
  const auto h = from_directed_graph(read_arc_list(a.input));
  write_hypergraph(h, a.out);
  r.output(a.out);
  r.emit("vertices=" + std::to_string(h.num_vertices()) + " hyperedges=" + std::to_string(h.num_hyperedges()) + '\n');
  return kOk;
}

struct BuildLaplacianArgs {
  std::string input, out;
  double q = 0.25;
  Index stalk_dim = 1;
  std::string sheaf = "trivial";
  std::uint64_t seed = 0;
  bool normalized = false;
  double jitter = 0.0;
};

inline int build_laplacian_cmd(const BuildLaplacianArgs& a, Run& r) {
  r.input(a.input);
  r.seed("sheaf", a.seed);
  const auto h = read_hypergraph(a.input);
  const auto sheaf = build_fixed_sheaf(h, {a.q, a.stalk_dim, parse_map_shape(a.sheaf)}, a.seed);
  LaplacianOptions opt;
  opt.normalized = a.normalized;
  if (a.jitter > 0.0) {
    opt.regularization = DegreeRegularization::jitter;
    opt.jitter = a.jitter;
  }
  const auto bundle = build_laplacian(h, sheaf, opt);
  const auto dense = bundle.L.to_dense();
  {
    auto out = dshn::detail::open_out(a.out);
    write_dense(dense, out);
  }
  r.output(a.out);
  r.emit("dimension=" + std::to_string(dense.rows()) + " blocks=" + std::to_string(bundle.L.entries().size()) +
         " hermitian_defect=" + detail::fmt(hermitian_defect(dense)) + '\n');
  return kOk;
}

struct VerifySpectralArgs {
  Index trials = 500;
  std::uint64_t seed = 0;
  std::string report;
};

inline int verify_spectral(const VerifySpectralArgs& a, Run& r) {
  r.seed("base", a.seed);
  const auto s = run_spectral_trials(a.trials, a.seed);
  std::ostringstream text;
  write_spectral_report(s, text);
  if (!a.report.empty()) {
    auto out = dshn::detail::open_out(a.report);
    out << text.str();
    out.close();
    r.output(a.report);
  }
  r.emit(text.str());
  return s.all_passed() ? kOk : kCheckFailed;
}

struct TheoremCheckArgs {
  Index trials = 50;
  std::uint64_t seed = 0;
  std::string report;
};

inline int theorem_check(const TheoremCheckArgs& a, Run& r) {
  r.seed("base", a.seed);
  std::ostringstream text;
  bool ok = true;
  if (a.trials > 0) {
    const auto results = run_theorem_suites(a.trials, a.seed);
    const auto cx = check_counterexample();
    write_theorem_report(results, &cx, text);
    for (const auto& t : results) ok = ok && t.passed();
    ok = ok && cx.matrix_matches() && cx.spectrum_matches();
  }
  if (!a.report.empty()) {
    auto out = dshn::detail::open_out(a.report);
    out << text.str();
    out.close();
    r.output(a.report);
  }
  r.emit(text.str());
  return ok ? kOk : kCheckFailed;
}

struct ModelArgs {
  ModelConfig model;
  TrainConfig train;
  std::string sheaf = "diagonal";
  std::string activation = "sigmoid";
  std::string aggregation = "mean";

  void resolve() {
    model.map_shape = parse_map_shape(sheaf);
    model.sheaf_activation = ad::parse_activation(activation);
    model.aggregation = parse_aggregation(aggregation);
  }
};

inline void add_model_flags(FlagSet& f, ModelArgs& m) {
  auto& c = m.model;
  auto& t = m.train;
  f.option("layers", c.num_layers, "number of diffusion layers")->check(CLI::Range(0, 5));
  f.option("stalk-dim", c.stalk_dim, "stalk dimension d")->check(CLI::Range(1, 6));
  f.option("hidden", c.hidden, "hidden channels f")->check(CLI::PositiveNumber);
  f.option("q", c.q, "charge parameter")->check(CLI::Range(0.0, kMaxCliCharge));
  f.option("sheaf", m.sheaf, "restriction map shape")->check(CLI::IsMember({"diagonal", "full"}));
  f.option("sheaf-activation", m.activation, "activation on predicted maps")
      ->check(CLI::IsMember({"sigmoid", "tanh", "none"}));
  f.option("sheaf-depth", c.sheaf_depth, "affine stages in the map predictor")->check(CLI::Range(1, 2));
  f.option("sheaf-hidden", c.sheaf_hidden, "hidden width of a two-stage map predictor")->check(CLI::PositiveNumber);
  f.option("aggregation", m.aggregation, "hyperedge feature aggregation")->check(CLI::IsMember({"mean", "sum"}));
  f.option("classifier-width", c.classifier_width, "classifier hidden width")->check(CLI::PositiveNumber);
  f.flag("light", c.light, "freeze the map predictor and detach the Laplacian");
  f.flag("residual", c.residual, "add the layer input to its output", true);
  f.flag("dynamic-sheaf", c.dynamic_sheaf, "re-predict maps at every layer");
  f.flag("left-projection", c.left_projection, "apply the per-stalk projection W1", true);
  f.flag("layer-norm", c.layer_norm, "complex layer normalization", true);
  f.flag("nonlinearity", c.nonlinearity, "complex rectifier after each layer", true);
  f.option("dropout", c.sheaf_dropout, "restriction map dropout rate")->check(CLI::Range(0.0, 0.99));
  f.option("jitter", c.degree_jitter, "diagonal jitter added to degree blocks")->check(CLI::NonNegativeNumber);
  f.option("lr", t.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  f.option("wd", t.weight_decay, "L2 weight decay")->check(CLI::NonNegativeNumber);
  f.option("epochs", t.epochs, "maximum epochs")->check(CLI::NonNegativeNumber);
  f.option("patience", t.patience, "early stopping patience")->check(CLI::PositiveNumber);
  f.option("spectral-check-every", t.spectral_check_every, "spectral check period in epochs (0 disables)")
      ->check(CLI::NonNegativeNumber);
  f.option("seed", c.seed, "model seed");
}

struct TrainArgs {
  std::string data;
  ModelArgs m;
  std::string metrics_out;
  bool verbose = false;
};

inline void write_metrics(const TrainResult& res, std::ostream& out) {
  out << "epoch,train_loss,train_acc,val_acc\n";
  for (const auto& e : res.history)
    out << detail::join_row({std::to_string(e.epoch), detail::fmt(e.train_loss), detail::fmt(e.train_acc),
                             detail::fmt(e.val_acc)});
  out << "test_acc," << detail::fmt(res.test_acc) << '\n';
}

inline int train_cmd(TrainArgs a, Run& r) {
  a.m.resolve();
  for (const auto& p : dataset_files(a.data)) r.input(p);
  r.seed("model", a.m.model.seed);
  const auto data = read_dataset(a.data);
  EpochCallback cb;
  if (a.verbose) {
    cb = [&](const EpochMetrics& e) {
      r.err() << "epoch " << e.epoch << " loss " << detail::fmt(e.train_loss) << " train " << detail::fmt(e.train_acc)
              << " val " << detail::fmt(e.val_acc) << '\n';
    };
  }
  const auto res = train(data, a.m.model, a.m.train, cb);
  if (!a.metrics_out.empty()) {
    auto out = dshn::detail::open_out(a.metrics_out);
    write_metrics(res, out);
    out.close();
    r.output(a.metrics_out);
  }
  Index spectral_ok = 0;
  for (const auto& s : res.spectral_checks) spectral_ok += s.passed ? 1 : 0;
  std::string line = "best_epoch=" + std::to_string(res.best_epoch) + " val_acc=" + detail::fmt(res.best_val_acc) +
                     " test_acc=" + detail::fmt(res.test_acc);
  if (!res.spectral_checks.empty())
    line += " spectral_checks=" + std::to_string(spectral_ok) + "/" + std::to_string(res.spectral_checks.size());
  r.emit(line + '\n');
  return spectral_ok == res.spectral_checks.size() ? kOk : kCheckFailed;
}

struct QSweepArgs {
  std::string data;
  ModelArgs m;
  std::vector<double> grid{0.0, 0.05, 0.1, 0.15, 0.2, 0.25};
  std::string out;
  Index jobs = 1;
};

/// Trains one model per grid value. Rows are emitted in grid order as soon as
/// every earlier row is done; a divergence stops the sweep after flushing the
/// rows that finished before it.
inline int q_sweep(QSweepArgs a, Run& r) {
  a.m.resolve();
  if (a.grid.empty()) throw std::invalid_argument("q grid is empty");
  for (double q : a.grid)
    if (!(q >= 0.0 && q <= kMaxCliCharge)) throw std::invalid_argument("q grid values must lie in [0, 0.25]");
  for (const auto& p : dataset_files(a.data)) r.input(p);
  r.seed("model", a.m.model.seed);
  const auto data = read_dataset(a.data);

  std::optional<std::ofstream> table;
  if (!a.out.empty()) table = dshn::detail::open_out(a.out);
  auto emit = [&](const std::string& s) {
    r.emit(s);
    if (table) {
      *table << s;
      table->flush();
    }
  };
  emit("q,test_acc\n");

  const Index n = a.grid.size();
  std::vector<std::optional<double>> acc(n);
  std::vector<std::exception_ptr> failure(n);
  std::mutex mu;
  std::atomic<Index> next{0};
  std::atomic<bool> stop{false};
  Index flushed = 0;
  auto flush_ready = [&] {
    while (flushed < n && (acc[flushed] || failure[flushed])) {
      if (failure[flushed]) return;
      emit(detail::join_row({detail::fmt(a.grid[flushed]), detail::fmt(*acc[flushed])}));
      ++flushed;
    }
  };
  auto worker = [&] {
    for (Index i; !stop && (i = next++) < n;) {
      ModelConfig c = a.m.model;
      c.q = a.grid[i];
      std::optional<double> value;
      std::exception_ptr err;
      try {
        value = train(data, c, a.m.train).test_acc;
      } catch (...) {
        err = std::current_exception();
        stop = true;
      }
      std::lock_guard lock(mu);
      acc[i] = value;
      failure[i] = err;
      flush_ready();
    }
  };
  const Index jobs = std::clamp<Index>(a.jobs, 1, n);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (Index j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (table) {
    table->close();
    r.output(a.out);
  }
  for (const auto& f : failure)
    if (f) std::rethrow_exception(f);
  return kOk;
}

// ---------------------------------------------------------------------------
// Config files and dispatch

/// Turns `key=value` lines from a config file into `--key=value` arguments,
/// skipping keys the command line sets itself.
inline std::vector<std::string> config_arguments(const std::string& path, const FlagSet& flags,
                                                 const std::vector<std::string>& explicit_args) {
  auto in = dshn::detail::open_in(path);
  std::vector<std::string> out;
  for (auto [k, v] : read_key_values(in, path)) {
    if (k.starts_with("--")) k = k.substr(2);
    if (!flags.has(k)) throw ParseError(path + ": unknown option '" + k + "'");
    const bool set_on_command_line = std::any_of(explicit_args.begin(), explicit_args.end(), [&](const auto& a) {
      return a == "--" + k || a.starts_with("--" + k + "=") || a == "--no-" + k;
    });
    if (!set_on_command_line) out.push_back("--" + k + "=" + v);
  }
  return out;
}

inline std::string replay_path(const std::string& p) { return p + ".replay"; }

struct Cli {
  CLI::App app{"Directed sheaf hypergraph Laplacians and diffusion networks"};
  std::list<std::pair<CLI::App*, Command>> commands;  // stable addresses: options bind into them
  GenSyntheticArgs gen;
  TransformArgs transform;
  BuildLaplacianArgs laplacian;
  VerifySpectralArgs spectral;
  TheoremCheckArgs theorems;
  TrainArgs train;
  QSweepArgs sweep;
  std::string replay_manifest;
  CLI::App* replay = nullptr;

  Cli() {
    app.require_subcommand(1);
    app.set_version_flag("--version", "dshn 1.0");

    add("gen-synthetic", "generate the synthetic directed hypergraph benchmark", [&](FlagSet& f, Command& c) {
      f.option("n", gen.cfg.n, "vertices")->check(CLI::PositiveNumber);
      f.option("classes", gen.cfg.classes, "classes")->check(CLI::PositiveNumber);
      f.option("hmin", gen.cfg.h_min, "minimum hyperedge part size");
      f.option("hmax", gen.cfg.h_max, "maximum hyperedge part size");
      f.option("intra", gen.cfg.intra, "undirected hyperedges per class");
      f.option("inter", gen.cfg.inter, "directed hyperedges per class pair");
      f.option("seed", gen.cfg.seed, "generator seed");
      f.option("out", gen.out, "output prefix", true)->required();
      c.primary_output = [&] { return gen.out; };
      c.run = [&](Run& r) { return gen_synthetic(gen, r); };
    });
    add("transform-graph", "turn a directed graph arc list into a forward directed hypergraph",
        [&](FlagSet& f, Command& c) {
          f.option("input", transform.input, "arc list file")->required()->check(CLI::ExistingFile);
          f.option("out", transform.out, "output hypergraph file", true)->required();
          c.primary_output = [&] { return transform.out; };
          c.run = [&](Run& r) { return transform_graph(transform, r); };
        });
    add("build-laplacian", "assemble the sheaf Laplacian and write it densely", [&](FlagSet& f, Command& c) {
      f.option("input", laplacian.input, "hypergraph file")->required()->check(CLI::ExistingFile);
      f.option("q", laplacian.q, "charge parameter")->check(CLI::Range(0.0, kMaxCliCharge));
      f.option("stalk-dim", laplacian.stalk_dim, "stalk dimension")->check(CLI::Range(1, 64));
      f.option("sheaf", laplacian.sheaf, "restriction map shape")
          ->check(CLI::IsMember({"trivial", "diagonal", "full"}));
      f.option("seed", laplacian.seed, "restriction map seed");
      f.flag("normalized", laplacian.normalized, "write the normalized Laplacian");
      f.option("jitter", laplacian.jitter, "degree jitter (0 rejects singular degree blocks)")
          ->check(CLI::NonNegativeNumber);
      f.option("out", laplacian.out, "dense matrix output", true)->required();
      c.primary_output = [&] { return laplacian.out; };
      c.run = [&](Run& r) { return build_laplacian_cmd(laplacian, r); };
    });
    add("verify-spectral", "randomized spectral property checks", [&](FlagSet& f, Command& c) {
      f.option("trials", spectral.trials, "random instances")->check(CLI::NonNegativeNumber);
      f.option("seed", spectral.seed, "base seed");
      f.option("report", spectral.report, "report file", true);
      c.primary_output = [&] { return spectral.report; };
      c.run = [&](Run& r) { return verify_spectral(spectral, r); };
    });
    add("theorem-check", "reduction checks against classical Laplacians", [&](FlagSet& f, Command& c) {
      f.option("trials", theorems.trials, "random instances per reduction")->check(CLI::NonNegativeNumber);
      f.option("seed", theorems.seed, "base seed");
      f.option("report", theorems.report, "report file", true);
      c.primary_output = [&] { return theorems.report; };
      c.run = [&](Run& r) { return theorem_check(theorems, r); };
    });
    add("train", "train a sheaf diffusion network on a labelled dataset", [&](FlagSet& f, Command& c) {
      f.option("data", train.data, "dataset prefix")->required();
      add_model_flags(f, train.m);
      f.option("metrics-out", train.metrics_out, "per-epoch metrics CSV", true);
      f.flag("verbose", train.verbose, "print per-epoch metrics to stderr");
      c.primary_output = [&] { return train.metrics_out; };
      c.run = [&](Run& r) { return train_cmd(train, r); };
    });
    add("q-sweep", "train once per charge value and tabulate test accuracy", [&](FlagSet& f, Command& c) {
      f.option("data", sweep.data, "dataset prefix")->required();
      add_model_flags(f, sweep.m);
      f.option("grid", sweep.grid, "comma-separated q values");
      f.option("out", sweep.out, "CSV table output", true);
      f.option("jobs", sweep.jobs, "parallel training runs")->check(CLI::PositiveNumber);
      c.primary_output = [&] { return sweep.out; };
      c.run = [&](Run& r) { return q_sweep(sweep, r); };
    });

    replay = app.add_subcommand("replay", "re-run a manifest and compare every output byte for byte");
    replay->add_option("manifest", replay_manifest, "manifest file")->required()->check(CLI::ExistingFile);
  }

  template <class Setup>
  void add(const std::string& name, const std::string& desc, Setup setup) {
    auto* sub = app.add_subcommand(name, desc);
    auto& c = commands.emplace_back(sub, Command{}).second;
    c.flags = std::make_unique<FlagSet>(sub);
    sub->add_option("--manifest", c.manifest_path, "manifest output path");
    sub->add_option("--config", c.config_path, "key=value file of option defaults")->check(CLI::ExistingFile);
    setup(*c.flags, c);
  }

  Command* find(const std::string& name) {
    for (auto& [sub, c] : commands)
      if (sub->get_name() == name) return &c;
    return nullptr;
  }
};

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               RunManifest* produced = nullptr);

inline int replay(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  const auto m = read_manifest(manifest_path);
  Cli probe;
  Command* cmd = probe.find(m.subcommand);
  if (!cmd) throw ParseError(manifest_path + ": unknown subcommand '" + m.subcommand + "'");
  std::vector<std::string> args{m.subcommand};
  for (const auto& [k, v] : m.flags) {
    if (!cmd->flags->has(k)) throw ParseError(manifest_path + ": unknown option '" + k + "'");
    const bool redirect = cmd->flags->is_output(k) && !v.empty();
    args.push_back("--" + k + "=" + (redirect ? replay_path(v) : v));
  }
  args.push_back("--manifest=" + replay_path(manifest_path));

  bool same = true;
  for (const auto& [path, digest] : m.inputs) {
    const std::string now = file_digest(path);
    const bool ok = now == digest;
    same = same && ok;
    out << "input " << path << ' ' << (ok ? "unchanged" : "CHANGED") << '\n';
  }
  std::ostringstream sink;
  RunManifest again;
  const int code = run(args, sink, err, &again);
  if (code == kUsage) return kUsage;
  if (again.outputs.size() != m.outputs.size()) {
    out << "output count differs: " << m.outputs.size() << " recorded, " << again.outputs.size() << " replayed\n";
    same = false;
  }
  for (Index i = 0; i < std::min(m.outputs.size(), again.outputs.size()); ++i) {
    const bool ok = m.outputs[i].second == again.outputs[i].second;
    same = same && ok;
    out << "output " << m.outputs[i].first << ' ' << again.outputs[i].first << ' ' << (ok ? "identical" : "DIFFERENT")
        << '\n';
  }
  const bool stdout_ok = m.stdout_digest == again.stdout_digest;
  same = same && stdout_ok;
  out << "stdout " << (stdout_ok ? "identical" : "DIFFERENT") << '\n';
  out << (same ? "replay identical" : "replay differs") << '\n';
  return same ? kOk : kCheckFailed;
}

/// Runs one command line (without the program name). Errors in the input
/// exit with 2, failed checks with 1, numeric divergence with 3.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, RunManifest* produced) {
  Cli cli;
  std::vector<std::string> argv = args;
  try {
    // Splice config-file values in ahead of the explicit arguments.
    if (!argv.empty()) {
      if (Command* cmd = cli.find(argv[0])) {
        for (Index i = 1; i < argv.size(); ++i) {
          std::string path;
          if (argv[i] == "--config" && i + 1 < argv.size()) path = argv[i + 1];
          else if (argv[i].starts_with("--config=")) path = argv[i].substr(9);
          if (path.empty()) continue;
          const std::vector<std::string> rest(argv.begin() + 1, argv.end());
          const auto extra = config_arguments(path, *cmd->flags, rest);
          argv.insert(argv.begin() + 1, extra.begin(), extra.end());
          break;
        }
      }
    }
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    cli.app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = cli.app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  if (cli.replay->parsed()) {
    try {
      return replay(cli.replay_manifest, out, err);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kUsage;
    }
  }

  for (auto& [sub, cmd] : cli.commands) {
    if (!sub->parsed()) continue;
    Run r(out, err);
    r.manifest.subcommand = sub->get_name();
    r.manifest.flags = cmd.flags->values();
    const auto start = std::chrono::steady_clock::now();
    int code = kOk;
    try {
      code = cmd.run(r);
    } catch (const DivergenceError& e) {
      err << "error: " << e.what() << '\n';
      code = kDiverged;
    } catch (const std::invalid_argument& e) {
      err << "error: " << e.what() << '\n';
      return kUsage;
    } catch (const ParseError& e) {
      err << "error: " << e.what() << '\n';
      return kUsage;
    } catch (const HypergraphError& e) {
      err << "error: " << e.what() << '\n';
      return kUsage;
    } catch (const SingularDegreeError& e) {
      err << "error: " << e.what() << " (pass --jitter to regularize)\n";
      return kUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      code = kCheckFailed;
    }
    r.manifest.stdout_digest = hex_digest(fnv1a(r.captured()));
    r.manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string path = cmd.manifest_path;
    if (path.empty()) {
      const std::string primary = cmd.primary_output ? cmd.primary_output() : std::string{};
      path = (primary.empty() ? r.manifest.subcommand : primary) + ".manifest";
    }
    try {
      write_manifest(r.manifest, path);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kUsage;
    }
    if (produced) *produced = r.manifest;
    return code;
  }
  return kUsage;
}

inline int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace dshn::cli
