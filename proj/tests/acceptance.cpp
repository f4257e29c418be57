// Acceptance harness: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dshn/cli.hpp"
#include "dshn/model.hpp"
#include "dshn/random_instances.hpp"
#include "dshn/spectral.hpp"
#include "dshn/theorems.hpp"
#include "dshn/train.hpp"
#include "support.hpp"

using namespace dshn;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

Outcome counterexample() {
  const auto cx = check_counterexample();
  std::string eig;
  for (double v : cx.eigenvalues) eig += (eig.empty() ? "" : ", ") + fmt(v);
  return {cx.matrix_matches() && cx.spectrum_matches(1e-9),
          "matrix deviation " + fmt(cx.matrix_deviation) + ", eigenvalues {" + eig +
              "} vs published {-2, 0.666667, 1.33333, 2}, deviation " + fmt(cx.eigenvalue_deviation) +
              ", min eigenvalue " + fmt(cx.min_eig)};
}

Outcome spectral_suite() {
  const auto s = run_spectral_trials(500, 20240601);
  std::string detail;
  for (const auto& [name, n] : s.applicable)
    detail += (detail.empty() ? "" : ", ") + name + " " + std::to_string(s.passed.at(name)) + "/" + std::to_string(n);
  return {s.all_passed() && s.trials == 500, detail};
}

Outcome theorems() {
  const auto results = run_theorem_suites(50, 20240602);
  bool ok = !results.empty();
  std::string detail;
  for (const auto& r : results) {
    ok = ok && r.passed() && r.instances == 50;
    detail += (detail.empty() ? "" : ", ") + r.name + " max dev " + fmt(r.max_deviation);
  }
  return {ok, detail};
}

Outcome gradients() {
  bool ok = true;
  double worst = 0.0;
  Index groups = 0, probes = 0;
  double frozen_max = 0.0;
  Index frozen_groups = 0;
  std::string failures;
  for (int light = 0; light < 2; ++light) {
    for (int variant = 0; variant < 3; ++variant) {
      // Redraw while some trainable group has no kink-free probe at all.
      std::vector<ParameterCheck> checks;
      for (std::uint64_t attempt = 0; attempt < 10; ++attempt) {
        const auto g = testing::gradient_instance(derive_seed(3000 + 10 * variant + light, attempt), light, variant);
        const DiffusionStructure s(g.hypergraph, g.config.stalk_dim, g.config.q, g.config.map_shape);
        GradientCheckOptions opt;
        opt.seed = attempt;
        checks = check_gradients(s, g.features, g.labels, g.mask, g.state, g.config, opt);
        bool usable = true;
        for (const auto& c : checks) usable = usable && (c.frozen || c.probed > 0);
        if (usable) break;
      }
      for (const auto& c : checks) {
        ++groups;
        if (c.frozen) {
          ++frozen_groups;
          frozen_max = std::max(frozen_max, c.max_abs_gradient);
        } else {
          probes += c.probed;
          worst = std::max(worst, c.max_relative_error);
        }
        if (!c.passed) {
          ok = false;
          failures += " " + std::string(light ? "light:" : "full:") + c.name;
        }
      }
    }
  }
  if (frozen_groups == 0) ok = false;
  return {ok, std::to_string(groups) + " groups, " + std::to_string(probes) + " probes, worst relative error " +
                  fmt(worst) + ", frozen groups " + std::to_string(frozen_groups) + " with max |grad| " +
                  fmt(frozen_max) + (failures.empty() ? "" : ", failed:" + failures)};
}

ModelConfig classification_config() {
  ModelConfig c;  // defaults: 2 layers, d = 2, f = 8, diagonal sigmoid maps
  c.light = true;
  c.q = 0.25;
  return c;
}

TrainConfig classification_training() {
  TrainConfig t;
  t.lr = 0.01;
  t.weight_decay = 5e-4;
  t.epochs = 200;
  t.patience = 100;
  return t;
}

Outcome classification() {
  const Index seeds = 5;
  std::map<Index, double> mean;
  std::string detail;
  bool ok = true;
  auto run = [&](Index inter, double q, std::uint64_t seed) {
    SyntheticConfig sc;
    sc.inter = inter;
    sc.seed = seed;
    const auto data = generate_synthetic(sc);
    ModelConfig c = classification_config();
    c.q = q;
    c.seed = seed;
    return train(data, c, classification_training()).test_acc;
  };
  for (Index inter : {10, 30, 50}) {
    double m = 0.0;
    for (Index s = 0; s < seeds; ++s) m += run(inter, 0.25, s) / seeds;
    mean[inter] = m;
    ok = ok && m >= 0.90;
    detail += "I_o=" + std::to_string(inter) + " mean " + fmt(m) + "; ";
  }
  double ablation = 0.0;
  for (Index s = 0; s < seeds; ++s) ablation += run(30, 0.0, s) / seeds;
  const double gap = mean[30] - ablation;
  ok = ok && gap >= 0.15;
  detail += "q=0 at I_o=30 mean " + fmt(ablation) + " (gap " + fmt(100.0 * gap) + " points)";
  return {ok, detail};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const auto dir = testing::scratch_dir("acceptance");
  const std::string p = dir.string() + "/";
  {
    std::ofstream arcs(p + "graph.arcs");
    arcs << "5 6\n1 2\n1 3\n2 4\n3 4\n4 5\n5 1\n";
  }
  const std::vector<std::vector<std::string>> runs = {
      {"gen-synthetic", "--n", "60", "--classes", "3", "--intra", "8", "--inter", "6", "--seed", "11", "--out",
       p + "syn", "--manifest", p + "gen.manifest"},
      {"transform-graph", "--input", p + "graph.arcs", "--out", p + "graph.hg", "--manifest", p + "tr.manifest"},
      {"build-laplacian", "--input", p + "graph.hg", "--q", "0.1", "--stalk-dim", "2", "--sheaf", "full", "--seed",
       "5", "--normalized", "--jitter", "1e-8", "--out", p + "L.txt", "--manifest", p + "bl.manifest"},
      {"verify-spectral", "--trials", "20", "--seed", "9", "--report", p + "spec.txt", "--manifest",
       p + "vs.manifest"},
      {"theorem-check", "--trials", "5", "--seed", "9", "--report", p + "thm.txt", "--manifest", p + "tc.manifest"},
      {"train", "--data", p + "syn", "--epochs", "15", "--dropout", "0.2", "--dynamic-sheaf", "--seed", "4",
       "--metrics-out", p + "metrics.csv", "--manifest", p + "train.manifest"},
      {"q-sweep", "--data", p + "syn", "--light", "--epochs", "10", "--grid", "0,0.1,0.25", "--jobs", "2", "--out",
       p + "sweep.csv", "--manifest", p + "sweep.manifest"},
  };
  bool ok = true;
  std::string detail;
  for (const auto& args : runs) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    // theorem-check exits 1 while the counterexample spectrum disagrees; the
    // run still completes and must replay identically.
    if (code != cli::kOk && !(args[0] == "theorem-check" && code == cli::kCheckFailed)) {
      ok = false;
      detail += args[0] + " exited " + std::to_string(code) + " (" + err.str() + "); ";
      continue;
    }
    std::ostringstream rout, rerr;
    const int rcode = cli::run({"replay", args.back()}, rout, rerr);
    const bool same = rcode == cli::kOk;
    ok = ok && same;
    detail += args[0] + (same ? " identical; " : " DIFFERS; ");
  }
  fs::remove_all(dir);
  return {ok, detail};
}

Outcome layer_reduction() {
  double worst_tape = 0.0, worst_value = 0.0;
  const Index trials = 30;
  for (Index trial = 0; trial < trials; ++trial) {
    const auto inst = random_spectral_instance(derive_seed(777, trial));
    if (inst.sheaf.config().shape == MapShape::trivial) continue;
    const auto& h = inst.hypergraph;
    const auto& a = inst.sheaf;
    const Index d = a.stalk_dim();
    const Index n = h.num_vertices();
    const Index f = 3;
    const DiffusionStructure s(h, d, a.q(), a.config().shape);
    RealMatrix maps(a.maps().size(), s.map_width());
    for (Index k = 0; k < a.maps().size(); ++k) {
      const auto& m = a.map(k);
      if (s.shape == MapShape::diagonal)
        for (Index i = 0; i < d; ++i) maps(k, i) = m(i, i);
      else
        for (Index i = 0; i < d * d; ++i) maps(k, i) = m.data()[i];
    }
    Rng rng(derive_seed(inst.seed, 3));
    ComplexMatrix x(n * d, f);
    for (auto& z : x.values()) z = {rng.normal(), rng.normal()};

    LaplacianOptions lo;
    lo.normalized = true;
    lo.regularization = DegreeRegularization::jitter;
    lo.jitter = kDefaultDegreeJitter;
    const auto bundle = build_laplacian(h, a, lo);
    const auto lx = matmul(bundle.L.to_dense(), x);
    ComplexMatrix expected = x;
    for (Index i = 0; i < x.size(); ++i) expected.data()[i] -= lx.data()[i];

    ad::Tape t;
    ad::Var v = t.constant(to_stacked(x));
    v = ad::block_left_mul(t, v, t.constant(RealMatrix::identity(d)));
    v = ad::matmul(t, v, t.constant(RealMatrix::identity(f)));
    v = ad::sheaf_diffusion(t, v, t.constant(maps), s, kDefaultDegreeJitter);
    worst_tape = std::max(worst_tape, max_abs_diff(from_stacked(t.value(v)), expected));

    const RealMatrix w1 = RealMatrix::identity(d);
    const auto value = diffusion_layer(x, bundle, &w1, RealMatrix::identity(f));
    worst_value = std::max(worst_value, max_abs_diff(value, expected));
  }
  return {worst_tape <= 1e-10 && worst_value <= 1e-10,
          "max |layer - (I - L_N)X| " + fmt(worst_tape) + " (differentiable path), " + fmt(worst_value) +
              " (assembled path)"};
}

struct Criterion {
  std::string title;
  std::function<Outcome()> check;
  double budget_seconds;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-7)")->check(CLI::Range(1, 7));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {"prior linear sheaf Laplacian counterexample", counterexample, 1},
      {"spectral suite, 500 random instances", spectral_suite, 120},
      {"reductions to classical Laplacians, 50 instances each", theorems, 60},
      {"finite-difference gradients, DSHN and DSHNLight", gradients, 120},
      {"synthetic classification with DSHNLight and q = 0 ablation", classification, 1800},
      {"manifest replay is bit-identical", determinism, 600},
      {"one identity layer equals (I - L_N) X", layer_reduction, 60},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<std::size_t>(only) != i + 1) continue;
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = sec <= c.budget_seconds;
    const bool pass = o.passed && in_time;
    all = all && pass;
    std::cout << "criterion " << i + 1 << ": " << (pass ? "PASS" : "FAIL") << " - " << c.title << " - " << o.detail
              << " [" << fmt(sec) << " s" << (in_time ? "" : ", over budget") << "]" << std::endl;
  }
  return all ? 0 : 1;
}
