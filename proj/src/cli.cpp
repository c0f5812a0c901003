#include "koop/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "koop/io.hpp"
#include "koop/metrics.hpp"
#include "koop/parallel.hpp"
#include "koop/systems.hpp"
#include "koop/trainer.hpp"

namespace koop {
namespace {

using nlohmann::json;

constexpr double kUnsetD = std::numeric_limits<double>::quiet_NaN();

struct GlobalOpts {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = machine parallelism
  std::string out_dir;
  bool seed_given = false;
};

void apply_threads(const GlobalOpts& g) {
  int t = g.threads;
  if (t <= 0) t = static_cast<int>(std::thread::hardware_concurrency());
  set_thread_count(std::max(1, t));
}

// Output paths are taken relative to --out-dir unless absolute; parent
// directories are created on demand.
std::string resolve_out(const GlobalOpts& g, const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (!p.is_absolute() && !g.out_dir.empty()) p = std::filesystem::path(g.out_dir) / p;
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  return p.string();
}

std::string with_commas(Index n) {
  std::string digits = std::to_string(n < 0 ? -n : n);
  std::string out;
  const std::size_t len = digits.size();
  for (std::size_t i = 0; i < len; ++i) {
    if (i > 0 && (len - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return (n < 0 ? "-" : "") + out;
}

std::vector<double> parse_doubles(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(item, &pos);
      while (pos < item.size() && std::isspace(static_cast<unsigned char>(item[pos]))) ++pos;
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw InvalidInput(std::string(what) + ": cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw InvalidInput(std::string(what) + ": empty list");
  return out;
}

std::vector<Index> parse_indices(const std::string& text, const char* what) {
  std::vector<Index> out;
  for (double v : parse_doubles(text, what)) {
    if (v < 1 || v != std::floor(v))
      throw InvalidInput(std::string(what) + ": entries must be positive integers");
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

ManifestArtifact artifact(const std::string& name, const std::string& path) {
  return {name, path, hash_file(path)};
}

// ---- system descriptors -----------------------------------------------------

DuffingParams duffing_from_system(const json& sys) {
  DuffingParams p;
  p.alpha = sys.value("alpha", p.alpha);
  p.beta = sys.value("beta", p.beta);
  p.gamma = sys.value("gamma", p.gamma);
  p.dt = sys.value("dt", p.dt);
  p.validate();
  return p;
}

KsParams ks_from_system(const json& sys) {
  KsParams p;
  p.length = sys.value("length", p.length);
  p.grid = sys.value("grid", p.grid);
  p.dt = sys.value("dt", p.dt);
  p.substeps = sys.value("substeps", Index{0});
  p.conservative = sys.value("conservative", false);
  p.validate();
  return p;
}

std::string system_name(const json& sys) {
  if (!sys.is_object() || !sys.contains("name"))
    throw InvalidInput("model/dataset carries no system descriptor; pass the sampling "
                       "region and ground truth explicitly");
  return sys.at("name").get<std::string>();
}

// One sampling-interval step of the generating system, applied columnwise.
BatchMap truth_step_map(const json& sys) {
  const std::string name = system_name(sys);
  if (name == "duffing") {
    const DuffingParams p = duffing_from_system(sys);
    return [p](const Matrix& X) { return duffing_step_batch(p, X); };
  }
  if (name == "ks") {
    const KsParams p = ks_from_system(sys);
    return [p](const Matrix& X) {
      Matrix Y(X.rows(), X.cols());
      for (Index c = 0; c < X.cols(); ++c) Y.col(c) = ks_step(p, X.col(c));
      return Y;
    };
  }
  throw InvalidInput("unknown system '" + name + "' in descriptor");
}

// d x (steps + 1) ground-truth rollout from a single initial state.
Matrix rollout(const json& sys, const Vector& x0, Index steps) {
  const std::string name = system_name(sys);
  if (name == "duffing") return duffing_trajectory(duffing_from_system(sys), x0, steps);
  if (name == "ks") {
    const KsParams p = ks_from_system(sys);
    Matrix out(x0.size(), steps + 1);
    out.col(0) = x0;
    for (Index s = 0; s < steps; ++s) out.col(s + 1) = ks_step(p, out.col(s));
    return out;
  }
  throw InvalidInput("unknown system '" + name + "' in descriptor");
}

Box system_box(const json& sys, Index dim, double flag_lo, double flag_hi) {
  double lo = std::isnan(flag_lo) ? sys.value("box_lo", -2.0) : flag_lo;
  double hi = std::isnan(flag_hi) ? sys.value("box_hi", 2.0) : flag_hi;
  Box box = uniform_box(dim, lo, hi);
  box.validate();
  return box;
}

// ---- command option bags ------------------------------------------------------

struct GenerateOpts {
  std::string system, out, csv, manifest;
  Index trajectories = -1, steps = -1;
  double dt = kUnsetD, alpha = 1.0, beta = -1.0, gamma = 0.5;
  double box_lo = kUnsetD, box_hi = kUnsetD;
  double length = 16.0;
  Index grid = 128, substeps = 0, max_attempts = 1000;
  bool conservative = false;
};

int cmd_generate(const GlobalOpts& g, const GenerateOpts& o) {
  apply_threads(g);
  TimeSeriesDataset ds;
  Index rejected = 0;
  json config;

  if (o.system == "duffing") {
    DuffingParams p;
    p.alpha = o.alpha;
    p.beta = o.beta;
    p.gamma = o.gamma;
    if (!std::isnan(o.dt)) p.dt = o.dt;
    p.validate();
    DuffingDatasetParams dp;
    if (o.trajectories > 0) dp.n_trajectories = o.trajectories;
    if (o.steps > 0) dp.steps = o.steps;
    dp.box = uniform_box(2, std::isnan(o.box_lo) ? -2.0 : o.box_lo,
                         std::isnan(o.box_hi) ? 2.0 : o.box_hi);
    ds = generate_duffing_dataset(p, dp, g.seed);
    config = {{"command", "generate"},  {"system", "duffing"},
              {"alpha", p.alpha},       {"beta", p.beta},
              {"gamma", p.gamma},       {"dt", p.dt},
              {"trajectories", dp.n_trajectories}, {"steps", dp.steps},
              {"box_lo", dp.box.lo(0)}, {"box_hi", dp.box.hi(0)},
              {"seed", g.seed}};
  } else {
    KsParams p;
    p.length = o.length;
    p.grid = o.grid;
    if (!std::isnan(o.dt)) p.dt = o.dt;
    p.substeps = o.substeps;
    p.conservative = o.conservative;
    p.validate();
    KsDatasetParams dp;
    if (o.trajectories > 0) dp.n_trajectories = o.trajectories;
    if (o.steps > 0) dp.steps = o.steps;
    if (!std::isnan(o.box_lo)) dp.box_lo = o.box_lo;
    if (!std::isnan(o.box_hi)) dp.box_hi = o.box_hi;
    dp.max_attempts = o.max_attempts;
    ds = generate_ks_dataset(p, dp, g.seed, &rejected);
    config = {{"command", "generate"}, {"system", "ks"},
              {"length", p.length},    {"grid", p.grid},
              {"dt", p.dt},            {"substeps", ds.system.at("substeps")},
              {"conservative", p.conservative},
              {"trajectories", dp.n_trajectories}, {"steps", dp.steps},
              {"box_lo", dp.box_lo},   {"box_hi", dp.box_hi},
              {"max_attempts", dp.max_attempts},   {"seed", g.seed}};
  }

  const std::string out = resolve_out(g, o.out);
  save_dataset(ds, out);
  std::vector<ManifestArtifact> artifacts{artifact("dataset", out)};
  if (!o.csv.empty()) {
    const std::string csv = resolve_out(g, o.csv);
    export_dataset_csv(ds, csv);
    artifacts.push_back(artifact("dataset_csv", csv));
  }
  if (!o.manifest.empty())
    write_json(make_manifest(config, {{"dataset", g.seed}}, artifacts),
               resolve_out(g, o.manifest));

  std::cout << "dataset: " << out << "\n"
            << "trajectories: " << ds.trajectories.size() << "\n"
            << "pairs: " << with_commas(ds.pair_count()) << "\n"
            << "state dim: " << ds.state_dim << "\n"
            << "rejected: " << rejected << "\n";
  return 0;
}

// ---- train --------------------------------------------------------------------

struct TrainOpts {
  std::string data, config_path;
  std::string dict = "node", init = "inverse";
  Index dict_size = 25, width = -1, depth = 3, field_width = -1;
  double lambda = 0.01, epsilon = 30.0, lr = 1e-3;
  Index max_epochs = 5000, inner_steps = 1, batch_size = 0;
  double abs_tol = 1e-9, rel_tol = 1e-7;
  Index ode_max_steps = 100000;
  double svd_cutoff = 1e-12;
  Index log_every = 1, checkpoint_every = 0;
  bool quiet = false;
  std::string model = "model.json", checkpoint = "checkpoint.json";
  std::string trace = "trace.csv", manifest = "manifest.json";
};

json train_config_to_json(const TrainConfig& c) {
  return {{"version", 1},
          {"dict", c.arch.kind == NetworkKind::node ? "node" : "mlp"},
          {"dict_size", c.dictionary_size},
          {"width", c.arch.width},
          {"depth", c.arch.depth},
          {"field_width", c.arch.field_width},
          {"init", c.arch.init == InitScheme::literal ? "literal" : "inverse"},
          {"field_init_std", c.arch.field_init_std},
          {"lambda", c.lambda},
          {"epsilon", c.epsilon},
          {"learning_rate", c.learning_rate},
          {"max_epochs", c.max_epochs},
          {"inner_steps", c.inner_steps},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"abs_tol", c.node_integrator.abs_tol},
          {"rel_tol", c.node_integrator.rel_tol},
          {"ode_max_steps", c.node_integrator.max_steps},
          {"svd_cutoff", c.svd_cutoff}};
}

NetworkKind parse_kind(const std::string& s) {
  if (s == "mlp") return NetworkKind::mlp;
  if (s == "node") return NetworkKind::node;
  throw InvalidInput("unknown dictionary network kind '" + s + "' (use mlp or node)");
}

InitScheme parse_init(const std::string& s) {
  if (s == "inverse") return InitScheme::inverse;
  if (s == "literal") return InitScheme::literal;
  throw InvalidInput("unknown init scheme '" + s + "' (use inverse or literal)");
}

// Config-file values replace the built-in defaults; explicit flags win over
// both.  Unknown keys are rejected so typos do not silently fall back.
void apply_config_file(const json& j, TrainOpts& o, GlobalOpts& g) {
  static const std::vector<std::string> known = {
      "version",    "dict",       "dict_size",     "width",        "depth",
      "field_width","init",       "field_init_std","lambda",       "epsilon",
      "learning_rate", "max_epochs", "inner_steps", "batch_size",  "seed",
      "abs_tol",    "rel_tol",    "ode_max_steps", "svd_cutoff"};
  if (!j.is_object()) throw InvalidInput("train config: expected a JSON object");
  if (j.value("version", 1) != 1) throw InvalidInput("train config: unsupported version");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw InvalidInput("train config: unknown key '" + key + "'");
  }
  if (j.contains("dict")) o.dict = j.at("dict").get<std::string>();
  if (j.contains("dict_size")) o.dict_size = j.at("dict_size").get<Index>();
  if (j.contains("width")) o.width = j.at("width").get<Index>();
  if (j.contains("depth")) o.depth = j.at("depth").get<Index>();
  if (j.contains("field_width")) o.field_width = j.at("field_width").get<Index>();
  if (j.contains("init")) o.init = j.at("init").get<std::string>();
  if (j.contains("lambda")) o.lambda = j.at("lambda").get<double>();
  if (j.contains("epsilon")) o.epsilon = j.at("epsilon").get<double>();
  if (j.contains("learning_rate")) o.lr = j.at("learning_rate").get<double>();
  if (j.contains("max_epochs")) o.max_epochs = j.at("max_epochs").get<Index>();
  if (j.contains("inner_steps")) o.inner_steps = j.at("inner_steps").get<Index>();
  if (j.contains("batch_size")) o.batch_size = j.at("batch_size").get<Index>();
  if (j.contains("abs_tol")) o.abs_tol = j.at("abs_tol").get<double>();
  if (j.contains("rel_tol")) o.rel_tol = j.at("rel_tol").get<double>();
  if (j.contains("ode_max_steps")) o.ode_max_steps = j.at("ode_max_steps").get<Index>();
  if (j.contains("svd_cutoff")) o.svd_cutoff = j.at("svd_cutoff").get<double>();
  if (j.contains("seed") && !g.seed_given) g.seed = j.at("seed").get<std::uint64_t>();
}

TrainConfig build_train_config(const GlobalOpts& g, const TrainOpts& o) {
  TrainConfig c;
  c.dictionary_size = o.dict_size;
  c.lambda = o.lambda;
  c.epsilon = o.epsilon;
  c.learning_rate = o.lr;
  c.max_epochs = o.max_epochs;
  c.inner_steps = o.inner_steps;
  c.batch_size = o.batch_size;
  c.seed = g.seed;
  c.svd_cutoff = o.svd_cutoff;
  c.log_every = o.log_every;
  c.checkpoint_every = o.checkpoint_every;
  c.arch.kind = parse_kind(o.dict);
  c.arch.init = parse_init(o.init);
  c.arch.depth = o.depth;
  c.arch.width = o.width > 0 ? o.width : (c.arch.kind == NetworkKind::node ? 120 : 100);
  c.arch.field_width = o.field_width > 0 ? o.field_width : 68;
  c.node_integrator.abs_tol = o.abs_tol;
  c.node_integrator.rel_tol = o.rel_tol;
  c.node_integrator.max_steps = o.ode_max_steps;
  return c;
}

int cmd_train(const GlobalOpts& g_in, TrainOpts o) {
  GlobalOpts g = g_in;
  if (!o.config_path.empty()) apply_config_file(read_json(o.config_path), o, g);
  apply_threads(g);

  const TimeSeriesDataset ds = load_dataset(o.data);
  TrainConfig config = build_train_config(g, o);

  const std::string ckpt_path = resolve_out(g, o.checkpoint);
  CheckpointCallback on_checkpoint;
  if (config.checkpoint_every > 0 && !ckpt_path.empty())
    on_checkpoint = [&](Index, const Dictionary& dict, const Matrix&) {
      save_checkpoint({dict.network().arch(), dict.network().parameters(), config.seed},
                      ckpt_path);
    };

  TrainOutput out = train(config, ds, o.quiet ? nullptr : &std::cerr, on_checkpoint);

  std::cout << "parameters: " << with_commas(out.report.parameter_count) << "\n";

  const std::string model_path = resolve_out(g, o.model);
  save_model(out.model, config.seed, ds.system, model_path);
  save_checkpoint(
      {out.dictionary.network().arch(), out.dictionary.network().parameters(), config.seed},
      ckpt_path);
  const std::string trace_path = resolve_out(g, o.trace);
  write_trace_csv(out.report, trace_path);

  if (!o.manifest.empty()) {
    json config_json = train_config_to_json(config);
    config_json["command"] = "train";
    config_json["data"] = o.data;
    config_json["data_hash"] = hash_file(o.data);
    write_json(make_manifest(config_json,
                             {{"train", config.seed}, {"dataset", ds.seed}},
                             {artifact("model", model_path), artifact("checkpoint", ckpt_path),
                              artifact("trace", trace_path)}),
               resolve_out(g, o.manifest));
  }

  std::cout << "epochs: " << out.report.epochs << "\n"
            << "final loss: " << format_g17(out.report.final_loss) << "\n"
            << "converged: " << (out.report.converged ? "yes" : "no") << "\n"
            << "wall seconds: " << out.report.wall_seconds << "\n"
            << "model: " << model_path << "\n";
  return 0;
}

// ---- predict --------------------------------------------------------------------

struct PredictOpts {
  std::string model, x0_text, out = "predict.csv", manifest;
  Index steps = 50;
  bool truth = false;
};

int cmd_predict(const GlobalOpts& g, const PredictOpts& o) {
  apply_threads(g);
  const LoadedModel loaded = load_model(o.model);
  const Index d = loaded.model.B.cols();

  const std::vector<double> coords = parse_doubles(o.x0_text, "--x0");
  if (static_cast<Index>(coords.size()) != d)
    throw InvalidInput("--x0 has " + std::to_string(coords.size()) +
                       " components but the model state dimension is " + std::to_string(d));
  Vector x0 = Eigen::Map<const Vector>(coords.data(), d);

  const Matrix pred = predict(loaded.model, x0, o.steps);
  Matrix actual;
  if (o.truth) actual = rollout(loaded.system, x0, o.steps);

  std::ostringstream csv;
  csv << "step";
  for (Index i = 0; i < d; ++i) csv << ",x" << i;
  if (o.truth) {
    for (Index i = 0; i < d; ++i) csv << ",true" << i;
    csv << ",error";
  }
  csv << "\n";
  for (Index n = 0; n <= o.steps; ++n) {
    csv << n;
    for (Index i = 0; i < d; ++i) csv << "," << format_g17(pred(i, n));
    if (o.truth) {
      for (Index i = 0; i < d; ++i) csv << "," << format_g17(actual(i, n));
      csv << "," << format_g17((pred.col(n) - actual.col(n)).norm());
    }
    csv << "\n";
  }
  const std::string out = resolve_out(g, o.out);
  write_text(csv.str(), out);

  if (!o.manifest.empty()) {
    json config{{"command", "predict"}, {"model", o.model}, {"model_hash", hash_file(o.model)},
                {"x0", coords},         {"steps", o.steps}, {"truth", o.truth}};
    write_json(make_manifest(config, json::object(), {artifact("prediction", out)}),
               resolve_out(g, o.manifest));
  }

  std::cout << "prediction: " << out << "\n" << "final state:";
  for (Index i = 0; i < d; ++i) std::cout << " " << format_g17(pred(i, o.steps));
  std::cout << "\n";
  return 0;
}

// ---- eval ----------------------------------------------------------------------

struct EvalOpts {
  std::string model, which = "both", data, report = "eval.json", csv;
  Index count = 100, horizon = 50, samples = 10000;
  double box_lo = kUnsetD, box_hi = kUnsetD;
};

int cmd_eval(const GlobalOpts& g, const EvalOpts& o) {
  apply_threads(g);
  const LoadedModel loaded = load_model(o.model);
  const Index d = loaded.model.B.cols();
  const bool want_recon = o.which == "recon" || o.which == "both";
  const bool want_eigen = o.which == "eigen" || o.which == "both";
  json report{{"which", o.which}, {"model", o.model}};

  if (want_recon) {
    std::vector<Matrix> truths;
    if (!o.data.empty()) {
      const TimeSeriesDataset ds = load_dataset(o.data);
      if (ds.state_dim != d)
        throw InvalidInput("eval dataset state dimension " + std::to_string(ds.state_dim) +
                           " does not match the model (" + std::to_string(d) + ")");
      truths = ds.trajectories;
    } else {
      const Box box = system_box(loaded.system, d, o.box_lo, o.box_hi);
      Rng rng = Rng::stream(g.seed, 4);
      const Matrix ics = sample_box(box, o.count, rng);
      truths.reserve(static_cast<std::size_t>(o.count));
      for (Index c = 0; c < o.count; ++c)
        truths.push_back(rollout(loaded.system, ics.col(c), o.horizon));
    }

    double sum = 0.0;
    std::vector<double> per_traj;
    per_traj.reserve(truths.size());
    std::ostringstream csv;
    csv << "trajectory,steps,recon_error\n";
    for (std::size_t t = 0; t < truths.size(); ++t) {
      const Matrix& actual = truths[t];
      const Index steps = actual.cols() - 1;
      const Matrix pred = predict(loaded.model, actual.col(0), steps);
      const double err = reconstruction_error(actual, pred);
      per_traj.push_back(err);
      sum += err;
      csv << t << "," << steps << "," << format_g17(err) << "\n";
    }
    const double mean = sum / static_cast<double>(per_traj.size());
    report["recon"] = {{"mean", mean},
                       {"per_trajectory", per_traj},
                       {"trajectories", per_traj.size()}};
    if (!o.csv.empty()) write_text(csv.str(), resolve_out(g, o.csv));
    std::cout << "recon error (mean over " << per_traj.size()
              << " trajectories): " << format_g17(mean) << "\n";
  }

  if (want_eigen) {
    EvalConfig cfg;
    cfg.samples = o.samples;
    cfg.box = system_box(loaded.system, d, o.box_lo, o.box_hi);
    cfg.seed = g.seed;
    const NormalizedModel normalized = normalize_eigenfunctions(loaded.model, cfg);
    const BatchMap step = truth_step_map(loaded.system);
    const EigenfunctionError err = eigenfunction_error(normalized.model, step, cfg);
    std::vector<double> per(err.per_eigenpair.data(),
                            err.per_eigenpair.data() + err.per_eigenpair.size());
    std::vector<double> recheck(normalized.recheck.data(),
                                normalized.recheck.data() + normalized.recheck.size());
    report["eigen"] = {{"averaged", err.averaged},
                       {"per_eigenpair", per},
                       {"norm_recheck", recheck},
                       {"samples", cfg.samples}};
    std::cout << "eigenfunction error (mean over " << per.size()
              << " eigenpairs): " << format_g17(err.averaged) << "\n";
  }

  if (!o.report.empty()) {
    const std::string path = resolve_out(g, o.report);
    write_json(report, path);
    std::cout << "report: " << path << "\n";
  }
  return 0;
}

// ---- classify --------------------------------------------------------------------

struct ClassifyOpts {
  std::string model, out = "classify.csv", report;
  Index count = 2000, horizon = 49;
  double box_lo = kUnsetD, box_hi = kUnsetD;
  double target_plus = 1.0, target_minus = -1.0;
};

int cmd_classify(const GlobalOpts& g, const ClassifyOpts& o) {
  apply_threads(g);
  const LoadedModel loaded = load_model(o.model);
  const Index d = loaded.model.B.cols();

  EvalConfig cfg;
  cfg.samples = o.count;
  cfg.box = system_box(loaded.system, d, o.box_lo, o.box_hi);
  cfg.seed = g.seed;
  cfg.horizon = o.horizon;
  cfg.target_plus = o.target_plus;
  cfg.target_minus = o.target_minus;

  Rng rng = Rng::stream(g.seed, 3);
  const Matrix ics = sample_box(cfg.box, o.count, rng);
  const BatchMap step = truth_step_map(loaded.system);
  const BasinClassification result = classify_basins(loaded.model, step, ics, cfg);

  std::ostringstream csv;
  csv << "x1,x2,truth,predicted\n";
  for (Index c = 0; c < ics.cols(); ++c) {
    csv << format_g17(ics(0, c)) << "," << format_g17(d > 1 ? ics(1, c) : 0.0) << ","
        << result.truth[static_cast<std::size_t>(c)] << ","
        << result.predicted[static_cast<std::size_t>(c)] << "\n";
  }
  const std::string out = resolve_out(g, o.out);
  write_text(csv.str(), out);

  if (!o.report.empty())
    write_json(json{{"accuracy", result.accuracy},
                    {"correct", result.correct},
                    {"count", o.count},
                    {"horizon", o.horizon},
                    {"seed", g.seed}},
               resolve_out(g, o.report));

  std::cout << "labels: " << out << "\n"
            << "accuracy: " << result.accuracy << " (" << result.correct << "/" << o.count
            << ")\n";
  return 0;
}

// ---- sweep ----------------------------------------------------------------------

struct SweepOpts {
  TrainOpts train;  // shared hyperparameters; model/trace/manifest paths unused
  std::string widths_text, metric = "recon", out = "sweep.csv";
  double threshold = 0.0;
  Index eval_count = 20, eval_horizon = 10, samples = 2000;
  double box_lo = kUnsetD, box_hi = kUnsetD;
};

int cmd_sweep(const GlobalOpts& g_in, SweepOpts o) {
  GlobalOpts g = g_in;
  if (!o.train.config_path.empty())
    apply_config_file(read_json(o.train.config_path), o.train, g);
  apply_threads(g);

  const TimeSeriesDataset ds = load_dataset(o.train.data);
  const TrainConfig base = build_train_config(g, o.train);
  const std::vector<Index> widths = parse_indices(o.widths_text, "--widths");

  SweepMetric metric;
  if (o.metric == "loss") {
    metric = [](const TrainOutput& out) { return out.report.final_loss; };
  } else if (o.metric == "recon") {
    const Box box = system_box(ds.system, ds.state_dim, o.box_lo, o.box_hi);
    Rng rng = Rng::stream(g.seed, 4);
    const Matrix ics = sample_box(box, o.eval_count, rng);
    std::vector<Matrix> truths;
    truths.reserve(static_cast<std::size_t>(o.eval_count));
    for (Index c = 0; c < o.eval_count; ++c)
      truths.push_back(rollout(ds.system, ics.col(c), o.eval_horizon));
    metric = [truths](const TrainOutput& out) {
      double sum = 0.0;
      for (const Matrix& actual : truths) {
        const Matrix pred = predict(out.model, actual.col(0), actual.cols() - 1);
        sum += reconstruction_error(actual, pred);
      }
      return sum / static_cast<double>(truths.size());
    };
  } else if (o.metric == "eigen") {
    EvalConfig cfg;
    cfg.samples = o.samples;
    cfg.box = system_box(ds.system, ds.state_dim, o.box_lo, o.box_hi);
    cfg.seed = g.seed;
    const BatchMap step = truth_step_map(ds.system);
    metric = [cfg, step](const TrainOutput& out) {
      const NormalizedModel normalized = normalize_eigenfunctions(out.model, cfg);
      return eigenfunction_error(normalized.model, step, cfg).averaged;
    };
  } else {
    throw InvalidInput("unknown sweep metric '" + o.metric + "' (use recon, eigen, or loss)");
  }

  const SweepResult result =
      efficiency_sweep(base, ds, widths, metric, o.threshold, &std::cerr);

  std::ostringstream csv;
  csv << "width,parameters,metric,final_loss,meets_threshold\n";
  for (const SweepRow& row : result.rows)
    csv << row.width << "," << row.parameter_count << "," << format_g17(row.metric) << ","
        << format_g17(row.final_loss) << "," << (row.meets_threshold ? 1 : 0) << "\n";
  const std::string out = resolve_out(g, o.out);
  write_text(csv.str(), out);

  std::cout << "sweep table: " << out << "\n";
  for (const SweepRow& row : result.rows)
    std::cout << "width " << row.width << ": parameters " << with_commas(row.parameter_count)
              << ", metric " << format_g17(row.metric)
              << (row.meets_threshold ? "  [meets threshold]" : "") << "\n";
  if (result.best_width >= 0)
    std::cout << "smallest passing width: " << result.best_width << " ("
              << with_commas(result.best_parameter_count) << " parameters)\n";
  else
    std::cout << "no width met the threshold " << format_g17(o.threshold) << "\n";
  return 0;
}

// ---- option wiring ----------------------------------------------------------------

void add_train_options(CLI::App* cmd, TrainOpts& o, bool for_sweep) {
  cmd->add_option("--data", o.data, "Dataset file produced by `generate`")->required();
  cmd->add_option("--config", o.config_path,
                  "JSON config file; explicit flags override its values");
  cmd->add_option("--dict,--network", o.dict, "Dictionary network kind: mlp or node")
      ->check(CLI::IsMember({"mlp", "node"}));
  cmd->add_option("--dict-size", o.dict_size, "Dictionary size M (constant + state + trained)");
  cmd->add_option("--width", o.width, "Hidden width (mlp) or latent dimension (node)");
  cmd->add_option("--depth", o.depth, "Hidden layer count (mlp only)");
  if (!for_sweep)
    cmd->add_option("--field-width", o.field_width, "Latent vector-field width (node only)");
  cmd->add_option("--init", o.init, "Affine init scheme: inverse or literal")
      ->check(CLI::IsMember({"inverse", "literal"}));
  cmd->add_option("--lambda", o.lambda, "Tikhonov regularization weight");
  cmd->add_option("--epsilon", o.epsilon, "Early-stop threshold on the summed loss");
  cmd->add_option("--lr", o.lr, "Adam learning rate");
  cmd->add_option("--max-epochs", o.max_epochs, "Outer iteration budget");
  cmd->add_option("--inner-steps", o.inner_steps, "Adam steps per K update");
  cmd->add_option("--batch-size", o.batch_size, "Pairs per gradient step (0 = all)");
  cmd->add_option("--abs-tol", o.abs_tol, "Latent ODE absolute tolerance (node only)");
  cmd->add_option("--rel-tol", o.rel_tol, "Latent ODE relative tolerance (node only)");
  cmd->add_option("--ode-max-steps", o.ode_max_steps, "Latent ODE step budget (node only)");
  cmd->add_option("--svd-cutoff", o.svd_cutoff, "Pseudo-inverse singular value cutoff");
  cmd->add_option("--log-every", o.log_every, "Progress line cadence in epochs");
  cmd->add_flag("--quiet", o.quiet, "Suppress per-epoch progress lines");
  if (!for_sweep) {
    cmd->add_option("--checkpoint-every", o.checkpoint_every,
                    "Rewrite the checkpoint every k epochs (0 = end only)");
    cmd->add_option("--model", o.model, "Model output path");
    cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint output path");
    cmd->add_option("--trace", o.trace, "Loss-trace CSV output path");
    cmd->add_option("--manifest", o.manifest, "Run manifest output path (empty to skip)");
  }
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Koopman operator learning with trainable observable dictionaries"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);

  GlobalOpts g;
  int rc = 0;
  auto* seed_opt = app.add_option("--seed", g.seed, "Master seed for every random draw");
  app.add_option("--threads", g.threads,
                 "Worker thread count (0 = machine parallelism); results do not depend on it");
  app.add_option("--out-dir", g.out_dir, "Directory that relative output paths resolve into")
      ->envname("KOOP_OUT_DIR");

  GenerateOpts gen;
  auto* cgen = app.add_subcommand("generate", "Sample a time-series dataset from a dynamical system");
  cgen->add_option("--system", gen.system, "duffing or ks")
      ->required()
      ->check(CLI::IsMember({"duffing", "ks"}));
  cgen->add_option("--out", gen.out, "Dataset output path")->required();
  cgen->add_option("--csv", gen.csv, "Also export the snapshots as CSV");
  cgen->add_option("--manifest", gen.manifest, "Run manifest output path");
  cgen->add_option("--trajectories", gen.trajectories, "Initial condition count");
  cgen->add_option("--steps", gen.steps, "Transitions per trajectory");
  cgen->add_option("--dt", gen.dt, "Sampling interval");
  cgen->add_option("--alpha", gen.alpha, "Duffing cubic coefficient");
  cgen->add_option("--beta", gen.beta, "Duffing linear coefficient");
  cgen->add_option("--gamma", gen.gamma, "Duffing damping coefficient");
  cgen->add_option("--box-lo", gen.box_lo, "Initial-condition box lower bound");
  cgen->add_option("--box-hi", gen.box_hi, "Initial-condition box upper bound");
  cgen->add_option("--length", gen.length, "KS domain length");
  cgen->add_option("--grid", gen.grid, "KS grid point count");
  cgen->add_option("--substeps", gen.substeps, "KS Euler substeps per interval (0 = auto)");
  cgen->add_flag("--conservative", gen.conservative, "KS advection in conservative form");
  cgen->add_option("--max-attempts", gen.max_attempts, "KS resampling attempts per trajectory");
  cgen->callback([&] { rc = cmd_generate(g, gen); });

  TrainOpts tr;
  auto* ctrain = app.add_subcommand("train", "Fit a Koopman model with a trainable dictionary");
  add_train_options(ctrain, tr, false);
  ctrain->callback([&] {
    g.seed_given = seed_opt->count() > 0;
    rc = cmd_train(g, tr);
  });

  PredictOpts pr;
  auto* cpred = app.add_subcommand("predict", "Roll out the spectral multi-step prediction");
  cpred->add_option("--model", pr.model, "Model file from `train`")->required();
  cpred->add_option("--x0", pr.x0_text, "Initial state, comma separated")->required();
  cpred->add_option("--steps", pr.steps, "Prediction steps")->check(CLI::NonNegativeNumber);
  cpred->add_option("--out", pr.out, "Trajectory CSV output path");
  cpred->add_flag("--truth", pr.truth, "Also integrate the ground truth and the per-step error");
  cpred->add_option("--manifest", pr.manifest, "Run manifest output path");
  cpred->callback([&] { rc = cmd_predict(g, pr); });

  EvalOpts ev;
  auto* ceval = app.add_subcommand("eval", "Reconstruction and eigenfunction error metrics");
  ceval->add_option("--model", ev.model, "Model file from `train`")->required();
  ceval->add_option("--which", ev.which, "recon, eigen, or both")
      ->check(CLI::IsMember({"recon", "eigen", "both"}));
  ceval->add_option("--data", ev.data, "Held-out dataset as reconstruction ground truth");
  ceval->add_option("--count", ev.count, "Fresh test trajectories when --data is absent");
  ceval->add_option("--horizon", ev.horizon, "Steps per fresh test trajectory");
  ceval->add_option("--samples", ev.samples, "Monte-Carlo samples for eigenfunction metrics");
  ceval->add_option("--box-lo", ev.box_lo, "Sampling box lower bound (default: from model)");
  ceval->add_option("--box-hi", ev.box_hi, "Sampling box upper bound (default: from model)");
  ceval->add_option("--report", ev.report, "Metrics report JSON path (empty to skip)");
  ceval->add_option("--csv", ev.csv, "Per-trajectory reconstruction errors CSV");
  ceval->callback([&] { rc = cmd_eval(g, ev); });

  ClassifyOpts cl;
  auto* cclass = app.add_subcommand("classify", "Basin-of-attraction labels from predictions");
  cclass->add_option("--model", cl.model, "Model file from `train`")->required();
  cclass->add_option("--count", cl.count, "Initial condition count");
  cclass->add_option("--horizon", cl.horizon, "Classification step index");
  cclass->add_option("--box-lo", cl.box_lo, "Sampling box lower bound (default: from model)");
  cclass->add_option("--box-hi", cl.box_hi, "Sampling box upper bound (default: from model)");
  cclass->add_option("--target-plus", cl.target_plus, "First coordinate of the + attractor");
  cclass->add_option("--target-minus", cl.target_minus, "First coordinate of the - attractor");
  cclass->add_option("--out", cl.out, "Labels CSV output path");
  cclass->add_option("--report", cl.report, "Accuracy report JSON path");
  cclass->callback([&] { rc = cmd_classify(g, cl); });

  SweepOpts sw;
  auto* csweep = app.add_subcommand("sweep", "Parameter-efficiency sweep over network widths");
  add_train_options(csweep, sw.train, true);
  csweep->add_option("--widths", sw.widths_text,
                     "Comma-separated widths: field widths for node, hidden widths for mlp")
      ->required();
  csweep->add_option("--metric", sw.metric, "recon, eigen, or loss")
      ->check(CLI::IsMember({"recon", "eigen", "loss"}));
  csweep->add_option("--threshold", sw.threshold, "Largest acceptable metric value")->required();
  csweep->add_option("--eval-count", sw.eval_count, "Test trajectories for the recon metric");
  csweep->add_option("--eval-horizon", sw.eval_horizon, "Steps per test trajectory");
  csweep->add_option("--samples", sw.samples, "Monte-Carlo samples for the eigen metric");
  csweep->add_option("--box-lo", sw.box_lo, "Sampling box lower bound (default: from dataset)");
  csweep->add_option("--box-hi", sw.box_hi, "Sampling box upper bound (default: from dataset)");
  csweep->add_option("--out", sw.out, "Sweep table CSV output path");
  csweep->callback([&] {
    g.seed_given = seed_opt->count() > 0;
    rc = cmd_sweep(g, sw);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

}  // namespace koop
