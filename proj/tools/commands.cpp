#include "commands.hpp"

#include "glsmul/datagen.hpp"
#include "glsmul/embedding.hpp"
#include "glsmul/eval.hpp"
#include "glsmul/label_shift.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>

namespace glsmul::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " path is required");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw UsageError("output directory is required (--out)");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory: " + dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

json to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Matrix& m) {
  json a = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(std::move(row));
  }
  return a;
}

json shift_json(const ShiftEstimate& s) {
  return {{"w", to_json(s.w)},
          {"p_s", to_json(s.p_s)},
          {"p_t", to_json(s.p_t)},
          {"q_t", to_json(s.q_t)},
          {"confusion", to_json(s.confusion)},
          {"residual", s.residual},
          {"iterations", s.iterations}};
}

Vector class_frequencies(const std::vector<int>& labels, int c) {
  Vector f = Vector::Zero(c);
  for (int y : labels) f(y) += 1.0;
  return f / static_cast<double>(labels.size());
}

struct LoadedData {
  FeatureSet source;
  FeatureSet target;  // labels stripped
  std::optional<std::vector<int>> target_labels;
};

LoadedData load_data(const DataOptions& opt, std::uint64_t seed) {
  LoadedData d;
  if (!opt.scenario.empty()) {
    if (!opt.source_path.empty() || !opt.target_path.empty()) {
      throw UsageError("give either --scenario or --source/--target, not both");
    }
    GlsSample s = synth_gls(named_scenario(opt.scenario, seed));
    d.source = std::move(s.source);
    d.target = std::move(s.target);
    d.target_labels = std::move(s.target_oracle);
    return d;
  }
  require_file(opt.source_path, "source file");
  require_file(opt.target_path, "target file");
  d.source = load_features(opt.source_path, opt.num_classes);
  d.target = load_features(opt.target_path, opt.num_classes);
  if (!d.source.fully_labeled()) throw UsageError("source file must be fully labeled: " + opt.source_path);
  if (d.source.dim() != d.target.dim()) throw UsageError("source and target feature widths differ");
  const int c = std::max(d.source.num_classes, d.target.num_classes);
  d.source.num_classes = c;
  d.target.num_classes = c;
  if (d.target.fully_labeled()) d.target_labels = std::move(d.target.labels);
  d.target.labels.reset();
  return d;
}

// ---- config plumbing: flags and --config JSON meet in one json object ----

using Settings = json;

Settings read_config_file(const std::string& path) {
  require_file(path, "config file");
  std::ifstream in(path);
  try {
    Settings s = json::parse(in);
    if (!s.is_object()) throw UsageError("config file must hold a JSON object: " + path);
    return s;
  } catch (const json::parse_error& e) {
    throw UsageError("cannot parse config file " + path + ": " + e.what());
  }
}

void check_keys(const Settings& s, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : s.items()) {
    if (!allowed.count(key)) throw UsageError("unknown config key '" + key + "'");
  }
}

class SettingsReader {
 public:
  explicit SettingsReader(const Settings& s) : s_(s) {}

  template <typename T>
  void get(const std::string& key, T& into) const {
    if (!s_.contains(key)) return;
    try {
      into = s_.at(key).get<T>();
    } catch (const json::exception&) {
      throw UsageError("config key '" + key + "' has the wrong type");
    }
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& into) const {
    if (!s_.contains(key) || s_.at(key).is_null()) return;
    T v{};
    get(key, v);
    into = v;
  }

 private:
  const Settings& s_;
};

KernelFamily family_from(const std::string& name) {
  try {
    return parse_kernel_family(name);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

DataOptions data_from(const Settings& s) {
  const SettingsReader r(s);
  DataOptions d;
  r.get("source", d.source_path);
  r.get("target", d.target_path);
  r.get("scenario", d.scenario);
  r.get("num_classes", d.num_classes);
  return d;
}

const std::set<std::string> kDataKeys = {"source", "target", "scenario", "num_classes"};

TrainOptions train_from(const Settings& s) {
  std::set<std::string> keys = {"out",        "seed",           "lambda_tu",         "lambda_du",
                                "epsilon",    "epsilon_exponent", "tau",             "lr",
                                "t_pre",      "t_adapt",        "hidden",            "embedding_dim",
                                "feature_kernel", "feature_bandwidth", "label_kernel", "label_bandwidth",
                                "tu_targets", "max_halvings",   "stability_window",  "stability_tolerance"};
  keys.insert(kDataKeys.begin(), kDataKeys.end());
  check_keys(s, keys);
  const SettingsReader r(s);
  TrainOptions o;
  o.data = data_from(s);
  TrainConfig& c = o.config;
  r.get("out", o.out_dir);
  r.get("seed", c.seed);
  r.get("lambda_tu", c.lambda_tu);
  r.get("lambda_du", c.lambda_du);
  r.get("epsilon", c.epsilon);
  r.get("epsilon_exponent", c.epsilon_exponent);
  r.get("tau", c.tau);
  r.get("lr", c.learning_rate);
  r.get("t_pre", c.pretrain_epochs);
  r.get("t_adapt", c.adapt_epochs);
  r.get("hidden", c.hidden);
  r.get("embedding_dim", c.embedding_dim);
  r.get("feature_bandwidth", c.feature_bandwidth);
  r.get("max_halvings", c.max_halvings);
  r.get("stability_window", c.stability_window);
  r.get("stability_tolerance", c.stability_tolerance);
  std::string name;
  if (s.contains("feature_kernel")) {
    r.get("feature_kernel", name);
    c.feature_kernel = family_from(name);
  }
  if (s.contains("label_kernel")) {
    r.get("label_kernel", name);
    c.label_kernel.family = family_from(name);
  }
  r.get("label_bandwidth", c.label_kernel.bandwidth);
  if (s.contains("tu_targets")) {
    r.get("tu_targets", name);
    if (name == "all") c.tu_targets = TuTargets::all;
    else if (name == "confident") c.tu_targets = TuTargets::confident;
    else throw UsageError("tu_targets must be 'all' or 'confident', got '" + name + "'");
  }
  try {
    c.validate();
    c.label_kernel.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return o;
}

GenOptions gen_from(const Settings& s) {
  check_keys(s, {"scenario", "seed", "n_source", "n_target", "out"});
  const SettingsReader r(s);
  GenOptions o;
  r.get("scenario", o.scenario);
  r.get("seed", o.seed);
  r.get("n_source", o.n_source);
  r.get("n_target", o.n_target);
  r.get("out", o.out_dir);
  if (o.scenario.empty()) throw UsageError("--scenario is required");
  return o;
}

EstimateOptions estimate_from(const Settings& s) {
  std::set<std::string> keys = {"checkpoint", "seed", "out"};
  keys.insert(kDataKeys.begin(), kDataKeys.end());
  check_keys(s, keys);
  const SettingsReader r(s);
  EstimateOptions o;
  o.data = data_from(s);
  r.get("checkpoint", o.checkpoint);
  r.get("seed", o.seed);
  r.get("out", o.out_dir);
  return o;
}

BenchOptions bench_from(const Settings& s) {
  check_keys(s, {"paths", "m", "r", "num_classes", "epsilon", "seed", "repeats", "out"});
  const SettingsReader r(s);
  BenchOptions o;
  if (s.contains("paths")) {
    std::vector<std::string> names;
    r.get("paths", names);
    o.paths.clear();
    for (const std::string& n : names) o.paths.push_back(parse_bench_path(n));
  }
  r.get("m", o.sizes);
  r.get("r", o.ranks);
  r.get("num_classes", o.num_classes);
  r.get("epsilon", o.epsilon);
  r.get("seed", o.seed);
  r.get("repeats", o.repeats);
  r.get("out", o.out_path);
  if (o.repeats < 1) throw UsageError("repeats must be >= 1");
  if (o.num_classes < 1) throw UsageError("num_classes must be >= 1");
  for (Index m : o.sizes)
    if (m < 2) throw UsageError("bench sizes must be >= 2");
  for (Index rank : o.ranks)
    if (rank < 1) throw UsageError("rff ranks must be >= 1");
  return o;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

TrainTrace concat(const TrainTrace& a, const TrainTrace& b) {
  TrainTrace out = a;
  out.epochs.insert(out.epochs.end(), b.epochs.begin(), b.epochs.end());
  return out;
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json config_json(const TrainConfig& c) {
  return {{"seed", c.seed},
          {"lambda_tu", c.lambda_tu},
          {"lambda_du", c.lambda_du},
          {"epsilon", c.epsilon},
          {"epsilon_exponent", c.epsilon_exponent ? json(*c.epsilon_exponent) : json(nullptr)},
          {"tau", c.tau},
          {"lr", c.learning_rate},
          {"t_pre", c.pretrain_epochs},
          {"t_adapt", c.adapt_epochs},
          {"hidden", c.hidden},
          {"embedding_dim", c.embedding_dim},
          {"feature_kernel", to_string(c.feature_kernel)},
          {"feature_bandwidth", c.feature_bandwidth ? json(*c.feature_bandwidth) : json(nullptr)},
          {"label_kernel", to_string(c.label_kernel.family)},
          {"label_bandwidth", c.label_kernel.bandwidth},
          {"tu_targets", c.tu_targets == TuTargets::all ? "all" : "confident"},
          {"max_halvings", c.max_halvings},
          {"stability_window", c.stability_window},
          {"stability_tolerance", c.stability_tolerance}};
}

MetricsReport evaluate(const MulParams& params, const LoadedData& d, const ShiftEstimate& shift) {
  MetricsReport m;
  m.accuracy = m.j_b = m.j_w = m.discriminability = m.prior_error_linf = m.prior_error_l1 = kNaN;
  if (!d.target_labels) return m;
  const std::vector<int>& yt = *d.target_labels;
  const int c = d.source.num_classes;
  const ForwardPass ft = forward(params, d.target.features);
  m.accuracy = accuracy(argmax_rows(ft.logits), yt);
  try {
    const Discriminability disc = discriminability(ft.z, yt);
    m.j_b = disc.j_b;
    m.j_w = disc.j_w;
    m.discriminability = disc.ratio;
  } catch (const Error&) {
    // Degenerate embedding (one class, or zero spread); left as NaN.
  }
  const PriorError pe = prior_error(shift.p_t, class_frequencies(yt, c));
  m.prior_error_linf = pe.linf;
  m.prior_error_l1 = pe.l1;
  const ForwardPass fs = forward(params, d.source.features);
  m.d_st = prototype_distance_matrix(fs.z, *d.source.labels, ft.z, yt, c);
  return m;
}

json metrics_json(const MetricsReport& m) {
  json dst = json::array();
  for (Index i = 0; i < m.d_st.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.d_st.cols(); ++j) row.push_back(nullable(m.d_st(i, j)));
    dst.push_back(std::move(row));
  }
  return {{"accuracy", nullable(m.accuracy)},
          {"j_b", nullable(m.j_b)},
          {"j_w", nullable(m.j_w)},
          {"discriminability", nullable(m.discriminability)},
          {"prior_error_linf", nullable(m.prior_error_linf)},
          {"prior_error_l1", nullable(m.prior_error_l1)},
          {"d_st", std::move(dst)}};
}

CmeOperator bench_operator(const FeatureSet& set, const std::vector<int>& labels, int c, double eps) {
  return fit_cme(set.features, labels, c, KernelSpec::gaussian(1.0), KernelSpec::gaussian(1.0), eps);
}

}  // namespace

std::string to_string(BenchPath path) {
  switch (path) {
    case BenchPath::naive: return "naive";
    case BenchPath::woodbury: return "woodbury";
    case BenchPath::rff: return "rff";
  }
  return "?";
}

BenchPath parse_bench_path(const std::string& name) {
  if (name == "naive") return BenchPath::naive;
  if (name == "woodbury") return BenchPath::woodbury;
  if (name == "rff") return BenchPath::rff;
  throw UsageError("unknown compute path '" + name + "' (naive, woodbury, rff)");
}

void cmd_gen(const GenOptions& options) {
  GlsScenario sc;
  try {
    sc = named_scenario(options.scenario, options.seed);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (options.n_source) sc.n_source = *options.n_source;
  if (options.n_target) sc.n_target = *options.n_target;
  ensure_dir(options.out_dir);
  const GlsSample s = synth_gls(sc);
  const fs::path dir(options.out_dir);
  save_features((dir / "source.csv").string(), s.source);
  save_features((dir / "target.csv").string(), s.target, &s.target_oracle);
  json means_s = json::array(), means_t = json::array();
  for (int k = 0; k < sc.num_classes(); ++k) {
    means_s.push_back(to_json(sc.source[static_cast<std::size_t>(k)].mean));
    means_t.push_back(to_json(sc.target[static_cast<std::size_t>(k)].mean));
  }
  const json oracle = {
      {"version", kOracleVersion},
      {"scenario", sc.name},
      {"seed", sc.seed},
      {"num_classes", sc.num_classes()},
      {"dim", sc.dim()},
      {"n_source", sc.n_source},
      {"n_target", sc.n_target},
      {"source_prior", to_json(sc.source_prior)},
      {"target_prior", to_json(sc.target_prior)},
      {"l1_distance", l1_label_distance(sc.source_prior, sc.target_prior)},
      {"source_prior_empirical", to_json(s.source_prior_empirical)},
      {"target_prior_empirical", to_json(s.target_prior_empirical)},
      {"l1_distance_empirical", l1_label_distance(s.source_prior_empirical, s.target_prior_empirical)},
      {"source_means", std::move(means_s)},
      {"target_means", std::move(means_t)},
      {"mean_shift", to_json(s.mean_shift)}};
  write_text((dir / "oracle.json").string(), oracle.dump(2) + "\n");
}

void write_trace_csv(const std::string& path, const TrainTrace& trace) {
  std::string text = "epoch,j_e,j_tu,j_du,acc_s,acc_t,n_pseudo\n";
  for (const EpochRecord& e : trace.epochs) {
    text += std::to_string(e.epoch) + ',' + format_double(e.j_e) + ',' + format_double(e.j_tu) + ',' +
            format_double(e.j_du) + ',' + format_double(e.acc_s) + ',' + format_double(e.acc_t) + ',' +
            std::to_string(e.n_pseudo) + '\n';
  }
  write_text(path, text);
}

void cmd_train(const TrainOptions& options) {
  const TrainConfig& cfg = options.config;
  const LoadedData d = load_data(options.data, cfg.seed);
  ensure_dir(options.out_dir);
  const fs::path dir(options.out_dir);
  const std::string trace_path = (dir / "trace.csv").string();

  const Architecture arch{d.source.dim(), cfg.hidden, cfg.embedding_dim, d.source.num_classes};
  const MulParams init = MulParams::initialize(arch, cfg.seed);
  std::optional<TargetMonitor> monitor;
  if (d.target_labels) monitor.emplace(TargetMonitor{d.target.features, *d.target_labels});

  PretrainResult pre;
  try {
    pre = pretrain(init, d.source, cfg, monitor);
  } catch (const TrainingError& e) {
    write_trace_csv(trace_path, e.partial_trace());
    throw;
  }
  double source_only = kNaN;
  if (d.target_labels) {
    source_only = accuracy(argmax_rows(forward(pre.params, d.target.features).logits), *d.target_labels);
  }
  AdaptResult ad;
  try {
    ad = adapt(pre.params, d.source, d.target, cfg, monitor, cfg.pretrain_epochs + 1);
  } catch (const TrainingError& e) {
    write_trace_csv(trace_path, concat(pre.trace, e.partial_trace()));
    save_checkpoint((dir / "checkpoint.bin").string(), pre.params);
    throw;
  }

  save_checkpoint((dir / "checkpoint.bin").string(), ad.params);
  write_trace_csv(trace_path, concat(pre.trace, ad.trace));
  const MetricsReport metrics = evaluate(ad.params, d, ad.final_shift);
  const json report = {{"version", kReportVersion},
                       {"config", config_json(cfg)},
                       {"source_only_accuracy", nullable(source_only)},
                       {"metrics", metrics_json(metrics)},
                       {"shift", shift_json(ad.final_shift)}};
  write_text((dir / "report.json").string(), report.dump(2) + "\n");
}

ShiftEstimate cmd_estimate_shift(const EstimateOptions& options) {
  require_file(options.checkpoint, "checkpoint");
  const LoadedData d = load_data(options.data, options.seed);
  ensure_dir(options.out_dir);
  const MulParams params = load_checkpoint(options.checkpoint);
  if (params.input_dim() != d.source.dim() || params.num_classes() != d.source.num_classes) {
    throw Error("checkpoint shape does not match the data (input " + std::to_string(params.input_dim()) +
                ", classes " + std::to_string(params.num_classes()) + ")");
  }
  const std::vector<int> ps = argmax_rows(forward(params, d.source.features).logits);
  const std::vector<int> pt = argmax_rows(forward(params, d.target.features).logits);
  const ShiftEstimate est = estimate_shift(ps, *d.source.labels, pt, d.source.num_classes);
  json out = {{"version", kShiftVersion}, {"shift", shift_json(est)}};
  if (d.target_labels) {
    const PriorError pe = prior_error(est.p_t, class_frequencies(*d.target_labels, d.source.num_classes));
    out["prior_error"] = {{"linf", pe.linf}, {"l1", pe.l1}};
  } else {
    out["prior_error"] = nullptr;
  }
  write_text((fs::path(options.out_dir) / "shift.json").string(), out.dump(2) + "\n");
  return est;
}

std::vector<BenchRow> cmd_bench(const BenchOptions& options) {
  using Clock = std::chrono::steady_clock;
  const bool run_naive =
      std::find(options.paths.begin(), options.paths.end(), BenchPath::naive) != options.paths.end();
  std::vector<int> queries(static_cast<std::size_t>(options.num_classes));
  for (int k = 0; k < options.num_classes; ++k) queries[static_cast<std::size_t>(k)] = k;

  // Timed region: fitting both operators plus the full cross MCMD matrix.
  auto timed = [&](auto&& body) {
    double best = std::numeric_limits<double>::infinity();
    Matrix result;
    for (int rep = 0; rep < options.repeats; ++rep) {
      const auto t0 = Clock::now();
      result = body();
      best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return std::make_pair(best, result);
  };

  std::vector<BenchRow> rows;
  for (Index m : options.sizes) {
    GlsScenario sc = named_scenario(options.num_classes == 3 ? "g1" : "g2", options.seed);
    if (options.num_classes != sc.num_classes()) {
      throw UsageError("bench supports 3 or 4 classes (the g1 and g2 geometries)");
    }
    sc.n_source = m;
    sc.n_target = m;
    const GlsSample s = synth_gls(sc);
    auto exact = [&](InversePath path) {
      const CmeOperator a = bench_operator(s.source, *s.source.labels, options.num_classes, options.epsilon);
      const CmeOperator b = bench_operator(s.target, s.target_oracle, options.num_classes, options.epsilon);
      return mcmd_squared_cross_matrix(a, b, queries, queries, path);
    };
    Matrix reference;
    if (run_naive) {
      auto [sec, res] = timed([&] { return exact(InversePath::naive); });
      reference = res;
      rows.push_back({BenchPath::naive, m, 0, sec, 0.0});
    }
    auto error = [&](const Matrix& x) {
      return reference.size() ? (x - reference).cwiseAbs().maxCoeff() : kNaN;
    };
    for (BenchPath p : options.paths) {
      if (p == BenchPath::woodbury) {
        auto [sec, res] = timed([&] { return exact(InversePath::woodbury); });
        rows.push_back({p, m, 0, sec, error(res)});
      } else if (p == BenchPath::rff) {
        for (Index r : options.ranks) {
          auto [sec, res] = timed([&] {
            const CmeOperator a =
                bench_operator(s.source, *s.source.labels, options.num_classes, options.epsilon);
            const CmeOperator b = bench_operator(s.target, s.target_oracle, options.num_classes, options.epsilon);
            return mcmd_squared_cross_matrix_rff(a, b, queries, queries,
                                                 rff_build(s.source.dim(), r, 1.0, options.seed));
          });
          rows.push_back({p, m, r, sec, error(res)});
        }
      }
    }
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "path,m,r,seconds,max_abs_err\n";
  for (const BenchRow& r : rows) {
    out << to_string(r.path) << ',' << r.m << ',' << r.r << ',' << format_double(r.seconds) << ','
        << format_double(r.max_abs_err) << '\n';
  }
}

// ---- command line ----

namespace {

template <typename T>
void flag(CLI::App* app, Settings& s, const std::string& name, const std::string& key,
          const std::string& help) {
  app->add_option_function<T>(name, [&s, key](const T& v) { s[key] = v; }, help);
}

void data_flags(CLI::App* app, Settings& s) {
  flag<std::string>(app, s, "--source", "source", "labeled source feature CSV");
  flag<std::string>(app, s, "--target", "target", "target feature CSV (labels used for evaluation only)");
  flag<std::string>(app, s, "--scenario", "scenario", "generate data from a named scenario instead");
  flag<int>(app, s, "--num-classes", "num_classes", "class count (default: inferred from labels)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generalized label shift correction with conditional embeddings"};
  app.name("glsmul");
  app.require_subcommand(1);

  // Flags land in `flags`; --config lands in `config_path`. Flags win.
  Settings flags = json::object();
  std::string config_path;
  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON file with the same keys as the flags (underscored)");
  };

  CLI::App* gen = app.add_subcommand("gen", "write source.csv, target.csv and oracle.json for a scenario");
  with_config(gen);
  flag<std::string>(gen, flags, "--scenario", "scenario", "null, g1 or g2");
  flag<std::uint64_t>(gen, flags, "--seed", "seed", "random seed");
  flag<Index>(gen, flags, "--n-source", "n_source", "override source sample count");
  flag<Index>(gen, flags, "--n-target", "n_target", "override target sample count");
  flag<std::string>(gen, flags, "--out", "out", "output directory");

  CLI::App* train = app.add_subcommand("train", "pretrain on source, adapt to target, write a report");
  with_config(train);
  data_flags(train, flags);
  flag<std::uint64_t>(train, flags, "--seed", "seed", "seed for data generation and initialization");
  flag<double>(train, flags, "--lambda-tu", "lambda_tu", "weight of the transfer term");
  flag<double>(train, flags, "--lambda-du", "lambda_du", "weight of the discrimination term");
  flag<double>(train, flags, "--epsilon", "epsilon", "embedding regularizer");
  flag<double>(train, flags, "--epsilon-exponent", "epsilon_exponent", "use epsilon = m^-alpha");
  flag<double>(train, flags, "--tau", "tau", "pseudo-label confidence threshold");
  flag<double>(train, flags, "--lr", "lr", "initial gradient step");
  flag<int>(train, flags, "--t-pre", "t_pre", "pretraining epochs");
  flag<int>(train, flags, "--t-adapt", "t_adapt", "adaptation epochs");
  flag<std::vector<Index>>(train, flags, "--hidden", "hidden", "hidden layer widths");
  flag<Index>(train, flags, "--embedding-dim", "embedding_dim", "width of Z");
  flag<std::string>(train, flags, "--feature-kernel", "feature_kernel", "gaussian, laplacian or linear");
  flag<double>(train, flags, "--feature-bandwidth", "feature_bandwidth", "fixed bandwidth (default: median)");
  flag<std::string>(train, flags, "--label-kernel", "label_kernel", "gaussian, laplacian or linear");
  flag<double>(train, flags, "--label-bandwidth", "label_bandwidth", "label kernel bandwidth");
  flag<std::string>(train, flags, "--tu-targets", "tu_targets", "all or confident");
  flag<int>(train, flags, "--max-halvings", "max_halvings", "line search halvings per epoch");
  flag<int>(train, flags, "--stability-window", "stability_window", "epochs before pseudo-labels join");
  flag<double>(train, flags, "--stability-tolerance", "stability_tolerance", "relative change threshold");
  flag<std::string>(train, flags, "--out", "out", "output directory");

  CLI::App* est = app.add_subcommand("estimate-shift", "BBSE importance weights from a checkpoint");
  with_config(est);
  data_flags(est, flags);
  flag<std::string>(est, flags, "--checkpoint", "checkpoint", "checkpoint written by train");
  flag<std::uint64_t>(est, flags, "--seed", "seed", "scenario seed");
  flag<std::string>(est, flags, "--out", "out", "output directory");

  CLI::App* bench = app.add_subcommand("bench", "time the naive, woodbury and rff MCMD paths");
  with_config(bench);
  flag<std::vector<std::string>>(bench, flags, "--paths", "paths", "subset of naive, woodbury, rff");
  flag<std::vector<Index>>(bench, flags, "--m", "m", "sample sizes per domain");
  flag<std::vector<Index>>(bench, flags, "--r", "r", "random feature ranks");
  flag<int>(bench, flags, "--num-classes", "num_classes", "3 or 4");
  flag<double>(bench, flags, "--epsilon", "epsilon", "embedding regularizer");
  flag<std::uint64_t>(bench, flags, "--seed", "seed", "random seed");
  flag<int>(bench, flags, "--repeats", "repeats", "timing repeats (minimum is reported)");
  flag<std::string>(bench, flags, "--out", "out", "CSV output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    Settings settings = config_path.empty() ? json::object() : read_config_file(config_path);
    settings.update(flags);
    if (gen->parsed()) {
      const GenOptions o = gen_from(settings);
      cmd_gen(o);
      out << "wrote source.csv, target.csv, oracle.json to " << o.out_dir << '\n';
    } else if (train->parsed()) {
      const TrainOptions o = train_from(settings);
      cmd_train(o);
      out << "wrote checkpoint.bin, trace.csv, report.json to " << o.out_dir << '\n';
    } else if (est->parsed()) {
      const EstimateOptions o = estimate_from(settings);
      const ShiftEstimate e = cmd_estimate_shift(o);
      out << "p_t:";
      for (Index k = 0; k < e.p_t.size(); ++k) out << ' ' << format_double(e.p_t(k));
      out << '\n';
    } else if (bench->parsed()) {
      const BenchOptions o = bench_from(settings);
      const std::vector<BenchRow> rows = cmd_bench(o);
      if (o.out_path.empty()) {
        write_bench_csv(out, rows);
      } else {
        std::ofstream f(o.out_path);
        if (!f) throw UsageError("cannot open for writing: " + o.out_path);
        write_bench_csv(f, rows);
      }
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TrainingError& e) {
    err << "training failed: " << e.what() << " (partial trace written)\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace glsmul::cli
