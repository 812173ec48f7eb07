// cfts: counterfactual explanations for multivariate time-series classifiers.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfts/bridge.hpp"
#include "cfts/builtin.hpp"
#include "cfts/dataset.hpp"
#include "cfts/distractor_store.hpp"
#include "cfts/error.hpp"
#include "cfts/evaluation.hpp"
#include "cfts/overlay.hpp"
#include "cfts/search.hpp"
#include "cfts/synthetic.hpp"

namespace {

using namespace cfts;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoCounterfactual = 2;

struct ModelOptions {
  std::string model;
  std::string rule = "argmax";
  std::string background;
  std::int64_t startup_timeout_ms = 10000;
  std::int64_t request_timeout_ms = 30000;
};

struct SearchOptions {
  std::size_t restarts = 5;
  std::size_t max_iters = 100;
  std::size_t k_distractors = 3;
  std::uint64_t seed = 42;
  std::size_t initial_subset_size = 1;
  std::string windows = "off";

  SearchConfig to_config() const {
    SearchConfig cfg;
    cfg.restarts = restarts;
    cfg.max_iters_per_restart = max_iters;
    cfg.k_distractors = k_distractors;
    cfg.rng_seed = seed;
    cfg.initial_subset_size = initial_subset_size;
    if (windows != "off") {
      std::size_t width = 0;
      try {
        std::size_t pos = 0;
        width = std::stoul(windows, &pos);
        if (pos != windows.size()) throw std::invalid_argument(windows);
      } catch (const std::exception&) {
        throw ConfigError("--windows expects a positive width or 'off', got '" + windows + "'");
      }
      cfg.enable_windows = true;
      cfg.window_width = width;
    }
    cfg.validate();
    return cfg;
  }
};

void add_model_options(CLI::App* cmd, ModelOptions& m) {
  cmd->add_option("--model", m.model, "builtin:<spec.json> or bridge:<command line>")->required();
  cmd->add_option("--rule", m.rule, "argmax or thresholds:<file with a JSON array>");
  cmd->add_option("--background", m.background, "background class name for thresholded rules");
  cmd->add_option("--bridge-startup-timeout", m.startup_timeout_ms, "bridge handshake timeout (ms)");
  cmd->add_option("--bridge-request-timeout", m.request_timeout_ms, "bridge request timeout (ms)");
}

void add_search_options(CLI::App* cmd, SearchOptions& s) {
  cmd->add_option("--restarts", s.restarts, "hill-climbing restarts per distractor");
  cmd->add_option("--max-iters", s.max_iters, "iterations per restart");
  cmd->add_option("--k-distractors", s.k_distractors, "nearest distractors to try");
  cmd->add_option("--seed", s.seed, "random seed");
  cmd->add_option("--initial-subset-size", s.initial_subset_size, "size of each restart's random start");
  cmd->add_option("--windows", s.windows, "window width for time-restricted substitutions, or off");
}

// Everything that can be checked without querying the model.
struct PreparedModel {
  std::optional<BuiltinSpec> builtin;
  std::optional<BridgeConfig> bridge;
  PredictionRule rule = PredictionRule::argmax();
};

PreparedModel prepare_model(const ModelOptions& m, const Manifest& manifest) {
  PreparedModel out;
  if (m.model.rfind("builtin:", 0) == 0) {
    out.builtin = load_builtin_spec(m.model.substr(8));
    make_builtin(*out.builtin);  // validates the spec
  } else if (m.model.rfind("bridge:", 0) == 0) {
    BridgeConfig cfg;
    cfg.command = split_command_line(m.model.substr(7));
    if (cfg.command.empty()) throw ConfigError("--model bridge: needs a command");
    cfg.startup_timeout_ms = m.startup_timeout_ms;
    cfg.request_timeout_ms = m.request_timeout_ms;
    if (cfg.startup_timeout_ms <= 0 || cfg.request_timeout_ms <= 0) throw ConfigError("bridge timeouts must be positive");
    out.bridge = std::move(cfg);
  } else {
    throw ConfigError("--model must be builtin:<file> or bridge:<command>");
  }

  if (m.rule == "argmax") {
    if (!m.background.empty()) throw ConfigError("--background only applies to thresholds rules");
  } else if (m.rule.rfind("thresholds:", 0) == 0) {
    const std::string path = m.rule.substr(11);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open thresholds file " + path);
    std::vector<double> thresholds;
    try {
      nlohmann::json j;
      in >> j;
      thresholds = j.get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ": expected a JSON array of numbers (" + e.what() + ")");
    }
    if (m.background.empty()) throw ConfigError("thresholds rules need --background <class>");
    out.rule = PredictionRule::thresholded(std::move(thresholds), manifest.class_index(m.background));
  } else {
    throw ConfigError("--rule must be argmax or thresholds:<file>");
  }
  out.rule.validate(manifest.class_count());
  return out;
}

Classifier open_model(const PreparedModel& p, const Manifest& manifest) {
  std::shared_ptr<const Scorer> scorer;
  if (p.builtin) {
    scorer = make_builtin(*p.builtin);
  } else {
    scorer = BridgeScorer::open(*p.bridge, ModelShape{manifest.class_count(), manifest.variable_count(),
                                                      manifest.timesteps});
  }
  Classifier clf(std::move(scorer), p.rule);
  clf.check_compatible(manifest);
  return clf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("cannot write " + path);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

Dataset load_eval_dataset(const std::string& path, const Dataset& training) {
  Dataset eval = load_dataset(path);
  if (!(eval.manifest() == training.manifest())) {
    throw ConfigError("--eval-dataset manifest differs from --dataset manifest");
  }
  return eval;
}

struct ExplainOptions {
  std::string dataset;
  std::string eval_dataset;
  std::string sample;
  std::string target;
  std::string out;
  std::string svg;
  ModelOptions model;
  SearchOptions search;
};

int cmd_explain(const ExplainOptions& o) {
  const Dataset training = load_dataset(o.dataset);
  const std::optional<Dataset> eval =
      o.eval_dataset.empty() ? std::nullopt : std::optional<Dataset>(load_eval_dataset(o.eval_dataset, training));
  const Dataset& source = eval ? *eval : training;
  const Manifest& manifest = training.manifest();
  const ClassIndex target = manifest.class_index(o.target);
  const MultivariateSeries& sample = source.sample(o.sample);
  const SearchConfig cfg = o.search.to_config();
  const PreparedModel prepared = prepare_model(o.model, manifest);

  const Classifier clf = open_model(prepared, manifest);
  const DistractorStore store = DistractorStore::build(training, clf);
  const Explanation e = explain_sample(clf, store, o.sample, sample, target, cfg);

  emit(o.out, explanation_to_json(e, manifest).dump(2) + "\n");
  if (!o.svg.empty()) {
    const auto cf = apply_substitution(sample, store.training().sample(e.distractor_id), e.substitutions);
    write_text(o.svg, render_overlay(sample, cf, e.substitutions,
                                     {manifest.class_names[e.original_label], manifest.class_names[e.target_label]}));
  }
  return kExitOk;
}

struct EvalOptions {
  std::string dataset;
  std::string eval_dataset;
  std::string target;
  std::string out;
  std::string table;
  std::size_t min_group_size = 1;
  ModelOptions model;
  SearchOptions search;
};

int cmd_eval_comprehensibility(const EvalOptions& o) {
  const Dataset training = load_dataset(o.dataset);
  const Dataset eval = load_eval_dataset(o.eval_dataset, training);
  const Manifest& manifest = training.manifest();
  const ClassIndex target = manifest.class_index(o.target);
  const SearchConfig cfg = o.search.to_config();
  const PreparedModel prepared = prepare_model(o.model, manifest);

  const Classifier clf = open_model(prepared, manifest);
  const DistractorStore store = DistractorStore::build(training, clf);
  std::vector<std::string> ids;
  {
    const auto all = eval.ids();
    std::vector<MultivariateSeries> batch;
    for (const auto& id : all) batch.push_back(eval.sample(id));
    const auto scores = clf.predict_scores(batch);
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (clf.label_of(scores[i]) != target) ids.push_back(all[i]);
    }
  }
  const auto report = eval_comprehensibility(clf, store, eval, ids, target, cfg);
  if (!o.out.empty()) write_text(o.out, to_json(report, manifest).dump(2) + "\n");
  std::cout << comprehensibility_summary(report);
  return kExitOk;
}

int cmd_eval_coverage(const EvalOptions& o) {
  const Dataset training = load_dataset(o.dataset);
  const Dataset eval = load_eval_dataset(o.eval_dataset, training);
  const Manifest& manifest = training.manifest();
  const SearchConfig cfg = o.search.to_config();
  if (o.min_group_size == 0) throw ConfigError("--min-group-size must be at least 1");
  const PreparedModel prepared = prepare_model(o.model, manifest);

  const Classifier clf = open_model(prepared, manifest);
  const DistractorStore store = DistractorStore::build(training, clf);
  const auto report = eval_coverage(clf, store, eval, eval.ids(), cfg, o.min_group_size);
  const std::string table = coverage_table(report, manifest);
  if (!o.out.empty()) write_text(o.out, to_json(report, manifest).dump(2) + "\n");
  if (!o.table.empty()) write_text(o.table, table);
  std::cout << table;
  return kExitOk;
}

struct FilterOptions {
  std::string dataset;
  double std_threshold = kDefaultStdThreshold;
  std::string class_name;
  std::string out;
  std::string removed;
};

int cmd_filter(const FilterOptions& o) {
  const Dataset dataset = load_dataset(o.dataset);
  std::optional<ClassIndex> cls;
  if (!o.class_name.empty()) cls = dataset.manifest().class_index(o.class_name);
  if (!(o.std_threshold >= 0.0)) throw ConfigError("--std-threshold must be nonnegative");
  const auto result = quality_filter(dataset, cls, o.std_threshold);
  save_dataset(result.kept, o.out);
  std::string removed;
  for (const auto& id : result.removed) removed += id + "\n";
  write_text(o.removed.empty() ? (std::filesystem::path(o.out) / "removed_ids.txt").string() : o.removed, removed);
  std::cout << "kept " << result.kept.size() << " samples, removed " << result.removed.size() << "\n";
  return kExitOk;
}

struct PlotOptions {
  std::string dataset;
  std::string eval_dataset;
  std::string explanation;
  std::string out;
};

int cmd_plot(const PlotOptions& o) {
  const Dataset training = load_dataset(o.dataset);
  const std::optional<Dataset> eval =
      o.eval_dataset.empty() ? std::nullopt : std::optional<Dataset>(load_eval_dataset(o.eval_dataset, training));
  const Manifest& manifest = training.manifest();
  std::ifstream in(o.explanation);
  if (!in) throw ConfigError("cannot open explanation " + o.explanation);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(o.explanation + ": " + e.what());
  }
  const Explanation e = explanation_from_json(j, manifest);
  const Dataset& source = eval && eval->contains(e.sample_id) ? *eval : training;
  const MultivariateSeries& sample = source.sample(e.sample_id);
  const auto cf = apply_substitution(sample, training.sample(e.distractor_id), e.substitutions);
  emit(o.out, render_overlay(sample, cf, e.substitutions,
                             {manifest.class_names[e.original_label], manifest.class_names[e.target_label]}));
  return kExitOk;
}

int cmd_gen_synthetic(const PlantedBenchmarkConfig& cfg, const std::string& out) {
  const auto bench = make_planted_benchmark(cfg);
  write_planted_benchmark(bench, out);
  std::cout << "wrote planted-rule benchmark to " << out << " (planted:";
  for (std::size_t v : bench.planted) std::cout << ' ' << bench.train.manifest().variable_names[v];
  std::cout << ")\n";
  return kExitOk;
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual explanations for multivariate time-series classifiers"};
  app.require_subcommand(1);

  ExplainOptions explain_opts;
  auto* explain_cmd = app.add_subcommand("explain", "explain one sample towards a target class");
  explain_cmd->add_option("--dataset", explain_opts.dataset, "training dataset directory")->required();
  explain_cmd->add_option("--eval-dataset", explain_opts.eval_dataset, "dataset holding the sample (default: --dataset)");
  explain_cmd->add_option("--sample", explain_opts.sample, "sample id")->required();
  explain_cmd->add_option("--target", explain_opts.target, "target class name")->required();
  explain_cmd->add_option("--out", explain_opts.out, "explanation JSON path (default stdout)");
  explain_cmd->add_option("--svg", explain_opts.svg, "overlay plot path");
  add_model_options(explain_cmd, explain_opts.model);
  add_search_options(explain_cmd, explain_opts.search);

  auto* eval_cmd = app.add_subcommand("eval", "quantitative evaluations");
  eval_cmd->require_subcommand(1);
  EvalOptions comp_opts;
  auto* comp_cmd = eval_cmd->add_subcommand("comprehensibility", "substitution-count statistics");
  EvalOptions cov_opts;
  auto* cov_cmd = eval_cmd->add_subcommand("coverage", "generalizability of one explanation per error type");
  for (auto [cmd, opts] : {std::pair{comp_cmd, &comp_opts}, std::pair{cov_cmd, &cov_opts}}) {
    cmd->add_option("--dataset", opts->dataset, "training dataset directory")->required();
    cmd->add_option("--eval-dataset", opts->eval_dataset, "evaluation dataset directory")->required();
    cmd->add_option("--out", opts->out, "report JSON path");
    add_model_options(cmd, opts->model);
    add_search_options(cmd, opts->search);
  }
  comp_cmd->add_option("--target", comp_opts.target, "target class name")->required();
  cov_cmd->add_option("--table", cov_opts.table, "text table path");
  cov_cmd->add_option("--min-group-size", cov_opts.min_group_size, "skip smaller error groups");

  FilterOptions filter_opts;
  auto* filter_cmd = app.add_subcommand("filter", "drop near-constant samples");
  filter_cmd->add_option("--dataset", filter_opts.dataset, "dataset directory")->required();
  filter_cmd->add_option("--std-threshold", filter_opts.std_threshold, "population std threshold");
  filter_cmd->add_option("--class", filter_opts.class_name, "only filter this class");
  filter_cmd->add_option("--out", filter_opts.out, "output dataset directory")->required();
  filter_cmd->add_option("--removed", filter_opts.removed, "removed ids file (default <out>/removed_ids.txt)");

  PlotOptions plot_opts;
  auto* plot_cmd = app.add_subcommand("plot", "render a stored explanation as SVG");
  plot_cmd->add_option("--dataset", plot_opts.dataset, "training dataset directory")->required();
  plot_cmd->add_option("--eval-dataset", plot_opts.eval_dataset, "dataset holding the sample");
  plot_cmd->add_option("--explanation", plot_opts.explanation, "explanation JSON")->required();
  plot_cmd->add_option("--out", plot_opts.out, "SVG path (default stdout)");

  PlantedBenchmarkConfig gen_cfg;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "write the planted-rule benchmark");
  gen_cmd->add_option("--out", gen_out, "output directory")->required();
  gen_cmd->add_option("--variables", gen_cfg.variables, "variables per sample");
  gen_cmd->add_option("--timesteps", gen_cfg.timesteps, "timesteps per sample");
  gen_cmd->add_option("--planted", gen_cfg.planted, "number of rule variables");
  gen_cmd->add_option("--train-samples", gen_cfg.train_samples, "training samples");
  gen_cmd->add_option("--test-samples", gen_cfg.test_samples, "test samples");
  gen_cmd->add_option("--mislabeled-fraction", gen_cfg.mislabeled_fraction,
                      "fraction of rule-violating test samples labeled normal");
  gen_cmd->add_option("--seed", gen_cfg.seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*explain_cmd) return cmd_explain(explain_opts);
    if (*comp_cmd) return cmd_eval_comprehensibility(comp_opts);
    if (*cov_cmd) return cmd_eval_coverage(cov_opts);
    if (*filter_cmd) return cmd_filter(filter_opts);
    if (*plot_cmd) return cmd_plot(plot_opts);
    if (*gen_cmd) return cmd_gen_synthetic(gen_cfg, gen_out);
  } catch (const NoCounterfactualError& e) {
    std::cerr << "no counterfactual: " << one_line(e.what()) << '\n';
    return kExitNoCounterfactual;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << '\n';
    return kExitError;
  }
  return kExitError;
}
