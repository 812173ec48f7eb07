#include "cfts/search.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "cfts/error.hpp"

namespace cfts {

void SearchConfig::validate() const {
  if (restarts == 0) throw ConfigError("restarts must be positive");
  if (max_iters_per_restart == 0) throw ConfigError("max_iters_per_restart must be positive");
  if (k_distractors == 0) throw ConfigError("k_distractors must be positive");
  if (enable_windows && window_width == 0) throw ConfigError("window width must be positive when windows are enabled");
}

MultivariateSeries apply_substitution(const MultivariateSeries& original, const MultivariateSeries& distractor,
                                      const SubstitutionSet& subs) {
  if (!original.same_shape(distractor)) throw DataError("original and distractor differ in shape");
  const std::size_t T = original.timesteps();
  std::size_t t0 = 0;
  std::size_t t1 = T;
  if (subs.window) {
    t0 = subs.window->t0;
    t1 = subs.window->t1;
    if (!(t0 < t1 && t1 <= T)) {
      throw DataError("invalid window [" + std::to_string(t0) + ", " + std::to_string(t1) + ")");
    }
  }
  auto src = original.values();
  std::vector<double> values(src.begin(), src.end());
  for (std::size_t v : subs.variables) {
    if (v >= original.variable_count()) throw DataError("substituted variable " + std::to_string(v) + " out of range");
    auto row = distractor.row(v);
    std::copy(row.begin() + static_cast<std::ptrdiff_t>(t0), row.begin() + static_cast<std::ptrdiff_t>(t1),
              values.begin() + static_cast<std::ptrdiff_t>(v * T + t0));
  }
  return MultivariateSeries(original.variables(), T, std::move(values), original.sample_rate_hz());
}

namespace {

using Mask = std::vector<char>;

struct Evaluation {
  bool feasible = false;
  double score = 0.0;
  std::size_t size = 0;
};

// Feasible beats infeasible; among feasible fewer atoms then higher score;
// among infeasible higher score then fewer atoms.
bool better(const Evaluation& a, const Evaluation& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible) {
    if (a.size != b.size) return a.size < b.size;
    return a.score > b.score;
  }
  if (a.score != b.score) return a.score > b.score;
  return a.size < b.size;
}

std::size_t mask_size(const Mask& m) { return static_cast<std::size_t>(std::count(m.begin(), m.end(), 1)); }

std::vector<std::size_t> mask_variables(const Mask& m) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) out.push_back(i);
  }
  return out;
}

// FNV-1a over the inputs, finished through splitmix64.
class SeedHasher {
 public:
  void add(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) byte(static_cast<unsigned char>(x >> (8 * i)));
  }
  void add(const std::string& s) {
    for (char c : s) byte(static_cast<unsigned char>(c));
    byte(0);
  }
  std::uint64_t value() const { return h_; }

 private:
  void byte(unsigned char b) {
    h_ ^= b;
    h_ *= 0x100000001b3ULL;
  }
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  // Uniform in [0, n) by rejection; n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::uint64_t state_;
};

// Subset search against one distractor within one substitution space (full
// series or a single time window).
class SubsetSearch {
 public:
  SubsetSearch(const Classifier& classifier, const MultivariateSeries& original, const MultivariateSeries& distractor,
               std::optional<TimeWindow> window, ClassIndex target, const Evaluation& empty_eval,
               SearchStats& stats)
      : classifier_(classifier),
        original_(original),
        distractor_(distractor),
        window_(window),
        target_(target),
        atoms_(original.variable_count()),
        stats_(stats) {
    cache_.emplace(Mask(atoms_, 0), empty_eval);
    best_infeasible_ = empty_eval.score;
  }

  struct Result {
    Mask mask;
    Evaluation eval;
    bool fallback = false;
  };

  std::optional<Result> run(const SearchConfig& cfg, std::uint64_t restart_seed_base) {
    std::optional<Result> best;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
      ++stats_.restarts_used;
      SeedHasher h;
      h.add(restart_seed_base);
      h.add(static_cast<std::uint64_t>(r));
      SplitMix64 rng(h.value());
      Mask state = random_subset(rng, std::min(cfg.initial_subset_size, atoms_));
      Evaluation current = evaluate({state}).front();
      for (std::size_t iter = 0; iter < cfg.max_iters_per_restart; ++iter) {
        std::vector<Mask> neighbors;
        neighbors.reserve(atoms_);
        for (std::size_t i = 0; i < atoms_; ++i) {
          Mask n = state;
          n[i] = static_cast<char>(!n[i]);
          neighbors.push_back(std::move(n));
        }
        const auto evals = evaluate(neighbors);
        std::size_t best_n = 0;
        for (std::size_t i = 1; i < evals.size(); ++i) {
          if (better(evals[i], evals[best_n])) best_n = i;
        }
        if (!better(evals[best_n], current)) break;
        state = std::move(neighbors[best_n]);
        current = evals[best_n];
      }
      if (current.feasible && (!best || better(current, best->eval))) best = Result{state, current, false};
    }
    if (!best) best = greedy();
    if (!best) return std::nullopt;
    prune(*best);
    return best;
  }

  double best_infeasible() const { return best_infeasible_; }

 private:
  Mask random_subset(SplitMix64& rng, std::size_t size) {
    std::vector<std::size_t> idx(atoms_);
    for (std::size_t i = 0; i < atoms_; ++i) idx[i] = i;
    Mask m(atoms_, 0);
    for (std::size_t i = 0; i < size; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(atoms_ - i));
      std::swap(idx[i], idx[j]);
      m[idx[i]] = 1;
    }
    return m;
  }

  std::optional<Result> greedy() {
    Mask state(atoms_, 0);
    for (std::size_t added = 0; added < atoms_; ++added) {
      std::vector<Mask> candidates;
      for (std::size_t i = 0; i < atoms_; ++i) {
        if (state[i]) continue;
        Mask c = state;
        c[i] = 1;
        candidates.push_back(std::move(c));
      }
      const auto evals = evaluate(candidates);
      std::size_t pick = 0;
      for (std::size_t i = 1; i < evals.size(); ++i) {
        if (evals[i].score > evals[pick].score) pick = i;
      }
      state = std::move(candidates[pick]);
      if (evals[pick].feasible) return Result{state, evals[pick], true};
    }
    return std::nullopt;
  }

  void prune(Result& result) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < atoms_; ++i) {
        if (!result.mask[i]) continue;
        Mask trial = result.mask;
        trial[i] = 0;
        const Evaluation e = evaluate({trial}).front();
        if (e.feasible) {
          result.mask = std::move(trial);
          result.eval = e;
          changed = true;
        }
      }
    }
  }

  std::vector<Evaluation> evaluate(const std::vector<Mask>& masks) {
    std::vector<std::size_t> pending;
    std::vector<MultivariateSeries> batch;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      if (cache_.count(masks[i])) continue;
      // The same mask can appear twice within one request; score it once.
      bool dup = false;
      for (std::size_t p : pending) dup = dup || masks[p] == masks[i];
      if (dup) continue;
      pending.push_back(i);
      batch.push_back(apply_substitution(original_, distractor_, SubstitutionSet{mask_variables(masks[i]), window_}));
    }
    if (!batch.empty()) {
      const auto scores = classifier_.predict_scores(batch);
      stats_.model_queries += batch.size();
      for (std::size_t j = 0; j < pending.size(); ++j) {
        Evaluation e{classifier_.label_of(scores[j]) == target_, scores[j][target_], mask_size(masks[pending[j]])};
        if (!e.feasible) best_infeasible_ = std::max(best_infeasible_, e.score);
        cache_.emplace(masks[pending[j]], e);
      }
    }
    std::vector<Evaluation> out;
    out.reserve(masks.size());
    for (const auto& m : masks) out.push_back(cache_.at(m));
    return out;
  }

  const Classifier& classifier_;
  const MultivariateSeries& original_;
  const MultivariateSeries& distractor_;
  std::optional<TimeWindow> window_;
  ClassIndex target_;
  std::size_t atoms_;
  SearchStats& stats_;
  std::map<Mask, Evaluation> cache_;
  double best_infeasible_ = 0.0;
};

std::vector<std::optional<TimeWindow>> substitution_spaces(const SearchConfig& cfg, std::size_t timesteps) {
  std::vector<std::optional<TimeWindow>> spaces{std::nullopt};
  if (!cfg.enable_windows || cfg.window_width >= timesteps) return spaces;
  for (std::size_t t0 = 0; t0 < timesteps; t0 += cfg.window_width) {
    spaces.push_back(TimeWindow{t0, std::min(t0 + cfg.window_width, timesteps)});
  }
  return spaces;
}

// Explains why even full substitution failed to reach the target.
std::string diagnose_full_failure(const Classifier& classifier, const MultivariateSeries& distractor,
                                  const std::string& distractor_id, ClassIndex target, SearchStats& stats) {
  const std::vector<MultivariateSeries> twice{distractor, distractor};
  const auto scores = classifier.predict_scores(twice);
  stats.model_queries += twice.size();
  if (scores[0] != scores[1]) {
    return "classifier is non-deterministic (distractor " + distractor_id + " scored differently on repeated queries)";
  }
  if (classifier.label_of(scores[0]) != target) {
    return "distractor store is stale (distractor " + distractor_id +
           " is no longer classified as its indexed class; rebuild the store with this classifier)";
  }
  return "classifier is non-deterministic (full substitution from " + distractor_id +
         " was not classified as the target although the distractor itself is)";
}

}  // namespace

Explanation explain_sample(const Classifier& classifier, const DistractorStore& store, const std::string& sample_id,
                           const MultivariateSeries& sample, ClassIndex target, const SearchConfig& cfg) {
  cfg.validate();
  const Manifest& manifest = store.training().manifest();
  if (target >= classifier.class_count()) {
    throw PreconditionError("target class " + std::to_string(target) + " out of range");
  }
  if (sample.variables() != manifest.variable_names || sample.timesteps() != manifest.timesteps) {
    throw PreconditionError("sample " + sample_id + " does not match the distractor store's shape");
  }

  Explanation out;
  out.sample_id = sample_id;
  out.target_label = target;
  SearchStats& stats = out.search_stats;

  const auto original_scores = classifier.predict_scores(std::span(&sample, 1)).front();
  stats.model_queries += 1;
  out.original_label = classifier.label_of(original_scores);
  out.score_before = original_scores[target];
  if (out.original_label == target) {
    throw PreconditionError("sample " + sample_id + " is already predicted as " + manifest.class_names[target]);
  }
  const Evaluation empty_eval{false, out.score_before, 0};

  const auto distractors = store.nearest(sample, target, cfg.k_distractors);
  const auto spaces = substitution_spaces(cfg, sample.timesteps());

  std::optional<Explanation> best;
  double best_infeasible = out.score_before;
  for (const auto& d : distractors) {
    ++stats.distractors_tried;
    const MultivariateSeries& distractor = store.training().sample(d.sample_id);
    for (std::size_t s = 0; s < spaces.size(); ++s) {
      SubsetSearch search(classifier, sample, distractor, spaces[s], target, empty_eval, stats);
      SeedHasher h;
      h.add(cfg.rng_seed);
      h.add(sample_id);
      h.add(d.sample_id);
      h.add(static_cast<std::uint64_t>(s));
      const auto result = search.run(cfg, h.value());
      best_infeasible = std::max(best_infeasible, search.best_infeasible());
      if (!result) continue;
      const std::size_t size = result->eval.size;
      const bool wins = !best || size < best->substitutions.variables.size() ||
                        (size == best->substitutions.variables.size() && result->eval.score > best->score_after);
      if (wins) {
        Explanation e = out;
        e.distractor_id = d.sample_id;
        e.substitutions = SubstitutionSet{mask_variables(result->mask), spaces[s]};
        e.score_after = result->eval.score;
        e.search_stats.fallback_used = result->fallback;
        best = std::move(e);
      }
    }
  }

  if (!best) {
    const auto& first = distractors.front();
    const std::string reason = diagnose_full_failure(classifier, store.training().sample(first.sample_id),
                                                     first.sample_id, target, stats);
    throw NoCounterfactualError("no counterfactual found for sample " + sample_id + " (target " +
                                    manifest.class_names[target] + ", best target score " +
                                    std::to_string(best_infeasible) + "): " + reason,
                                best_infeasible);
  }
  const bool fallback = best->search_stats.fallback_used;
  best->search_stats = stats;
  best->search_stats.fallback_used = fallback;
  return *best;
}

Explanation explain(const Classifier& classifier, const DistractorStore& store, const Dataset& dataset,
                    const std::string& sample_id, ClassIndex target, const SearchConfig& cfg) {
  return explain_sample(classifier, store, sample_id, dataset.sample(sample_id), target, cfg);
}

nlohmann::ordered_json explanation_to_json(const Explanation& e, const Manifest& manifest) {
  nlohmann::ordered_json vars = nlohmann::ordered_json::array();
  for (std::size_t v : e.substitutions.variables) vars.push_back(manifest.variable_names.at(v));
  nlohmann::ordered_json window = nullptr;
  if (e.substitutions.window) window = {e.substitutions.window->t0, e.substitutions.window->t1};
  nlohmann::ordered_json j;
  j["sample_id"] = e.sample_id;
  j["original_label"] = manifest.class_names.at(e.original_label);
  j["target_label"] = manifest.class_names.at(e.target_label);
  j["distractor_id"] = e.distractor_id;
  j["substitutions"] = {{"variables", vars}, {"window", window}};
  j["score_before"] = e.score_before;
  j["score_after"] = e.score_after;
  j["search_stats"] = {{"restarts_used", e.search_stats.restarts_used},
                       {"model_queries", e.search_stats.model_queries},
                       {"distractors_tried", e.search_stats.distractors_tried},
                       {"fallback_used", e.search_stats.fallback_used}};
  return j;
}

Explanation explanation_from_json(const nlohmann::json& j, const Manifest& manifest) {
  try {
    Explanation e;
    e.sample_id = j.at("sample_id").get<std::string>();
    e.original_label = manifest.class_index(j.at("original_label").get<std::string>());
    e.target_label = manifest.class_index(j.at("target_label").get<std::string>());
    e.distractor_id = j.at("distractor_id").get<std::string>();
    const auto& subs = j.at("substitutions");
    for (const auto& name : subs.at("variables")) {
      e.substitutions.variables.push_back(manifest.variable_index(name.get<std::string>()));
    }
    std::sort(e.substitutions.variables.begin(), e.substitutions.variables.end());
    const auto& w = subs.at("window");
    if (!w.is_null()) {
      e.substitutions.window = TimeWindow{w.at(0).get<std::size_t>(), w.at(1).get<std::size_t>()};
    }
    e.score_before = j.at("score_before").get<double>();
    e.score_after = j.at("score_after").get<double>();
    if (j.contains("search_stats")) {
      const auto& s = j.at("search_stats");
      e.search_stats.restarts_used = s.value("restarts_used", std::size_t{0});
      e.search_stats.model_queries = s.value("model_queries", std::size_t{0});
      e.search_stats.distractors_tried = s.value("distractors_tried", std::size_t{0});
      e.search_stats.fallback_used = s.value("fallback_used", false);
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed explanation JSON: ") + ex.what());
  }
}

}  // namespace cfts
