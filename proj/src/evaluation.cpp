#include "cfts/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <sstream>

#include "cfts/error.hpp"

namespace cfts {

CountStatistics count_statistics(std::span<const std::size_t> counts) {
  CountStatistics s;
  if (counts.empty()) return s;
  std::size_t total = 0;
  for (std::size_t c : counts) {
    total += c;
    ++s.histogram[c];
  }
  s.mean = static_cast<double>(total) / static_cast<double>(counts.size());
  std::size_t best_freq = 0;
  for (const auto& [count, freq] : s.histogram) {
    if (freq > best_freq) {
      best_freq = freq;
      s.mode = count;
    }
  }
  return s;
}

std::optional<double> CoverageGroup::coverage() const {
  if (failure || n == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::optional<std::size_t> CoverageGroup::coverage_percent() const {
  if (failure || n == 0) return std::nullopt;
  return (200 * hits + n) / (2 * n);
}

namespace {

void check_eval_ids(const DistractorStore& store, const Dataset& dataset, const std::vector<std::string>& eval_ids) {
  std::set<std::string> seen;
  for (const auto& id : eval_ids) {
    if (!dataset.contains(id)) throw DataError("unknown eval sample " + id);
    if (!seen.insert(id).second) throw DataError("duplicate eval sample " + id);
    if (store.is_training_id(id)) {
      throw DataError("data leakage: eval sample " + id + " is also a training sample of the distractor store");
    }
  }
}

std::vector<ClassIndex> predict_all(const Classifier& classifier, const Dataset& dataset,
                                    const std::vector<std::string>& ids) {
  std::vector<MultivariateSeries> batch;
  batch.reserve(ids.size());
  for (const auto& id : ids) batch.push_back(dataset.sample(id));
  std::vector<ClassIndex> labels;
  labels.reserve(ids.size());
  for (const auto& s : classifier.predict_scores(batch)) labels.push_back(classifier.label_of(s));
  return labels;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}
std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

ComprehensibilityReport eval_comprehensibility(const Classifier& classifier, const DistractorStore& store,
                                               const Dataset& dataset, const std::vector<std::string>& eval_ids,
                                               ClassIndex target, const SearchConfig& cfg) {
  cfg.validate();
  check_eval_ids(store, dataset, eval_ids);
  const auto predicted = predict_all(classifier, dataset, eval_ids);
  for (std::size_t i = 0; i < eval_ids.size(); ++i) {
    if (predicted[i] == target) {
      throw PreconditionError("eval sample " + eval_ids[i] + " is already predicted as " +
                              dataset.manifest().class_names.at(target));
    }
  }
  ComprehensibilityReport report;
  std::vector<std::size_t> counts;
  for (const auto& id : eval_ids) {
    try {
      const auto e = explain(classifier, store, dataset, id, target, cfg);
      report.per_sample.emplace_back(id, e.substitutions.variables.size());
      counts.push_back(e.substitutions.variables.size());
    } catch (const NoCounterfactualError&) {
      report.failures.push_back(id);
    } catch (const NoDistractorsError&) {
      report.failures.push_back(id);
    }
  }
  report.stats = count_statistics(counts);
  return report;
}

CoverageReport eval_coverage(const Classifier& classifier, const DistractorStore& store, const Dataset& dataset,
                             const std::vector<std::string>& eval_ids, const SearchConfig& cfg,
                             std::size_t min_group_size) {
  cfg.validate();
  check_eval_ids(store, dataset, eval_ids);
  const auto predicted = predict_all(classifier, dataset, eval_ids);

  std::map<std::pair<ClassIndex, ClassIndex>, std::vector<std::string>> groups;
  for (std::size_t i = 0; i < eval_ids.size(); ++i) {
    const ClassIndex truth = dataset.label(eval_ids[i]);
    if (predicted[i] != truth) groups[{truth, predicted[i]}].push_back(eval_ids[i]);
  }

  CoverageReport report;
  for (const auto& [key, members] : groups) {
    if (members.size() < min_group_size) {
      report.skipped.push_back(key);
      continue;
    }
    CoverageGroup g;
    g.true_label = key.first;
    g.predicted_label = key.second;
    g.n = members.size();
    g.seed_sample_id = members.front();
    try {
      g.explanation = explain(classifier, store, dataset, g.seed_sample_id, g.true_label, cfg);
    } catch (const NoCounterfactualError& e) {
      g.failure = e.what();
    } catch (const NoDistractorsError& e) {
      g.failure = e.what();
    }
    if (g.explanation) {
      const MultivariateSeries& distractor = store.training().sample(g.explanation->distractor_id);
      std::vector<MultivariateSeries> batch;
      batch.reserve(members.size());
      for (const auto& id : members) {
        batch.push_back(apply_substitution(dataset.sample(id), distractor, g.explanation->substitutions));
      }
      for (const auto& s : classifier.predict_scores(batch)) {
        if (classifier.label_of(s) == g.true_label) ++g.hits;
      }
    }
    report.groups.push_back(std::move(g));
  }
  return report;
}

nlohmann::ordered_json to_json(const ComprehensibilityReport& report, const Manifest&) {
  nlohmann::ordered_json per_sample = nlohmann::ordered_json::object();
  for (const auto& [id, count] : report.per_sample) per_sample[id] = count;
  nlohmann::ordered_json histogram = nlohmann::ordered_json::object();
  for (const auto& [count, freq] : report.stats.histogram) histogram[std::to_string(count)] = freq;
  nlohmann::ordered_json j;
  j["per_sample"] = std::move(per_sample);
  j["mean"] = report.stats.mean ? nlohmann::ordered_json(*report.stats.mean) : nlohmann::ordered_json(nullptr);
  j["mode"] = report.stats.mode ? nlohmann::ordered_json(*report.stats.mode) : nlohmann::ordered_json(nullptr);
  j["histogram"] = std::move(histogram);
  j["failures"] = report.failures;
  return j;
}

nlohmann::ordered_json to_json(const CoverageReport& report, const Manifest& manifest) {
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const auto& g : report.groups) {
    nlohmann::ordered_json jg;
    jg["true_label"] = manifest.class_names.at(g.true_label);
    jg["predicted_label"] = manifest.class_names.at(g.predicted_label);
    jg["N"] = g.n;
    jg["hits"] = g.hits;
    const auto cov = g.coverage();
    jg["coverage"] = cov ? nlohmann::ordered_json(*cov) : nlohmann::ordered_json(nullptr);
    jg["coverage_rational"] = cov ? nlohmann::ordered_json({g.hits, g.n}) : nlohmann::ordered_json(nullptr);
    jg["seed_sample_id"] = g.seed_sample_id;
    jg["explanation"] = g.explanation ? explanation_to_json(*g.explanation, manifest) : nlohmann::ordered_json(nullptr);
    jg["failure"] = g.failure ? nlohmann::ordered_json(*g.failure) : nlohmann::ordered_json(nullptr);
    groups.push_back(std::move(jg));
  }
  nlohmann::ordered_json skipped = nlohmann::ordered_json::array();
  for (const auto& [t, p] : report.skipped) {
    skipped.push_back({manifest.class_names.at(t), manifest.class_names.at(p)});
  }
  nlohmann::ordered_json j;
  j["groups"] = std::move(groups);
  j["skipped_groups"] = std::move(skipped);
  return j;
}

std::string coverage_table(const CoverageReport& report, const Manifest& manifest) {
  const std::string h_type = "Misclassification Type (True, Predicted)";
  const std::string h_cov = "Coverage (%)";
  const std::string h_n = "N";
  std::vector<std::array<std::string, 3>> rows;
  for (const auto& g : report.groups) {
    const auto pct = g.coverage_percent();
    rows.push_back({manifest.class_names.at(g.true_label) + ", " + manifest.class_names.at(g.predicted_label),
                    pct ? std::to_string(*pct) : std::string("n/a"), std::to_string(g.n)});
  }
  std::size_t w0 = h_type.size(), w1 = h_cov.size(), w2 = h_n.size();
  for (const auto& r : rows) {
    w0 = std::max(w0, r[0].size());
    w1 = std::max(w1, r[1].size());
    w2 = std::max(w2, r[2].size());
  }
  std::ostringstream out;
  out << pad_right(h_type, w0) << "  " << pad_left(h_cov, w1) << "  " << pad_left(h_n, w2) << '\n';
  out << std::string(w0 + w1 + w2 + 4, '-') << '\n';
  for (const auto& r : rows) {
    out << pad_right(r[0], w0) << "  " << pad_left(r[1], w1) << "  " << pad_left(r[2], w2) << '\n';
  }
  return out.str();
}

std::string comprehensibility_summary(const ComprehensibilityReport& report) {
  std::ostringstream out;
  out << "explained samples: " << report.per_sample.size() << '\n';
  out << "failures: " << report.failures.size() << '\n';
  if (report.stats.mean) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", *report.stats.mean);
    out << "mean substitutions: " << buf << '\n';
    out << "mode substitutions: " << *report.stats.mode << '\n';
    out << "histogram:";
    for (const auto& [count, freq] : report.stats.histogram) out << ' ' << count << ':' << freq;
    out << '\n';
  }
  return out.str();
}

}  // namespace cfts
