#include "cfts/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cfts/error.hpp"

namespace cfts {

namespace {

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += names[i];
  }
  return out;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (text.empty()) return false;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string location(const char* file, std::size_t line) {
  return std::string(file) + " line " + std::to_string(line);
}

// Line-oriented CSV reader that checks the header and strips CR.
class CsvReader {
 public:
  CsvReader(const std::filesystem::path& path, const char* name, std::string_view header)
      : in_(path), name_(name) {
    if (!in_) throw DataError("missing file " + path.string());
    std::string first;
    if (!next_raw(first) || first != header) {
      throw DataError(std::string(name_) + " line 1: expected header '" + std::string(header) + "'");
    }
  }

  // Returns false at end of file; skips blank lines.
  bool next(std::string& line) {
    while (next_raw(line)) {
      if (!line.empty()) return true;
    }
    return false;
  }

  std::size_t line_number() const noexcept { return line_no_; }
  const char* name() const noexcept { return name_; }

 private:
  bool next_raw(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::ifstream in_;
  const char* name_;
  std::size_t line_no_ = 0;
};

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }
  Manifest m;
  try {
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.variable_names = j.at("variable_names").get<std::vector<std::string>>();
    m.timesteps = j.at("timesteps").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }
  auto check_names = [](const std::vector<std::string>& names, const char* what) {
    if (names.empty()) throw DataError(std::string("manifest.json: ") + what + " is empty");
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (n.empty()) throw DataError(std::string("manifest.json: empty name in ") + what);
      if (n.find(',') != std::string::npos) {
        throw DataError(std::string("manifest.json: name '") + n + "' in " + what + " contains a comma");
      }
      if (!seen.insert(n).second) {
        throw DataError(std::string("manifest.json: duplicate name '") + n + "' in " + what);
      }
    }
  };
  check_names(m.class_names, "class_names");
  check_names(m.variable_names, "variable_names");
  if (m.timesteps == 0) throw DataError("manifest.json: timesteps must be at least 1");
  return m;
}

}  // namespace

ClassIndex Manifest::class_index(const std::string& name) const {
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    if (class_names[i] == name) return i;
  }
  throw ConfigError("unknown class '" + name + "'; valid classes: " + join_names(class_names));
}

std::size_t Manifest::variable_index(const std::string& name) const {
  for (std::size_t i = 0; i < variable_names.size(); ++i) {
    if (variable_names[i] == name) return i;
  }
  throw ConfigError("unknown variable '" + name + "'; valid variables: " + join_names(variable_names));
}

Dataset::Dataset(Manifest manifest) : manifest_(std::move(manifest)) {}

void Dataset::add(const std::string& sample_id, MultivariateSeries sample, ClassIndex label) {
  if (sample_id.empty()) throw DataError("empty sample id");
  if (sample.variables() != manifest_.variable_names || sample.timesteps() != manifest_.timesteps) {
    throw DataError("sample " + sample_id + " does not conform to the manifest shape");
  }
  if (label >= manifest_.class_count()) {
    throw DataError("sample " + sample_id + " has label " + std::to_string(label) +
                    " outside the " + std::to_string(manifest_.class_count()) + " classes");
  }
  if (!samples_.emplace(sample_id, std::move(sample)).second) {
    throw DataError("duplicate sample id " + sample_id);
  }
  labels_.emplace(sample_id, label);
}

const MultivariateSeries& Dataset::sample(const std::string& sample_id) const {
  auto it = samples_.find(sample_id);
  if (it == samples_.end()) throw DataError("unknown sample " + sample_id);
  return it->second;
}

ClassIndex Dataset::label(const std::string& sample_id) const {
  auto it = labels_.find(sample_id);
  if (it == labels_.end()) throw DataError("unknown sample " + sample_id);
  return it->second;
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(samples_.size());
  for (const auto& [id, _] : samples_) out.push_back(id);
  return out;
}

Dataset load_dataset(const std::filesystem::path& root) {
  Manifest manifest = read_manifest(root / "manifest.json");
  const std::size_t V = manifest.variable_count();
  const std::size_t T = manifest.timesteps;

  struct Pending {
    std::vector<double> values;
    std::vector<char> filled;
  };
  std::map<std::string, Pending> pending;

  {
    CsvReader csv(root / "data.csv", "data.csv", "sample_id,variable,t,value");
    std::string line;
    while (csv.next(line)) {
      const auto where = location(csv.name(), csv.line_number());
      auto fields = split_fields(line);
      if (fields.size() != 4) throw DataError("malformed row at " + where + ": expected 4 fields");
      const std::string id(fields[0]);
      if (id.empty()) throw DataError("malformed row at " + where + ": empty sample_id");
      const std::string var(fields[1]);
      std::size_t v = V;
      for (std::size_t i = 0; i < V; ++i) {
        if (manifest.variable_names[i] == var) v = i;
      }
      if (v == V) throw DataError("unknown variable '" + var + "' at " + where + " (sample " + id + ")");
      std::size_t t = 0;
      if (!parse_number(fields[2], t)) {
        throw DataError("malformed timestep '" + std::string(fields[2]) + "' at " + where);
      }
      if (t >= T) {
        throw DataError("timestep " + std::to_string(t) + " out of range at " + where + " (sample " + id + ")");
      }
      const std::string key = id + "/" + var + "/" + std::to_string(t);
      double value = 0.0;
      if (!parse_number(fields[3], value)) {
        throw DataError("malformed value '" + std::string(fields[3]) + "' at " + where + " (" + key + ")");
      }
      if (!std::isfinite(value)) throw DataError("non-finite value at " + where + " (" + key + ")");
      auto& p = pending[id];
      if (p.values.empty()) {
        p.values.assign(V * T, 0.0);
        p.filled.assign(V * T, 0);
      }
      const std::size_t slot = v * T + t;
      if (p.filled[slot]) throw DataError("duplicate entry " + key + " at " + where);
      p.filled[slot] = 1;
      p.values[slot] = value;
    }
  }

  for (const auto& [id, p] : pending) {
    for (std::size_t slot = 0; slot < V * T; ++slot) {
      if (!p.filled[slot]) {
        throw DataError("data.csv: sample " + id + " missing variable " +
                        manifest.variable_names[slot / T] + " timestep " + std::to_string(slot % T));
      }
    }
  }

  std::map<std::string, ClassIndex> labels;
  {
    CsvReader csv(root / "labels.csv", "labels.csv", "sample_id,label");
    std::string line;
    while (csv.next(line)) {
      const auto where = location(csv.name(), csv.line_number());
      auto fields = split_fields(line);
      if (fields.size() != 2) throw DataError("malformed row at " + where + ": expected 2 fields");
      const std::string id(fields[0]);
      if (!pending.count(id)) throw DataError("label for unknown sample " + id + " at " + where);
      ClassIndex label = 0;
      if (!parse_number(fields[1], label)) {
        throw DataError("malformed label '" + std::string(fields[1]) + "' at " + where + " (sample " + id + ")");
      }
      if (label >= manifest.class_count()) {
        throw DataError("label " + std::to_string(label) + " for unknown class at " + where + " (sample " + id + ")");
      }
      if (!labels.emplace(id, label).second) throw DataError("duplicate label for sample " + id + " at " + where);
    }
  }

  Dataset dataset(manifest);
  for (auto& [id, p] : pending) {
    auto it = labels.find(id);
    if (it == labels.end()) throw DataError("labels.csv: no label for sample " + id);
    dataset.add(id, MultivariateSeries(manifest.variable_names, T, std::move(p.values)), it->second);
  }
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  const auto& m = dataset.manifest();
  {
    nlohmann::ordered_json j;
    j["class_names"] = m.class_names;
    j["variable_names"] = m.variable_names;
    j["timesteps"] = m.timesteps;
    std::ofstream out(root / "manifest.json");
    out << j.dump(2) << '\n';
    if (!out) throw DataError("cannot write " + (root / "manifest.json").string());
  }
  {
    std::ofstream out(root / "data.csv");
    out << "sample_id,variable,t,value\n";
    for (const auto& [id, s] : dataset.samples()) {
      for (std::size_t v = 0; v < s.variable_count(); ++v) {
        for (std::size_t t = 0; t < s.timesteps(); ++t) {
          out << id << ',' << m.variable_names[v] << ',' << t << ',' << format_double(s.at(v, t)) << '\n';
        }
      }
    }
    if (!out) throw DataError("cannot write " + (root / "data.csv").string());
  }
  {
    std::ofstream out(root / "labels.csv");
    out << "sample_id,label\n";
    for (const auto& [id, label] : dataset.labels()) out << id << ',' << label << '\n';
    if (!out) throw DataError("cannot write " + (root / "labels.csv").string());
  }
}

FilterResult quality_filter(const Dataset& dataset, std::optional<ClassIndex> class_filter,
                            double threshold) {
  if (!(threshold >= 0.0)) throw ConfigError("std threshold must be nonnegative");
  FilterResult result{Dataset(dataset.manifest()), {}};
  for (const auto& [id, s] : dataset.samples()) {
    const ClassIndex label = dataset.label(id);
    const bool in_scope = !class_filter || *class_filter == label;
    if (in_scope && population_stddev(s.values()) < threshold) {
      result.removed.push_back(id);
    } else {
      result.kept.add(id, s, label);
    }
  }
  return result;
}

}  // namespace cfts
