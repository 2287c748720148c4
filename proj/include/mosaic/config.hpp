#pragma once

#include "mosaic/common.hpp"

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mosaic {

// Ordered flat key=value store with [section] headers; the file format for
// configs and manifests. Keys are "section.name".
class KeyValueStore {
 public:
  void put(const std::string& key, const std::string& value);
  void put(const std::string& key, long long value);
  void put(const std::string& key, double value);

  bool has(const std::string& key) const;
  const std::string& raw(const std::string& key) const;

  long long integer(const std::string& key) const;
  double number(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;   // comma separated
  std::vector<double> number_list(const std::string& key) const;

  // insertion-ordered (section-grouped) serialization
  void write(std::ostream& os) const;
  void save(const std::string& path) const;
  static KeyValueStore parse(std::istream& is);
  static KeyValueStore load(const std::string& path);

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }
  std::vector<std::pair<std::string, std::string>> section(
      const std::string& prefix) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

// Declarative experiment description. Every key has a default; file loads
// and overrides reject unknown keys before any compute starts.
class ExperimentConfig {
 public:
  struct SchemaEntry {
    const char* key;
    const char* fallback;
    const char* doc;
  };
  static const std::vector<SchemaEntry>& schema();

  ExperimentConfig();  // all defaults

  void load_file(const std::string& path);
  void load_store(const KeyValueStore& kv);
  void set(const std::string& key, const std::string& value);
  bool touched(const std::string& key) const {
    return touched_.count(key) > 0;
  }
  // kind-dependent defaults for keys the user left alone (moons models use
  // 3 heads, sequence models 2)
  void apply_kind_defaults();

  const std::string& str(const std::string& key) const;
  long long integer(const std::string& key) const { return kv_.integer(key); }
  double number(const std::string& key) const { return kv_.number(key); }
  bool flag(const std::string& key) const { return kv_.flag(key); }
  std::vector<int> int_list(const std::string& key) const {
    return kv_.int_list(key);
  }
  std::vector<double> number_list(const std::string& key) const {
    return kv_.number_list(key);
  }

  std::string kind() const { return str("experiment.kind"); }
  std::uint64_t seed() const;
  std::string out_dir() const { return str("experiment.out"); }

  // fully-materialized resolved view
  const KeyValueStore& store() const { return kv_; }
  void validate() const;

 private:
  KeyValueStore kv_;
  std::set<std::string> touched_;
};

// Reproducible record of one run: resolved config, seeds, pools, metric
// summaries, artifact paths.
class RunManifest {
 public:
  void put(const std::string& key, const std::string& value) {
    kv_.put(key, value);
  }
  void put(const std::string& key, long long value) { kv_.put(key, value); }
  void put(const std::string& key, double value) { kv_.put(key, value); }
  void put_metric(const std::string& name, double value) {
    kv_.put("metrics." + name, value);
  }

  void embed_config(const ExperimentConfig& cfg);
  // resolved config recovered from the manifest; rerunning it must
  // reproduce every CSV artifact byte-identically
  ExperimentConfig extract_config() const;

  bool has_metric(const std::string& name) const {
    return kv_.has("metrics." + name);
  }
  double metric(const std::string& name) const {
    return kv_.number("metrics." + name);
  }
  std::vector<std::pair<std::string, std::string>> metrics() const {
    return kv_.section("metrics.");
  }
  std::string kind() const;

  void save(const std::string& path) const { kv_.save(path); }
  static RunManifest load(const std::string& path);

  const KeyValueStore& store() const { return kv_; }

 private:
  KeyValueStore kv_;
  std::set<std::string> touched_;
};

}  // namespace mosaic
