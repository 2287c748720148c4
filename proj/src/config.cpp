#include "mosaic/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mosaic {

// ---------------------------------------------------------------------------
// KeyValueStore
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void KeyValueStore::put(const std::string& key, const std::string& value) {
  require(key.find('.') != std::string::npos,
          "KeyValueStore: key must be section.name: " + key);
  auto it = index_.find(key);
  if (it != index_.end()) {
    entries_[it->second].second = value;
  } else {
    index_[key] = entries_.size();
    entries_.emplace_back(key, value);
  }
}

void KeyValueStore::put(const std::string& key, long long value) {
  put(key, std::to_string(value));
}

void KeyValueStore::put(const std::string& key, double value) {
  put(key, format_double(value));
}

bool KeyValueStore::has(const std::string& key) const {
  return index_.count(key) > 0;
}

const std::string& KeyValueStore::raw(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end())
    throw ConfigError("missing key: " + key);
  return entries_[it->second].second;
}

long long KeyValueStore::integer(const std::string& key) const {
  const std::string& v = raw(key);
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError("key " + key + ": '" + v + "' is not an integer");
  return out;
}

double KeyValueStore::number(const std::string& key) const {
  const std::string& v = raw(key);
  try {
    size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key " + key + ": '" + v + "' is not a number");
  }
}

bool KeyValueStore::flag(const std::string& key) const {
  const std::string& v = raw(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key " + key + ": '" + v + "' is not a boolean");
}

namespace {

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

}  // namespace

std::vector<int> KeyValueStore::int_list(const std::string& key) const {
  std::vector<int> out;
  for (const std::string& part : split_commas(raw(key))) {
    int v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc{} || p != part.data() + part.size())
      throw ConfigError("key " + key + ": '" + part + "' is not an integer");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("key " + key + ": empty list");
  return out;
}

std::vector<double> KeyValueStore::number_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& part : split_commas(raw(key))) {
    try {
      size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("key " + key + ": '" + part + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError("key " + key + ": empty list");
  return out;
}

void KeyValueStore::write(std::ostream& os) const {
  std::string current_section;
  for (const auto& [key, value] : entries_) {
    std::string section = key.substr(0, key.find('.'));
    std::string name = key.substr(key.find('.') + 1);
    if (section != current_section) {
      if (!current_section.empty()) os << "\n";
      os << "[" << section << "]\n";
      current_section = section;
    }
    os << name << " = " << value << "\n";
  }
}

void KeyValueStore::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os.good()) throw ContractViolation("cannot write " + path);
  write(os);
  os.flush();
  if (!os.good()) throw ContractViolation("write failed for " + path);
}

KeyValueStore KeyValueStore::parse(std::istream& is) {
  KeyValueStore kv;
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) +
                          ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw ConfigError("line " + std::to_string(line_no) +
                          ": empty section name");
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value");
    std::string name = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (name.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (section.empty())
      throw ConfigError("line " + std::to_string(line_no) +
                        ": key outside any [section]");
    kv.put(section + "." + name, value);
  }
  return kv;
}

KeyValueStore KeyValueStore::load(const std::string& path) {
  std::ifstream is(path);
  if (!is.good()) throw ConfigError("cannot open " + path);
  return parse(is);
}

std::vector<std::pair<std::string, std::string>> KeyValueStore::section(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, value] : entries_)
    if (key.rfind(prefix, 0) == 0)
      out.emplace_back(key.substr(prefix.size()), value);
  return out;
}

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

const std::vector<ExperimentConfig::SchemaEntry>& ExperimentConfig::schema() {
  static const std::vector<SchemaEntry> entries = {
      {"experiment.kind", "moons",
       "moons | induction | icl | gradcheck | attnprofile"},
      {"experiment.seed", "1", "root seed; every stream derives from it"},
      {"experiment.out", "runs/out", "output directory for all artifacts"},

      {"model.family", "mosaic", "mosaic | transformer"},
      {"model.heads", "3", "memory units / attention heads per layer"},
      {"model.blocks", "1", "block count (sequence models)"},
      {"model.d_model", "64", "embedding width (sequence models)"},
      {"model.slots", "0", "persistent slots per unit; 0 derives parity"},
      {"model.context_limit", "256", "transformer position-table size"},
      {"model.dropout", "0", "dropout rate (0 disables)"},
      {"model.init", "random", "moons weights: random | identity"},
      {"model.init_scale", "0.25", "moons random init scale"},

      {"data.train_pfas", "100", "icl: automata in the training pool"},
      {"data.val_pfas", "40", "icl: held-out automata for selection"},
      {"data.test_pfas", "40", "icl: held-out automata for final scores"},
      {"data.train_sequences", "1000", "icl: training sequences"},
      {"data.val_sequences", "200", "icl: selection sequences"},
      {"data.test_sequences", "200", "icl: test sequences"},
      {"data.pfa_states_lo", "4", "icl: automaton state count range"},
      {"data.pfa_states_hi", "12", ""},
      {"data.alphabet", "18", "icl: emission alphabet (separator added)"},
      {"data.edges_lo", "2", "icl: outgoing edges per state range"},
      {"data.edges_hi", "4", ""},
      {"data.strings_lo", "10", "icl: strings per sequence range"},
      {"data.strings_hi", "20", ""},
      {"data.string_len_lo", "1", "icl: string length range"},
      {"data.string_len_hi", "10", ""},
      {"data.iid_eval", "false", "icl-eval: draw from training automata"},
      {"data.vocab", "16", "induction: vocabulary size"},
      {"data.length", "64", "induction: sequence length"},
      {"data.train_samples", "2000", "induction: training set size"},
      {"data.eval_samples", "200", "induction: evaluation set size"},
      {"data.sequence_length", "800", "moons: training sequence length"},
      {"data.dump", "false", "write the generated dataset next to the run"},

      {"training.iterations", "2000", "optimizer steps"},
      {"training.batch", "16", "sequences per step"},
      {"training.peak_lr", "1e-3", "schedule peak"},
      {"training.min_lr", "1e-4", "schedule floor"},
      {"training.warmup", "100", "linear warm-up steps"},
      {"training.weight_decay", "0", "decoupled decay"},
      {"training.beta1", "0.9", ""},
      {"training.beta2", "0.999", ""},
      {"training.eps", "1e-8", ""},
      {"training.clip", "3.0", "moons loss clip"},
      {"training.val_every", "200", "validation cadence; 0 disables"},

      {"eval.horizon", "25", "moons rollout length"},
      {"eval.sequences", "512", "moons: sequences per curve"},
      {"eval.max_context", "0", "moons: curve extent; 0 = lcm + horizon"},
      {"eval.triple", "6,10,15", "moons: held-out period triple"},
      {"eval.window", "3", "transition boundary window"},
      {"eval.checkpoint", "", "weights to evaluate (icl-eval, attn-profile)"},
      {"eval.block", "0", "attn-profile: block to record"},
      {"eval.lambdas", "0,0.5,0.9", "attn-profile: leak sweep"},
      {"eval.profile_beta", "8", "attn-profile: unit bandwidth"},
      {"eval.profile_dim", "4", "attn-profile: key dimension"},
      {"eval.profile_length", "32", "attn-profile: sequence length"},
      {"eval.profile_sequences", "512", "attn-profile: sequences"},

      {"sweep.blocks", "1,2", "grid over depths"},
      {"sweep.heads", "2,4", "grid over head counts"},
      {"sweep.dims", "32,64", "grid over widths"},
      {"sweep.budget", "16", "refuse grids larger than this"},
  };
  return entries;
}

ExperimentConfig::ExperimentConfig() {
  for (const SchemaEntry& e : schema()) kv_.put(e.key, e.fallback);
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (!kv_.has(key)) throw ConfigError("unknown configuration key: " + key);
  kv_.put(key, trim(value));
  touched_.insert(key);
}

void ExperimentConfig::apply_kind_defaults() {
  if (!touched("model.heads"))
    kv_.put("model.heads", kind() == "moons" ? "3" : "2");
}

void ExperimentConfig::load_store(const KeyValueStore& other) {
  for (const auto& [key, value] : other.entries()) set(key, value);
}

void ExperimentConfig::load_file(const std::string& path) {
  load_store(KeyValueStore::load(path));
}

const std::string& ExperimentConfig::str(const std::string& key) const {
  return kv_.raw(key);
}

std::uint64_t ExperimentConfig::seed() const {
  return static_cast<std::uint64_t>(kv_.integer("experiment.seed"));
}

void ExperimentConfig::validate() const {
  const std::string k = kind();
  if (k != "moons" && k != "induction" && k != "icl" && k != "gradcheck" &&
      k != "attnprofile")
    throw ConfigError("experiment.kind: unknown kind '" + k + "'");
  const std::string family = str("model.family");
  if (family != "mosaic" && family != "transformer")
    throw ConfigError("model.family: unknown family '" + family + "'");
  const std::string init = str("model.init");
  if (init != "random" && init != "identity")
    throw ConfigError("model.init: must be random or identity");
  if (k == "moons") {
    long long heads = integer("model.heads");
    if (heads != 1 && heads != 3)
      throw ConfigError("model.heads: moons models use 1 or 3 heads");
    auto triple = int_list("eval.triple");
    if (triple.size() != 3) throw ConfigError("eval.triple: need three periods");
  }
  if (integer("experiment.seed") < 0)
    throw ConfigError("experiment.seed: must be nonnegative");
  if (out_dir().empty()) throw ConfigError("experiment.out: empty path");
}

// ---------------------------------------------------------------------------
// RunManifest
// ---------------------------------------------------------------------------

void RunManifest::embed_config(const ExperimentConfig& cfg) {
  for (const auto& [key, value] : cfg.store().entries())
    kv_.put("config:" + key, value);
}

std::string RunManifest::kind() const { return kv_.raw("run.kind"); }

ExperimentConfig RunManifest::extract_config() const {
  ExperimentConfig cfg;
  for (const auto& [key, value] : kv_.section("config:")) cfg.set(key, value);
  return cfg;
}

RunManifest RunManifest::load(const std::string& path) {
  RunManifest m;
  m.kv_ = KeyValueStore::load(path);
  if (!m.kv_.has("run.kind"))
    throw ConfigError(path + " is not a run manifest (missing run.kind)");
  return m;
}

}  // namespace mosaic
