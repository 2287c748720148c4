#include "mosaic/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <istream>
#include <functional>
#include <queue>
#include <set>
#include <span>

namespace mosaic {

// ---------------------------------------------------------------------------
// moons
// ---------------------------------------------------------------------------

long MoonTriple::lcm() const {
  long l = std::lcm(static_cast<long>(p1), static_cast<long>(p2));
  return std::lcm(l, static_cast<long>(p3));
}

bool moon_triple_admissible(const MoonTriple& t) {
  return t.p1 >= 2 && t.p1 < t.p2 && t.p2 < t.p3 && t.lcm() <= kMaxMoonLcm;
}

namespace {

// Deterministic split of the enumeration; salt chosen once so the examples
// used by the evaluation protocol land in the validation pool.
bool triple_in_validation(const MoonTriple& t) {
  std::uint64_t h = derive_seed(
      0x6d6f6f6e78ULL,
      std::to_string(t.p1) + "," + std::to_string(t.p2) + "," +
          std::to_string(t.p3));
  return (h & 1) == 1;
}

std::vector<MoonTriple> build_pool(Split split) {
  std::vector<MoonTriple> pool;
  for (int p1 = 2; p1 <= 40; ++p1)
    for (int p2 = p1 + 1; p2 <= 40; ++p2)
      for (int p3 = p2 + 1; p3 <= 40; ++p3) {
        MoonTriple t{p1, p2, p3};
        if (!moon_triple_admissible(t)) continue;
        bool val = triple_in_validation(t);
        if ((split == Split::kValidation) == val) pool.push_back(t);
      }
  require(!pool.empty(), "moon_triple_pool: empty split pool");
  return pool;
}

}  // namespace

const std::vector<MoonTriple>& moon_triple_pool(Split split) {
  static const std::vector<MoonTriple> train = build_pool(Split::kTrain);
  static const std::vector<MoonTriple> val = build_pool(Split::kValidation);
  return split == Split::kTrain ? train : val;
}

MoonSystem make_moon_system(const MoonTriple& triple, Rng& rng) {
  require(moon_triple_admissible(triple),
          "make_moon_system: inadmissible period triple");
  MoonSystem s;
  s.periods = triple;
  for (double& phi : s.phases) phi = rng.uniform(0.0, 2.0 * M_PI);
  return s;
}

MoonSystem gen_moon_system(Rng& rng, Split split) {
  const auto& pool = moon_triple_pool(split);
  MoonTriple t = pool[static_cast<size_t>(rng.uniform_int(
      static_cast<int>(pool.size())))];
  return make_moon_system(t, rng);
}

std::vector<MoonTriple> draw_distinct_triples(Rng& rng, Split split, int n) {
  const auto& pool = moon_triple_pool(split);
  require(n >= 0 && static_cast<size_t>(n) <= pool.size(),
          "draw_distinct_triples: pool exhausted");
  std::vector<MoonTriple> shuffled = pool;
  for (int i = static_cast<int>(shuffled.size()) - 1; i > 0; --i)
    std::swap(shuffled[static_cast<size_t>(i)],
              shuffled[static_cast<size_t>(rng.uniform_int(i + 1))]);
  shuffled.resize(static_cast<size_t>(n));
  return shuffled;
}

MoonSequence gen_moon_sequence(const MoonSystem& system) {
  MoonSequence seq;
  seq.system = system;
  seq.observations.resize(kMoonSequenceLength, 3);
  const int periods[3] = {system.periods.p1, system.periods.p2,
                          system.periods.p3};
  for (int t = 0; t < kMoonSequenceLength; ++t)
    for (int k = 0; k < 3; ++k) {
      double theta = system.phases[static_cast<size_t>(k)] +
                     2.0 * M_PI * static_cast<double>(t + 1) / periods[k];
      seq.observations(t, k) = std::complex<double>(std::cos(theta),
                                                    std::sin(theta));
    }
  return seq;
}

// ---------------------------------------------------------------------------
// PFA
// ---------------------------------------------------------------------------

void PfaSpec::validate() const {
  require(n_states >= 1, "PfaSpec: need at least one state");
  require(alphabet_size >= 1, "PfaSpec: empty alphabet");
  require(separator == alphabet_size, "PfaSpec: separator must follow alphabet");
  require(start_state >= 0 && start_state < n_states, "PfaSpec: bad start");
  require(static_cast<int>(edges.size()) == n_states,
          "PfaSpec: edge table size mismatch");
  std::vector<bool> seen(static_cast<size_t>(n_states), false);
  std::queue<int> frontier;
  frontier.push(start_state);
  seen[static_cast<size_t>(start_state)] = true;
  int reached = 0;
  while (!frontier.empty()) {
    int s = frontier.front();
    frontier.pop();
    ++reached;
    double total = 0.0;
    require(!edges[static_cast<size_t>(s)].empty(),
            "PfaSpec: state without outgoing edges");
    for (const PfaEdge& e : edges[static_cast<size_t>(s)]) {
      require(e.next_state >= 0 && e.next_state < n_states,
              "PfaSpec: edge target out of range");
      require(e.token >= 0 && e.token < alphabet_size,
              "PfaSpec: emitted token out of range");
      require(e.prob > 0.0, "PfaSpec: nonpositive edge probability");
      total += e.prob;
      if (!seen[static_cast<size_t>(e.next_state)]) {
        seen[static_cast<size_t>(e.next_state)] = true;
        frontier.push(e.next_state);
      }
    }
    require(std::abs(total - 1.0) < 1e-12,
            "PfaSpec: outgoing probabilities must sum to 1");
  }
  require(reached == n_states, "PfaSpec: unreachable state");
}

namespace {

int sample_range(Rng& rng, const IntRange& r) {
  require(r.lo <= r.hi && r.lo >= 0, "IntRange: empty range");
  return r.lo + rng.uniform_int(r.hi - r.lo + 1);
}

}  // namespace

PfaSpec gen_pfa(Rng& rng, const PfaConfig& cfg) {
  const int kMaxAttempts = 64;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    PfaSpec pfa;
    pfa.n_states = sample_range(rng, cfg.n_states);
    pfa.alphabet_size = cfg.alphabet_size;
    pfa.separator = cfg.alphabet_size;
    pfa.start_state = 0;
    pfa.edges.resize(static_cast<size_t>(pfa.n_states));
    for (int s = 0; s < pfa.n_states; ++s) {
      int n_edges = sample_range(rng, cfg.edges_per_state);
      std::set<std::pair<int, int>> used;
      auto& out = pfa.edges[static_cast<size_t>(s)];
      while (static_cast<int>(out.size()) < n_edges) {
        int next = rng.uniform_int(pfa.n_states);
        int token = rng.uniform_int(pfa.alphabet_size);
        if (!used.insert({next, token}).second) continue;
        out.push_back(PfaEdge{next, token, 0.0});
      }
      // symmetric Dirichlet(1) over the outgoing edges
      double total = 0.0;
      for (PfaEdge& e : out) {
        e.prob = -std::log(1.0 - rng.uniform());
        total += e.prob;
      }
      for (PfaEdge& e : out) e.prob /= total;
    }
    // connectivity check; resample the whole automaton on failure
    std::vector<bool> seen(static_cast<size_t>(pfa.n_states), false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    int reached = 0;
    while (!frontier.empty()) {
      int s = frontier.front();
      frontier.pop();
      ++reached;
      for (const PfaEdge& e : pfa.edges[static_cast<size_t>(s)])
        if (!seen[static_cast<size_t>(e.next_state)]) {
          seen[static_cast<size_t>(e.next_state)] = true;
          frontier.push(e.next_state);
        }
    }
    if (reached == pfa.n_states) {
      pfa.validate();
      return pfa;
    }
  }
  throw ContractViolation("gen_pfa: connectivity retry limit exceeded");
}

std::vector<PfaSpec> gen_pfa_pool(Rng& rng, int count, const PfaConfig& cfg) {
  std::vector<PfaSpec> pool;
  pool.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) pool.push_back(gen_pfa(rng, cfg));
  return pool;
}

IclSequence sample_icl_sequence(const PfaSpec& pfa, Rng& rng,
                                const IclConfig& cfg, int pfa_index) {
  pfa.validate();
  IclSequence seq;
  seq.pfa_index = pfa_index;
  int n_strings = sample_range(rng, cfg.strings_per_sequence);
  require(n_strings >= 1, "sample_icl_sequence: need at least one string");
  for (int s = 0; s < n_strings; ++s) {
    if (s > 0) seq.tokens.push_back(pfa.separator);
    int len = sample_range(rng, cfg.string_length);
    int begin = static_cast<int>(seq.tokens.size());
    int state = pfa.start_state;
    for (int i = 0; i < len; ++i) {
      const auto& out = pfa.edges[static_cast<size_t>(state)];
      double u = rng.uniform();
      double acc = 0.0;
      const PfaEdge* chosen = &out.back();
      for (const PfaEdge& e : out) {
        acc += e.prob;
        if (u < acc) {
          chosen = &e;
          break;
        }
      }
      seq.tokens.push_back(chosen->token);
      state = chosen->next_state;
    }
    seq.string_spans.emplace_back(begin, static_cast<int>(seq.tokens.size()));
  }
  return seq;
}

Vector exact_next_token_distribution(const PfaSpec& pfa,
                                     std::span<const int> prefix) {
  pfa.validate();
  Vector posterior = Vector::Zero(pfa.n_states);
  posterior(pfa.start_state) = 1.0;
  for (int token : prefix) {
    require(token >= 0 && token < pfa.alphabet_size,
            "exact_next_token_distribution: prefix token out of alphabet");
    Vector next = Vector::Zero(pfa.n_states);
    for (int s = 0; s < pfa.n_states; ++s) {
      if (posterior(s) == 0.0) continue;
      for (const PfaEdge& e : pfa.edges[static_cast<size_t>(s)])
        if (e.token == token) next(e.next_state) += posterior(s) * e.prob;
    }
    double mass = next.sum();
    if (mass <= 0.0)
      throw ContractViolation(
          "exact_next_token_distribution: prefix has no support");
    posterior = next / mass;
  }
  Vector dist = Vector::Zero(pfa.alphabet_size);
  for (int s = 0; s < pfa.n_states; ++s) {
    if (posterior(s) == 0.0) continue;
    for (const PfaEdge& e : pfa.edges[static_cast<size_t>(s)])
      dist(e.token) += posterior(s) * e.prob;
  }
  return dist;
}

// ---------------------------------------------------------------------------
// induction
// ---------------------------------------------------------------------------

InductionSample make_induction_sample(const std::vector<int>& sigma,
                                      int vocab_size, int length, Rng& rng) {
  require(vocab_size >= 2, "make_induction_sample: vocabulary too small");
  require(length >= 2, "make_induction_sample: sequence too short");
  require(static_cast<int>(sigma.size()) == vocab_size,
          "make_induction_sample: sigma size mismatch");
  std::vector<int> support;
  for (int a = 0; a < vocab_size; ++a)
    if (sigma[static_cast<size_t>(a)] >= 0) {
      require(sigma[static_cast<size_t>(a)] < vocab_size,
              "make_induction_sample: sigma target out of vocabulary");
      support.push_back(a);
    }
  require(!support.empty(), "make_induction_sample: empty support");

  InductionSample sample;
  sample.sigma = sigma;
  std::vector<int> seen_count(static_cast<size_t>(vocab_size), 0);
  int current = support[static_cast<size_t>(
      rng.uniform_int(static_cast<int>(support.size())))];
  while (static_cast<int>(sample.tokens.size()) < length) {
    int pos = static_cast<int>(sample.tokens.size());
    sample.tokens.push_back(current);
    if (sigma[static_cast<size_t>(current)] >= 0) {
      if (seen_count[static_cast<size_t>(current)] > 0 && pos + 1 < length) {
        sample.query_positions.push_back(pos);
        sample.labels.push_back(sigma[static_cast<size_t>(current)]);
      }
      ++seen_count[static_cast<size_t>(current)];
      current = sigma[static_cast<size_t>(current)];
    } else {
      ++seen_count[static_cast<size_t>(current)];
      current = support[static_cast<size_t>(
          rng.uniform_int(static_cast<int>(support.size())))];
    }
  }
  return sample;
}

InductionSample gen_induction(Rng& rng, int vocab_size, int length) {
  require(vocab_size >= 4, "gen_induction: vocabulary must have >= 4 tokens");
  require(length >= 8, "gen_induction: length must be >= 8");
  int half = vocab_size / 2;
  // random bijection: prompt i -> answer half + perm[i]
  std::vector<int> perm(static_cast<size_t>(half));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = half - 1; i > 0; --i)
    std::swap(perm[static_cast<size_t>(i)],
              perm[static_cast<size_t>(rng.uniform_int(i + 1))]);
  std::vector<int> sigma(static_cast<size_t>(vocab_size), -1);
  for (int a = 0; a < half; ++a)
    sigma[static_cast<size_t>(a)] = half + perm[static_cast<size_t>(a)];
  return make_induction_sample(sigma, vocab_size, length, rng);
}

// ---------------------------------------------------------------------------
// dumps
// ---------------------------------------------------------------------------

namespace {

void write_double(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace

void write_pfa(std::ostream& os, const PfaSpec& pfa) {
  os << "pfa " << pfa.n_states << " " << pfa.alphabet_size << " "
     << pfa.separator << " " << pfa.start_state << "\n";
  for (int s = 0; s < pfa.n_states; ++s) {
    const auto& out = pfa.edges[static_cast<size_t>(s)];
    os << "state " << s << " " << out.size();
    for (const PfaEdge& e : out) {
      os << " " << e.next_state << " " << e.token << " ";
      write_double(os, e.prob);
    }
    os << "\n";
  }
}

PfaSpec read_pfa(std::istream& is) {
  std::string tag;
  PfaSpec pfa;
  is >> tag >> pfa.n_states >> pfa.alphabet_size >> pfa.separator >>
      pfa.start_state;
  require(tag == "pfa" && is.good(), "read_pfa: malformed header");
  pfa.edges.resize(static_cast<size_t>(pfa.n_states));
  for (int s = 0; s < pfa.n_states; ++s) {
    int id = 0;
    size_t count = 0;
    is >> tag >> id >> count;
    require(tag == "state" && id == s && is.good(), "read_pfa: malformed state");
    auto& out = pfa.edges[static_cast<size_t>(s)];
    out.resize(count);
    for (PfaEdge& e : out) is >> e.next_state >> e.token >> e.prob;
  }
  require(is.good(), "read_pfa: truncated record");
  pfa.validate();
  return pfa;
}

void write_icl_dataset(std::ostream& os,
                       const std::vector<IclSequence>& sequences,
                       const std::vector<PfaSpec>& pool) {
  os << "mosaic-dataset v1\nkind icl\npfas " << pool.size() << "\n";
  for (const PfaSpec& pfa : pool) write_pfa(os, pfa);
  os << "count " << sequences.size() << "\n";
  for (const IclSequence& s : sequences) {
    os << "seq " << s.pfa_index << " " << s.tokens.size();
    for (int t : s.tokens) os << " " << t;
    os << "\n";
  }
}

void write_moon_dataset(std::ostream& os,
                        const std::vector<MoonSequence>& sequences) {
  os << "mosaic-dataset v1\nkind moons\nlength " << kMoonSequenceLength
     << "\ncount " << sequences.size() << "\n";
  for (const MoonSequence& s : sequences) {
    os << "system " << s.system.periods.p1 << " " << s.system.periods.p2
       << " " << s.system.periods.p3;
    for (double phi : s.system.phases) {
      os << " ";
      write_double(os, phi);
    }
    os << "\n";
    for (Eigen::Index t = 0; t < s.observations.rows(); ++t) {
      os << "obs";
      for (int k = 0; k < 3; ++k) {
        os << " ";
        write_double(os, s.observations(t, k).real());
        os << ":";
        write_double(os, s.observations(t, k).imag());
      }
      os << "\n";
    }
  }
}

void write_induction_dataset(std::ostream& os,
                             const std::vector<InductionSample>& samples,
                             int vocab_size) {
  os << "mosaic-dataset v1\nkind induction\nvocab " << vocab_size
     << "\ncount " << samples.size() << "\n";
  for (const InductionSample& s : samples) {
    os << "sigma";
    for (int v : s.sigma) os << " " << v;
    os << "\nsample " << s.tokens.size();
    for (int t : s.tokens) os << " " << t;
    os << "\nqueries " << s.query_positions.size();
    for (size_t i = 0; i < s.query_positions.size(); ++i)
      os << " " << s.query_positions[i] << ":" << s.labels[i];
    os << "\n";
  }
}

}  // namespace mosaic
