#pragma once

#include "mosaic/common.hpp"
#include "mosaic/complex_ops.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace mosaic {

// ---------------------------------------------------------------------------
// three moons
// ---------------------------------------------------------------------------

inline constexpr int kMoonSequenceLength = 800;
// 800 observations must contain at least three full joint periods.
inline constexpr int kMaxMoonLcm = kMoonSequenceLength / 3;

enum class Split { kTrain, kValidation };

struct MoonTriple {
  int p1 = 0, p2 = 0, p3 = 0;

  long lcm() const;
  bool operator==(const MoonTriple&) const = default;
};

struct MoonSystem {
  MoonTriple periods;
  std::array<double, 3> phases{};  // initial angles in [0, 2pi)
};

struct MoonSequence {
  ComplexDense observations;  // kMoonSequenceLength x 3, unit modulus
  MoonSystem system;
};

// Fixed enumerable pool of admissible period triples for one split. The two
// splits partition the same deterministic enumeration and never share a
// triple.
const std::vector<MoonTriple>& moon_triple_pool(Split split);

bool moon_triple_admissible(const MoonTriple& t);

// Draws a triple from the split's pool plus uniform random phases.
MoonSystem gen_moon_system(Rng& rng, Split split);

// n distinct triples from the split's pool; throws when the pool is
// exhausted.
std::vector<MoonTriple> draw_distinct_triples(Rng& rng, Split split, int n);

MoonSystem make_moon_system(const MoonTriple& triple, Rng& rng);

// x_{t,k} = exp(i (phi_k + 2 pi t / p_k)), t = 1..800.
MoonSequence gen_moon_sequence(const MoonSystem& system);

// ---------------------------------------------------------------------------
// probabilistic finite automata
// ---------------------------------------------------------------------------

struct PfaEdge {
  int next_state = 0;
  int token = 0;
  double prob = 0.0;

  bool operator==(const PfaEdge&) const = default;
};

struct PfaSpec {
  int n_states = 0;
  int alphabet_size = 0;  // emitted tokens are 0..alphabet_size-1
  int separator = 0;      // token id used between strings, = alphabet_size
  int start_state = 0;
  std::vector<std::vector<PfaEdge>> edges;  // outgoing, per state

  void validate() const;
  bool operator==(const PfaSpec&) const = default;
};

struct IntRange {
  int lo = 0, hi = 0;  // inclusive
};

struct PfaConfig {
  IntRange n_states{4, 12};
  int alphabet_size = 18;
  IntRange edges_per_state{2, 4};
};

PfaSpec gen_pfa(Rng& rng, const PfaConfig& cfg);
std::vector<PfaSpec> gen_pfa_pool(Rng& rng, int count, const PfaConfig& cfg);

// ---------------------------------------------------------------------------
// in-context-learning sequences
// ---------------------------------------------------------------------------

struct IclConfig {
  IntRange strings_per_sequence{10, 20};
  IntRange string_length{1, 10};
};

struct IclSequence {
  std::vector<int> tokens;  // strings joined by the separator token
  std::vector<std::pair<int, int>> string_spans;  // [begin, end) per string
  int pfa_index = -1;  // position in the generating pool
};

IclSequence sample_icl_sequence(const PfaSpec& pfa, Rng& rng,
                                const IclConfig& cfg, int pfa_index = -1);

// Exact conditional next-token distribution over the alphabet given the
// token prefix of the current string: forward-algorithm posterior over
// states pushed through one transition. Throws on a prefix no state path
// can emit.
Vector exact_next_token_distribution(const PfaSpec& pfa,
                                     std::span<const int> prefix);

// ---------------------------------------------------------------------------
// induction task
// ---------------------------------------------------------------------------

struct InductionSample {
  std::vector<int> tokens;
  std::vector<int> query_positions;  // second-and-later support occurrences
  std::vector<int> labels;           // successor of the queried token
  std::vector<int> sigma;            // successor map, -1 outside the support
};

// Sequences built by chaining an explicit successor map: every occurrence
// of a support token a is followed by sigma[a]; outside the support the
// next token starts a fresh chain at a random support token.
InductionSample make_induction_sample(const std::vector<int>& sigma,
                                      int vocab_size, int length, Rng& rng);

// Fresh random successor map per sample: a bijection from the lower half of
// the vocabulary (prompts) onto the upper half (answers), so labels are
// only recoverable by context lookup.
InductionSample gen_induction(Rng& rng, int vocab_size, int length);

// ---------------------------------------------------------------------------
// dataset dumps (self-describing text records)
// ---------------------------------------------------------------------------

void write_pfa(std::ostream& os, const PfaSpec& pfa);
PfaSpec read_pfa(std::istream& is);

void write_icl_dataset(std::ostream& os,
                       const std::vector<IclSequence>& sequences,
                       const std::vector<PfaSpec>& pool);
void write_moon_dataset(std::ostream& os,
                        const std::vector<MoonSequence>& sequences);
void write_induction_dataset(std::ostream& os,
                             const std::vector<InductionSample>& samples,
                             int vocab_size);

}  // namespace mosaic
