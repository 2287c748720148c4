#pragma once

#include "mosaic/datasets.hpp"
#include "mosaic/lm.hpp"
#include "mosaic/memory_units.hpp"
#include "mosaic/moons.hpp"

#include <array>
#include <span>

namespace mosaic {

// ---------------------------------------------------------------------------
// autoregressive rollouts
// ---------------------------------------------------------------------------

// Feeds the context, then loops `horizon` predictions back as inputs.
std::vector<Eigen::Vector3cd> rollout(const MoonsModel& model,
                                      const ComplexDense& context,
                                      int horizon);

// Token model rollout with argmax feedback.
std::vector<int> rollout(const SequenceModel& model,
                         std::span<const int> context, int horizon);

// ---------------------------------------------------------------------------
// error-versus-context curves
// ---------------------------------------------------------------------------

struct ErrorCurve {
  std::vector<int> context_lengths;  // T = 1..max_context
  std::vector<double> mean_error;    // summed |zhat - x| over coordinates,
                                     // averaged over horizon and sequences
  MoonTriple periods;                // drop markers; joint marker at lcm()
  int horizon = 25;
};

struct MoonsEvalConfig {
  int n_sequences = 512;
  int horizon = 25;
  int max_context = 0;  // 0: lcm + horizon, capped by the sequence length
};

// Per-step error of `horizon`-step rollouts from every context length,
// averaged over `n_sequences` random-phase sequences sharing the triple.
// The rollout branch is rolled back after each context length, so one pass
// over a sequence serves the whole curve.
template <typename Predictor>
void accumulate_error_curve(Predictor& pred, const MoonSequence& seq,
                            int horizon, int max_context,
                            std::span<double> sums) {
  pred.reset();
  for (int T = 1; T <= max_context; ++T) {
    Eigen::Vector3cd xt = seq.observations.row(T - 1).transpose();
    Eigen::Vector3cd zhat = pred.step(xt);
    auto mark = pred.save();
    double err = 0.0;
    for (int s = 1; s <= horizon; ++s) {
      Eigen::Vector3cd truth = seq.observations.row(T + s - 1).transpose();
      err += (zhat - truth).cwiseAbs().sum();
      if (s < horizon) zhat = pred.step(zhat);
    }
    pred.restore(mark);
    sums[static_cast<size_t>(T - 1)] += err / horizon;
  }
}

ErrorCurve moons_error_curve(const MoonsModel& model, const MoonTriple& triple,
                             const MoonsEvalConfig& cfg, Rng& rng);

// Region statistics used by the disentanglement-transition criteria.
struct TransitionStats {
  std::array<double, 4> segment_mean{};   // [1,p1), (p1,p2), (p2,p3), (p3,end]
  std::array<double, 3> boundary_ratio{}; // mean(p..p+w] / mean[p-w..p)
  double lcm_ratio = 0.0;                 // same ratio at the joint period
  double pre_p1_mean = 0.0;
  double post_pmax_mean = 0.0;            // T > p3
};

TransitionStats transition_stats(const ErrorCurve& curve, int window = 3);

// ---------------------------------------------------------------------------
// in-context-learning scores
// ---------------------------------------------------------------------------

struct IclScore {
  double accuracy = 0.0;  // last-token argmax vs the exact argmax set
  double tvd = 0.0;       // vs the exact distribution, separator excluded
  int count = 0;
};

// Predicts the last token of each sequence; the exact distribution comes
// from the forward algorithm on the final string's prefix.
IclScore icl_eval(const SequenceModel& model,
                  const std::vector<IclSequence>& sequences,
                  const std::vector<PfaSpec>& pool);

// Accuracy and TVD against an explicit distribution, exposed for the
// metric sanity anchors (oracle accuracy 1, oracle TVD 0).
struct IclItemScore {
  bool correct = false;
  double tvd = 0.0;
};
IclItemScore icl_item_score(const Vector& logits, const Vector& exact,
                            int separator);

// ---------------------------------------------------------------------------
// induction accuracy
// ---------------------------------------------------------------------------

double induction_eval(const SequenceModel& model,
                      const std::vector<InductionSample>& samples);

// ---------------------------------------------------------------------------
// attention profiles
// ---------------------------------------------------------------------------

struct AttentionProfile {
  Matrix head_weights;  // one row per head: last-token attention weights
  Vector mean_weights;  // all-head mean
};

// Unit-level profile: the last query's attention over its stored pairs,
// averaged over the input sequences (rows of each matrix are inputs).
AttentionProfile attention_profile(std::span<const ContextualUnitParams> heads,
                                   const std::vector<Matrix>& inputs);

// Model-level profile of one block, averaged over token sequences of equal
// length.
AttentionProfile attention_profile(const SequenceModel& model,
                                   const std::vector<std::vector<int>>& seqs,
                                   int block);

// Number of positions holding the top `mass` fraction of the profile.
int top_mass_bandwidth(const Vector& profile, double mass = 0.5);

// Mean over inputs of the per-sequence bandwidth of one unit's last-token
// attention. Position-averaging first would wash out the lambda = 0
// profiles, whose single spike lands at a different position per sequence.
double mean_profile_bandwidth(const ContextualUnitParams& unit,
                              const std::vector<Matrix>& inputs,
                              double mass = 0.5);

}  // namespace mosaic
