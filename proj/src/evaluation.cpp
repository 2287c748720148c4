#include "mosaic/evaluation.hpp"

#include "mosaic/attend.hpp"

#include <cmath>

namespace mosaic {

std::vector<Eigen::Vector3cd> rollout(const MoonsModel& model,
                                      const ComplexDense& context,
                                      int horizon) {
  require(horizon >= 1, "rollout: horizon must be at least 1");
  require(context.rows() >= 1, "rollout: empty context");
  MoonsPredictor pred(model, context.rows() + horizon + 1);
  Eigen::Vector3cd z;
  for (Eigen::Index t = 0; t < context.rows(); ++t)
    z = pred.step(context.row(t).transpose());
  std::vector<Eigen::Vector3cd> out;
  out.push_back(z);
  for (int s = 1; s < horizon; ++s) out.push_back(pred.step(out.back()));
  return out;
}

std::vector<int> rollout(const SequenceModel& model,
                         std::span<const int> context, int horizon) {
  require(horizon >= 1, "rollout: horizon must be at least 1");
  std::vector<int> tokens(context.begin(), context.end());
  std::vector<int> out;
  for (int s = 0; s < horizon; ++s) {
    Tape t(false);
    Var logits = model.forward(t, tokens, nullptr, nullptr);
    Eigen::Index best = 0;
    logits.value().row(logits.rows() - 1).maxCoeff(&best);
    out.push_back(static_cast<int>(best));
    tokens.push_back(static_cast<int>(best));
  }
  return out;
}

ErrorCurve moons_error_curve(const MoonsModel& model, const MoonTriple& triple,
                             const MoonsEvalConfig& cfg, Rng& rng) {
  require(cfg.n_sequences >= 1, "moons_error_curve: need sequences");
  require(cfg.horizon >= 1, "moons_error_curve: bad horizon");
  int max_context = cfg.max_context;
  if (max_context == 0)
    max_context = static_cast<int>(triple.lcm()) + cfg.horizon;
  max_context = std::min(max_context, kMoonSequenceLength - cfg.horizon);
  require(max_context >= 1, "moons_error_curve: horizon leaves no context");

  ErrorCurve curve;
  curve.periods = triple;
  curve.horizon = cfg.horizon;
  curve.context_lengths.resize(static_cast<size_t>(max_context));
  for (int T = 1; T <= max_context; ++T)
    curve.context_lengths[static_cast<size_t>(T - 1)] = T;
  std::vector<double> sums(static_cast<size_t>(max_context), 0.0);

  MoonsPredictor pred(model, max_context + cfg.horizon + 2);
  for (int i = 0; i < cfg.n_sequences; ++i) {
    MoonSequence seq = gen_moon_sequence(make_moon_system(triple, rng));
    accumulate_error_curve(pred, seq, cfg.horizon, max_context, sums);
  }
  curve.mean_error.resize(sums.size());
  for (size_t i = 0; i < sums.size(); ++i)
    curve.mean_error[i] = sums[i] / cfg.n_sequences;
  return curve;
}

namespace {

double range_mean(const ErrorCurve& curve, int lo, int hi) {
  // inclusive context-length bounds, clamped to the curve
  lo = std::max(lo, 1);
  hi = std::min(hi, static_cast<int>(curve.mean_error.size()));
  if (lo > hi) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (int T = lo; T <= hi; ++T)
    sum += curve.mean_error[static_cast<size_t>(T - 1)];
  return sum / (hi - lo + 1);
}

}  // namespace

TransitionStats transition_stats(const ErrorCurve& curve, int window) {
  require(window >= 1, "transition_stats: window must be positive");
  const MoonTriple& p = curve.periods;
  int l = static_cast<int>(p.lcm());
  TransitionStats s;
  s.segment_mean[0] = range_mean(curve, 1, p.p1 - 1);
  s.segment_mean[1] = range_mean(curve, p.p1 + 1, p.p2 - 1);
  s.segment_mean[2] = range_mean(curve, p.p2 + 1, p.p3 - 1);
  s.segment_mean[3] = range_mean(
      curve, p.p3 + 1, static_cast<int>(curve.mean_error.size()));
  const int periods[3] = {p.p1, p.p2, p.p3};
  for (int k = 0; k < 3; ++k) {
    double pre = range_mean(curve, periods[k] - window, periods[k] - 1);
    double post = range_mean(curve, periods[k] + 1, periods[k] + window);
    s.boundary_ratio[static_cast<size_t>(k)] = post / pre;
  }
  s.lcm_ratio =
      range_mean(curve, l + 1, l + window) / range_mean(curve, l - window, l - 1);
  s.pre_p1_mean = s.segment_mean[0];
  s.post_pmax_mean = s.segment_mean[3];
  return s;
}

// ---------------------------------------------------------------------------
// ICL scores
// ---------------------------------------------------------------------------

IclItemScore icl_item_score(const Vector& logits, const Vector& exact,
                            int separator) {
  require(separator == exact.size(),
          "icl_item_score: separator must follow the alphabet");
  require(logits.size() == exact.size() + 1,
          "icl_item_score: logits must cover alphabet plus separator");
  IclItemScore item;
  Eigen::Index argmax = 0;
  logits.maxCoeff(&argmax);
  double pmax = exact.maxCoeff();
  item.correct =
      argmax < exact.size() && exact(argmax) >= pmax - 1e-12;

  // model distribution over the alphabet, separator mass excluded
  Vector probs = (logits.array() - logits.maxCoeff()).exp();
  probs /= probs.sum();
  Vector restricted = probs.head(exact.size());
  double mass = restricted.sum();
  if (mass > 0) restricted /= mass;
  item.tvd = 0.5 * (restricted - exact).cwiseAbs().sum();
  return item;
}

IclScore icl_eval(const SequenceModel& model,
                  const std::vector<IclSequence>& sequences,
                  const std::vector<PfaSpec>& pool) {
  IclScore score;
  for (const IclSequence& seq : sequences) {
    require(seq.pfa_index >= 0 &&
                seq.pfa_index < static_cast<int>(pool.size()),
            "icl_eval: sequence does not reference the pool");
    const PfaSpec& pfa = pool[static_cast<size_t>(seq.pfa_index)];
    require(model.config().vocab == pfa.alphabet_size + 1,
            "icl_eval: model vocabulary does not match the alphabet");
    int n = static_cast<int>(seq.tokens.size());
    require(n >= 2, "icl_eval: sequence too short");
    std::span<const int> inputs{seq.tokens.data(),
                                static_cast<size_t>(n - 1)};
    Tape t(false);
    Var logits = model.forward(t, inputs, nullptr, nullptr);
    Vector last = logits.value().row(logits.rows() - 1).transpose();

    const auto& span = seq.string_spans.back();
    require(span.second == n, "icl_eval: sequence must end inside a string");
    std::vector<int> prefix(seq.tokens.begin() + span.first,
                            seq.tokens.end() - 1);
    Vector exact = exact_next_token_distribution(pfa, prefix);
    IclItemScore item = icl_item_score(last, exact, pfa.separator);
    score.accuracy += item.correct ? 1.0 : 0.0;
    score.tvd += item.tvd;
    ++score.count;
  }
  require(score.count > 0, "icl_eval: no sequences");
  score.accuracy /= score.count;
  score.tvd /= score.count;
  return score;
}

double induction_eval(const SequenceModel& model,
                      const std::vector<InductionSample>& samples) {
  long long correct = 0, total = 0;
  for (const InductionSample& s : samples) {
    if (s.query_positions.empty()) continue;
    Tape t(false);
    Var logits = model.forward(t, s.tokens, nullptr, nullptr);
    for (size_t i = 0; i < s.query_positions.size(); ++i) {
      Eigen::Index best = 0;
      logits.value().row(s.query_positions[i]).maxCoeff(&best);
      correct += (static_cast<int>(best) == s.labels[i]) ? 1 : 0;
      ++total;
    }
  }
  require(total > 0, "induction_eval: no query positions");
  return static_cast<double>(correct) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// attention profiles
// ---------------------------------------------------------------------------

AttentionProfile attention_profile(std::span<const ContextualUnitParams> heads,
                                   const std::vector<Matrix>& inputs) {
  require(!heads.empty(), "attention_profile: no heads");
  require(!inputs.empty(), "attention_profile: no inputs");
  Eigen::Index D = inputs.front().rows();
  require(D >= 2, "attention_profile: sequences too short");
  AttentionProfile out;
  out.head_weights = Matrix::Zero(static_cast<Eigen::Index>(heads.size()),
                                  D - 1);
  for (const Matrix& x : inputs) {
    require(x.rows() == D, "attention_profile: unequal sequence lengths");
    for (size_t h = 0; h < heads.size(); ++h) {
      Matrix keys = extract_keys(x, heads[h]);
      RowVector w = attend_weights(keys.row(D - 1), keys.topRows(D - 1),
                                   heads[h].beta);
      out.head_weights.row(static_cast<Eigen::Index>(h)) += w;
    }
  }
  out.head_weights /= static_cast<double>(inputs.size());
  out.mean_weights = out.head_weights.colwise().mean().transpose();
  return out;
}

AttentionProfile attention_profile(const SequenceModel& model,
                                   const std::vector<std::vector<int>>& seqs,
                                   int block) {
  require(!seqs.empty(), "attention_profile: no sequences");
  size_t D = seqs.front().size();
  require(D >= 2, "attention_profile: sequences too short");
  AttentionProfile out;
  int n_heads = model.config().n_heads;
  // a contextual layer's last row attends over the D-1 completed pairs;
  // a transformer's last row also sees itself, so keep D columns there
  bool strict = model.family() == "mosaic";
  Eigen::Index cols = strict ? static_cast<Eigen::Index>(D) - 1
                             : static_cast<Eigen::Index>(D);
  out.head_weights = Matrix::Zero(n_heads, cols);
  for (const auto& seq : seqs) {
    require(seq.size() == D, "attention_profile: unequal sequence lengths");
    AttentionCapture cap;
    cap.block = block;
    Tape t(false);
    model.forward(t, seq, nullptr, &cap);
    require(static_cast<int>(cap.head_weights.size()) == n_heads,
            "attention_profile: capture did not see the requested block");
    for (int h = 0; h < n_heads; ++h)
      out.head_weights.row(h) +=
          cap.head_weights[static_cast<size_t>(h)].row(
              static_cast<Eigen::Index>(D) - 1).head(cols);
  }
  out.head_weights /= static_cast<double>(seqs.size());
  out.mean_weights = out.head_weights.colwise().mean().transpose();
  return out;
}

double mean_profile_bandwidth(const ContextualUnitParams& unit,
                              const std::vector<Matrix>& inputs,
                              double mass) {
  require(!inputs.empty(), "mean_profile_bandwidth: no inputs");
  double total = 0.0;
  for (const Matrix& x : inputs) {
    Eigen::Index D = x.rows();
    require(D >= 2, "mean_profile_bandwidth: sequence too short");
    Matrix keys = extract_keys(x, unit);
    RowVector w =
        attend_weights(keys.row(D - 1), keys.topRows(D - 1), unit.beta);
    total += top_mass_bandwidth(w.transpose(), mass);
  }
  return total / static_cast<double>(inputs.size());
}

int top_mass_bandwidth(const Vector& profile, double mass) {
  require(mass > 0.0 && mass <= 1.0, "top_mass_bandwidth: bad mass");
  require(profile.size() > 0, "top_mass_bandwidth: empty profile");
  std::vector<double> sorted(profile.data(), profile.data() + profile.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double total = profile.sum();
  require(total > 0.0, "top_mass_bandwidth: profile has no mass");
  double acc = 0.0;
  for (size_t i = 0; i < sorted.size(); ++i) {
    acc += sorted[i];
    if (acc >= mass * total) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(sorted.size());
}

}  // namespace mosaic
