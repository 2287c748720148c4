#include "mosaic/training.hpp"

#include "mosaic/checkpoint.hpp"

#include <chrono>
#include <cmath>

namespace mosaic {

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

Var clipped_complex_mse(CVar predictions, CVar targets, double clip) {
  require(clip > 0.0, "clipped_complex_mse: clip must be positive");
  require(predictions.re.rows() == targets.re.rows() &&
              predictions.re.cols() == targets.re.cols(),
          "clipped_complex_mse: prediction/target length mismatch");
  int n = static_cast<int>(predictions.re.rows());
  require(n >= 2, "clipped_complex_mse: need a scored position beyond T=1");
  CVar d = csub(predictions, targets);
  Var sq = add(hadamard(d.re, d.re), hadamard(d.im, d.im));
  Tape& t = sq.tape();
  // row sums over coordinates
  Var per_pos = matmul(sq, t.constant(Matrix::Ones(sq.cols(), 1)));
  Var scored = slice_rows(per_pos, 1, n - 1);  // drop the empty-memory row
  return mean_all(clip_upper(scored, clip));
}

Var moons_sequence_loss(Tape& t, const MoonsModel& model,
                        const ComplexDense& x, double clip) {
  int D = static_cast<int>(x.rows());
  require(D >= 3, "moons_sequence_loss: sequence too short to score");
  CVar z = model.forward(t, x);
  CVar z_scored{slice_rows(z.re, 0, D - 1), slice_rows(z.im, 0, D - 1)};
  ComplexDense target_rows = x.bottomRows(D - 1);
  CVar targets{t.constant(target_rows.real()), t.constant(target_rows.imag())};
  return clipped_complex_mse(z_scored, targets, clip);
}

Var next_token_loss(Var logits, std::span<const int> tokens) {
  require(static_cast<int>(tokens.size()) == logits.rows(),
          "next_token_loss: token/logit length mismatch");
  require(tokens.size() >= 2, "next_token_loss: nothing to predict");
  std::vector<int> targets(tokens.begin() + 1, tokens.end());
  return softmax_cross_entropy(logits, targets, 0,
                               static_cast<int>(targets.size()));
}

// ---------------------------------------------------------------------------
// optimizer and schedule
// ---------------------------------------------------------------------------

void OptimizerState::init(std::span<Parameter* const> params) {
  slots.clear();
  slots.reserve(params.size());
  for (const Parameter* p : params)
    slots.push_back(Slot{Matrix::Zero(p->value.rows(), p->value.cols()),
                         Matrix::Zero(p->value.rows(), p->value.cols())});
  step = 0;
}

void adamw_step(std::span<Parameter* const> params, OptimizerState& state,
                const AdamWConfig& cfg, double lr) {
  require(state.slots.size() == params.size(),
          "adamw_step: optimizer state does not match parameters");
  ++state.step;
  double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.grad.allFinite())
      throw DivergenceError("adamw_step: non-finite gradient in " + p.name);
    OptimizerState::Slot& s = state.slots[i];
    require(s.m.rows() == p.value.rows() && s.m.cols() == p.value.cols(),
            "adamw_step: moment shape mismatch for " + p.name);
    s.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * p.grad;
    s.v = cfg.beta2 * s.v +
          (1.0 - cfg.beta2) * p.grad.cwiseProduct(p.grad);
    if (cfg.weight_decay > 0.0) p.value *= (1.0 - lr * cfg.weight_decay);
    Matrix denom = (s.v / c2).cwiseSqrt();
    denom.array() += cfg.eps;
    p.value -= lr * (s.m / c1).cwiseQuotient(denom);
  }
}

void ScheduleSpec::validate() const {
  require(peak_lr > 0.0 && min_lr > 0.0 && min_lr <= peak_lr,
          "ScheduleSpec: need 0 < min_lr <= peak_lr");
  require(warmup >= 0 && total >= warmup,
          "ScheduleSpec: warmup must not exceed total");
}

double lr_at(const ScheduleSpec& schedule, int step) {
  schedule.validate();
  require(step >= 0, "lr_at: negative step");
  if (step <= schedule.warmup && schedule.warmup > 0)
    return schedule.peak_lr * static_cast<double>(step) / schedule.warmup;
  if (step >= schedule.total) return schedule.min_lr;
  double span = static_cast<double>(schedule.total - schedule.warmup);
  double t = static_cast<double>(step - schedule.warmup) / span;
  return schedule.min_lr +
         (schedule.peak_lr - schedule.min_lr) * 0.5 * (1.0 + std::cos(M_PI * t));
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

TrainReport train(TrainTask& task, const TrainConfig& cfg) {
  cfg.schedule.validate();
  require(cfg.iterations >= 0, "train: negative iteration count");
  auto t0 = std::chrono::steady_clock::now();

  TrainReport report;
  auto params = task.parameters();
  std::span<Parameter* const> ps{params.data(), params.size()};
  OptimizerState state;
  state.init(ps);

  Rng data_rng(derive_seed(cfg.seed, "train.data"));
  Rng dropout_rng(derive_seed(cfg.seed, "train.dropout"));
  Vector snapshot = flatten_values({params.data(), params.size()});

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    for (Parameter* p : params) p->zero_grad();
    Tape t;
    bool bad = false;
    double loss_value = 0.0;
    try {
      Var loss = task.batch_loss(t, data_rng, &dropout_rng);
      loss_value = loss.scalar();
      if (!std::isfinite(loss_value)) {
        bad = true;
      } else {
        t.backward(loss);
        adamw_step(ps, state, cfg.optimizer, lr_at(cfg.schedule, iter));
        task.project();
      }
    } catch (const DivergenceError&) {
      bad = true;
    }
    if (bad) {
      set_values(ps, snapshot);
      report.diverged = true;
      break;
    }
    report.train_loss.push_back(loss_value);
    report.completed_iterations = iter;
    if (cfg.snapshot_every > 0 && iter % cfg.snapshot_every == 0)
      snapshot = flatten_values({params.data(), params.size()});
    if (cfg.val_every > 0 && iter % cfg.val_every == 0) {
      Tape tv(false);
      Rng val_rng(derive_seed(cfg.seed, "train.val." + std::to_string(iter)));
      double v = task.validation_loss(tv, val_rng).scalar();
      report.val_loss.emplace_back(iter, v);
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

// ---------------------------------------------------------------------------
// objectives
// ---------------------------------------------------------------------------

MoonsObjective::MoonsObjective(MoonsModel& model, MoonsObjectiveConfig cfg)
    : model_(model), cfg_(cfg) {
  require(cfg_.batch >= 1, "MoonsObjective: batch must be positive");
  require(cfg_.sequence_length >= 3 &&
              cfg_.sequence_length <= kMoonSequenceLength,
          "MoonsObjective: bad sequence length");
}

Var MoonsObjective::sequence_batch_loss(Tape& t, Rng& rng, Split split,
                                        int count) {
  Var total;
  for (int i = 0; i < count; ++i) {
    MoonSystem sys = gen_moon_system(rng, split);
    ComplexDense x =
        gen_moon_sequence(sys).observations.topRows(cfg_.sequence_length);
    Var loss = moons_sequence_loss(t, model_, x, cfg_.clip);
    total = i == 0 ? loss : add(total, loss);
  }
  return scale(total, 1.0 / count);
}

Var MoonsObjective::batch_loss(Tape& t, Rng& data_rng, Rng*) {
  return sequence_batch_loss(t, data_rng, Split::kTrain, cfg_.batch);
}

Var MoonsObjective::validation_loss(Tape& t, Rng& data_rng) {
  return sequence_batch_loss(t, data_rng, Split::kValidation,
                             cfg_.validation_sequences);
}

LmObjective::LmObjective(SequenceModel& model,
                         std::vector<std::vector<int>> train_set,
                         std::vector<std::vector<int>> val_set, int batch)
    : model_(model),
      train_set_(std::move(train_set)),
      val_set_(std::move(val_set)),
      batch_(batch) {
  require(batch_ >= 1, "LmObjective: batch must be positive");
  require(!train_set_.empty(), "LmObjective: empty training set");
  for (const auto& seq : train_set_)
    require(seq.size() >= 2, "LmObjective: sequence too short");
}

Var LmObjective::pool_loss(Tape& t, const std::vector<std::vector<int>>& pool,
                           Rng& rng, int count, Rng* dropout_rng) {
  Var total;
  for (int i = 0; i < count; ++i) {
    const auto& seq = pool[static_cast<size_t>(
        rng.uniform_int(static_cast<int>(pool.size())))];
    Var logits = model_.forward(t, seq, dropout_rng, nullptr);
    Var loss = next_token_loss(logits, seq);
    total = i == 0 ? loss : add(total, loss);
  }
  return scale(total, 1.0 / count);
}

Var LmObjective::batch_loss(Tape& t, Rng& data_rng, Rng* dropout_rng) {
  return pool_loss(t, train_set_, data_rng, batch_, dropout_rng);
}

Var LmObjective::validation_loss(Tape& t, Rng& data_rng) {
  require(!val_set_.empty(), "LmObjective: empty validation set");
  return pool_loss(t, val_set_, data_rng, batch_, nullptr);
}

}  // namespace mosaic
