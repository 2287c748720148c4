#pragma once

#include "mosaic/datasets.hpp"
#include "mosaic/lm.hpp"
#include "mosaic/moons.hpp"
#include "mosaic/tape.hpp"

#include <span>

namespace mosaic {

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

// Mean over positions of min(|z - x|^2, clip), the modulus squared summed
// over coordinates. Row r of predictions is z_{r+1}, aligned with targets
// row r = x_{r+2}; the first row (the empty-memory output z_1) is excluded
// from the mean.
Var clipped_complex_mse(CVar predictions, CVar targets, double clip);

// Forward + loss for one moons sequence.
Var moons_sequence_loss(Tape& t, const MoonsModel& model,
                        const ComplexDense& x, double clip);

// Token-prediction loss: logits row r scores tokens[r + 1].
Var next_token_loss(Var logits, std::span<const int> tokens);

// ---------------------------------------------------------------------------
// optimizer and schedule
// ---------------------------------------------------------------------------

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

struct OptimizerState {
  struct Slot {
    Matrix m, v;
  };
  std::vector<Slot> slots;
  long long step = 0;

  void init(std::span<Parameter* const> params);
};

// One decoupled-weight-decay update with bias-corrected moments. Throws
// DivergenceError naming the parameter on a non-finite gradient.
void adamw_step(std::span<Parameter* const> params, OptimizerState& state,
                const AdamWConfig& cfg, double lr);

struct ScheduleSpec {
  double peak_lr = 1e-3;
  double min_lr = 1e-4;
  int warmup = 100;
  int total = 1000;

  void validate() const;
};

// Linear ramp 0 -> peak over the warm-up, then cosine to min_lr at `total`;
// clamps to min_lr beyond.
double lr_at(const ScheduleSpec& schedule, int step);

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

class TrainTask {
 public:
  virtual ~TrainTask() = default;
  virtual Var batch_loss(Tape& t, Rng& data_rng, Rng* dropout_rng) = 0;
  virtual Var validation_loss(Tape& t, Rng& data_rng) = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual void project() {}
};

struct TrainConfig {
  int iterations = 1000;
  ScheduleSpec schedule;
  AdamWConfig optimizer;
  int val_every = 100;      // 0 disables validation
  int snapshot_every = 50;  // last-good checkpoint cadence
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<std::pair<int, double>> val_loss;  // (iteration, loss)
  double wall_seconds = 0.0;
  bool diverged = false;
  int completed_iterations = 0;
};

// Deterministic given (task data, config): fixed batch order, fixed
// reduction order, seed-derived streams. On divergence the parameters are
// restored to the last snapshot and the report is marked.
TrainReport train(TrainTask& task, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// objectives
// ---------------------------------------------------------------------------

struct MoonsObjectiveConfig {
  int batch = 2;
  double clip = 3.0;
  int sequence_length = kMoonSequenceLength;
  int validation_sequences = 4;
};

// Batches of freshly generated sequences with period triples drawn from
// the split pools: training from the train pool, validation from the
// validation pool.
class MoonsObjective : public TrainTask {
 public:
  MoonsObjective(MoonsModel& model, MoonsObjectiveConfig cfg);

  Var batch_loss(Tape& t, Rng& data_rng, Rng* dropout_rng) override;
  Var validation_loss(Tape& t, Rng& data_rng) override;
  std::vector<Parameter*> parameters() override { return model_.parameters(); }

 private:
  Var sequence_batch_loss(Tape& t, Rng& rng, Split split, int count);

  MoonsModel& model_;
  MoonsObjectiveConfig cfg_;
};

// Next-token objective over fixed pools of token sequences.
class LmObjective : public TrainTask {
 public:
  LmObjective(SequenceModel& model, std::vector<std::vector<int>> train_set,
              std::vector<std::vector<int>> val_set, int batch);

  Var batch_loss(Tape& t, Rng& data_rng, Rng* dropout_rng) override;
  Var validation_loss(Tape& t, Rng& data_rng) override;
  std::vector<Parameter*> parameters() override { return model_.parameters(); }
  void project() override { model_.project_parameters(); }

 private:
  Var pool_loss(Tape& t, const std::vector<std::vector<int>>& pool, Rng& rng,
                int count, Rng* dropout_rng);

  SequenceModel& model_;
  std::vector<std::vector<int>> train_set_, val_set_;
  int batch_;
};

}  // namespace mosaic
