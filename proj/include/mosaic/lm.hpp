#pragma once

#include "mosaic/memory_units.hpp"
#include "mosaic/tape.hpp"

#include <memory>
#include <span>
#include <string>

namespace mosaic {

struct LmConfig {
  int vocab = 19;
  int d_model = 64;
  int n_heads = 2;
  int n_blocks = 1;
  int n_persistent_slots = 0;  // 0: derive for parameter parity
  int context_limit = 256;     // transformer position table size
  double dropout = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
  int head_dim() const { return d_model / n_heads; }
};

// Per-head attention rows recorded during one forward pass, for
// attention-profile evaluation.
struct AttentionCapture {
  int block = 0;                     // which block to record
  std::vector<Matrix> head_weights;  // contextual / self-attention softmax
};

class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  // Next-token logits, one row per input position. dropout_rng enables the
  // configured dropout (training); pass nullptr when evaluating.
  virtual Var forward(Tape& t, std::span<const int> tokens,
                      Rng* dropout_rng = nullptr,
                      AttentionCapture* capture = nullptr) const = 0;

  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::vector<const Parameter*> parameters() const = 0;

  // Re-establish parameter constraints after an optimizer step.
  virtual void project_parameters() {}

  virtual const LmConfig& config() const = 0;
  virtual std::string family() const = 0;
};

// Token-embedding stack of blocks, each a contextual memory layer followed
// by a persistent memory layer, pre-norm with residuals. No positional
// parameters anywhere.
class MosaicLM : public SequenceModel {
 public:
  explicit MosaicLM(const LmConfig& cfg);

  Var forward(Tape& t, std::span<const int> tokens, Rng* dropout_rng,
              AttentionCapture* capture) const override;
  std::vector<Parameter*> parameters() override;
  std::vector<const Parameter*> parameters() const override;
  void project_parameters() override;  // stored keys back to unit norm
  const LmConfig& config() const override { return cfg_; }
  std::string family() const override { return "mosaic"; }

  int persistent_slots() const { return slots_; }
  // Constrained view of one contextual head (lambda/beta materialized).
  ContextualUnitParams unit_params(int block, int head) const;

 private:
  struct CtxHead {
    Parameter w_phi, w_psi, lambda_phi_raw, lambda_psi_raw, beta_raw;
  };
  struct PerHead {
    Parameter w_phi, keys, values, beta_raw;
  };
  struct Block {
    Parameter ln1_g, ln1_b, ln2_g, ln2_b;
    std::vector<CtxHead> ctx;
    std::vector<PerHead> per;
    Parameter ctx_mix, per_mix;
  };

  LmConfig cfg_;
  int slots_;
  Parameter tok_emb_;
  std::vector<Block> blocks_;
  Parameter final_g_, final_b_, readout_;
};

// Pre-norm GPT2-style decoder: learned absolute positions, masked
// multi-head self-attention with separate query/key/value projections, and
// a GELU feed-forward network.
class TransformerLM : public SequenceModel {
 public:
  explicit TransformerLM(const LmConfig& cfg);

  Var forward(Tape& t, std::span<const int> tokens, Rng* dropout_rng,
              AttentionCapture* capture) const override;
  std::vector<Parameter*> parameters() override;
  std::vector<const Parameter*> parameters() const override;
  const LmConfig& config() const override { return cfg_; }
  std::string family() const override { return "transformer"; }

 private:
  struct Block {
    Parameter ln1_g, ln1_b, ln2_g, ln2_b;
    Parameter wq, bq, wk, bk, wv, bv, wo, bo;
    Parameter ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  };

  LmConfig cfg_;
  Parameter tok_emb_, pos_emb_;
  std::vector<Block> blocks_;
  Parameter final_g_, final_b_, readout_;
};

long long transformer_param_count(const LmConfig& cfg);
long long mosaic_param_count(const LmConfig& cfg, int slots);

// Slot count giving the mosaic the transformer's total parameter count
// (position table included) as closely as the slot granularity allows.
int solve_persistent_slots(const LmConfig& cfg);

std::unique_ptr<SequenceModel> build_lm(const std::string& family,
                                        const LmConfig& cfg);

}  // namespace mosaic
