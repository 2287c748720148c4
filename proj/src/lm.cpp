#include "mosaic/lm.hpp"

#include <cmath>

namespace mosaic {

void LmConfig::validate() const {
  require(vocab >= 2, "LmConfig: vocabulary too small");
  require(d_model >= 1 && n_heads >= 1 && n_blocks >= 1,
          "LmConfig: dimensions must be positive");
  require(d_model % n_heads == 0,
          "LmConfig: d_model must be divisible by n_heads");
  require(n_persistent_slots >= 0, "LmConfig: negative slot count");
  require(context_limit >= 1, "LmConfig: context_limit must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "LmConfig: dropout out of range");
}

namespace {

constexpr double kLambdaPhiInit = 0.25;
constexpr double kLambdaPsiInit = 0.5;
constexpr double kBetaInit = 1.0;

double inv_sigmoid(double y) { return std::log(y / (1.0 - y)); }
double inv_softplus(double y) { return std::log(std::expm1(y)); }

Matrix randn(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sigma) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = sigma * rng.normal();
  return m;
}

Matrix unit_rows(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m = randn(rng, rows, cols, 1.0);
  for (Eigen::Index i = 0; i < rows; ++i)
    m.row(i) /= std::max(m.row(i).norm(), kNormEps);
  return m;
}

std::string block_name(int b, const std::string& suffix) {
  return "block" + std::to_string(b) + "." + suffix;
}

std::vector<int> to_rows(std::span<const int> tokens) {
  return std::vector<int>(tokens.begin(), tokens.end());
}

Var maybe_dropout(Var x, double rate, Rng* rng) {
  if (rate > 0.0 && rng != nullptr) return dropout(x, rate, *rng);
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// parameter counting
// ---------------------------------------------------------------------------

long long transformer_param_count(const LmConfig& cfg) {
  long long d = cfg.d_model;
  long long per_block = 4 * d          // two layer norms
                        + 4 * d * d + 4 * d  // q,k,v,o with biases
                        + 8 * d * d + 5 * d; // ffn with biases
  return cfg.vocab * d                 // token embedding
         + static_cast<long long>(cfg.context_limit) * d  // positions
         + cfg.n_blocks * per_block + 2 * d               // final norm
         + cfg.vocab * d;                                 // readout
}

long long mosaic_param_count(const LmConfig& cfg, int slots) {
  long long d = cfg.d_model;
  long long h = cfg.n_heads;
  long long per_block = 4 * d                  // two layer norms
                        + 2 * d * d + 3 * h    // contextual heads + scalars
                        + d * d                // contextual mixer
                        + d * d + h            // persistent extractors
                        + 2LL * slots * d      // stored pairs
                        + d * d;               // persistent mixer
  return cfg.vocab * d + cfg.n_blocks * per_block + 2 * d + cfg.vocab * d;
}

int solve_persistent_slots(const LmConfig& cfg) {
  long long target = transformer_param_count(cfg);
  long long base = mosaic_param_count(cfg, 0);
  long long gap = target - base;
  long long denom = 2LL * cfg.d_model * cfg.n_blocks;
  long long slots = (gap + denom / 2) / denom;
  return static_cast<int>(std::max<long long>(1, slots));
}

// ---------------------------------------------------------------------------
// MosaicLM
// ---------------------------------------------------------------------------

MosaicLM::MosaicLM(const LmConfig& cfg)
    : cfg_(cfg),
      slots_(cfg.n_persistent_slots > 0 ? cfg.n_persistent_slots
                                        : solve_persistent_slots(cfg)),
      tok_emb_("embed.tok", Matrix()),
      final_g_("final_ln.gamma", Matrix::Ones(1, cfg.d_model)),
      final_b_("final_ln.beta", Matrix::Zero(1, cfg.d_model)),
      readout_("readout", Matrix()) {
  cfg_.validate();
  Rng rng(derive_seed(cfg.seed, "lm.init"));
  int d = cfg_.d_model, dh = cfg_.head_dim();
  double sigma = 1.0 / std::sqrt(static_cast<double>(d));
  tok_emb_.value = randn(rng, cfg_.vocab, d, sigma);
  tok_emb_.grad = Matrix::Zero(cfg_.vocab, d);
  readout_.value = randn(rng, cfg_.vocab, d, sigma);
  readout_.grad = Matrix::Zero(cfg_.vocab, d);

  for (int b = 0; b < cfg_.n_blocks; ++b) {
    Block blk{
        Parameter(block_name(b, "ln1.gamma"), Matrix::Ones(1, d)),
        Parameter(block_name(b, "ln1.beta"), Matrix::Zero(1, d)),
        Parameter(block_name(b, "ln2.gamma"), Matrix::Ones(1, d)),
        Parameter(block_name(b, "ln2.beta"), Matrix::Zero(1, d)),
        {},
        {},
        Parameter(block_name(b, "ctx.mix"), randn(rng, d, d, sigma)),
        Parameter(block_name(b, "per.mix"), randn(rng, d, d, sigma))};
    for (int h = 0; h < cfg_.n_heads; ++h) {
      std::string base = block_name(b, "ctx" + std::to_string(h));
      blk.ctx.push_back(CtxHead{
          Parameter(base + ".w_phi", randn(rng, dh, d, sigma)),
          Parameter(base + ".w_psi", randn(rng, dh, d, sigma)),
          Parameter(base + ".lambda_phi_raw",
                    Matrix::Constant(1, 1, inv_sigmoid(kLambdaPhiInit))),
          Parameter(base + ".lambda_psi_raw",
                    Matrix::Constant(1, 1, inv_softplus(kLambdaPsiInit))),
          Parameter(base + ".beta_raw",
                    Matrix::Constant(1, 1, inv_softplus(kBetaInit)))});
      std::string pbase = block_name(b, "per" + std::to_string(h));
      blk.per.push_back(PerHead{
          Parameter(pbase + ".w_phi", randn(rng, dh, d, sigma)),
          Parameter(pbase + ".keys", unit_rows(rng, slots_, dh)),
          Parameter(pbase + ".values", randn(rng, slots_, dh, sigma)),
          Parameter(pbase + ".beta_raw",
                    Matrix::Constant(1, 1, inv_softplus(kBetaInit)))});
    }
    blocks_.push_back(std::move(blk));
  }
}

std::vector<Parameter*> MosaicLM::parameters() {
  std::vector<Parameter*> out{&tok_emb_};
  for (Block& b : blocks_) {
    out.push_back(&b.ln1_g);
    out.push_back(&b.ln1_b);
    for (CtxHead& h : b.ctx) {
      out.push_back(&h.w_phi);
      out.push_back(&h.w_psi);
      out.push_back(&h.lambda_phi_raw);
      out.push_back(&h.lambda_psi_raw);
      out.push_back(&h.beta_raw);
    }
    out.push_back(&b.ctx_mix);
    out.push_back(&b.ln2_g);
    out.push_back(&b.ln2_b);
    for (PerHead& h : b.per) {
      out.push_back(&h.w_phi);
      out.push_back(&h.keys);
      out.push_back(&h.values);
      out.push_back(&h.beta_raw);
    }
    out.push_back(&b.per_mix);
  }
  out.push_back(&final_g_);
  out.push_back(&final_b_);
  out.push_back(&readout_);
  return out;
}

std::vector<const Parameter*> MosaicLM::parameters() const {
  auto mutable_list = const_cast<MosaicLM*>(this)->parameters();
  return {mutable_list.begin(), mutable_list.end()};
}

void MosaicLM::project_parameters() {
  // keep stored keys on the unit sphere so the dot-product kernel retains
  // its Gaussian-distance reading
  for (Block& b : blocks_)
    for (PerHead& h : b.per)
      for (Eigen::Index i = 0; i < h.keys.value.rows(); ++i)
        h.keys.value.row(i) /= std::max(h.keys.value.row(i).norm(), kNormEps);
}

ContextualUnitParams MosaicLM::unit_params(int block, int head) const {
  require(block >= 0 && block < cfg_.n_blocks, "unit_params: bad block");
  require(head >= 0 && head < cfg_.n_heads, "unit_params: bad head");
  const CtxHead& h = blocks_[static_cast<size_t>(block)]
                         .ctx[static_cast<size_t>(head)];
  ContextualUnitParams p;
  p.w_phi = h.w_phi.value;
  p.w_psi = h.w_psi.value;
  p.lambda_phi = 1.0 / (1.0 + std::exp(-h.lambda_phi_raw.value(0, 0)));
  p.lambda_psi = std::log1p(std::exp(h.lambda_psi_raw.value(0, 0)));
  p.beta = std::log1p(std::exp(h.beta_raw.value(0, 0)));
  return p;
}

Var MosaicLM::forward(Tape& t, std::span<const int> tokens, Rng* dropout_rng,
                      AttentionCapture* capture) const {
  require(!tokens.empty(), "MosaicLM::forward: empty token sequence");
  for (int tok : tokens)
    require(tok >= 0 && tok < cfg_.vocab,
            "MosaicLM::forward: token id out of vocabulary");
  double rate = cfg_.dropout;
  Var h = gather_rows(t.param(tok_emb_), to_rows(tokens));
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    const Block& blk = blocks_[static_cast<size_t>(b)];
    Var u = layer_norm_rows(h, t.param(blk.ln1_g), t.param(blk.ln1_b));
    std::vector<Var> head_out;
    for (int i = 0; i < cfg_.n_heads; ++i) {
      const CtxHead& ch = blk.ctx[static_cast<size_t>(i)];
      Var keys = contextual_keys_op(matmul_nt(u, t.param(ch.w_phi)),
                                    sigmoid(t.param(ch.lambda_phi_raw)));
      Var values = contextual_values_op(matmul_nt(u, t.param(ch.w_psi)),
                                        softplus(t.param(ch.lambda_psi_raw)));
      Var beta = softplus(t.param(ch.beta_raw));
      Var scores = scale_by(matmul_nt(keys, keys), beta);
      Var w = masked_softmax_rows(scores, AttnMask::kStrictLower);
      if (capture && capture->block == b)
        capture->head_weights.push_back(w.value());
      w = maybe_dropout(w, rate, dropout_rng);
      head_out.push_back(matmul(w, values));
    }
    Var y = cfg_.n_heads == 1 ? head_out[0] : concat_cols(head_out);
    y = maybe_dropout(y, rate, dropout_rng);
    h = add(h, matmul_nt(y, t.param(blk.ctx_mix)));

    Var u2 = layer_norm_rows(h, t.param(blk.ln2_g), t.param(blk.ln2_b));
    std::vector<Var> per_out;
    for (int i = 0; i < cfg_.n_heads; ++i) {
      const PerHead& ph = blk.per[static_cast<size_t>(i)];
      Var queries = row_normalize(matmul_nt(u2, t.param(ph.w_phi)), kNormEps);
      Var beta = softplus(t.param(ph.beta_raw));
      per_out.push_back(persistent_attention_op(
          queries, t.param(ph.keys), t.param(ph.values), beta));
    }
    Var yp = cfg_.n_heads == 1 ? per_out[0] : concat_cols(per_out);
    Var mixed = matmul_nt(yp, t.param(blk.per_mix));
    mixed = maybe_dropout(mixed, rate, dropout_rng);
    h = add(h, mixed);
  }
  Var hf = layer_norm_rows(h, t.param(final_g_), t.param(final_b_));
  return matmul_nt(hf, t.param(readout_));
}

// ---------------------------------------------------------------------------
// TransformerLM
// ---------------------------------------------------------------------------

TransformerLM::TransformerLM(const LmConfig& cfg)
    : cfg_(cfg),
      tok_emb_("embed.tok", Matrix()),
      pos_emb_("embed.pos", Matrix()),
      final_g_("final_ln.gamma", Matrix::Ones(1, cfg.d_model)),
      final_b_("final_ln.beta", Matrix::Zero(1, cfg.d_model)),
      readout_("readout", Matrix()) {
  cfg_.validate();
  Rng rng(derive_seed(cfg.seed, "lm.init"));
  int d = cfg_.d_model;
  double sigma = 1.0 / std::sqrt(static_cast<double>(d));
  tok_emb_.value = randn(rng, cfg_.vocab, d, sigma);
  tok_emb_.grad = Matrix::Zero(cfg_.vocab, d);
  pos_emb_.value = randn(rng, cfg_.context_limit, d, sigma);
  pos_emb_.grad = Matrix::Zero(cfg_.context_limit, d);
  readout_.value = randn(rng, cfg_.vocab, d, sigma);
  readout_.grad = Matrix::Zero(cfg_.vocab, d);

  for (int b = 0; b < cfg_.n_blocks; ++b) {
    blocks_.push_back(Block{
        Parameter(block_name(b, "ln1.gamma"), Matrix::Ones(1, d)),
        Parameter(block_name(b, "ln1.beta"), Matrix::Zero(1, d)),
        Parameter(block_name(b, "ln2.gamma"), Matrix::Ones(1, d)),
        Parameter(block_name(b, "ln2.beta"), Matrix::Zero(1, d)),
        Parameter(block_name(b, "attn.wq"), randn(rng, d, d, sigma)),
        Parameter(block_name(b, "attn.bq"), Matrix::Zero(1, d)),
        Parameter(block_name(b, "attn.wk"), randn(rng, d, d, sigma)),
        Parameter(block_name(b, "attn.bk"), Matrix::Zero(1, d)),
        Parameter(block_name(b, "attn.wv"), randn(rng, d, d, sigma)),
        Parameter(block_name(b, "attn.bv"), Matrix::Zero(1, d)),
        Parameter(block_name(b, "attn.wo"), randn(rng, d, d, sigma)),
        Parameter(block_name(b, "attn.bo"), Matrix::Zero(1, d)),
        Parameter(block_name(b, "ffn.w1"), randn(rng, 4 * d, d, sigma)),
        Parameter(block_name(b, "ffn.b1"), Matrix::Zero(1, 4 * d)),
        Parameter(block_name(b, "ffn.w2"), randn(rng, d, 4 * d, sigma)),
        Parameter(block_name(b, "ffn.b2"), Matrix::Zero(1, d))});
  }
}

std::vector<Parameter*> TransformerLM::parameters() {
  std::vector<Parameter*> out{&tok_emb_, &pos_emb_};
  for (Block& b : blocks_)
    for (Parameter* p :
         {&b.ln1_g, &b.ln1_b, &b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv,
          &b.wo, &b.bo, &b.ln2_g, &b.ln2_b, &b.ffn_w1, &b.ffn_b1, &b.ffn_w2,
          &b.ffn_b2})
      out.push_back(p);
  out.push_back(&final_g_);
  out.push_back(&final_b_);
  out.push_back(&readout_);
  return out;
}

std::vector<const Parameter*> TransformerLM::parameters() const {
  auto mutable_list = const_cast<TransformerLM*>(this)->parameters();
  return {mutable_list.begin(), mutable_list.end()};
}

Var TransformerLM::forward(Tape& t, std::span<const int> tokens,
                           Rng* dropout_rng, AttentionCapture* capture) const {
  require(!tokens.empty(), "TransformerLM::forward: empty token sequence");
  require(static_cast<int>(tokens.size()) <= cfg_.context_limit,
          "TransformerLM::forward: input longer than the position table");
  for (int tok : tokens)
    require(tok >= 0 && tok < cfg_.vocab,
            "TransformerLM::forward: token id out of vocabulary");
  double rate = cfg_.dropout;
  int d = cfg_.d_model, dh = cfg_.head_dim();
  int D = static_cast<int>(tokens.size());
  Var h = add(gather_rows(t.param(tok_emb_), to_rows(tokens)),
              slice_rows(t.param(pos_emb_), 0, D));
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    const Block& blk = blocks_[static_cast<size_t>(b)];
    Var u = layer_norm_rows(h, t.param(blk.ln1_g), t.param(blk.ln1_b));
    Var q = add_row_broadcast(matmul_nt(u, t.param(blk.wq)), t.param(blk.bq));
    Var k = add_row_broadcast(matmul_nt(u, t.param(blk.wk)), t.param(blk.bk));
    Var v = add_row_broadcast(matmul_nt(u, t.param(blk.wv)), t.param(blk.bv));
    std::vector<Var> head_out;
    for (int i = 0; i < cfg_.n_heads; ++i) {
      Var qh = slice_cols(q, i * dh, dh);
      Var kh = slice_cols(k, i * dh, dh);
      Var vh = slice_cols(v, i * dh, dh);
      Var scores = scale(matmul_nt(qh, kh),
                         1.0 / std::sqrt(static_cast<double>(dh)));
      Var w = masked_softmax_rows(scores, AttnMask::kLower);
      if (capture && capture->block == b)
        capture->head_weights.push_back(w.value());
      w = maybe_dropout(w, rate, dropout_rng);
      head_out.push_back(matmul(w, vh));
    }
    Var y = cfg_.n_heads == 1 ? head_out[0] : concat_cols(head_out);
    y = maybe_dropout(y, rate, dropout_rng);
    h = add(h, add_row_broadcast(matmul_nt(y, t.param(blk.wo)),
                                 t.param(blk.bo)));

    Var u2 = layer_norm_rows(h, t.param(blk.ln2_g), t.param(blk.ln2_b));
    Var hidden = gelu(add_row_broadcast(matmul_nt(u2, t.param(blk.ffn_w1)),
                                        t.param(blk.ffn_b1)));
    Var f = add_row_broadcast(matmul_nt(hidden, t.param(blk.ffn_w2)),
                              t.param(blk.ffn_b2));
    f = maybe_dropout(f, rate, dropout_rng);
    h = add(h, f);
  }
  (void)d;
  Var hf = layer_norm_rows(h, t.param(final_g_), t.param(final_b_));
  return matmul_nt(hf, t.param(readout_));
}

std::unique_ptr<SequenceModel> build_lm(const std::string& family,
                                        const LmConfig& cfg) {
  if (family == "mosaic") return std::make_unique<MosaicLM>(cfg);
  if (family == "transformer") return std::make_unique<TransformerLM>(cfg);
  throw ConfigError("build_lm: unknown model family '" + family + "'");
}

}  // namespace mosaic
