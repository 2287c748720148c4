#include "mosaic/experiments.hpp"

#include "mosaic/checkpoint.hpp"
#include "mosaic/evaluation.hpp"
#include "mosaic/grad_check.hpp"
#include "mosaic/training.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace mosaic {

namespace {

constexpr double kGradCheckTol = 1e-4;

namespace fs = std::filesystem;

class RunContext {
 public:
  explicit RunContext(const ExperimentConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    std::error_code ec;
    fs::create_directories(cfg_.out_dir(), ec);
    if (ec)
      throw ContractViolation("cannot create output directory " +
                              cfg_.out_dir() + ": " + ec.message());
    start_ = std::chrono::steady_clock::now();
    manifest.put("run.kind", cfg_.kind());
    manifest.put("run.version", std::string(kVersion));
    manifest.put("seeds.root", static_cast<long long>(cfg_.seed()));
    manifest.embed_config(cfg_);
  }

  std::string path(const std::string& name) const {
    return (fs::path(cfg_.out_dir()) / name).string();
  }

  void add_artifact(const std::string& tag, const std::string& file,
                    const std::string& schema) {
    manifest.put("artifacts." + tag, file);
    if (!schema.empty()) manifest.put("artifacts." + tag + "_schema", schema);
  }

  // manifest.txt plus a re-runnable copy of the resolved config
  void finalize() {
    manifest.put("run.wall_seconds",
                 std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - start_)
                     .count());
    cfg_.store().save(path("config.resolved.txt"));
    manifest.save(path("manifest.txt"));
  }

  const ExperimentConfig& cfg() const { return cfg_; }
  RunManifest manifest;

 private:
  ExperimentConfig cfg_;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_csv(const std::string& path, const std::string& header) {
  std::ofstream os(path);
  if (!os.good()) throw ContractViolation("cannot write " + path);
  os << header << "\n";
  return os;
}

void write_train_csvs(RunContext& ctx, const TrainReport& report) {
  {
    auto os = open_csv(ctx.path("train_loss.csv"), "iteration,loss");
    for (size_t i = 0; i < report.train_loss.size(); ++i)
      os << (i + 1) << "," << fmt_double(report.train_loss[i]) << "\n";
  }
  ctx.add_artifact("train_loss", "train_loss.csv", "iteration,loss;v1");
  if (!report.val_loss.empty()) {
    auto os = open_csv(ctx.path("val_loss.csv"), "iteration,loss");
    for (const auto& [iter, loss] : report.val_loss)
      os << iter << "," << fmt_double(loss) << "\n";
    ctx.add_artifact("val_loss", "val_loss.csv", "iteration,loss;v1");
  }
}

void record_train_metrics(RunContext& ctx, const TrainReport& report) {
  ctx.manifest.put("run.diverged", report.diverged ? "true" : "false");
  ctx.manifest.put("run.completed_iterations",
                   static_cast<long long>(report.completed_iterations));
  if (!report.train_loss.empty()) {
    size_t n = report.train_loss.size();
    size_t tail = std::min<size_t>(10, n);
    double mean = 0.0;
    for (size_t i = n - tail; i < n; ++i) mean += report.train_loss[i] / tail;
    ctx.manifest.put_metric("final_train_loss", mean);
  }
  if (!report.val_loss.empty())
    ctx.manifest.put_metric("final_val_loss", report.val_loss.back().second);
  ctx.manifest.put("run.train_wall_seconds", report.wall_seconds);
}

TrainConfig train_config_from(const ExperimentConfig& cfg) {
  TrainConfig tc;
  tc.iterations = static_cast<int>(cfg.integer("training.iterations"));
  tc.schedule.peak_lr = cfg.number("training.peak_lr");
  tc.schedule.min_lr = cfg.number("training.min_lr");
  tc.schedule.warmup = static_cast<int>(cfg.integer("training.warmup"));
  tc.schedule.total = std::max(tc.iterations, tc.schedule.warmup + 1);
  tc.optimizer.beta1 = cfg.number("training.beta1");
  tc.optimizer.beta2 = cfg.number("training.beta2");
  tc.optimizer.eps = cfg.number("training.eps");
  tc.optimizer.weight_decay = cfg.number("training.weight_decay");
  tc.val_every = static_cast<int>(cfg.integer("training.val_every"));
  tc.seed = cfg.seed();
  return tc;
}

LmConfig lm_config_from(const ExperimentConfig& cfg, int vocab,
                        int context_limit) {
  LmConfig mc;
  mc.vocab = vocab;
  mc.d_model = static_cast<int>(cfg.integer("model.d_model"));
  mc.n_heads = static_cast<int>(cfg.integer("model.heads"));
  mc.n_blocks = static_cast<int>(cfg.integer("model.blocks"));
  mc.n_persistent_slots = static_cast<int>(cfg.integer("model.slots"));
  mc.context_limit = context_limit;
  mc.dropout = cfg.number("model.dropout");
  mc.seed = derive_seed(cfg.seed(), "model.init");
  return mc;
}

void save_model(RunContext& ctx, std::vector<Parameter*> params) {
  save_checkpoint(ctx.path("checkpoint.bin"),
                  {params.data(), params.size()});
  ctx.add_artifact("checkpoint", "checkpoint.bin", "MOSAICK1");
}

int exit_code_for(const TrainReport& report) {
  return report.diverged ? 4 : 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

double lm_family_grad_error(const std::string& family, int blocks,
                            std::uint64_t seed) {
  LmConfig mc;
  mc.vocab = 11;
  mc.d_model = 16;
  mc.n_heads = 2;
  mc.n_blocks = blocks;
  mc.context_limit = 16;
  mc.seed = derive_seed(seed, "gradcheck.model");
  auto model = build_lm(family, mc);
  Rng rng(derive_seed(seed, "gradcheck.data"));
  std::vector<int> tokens(12);
  for (int& t : tokens) t = rng.uniform_int(mc.vocab);

  auto params = model->parameters();
  std::span<Parameter* const> ps{params.data(), params.size()};
  ScalarFn f = [&](const Vector& v) {
    set_values(ps, v);
    Tape t(false);
    return next_token_loss(model->forward(t, tokens, nullptr, nullptr), tokens)
        .scalar();
  };
  GradFn g = [&](const Vector& v) {
    set_values(ps, v);
    for (Parameter* p : params) p->zero_grad();
    Tape t;
    t.backward(
        next_token_loss(model->forward(t, tokens, nullptr, nullptr), tokens));
    return flatten_grads({params.data(), params.size()});
  };
  Vector point = flatten_values({params.data(), params.size()});
  std::vector<int> coords;
  Rng crng(derive_seed(seed, "gradcheck.coords"));
  for (int i = 0; i < 24; ++i)
    coords.push_back(crng.uniform_int(static_cast<int>(point.size())));
  auto res = grad_check(f, g, point, 1e-5, coords);
  require(res.all_finite, "gradcheck: non-finite values for " + family);
  return res.max_rel_error;
}

double moons_family_grad_error(int heads, std::uint64_t seed) {
  MoonsModel model(heads, derive_seed(seed, "gradcheck.moons"));
  Rng rng(derive_seed(seed, "gradcheck.moons.data"));
  ComplexDense x =
      gen_moon_sequence(gen_moon_system(rng, Split::kTrain)).observations
          .topRows(40);
  auto params = model.parameters();
  std::span<Parameter* const> ps{params.data(), params.size()};
  ScalarFn f = [&](const Vector& v) {
    set_values(ps, v);
    Tape t(false);
    return moons_sequence_loss(t, model, x, 3.0).scalar();
  };
  GradFn g = [&](const Vector& v) {
    set_values(ps, v);
    for (Parameter* p : params) p->zero_grad();
    Tape t;
    t.backward(moons_sequence_loss(t, model, x, 3.0));
    return flatten_grads({params.data(), params.size()});
  };
  Vector point = flatten_values({params.data(), params.size()});
  std::vector<int> coords(54);
  for (int i = 0; i < 54; ++i) coords[static_cast<size_t>(i)] = i;
  auto res = grad_check(f, g, point, 1e-5, coords);
  require(res.all_finite, "gradcheck: non-finite values for moons");
  return res.max_rel_error;
}

}  // namespace

int run_gradcheck(const ExperimentConfig& cfg) {
  RunContext ctx(cfg);
  std::uint64_t seed = cfg.seed();
  struct Entry {
    std::string name;
    double error;
  };
  std::vector<Entry> results;
  results.push_back({"moons_1head", moons_family_grad_error(1, seed)});
  results.push_back({"moons_3head", moons_family_grad_error(3, seed)});
  for (const char* family : {"mosaic", "transformer"})
    for (int blocks : {1, 2})
      results.push_back(
          {std::string(family) + "_" + std::to_string(blocks) + "block",
           lm_family_grad_error(family, blocks, seed)});

  double worst = 0.0;
  for (const Entry& e : results) {
    ctx.manifest.put_metric(e.name + ".max_rel_error", e.error);
    worst = std::max(worst, e.error);
  }
  ctx.manifest.put_metric("max_rel_error", worst);
  bool ok = worst < kGradCheckTol;
  ctx.manifest.put("run.passed", ok ? "true" : "false");
  ctx.finalize();
  return ok ? 0 : 3;
}

// ---------------------------------------------------------------------------
// moons
// ---------------------------------------------------------------------------

namespace {

MoonsModel build_moons_model(const ExperimentConfig& cfg) {
  int heads = static_cast<int>(cfg.integer("model.heads"));
  if (cfg.str("model.init") == "identity") return MoonsModel::identity(heads);
  return MoonsModel(heads, derive_seed(cfg.seed(), "model.init"),
                    cfg.number("model.init_scale"));
}

}  // namespace

int run_moons_train(const ExperimentConfig& cfg) {
  RunContext ctx(cfg);
  MoonsModel model = build_moons_model(cfg);
  MoonsObjectiveConfig ocfg;
  ocfg.batch = static_cast<int>(cfg.integer("training.batch"));
  ocfg.clip = cfg.number("training.clip");
  ocfg.sequence_length = static_cast<int>(cfg.integer("data.sequence_length"));
  MoonsObjective task(model, ocfg);
  TrainReport report = train(task, train_config_from(cfg));
  write_train_csvs(ctx, report);
  record_train_metrics(ctx, report);
  save_model(ctx, model.parameters());
  ctx.manifest.put("pools.moon_train_triples",
                   static_cast<long long>(moon_triple_pool(Split::kTrain).size()));
  ctx.manifest.put("pools.moon_validation_triples",
                   static_cast<long long>(
                       moon_triple_pool(Split::kValidation).size()));
  ctx.finalize();
  return exit_code_for(report);
}

int run_moons_eval(const ExperimentConfig& cfg) {
  RunContext ctx(cfg);
  MoonsModel model = build_moons_model(cfg);
  if (!cfg.str("eval.checkpoint").empty()) {
    auto params = model.parameters();
    load_checkpoint(cfg.str("eval.checkpoint"),
                    {params.data(), params.size()});
  }
  auto t = cfg.int_list("eval.triple");
  MoonTriple triple{t[0], t[1], t[2]};
  require(moon_triple_admissible(triple),
          "moons-eval: inadmissible period triple");
  bool held_out = false;
  for (const MoonTriple& v : moon_triple_pool(Split::kValidation))
    held_out |= (v == triple);
  ctx.manifest.put("pools.triple_in_validation",
                   held_out ? "true" : "false");

  MoonsEvalConfig ecfg;
  ecfg.n_sequences = static_cast<int>(cfg.integer("eval.sequences"));
  ecfg.horizon = static_cast<int>(cfg.integer("eval.horizon"));
  ecfg.max_context = static_cast<int>(cfg.integer("eval.max_context"));
  Rng rng(derive_seed(cfg.seed(), "moons.eval"));
  if (cfg.flag("data.dump")) {
    Rng dump_rng(derive_seed(cfg.seed(), "moons.eval"));
    std::vector<MoonSequence> sample;
    for (int i = 0; i < std::min(ecfg.n_sequences, 8); ++i)
      sample.push_back(gen_moon_sequence(make_moon_system(triple, dump_rng)));
    std::ofstream os(ctx.path("eval_data.txt"));
    write_moon_dataset(os, sample);
    ctx.add_artifact("eval_data", "eval_data.txt", "mosaic-dataset;v1");
  }
  ErrorCurve curve = moons_error_curve(model, triple, ecfg, rng);

  {
    auto os = open_csv(ctx.path("error_curve.csv"),
                       "context_length,mean_error");
    for (size_t i = 0; i < curve.mean_error.size(); ++i)
      os << curve.context_lengths[i] << ","
         << fmt_double(curve.mean_error[i]) << "\n";
  }
  ctx.add_artifact("error_curve", "error_curve.csv",
                   "context_length,mean_error;v1");

  int window = static_cast<int>(cfg.integer("eval.window"));
  TransitionStats st = transition_stats(curve, window);
  ctx.manifest.put_metric("pre_p1_mean", st.pre_p1_mean);
  ctx.manifest.put_metric("post_pmax_mean", st.post_pmax_mean);
  for (int k = 0; k < 4; ++k)
    ctx.manifest.put_metric("segment_mean_" + std::to_string(k),
                            st.segment_mean[static_cast<size_t>(k)]);
  for (int k = 0; k < 3; ++k)
    ctx.manifest.put_metric("boundary_ratio_" + std::to_string(k + 1),
                            st.boundary_ratio[static_cast<size_t>(k)]);
  ctx.manifest.put_metric("lcm_ratio", st.lcm_ratio);
  ctx.manifest.put("run.markers",
                   std::to_string(triple.p1) + "," + std::to_string(triple.p2) +
                       "," + std::to_string(triple.p3) + "," +
                       std::to_string(triple.lcm()));
  ctx.finalize();
  return 0;
}

// ---------------------------------------------------------------------------
// induction
// ---------------------------------------------------------------------------

int run_induction(const ExperimentConfig& cfg) {
  RunContext ctx(cfg);
  int vocab = static_cast<int>(cfg.integer("data.vocab"));
  int length = static_cast<int>(cfg.integer("data.length"));
  int n_train = static_cast<int>(cfg.integer("data.train_samples"));
  int n_eval = static_cast<int>(cfg.integer("data.eval_samples"));

  Rng train_rng(derive_seed(cfg.seed(), "induction.train"));
  std::vector<std::vector<int>> train_set;
  std::vector<InductionSample> train_samples;
  for (int i = 0; i < n_train; ++i) {
    train_samples.push_back(gen_induction(train_rng, vocab, length));
    train_set.push_back(train_samples.back().tokens);
  }
  Rng val_rng(derive_seed(cfg.seed(), "induction.valloss"));
  std::vector<std::vector<int>> val_set;
  for (int i = 0; i < 64; ++i)
    val_set.push_back(gen_induction(val_rng, vocab, length).tokens);

  if (cfg.flag("data.dump")) {
    std::ofstream os(ctx.path("train_data.txt"));
    write_induction_dataset(os, train_samples, vocab);
    ctx.add_artifact("train_data", "train_data.txt", "mosaic-dataset;v1");
  }

  auto model = build_lm(cfg.str("model.family"),
                        lm_config_from(cfg, vocab, length));
  LmObjective task(*model, train_set, val_set,
                   static_cast<int>(cfg.integer("training.batch")));
  TrainReport report = train(task, train_config_from(cfg));
  write_train_csvs(ctx, report);
  record_train_metrics(ctx, report);
  save_model(ctx, model->parameters());

  Rng eval_rng(derive_seed(cfg.seed(), "induction.eval"));
  std::vector<InductionSample> eval_samples;
  for (int i = 0; i < n_eval; ++i)
    eval_samples.push_back(gen_induction(eval_rng, vocab, length));
  double accuracy = induction_eval(*model, eval_samples);
  ctx.manifest.put_metric("induction_accuracy", accuracy);
  ctx.manifest.put_metric("chance_accuracy", 2.0 / vocab);
  ctx.manifest.put("run.family", cfg.str("model.family"));
  ctx.manifest.put("run.depth", cfg.integer("model.blocks"));
  ctx.finalize();
  return exit_code_for(report);
}

// ---------------------------------------------------------------------------
// icl
// ---------------------------------------------------------------------------

namespace {

struct IclPools {
  PfaConfig pfa_cfg;
  IclConfig icl_cfg;
  std::vector<PfaSpec> train, val, test;
};

IclPools make_icl_pools(const ExperimentConfig& cfg) {
  IclPools pools;
  pools.pfa_cfg.n_states = {static_cast<int>(cfg.integer("data.pfa_states_lo")),
                            static_cast<int>(cfg.integer("data.pfa_states_hi"))};
  pools.pfa_cfg.alphabet_size = static_cast<int>(cfg.integer("data.alphabet"));
  pools.pfa_cfg.edges_per_state = {static_cast<int>(cfg.integer("data.edges_lo")),
                                   static_cast<int>(cfg.integer("data.edges_hi"))};
  pools.icl_cfg.strings_per_sequence = {
      static_cast<int>(cfg.integer("data.strings_lo")),
      static_cast<int>(cfg.integer("data.strings_hi"))};
  pools.icl_cfg.string_length = {
      static_cast<int>(cfg.integer("data.string_len_lo")),
      static_cast<int>(cfg.integer("data.string_len_hi"))};
  std::uint64_t seed = cfg.seed();
  Rng train_rng(derive_seed(seed, "pfa.train"));
  Rng val_rng(derive_seed(seed, "pfa.val"));
  Rng test_rng(derive_seed(seed, "pfa.test"));
  pools.train = gen_pfa_pool(
      train_rng, static_cast<int>(cfg.integer("data.train_pfas")),
      pools.pfa_cfg);
  pools.val = gen_pfa_pool(val_rng,
                           static_cast<int>(cfg.integer("data.val_pfas")),
                           pools.pfa_cfg);
  pools.test = gen_pfa_pool(test_rng,
                            static_cast<int>(cfg.integer("data.test_pfas")),
                            pools.pfa_cfg);
  return pools;
}

std::vector<IclSequence> sample_sequences(const std::vector<PfaSpec>& pool,
                                          const IclConfig& icl_cfg, int count,
                                          std::uint64_t seed,
                                          std::string_view label) {
  Rng rng(derive_seed(seed, label));
  std::vector<IclSequence> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    int idx = rng.uniform_int(static_cast<int>(pool.size()));
    out.push_back(sample_icl_sequence(pool[static_cast<size_t>(idx)], rng,
                                      icl_cfg, idx));
  }
  return out;
}

std::vector<std::vector<int>> tokens_of(const std::vector<IclSequence>& seqs) {
  std::vector<std::vector<int>> out;
  out.reserve(seqs.size());
  for (const IclSequence& s : seqs) out.push_back(s.tokens);
  return out;
}

int icl_context_limit(const ExperimentConfig& cfg) {
  // longest possible sequence: strings_hi strings plus separators
  int strings = static_cast<int>(cfg.integer("data.strings_hi"));
  int len = static_cast<int>(cfg.integer("data.string_len_hi"));
  return std::max(static_cast<int>(cfg.integer("model.context_limit")),
                  strings * (len + 1));
}

}  // namespace

int run_icl_train(const ExperimentConfig& cfg) {
  RunContext ctx(cfg);
  IclPools pools = make_icl_pools(cfg);
  auto train_seqs = sample_sequences(
      pools.train, pools.icl_cfg,
      static_cast<int>(cfg.integer("data.train_sequences")), cfg.seed(),
      "icl.data.train");
  auto val_seqs = sample_sequences(pools.val, pools.icl_cfg, 64, cfg.seed(),
                                   "icl.data.valloss");
  if (cfg.flag("data.dump")) {
    std::ofstream os(ctx.path("train_data.txt"));
    write_icl_dataset(os, train_seqs, pools.train);
    ctx.add_artifact("train_data", "train_data.txt", "mosaic-dataset;v1");
  }

  int vocab = pools.pfa_cfg.alphabet_size + 1;
  auto model = build_lm(cfg.str("model.family"),
                        lm_config_from(cfg, vocab, icl_context_limit(cfg)));
  LmObjective task(*model, tokens_of(train_seqs), tokens_of(val_seqs),
                   static_cast<int>(cfg.integer("training.batch")));
  TrainReport report = train(task, train_config_from(cfg));
  write_train_csvs(ctx, report);
  record_train_metrics(ctx, report);
  save_model(ctx, model->parameters());
  ctx.manifest.put("pools.train_pfas",
                   static_cast<long long>(pools.train.size()));
  ctx.manifest.put("pools.val_pfas", static_cast<long long>(pools.val.size()));
  ctx.manifest.put("pools.test_pfas",
                   static_cast<long long>(pools.test.size()));
  auto all_params = model->parameters();
  ctx.manifest.put("run.parameters",
                   count_parameters({all_params.data(), all_params.size()}));
  ctx.finalize();
  return exit_code_for(report);
}

int run_icl_eval(const ExperimentConfig& cfg) {
  RunContext ctx(cfg);
  if (cfg.str("eval.checkpoint").empty())
    throw ConfigError("icl-eval: eval.checkpoint is required");
  IclPools pools = make_icl_pools(cfg);
  int vocab = pools.pfa_cfg.alphabet_size + 1;
  auto model = build_lm(cfg.str("model.family"),
                        lm_config_from(cfg, vocab, icl_context_limit(cfg)));
  auto params = model->parameters();
  load_checkpoint(cfg.str("eval.checkpoint"), {params.data(), params.size()});

  bool iid = cfg.flag("data.iid_eval");
  const auto& pool = iid ? pools.train : pools.test;
  auto seqs = sample_sequences(
      pool, pools.icl_cfg, static_cast<int>(cfg.integer("data.test_sequences")),
      cfg.seed(), iid ? "icl.eval.iid" : "icl.eval.ood");
  IclScore score = icl_eval(*model, seqs, pool);
  ctx.manifest.put_metric("accuracy", score.accuracy);
  ctx.manifest.put_metric("tvd", score.tvd);
  ctx.manifest.put_metric("count", static_cast<double>(score.count));
  ctx.manifest.put("run.eval_mode", iid ? "iid" : "held_out");
  ctx.finalize();
  return 0;
}

// ---------------------------------------------------------------------------
// attention profile
// ---------------------------------------------------------------------------

int run_attn_profile(const ExperimentConfig& cfg) {
  RunContext ctx(cfg);
  auto lambdas = cfg.number_list("eval.lambdas");
  auto os = open_csv(ctx.path("attention_profile.csv"),
                     "relative_position,head_id,weight");
  ctx.add_artifact("attention_profile", "attention_profile.csv",
                   "relative_position,head_id,weight;v1");

  if (cfg.str("eval.checkpoint").empty()) {
    // unit-level sweep over the leak coefficient on fixed random inputs
    int dim = static_cast<int>(cfg.integer("eval.profile_dim"));
    int length = static_cast<int>(cfg.integer("eval.profile_length"));
    int count = static_cast<int>(cfg.integer("eval.profile_sequences"));
    Rng wrng(derive_seed(cfg.seed(), "attnprofile.weights"));
    Matrix w_phi(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) w_phi(i, j) = wrng.normal();
    Rng xrng(derive_seed(cfg.seed(), "attnprofile.inputs"));
    std::vector<Matrix> inputs;
    for (int i = 0; i < count; ++i) {
      Matrix x(length, dim);
      for (Eigen::Index r = 0; r < length; ++r)
        for (Eigen::Index c = 0; c < dim; ++c) x(r, c) = xrng.normal();
      inputs.push_back(std::move(x));
    }
    std::vector<double> bandwidths;
    for (size_t li = 0; li < lambdas.size(); ++li) {
      ContextualUnitParams unit;
      unit.w_phi = w_phi;
      unit.w_psi = w_phi;
      unit.lambda_phi = lambdas[li];
      unit.beta = cfg.number("eval.profile_beta");
      unit.validate();
      bandwidths.push_back(mean_profile_bandwidth(unit, inputs));
      AttentionProfile prof = attention_profile({&unit, 1}, inputs);
      for (Eigen::Index pos = 0; pos < prof.mean_weights.size(); ++pos)
        os << (pos - prof.mean_weights.size()) << "," << li << ","
           << fmt_double(prof.mean_weights(pos)) << "\n";
      ctx.manifest.put("run.profile_lambda_" + std::to_string(li),
                       lambdas[li]);
      ctx.manifest.put_metric("bandwidth_" + std::to_string(li),
                              bandwidths.back());
    }
    bool monotone = true;
    for (size_t i = 1; i < bandwidths.size(); ++i)
      monotone &= bandwidths[i] >= bandwidths[i - 1];
    ctx.manifest.put_metric("bandwidth_monotone", monotone ? 1.0 : 0.0);
    ctx.finalize();
    return 0;
  }

  // model-level profile of a trained checkpoint on held-out data
  IclPools pools = make_icl_pools(cfg);
  int vocab = pools.pfa_cfg.alphabet_size + 1;
  auto model = build_lm(cfg.str("model.family"),
                        lm_config_from(cfg, vocab, icl_context_limit(cfg)));
  auto params = model->parameters();
  load_checkpoint(cfg.str("eval.checkpoint"), {params.data(), params.size()});
  int length = static_cast<int>(cfg.integer("eval.profile_length"));
  int count = static_cast<int>(cfg.integer("eval.profile_sequences"));
  Rng rng(derive_seed(cfg.seed(), "attnprofile.data"));
  std::vector<std::vector<int>> seqs;
  while (static_cast<int>(seqs.size()) < count) {
    int idx = rng.uniform_int(static_cast<int>(pools.val.size()));
    IclSequence s = sample_icl_sequence(pools.val[static_cast<size_t>(idx)],
                                        rng, pools.icl_cfg, idx);
    if (static_cast<int>(s.tokens.size()) < length) continue;
    s.tokens.resize(static_cast<size_t>(length));
    seqs.push_back(s.tokens);
  }
  AttentionProfile prof = attention_profile(
      *model, seqs, static_cast<int>(cfg.integer("eval.block")));
  for (Eigen::Index h = 0; h < prof.head_weights.rows(); ++h)
    for (Eigen::Index pos = 0; pos < prof.head_weights.cols(); ++pos)
      os << (pos - prof.head_weights.cols()) << "," << h << ","
         << fmt_double(prof.head_weights(h, pos)) << "\n";
  for (Eigen::Index pos = 0; pos < prof.mean_weights.size(); ++pos)
    os << (pos - prof.mean_weights.size()) << ",-1,"
       << fmt_double(prof.mean_weights(pos)) << "\n";
  ctx.manifest.put_metric("profile_row_sum", prof.head_weights.row(0).sum());
  ctx.finalize();
  return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

int run_sweep(const ExperimentConfig& cfg) {
  auto blocks = cfg.int_list("sweep.blocks");
  auto heads = cfg.int_list("sweep.heads");
  auto dims = cfg.int_list("sweep.dims");
  long long budget = cfg.integer("sweep.budget");
  long long grid = static_cast<long long>(blocks.size()) *
                   static_cast<long long>(heads.size()) *
                   static_cast<long long>(dims.size());
  if (grid > budget)
    throw ConfigError("sweep: grid size " + std::to_string(grid) +
                      " exceeds budget " + std::to_string(budget));

  RunContext ctx(cfg);
  IclPools pools = make_icl_pools(cfg);
  auto train_seqs = sample_sequences(
      pools.train, pools.icl_cfg,
      static_cast<int>(cfg.integer("data.train_sequences")), cfg.seed(),
      "icl.data.train");
  auto valloss_seqs = sample_sequences(pools.val, pools.icl_cfg, 64,
                                       cfg.seed(), "icl.data.valloss");
  auto val_seqs = sample_sequences(
      pools.val, pools.icl_cfg,
      static_cast<int>(cfg.integer("data.val_sequences")), cfg.seed(),
      "icl.eval.val");
  auto test_seqs = sample_sequences(
      pools.test, pools.icl_cfg,
      static_cast<int>(cfg.integer("data.test_sequences")), cfg.seed(),
      "icl.eval.ood");
  int vocab = pools.pfa_cfg.alphabet_size + 1;

  struct Point {
    int blocks, heads, dim;
    double val_accuracy = 0, val_tvd = 0;
  };
  std::vector<Point> points;
  int best = -1;
  std::unique_ptr<SequenceModel> best_model;

  int index = 0;
  for (int b : blocks)
    for (int h : heads)
      for (int d : dims) {
        ExperimentConfig sub = cfg;
        sub.set("model.blocks", std::to_string(b));
        sub.set("model.heads", std::to_string(h));
        sub.set("model.d_model", std::to_string(d));
        auto model = build_lm(sub.str("model.family"),
                              lm_config_from(sub, vocab,
                                             icl_context_limit(sub)));
        LmObjective task(*model, tokens_of(train_seqs),
                         tokens_of(valloss_seqs),
                         static_cast<int>(sub.integer("training.batch")));
        TrainReport report = train(task, train_config_from(sub));
        if (report.diverged) {
          ctx.manifest.put("run.point" + std::to_string(index) + "_diverged",
                           "true");
        }
        IclScore val_score = icl_eval(*model, val_seqs, pools.val);
        Point pt{b, h, d, val_score.accuracy, val_score.tvd};
        points.push_back(pt);

        std::string tag = "point" + std::to_string(index);
        ctx.manifest.put_metric(tag + ".val_accuracy", pt.val_accuracy);
        ctx.manifest.put_metric(tag + ".val_tvd", pt.val_tvd);
        // parity between the two families at this point
        LmConfig probe = lm_config_from(sub, vocab, icl_context_limit(sub));
        double mosaic_count = static_cast<double>(
            mosaic_param_count(probe, solve_persistent_slots(probe)));
        double transformer_count =
            static_cast<double>(transformer_param_count(probe));
        ctx.manifest.put_metric(
            tag + ".parity_gap",
            std::abs(mosaic_count - transformer_count) / transformer_count);
        ctx.manifest.put("run." + tag,
                         std::to_string(b) + "x" + std::to_string(h) + "x" +
                             std::to_string(d));
        if (best < 0 || pt.val_accuracy > points[static_cast<size_t>(best)]
                                              .val_accuracy) {
          best = index;
          best_model = std::move(model);
        }
        ++index;
      }

  const Point& sel = points[static_cast<size_t>(best)];
  ctx.manifest.put("run.selected_point", static_cast<long long>(best));
  ctx.manifest.put("run.selected_shape",
                   std::to_string(sel.blocks) + "x" + std::to_string(sel.heads) +
                       "x" + std::to_string(sel.dim));
  ctx.manifest.put_metric("selected.val_accuracy", sel.val_accuracy);
  IclScore test_score = icl_eval(*best_model, test_seqs, pools.test);
  ctx.manifest.put_metric("test_accuracy", test_score.accuracy);
  ctx.manifest.put_metric("test_tvd", test_score.tvd);
  auto best_params = best_model->parameters();
  save_checkpoint(ctx.path("checkpoint.bin"),
                  {best_params.data(), best_params.size()});
  ctx.add_artifact("checkpoint", "checkpoint.bin", "MOSAICK1");
  ctx.finalize();
  return 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

int run_compare(const std::string& manifest_a, const std::string& manifest_b,
                std::ostream& os) {
  RunManifest a = RunManifest::load(manifest_a);
  RunManifest b = RunManifest::load(manifest_b);
  if (a.kind() != b.kind())
    throw ConfigError("compare: incompatible kinds '" + a.kind() + "' vs '" +
                      b.kind() + "'");
  auto am = a.metrics();
  auto bm = b.metrics();
  for (const auto& [key, value] : am)
    if (!b.has_metric(key))
      throw ConfigError("compare: metric missing from " + manifest_b + ": " +
                        key);
  for (const auto& [key, value] : bm)
    if (!a.has_metric(key))
      throw ConfigError("compare: metric missing from " + manifest_a + ": " +
                        key);
  for (const char* key : {"run.family", "run.depth", "run.eval_mode",
                          "run.selected_shape"}) {
    if (a.store().has(key) || b.store().has(key))
      os << "# " << key << ": "
         << (a.store().has(key) ? a.store().raw(key) : "-") << " vs "
         << (b.store().has(key) ? b.store().raw(key) : "-") << "\n";
  }
  os << "metric,a,b,delta\n";
  for (const auto& [key, value] : am) {
    double av = a.metric(key), bv = b.metric(key);
    os << key << "," << fmt_double(av) << "," << fmt_double(bv) << ","
       << fmt_double(bv - av) << "\n";
  }
  return 0;
}

}  // namespace mosaic
