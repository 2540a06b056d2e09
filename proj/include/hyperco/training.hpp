#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hyperco/autodiff.hpp"
#include "hyperco/data.hpp"
#include "hyperco/losses.hpp"
#include "hyperco/model.hpp"
#include "hyperco/rng.hpp"

// Subset sampling, reverse-mode gradients of the total objective, AdamW, and
// the (single-writer, deterministic) training loop with validation-driven
// checkpoint selection.

namespace hyperco {

enum class SubsetPolicy {
  UniformProper,  // size uniform in {1..K-1}, then a uniform subset of that size
  BernoulliMask,  // keep each tag independently; resample while empty
};

inline SubsetPolicy subset_policy_from_string(std::string_view s) {
  if (s == "uniform_proper") return SubsetPolicy::UniformProper;
  if (s == "bernoulli") return SubsetPolicy::BernoulliMask;
  throw std::invalid_argument("subset_policy must be uniform_proper|bernoulli");
}

inline const char* to_string(SubsetPolicy p) {
  return p == SubsetPolicy::UniformProper ? "uniform_proper" : "bernoulli";
}

struct TrainConfig {
  double learning_rate = 1e-5;
  int batch_size = 32;
  double weight_decay = 0.2;  // decoupled
  int epochs = 1;
  int eval_every = 0;  // validation cadence in steps; 0 = once per epoch
  std::uint64_t seed = 0;
  SubsetPolicy subset_policy = SubsetPolicy::UniformProper;
  double bernoulli_keep = 0.5;
  bool log_timing = false;  // wall_ms stays 0 unless enabled, keeping logs reproducible

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (!(bernoulli_keep > 0.0 && bernoulli_keep <= 1.0))
      throw std::invalid_argument("TrainConfig: bernoulli_keep must be in (0, 1]");
  }
};

// Lower-specificity description sampled from a tag set. Singletons have no
// proper subset and are returned unchanged. The result is never empty and
// always a subset of the input.
inline TagSet sample_subset(const TagSet& tags, Rng& rng,
                            SubsetPolicy policy = SubsetPolicy::UniformProper,
                            double bernoulli_keep = 0.5) {
  if (tags.empty()) throw std::invalid_argument("sample_subset: empty tag set");
  const int k = tags.size();
  if (k == 1) return tags;

  if (policy == SubsetPolicy::UniformProper) {
    const int size = rng.uniform_int(1, k - 1);
    std::vector<int> pool = tags.ids();
    for (int i = 0; i < size; ++i) {
      const int j = rng.uniform_int(i, k - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(size));
    return TagSet::from_ids(std::move(pool));
  }

  for (;;) {
    std::vector<int> keep;
    for (int id : tags.ids())
      if (rng.uniform() < bernoulli_keep) keep.push_back(id);
    if (!keep.empty()) return TagSet::from_ids(std::move(keep));
  }
}

// Autodiff leaves for every trainable parameter, pushed in flat-layout order
// so leaf ids coincide with flat indices.
inline ParamsView<ad::Var> make_tape_view(ad::Tape& tape, const ModelParams& p) {
  ParamsView<ad::Var> v;
  v.dims = p.dims;
  v.curvature = p.curvature();
  v.cone_k = p.cone_k;
  auto leaves = [&tape](const std::vector<double>& src, std::vector<ad::Var>& dst) {
    dst.reserve(src.size());
    for (double x : src) dst.emplace_back(tape, x);
  };
  leaves(p.tag_table, v.tag_table);
  leaves(p.set_hidden.weight, v.set_hidden_w);
  leaves(p.set_hidden.bias, v.set_hidden_b);
  leaves(p.set_out.weight, v.set_out_w);
  leaves(p.set_out.bias, v.set_out_b);
  leaves(p.font_hidden.weight, v.font_hidden_w);
  leaves(p.font_hidden.bias, v.font_hidden_b);
  leaves(p.font_out.weight, v.font_out_w);
  leaves(p.font_out.bias, v.font_out_b);
  v.log_scale_font = ad::Var(tape, p.log_scale_font);
  v.log_scale_imp = ad::Var(tape, p.log_scale_imp);
  v.log_temperature = ad::Var(tape, p.log_temperature);
  return v;
}

using Batch = std::vector<const FontRecord*>;

namespace detail {

template <typename Scalar>
EmbeddedBatch<Scalar> embed_batch(const ParamsView<Scalar>& view, const Batch& batch,
                                  std::span<const TagSet> subsets) {
  EmbeddedBatch<Scalar> out;
  out.fonts.reserve(batch.size());
  out.imps.reserve(batch.size());
  out.sub_imps.reserve(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    out.fonts.push_back(encode_font(view, batch[n]->features));
    out.imps.push_back(encode_tagset(view, batch[n]->tags));
    out.sub_imps.push_back(encode_tagset(view, subsets[n]));
  }
  return out;
}

}  // namespace detail

// Loss of one batch with the subsets held fixed; pure in (params, batch,
// subsets). This is the function the finite-difference oracle probes.
inline LossParts<double> batch_loss_parts(const ModelParams& params, const Batch& batch,
                                          std::span<const TagSet> subsets,
                                          const LossConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  if (subsets.size() != batch.size())
    throw std::invalid_argument("batch_loss: subset count mismatch");
  auto view = make_params_view(params);
  auto embedded = detail::embed_batch(view, batch, subsets);
  return total_loss_parts(embedded, params.temperature(), cfg, params.cone());
}

inline double batch_loss(const ModelParams& params, const Batch& batch,
                         std::span<const TagSet> subsets, const LossConfig& cfg) {
  return batch_loss_parts(params, batch, subsets, cfg).total;
}

struct BatchGradients {
  double loss = 0.0;
  LossParts<double> parts;
  GradientSet grads;
};

// Reverse-mode gradients of the total loss with respect to every trainable
// parameter, the given subsets treated as fixed.
inline BatchGradients compute_gradients_fixed(const ModelParams& params, const Batch& batch,
                                              std::span<const TagSet> subsets,
                                              const LossConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("compute_gradients: empty batch");
  if (subsets.size() != batch.size())
    throw std::invalid_argument("compute_gradients: subset count mismatch");

  ad::Tape tape;
  const std::size_t n_params = parameter_count(params.dims);
  tape.reserve(n_params + 4096);
  auto view = make_tape_view(tape, params);
  auto embedded = detail::embed_batch(view, batch, subsets);
  ad::Var tau = ad::exp(view.log_temperature);
  LossParts<ad::Var> parts =
      total_loss_parts(embedded, tau, cfg, ConeConfig(params.cone_k, params.curvature()));

  BatchGradients out{parts.total.value(),
                     LossParts<double>{parts.contrastive.value(), parts.ent_impression_font.value(),
                                       parts.ent_subset_impression.value(), parts.total.value()},
                     GradientSet(params.dims)};
  if (!std::isfinite(out.loss)) throw DivergenceError("compute_gradients: non-finite loss");

  std::vector<double> adjoint = tape.gradient(parts.total.id());
  std::copy_n(adjoint.begin(), n_params, out.grads.flat().begin());
  return out;
}

// Samples one fresh subset per row, then differentiates with them fixed.
inline BatchGradients compute_gradients(const ModelParams& params, const Batch& batch,
                                        const LossConfig& cfg, Rng& subset_rng,
                                        SubsetPolicy policy = SubsetPolicy::UniformProper,
                                        double bernoulli_keep = 0.5) {
  if (batch.empty()) throw std::invalid_argument("compute_gradients: empty batch");
  std::vector<TagSet> subsets;
  subsets.reserve(batch.size());
  for (const FontRecord* rec : batch)
    subsets.push_back(sample_subset(rec->tags, subset_rng, policy, bernoulli_keep));
  return compute_gradients_fixed(params, batch, subsets, cfg);
}

// --- AdamW -----------------------------------------------------------------

struct AdamWState {
  long step = 0;
  std::vector<double> m, v;

  explicit AdamWState(const ModelDims& dims)
      : m(parameter_count(dims), 0.0), v(parameter_count(dims), 0.0) {}
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;
inline constexpr double kTauMin = 0.01;
inline constexpr double kTauMax = 1.0;

// Decoupled-weight-decay adaptive moment update. Decay applies to the encoder
// weights and the tag table, not to the scale/temperature scalars; the
// temperature is clamped to [0.01, 1] after the step.
inline void optimizer_step(ModelParams& params, const GradientSet& grads, AdamWState& state,
                           const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = parameter_count(params.dims);
  if (grads.flat().size() != n || state.m.size() != n)
    throw std::invalid_argument("optimizer_step: shape mismatch");

  std::vector<double> flat = flatten_params(params);
  state.step += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));

  std::span<const double> g = grads.flat();
  for (const BlockInfo& block : block_layout(params.dims)) {
    const double decay = block.weight_decay ? cfg.weight_decay : 0.0;
    for (std::size_t i = block.offset; i < block.offset + block.size; ++i) {
      state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g[i];
      state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      const double m_hat = state.m[i] / bc1;
      const double v_hat = state.v[i] / bc2;
      flat[i] -= cfg.learning_rate * (m_hat / (std::sqrt(v_hat) + kAdamEps) + decay * flat[i]);
    }
  }
  unflatten_params(flat, params);
  params.log_temperature =
      std::clamp(params.log_temperature, std::log(kTauMin), std::log(kTauMax));
}

// --- training loop -----------------------------------------------------------

struct StepLog {
  long step = 0;
  double l_cont = 0.0, l_ent_if = 0.0, l_ent_sub = 0.0, total = 0.0;
  double tau = 0.0, scale_font = 0.0, scale_imp = 0.0;
  double wall_ms = 0.0;

  bool operator==(const StepLog&) const = default;
};

struct CheckpointRecord {
  long step = 0;
  double val_loss = 0.0;
  ModelParams params;
};

struct TrainResult {
  ModelParams selected;
  long selected_step = 0;
  std::vector<StepLog> logs;
  std::vector<CheckpointRecord> checkpoints;
};

struct ModelConfig {
  ModelDims dims;
  double curvature_c = 1.0;
  double cone_k = 0.1;
};

// Shipped training configuration for the synthetic-small preset (vocab and
// feature dims are filled from the dataset). Used by the bundled tests and
// mirrored in the README walkthrough.
inline ModelConfig synthetic_small_model_config() {
  return ModelConfig{ModelDims{.tag_feature_dim = 32, .embed_dim = 16}, 1.0, 0.1};
}

inline TrainConfig synthetic_small_train_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.learning_rate = 2e-3;
  cfg.batch_size = 32;
  cfg.weight_decay = 0.0;
  cfg.epochs = 2000;
  // Fixed-epoch protocol: one validation pass at the end. The radial
  // hierarchy is carved out by the weak entailment terms long after the
  // contrastive validation loss has bottomed out, so early selection would
  // return a model without it.
  cfg.eval_every = 1000000000;
  cfg.seed = seed;
  return cfg;
}

// Lowest validation loss wins; ties go to the earliest checkpoint.
inline std::size_t select_checkpoint(std::span<const CheckpointRecord> checkpoints) {
  if (checkpoints.empty())
    throw std::invalid_argument("select_checkpoint: no validation evaluations recorded");
  std::size_t best = 0;
  for (std::size_t i = 1; i < checkpoints.size(); ++i)
    if (checkpoints[i].val_loss < checkpoints[best].val_loss) best = i;
  return best;
}

using StepCallback = std::function<void(const StepLog&)>;
using CheckpointCallback = std::function<void(const CheckpointRecord&)>;

namespace detail {

// Deterministic validation loss: fixed batch order over the val split,
// subsets drawn from a stream keyed by the step being evaluated.
inline double validation_loss(const ModelParams& params, const Dataset& data,
                              const TrainConfig& cfg, const LossConfig& loss_cfg, long step) {
  Rng rng = derive_stream(cfg.seed, "train.val_subsets", static_cast<std::uint64_t>(step));
  double total = 0.0;
  const auto& val = data.val_indices;
  const std::size_t b = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t start = 0; start < val.size(); start += b) {
    const std::size_t end = std::min(val.size(), start + b);
    Batch batch;
    std::vector<TagSet> subsets;
    for (std::size_t i = start; i < end; ++i) {
      const FontRecord& rec = data.records[static_cast<std::size_t>(val[i])];
      batch.push_back(&rec);
      subsets.push_back(sample_subset(rec.tags, rng, cfg.subset_policy, cfg.bernoulli_keep));
    }
    total += batch_loss(params, batch, subsets, loss_cfg);
  }
  return total;
}

}  // namespace detail

// Epoch-shuffled minibatch AdamW over the train split. Every step draws fresh
// subsets; checkpoints are taken every `eval_every` steps (or per epoch) plus
// at the final step, and the one with the lowest validation loss is selected.
// Identical (seed, config, dataset) reproduce identical trajectories.
inline TrainResult train(const Dataset& data, const ModelConfig& model_cfg,
                         const TrainConfig& cfg, const LossConfig& loss_cfg,
                         const StepCallback& on_step = nullptr,
                         const CheckpointCallback& on_checkpoint = nullptr) {
  cfg.validate();
  loss_cfg.validate();
  if (data.train_indices.empty()) throw std::invalid_argument("train: empty train split");

  ModelDims dims = model_cfg.dims;
  dims.vocab = data.vocab.size();
  dims.feature_dim = data.feature_dim;
  ModelParams params = init_params(dims, model_cfg.curvature_c, model_cfg.cone_k, cfg.seed);

  TrainResult result;
  const std::size_t n_train = data.train_indices.size();
  const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n_train);
  const std::size_t steps_per_epoch = n_train / b;  // trailing partial batch is dropped
  const long total_steps = static_cast<long>(steps_per_epoch) * cfg.epochs;

  if (total_steps == 0) {
    result.selected = params;
    result.selected_step = 0;
    return result;
  }

  AdamWState opt_state(params.dims);
  Rng shuffle_rng = derive_stream(cfg.seed, "train.shuffle");
  Rng subset_rng = derive_stream(cfg.seed, "train.subsets");
  std::vector<int> order(data.train_indices);

  auto maybe_checkpoint = [&](long step) {
    if (data.val_indices.empty()) return;
    CheckpointRecord rec{step, detail::validation_loss(params, data, cfg, loss_cfg, step), params};
    if (on_checkpoint) on_checkpoint(rec);
    result.checkpoints.push_back(std::move(rec));
  };

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t k = 0; k < steps_per_epoch; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      Batch batch;
      batch.reserve(b);
      for (std::size_t i = k * b; i < (k + 1) * b; ++i)
        batch.push_back(&data.records[static_cast<std::size_t>(order[i])]);

      BatchGradients bg = [&]() -> BatchGradients {
        try {
          return compute_gradients(params, batch, loss_cfg, subset_rng, cfg.subset_policy,
                                   cfg.bernoulli_keep);
        } catch (const DivergenceError&) {
          throw DivergenceError("train: non-finite loss at step " + std::to_string(step + 1));
        }
      }();
      optimizer_step(params, bg.grads, opt_state, cfg);
      ++step;

      StepLog log;
      log.step = step;
      log.l_cont = bg.parts.contrastive;
      log.l_ent_if = bg.parts.ent_impression_font;
      log.l_ent_sub = bg.parts.ent_subset_impression;
      log.total = bg.parts.total;
      log.tau = params.temperature();
      log.scale_font = params.scale_font();
      log.scale_imp = params.scale_imp();
      if (cfg.log_timing) {
        const auto t1 = std::chrono::steady_clock::now();
        log.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      }
      if (on_step) on_step(log);
      result.logs.push_back(log);

      const bool last = step == total_steps;
      const bool cadence = cfg.eval_every > 0 ? (step % cfg.eval_every == 0)
                                              : (k + 1 == steps_per_epoch);
      if (cadence || last) maybe_checkpoint(step);
    }
  }

  if (result.checkpoints.empty()) {
    result.selected = params;  // no validation split: final parameters
    result.selected_step = step;
  } else {
    const std::size_t best = select_checkpoint(result.checkpoints);
    result.selected = result.checkpoints[best].params;
    result.selected_step = result.checkpoints[best].step;
  }
  return result;
}

}  // namespace hyperco
