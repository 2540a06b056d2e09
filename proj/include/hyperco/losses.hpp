#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "hyperco/cones.hpp"
#include "hyperco/manifold.hpp"
#include "hyperco/model.hpp"

// The training objective: a bidirectional temperature-scaled contrastive loss
// over negative geodesic distances (weights 1/4 impression->font,
// 1/4 subset->font, 1/2 font->impression), plus two hinge entailment sums
// (impression->font and subset->impression) weighted by lambda1/lambda2.
// Sums run over the batch as written; no mean reduction.

namespace hyperco {

struct LossConfig {
  double lambda1 = 0.1;  // weight on impression->font entailment
  double lambda2 = 0.1;  // weight on subset->impression entailment
  bool enable_sub_contrastive = true;
  bool enable_ent_if = true;
  bool enable_ent_sub = true;

  void validate() const {
    if (!(lambda1 >= 0.0 && lambda2 >= 0.0))
      throw std::invalid_argument("LossConfig: lambdas must be nonnegative");
  }
};

template <typename Scalar>
struct EmbeddedBatch {
  std::vector<LorentzPoint<Scalar>> fonts;     // f_n
  std::vector<LorentzPoint<Scalar>> imps;      // i_n (full tag set)
  std::vector<LorentzPoint<Scalar>> sub_imps;  // subset embedding paired with row n

  std::size_t size() const { return fonts.size(); }

  void validate() const {
    if (fonts.empty() || fonts.size() != imps.size() || fonts.size() != sub_imps.size())
      throw std::invalid_argument("EmbeddedBatch: rows must be non-empty and congruent");
  }
};

namespace detail {

// Row n of `scores` already holds -d(query_n, key_m)/tau. Cross entropy of
// the paired key under a max-shifted log-sum-exp; exact 0 for B = 1.
template <typename Scalar>
Scalar paired_cross_entropy_rows(const std::vector<std::vector<Scalar>>& scores) {
  using std::exp;
  using std::log;
  const std::size_t b = scores.size();
  Scalar total = make_like(scores[0][0], 0.0);
  for (std::size_t n = 0; n < b; ++n) {
    const auto& row = scores[n];
    double shift = value_of(row[0]);
    for (std::size_t m = 1; m < b; ++m) shift = std::max(shift, value_of(row[m]));
    Scalar sum = exp(row[0] - shift);
    for (std::size_t m = 1; m < b; ++m) sum += exp(row[m] - shift);
    total += log(sum) + shift - row[n];
  }
  return total;
}

}  // namespace detail

// Softmax cross-entropy over negative geodesic distances; query n is
// paired with key n, every key is a candidate. Computed with the max-shift
// log-sum-exp, so distances up to ~1e4 and tau down to 0.01 stay finite.
template <typename Scalar>
Scalar contrastive_loss(std::span<const LorentzPoint<Scalar>> queries,
                        std::span<const LorentzPoint<Scalar>> keys, const Scalar& tau,
                        Curvature cv) {
  if (queries.empty() || queries.size() != keys.size())
    throw std::invalid_argument("contrastive_loss: length mismatch or empty batch");
  if (!(value_of(tau) > 0.0)) throw std::invalid_argument("contrastive_loss: tau must be positive");

  const std::size_t b = queries.size();
  Scalar neg_inv_tau = -1.0 / tau;
  std::vector<std::vector<Scalar>> scores(b);
  for (std::size_t n = 0; n < b; ++n) {
    scores[n].reserve(b);
    for (std::size_t m = 0; m < b; ++m)
      scores[n].push_back(geodesic_distance(queries[n], keys[m], cv) * neg_inv_tau);
  }
  return detail::paired_cross_entropy_rows(scores);
}

// 1/4 impression->font + 1/4 subset->font + 1/2 font->impression. With the
// subset term disabled (ablation), the bidirectional pair reweights to
// 1/2 + 1/2. The impression/font distance matrix is shared between the two
// directions; d is symmetric, so this matches the direct per-direction calls
// bit for bit.
template <typename Scalar>
Scalar contrastive_total(const EmbeddedBatch<Scalar>& batch, const Scalar& tau,
                         const LossConfig& cfg, Curvature cv) {
  batch.validate();
  cfg.validate();
  if (!(value_of(tau) > 0.0)) throw std::invalid_argument("contrastive_total: tau must be positive");
  const std::size_t b = batch.size();
  Scalar neg_inv_tau = -1.0 / tau;

  std::vector<std::vector<Scalar>> i2f(b);  // row n: -d(i_n, f_m)/tau
  for (std::size_t n = 0; n < b; ++n) {
    i2f[n].reserve(b);
    for (std::size_t m = 0; m < b; ++m)
      i2f[n].push_back(geodesic_distance(batch.imps[n], batch.fonts[m], cv) * neg_inv_tau);
  }
  std::vector<std::vector<Scalar>> f2i(b);  // row n: -d(f_n, i_m)/tau
  for (std::size_t n = 0; n < b; ++n) {
    f2i[n].reserve(b);
    for (std::size_t m = 0; m < b; ++m) f2i[n].push_back(i2f[m][n]);
  }

  Scalar l_i2f = detail::paired_cross_entropy_rows(i2f);
  Scalar l_f2i = detail::paired_cross_entropy_rows(f2i);
  if (!cfg.enable_sub_contrastive) return 0.5 * l_i2f + 0.5 * l_f2i;

  std::vector<std::vector<Scalar>> s2f(b);
  for (std::size_t n = 0; n < b; ++n) {
    s2f[n].reserve(b);
    for (std::size_t m = 0; m < b; ++m)
      s2f[n].push_back(geodesic_distance(batch.sub_imps[n], batch.fonts[m], cv) * neg_inv_tau);
  }
  Scalar l_s2f = detail::paired_cross_entropy_rows(s2f);
  return 0.25 * l_i2f + 0.25 * l_s2f + 0.5 * l_f2i;
}

// Sum of per-pair cone violations; only the paired (n, n) terms contribute.
// Coincident apex/member rows contribute exactly zero (see
// cone_violation_guarded); a degenerate apex still signals.
template <typename Scalar>
Scalar entailment_batch(std::span<const LorentzPoint<Scalar>> apexes,
                        std::span<const LorentzPoint<Scalar>> members,
                        const ConeConfig& cone) {
  if (apexes.empty() || apexes.size() != members.size())
    throw std::invalid_argument("entailment_batch: length mismatch or empty batch");
  Scalar total = cone_violation_guarded(apexes[0], members[0], cone);
  for (std::size_t n = 1; n < apexes.size(); ++n)
    total += cone_violation_guarded(apexes[n], members[n], cone);
  return total;
}

template <typename Scalar>
struct LossParts {
  Scalar contrastive{};
  Scalar ent_impression_font{};
  Scalar ent_subset_impression{};
  Scalar total{};
};

template <typename Scalar>
LossParts<Scalar> total_loss_parts(const EmbeddedBatch<Scalar>& batch, const Scalar& tau,
                                   const LossConfig& cfg, const ConeConfig& cone) {
  batch.validate();
  cfg.validate();
  LossParts<Scalar> parts;
  parts.contrastive = contrastive_total(batch, tau, cfg, cone.curvature);
  parts.ent_impression_font = make_like(tau, 0.0);
  parts.ent_subset_impression = make_like(tau, 0.0);
  parts.total = parts.contrastive;
  if (cfg.enable_ent_if) {
    parts.ent_impression_font = entailment_batch<Scalar>(batch.imps, batch.fonts, cone);
    parts.total += cfg.lambda1 * parts.ent_impression_font;
  }
  if (cfg.enable_ent_sub) {
    parts.ent_subset_impression = entailment_batch<Scalar>(batch.sub_imps, batch.imps, cone);
    parts.total += cfg.lambda2 * parts.ent_subset_impression;
  }
  return parts;
}

template <typename Scalar>
Scalar total_loss(const EmbeddedBatch<Scalar>& batch, const Scalar& tau,
                  const LossConfig& cfg, const ConeConfig& cone) {
  return total_loss_parts(batch, tau, cfg, cone).total;
}

inline double total_loss(const EmbeddedBatch<double>& batch, const ModelParams& params,
                         const LossConfig& cfg) {
  return total_loss(batch, params.temperature(), cfg, params.cone());
}

}  // namespace hyperco
