#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hyperco/cones.hpp"
#include "hyperco/eval.hpp"
#include "hyperco/losses.hpp"
#include "hyperco/manifold.hpp"
#include "hyperco/training.hpp"

// Fast property suites behind the `check` CLI subcommand: manifold closure
// and isometry, cone geometry against the law-of-cosines oracle, loss
// identities, a finite-difference gradient probe, and the ranking-metric
// oracles. Everything here is seeded and deterministic.

namespace hyperco::selftest {

struct Outcome {
  bool passed = true;
  std::vector<std::string> lines;
};

namespace detail {

inline TangentAtOriginD random_tangent(Rng& rng, int dim, double lo, double hi) {
  TangentAtOriginD v;
  v.space.resize(static_cast<std::size_t>(dim));
  double n2 = 0.0;
  for (double& x : v.space) {
    x = rng.normal();
    n2 += x * x;
  }
  const double target = rng.uniform(lo, hi);
  const double scale = n2 > 0.0 ? target / std::sqrt(n2) : 0.0;
  for (double& x : v.space) x *= scale;
  return v;
}

inline double oracle_exterior_angle(const LorentzPointD& x, const LorentzPointD& y,
                                    Curvature cv) {
  const auto o = origin_point(x.dim(), cv);
  const double sc = cv.sqrt_c();
  const double a = sc * geodesic_distance(x, o, cv);
  const double b = sc * geodesic_distance(x, y, cv);
  const double g = sc * geodesic_distance(o, y, cv);
  const double cos_angle =
      (std::cosh(a) * std::cosh(b) - std::cosh(g)) / (std::sinh(a) * std::sinh(b));
  return std::numbers::pi - acos_clamped(cos_angle);
}

inline void record(Outcome& out, const std::string& name, bool ok, const std::string& detail = "") {
  out.passed = out.passed && ok;
  out.lines.push_back(std::string(ok ? "[ok]   " : "[FAIL] ") + name +
                      (detail.empty() ? "" : " (" + detail + ")"));
}

}  // namespace detail

inline Outcome run_manifold_checks(std::uint64_t seed = 1) {
  Outcome out;
  for (const double c : {1.0, 4.0}) {
    const Curvature cv(c);
    Rng rng = derive_stream(seed, "selftest.manifold", static_cast<std::uint64_t>(c));
    double worst_tight = 0.0, worst_scaled = 0.0, worst_iso = 0.0;
    for (int i = 0; i < 2000; ++i) {
      auto v = detail::random_tangent(rng, 8, 0.0, 7.0 / cv.sqrt_c());
      worst_tight = std::max(worst_tight, closure_residual(exp_map_origin(v, cv), cv));
    }
    for (int i = 0; i < 2000; ++i) {
      auto v = detail::random_tangent(rng, 8, 0.0, 10.0);
      auto p = exp_map_origin(v, cv);
      worst_scaled = std::max(worst_scaled,
                              closure_residual(p, cv) / std::max(1.0, c * p.time * p.time));
      double n2 = 0.0;
      for (double s : v.space) n2 += s * s;
      worst_iso = std::max(worst_iso, std::abs(radial_distance(p, cv) - std::sqrt(n2)));
    }
    std::ostringstream tag;
    tag << "c=" << c;
    detail::record(out, "hyperboloid closure <= 1e-9 (|v| <= 7/sqrt(c), " + tag.str() + ")",
                   worst_tight <= 1e-9);
    detail::record(out, "scaled closure <= 1e-9 (|v| <= 10, " + tag.str() + ")",
                   worst_scaled <= 1e-9);
    detail::record(out, "radial isometry <= 1e-9 (|v| <= 10, " + tag.str() + ")",
                   worst_iso <= 1e-9);

    double worst_tri = 0.0;
    for (int i = 0; i < 1000; ++i) {
      auto x = exp_map_origin(detail::random_tangent(rng, 4, 0.0, 10.0), cv);
      auto y = exp_map_origin(detail::random_tangent(rng, 4, 0.0, 10.0), cv);
      auto z = exp_map_origin(detail::random_tangent(rng, 4, 0.0, 10.0), cv);
      worst_tri = std::max(worst_tri, geodesic_distance(x, z, cv) - geodesic_distance(x, y, cv) -
                                          geodesic_distance(y, z, cv));
    }
    detail::record(out, "triangle inequality (" + tag.str() + ")", worst_tri <= 1e-9);
  }
  return out;
}

inline Outcome run_cone_checks(std::uint64_t seed = 2) {
  Outcome out;
  const ConeConfig cfg(0.1, Curvature(1.0));
  const auto p6 = half_aperture(lift_spatial<double>({0.4, 0.0}, cfg.curvature), cfg);
  detail::record(out, "aperture asin(0.5) = pi/6", std::abs(p6 - std::numbers::pi / 6.0) <= 1e-9);
  const auto clamp = half_aperture(lift_spatial<double>({0.1, 0.0}, cfg.curvature), cfg);
  detail::record(out, "aperture clamp region = pi/2",
                 std::abs(clamp - std::numbers::pi / 2.0) <= 1e-12);

  Rng rng = derive_stream(seed, "selftest.cones");
  double worst = 0.0;
  bool hinge_ok = true;
  for (int i = 0; i < 1000; ++i) {
    auto x = exp_map_origin(detail::random_tangent(rng, 4, 0.2, 3.0), cfg.curvature);
    auto y = exp_map_origin(detail::random_tangent(rng, 4, 0.2, 3.0), cfg.curvature);
    worst = std::max(worst, std::abs(exterior_angle(x, y, cfg) -
                                     detail::oracle_exterior_angle(x, y, cfg.curvature)));
    const double viol = cone_violation(x, y, cfg);
    hinge_ok = hinge_ok && viol >= 0.0 && (cone_contains(x, y, cfg) == (viol == 0.0));
  }
  detail::record(out, "exterior angle vs law-of-cosines oracle <= 1e-6", worst <= 1e-6);
  detail::record(out, "hinge consistency (violation = 0 iff contained)", hinge_ok);

  bool radial_ok = true;
  for (int i = 0; i < 200; ++i) {
    auto x = exp_map_origin(detail::random_tangent(rng, 3, 0.3, 1.5), cfg.curvature);
    auto v = log_map_origin(x, cfg.curvature);
    const double factor = rng.uniform(1.1, 2.5);
    for (double& s : v.space) s *= factor;
    auto y = exp_map_origin(v, cfg.curvature);
    radial_ok = radial_ok && cone_contains(x, y, cfg);
  }
  detail::record(out, "radial containment", radial_ok);
  return out;
}

inline Outcome run_loss_checks(std::uint64_t seed = 3) {
  Outcome out;
  const Curvature cv(1.0);
  Rng rng = derive_stream(seed, "selftest.losses");
  auto point = [&](double r, double a) {
    return exp_map_origin(TangentAtOriginD{{r * std::cos(a), r * std::sin(a)}}, cv);
  };

  std::vector<LorentzPointD> q{point(1.0, 0.2)};
  std::vector<LorentzPointD> k{point(0.6, 1.0)};
  detail::record(out, "contrastive B=1 is exactly zero",
                 contrastive_loss(std::span<const LorentzPointD>(q),
                                  std::span<const LorentzPointD>(k), 0.07, cv) == 0.0);

  auto a = point(0.8, 0.0);
  auto b = point(0.8, 1.0);
  std::vector<LorentzPointD> qq{a, a}, kk{b, b};
  const double two_ln_two = contrastive_loss(std::span<const LorentzPointD>(qq),
                                             std::span<const LorentzPointD>(kk), 0.07, cv);
  detail::record(out, "uniform B=2 contrastive = 2 ln 2",
                 std::abs(two_ln_two - 2.0 * std::log(2.0)) <= 1e-9);
  return out;
}

inline Outcome run_gradient_checks(std::uint64_t seed = 4) {
  Outcome out;
  ModelDims dims{.vocab = 5, .feature_dim = 6, .tag_feature_dim = 5, .embed_dim = 4};
  auto params = init_params(dims, 1.0, 0.1, seed);
  Rng rng = derive_stream(seed, "selftest.instance");
  std::vector<FontRecord> records;
  for (int n = 0; n < 3; ++n) {
    FontRecord rec;
    rec.font_id = "probe" + std::to_string(n);
    for (int i = 0; i < dims.feature_dim; ++i) rec.features.push_back(rng.normal());
    std::vector<int> ids;
    const int k = rng.uniform_int(1, 3);
    for (int i = 0; i < k; ++i) ids.push_back(rng.uniform_int(0, dims.vocab - 1));
    rec.tags = TagSet::from_ids(std::move(ids));
    records.push_back(std::move(rec));
  }
  Batch batch;
  for (const auto& rec : records) batch.push_back(&rec);
  std::vector<TagSet> subsets;
  Rng sub_rng = derive_stream(seed, "selftest.subsets");
  for (const auto& rec : records) subsets.push_back(sample_subset(rec.tags, sub_rng));

  const LossConfig cfg;
  auto bg = compute_gradients_fixed(params, batch, subsets, cfg);
  auto flat = flatten_params(params);
  const double h = 1e-4;
  double worst = 0.0;
  int checked = 0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double g = bg.grads.flat()[i];
    if (std::abs(g) <= 1e-6) continue;  // quick probe checks the dominant coordinates
    ModelParams probe = params;
    const double keep = flat[i];
    flat[i] = keep + h;
    unflatten_params(flat, probe);
    const double up = batch_loss(probe, batch, subsets, cfg);
    flat[i] = keep - h;
    unflatten_params(flat, probe);
    const double down = batch_loss(probe, batch, subsets, cfg);
    flat[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(g - fd) / std::max(std::abs(g), std::abs(fd)));
    ++checked;
  }
  std::ostringstream det;
  det << checked << " coordinates, worst rel " << worst;
  detail::record(out, "analytic gradient vs finite differences <= 1e-4", worst <= 1e-4, det.str());
  return out;
}

inline Outcome run_metric_checks() {
  Outcome out;
  bool ap_ok = true;
  for (int n = 1; n <= 6 && ap_ok; ++n) {
    std::vector<int> ranked(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ranked[static_cast<std::size_t>(i)] = i;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      std::unordered_set<int> rel;
      for (int i = 0; i < n; ++i)
        if (mask & (1u << i)) rel.insert(i);
      double brute = 0.0;
      int hits = 0;
      for (int i = 0; i < n; ++i)
        if (rel.count(i)) brute += static_cast<double>(++hits) / (i + 1);
      brute /= static_cast<double>(rel.size());
      if (std::abs(average_precision(Ranking{0, ranked}, rel) - brute) > 1e-12) ap_ok = false;
    }
  }
  detail::record(out, "average precision matches enumeration (all patterns, n <= 6)", ap_ok);

  const std::vector<double> rel{0.3, 1.0, 0.5, 0.0, 0.8};
  const std::vector<int> ranked{0, 1, 2, 3, 4};
  const double dcg = 0.3 + 1.0 / std::log2(3.0) + 0.5 / 2.0 + 0.8 / std::log2(6.0);
  const double idcg = 1.0 + 0.8 / std::log2(3.0) + 0.5 / 2.0 + 0.3 / std::log2(5.0);
  detail::record(out, "nDCG hand-worked case",
                 std::abs(ndcg_of_ranking(rel, ranked, 100) - dcg / idcg) <= 1e-12);
  const std::vector<double> sorted_rel{0.9, 0.5, 0.1};
  detail::record(out, "nDCG of a relevance-sorted ranking = 1",
                 ndcg_of_ranking(sorted_rel, std::vector<int>{0, 1, 2}, 100) == 1.0);
  return out;
}

inline bool run_all(std::ostream& os) {
  bool ok = true;
  const std::pair<const char*, std::function<Outcome()>> suites[] = {
      {"manifold", [] { return run_manifold_checks(); }},
      {"cones", [] { return run_cone_checks(); }},
      {"losses", [] { return run_loss_checks(); }},
      {"gradients", [] { return run_gradient_checks(); }},
      {"metrics", [] { return run_metric_checks(); }},
  };
  for (const auto& [name, fn] : suites) {
    Outcome o = fn();
    os << "== " << name << " ==\n";
    for (const auto& line : o.lines) os << "  " << line << "\n";
    ok = ok && o.passed;
  }
  os << (ok ? "all checks passed\n" : "CHECKS FAILED\n");
  return ok;
}

}  // namespace hyperco::selftest
