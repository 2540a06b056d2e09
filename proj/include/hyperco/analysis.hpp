#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hyperco/data.hpp"
#include "hyperco/model.hpp"
#include "hyperco/parallel.hpp"
#include "hyperco/training.hpp"

// Interpretability studies over a trained model: radial distance histograms
// for fonts / tag sets / tag subsets, geodesic traversal from the origin to a
// font against a masked-tag-set candidate pool, and per-tag style-specificity
// ranking by radial distance.

namespace hyperco {

struct RadialSamples {
  std::vector<double> fonts, tag_sets, subsets;
  double mean_fonts = 0.0, mean_tag_sets = 0.0, mean_subsets = 0.0;
  std::vector<double> bin_edges;  // bins + 1 edges, fixed width
  std::vector<int> counts_fonts, counts_tag_sets, counts_subsets;
};

namespace detail {

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline std::vector<int> histogram_counts(std::span<const double> v,
                                         std::span<const double> edges) {
  std::vector<int> counts(edges.size() - 1, 0);
  const double lo = edges.front(), hi = edges.back();
  const auto bins = counts.size();
  for (double x : v) {
    if (x < lo || x > hi) continue;
    auto bin = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
    if (bin >= bins) bin = bins - 1;
    ++counts[bin];
  }
  return counts;
}

}  // namespace detail

// Embeds every test font, its full tag set, and one sampled subset per font.
inline RadialSamples radial_histogram(const ModelParams& params, const Dataset& data,
                                      std::uint64_t seed, int bins = 30) {
  if (data.test_indices.empty()) throw std::invalid_argument("radial_histogram: empty test split");
  if (bins < 1) throw std::invalid_argument("radial_histogram: bins must be >= 1");
  const auto view = make_params_view(params);
  const Curvature cv = params.curvature();
  Rng rng = derive_stream(seed, "analysis.subsets");

  RadialSamples out;
  for (int idx : data.test_indices) {
    const FontRecord& rec = data.records[static_cast<std::size_t>(idx)];
    out.fonts.push_back(radial_distance(encode_font(view, rec.features), cv));
    out.tag_sets.push_back(radial_distance(encode_tagset(view, rec.tags), cv));
    out.subsets.push_back(radial_distance(encode_tagset(view, sample_subset(rec.tags, rng)), cv));
  }
  out.mean_fonts = detail::mean_of(out.fonts);
  out.mean_tag_sets = detail::mean_of(out.tag_sets);
  out.mean_subsets = detail::mean_of(out.subsets);

  double hi = 0.0;
  for (const auto* v : {&out.fonts, &out.tag_sets, &out.subsets})
    for (double x : *v) hi = std::max(hi, x);
  if (hi == 0.0) hi = 1.0;
  out.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i)
    out.bin_edges[static_cast<std::size_t>(i)] = hi * static_cast<double>(i) / static_cast<double>(bins);
  out.counts_fonts = detail::histogram_counts(out.fonts, out.bin_edges);
  out.counts_tag_sets = detail::histogram_counts(out.tag_sets, out.bin_edges);
  out.counts_subsets = detail::histogram_counts(out.subsets, out.bin_edges);
  return out;
}

// Candidate descriptions for traversal: masked variants of every record's tag
// set (per-tag keep probability, empty draws rejected), deduplicated, capped.
struct PoolPolicy {
  int variants_per_record = 30;
  double keep_prob = 0.5;
  std::size_t pool_max = 100000;

  void validate() const {
    if (variants_per_record < 1) throw std::invalid_argument("PoolPolicy: variants_per_record >= 1");
    if (!(keep_prob > 0.0 && keep_prob <= 1.0))
      throw std::invalid_argument("PoolPolicy: keep_prob must be in (0, 1]");
    if (pool_max < 1) throw std::invalid_argument("PoolPolicy: pool_max >= 1");
  }
};

inline std::vector<TagSet> build_candidate_pool(const Dataset& data, const PoolPolicy& policy,
                                                std::uint64_t seed) {
  policy.validate();
  if (data.records.empty()) throw std::invalid_argument("build_candidate_pool: empty dataset");
  Rng rng = derive_stream(seed, "analysis.pool");

  std::vector<TagSet> pool;
  std::set<TagSet> seen;
  for (const FontRecord& rec : data.records) {
    for (int v = 0; v < policy.variants_per_record && pool.size() < policy.pool_max; ++v) {
      std::vector<int> keep;
      for (int id : rec.tags.ids())
        if (rng.uniform() < policy.keep_prob) keep.push_back(id);
      if (keep.empty()) continue;
      TagSet t = TagSet::from_ids(std::move(keep));
      if (seen.insert(t).second) pool.push_back(std::move(t));
    }
    if (pool.size() >= policy.pool_max) break;
  }
  if (pool.empty()) throw DataError("build_candidate_pool: pool is empty");
  return pool;
}

struct TraversalNeighbor {
  int pool_index = 0;
  double distance = 0.0;
};

struct TraversalStep {
  double t = 0.0;
  std::vector<TraversalNeighbor> neighbors;  // top_k nearest, ties by pool index
};

// Walks t = k/(n_points-1) along the geodesic from o to the font embedding
// and retrieves the nearest pool tag sets at each query point. Pool
// embeddings are computed once.
inline std::vector<TraversalStep> traverse(const ModelParams& params, const Dataset& data,
                                           const std::string& font_id,
                                           std::span<const TagSet> pool, int n_points = 50,
                                           int top_k = 1, int threads = 1) {
  if (pool.empty()) throw std::invalid_argument("traverse: empty candidate pool");
  if (n_points < 2) throw std::invalid_argument("traverse: n_points must be >= 2");
  if (top_k < 1) throw std::invalid_argument("traverse: top_k must be >= 1");
  const FontRecord* font = nullptr;
  for (const FontRecord& rec : data.records)
    if (rec.font_id == font_id) {
      font = &rec;
      break;
    }
  if (!font) throw DataError("traverse: unknown font id " + font_id);

  const auto view = make_params_view(params);
  const Curvature cv = params.curvature();
  std::vector<LorentzPointD> pool_points(pool.size());
  parallel_for_indexed(pool.size(), threads,
                       [&](std::size_t i) { pool_points[i] = encode_tagset(view, pool[i]); });
  const LorentzPointD target = encode_font(view, font->features);

  std::vector<TraversalStep> steps(static_cast<std::size_t>(n_points));
  const int keep = std::min<int>(top_k, static_cast<int>(pool.size()));
  parallel_for_indexed(steps.size(), threads, [&](std::size_t k) {
    const double t = static_cast<double>(k) / static_cast<double>(n_points - 1);
    const LorentzPointD query = geodesic_point_from_origin(target, t, cv);

    std::vector<TraversalNeighbor> order(pool_points.size());
    for (std::size_t i = 0; i < pool_points.size(); ++i)
      order[i] = TraversalNeighbor{static_cast<int>(i),
                                   geodesic_distance(query, pool_points[i], cv)};
    std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                      [](const TraversalNeighbor& a, const TraversalNeighbor& b) {
                        if (a.distance != b.distance) return a.distance < b.distance;
                        return a.pool_index < b.pool_index;
                      });
    order.resize(static_cast<std::size_t>(keep));
    steps[k] = TraversalStep{t, std::move(order)};
  });
  return steps;
}

enum class SpecificityGroup { Near, Mid, Far };

inline const char* to_string(SpecificityGroup g) {
  switch (g) {
    case SpecificityGroup::Near: return "Near";
    case SpecificityGroup::Mid: return "Mid";
    case SpecificityGroup::Far: return "Far";
  }
  return "?";
}

struct SpecificityRow {
  int tag_id = 0;
  std::string tag;
  double distance = 0.0;
  SpecificityGroup group = SpecificityGroup::Near;
  std::optional<int> coverage;  // ground truth when available (synthetic data)
};

struct SpecificityTable {
  std::vector<SpecificityRow> rows;  // sorted by descending distance
};

// Embeds each vocabulary tag as a singleton set and partitions by radial
// distance into Near / Mid / Far tertiles (sizes differ by at most one,
// remainder to the nearer groups; boundary ties fall to the nearer group).
inline SpecificityTable tag_specificity(const ModelParams& params, const Vocabulary& vocab,
                                        const std::map<std::string, int>* ground_truth = nullptr) {
  if (vocab.size() == 0) throw std::invalid_argument("tag_specificity: empty vocabulary");
  const auto view = make_params_view(params);
  const Curvature cv = params.curvature();

  std::vector<SpecificityRow> rows;
  rows.reserve(static_cast<std::size_t>(vocab.size()));
  for (int id = 0; id < vocab.size(); ++id) {
    SpecificityRow row;
    row.tag_id = id;
    row.tag = vocab.tag(id);
    row.distance = radial_distance(encode_tagset(view, TagSet::from_ids({id})), cv);
    if (ground_truth) {
      auto it = ground_truth->find(row.tag);
      if (it != ground_truth->end()) row.coverage = it->second;
    }
    rows.push_back(std::move(row));
  }

  // Group in ascending distance order, then emit sorted descending.
  std::vector<std::size_t> asc(rows.size());
  std::iota(asc.begin(), asc.end(), std::size_t{0});
  std::sort(asc.begin(), asc.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].distance != rows[b].distance) return rows[a].distance < rows[b].distance;
    return rows[a].tag_id < rows[b].tag_id;
  });

  const std::size_t n = rows.size();
  const std::size_t base = n / 3, rem = n % 3;
  std::size_t near_n = base + (rem >= 1 ? 1 : 0);
  std::size_t mid_n = base + (rem >= 2 ? 1 : 0);
  // Boundary ties move into the nearer group.
  auto extend_over_ties = [&](std::size_t boundary) {
    while (boundary > 0 && boundary < n &&
           rows[asc[boundary]].distance == rows[asc[boundary - 1]].distance)
      ++boundary;
    return boundary;
  };
  std::size_t near_end = extend_over_ties(near_n);
  std::size_t mid_end = extend_over_ties(std::min(n, near_end + mid_n));
  for (std::size_t pos = 0; pos < n; ++pos) {
    SpecificityGroup g = pos < near_end ? SpecificityGroup::Near
                        : pos < mid_end ? SpecificityGroup::Mid
                                        : SpecificityGroup::Far;
    rows[asc[pos]].group = g;
  }

  SpecificityTable table;
  table.rows = std::move(rows);
  std::sort(table.rows.begin(), table.rows.end(), [](const SpecificityRow& a, const SpecificityRow& b) {
    if (a.distance != b.distance) return a.distance > b.distance;
    return a.tag_id < b.tag_id;
  });
  return table;
}

// Spearman rank correlation with tie-averaged ranks.
inline double spearman_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman_correlation: need two equal-length samples");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = detail::mean_of(ra), mb = detail::mean_of(rb);
  double num = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return num / std::sqrt(va * vb);
}

}  // namespace hyperco
