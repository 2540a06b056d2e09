#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "hyperco/data.hpp"
#include "hyperco/model.hpp"
#include "hyperco/parallel.hpp"
#include "hyperco/rng.hpp"

// Bidirectional retrieval metrics on the test split: mean average precision
// under single-tag and multi-tag query protocols (relevant = candidate tag set
// contains every query tag), and nDCG@100 with graded tag-agreement relevance
// (precision / recall / F1) in both directions.

namespace hyperco {

// Candidates in descending score order = ascending geodesic distance;
// equal distances break ties by ascending candidate id.
struct Ranking {
  int query_id = 0;
  std::vector<int> candidates;
};

inline Ranking rank_by_distance(int query_id, std::span<const double> distances) {
  Ranking r;
  r.query_id = query_id;
  r.candidates.resize(distances.size());
  std::iota(r.candidates.begin(), r.candidates.end(), 0);
  std::sort(r.candidates.begin(), r.candidates.end(), [&](int a, int b) {
    const double da = distances[static_cast<std::size_t>(a)];
    const double db = distances[static_cast<std::size_t>(b)];
    if (da != db) return da < db;
    return a < b;
  });
  return r;
}

// Mean over the relevant items of precision at their rank, over the full
// candidate list.
inline double average_precision(const Ranking& ranking,
                                const std::unordered_set<int>& relevant) {
  if (relevant.empty()) throw std::invalid_argument("average_precision: empty relevant set");
  double sum = 0.0;
  int hits = 0;
  for (std::size_t rank = 0; rank < ranking.candidates.size(); ++rank) {
    if (relevant.count(ranking.candidates[rank])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits != static_cast<int>(relevant.size()))
    throw std::invalid_argument("average_precision: relevant set not within candidates");
  return sum / static_cast<double>(relevant.size());
}

struct EvalConfig {
  int ndcg_k = 100;
  int multi_subsets_per_set = 5;  // subset draws per test tag set for mAP-multi
  int threads = 1;                // cap on per-query parallelism
};

namespace detail {

inline std::vector<LorentzPointD> embed_test_fonts(const ParamsView<double>& view,
                                                   const Dataset& data, int threads = 1) {
  std::vector<LorentzPointD> out(data.test_indices.size());
  parallel_for_indexed(out.size(), threads, [&](std::size_t i) {
    out[i] = encode_font(
        view, data.records[static_cast<std::size_t>(data.test_indices[i])].features);
  });
  return out;
}

// Per-query values computed independently into slots, reduced in index order;
// queries flagged unused are skipped. Deterministic for any thread count.
struct QuerySlot {
  double value = 0.0;
  bool used = false;
};

inline double ordered_mean(const std::vector<QuerySlot>& slots, const char* what) {
  double sum = 0.0;
  int used = 0;
  for (const QuerySlot& s : slots)
    if (s.used) {
      sum += s.value;
      ++used;
    }
  if (used == 0) throw std::invalid_argument(std::string(what) + ": no valid queries");
  return sum / static_cast<double>(used);
}

inline std::vector<double> distances_to(const LorentzPointD& query,
                                        std::span<const LorentzPointD> candidates,
                                        Curvature cv) {
  std::vector<double> d;
  d.reserve(candidates.size());
  for (const auto& c : candidates) d.push_back(geodesic_distance(query, c, cv));
  return d;
}

}  // namespace detail

// Every vocabulary tag as a singleton query against all test fonts; tags with
// no relevant test font are skipped.
inline double map_single(const ModelParams& params, const Dataset& data,
                         const EvalConfig& cfg = {}) {
  if (data.test_indices.empty()) throw std::invalid_argument("map_single: empty test split");
  const auto view = make_params_view(params);
  const auto fonts = detail::embed_test_fonts(view, data, cfg.threads);
  const Curvature cv = params.curvature();

  std::vector<detail::QuerySlot> slots(static_cast<std::size_t>(data.vocab.size()));
  parallel_for_indexed(slots.size(), cfg.threads, [&](std::size_t t) {
    const int tag = static_cast<int>(t);
    std::unordered_set<int> relevant;
    for (std::size_t i = 0; i < data.test_indices.size(); ++i)
      if (data.records[static_cast<std::size_t>(data.test_indices[i])].tags.contains(tag))
        relevant.insert(static_cast<int>(i));
    if (relevant.empty()) return;
    const auto query = encode_tagset(view, TagSet::from_ids({tag}));
    const auto dist = detail::distances_to(query, fonts, cv);
    slots[t] = detail::QuerySlot{average_precision(rank_by_distance(tag, dist), relevant), true};
  });
  return detail::ordered_mean(slots, "map_single");
}

// Multi-tag protocol: per test tag set with K >= 2, draw `multi_subsets_per_set`
// subsets of size uniform in [2, min(5, K)]; queries are deduplicated
// globally; relevance = candidate tag set contains all query tags.
inline double map_multi(const ModelParams& params, const Dataset& data, std::uint64_t seed,
                        const EvalConfig& cfg = {}) {
  if (data.test_indices.empty()) throw std::invalid_argument("map_multi: empty test split");
  Rng rng = derive_stream(seed, "eval.map_multi");

  std::vector<TagSet> queries;
  std::set<TagSet> seen;
  for (int idx : data.test_indices) {
    const TagSet& tags = data.records[static_cast<std::size_t>(idx)].tags;
    if (tags.size() < 2) continue;
    for (int draw = 0; draw < cfg.multi_subsets_per_set; ++draw) {
      const int size = rng.uniform_int(2, std::min(5, tags.size()));
      std::vector<int> pool = tags.ids();
      for (int i = 0; i < size; ++i) {
        const int j = rng.uniform_int(i, tags.size() - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
      }
      pool.resize(static_cast<std::size_t>(size));
      TagSet q = TagSet::from_ids(std::move(pool));
      if (seen.insert(q).second) queries.push_back(std::move(q));
    }
  }
  if (queries.empty()) throw std::invalid_argument("map_multi: no valid queries");

  const auto view = make_params_view(params);
  const auto fonts = detail::embed_test_fonts(view, data, cfg.threads);
  const Curvature cv = params.curvature();

  std::vector<detail::QuerySlot> slots(queries.size());
  parallel_for_indexed(slots.size(), cfg.threads, [&](std::size_t qi) {
    std::unordered_set<int> relevant;
    for (std::size_t i = 0; i < data.test_indices.size(); ++i)
      if (data.records[static_cast<std::size_t>(data.test_indices[i])].tags.contains_all(queries[qi]))
        relevant.insert(static_cast<int>(i));
    if (relevant.empty()) return;
    const auto query = encode_tagset(view, queries[qi]);
    const auto dist = detail::distances_to(query, fonts, cv);
    slots[qi] = detail::QuerySlot{
        average_precision(rank_by_distance(static_cast<int>(qi), dist), relevant), true};
  });
  return detail::ordered_mean(slots, "map_multi");
}

enum class Direction { ImpressionToFont, FontToImpression };
enum class GainType { Recall, Precision, F1 };

// Tag-set agreement between query-side and candidate-side tag sets.
inline double tagset_gain(const TagSet& query, const TagSet& candidate, GainType gain) {
  if (query.empty() || candidate.empty()) return 0.0;
  std::size_t inter = 0;
  const auto& a = query.ids();
  const auto& b = candidate.ids();
  for (std::size_t i = 0, j = 0; i < a.size() && j < b.size();) {
    if (a[i] == b[j]) ++inter, ++i, ++j;
    else if (a[i] < b[j]) ++i;
    else ++j;
  }
  const double precision = static_cast<double>(inter) / static_cast<double>(b.size());
  const double recall = static_cast<double>(inter) / static_cast<double>(a.size());
  switch (gain) {
    case GainType::Precision: return precision;
    case GainType::Recall: return recall;
    case GainType::F1:
      return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  }
  return 0.0;
}

// DCG with linear gain rel_i / log2(i + 1) over the top k of the ranking;
// ideal DCG from the sorted relevances. Queries whose ideal DCG is zero are
// skipped by the callers.
inline double dcg_at_k(std::span<const double> gains_in_rank_order, int k) {
  double dcg = 0.0;
  const std::size_t top = std::min<std::size_t>(gains_in_rank_order.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < top; ++i)
    dcg += gains_in_rank_order[i] / std::log2(static_cast<double>(i) + 2.0);
  return dcg;
}

inline double ndcg_of_ranking(std::span<const double> relevance_by_candidate,
                              std::span<const int> ranked_ids, int k) {
  std::vector<double> in_rank_order;
  in_rank_order.reserve(ranked_ids.size());
  for (int id : ranked_ids)
    in_rank_order.push_back(relevance_by_candidate[static_cast<std::size_t>(id)]);
  std::vector<double> ideal(relevance_by_candidate.begin(), relevance_by_candidate.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg_at_k(ideal, k);
  if (idcg == 0.0) return -1.0;  // sentinel: no relevant candidate
  return dcg_at_k(in_rank_order, k) / idcg;
}

// nDCG@k averaged over test queries. Impression->font queries are the test
// tag sets against all test fonts; font->impression queries are the test
// fonts against the deduplicated test tag sets.
inline double ndcg_at_k(const ModelParams& params, const Dataset& data, Direction direction,
                        GainType gain, int k = 100, int threads = 1) {
  if (data.test_indices.empty()) throw std::invalid_argument("ndcg_at_k: empty test split");
  const auto view = make_params_view(params);
  const Curvature cv = params.curvature();

  std::vector<detail::QuerySlot> slots(data.test_indices.size());
  if (direction == Direction::ImpressionToFont) {
    const auto fonts = detail::embed_test_fonts(view, data, threads);
    std::vector<const TagSet*> font_tags;
    for (int idx : data.test_indices)
      font_tags.push_back(&data.records[static_cast<std::size_t>(idx)].tags);

    parallel_for_indexed(slots.size(), threads, [&](std::size_t q) {
      const int idx = data.test_indices[q];
      const TagSet& query_tags = data.records[static_cast<std::size_t>(idx)].tags;
      std::vector<double> rel(fonts.size());
      for (std::size_t i = 0; i < fonts.size(); ++i)
        rel[i] = tagset_gain(query_tags, *font_tags[i], gain);
      const auto query = encode_tagset(view, query_tags);
      const auto dist = detail::distances_to(query, fonts, cv);
      const auto ranking = rank_by_distance(idx, dist);
      const double v = ndcg_of_ranking(rel, ranking.candidates, k);
      if (v >= 0.0) slots[q] = detail::QuerySlot{v, true};
    });
  } else {
    // Candidate pool: unique test tag sets in canonical (lexicographic) order.
    std::set<TagSet> unique;
    for (int idx : data.test_indices) unique.insert(data.records[static_cast<std::size_t>(idx)].tags);
    const std::vector<TagSet> pool(unique.begin(), unique.end());
    std::vector<LorentzPointD> pool_points(pool.size());
    parallel_for_indexed(pool.size(), threads,
                         [&](std::size_t i) { pool_points[i] = encode_tagset(view, pool[i]); });

    parallel_for_indexed(slots.size(), threads, [&](std::size_t q) {
      const int idx = data.test_indices[q];
      const FontRecord& rec = data.records[static_cast<std::size_t>(idx)];
      std::vector<double> rel(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i)
        rel[i] = tagset_gain(rec.tags, pool[i], gain);
      const auto query = encode_font(view, rec.features);
      const auto dist = detail::distances_to(query, pool_points, cv);
      const auto ranking = rank_by_distance(idx, dist);
      const double v = ndcg_of_ranking(rel, ranking.candidates, k);
      if (v >= 0.0) slots[q] = detail::QuerySlot{v, true};
    });
  }
  return detail::ordered_mean(slots, "ndcg_at_k");
}

struct NdcgTriple {
  double recall = 0.0, precision = 0.0, f1 = 0.0;
};

struct EvalReport {
  double map_single = 0.0;
  double map_multi = 0.0;
  NdcgTriple ndcg_i2f, ndcg_f2i;
};

inline EvalReport eval_report(const ModelParams& params, const Dataset& data,
                              std::uint64_t seed, const EvalConfig& cfg = {}) {
  EvalReport r;
  r.map_single = map_single(params, data, cfg);
  r.map_multi = map_multi(params, data, seed, cfg);
  const int k = cfg.ndcg_k, th = cfg.threads;
  r.ndcg_i2f.recall = ndcg_at_k(params, data, Direction::ImpressionToFont, GainType::Recall, k, th);
  r.ndcg_i2f.precision = ndcg_at_k(params, data, Direction::ImpressionToFont, GainType::Precision, k, th);
  r.ndcg_i2f.f1 = ndcg_at_k(params, data, Direction::ImpressionToFont, GainType::F1, k, th);
  r.ndcg_f2i.recall = ndcg_at_k(params, data, Direction::FontToImpression, GainType::Recall, k, th);
  r.ndcg_f2i.precision = ndcg_at_k(params, data, Direction::FontToImpression, GainType::Precision, k, th);
  r.ndcg_f2i.f1 = ndcg_at_k(params, data, Direction::FontToImpression, GainType::F1, k, th);
  return r;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["map_single"] = r.map_single;
  j["map_multi"] = r.map_multi;
  j["ndcg_i2f"] = {{"recall", r.ndcg_i2f.recall}, {"precision", r.ndcg_i2f.precision}, {"f1", r.ndcg_i2f.f1}};
  j["ndcg_f2i"] = {{"recall", r.ndcg_f2i.recall}, {"precision", r.ndcg_f2i.precision}, {"f1", r.ndcg_f2i.f1}};
  return j;
}

inline std::string format_report_table(const EvalReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << "                 mAP(I->F)        nDCG@100(I->F)          nDCG@100(F->I)\n";
  os << "             Single   Multi    Re.   Prec.     F1     Re.   Prec.     F1\n";
  os << "             " << std::setw(6) << r.map_single << "  " << std::setw(6) << r.map_multi
     << "  " << std::setw(5) << r.ndcg_i2f.recall << "  " << std::setw(6) << r.ndcg_i2f.precision
     << "  " << std::setw(5) << r.ndcg_i2f.f1 << "  " << std::setw(5) << r.ndcg_f2i.recall
     << "  " << std::setw(6) << r.ndcg_f2i.precision << "  " << std::setw(5) << r.ndcg_f2i.f1
     << "\n";
  return os.str();
}

}  // namespace hyperco
