#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperco/model.hpp"
#include "hyperco/rng.hpp"

// Dataset ingestion (JSON-lines records), vocabulary construction with a
// train-split frequency filter, clustered synthetic data with ground-truth
// tag specificity, and binary checkpoint persistence.

namespace hyperco {

struct Dataset {
  std::vector<FontRecord> records;
  Vocabulary vocab;
  std::vector<int> train_indices, val_indices, test_indices;
  int feature_dim = 0;

  const std::vector<int>& split(std::string_view name) const {
    if (name == "train") return train_indices;
    if (name == "val") return val_indices;
    if (name == "test") return test_indices;
    throw std::invalid_argument("Dataset: unknown split " + std::string(name));
  }

  void validate() const {
    std::vector<bool> seen(records.size(), false);
    for (const auto* split : {&train_indices, &val_indices, &test_indices})
      for (int idx : *split) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= records.size() || seen[static_cast<std::size_t>(idx)])
          throw DataError("Dataset: splits must partition the record indices");
        seen[static_cast<std::size_t>(idx)] = true;
      }
    for (bool s : seen)
      if (!s) throw DataError("Dataset: splits must cover every record");
    for (const FontRecord& r : records) {
      r.tags.require_within(vocab.size());
      if (static_cast<int>(r.features.size()) != feature_dim)
        throw DataError("Dataset: inconsistent feature dimension");
    }
  }
};

namespace detail {

struct RawRecord {
  std::string font_id;
  std::vector<double> features;
  std::vector<std::string> tags;
  std::string split;
};

// Vocabulary order used everywhere: descending train-split record frequency,
// ties broken lexicographically.
inline Dataset assemble_dataset(std::vector<RawRecord> raw) {
  std::map<std::string, int> train_count;
  std::set<std::string> all_tags;
  for (const RawRecord& r : raw)
    for (const std::string& t : r.tags) {
      all_tags.insert(t);
      if (r.split == "train") ++train_count[t];  // counts records, not repeats
    }

  std::vector<std::string> ordered(all_tags.begin(), all_tags.end());
  std::stable_sort(ordered.begin(), ordered.end(), [&](const std::string& a, const std::string& b) {
    const int ca = train_count.count(a) ? train_count.at(a) : 0;
    const int cb = train_count.count(b) ? train_count.at(b) : 0;
    if (ca != cb) return ca > cb;
    return a < b;
  });

  Dataset out;
  out.vocab = Vocabulary::from_tags(std::move(ordered));
  out.records.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    RawRecord& r = raw[i];
    std::vector<int> ids;
    ids.reserve(r.tags.size());
    for (const std::string& t : r.tags) ids.push_back(*out.vocab.find(t));
    FontRecord rec{std::move(r.font_id), std::move(r.features), TagSet::from_ids(std::move(ids))};
    out.records.push_back(std::move(rec));
    const int idx = static_cast<int>(i);
    if (r.split == "train") out.train_indices.push_back(idx);
    else if (r.split == "val") out.val_indices.push_back(idx);
    else out.test_indices.push_back(idx);
  }
  out.feature_dim = out.records.empty() ? 0 : static_cast<int>(out.records[0].features.size());
  return out;
}

}  // namespace detail

// Reads JSON-lines records {"font_id", "features", "tags", "split"}. Tags
// unknown to any eventual filtered vocabulary are retained here; build_vocab
// applies the frequency filter. Unrecognized extra keys are ignored.
inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_dataset: cannot open " + path.string());

  std::vector<detail::RawRecord> raw;
  std::string line;
  std::size_t line_no = 0;
  int feature_dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("load_dataset: line " + std::to_string(line_no) + ": " + e.what());
    }
    auto fail = [&](const std::string& msg) -> DataError {
      return DataError("load_dataset: line " + std::to_string(line_no) + ": " + msg);
    };
    if (!j.is_object()) throw fail("expected a JSON object");
    for (const char* key : {"font_id", "features", "tags", "split"})
      if (!j.contains(key)) throw fail(std::string("missing field '") + key + "'");

    detail::RawRecord r;
    if (!j["font_id"].is_string()) throw fail("'font_id' must be a string");
    r.font_id = j["font_id"].get<std::string>();
    if (!j["features"].is_array() || j["features"].empty()) throw fail("'features' must be a non-empty array");
    for (const auto& x : j["features"]) {
      if (!x.is_number()) throw fail("'features' must contain numbers");
      r.features.push_back(x.get<double>());
    }
    if (feature_dim < 0) feature_dim = static_cast<int>(r.features.size());
    if (static_cast<int>(r.features.size()) != feature_dim)
      throw fail("feature length " + std::to_string(r.features.size()) + " != " + std::to_string(feature_dim));
    if (!j["tags"].is_array() || j["tags"].empty()) throw fail("'tags' must be a non-empty array");
    for (const auto& t : j["tags"]) {
      if (!t.is_string()) throw fail("'tags' must contain strings");
      r.tags.push_back(t.get<std::string>());
    }
    r.split = j["split"].is_string() ? j["split"].get<std::string>() : "";
    if (r.split != "train" && r.split != "val" && r.split != "test")
      throw fail("'split' must be train|val|test");
    raw.push_back(std::move(r));
  }
  if (raw.empty()) throw DataError("load_dataset: no records in " + path.string());

  Dataset out = detail::assemble_dataset(std::move(raw));
  for (const char* name : {"train", "val", "test"})
    if (out.split(name).empty()) throw DataError(std::string("load_dataset: empty split '") + name + "'");
  out.validate();
  return out;
}

inline void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("save_dataset: cannot write " + path.string());
  std::vector<std::string> split_of(data.records.size());
  for (int i : data.train_indices) split_of[static_cast<std::size_t>(i)] = "train";
  for (int i : data.val_indices) split_of[static_cast<std::size_t>(i)] = "val";
  for (int i : data.test_indices) split_of[static_cast<std::size_t>(i)] = "test";
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const FontRecord& r = data.records[i];
    nlohmann::ordered_json j;
    j["font_id"] = r.font_id;
    j["features"] = r.features;
    std::vector<std::string> tags;
    for (int id : r.tags.ids()) tags.push_back(data.vocab.tag(id));
    j["tags"] = tags;
    j["split"] = split_of[i];
    out << j.dump() << '\n';
  }
}

// Keeps tags carried by at least `min_count` train records, reorders the
// vocabulary by the filtered counts, drops filtered tags from every record,
// and drops records whose tag sets become empty.
inline Dataset build_vocab(const Dataset& data, int min_count) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");

  std::vector<int> train_count(static_cast<std::size_t>(data.vocab.size()), 0);
  for (int idx : data.train_indices)
    for (int id : data.records[static_cast<std::size_t>(idx)].tags.ids())
      ++train_count[static_cast<std::size_t>(id)];

  std::vector<bool> keep(static_cast<std::size_t>(data.vocab.size()), false);
  bool any = false;
  for (int id = 0; id < data.vocab.size(); ++id)
    if (train_count[static_cast<std::size_t>(id)] >= min_count) keep[static_cast<std::size_t>(id)] = true, any = true;
  if (!any) throw DataError("build_vocab: vocabulary becomes empty");

  std::vector<std::string> split_of(data.records.size());
  for (int i : data.train_indices) split_of[static_cast<std::size_t>(i)] = "train";
  for (int i : data.val_indices) split_of[static_cast<std::size_t>(i)] = "val";
  for (int i : data.test_indices) split_of[static_cast<std::size_t>(i)] = "test";

  std::vector<detail::RawRecord> raw;
  raw.reserve(data.records.size());
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const FontRecord& r = data.records[i];
    detail::RawRecord n;
    for (int id : r.tags.ids())
      if (keep[static_cast<std::size_t>(id)]) n.tags.push_back(data.vocab.tag(id));
    if (n.tags.empty()) continue;
    n.font_id = r.font_id;
    n.features = r.features;
    n.split = split_of[i];
    raw.push_back(std::move(n));
  }
  if (raw.empty()) throw DataError("build_vocab: all records filtered out");

  Dataset out = detail::assemble_dataset(std::move(raw));
  out.validate();
  return out;
}

// --- synthetic data --------------------------------------------------------

// Clustered generator with known per-tag style specificity. Fonts are noisy
// copies of cluster prototypes; each tag covers a random set of clusters and
// is attached to the fonts of those clusters (capped per font). A tag's
// coverage count is its ground-truth specificity: 1 = most specific.
struct SynthConfig {
  int n_clusters = 8;
  int n_fonts = 800;
  int n_tags = 60;
  int feature_dim = 32;
  int max_tags_per_font = 8;
  double noise_scale = 1.5;
  std::vector<int> coverage_counts;  // per tag; empty -> log-spaced in [1, n_clusters]
  double train_fraction = 0.8, val_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_clusters < 1 || n_tags < n_clusters)
      throw std::invalid_argument("SynthConfig: need n_tags >= n_clusters >= 1");
    if (n_fonts < 3 || feature_dim < 1 || max_tags_per_font < 1)
      throw std::invalid_argument("SynthConfig: degenerate sizes");
    if (!(noise_scale >= 0.0)) throw std::invalid_argument("SynthConfig: negative noise");
    if (!coverage_counts.empty()) {
      if (static_cast<int>(coverage_counts.size()) != n_tags)
        throw std::invalid_argument("SynthConfig: coverage_counts size mismatch");
      for (int c : coverage_counts)
        if (c < 1 || c > n_clusters)
          throw std::invalid_argument("SynthConfig: coverage counts must lie in [1, n_clusters]");
    }
    if (!(train_fraction > 0 && val_fraction > 0 && train_fraction + val_fraction < 1))
      throw std::invalid_argument("SynthConfig: bad split fractions");
  }
};

inline SynthConfig synthetic_small_preset(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  return cfg;  // defaults are the synthetic-small preset
}

struct SynthResult {
  Dataset dataset;
  std::map<std::string, int> tag_coverage;  // tag -> ground-truth coverage count
  std::vector<int> font_cluster;            // aligned with dataset.records
};

inline std::vector<int> default_coverage_counts(int n_tags, int n_clusters) {
  std::vector<int> counts(static_cast<std::size_t>(n_tags));
  if (n_tags == 1) {
    counts[0] = 1;
    return counts;
  }
  const double lo = 0.0, hi = std::log(static_cast<double>(n_clusters));
  for (int j = 0; j < n_tags; ++j) {
    const double t = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n_tags - 1);
    counts[static_cast<std::size_t>(j)] =
        std::clamp(static_cast<int>(std::lround(std::exp(t))), 1, n_clusters);
  }
  return counts;
}

inline SynthResult generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const std::vector<int> coverage = cfg.coverage_counts.empty()
                                        ? default_coverage_counts(cfg.n_tags, cfg.n_clusters)
                                        : cfg.coverage_counts;

  Rng proto_rng = derive_stream(cfg.seed, "synth.prototypes");
  Rng assign_rng = derive_stream(cfg.seed, "synth.clusters");
  Rng noise_rng = derive_stream(cfg.seed, "synth.noise");
  Rng subsample_rng = derive_stream(cfg.seed, "synth.tags");
  Rng split_rng = derive_stream(cfg.seed, "synth.split");

  std::vector<std::vector<double>> prototypes(static_cast<std::size_t>(cfg.n_clusters));
  for (auto& proto : prototypes) {
    proto.resize(static_cast<std::size_t>(cfg.feature_dim));
    for (double& x : proto) x = proto_rng.normal();
  }

  std::vector<int> cluster_of(static_cast<std::size_t>(cfg.n_fonts));
  for (int& c : cluster_of) c = assign_rng.uniform_int(0, cfg.n_clusters - 1);

  // Tag -> covered clusters; redraw until every cluster is covered by at
  // least one tag, else fonts there would end up untagged.
  std::vector<std::vector<bool>> covers;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 100) throw DataError("generate_synthetic: infeasible specificity profile");
    Rng cover_rng = derive_stream(cfg.seed, "synth.coverage", static_cast<std::uint64_t>(attempt));
    covers.assign(static_cast<std::size_t>(cfg.n_tags),
                  std::vector<bool>(static_cast<std::size_t>(cfg.n_clusters), false));
    std::vector<bool> cluster_covered(static_cast<std::size_t>(cfg.n_clusters), false);
    for (int j = 0; j < cfg.n_tags; ++j) {
      std::vector<int> ids(static_cast<std::size_t>(cfg.n_clusters));
      std::iota(ids.begin(), ids.end(), 0);
      cover_rng.shuffle(ids);
      for (int k = 0; k < coverage[static_cast<std::size_t>(j)]; ++k) {
        covers[static_cast<std::size_t>(j)][static_cast<std::size_t>(ids[static_cast<std::size_t>(k)])] = true;
        cluster_covered[static_cast<std::size_t>(ids[static_cast<std::size_t>(k)])] = true;
      }
    }
    if (std::all_of(cluster_covered.begin(), cluster_covered.end(), [](bool b) { return b; })) break;
  }

  const int tag_width = cfg.n_tags > 100 ? 3 : 2;
  auto tag_name = [tag_width](int j) {
    std::ostringstream os;
    os << "tag_";
    std::string digits = std::to_string(j);
    os << std::string(static_cast<std::size_t>(std::max(0, tag_width - static_cast<int>(digits.size()))), '0') << digits;
    return os.str();
  };

  std::vector<detail::RawRecord> raw(static_cast<std::size_t>(cfg.n_fonts));
  for (int i = 0; i < cfg.n_fonts; ++i) {
    detail::RawRecord& r = raw[static_cast<std::size_t>(i)];
    std::ostringstream id;
    id << "font_" << i;
    r.font_id = id.str();
    const auto& proto = prototypes[static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(i)])];
    r.features.resize(static_cast<std::size_t>(cfg.feature_dim));
    for (int k = 0; k < cfg.feature_dim; ++k)
      r.features[static_cast<std::size_t>(k)] = proto[static_cast<std::size_t>(k)] + cfg.noise_scale * noise_rng.normal();

    std::vector<int> eligible;
    for (int j = 0; j < cfg.n_tags; ++j)
      if (covers[static_cast<std::size_t>(j)][static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(i)])])
        eligible.push_back(j);
    if (eligible.empty()) throw DataError("generate_synthetic: font with zero tags");
    if (static_cast<int>(eligible.size()) > cfg.max_tags_per_font) {
      for (int k = 0; k < cfg.max_tags_per_font; ++k) {
        const int j = subsample_rng.uniform_int(k, static_cast<int>(eligible.size()) - 1);
        std::swap(eligible[static_cast<std::size_t>(k)], eligible[static_cast<std::size_t>(j)]);
      }
      eligible.resize(static_cast<std::size_t>(cfg.max_tags_per_font));
      std::sort(eligible.begin(), eligible.end());
    }
    for (int j : eligible) r.tags.push_back(tag_name(j));
  }

  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  split_rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(cfg.train_fraction * cfg.n_fonts);
  const auto n_val = static_cast<std::size_t>(cfg.val_fraction * cfg.n_fonts);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t i = order[pos];
    raw[i].split = pos < n_train ? "train" : (pos < n_train + n_val ? "val" : "test");
  }

  SynthResult result;
  std::vector<int> raw_cluster(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw_cluster[i] = cluster_of[i];
  result.dataset = detail::assemble_dataset(std::move(raw));
  result.dataset.validate();
  result.font_cluster = std::move(raw_cluster);  // assemble keeps record order
  for (int j = 0; j < cfg.n_tags; ++j)
    result.tag_coverage[tag_name(j)] = coverage[static_cast<std::size_t>(j)];
  return result;
}

inline void save_specificity_sidecar(const std::map<std::string, int>& coverage,
                                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("save_specificity_sidecar: cannot write " + path.string());
  nlohmann::ordered_json j(coverage);
  out << j.dump(2) << '\n';
}

inline std::map<std::string, int> load_specificity_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_specificity_sidecar: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("load_specificity_sidecar: ") + e.what());
  }
  return j.get<std::map<std::string, int>>();
}

// --- checkpoints -------------------------------------------------------
//
// Layout: magic "HCE1", uint32 LE header length, JSON header (dims, geometry
// constants, seed, step), then every trainable block as little-endian IEEE-754
// float32 in flat-layout order.

struct CheckpointMeta {
  std::uint64_t seed = 0;
  long step = 0;
};

inline void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta,
                            const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_checkpoint: cannot write " + path.string());

  nlohmann::ordered_json header;
  header["dims"] = {{"vocab", params.dims.vocab},
                    {"feature_dim", params.dims.feature_dim},
                    {"tag_feature_dim", params.dims.tag_feature_dim},
                    {"embed_dim", params.dims.embed_dim},
                    {"hidden_font", params.dims.hidden_font},
                    {"hidden_set", params.dims.hidden_set}};
  header["curvature"] = params.curvature_c;
  header["cone_k"] = params.cone_k;
  header["seed"] = meta.seed;
  header["step"] = meta.step;
  const std::string header_str = header.dump();

  out.write("HCE1", 4);
  const std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  const std::vector<double> flat = flatten_params(params);
  std::vector<float> block(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) block[i] = static_cast<float>(flat[i]);
  out.write(reinterpret_cast<const char*>(block.data()),
            static_cast<std::streamsize>(block.size() * sizeof(float)));
  if (!out) throw DataError("save_checkpoint: write failed for " + path.string());
}

struct LoadedCheckpoint {
  ModelParams params;
  CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                        const ModelDims* expected_dims = nullptr) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint reader assumes a little-endian host");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path.string());

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "HCE1", 4) != 0)
    throw FormatError("load_checkpoint: bad magic in " + path.string());
  std::uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), 4))
    throw FormatError("load_checkpoint: truncated header length");
  std::string header_str(len, '\0');
  if (!in.read(header_str.data(), len))
    throw FormatError("load_checkpoint: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("load_checkpoint: bad header JSON: ") + e.what());
  }

  LoadedCheckpoint result;
  try {
    const auto& d = header.at("dims");
    result.params.dims = ModelDims{d.at("vocab").get<int>(),      d.at("feature_dim").get<int>(),
                                   d.at("tag_feature_dim").get<int>(), d.at("embed_dim").get<int>(),
                                   d.at("hidden_font").get<int>(),  d.at("hidden_set").get<int>()};
    result.params.curvature_c = header.at("curvature").get<double>();
    result.params.cone_k = header.at("cone_k").get<double>();
    result.meta.seed = header.at("seed").get<std::uint64_t>();
    result.meta.step = header.at("step").get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("load_checkpoint: incomplete header: ") + e.what());
  }
  result.params.dims.validate();
  if (expected_dims && !(result.params.dims == *expected_dims))
    throw FormatError("load_checkpoint: dimension mismatch vs requested dims");

  const std::size_t n = parameter_count(result.params.dims);
  std::vector<float> block(n);
  if (!in.read(reinterpret_cast<char*>(block.data()),
               static_cast<std::streamsize>(n * sizeof(float))))
    throw FormatError("load_checkpoint: truncated parameter block");
  char extra;
  if (in.read(&extra, 1))
    throw FormatError("load_checkpoint: trailing bytes after parameter block");

  std::vector<double> flat(n);
  for (std::size_t i = 0; i < n; ++i) flat[i] = static_cast<double>(block[i]);

  ModelParams& p = result.params;
  const ModelDims& dm = p.dims;
  p.tag_table.resize(static_cast<std::size_t>(dm.vocab) * static_cast<std::size_t>(dm.tag_feature_dim));
  auto size_linear = [](Linear& l, int in_dim, int out_dim) {
    l.in = in_dim;
    l.out = out_dim;
    l.weight.resize(static_cast<std::size_t>(in_dim) * static_cast<std::size_t>(out_dim));
    l.bias.resize(static_cast<std::size_t>(out_dim));
  };
  size_linear(p.set_hidden, dm.tag_feature_dim, dm.hidden_set);
  size_linear(p.set_out, dm.hidden_set, dm.embed_dim);
  size_linear(p.font_hidden, dm.feature_dim, dm.hidden_font);
  size_linear(p.font_out, dm.hidden_font, dm.embed_dim);
  unflatten_params(flat, p);
  return result;
}

}  // namespace hyperco
