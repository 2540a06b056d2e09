#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hyperco/analysis.hpp"
#include "hyperco/data.hpp"
#include "hyperco/eval.hpp"
#include "hyperco/selftest.hpp"
#include "hyperco/training.hpp"

// Command-line front end. Subcommands: synth, train, eval, traverse,
// specificity, histogram, check. One JSON config document plus flag
// overrides (flags win); every seeded command is bit-reproducible.
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 divergence.

namespace hyperco::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;

  struct DataSection {
    std::string records;
    int min_count = 1;
  } data;

  struct ModelSection {
    int tag_feature_dim = 32;
    int embed_dim = 16;
    int hidden_font = 0;  // 0 -> 2 * embed_dim
    int hidden_set = 0;
    double curvature = 1.0;
    double cone_k = 0.1;
  } model;

  TrainConfig train;
  LossConfig loss;
  EvalConfig eval;

  struct AnalysisSection {
    PoolPolicy pool;
    int traverse_points = 50;
    int top_k = 1;
    int histogram_bins = 30;
  } analysis;
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known) throw FormatError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("config: bad value for '") + key + "'");
  }
}

}  // namespace detail

// Schema-validated; unknown keys anywhere are rejected before any work runs.
inline RunConfig parse_config_json(const json& j) {
  RunConfig cfg;
  detail::reject_unknown(
      j, {"seed", "threads", "data", "model", "train", "loss", "eval", "analysis"}, "top level");
  detail::read_field(j, "seed", cfg.seed);
  detail::read_field(j, "threads", cfg.threads);

  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::reject_unknown(d, {"records", "min_count"}, "data");
    detail::read_field(d, "records", cfg.data.records);
    detail::read_field(d, "min_count", cfg.data.min_count);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::reject_unknown(
        m, {"tag_feature_dim", "embed_dim", "hidden_font", "hidden_set", "curvature", "cone_k"},
        "model");
    detail::read_field(m, "tag_feature_dim", cfg.model.tag_feature_dim);
    detail::read_field(m, "embed_dim", cfg.model.embed_dim);
    detail::read_field(m, "hidden_font", cfg.model.hidden_font);
    detail::read_field(m, "hidden_set", cfg.model.hidden_set);
    detail::read_field(m, "curvature", cfg.model.curvature);
    detail::read_field(m, "cone_k", cfg.model.cone_k);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::reject_unknown(t,
                           {"learning_rate", "batch_size", "weight_decay", "epochs", "eval_every",
                            "subset_policy", "bernoulli_keep", "timing"},
                           "train");
    detail::read_field(t, "learning_rate", cfg.train.learning_rate);
    detail::read_field(t, "batch_size", cfg.train.batch_size);
    detail::read_field(t, "weight_decay", cfg.train.weight_decay);
    detail::read_field(t, "epochs", cfg.train.epochs);
    detail::read_field(t, "eval_every", cfg.train.eval_every);
    if (t.contains("subset_policy"))
      cfg.train.subset_policy = subset_policy_from_string(t.at("subset_policy").get<std::string>());
    detail::read_field(t, "bernoulli_keep", cfg.train.bernoulli_keep);
    detail::read_field(t, "timing", cfg.train.log_timing);
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    detail::reject_unknown(
        l, {"lambda1", "lambda2", "sub_contrastive", "ent_impression_font", "ent_subset_impression"},
        "loss");
    detail::read_field(l, "lambda1", cfg.loss.lambda1);
    detail::read_field(l, "lambda2", cfg.loss.lambda2);
    detail::read_field(l, "sub_contrastive", cfg.loss.enable_sub_contrastive);
    detail::read_field(l, "ent_impression_font", cfg.loss.enable_ent_if);
    detail::read_field(l, "ent_subset_impression", cfg.loss.enable_ent_sub);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    detail::reject_unknown(e, {"ndcg_k", "multi_subsets_per_set"}, "eval");
    detail::read_field(e, "ndcg_k", cfg.eval.ndcg_k);
    detail::read_field(e, "multi_subsets_per_set", cfg.eval.multi_subsets_per_set);
  }
  if (j.contains("analysis")) {
    const auto& a = j.at("analysis");
    detail::reject_unknown(a,
                           {"pool_variants", "pool_keep_prob", "pool_max", "traverse_points",
                            "top_k", "histogram_bins"},
                           "analysis");
    detail::read_field(a, "pool_variants", cfg.analysis.pool.variants_per_record);
    detail::read_field(a, "pool_keep_prob", cfg.analysis.pool.keep_prob);
    std::uint64_t cap = cfg.analysis.pool.pool_max;
    detail::read_field(a, "pool_max", cap);
    cfg.analysis.pool.pool_max = cap;
    detail::read_field(a, "traverse_points", cfg.analysis.traverse_points);
    detail::read_field(a, "top_k", cfg.analysis.top_k);
    detail::read_field(a, "histogram_bins", cfg.analysis.histogram_bins);
  }
  return cfg;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("config: " + path.string() + ": " + e.what());
  }
  return parse_config_json(j);
}

inline ordered_json config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["data"] = {{"records", cfg.data.records}, {"min_count", cfg.data.min_count}};
  j["model"] = {{"tag_feature_dim", cfg.model.tag_feature_dim},
                {"embed_dim", cfg.model.embed_dim},
                {"hidden_font", cfg.model.hidden_font},
                {"hidden_set", cfg.model.hidden_set},
                {"curvature", cfg.model.curvature},
                {"cone_k", cfg.model.cone_k}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"weight_decay", cfg.train.weight_decay},
                {"epochs", cfg.train.epochs},
                {"eval_every", cfg.train.eval_every},
                {"subset_policy", to_string(cfg.train.subset_policy)},
                {"bernoulli_keep", cfg.train.bernoulli_keep},
                {"timing", cfg.train.log_timing}};
  j["loss"] = {{"lambda1", cfg.loss.lambda1},
               {"lambda2", cfg.loss.lambda2},
               {"sub_contrastive", cfg.loss.enable_sub_contrastive},
               {"ent_impression_font", cfg.loss.enable_ent_if},
               {"ent_subset_impression", cfg.loss.enable_ent_sub}};
  j["eval"] = {{"ndcg_k", cfg.eval.ndcg_k},
               {"multi_subsets_per_set", cfg.eval.multi_subsets_per_set}};
  j["analysis"] = {{"pool_variants", cfg.analysis.pool.variants_per_record},
                   {"pool_keep_prob", cfg.analysis.pool.keep_prob},
                   {"pool_max", cfg.analysis.pool.pool_max},
                   {"traverse_points", cfg.analysis.traverse_points},
                   {"top_k", cfg.analysis.top_k},
                   {"histogram_bins", cfg.analysis.histogram_bins}};
  return j;
}

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Dataset load_filtered_dataset(const RunConfig& cfg) {
  if (cfg.data.records.empty()) throw DataError("no dataset path: set data.records or --data");
  Dataset data = load_dataset(cfg.data.records);
  if (cfg.data.min_count > 1) data = build_vocab(data, cfg.data.min_count);
  return data;
}

inline ModelParams load_model_for(const Dataset& data, const fs::path& checkpoint) {
  auto loaded = load_checkpoint(checkpoint);
  if (loaded.params.dims.vocab != data.vocab.size())
    throw FormatError("checkpoint vocabulary size " + std::to_string(loaded.params.dims.vocab) +
                      " does not match the dataset vocabulary " +
                      std::to_string(data.vocab.size()) +
                      " (same records file and min_count as training?)");
  if (loaded.params.dims.feature_dim != data.feature_dim)
    throw FormatError("checkpoint feature dimension does not match the dataset");
  return std::move(loaded.params);
}

// --- subcommand bodies ---

struct SynthArgs {
  std::string preset = "synthetic-small";
  std::uint64_t seed = 0;
  std::string out;
};

inline int cmd_synth(const SynthArgs& args) {
  if (args.preset != "synthetic-small")
    throw DataError("unknown preset '" + args.preset + "' (available: synthetic-small)");
  SynthConfig cfg = synthetic_small_preset(args.seed);
  auto result = generate_synthetic(cfg);

  fs::create_directories(args.out);
  const fs::path dir(args.out);
  save_dataset(result.dataset, dir / "records.jsonl");
  save_specificity_sidecar(result.tag_coverage, dir / "specificity.json");
  std::cout << "wrote " << (dir / "records.jsonl").string() << " ("
            << result.dataset.records.size() << " fonts, " << result.dataset.vocab.size()
            << " tags; splits " << result.dataset.train_indices.size() << "/"
            << result.dataset.val_indices.size() << "/" << result.dataset.test_indices.size()
            << ")\n";
  std::cout << "wrote " << (dir / "specificity.json").string() << "\n";
  return 0;
}

inline int cmd_train(const RunConfig& cfg, const std::string& out_dir) {
  Dataset data = load_filtered_dataset(cfg);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  ModelConfig model_cfg;
  model_cfg.dims = ModelDims{.vocab = data.vocab.size(),
                             .feature_dim = data.feature_dim,
                             .tag_feature_dim = cfg.model.tag_feature_dim,
                             .embed_dim = cfg.model.embed_dim,
                             .hidden_font = cfg.model.hidden_font,
                             .hidden_set = cfg.model.hidden_set};
  model_cfg.curvature_c = cfg.model.curvature;
  model_cfg.cone_k = cfg.model.cone_k;

  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = cfg.seed;

  std::ofstream metrics(dir / "metrics.jsonl");
  if (!metrics) throw DataError("cannot write " + (dir / "metrics.jsonl").string());
  auto on_step = [&](const StepLog& log) {
    ordered_json j;
    j["step"] = log.step;
    j["L_cont"] = log.l_cont;
    j["L_ent_if"] = log.l_ent_if;
    j["L_ent_sub"] = log.l_ent_sub;
    j["total"] = log.total;
    j["tau"] = log.tau;
    j["scales"] = {log.scale_font, log.scale_imp};
    j["wall_ms"] = log.wall_ms;
    metrics << j.dump() << '\n';
  };
  auto on_checkpoint = [&](const CheckpointRecord& rec) {
    save_checkpoint(rec.params, CheckpointMeta{cfg.seed, rec.step},
                    dir / ("checkpoint_" + std::to_string(rec.step) + ".hce"));
    std::cout << "step " << rec.step << ": validation loss " << rec.val_loss << "\n";
  };

  TrainResult result = train(data, model_cfg, train_cfg, cfg.loss, on_step, on_checkpoint);
  save_checkpoint(result.selected, CheckpointMeta{cfg.seed, result.selected_step},
                  dir / "best.hce");
  write_text(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  std::cout << "selected checkpoint from step " << result.selected_step << " -> "
            << (dir / "best.hce").string() << "\n";
  return 0;
}

inline int cmd_eval(const RunConfig& cfg, const std::string& checkpoint,
                    const std::string& out_path) {
  Dataset data = load_filtered_dataset(cfg);
  ModelParams params = load_model_for(data, checkpoint);
  EvalConfig eval_cfg = cfg.eval;
  eval_cfg.threads = cfg.threads;
  EvalReport report = eval_report(params, data, cfg.seed, eval_cfg);
  std::cout << format_report_table(report);
  if (!out_path.empty()) {
    write_text(out_path, report_to_json(report).dump(2) + "\n");
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

inline int cmd_traverse(const RunConfig& cfg, const std::string& checkpoint,
                        const std::string& font_id, const std::string& out_base) {
  Dataset data = load_filtered_dataset(cfg);
  ModelParams params = load_model_for(data, checkpoint);
  auto pool = build_candidate_pool(data, cfg.analysis.pool, cfg.seed);
  auto steps = traverse(params, data, font_id, pool, cfg.analysis.traverse_points,
                        cfg.analysis.top_k, cfg.threads);

  ordered_json j;
  j["font_id"] = font_id;
  j["pool_size"] = pool.size();
  j["steps"] = ordered_json::array();
  std::string csv = "t,distance,tags\n";
  for (const auto& step : steps) {
    ordered_json s;
    s["t"] = step.t;
    s["neighbors"] = ordered_json::array();
    for (const auto& n : step.neighbors) {
      ordered_json nb;
      nb["pool_index"] = n.pool_index;
      nb["distance"] = n.distance;
      std::vector<std::string> names;
      for (int id : pool[static_cast<std::size_t>(n.pool_index)].ids())
        names.push_back(data.vocab.tag(id));
      nb["tags"] = names;
      s["neighbors"].push_back(std::move(nb));
    }
    j["steps"].push_back(std::move(s));

    const auto& best = step.neighbors.front();
    csv += fmt_double(step.t) + "," + fmt_double(best.distance) + ",";
    const auto& ids = pool[static_cast<std::size_t>(best.pool_index)].ids();
    for (std::size_t i = 0; i < ids.size(); ++i)
      csv += (i ? ";" : "") + data.vocab.tag(ids[i]);
    csv += "\n";
  }
  write_text(out_base + ".json", j.dump(2) + "\n");
  write_text(out_base + ".csv", csv);
  std::cout << "wrote " << out_base << ".json and " << out_base << ".csv\n";
  return 0;
}

inline int cmd_specificity(const RunConfig& cfg, const std::string& checkpoint,
                           const std::string& sidecar, const std::string& out_base) {
  Dataset data = load_filtered_dataset(cfg);
  ModelParams params = load_model_for(data, checkpoint);
  std::map<std::string, int> truth;
  if (!sidecar.empty()) truth = load_specificity_sidecar(sidecar);
  auto table = tag_specificity(params, data.vocab, sidecar.empty() ? nullptr : &truth);

  ordered_json j;
  j["rows"] = ordered_json::array();
  std::string csv = "tag,distance,group,coverage\n";
  for (const auto& row : table.rows) {
    ordered_json r;
    r["tag"] = row.tag;
    r["distance"] = row.distance;
    r["group"] = to_string(row.group);
    if (row.coverage) r["coverage"] = *row.coverage;
    j["rows"].push_back(std::move(r));
    csv += row.tag + "," + fmt_double(row.distance) + "," + to_string(row.group) + "," +
           (row.coverage ? std::to_string(*row.coverage) : "") + "\n";
  }
  write_text(out_base + ".json", j.dump(2) + "\n");
  write_text(out_base + ".csv", csv);
  std::cout << "wrote " << out_base << ".json and " << out_base << ".csv\n";
  return 0;
}

inline int cmd_histogram(const RunConfig& cfg, const std::string& checkpoint,
                         const std::string& out_base) {
  Dataset data = load_filtered_dataset(cfg);
  ModelParams params = load_model_for(data, checkpoint);
  auto h = radial_histogram(params, data, cfg.seed, cfg.analysis.histogram_bins);

  ordered_json j;
  j["means"] = {{"fonts", h.mean_fonts}, {"tag_sets", h.mean_tag_sets}, {"subsets", h.mean_subsets}};
  j["bin_edges"] = h.bin_edges;
  j["counts"] = {{"fonts", h.counts_fonts}, {"tag_sets", h.counts_tag_sets}, {"subsets", h.counts_subsets}};
  j["distances"] = {{"fonts", h.fonts}, {"tag_sets", h.tag_sets}, {"subsets", h.subsets}};
  std::string csv = "bin_lo,bin_hi,fonts,tag_sets,subsets\n";
  for (std::size_t b = 0; b + 1 < h.bin_edges.size(); ++b)
    csv += fmt_double(h.bin_edges[b]) + "," + fmt_double(h.bin_edges[b + 1]) + "," +
           std::to_string(h.counts_fonts[b]) + "," + std::to_string(h.counts_tag_sets[b]) + "," +
           std::to_string(h.counts_subsets[b]) + "\n";
  write_text(out_base + ".json", j.dump(2) + "\n");
  write_text(out_base + ".csv", csv);
  std::cout << "wrote " << out_base << ".json and " << out_base << ".csv\n"
            << "mean radial distance: fonts " << h.mean_fonts << ", tag sets " << h.mean_tag_sets
            << ", subsets " << h.mean_subsets << "\n";
  return 0;
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"hierarchical co-embedding of font styles and impression tags in the Lorentz model"};
  app.require_subcommand(1);

  // Shared option state; flags override the config file.
  std::string config_path, data_path, out_path, checkpoint, font_id, sidecar, preset =
      "synthetic-small";
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> threads_flag, epochs_flag, min_count_flag;
  bool timing_flag = false;

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset with known specificity");
  synth->add_option("--preset", preset, "dataset preset (synthetic-small)");
  synth->add_option("--seed", seed_flag, "generator seed");
  synth->add_option("--out", out_path, "output directory")->required();

  auto add_common = [&](CLI::App* cmd, bool with_checkpoint) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--data", data_path, "records JSONL path (overrides config)");
    cmd->add_option("--min-count", min_count_flag, "vocabulary frequency filter");
    cmd->add_option("--seed", seed_flag, "seed (overrides config)");
    cmd->add_option("--threads", threads_flag, "parallelism cap; 1 is the reproducibility baseline");
    if (with_checkpoint) cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  };

  auto* train_cmd = app.add_subcommand("train", "train a model and select a checkpoint");
  add_common(train_cmd, false);
  train_cmd->add_option("--out", out_path, "output directory")->required();
  train_cmd->add_option("--epochs", epochs_flag, "epochs (overrides config)");
  train_cmd->add_flag("--timing", timing_flag, "record wall-clock per step in the metrics log");

  auto* eval_cmd = app.add_subcommand("eval", "retrieval metrics for a checkpoint");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--out", out_path, "report JSON path");

  auto* traverse_cmd = app.add_subcommand("traverse", "walk the geodesic from the origin to a font");
  add_common(traverse_cmd, true);
  traverse_cmd->add_option("--font-id", font_id, "target font id")->required();
  traverse_cmd->add_option("--out", out_path, "output base path (.json/.csv)")->required();

  auto* spec_cmd = app.add_subcommand("specificity", "per-tag radial style specificity table");
  add_common(spec_cmd, true);
  spec_cmd->add_option("--sidecar", sidecar, "ground-truth coverage JSON (synthetic data)");
  spec_cmd->add_option("--out", out_path, "output base path (.json/.csv)")->required();

  auto* hist_cmd = app.add_subcommand("histogram", "radial distance histograms on the test split");
  add_common(hist_cmd, true);
  hist_cmd->add_option("--out", out_path, "output base path (.json/.csv)")->required();

  auto* check_cmd = app.add_subcommand("check", "run the numerical self-test suites");
  (void)check_cmd;

  std::vector<std::string> argv(args);
  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors map to 1; --help stays 0
  }

  try {
    if (app.got_subcommand(synth)) {
      detail::SynthArgs sargs;
      sargs.preset = preset;
      sargs.seed = seed_flag.value_or(0);
      sargs.out = out_path;
      return detail::cmd_synth(sargs);
    }

    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (!data_path.empty()) cfg.data.records = data_path;
    if (min_count_flag) cfg.data.min_count = *min_count_flag;
    if (seed_flag) cfg.seed = *seed_flag;
    if (threads_flag) cfg.threads = *threads_flag;
    if (epochs_flag) cfg.train.epochs = *epochs_flag;
    if (timing_flag) cfg.train.log_timing = true;

    if (app.got_subcommand(train_cmd)) return detail::cmd_train(cfg, out_path);
    if (app.got_subcommand(eval_cmd)) return detail::cmd_eval(cfg, checkpoint, out_path);
    if (app.got_subcommand(traverse_cmd))
      return detail::cmd_traverse(cfg, checkpoint, font_id, out_path);
    if (app.got_subcommand(spec_cmd))
      return detail::cmd_specificity(cfg, checkpoint, sidecar, out_path);
    if (app.got_subcommand(hist_cmd)) return detail::cmd_histogram(cfg, checkpoint, out_path);
    if (app.got_subcommand(check_cmd)) return selftest::run_all(std::cout) ? 0 : 1;
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

inline int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace hyperco::cli
