#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "cetn/config.hpp"
#include "cetn/csv.hpp"
#include "cetn/data.hpp"
#include "cetn/metrics.hpp"
#include "cetn/selfcheck.hpp"
#include "cetn/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cetn;

namespace {

// exit codes: 0 ok, 1 property failure, 2 configuration, 3 numeric abort
constexpr int kExitOk = 0;
constexpr int kExitProperty = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::array<double, 3> parse_ratios(const std::string& s) {
  std::vector<double> parts;
  std::string cur;
  for (char c : s + ":") {
    if (c == ':' || c == ',') {
      if (!cur.empty()) parts.push_back(std::stod(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (parts.size() != 3) throw ConfigError("ratios: want three numbers, got '" + s + "'");
  const double total = parts[0] + parts[1] + parts[2];
  if (total <= 0) throw ConfigError("ratios: must sum to a positive value");
  return {parts[0] / total, parts[1] / total, parts[2] / total};
}

struct PreparedData {
  EncodedDataset train, val, test;
};

PreparedData load_prepared(const std::string& dir) {
  const fs::path root(dir);
  for (const char* name : {"train.bin", "val.bin", "test.bin"}) {
    if (!fs::exists(root / name)) {
      throw ConfigError("prepared dataset missing: " + (root / name).string() +
                        " (run `cetn prepare` first)");
    }
  }
  return PreparedData{load_dataset((root / "train.bin").string()),
                      load_dataset((root / "val.bin").string()),
                      load_dataset((root / "test.bin").string())};
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

int cmd_prepare(const std::string& csv_path, const std::string& schema_path,
                const std::string& out_dir, const std::string& ratios_text,
                uint64_t seed, int min_count,
                const std::vector<std::string>& presplit) {
  DatasetSchema schema = DatasetSchema::from_json_file(schema_path);
  fs::create_directories(out_dir);

  TokenTable train_t, val_t, test_t;
  json manifest;
  if (!presplit.empty()) {
    if (presplit.size() != 3) {
      throw ConfigError("--presplit wants exactly three csv paths (train val test)");
    }
    auto read = [&schema](const std::string& p) {
      CsvTable c = read_csv(p);
      DatasetSchema s = schema;
      s.resolve(c.header);
      return tokenize(c, s);
    };
    train_t = read(presplit[0]);
    val_t = read(presplit[1]);
    test_t = read(presplit[2]);
    manifest["mode"] = "presplit";
    manifest["sources"] = presplit;
  } else {
    if (csv_path.empty()) throw ConfigError("either --csv or --presplit is required");
    CsvTable csv = read_csv(csv_path);
    schema.resolve(csv.header);
    TokenTable all = tokenize(csv, schema);

    SplitSpec spec;
    spec.ratios = parse_ratios(ratios_text);
    spec.seed = seed;
    SplitIndices idx = split(all.size(), spec);
    train_t = all.select(idx.train);
    val_t = all.select(idx.val);
    test_t = all.select(idx.test);
    manifest["mode"] = "ratio";
    manifest["source"] = csv_path;
    manifest["ratios"] = spec.ratios;
    manifest["seed"] = seed;
  }

  const auto vocabs = build_vocab(train_t, min_count);
  const auto& names = train_t.field_names;
  save_vocabs((fs::path(out_dir) / "vocab.json").string(), names, vocabs);

  EncodedDataset train_ds = encode(train_t, names, vocabs);
  EncodedDataset val_ds = encode(val_t, names, vocabs);
  EncodedDataset test_ds = encode(test_t, names, vocabs);
  save_dataset((fs::path(out_dir) / "train.bin").string(), train_ds);
  save_dataset((fs::path(out_dir) / "val.bin").string(), val_ds);
  save_dataset((fs::path(out_dir) / "test.bin").string(), test_ds);

  long long total_features = 0;
  json field_sizes = json::array();
  for (size_t i = 0; i < names.size(); ++i) {
    total_features += vocabs[i].size;
    field_sizes.push_back({{"name", names[i]}, {"size", vocabs[i].size}});
    std::cout << names[i] << ": " << vocabs[i].size << '\n';
  }
  std::cout << "fields: " << names.size() << "\ntotal features: " << total_features
            << "\nrows: train " << train_ds.rows() << ", val " << val_ds.rows()
            << ", test " << test_ds.rows() << '\n';

  manifest["min_count"] = min_count;
  manifest["fields"] = field_sizes;
  manifest["total_features"] = total_features;
  manifest["rows"] = {{"train", train_ds.rows()}, {"val", val_ds.rows()}, {"test", test_ds.rows()}};
  write_text(fs::path(out_dir) / "manifest.json", manifest.dump(1) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train (shared with ablate)
// ---------------------------------------------------------------------------

struct RunOutput {
  TrainResult result;
  EvalResult test;
  double train_seconds = 0.0;
};

RunOutput run_experiment(const ExperimentConfig& cfg, const PreparedData& data,
                         const fs::path& out_dir, bool quiet) {
  fs::create_directories(out_dir);
  write_text(out_dir / "config.toml", cfg.echo_toml());

  Model model(cfg.model, data.train.field_names, data.train.vocab_sizes, cfg.trainer.seed);

  std::ofstream jsonl(out_dir / "train_log.jsonl", std::ios::trunc);
  std::ofstream csv(out_dir / "train_log.csv", std::ios::trunc);
  csv << "epoch,train_total,train_ctr,train_cl,train_cos1,train_cos2,val_auc,"
         "val_logloss,lr,seconds\n";

  auto on_epoch = [&](const EpochRecord& r) {
    json j{{"epoch", r.epoch},          {"train_total", r.train_total},
           {"train_ctr", r.train_ctr},  {"train_cl", r.train_cl},
           {"train_cos1", r.train_cos1},{"train_cos2", r.train_cos2},
           {"val_auc", r.val_auc},      {"val_logloss", r.val_logloss},
           {"lr", r.lr},                {"seconds", r.seconds}};
    jsonl << j.dump() << '\n';
    jsonl.flush();
    csv << r.epoch << ',' << fmt(r.train_total) << ',' << fmt(r.train_ctr) << ','
        << fmt(r.train_cl) << ',' << fmt(r.train_cos1) << ',' << fmt(r.train_cos2) << ','
        << fmt(r.val_auc) << ',' << fmt(r.val_logloss) << ',' << fmt(r.lr) << ','
        << fmt(r.seconds) << '\n';
    csv.flush();
    if (!quiet) {
      std::cerr << "epoch " << r.epoch << ": total " << fmt(r.train_total, "%.6f")
                << ", val auc " << fmt(r.val_auc, "%.6f") << ", val logloss "
                << fmt(r.val_logloss, "%.6f") << ", lr " << r.lr << ", "
                << fmt(r.seconds, "%.1f") << " s\n";
    }
  };

  RunOutput out;
  const auto t0 = std::chrono::steady_clock::now();
  out.result = train(model, data.train, data.val, cfg.loss, cfg.trainer, on_epoch);
  out.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  model.save((out_dir / "checkpoint.bin").string());
  out.test = evaluate(model, data.test, cfg.trainer.eval_chunk);

  json metrics{{"best_epoch", out.result.best_epoch},
               {"epochs", out.result.log.size()},
               {"early_stopped", out.result.early_stopped},
               {"val_auc", out.result.best_val_auc},
               {"test_auc", out.test.auc},
               {"test_logloss", out.test.logloss}};
  write_text(out_dir / "metrics.json", metrics.dump(1) + "\n");
  if (!quiet) {
    std::cerr << "test auc " << fmt(out.test.auc, "%.6f") << ", test logloss "
              << fmt(out.test.logloss, "%.6f") << " (best epoch "
              << out.result.best_epoch << ")\n";
  }
  return out;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path, overrides);
  if (cfg.data_dir.empty()) throw ConfigError("config: data.dir is required for train");
  PreparedData data = load_prepared(cfg.data_dir);
  RunOutput out = run_experiment(cfg, data, out_dir, /*quiet=*/false);
  std::cout << "val_auc " << fmt(out.result.best_val_auc, "%.6f") << "\ntest_auc "
            << fmt(out.test.auc, "%.6f") << "\ntest_logloss "
            << fmt(out.test.logloss, "%.6f") << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint, const std::string& data_dir,
             const std::string& split_name, const std::string& baseline_path) {
  Model model = Model::load(checkpoint);
  const fs::path file = fs::path(data_dir) / (split_name + ".bin");
  if (!fs::exists(file)) throw ConfigError("no such split file: " + file.string());
  EncodedDataset ds = load_dataset(file.string());
  EvalResult ev = evaluate(model, ds);
  std::cout << "auc " << fmt(ev.auc, "%.6f") << "\nlogloss " << fmt(ev.logloss, "%.6f")
            << '\n';
  if (!baseline_path.empty()) {
    std::ifstream in(baseline_path);
    if (!in) throw ConfigError("cannot open baseline metrics file " + baseline_path);
    json base = json::parse(in, nullptr, /*allow_exceptions=*/true);
    const RelaImpr rel = relaimpr(ev.auc, ev.logloss, base.at("auc").get<double>(),
                                  base.at("logloss").get<double>());
    std::cout << "relaimpr_auc " << fmt(rel.auc_pct, "%.4f") << "%\nrelaimpr_logloss "
              << fmt(rel.logloss_pct, "%.4f") << "%\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& overrides,
               const std::string& out_dir) {
  ExperimentConfig base = ExperimentConfig::from_file(config_path, overrides);
  if (base.data_dir.empty()) throw ConfigError("config: data.dir is required for ablate");
  PreparedData data = load_prepared(base.data_dir);
  fs::create_directories(out_dir);

  struct VariantRun {
    std::string label;
    AblationSet ablations;
  };
  const std::vector<VariantRun> variants = {
      {"full", {}},
      {"-A", {Ablation::A}},
      {"-CL", {Ablation::CL}},
      {"-COS", {Ablation::COS}},
      {"-K", {Ablation::K}},
      {"-P", {Ablation::P}},
      {"-T", {Ablation::T}},
  };

  std::ofstream cmp(fs::path(out_dir) / "comparison.csv", std::ios::trunc);
  cmp << "variant,best_epoch,epochs,val_auc,val_logloss,test_auc,test_logloss\n";

  for (const auto& v : variants) {
    ExperimentConfig cfg = base;  // shared seed and hyperparameters
    cfg.model.kind = ModelKind::Cetn;
    cfg.model.ablations = v.ablations;
    const std::string dir_name = v.label == "full" ? "full" : "no_" + v.label.substr(1);
    std::cerr << "== variant " << v.label << '\n';
    RunOutput out = run_experiment(cfg, data, fs::path(out_dir) / dir_name, false);

    double val_ll = 0.0;
    if (!out.result.log.empty()) {
      val_ll = out.result.log[static_cast<size_t>(out.result.best_epoch)].val_logloss;
    }
    cmp << v.label << ',' << out.result.best_epoch << ',' << out.result.log.size() << ','
        << fmt(out.result.best_val_auc) << ',' << fmt(val_ll) << ',' << fmt(out.test.auc)
        << ',' << fmt(out.test.logloss) << '\n';
    cmp.flush();
  }
  std::cout << "comparison written to " << (fs::path(out_dir) / "comparison.csv").string()
            << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// repr-dump
// ---------------------------------------------------------------------------

int cmd_repr_dump(const std::string& checkpoint, const std::string& data_dir,
                  const std::string& split_name, size_t n, uint64_t seed,
                  const std::string& out_path) {
  Model model = Model::load(checkpoint);
  const fs::path file = fs::path(data_dir) / (split_name + ".bin");
  if (!fs::exists(file)) throw ConfigError("no such split file: " + file.string());
  EncodedDataset ds = load_dataset(file.string());
  if (n > ds.rows()) {
    throw ConfigError("repr-dump: n=" + std::to_string(n) + " exceeds dataset rows " +
                      std::to_string(ds.rows()));
  }

  std::vector<size_t> rows(ds.rows());
  std::iota(rows.begin(), rows.end(), size_t{0});
  Rng rng(Rng::mix(seed, 0x72657072ULL));  // "repr" stream
  rng.shuffle(rows);
  rows.resize(n);

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + out_path);
  const int dv = model.config().value_dim;
  out << "instance,space";
  for (int i = 0; i < dv; ++i) out << ",v" << i;
  out << '\n';

  static const char* kSpace[3] = {"E", "EP", "IP"};
  const size_t chunk = 2048;
  for (size_t at = 0; at < rows.size(); at += chunk) {
    const size_t m = std::min(chunk, rows.size() - at);
    Batch batch = gather_batch(ds, std::span<const size_t>(rows).subspan(at, m));
    Tape t(/*recording=*/false);
    ForwardResult fwd = model.forward(t, batch, /*noise_rng=*/nullptr);
    for (size_t b = 0; b < m; ++b) {
      for (int s = 0; s < 3; ++s) {
        out << rows[at + b] << ',' << kSpace[s];
        const Mat& v = fwd.space_v[s].value();
        for (int c = 0; c < dv; ++c) out << ',' << fmt(v(static_cast<int>(b), c), "%.17g");
        out << '\n';
      }
    }
  }
  std::cout << "wrote " << 3 * n << " rows to " << out_path << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CETN / simMHN click-through-rate models: data preparation, training, "
               "evaluation and diagnostics"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "encode a raw csv into train/val/test");
  std::string p_csv, p_schema, p_out = "data/prepared", p_ratios = "7:2:1";
  uint64_t p_seed = 42;
  int p_min_count = 2;
  std::vector<std::string> p_presplit;
  prepare->add_option("--csv", p_csv, "raw csv with a header and a label column");
  prepare->add_option("--schema", p_schema, "json schema describing the fields")->required();
  prepare->add_option("--out", p_out, "output directory");
  prepare->add_option("--ratios", p_ratios, "train:val:test, e.g. 7:2:1");
  prepare->add_option("--seed", p_seed, "shuffle seed");
  prepare->add_option("--min-count", p_min_count, "vocabulary frequency threshold");
  prepare->add_option("--presplit", p_presplit,
                      "three csv files (train val test) instead of --csv + --ratios")
      ->expected(3);

  // train
  auto* train_cmd = app.add_subcommand("train", "train one configuration");
  std::string t_config, t_out = "runs/run";
  std::vector<std::string> t_overrides;
  uint64_t t_seed = 0;
  bool t_seed_set = false;
  train_cmd->add_option("--config", t_config, "experiment toml")->required();
  train_cmd->add_option("--override", t_overrides, "dotted key=value, repeatable");
  train_cmd->add_option("--out", t_out, "output directory");
  train_cmd->add_option("--seed", t_seed, "override train.seed")
      ->each([&](const std::string&) { t_seed_set = true; });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string e_ckpt, e_data, e_split = "test", e_baseline;
  eval_cmd->add_option("--checkpoint", e_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", e_data, "prepared dataset directory")->required();
  eval_cmd->add_option("--split", e_split, "train, val or test");
  eval_cmd->add_option("--baseline", e_baseline,
                       "json file {\"auc\":..., \"logloss\":...} for relative improvement");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "run the full model and its six ablations");
  std::string a_config, a_out = "runs/ablation";
  std::vector<std::string> a_overrides;
  ablate_cmd->add_option("--config", a_config, "experiment toml")->required();
  ablate_cmd->add_option("--override", a_overrides, "dotted key=value, repeatable");
  ablate_cmd->add_option("--out", a_out, "output directory");

  // repr-dump
  auto* repr_cmd = app.add_subcommand("repr-dump", "dump per-space value vectors as csv");
  std::string r_ckpt, r_data, r_split = "test", r_out = "reprs.csv";
  size_t r_n = 1000;
  uint64_t r_seed = 42;
  repr_cmd->add_option("--checkpoint", r_ckpt, "checkpoint file")->required();
  repr_cmd->add_option("--data", r_data, "prepared dataset directory")->required();
  repr_cmd->add_option("--split", r_split, "train, val or test");
  repr_cmd->add_option("--n", r_n, "number of sampled instances");
  repr_cmd->add_option("--seed", r_seed, "sampling seed");
  repr_cmd->add_option("--out", r_out, "output csv path");

  // selfcheck
  auto* selfcheck_cmd =
      app.add_subcommand("selfcheck", "gradient, identity and oracle verification");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) {
      return cmd_prepare(p_csv, p_schema, p_out, p_ratios, p_seed, p_min_count, p_presplit);
    }
    if (*train_cmd) {
      if (t_seed_set) t_overrides.push_back("train.seed=" + std::to_string(t_seed));
      return cmd_train(t_config, t_overrides, t_out);
    }
    if (*eval_cmd) return cmd_eval(e_ckpt, e_data, e_split, e_baseline);
    if (*ablate_cmd) return cmd_ablate(a_config, a_overrides, a_out);
    if (*repr_cmd) return cmd_repr_dump(r_ckpt, r_data, r_split, r_n, r_seed, r_out);
    if (*selfcheck_cmd) {
      SelfCheckReport report = run_selfcheck(&std::cout);
      if (report.seconds > 60.0) {
        std::cerr << "warning: selfcheck took " << report.seconds
                  << " s (budget is 60 s on a desktop cpu)\n";
      }
      return report.ok ? kExitOk : kExitProperty;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const MetricError& e) {
    std::cerr << "metric error: " << e.what() << '\n';
    return kExitProperty;
  } catch (const NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitProperty;
  }
  return kExitOk;
}
