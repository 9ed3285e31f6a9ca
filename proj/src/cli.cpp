// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "posenet/config.hpp"
#include "posenet/grad_suite.hpp"
#include "posenet/metrics.hpp"
#include "posenet/training.hpp"

namespace posenet {
namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string ckpt;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Json config_document(const Flags& flags) {
  Json doc = flags.config.empty() ? Json::object() : read_config_document(flags.config);
  if (flags.seed) doc["seed"] = *flags.seed;
  return doc;
}

RunConfig resolve(const Flags& flags, bool require_file) {
  if (require_file && flags.config.empty()) throw UsageError("--config is required");
  return parse_run_config(config_document(flags));
}

void echo_config(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream os(dir / "config.json");
  os << run_config_to_json(cfg).dump(2) << '\n';
}

int cmd_gen_data(const Flags& flags, std::ostream& out) {
  const auto cfg = resolve(flags, false);
  if (flags.out.empty()) throw UsageError("gen-data needs --out <dir>");
  const fs::path dir(flags.out);
  echo_config(cfg, dir);
  // The training file is exactly the stream the trainer consumes, batch by batch.
  Trainer trainer(Model::initialize(cfg.model), cfg.train, cfg.task);
  {
    std::ofstream os(dir / "train.tsv");
    for (std::int64_t s = 1; s <= cfg.train.train_steps; ++s) {
      Rng rng(derive_seed(cfg.train.seed, kTrainStream, static_cast<std::uint64_t>(s)));
      std::vector<Example> batch;
      for (std::int64_t i = 0; i < cfg.train.batch_size; ++i) batch.push_back(generate_pair(cfg.task, rng));
      write_corpus(os, batch);
    }
  }
  std::ofstream os(dir / "eval.tsv");
  write_corpus(os, trainer.eval_set());
  out << "wrote " << cfg.train.train_steps * cfg.train.batch_size << " training and " << trainer.eval_set().size()
      << " eval examples to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_train(const Flags& flags, std::ostream& out) {
  auto cfg = resolve(flags, true);
  if (!flags.out.empty()) cfg.train.checkpoint_dir = flags.out;
  if (!cfg.train.checkpoint_dir.empty()) echo_config(cfg, cfg.train.checkpoint_dir);
  std::optional<Trainer> trainer;
  if (!flags.ckpt.empty()) {
    trainer.emplace(load_checkpoint(flags.ckpt, cfg.model), cfg.train, cfg.task);
  } else {
    trainer.emplace(Model::initialize(cfg.model), cfg.train, cfg.task);
  }
  trainer->run(&out);
  return kExitOk;
}

int cmd_eval(const Flags& flags, std::ostream& out) {
  if (flags.ckpt.empty()) throw UsageError("eval needs --ckpt <path>");
  Checkpoint ckpt;
  RunConfig cfg;
  if (!flags.config.empty()) {
    cfg = resolve(flags, true);
    ckpt = load_checkpoint(flags.ckpt, cfg.model);
  } else {
    ckpt = load_checkpoint(flags.ckpt);
    Json doc = config_document(flags);
    doc["model"] = model_config_to_json(ckpt.model);
    if (!flags.seed) doc["seed"] = ckpt.seed;
    cfg = parse_run_config(doc);
  }
  const Model model(ckpt.model, std::move(ckpt.params));
  const auto dataset = generate_corpus(cfg.task, cfg.train.eval_examples, kEvalStream);
  EvalOptions options;
  options.batch_size = cfg.train.batch_size;
  options.label_smoothing = cfg.train.label_smoothing;
  options.step = ckpt.step;
  out << evaluate(model, dataset, options).to_log_line() << '\n';
  return kExitOk;
}

int cmd_translate(const Flags& flags, std::istream& in, std::ostream& out) {
  if (flags.ckpt.empty()) throw UsageError("translate needs --ckpt <path>");
  Checkpoint ckpt = flags.config.empty() ? load_checkpoint(flags.ckpt)
                                         : load_checkpoint(flags.ckpt, resolve(flags, true).model);
  const Model model(ckpt.model, std::move(ckpt.params));
  const auto max_length = model.config().max_length;
  std::string line;
  while (std::getline(in, line)) {
    auto ids = parse_ids(line);
    if (ids.empty()) {
      out << '\n';
      continue;
    }
    ids.push_back(token::kEos);
    if (static_cast<std::int64_t>(ids.size()) > max_length) {
      throw std::invalid_argument("input line longer than max_length: " + line);
    }
    const IdMatrix src(1, static_cast<std::int64_t>(ids.size()), ids);
    const auto result = greedy_generate(model, src, max_length);
    out << format_ids(strip(result[0])) << '\n';
  }
  return kExitOk;
}

int cmd_gradcheck(const Flags& flags, std::ostream& out) {
  if (!flags.config.empty()) resolve(flags, true);  // validated only; the suite has fixed shapes
  const auto cases = run_grad_suite(flags.seed.value_or(7));
  bool ok = true;
  char buf[256];
  for (const auto& c : cases) {
    std::snprintf(buf, sizeof buf, "%-32s %s max_rel_error=%.3e checked=%lld worst=%s", c.name.c_str(),
                  c.report.passed() ? "ok  " : "FAIL", c.report.max_rel_error,
                  static_cast<long long>(c.report.checked), c.report.worst.c_str());
    out << buf << '\n';
    ok = ok && c.report.passed();
  }
  return ok ? kExitOk : kExitFailure;
}

std::string point_label(const Json& point) {
  std::string s;
  for (const auto& [key, value] : point.items()) {
    if (!s.empty()) s += '_';
    s += key + "-" + (value.is_string() ? value.get<std::string>() : value.dump());
  }
  return s.empty() ? "baseline" : s;
}

int cmd_ablate(const Flags& flags, std::ostream& out) {
  const Json base = config_document(flags);
  const auto resolved = parse_run_config(base);
  if (flags.config.empty()) throw UsageError("--config is required");
  std::vector<std::string> toggles;
  for (const auto& point : resolved.ablation_grid) {
    for (const auto& [key, value] : point.items()) {
      if (std::find(toggles.begin(), toggles.end(), key) == toggles.end()) toggles.push_back(key);
    }
  }

  std::ostringstream table;
  table << "step";
  for (const auto& t : toggles) table << ',' << t;
  for (const auto& f : metrics_field_names()) {
    if (f != "step") table << ',' << f;
  }
  table << '\n';
  out << table.str();

  std::size_t index = 0;
  for (const auto& point : resolved.ablation_grid) {
    Json doc = base;
    if (!doc.contains("model")) doc["model"] = Json::object();
    for (const auto& [key, value] : point.items()) doc["model"][key] = value;
    auto cfg = parse_run_config(doc);
    const auto label = std::to_string(index++) + "_" + point_label(point);
    if (!flags.out.empty()) {
      cfg.train.checkpoint_dir = (fs::path(flags.out) / label).string();
      echo_config(cfg, cfg.train.checkpoint_dir);
    }
    Trainer trainer(Model::initialize(cfg.model), cfg.train, cfg.task);
    auto records = trainer.run();
    if (records.empty() || records.back().step != trainer.current_step()) records.push_back(trainer.evaluate());
    const auto model_json = model_config_to_json(cfg.model);

    std::ostringstream row;
    const auto& r = records.back();
    row << r.step;
    for (const auto& t : toggles) {
      const auto& v = model_json.at(t);
      row << ',' << (v.is_string() ? v.get<std::string>() : v.dump());
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f,%.6f", r.loss, r.accuracy, r.accuracy_top5,
                  r.neg_log_perplexity, r.approx_bleu_score);
    row << buf << '\n';
    table << row.str();
    out << row.str() << std::flush;
  }
  if (!flags.out.empty()) {
    std::ofstream os(fs::path(flags.out) / "ablation.csv");
    os << table.str();
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"posenet: convolutional seq2seq on synthetic transduction tasks", "posenet"};
  app.require_subcommand(1);
  Flags flags;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON run configuration");
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--ckpt", flags.ckpt, "checkpoint path");
  };
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-data", "write the training stream and eval set as TSV"},
      {"train", "train and write logs and checkpoints"},
      {"eval", "print one metrics line for a checkpoint"},
      {"translate", "greedy-decode id sequences read from stdin"},
      {"gradcheck", "finite-difference gradient suite"},
      {"ablate", "train and evaluate across the mechanism-toggle grid"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  std::string command;
  for (auto* sub : app.get_subcommands()) command = sub->get_name();
  if (app.get_subcommand(command)->count("--seed") > 0) flags.seed = seed;

  try {
    if (command == "gen-data") return cmd_gen_data(flags, out);
    if (command == "train") return cmd_train(flags, out);
    if (command == "eval") return cmd_eval(flags, out);
    if (command == "translate") return cmd_translate(flags, in, out);
    if (command == "gradcheck") return cmd_gradcheck(flags, out);
    if (command == "ablate") return cmd_ablate(flags, out);
  } catch (const CheckpointMismatch& e) {
    err << "checkpoint mismatch: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UsageError& e) {
    err << "usage: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitConfig;
}

}  // namespace posenet
