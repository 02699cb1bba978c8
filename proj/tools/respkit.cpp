// Copyright 2026 The respkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// respkit: prepare / train / evaluate / fuse / report.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "respkit/experiment.hpp"

namespace {

using respkit::ExperimentConfig;
namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string split = "test";
  std::string checkpoint;
  std::vector<std::string> inputs;
};

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig c = respkit::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.output_dir = o.out;
  return c;
}

int run(const std::string& verb, const Options& o) {
  if (verb == "prepare") {
    const auto s = respkit::cmd_prepare(resolve(o));
    std::printf("prepared %zu cycles from %zu recordings (%zu feature files written, train fraction %.3f)\n",
                s.cycles, s.recordings, s.extracted, s.train_fraction);
  } else if (verb == "train") {
    const auto c = resolve(o);
    const auto t = respkit::cmd_train(c);
    for (const auto& e : t.history.epochs) {
      std::printf("epoch %d  loss %.6f  kl %.6f  reg %.6f  %.1fs\n", e.epoch, e.loss, e.kl, e.reg, e.seconds);
    }
    std::printf("checkpoint: %s\n", t.checkpoint.string().c_str());
  } else if (verb == "evaluate") {
    const auto c = resolve(o);
    const fs::path ckpt = o.checkpoint.empty() ? c.output_dir / "model.ckpt" : fs::path(o.checkpoint);
    const auto e = respkit::cmd_evaluate(c, ckpt, respkit::parse_side(o.split));
    std::cout << respkit::report_to_markdown(e.report, e.predictions.framework_id);
  } else if (verb == "fuse") {
    std::optional<ExperimentConfig> c;
    if (!o.config.empty()) c = resolve(o);
    const fs::path out = !o.out.empty() ? fs::path(o.out) : c ? c->output_dir : fs::path(".");
    std::vector<fs::path> inputs(o.inputs.begin(), o.inputs.end());
    const auto f = respkit::cmd_fuse(inputs, out, c);
    std::printf("fused %zu cycles -> %s\n", f.fused.probs.size(), (out / "fused.csv").string().c_str());
    if (f.report) std::cout << respkit::report_to_markdown(*f.report, "Late fusion (PROD)");
  } else if (verb == "report") {
    std::vector<fs::path> inputs(o.inputs.begin(), o.inputs.end());
    const std::string table = respkit::cmd_report(inputs);
    if (!o.out.empty()) respkit::write_text(o.out, table);
    std::cout << table;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Respiratory sound classification pipeline"};
  app.require_subcommand(1);
  Options o;

  auto* prepare = app.add_subcommand("prepare", "Build the cycle manifest and feature cache");
  auto* train = app.add_subcommand("train", "Train the configured model");
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on one split");
  auto* fuse = app.add_subcommand("fuse", "Late PROD fusion of prediction files");
  auto* report = app.add_subcommand("report", "Tabulate report JSON files");

  for (auto* sub : {prepare, train, evaluate}) {
    sub->add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Root seed, overriding the config");
    sub->add_option("--out", o.out, "Output directory, overriding the config");
  }
  evaluate->add_option("--split", o.split, "Split to score")->check(CLI::IsMember({"train", "test"}));
  evaluate->add_option("--checkpoint", o.checkpoint, "Checkpoint (default: <out>/model.ckpt)");
  fuse->add_option("--config", o.config, "Experiment config, used for ground-truth labels")->check(CLI::ExistingFile);
  fuse->add_option("--out", o.out, "Output directory");
  fuse->add_option("predictions", o.inputs, "Prediction CSV files")->required()->check(CLI::ExistingFile);
  report->add_option("--out", o.out, "Write the table to this file");
  report->add_option("reports", o.inputs, "Report JSON files")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  const std::string verb = app.get_subcommands().front()->get_name();
  try {
    return run(verb, o);
  } catch (const respkit::ConfigError& e) {
    std::fprintf(stderr, "respkit %s: config error: %s\n", verb.c_str(), e.what());
    return 2;
  } catch (const respkit::IntegrityError& e) {
    std::fprintf(stderr, "respkit %s: integrity error: %s\n", verb.c_str(), e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "respkit %s: %s\n", verb.c_str(), e.what());
    return 1;
  }
}
