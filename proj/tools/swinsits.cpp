/*
 * Copyright 2026 The swinsits Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// swinsits command-line tool. Talks to the library only through swinsits.h.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "swinsits/swinsits.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSuiteFailed = 1;
constexpr int kExitError = 2;

void print_line(const char* line, void*) {
  std::fputs(line, stdout);
  std::fputc('\n', stdout);
  std::fflush(stdout);
}

int report(sits_status status) {
  if (status == SITS_OK) return kExitOk;
  std::fprintf(stderr, "swinsits: %s: %s\n", sits_status_name(status), sits_last_error());
  return status == SITS_ERR_SUITE_FAILED ? kExitSuiteFailed : kExitError;
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Swin UNETR crop segmentation for satellite image time series"};
  app.set_version_flag("--version", std::string(sits_version()));
  app.require_subcommand(1);

  sits_synth_options so;
  sits_synth_options_default(&so);
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic tile dataset");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--tiles", so.tiles, "number of tiles")->capture_default_str();
  synth->add_option("--classes", so.classes, "number of crop classes")->capture_default_str();
  synth->add_option("--bands", so.bands, "spectral bands")->capture_default_str();
  synth->add_option("--timesteps", so.timesteps, "time steps (multiple of 16)")->capture_default_str();
  synth->add_option("--height", so.height, "tile height")->capture_default_str();
  synth->add_option("--width", so.width, "tile width")->capture_default_str();
  synth->add_option("--seed", so.seed, "random seed")->capture_default_str();

  std::string train_config, train_data, train_out;
  bool dry_run = false;
  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", train_config, "key = value config file")->required();
  train->add_option("--data", train_data, "dataset directory");
  train->add_option("--out", train_out, "run directory");
  train->add_flag("--dry-run", dry_run, "echo the config and check the dataset only");

  std::string eval_ckpt, eval_data, eval_split = "test", eval_report;
  int eval_threads = 1;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--split", eval_split, "train, val or test")->capture_default_str();
  eval->add_option("--report", eval_report, "write the report to this file");
  eval->add_option("--threads", eval_threads, "evaluation worker threads")->capture_default_str();

  std::string pred_ckpt, pred_tile, pred_out, pred_actual, pred_diff;
  auto* predict = app.add_subcommand("predict", "render the predicted class map of one tile");
  predict->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
  predict->add_option("--tile", pred_tile, ".sit tile")->required();
  predict->add_option("--out", pred_out, "predicted map (PPM)")->required();
  auto* actual = predict->add_option("--actual", pred_actual, "ground-truth map (PPM)");
  predict->add_option("--diff", pred_diff, "disagreement map (PPM)")->needs(actual);

  std::string suite = "all";
  auto* verify = app.add_subcommand("verify", "run the built-in check suites");
  verify->add_option("--suite", suite, "gradcheck, windows, metrics or all")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  if (synth->parsed()) {
    const sits_status st = sits_synth(&so, synth_out.c_str());
    if (st == SITS_OK) std::printf("wrote %lld tiles to %s\n", static_cast<long long>(so.tiles), synth_out.c_str());
    return report(st);
  }
  if (train->parsed())
    return report(sits_train(train_config.c_str(), opt(train_data), opt(train_out), dry_run ? 1 : 0, print_line,
                             nullptr));
  if (eval->parsed())
    return report(sits_evaluate(eval_ckpt.c_str(), eval_data.c_str(), eval_split.c_str(), eval_threads,
                                opt(eval_report), print_line, nullptr, nullptr, nullptr));
  if (predict->parsed()) {
    int64_t white = 0;
    const sits_status st = sits_predict(pred_ckpt.c_str(), pred_tile.c_str(), pred_out.c_str(), opt(pred_actual),
                                        opt(pred_diff), &white);
    if (st == SITS_OK) std::printf("disagreements=%lld\n", static_cast<long long>(white));
    return report(st);
  }
  if (verify->parsed()) {
    int failed = 0;
    const sits_status st = sits_verify(suite.c_str(), print_line, nullptr, &failed);
    if (st == SITS_OK || st == SITS_ERR_SUITE_FAILED) std::printf("%d check(s) failed\n", failed);
    return report(st);
  }
  return kExitError;
}
