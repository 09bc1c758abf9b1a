// Copyright 2026 The moska-ref Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// moska: verify | sweep | util | scaling
//
// Exit codes: 0 success, 1 property violation, 2 usage/config/output error.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "moska/moska.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitUsage = 2;

struct Args {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  bool json = false;
  bool trace = false;
  bool no_slo_cap = false;
  std::string overlap = "sum";
  std::string fault = "none";
  std::string timestamp;
  std::uint64_t cases = 0;
  std::string scaling_kind = "kv";
};

struct BufferOwner {
  moska_buffer* buffer = nullptr;
  ~BufferOwner() { moska_buffer_free(buffer); }
};

struct ConfigOwner {
  moska_config* config = nullptr;
  ~ConfigOwner() { moska_config_free(config); }
};

int ReportError(moska_status status) {
  std::cerr << "moska: " << moska_status_string(status) << ": " << moska_last_error() << "\n";
  return kExitUsage;
}

bool LoadConfig(const Args& args, ConfigOwner& owner, int& exit_code) {
  std::string path = args.config;
  if (path.empty()) {
    if (const char* env = std::getenv("MOSKA_CONFIG")) path = env;
  }
  const moska_status st = path.empty() ? moska_config_default(&owner.config)
                                       : moska_config_load(path.c_str(), &owner.config);
  if (st != MOSKA_OK) {
    exit_code = ReportError(st);
    return false;
  }
  return true;
}

moska_run_options ToOptions(const Args& args) {
  moska_run_options o;
  moska_run_options_init(&o);
  o.seed = args.seed;
  o.format = args.json ? MOSKA_FORMAT_JSON : MOSKA_FORMAT_CSV;
  o.slo_cap = args.no_slo_cap ? 0 : 1;
  o.overlap = args.overlap == "max" ? MOSKA_OVERLAP_MAX : MOSKA_OVERLAP_SUM;
  o.trace = args.trace ? 1 : 0;
  o.fault = args.fault == "merge-sign" ? MOSKA_FAULT_MERGE_SIGN : MOSKA_FAULT_NONE;
  o.cases = args.cases;
  o.timestamp = args.timestamp.empty() ? nullptr : args.timestamp.c_str();
  return o;
}

// Writes to --out, or stdout when no path was given.
bool Emit(const Args& args, const moska_buffer* buffer) {
  if (args.out.empty()) {
    std::fwrite(moska_buffer_data(buffer), 1, moska_buffer_size(buffer), stdout);
    return true;
  }
  std::ofstream f(args.out, std::ios::binary | std::ios::trunc);
  if (f) f.write(moska_buffer_data(buffer), static_cast<std::streamsize>(moska_buffer_size(buffer)));
  if (!f) {
    std::cerr << "moska: cannot write output file '" << args.out << "'\n";
    return false;
  }
  return true;
}

int RunVerify(const Args& args) {
  ConfigOwner cfg;
  int code = kExitOk;
  if (!LoadConfig(args, cfg, code)) return code;
  const moska_run_options o = ToOptions(args);
  BufferOwner report;
  const moska_status st = moska_run_verify(cfg.config, &o, &report.buffer);
  if (st != MOSKA_OK && st != MOSKA_ERR_PROPERTY_FAILED) return ReportError(st);
  if (!Emit(args, report.buffer)) return kExitUsage;
  if (st == MOSKA_ERR_PROPERTY_FAILED) {
    std::cerr << "moska: " << moska_last_error() << "\n";
    return kExitViolation;
  }
  if (!args.out.empty()) std::cout << "verify: all properties passed\n";
  return kExitOk;
}

int RunSweep(const Args& args) {
  ConfigOwner cfg;
  int code = kExitOk;
  if (!LoadConfig(args, cfg, code)) return code;
  const moska_run_options o = ToOptions(args);
  BufferOwner report;
  moska_status st = moska_run_sweep(cfg.config, &o, &report.buffer);
  if (st != MOSKA_OK) return ReportError(st);
  if (!Emit(args, report.buffer)) return kExitUsage;

  double ratio = 0;
  std::uint64_t len = 0;
  st = moska_sweep_peak_ratio(cfg.config, &o, &ratio, &len);
  if (st != MOSKA_OK) return ReportError(st);
  std::fprintf(stderr,
               "peak normalized throughput MoSKA/FlashAttention: %.1fx at shared_len=%llu "
               "(reported: 538.7x)\n",
               ratio, static_cast<unsigned long long>(len));
  return kExitOk;
}

int RunUtil(const Args& args) {
  ConfigOwner cfg;
  int code = kExitOk;
  if (!LoadConfig(args, cfg, code)) return code;
  const moska_run_options o = ToOptions(args);
  BufferOwner report;
  const moska_status st = moska_run_util(cfg.config, &o, &report.buffer);
  if (st != MOSKA_OK) return ReportError(st);
  return Emit(args, report.buffer) ? kExitOk : kExitUsage;
}

int RunScaling(const Args& args) {
  ConfigOwner cfg;
  int code = kExitOk;
  if (!LoadConfig(args, cfg, code)) return code;
  const moska_run_options o = ToOptions(args);
  BufferOwner report;
  const int kind = args.scaling_kind == "bandwidth" ? MOSKA_SCALING_BANDWIDTH : MOSKA_SCALING_KV;
  const moska_status st = moska_run_scaling(cfg.config, &o, kind, &report.buffer);
  if (st != MOSKA_OK) return ReportError(st);
  return Emit(args, report.buffer) ? kExitOk : kExitUsage;
}

void AddCommonOptions(CLI::App* cmd, Args& args) {
  cmd->add_option("--config", args.config, "Experiment config (JSON); env MOSKA_CONFIG");
  cmd->add_option("--seed", args.seed, "Run seed");
  cmd->add_option("--out", args.out, "Output path (default: stdout)");
  cmd->add_flag("--json", args.json, "Write the JSON mirror instead of CSV");
  cmd->add_option("--timestamp", args.timestamp, "Manifest timestamp override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MoSKA shared-KV attention reference and roofline model"};
  app.set_version_flag("--version", std::string(moska_version()));
  app.require_subcommand(1);
  Args args;

  auto* verify = app.add_subcommand("verify", "Run the attention/routing equivalence properties");
  AddCommonOptions(verify, args);
  verify->add_flag("--trace", args.trace, "Append per-query routing decisions");
  verify->add_option("--cases", args.cases, "Cases per randomized property (default 1000)");
  verify->add_option("--inject-fault", args.fault, "Harness self-test fault")
      ->check(CLI::IsMember({"none", "merge-sign"}))
      ->group("");

  auto model_flags = [&](CLI::App* cmd) {
    AddCommonOptions(cmd, args);
    cmd->add_flag("--no-slo-cap", args.no_slo_cap, "Do not cap per-request rate at the target");
    cmd->add_option("--overlap-model", args.overlap, "Step latency: sum or max of components")
        ->check(CLI::IsMember({"sum", "max"}));
  };
  auto* sweep = app.add_subcommand("sweep", "Throughput and max batch per policy");
  model_flags(sweep);
  auto* util = app.add_subcommand("util", "Per-node utilization of the disaggregated layout");
  model_flags(util);
  auto* scaling = app.add_subcommand("scaling", "KV size and bandwidth scaling tables");
  model_flags(scaling);
  scaling->add_option("--kind", args.scaling_kind, "kv or bandwidth")
      ->check(CLI::IsMember({"kv", "bandwidth"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (verify->parsed()) return RunVerify(args);
  if (sweep->parsed()) return RunSweep(args);
  if (util->parsed()) return RunUtil(args);
  if (scaling->parsed()) return RunScaling(args);
  return kExitUsage;
}
