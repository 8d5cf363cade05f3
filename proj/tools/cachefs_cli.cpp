/*
 * cachefs_cli.cpp
 *
 * This source file is part of the cachefs project
 *
 * Copyright 2026 cachefs project authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command line front end over the C API only.
//
//   cachefs run   --config cluster.conf scenario.conf
//   cachefs check --config cluster.conf scenario.conf   (exit != 0 on FAIL)
//   cachefs sweep log-size [--file-size 64MB]
//   cachefs sweep recovery
//   cachefs trace trace.tsv                              (pretty printer)

#include <CLI11.hpp>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cachefs/cachefs.h"

namespace {

uint64_t parse_size(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  std::string suffix(end);
  for (auto& c : suffix) c = static_cast<char>(std::tolower(c));
  uint64_t mul = 1;
  if (suffix == "k" || suffix == "kb") mul = 1ull << 10;
  if (suffix == "m" || suffix == "mb") mul = 1ull << 20;
  if (suffix == "g" || suffix == "gb") mul = 1ull << 30;
  return static_cast<uint64_t>(v * static_cast<double>(mul));
}

int run_or_check(const std::string& config, const std::string& scenario,
                 bool check, const std::string& out_prefix) {
  cfs_sim* sim = nullptr;
  cfs_status st = cfs_sim_open(config.c_str(), scenario.c_str(), &sim);
  if (st != CFS_OK) {
    std::fprintf(stderr, "open failed: %s\n", cfs_status_name(st));
    return 2;
  }
  st = check ? cfs_sim_check(sim) : cfs_sim_run(sim);
  if (st != CFS_OK && st != CFS_ERR_CHECK_FAILED) {
    std::fprintf(stderr, "%s failed: %s (%s)\n", check ? "check" : "run",
                 cfs_status_name(st), cfs_sim_last_error(sim));
    cfs_sim_close(sim);
    return 2;
  }

  if (check) std::fputs(cfs_sim_check_report(sim), stdout);
  std::printf("trace_hash\t%016" PRIx64 "\n", cfs_sim_trace_hash(sim));

  // Determinism spot check: the same scenario must reproduce bit-identical
  // traces.
  if (check) {
    cfs_sim* twin = nullptr;
    if (cfs_sim_open(config.c_str(), scenario.c_str(), &twin) == CFS_OK &&
        cfs_sim_run(twin) == CFS_OK) {
      bool same = cfs_sim_trace_hash(twin) == cfs_sim_trace_hash(sim);
      std::printf("%s\tdeterminism\n", same ? "PASS" : "FAIL");
      if (!same) st = CFS_ERR_CHECK_FAILED;
    }
    cfs_sim_close(twin);
  }

  auto dump = [&](const char* suffix, const char* body) {
    std::ofstream out(out_prefix + suffix);
    out << body;
  };
  dump(".trace.tsv", cfs_sim_trace_text(sim));
  dump(".metrics.tsv", cfs_sim_metrics_tsv(sim));
  dump(".summary.json", cfs_sim_summary_json(sim));
  std::printf("wrote %s.trace.tsv, %s.metrics.tsv, %s.summary.json\n",
              out_prefix.c_str(), out_prefix.c_str(), out_prefix.c_str());

  int rc = st == CFS_OK ? 0 : 1;
  cfs_sim_close(sim);
  return rc;
}

int pretty_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::fprintf(stderr, "cannot open %s\n", path.c_str());
    return 2;
  }
  std::string line;
  std::printf("%-14s %-12s %-18s %-18s %8s  %s\n", "time_us", "kind", "src",
              "dst", "bytes", "tag");
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string t, kind, src, dst, size, tag;
    std::getline(ss, t, '\t');
    std::getline(ss, kind, '\t');
    std::getline(ss, src, '\t');
    std::getline(ss, dst, '\t');
    std::getline(ss, size, '\t');
    std::getline(ss, tag, '\t');
    double us = std::strtod(t.c_str(), nullptr) / 1000.0;
    std::printf("%-14.3f %-12s %-18s %-18s %8s  %s\n", us, kind.c_str(),
                src.c_str(), dst.c_str(), size.c_str(), tag.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cachefs: deterministic distributed file system cache simulator"};
  app.require_subcommand(1);

  std::string config, scenario, out_prefix = "cachefs-out";
  std::string trace_file;
  std::string file_size = "16MB";

  auto* run = app.add_subcommand("run", "execute a scenario");
  run->add_option("--config", config, "cluster configuration file")->required();
  run->add_option("scenario", scenario, "scenario file")->required();
  run->add_option("--out", out_prefix, "output file prefix");

  auto* check = app.add_subcommand("check", "execute a scenario and audit it");
  check->add_option("--config", config, "cluster configuration file")->required();
  check->add_option("scenario", scenario, "scenario file")->required();
  check->add_option("--out", out_prefix, "output file prefix");

  auto* sweep = app.add_subcommand("sweep", "built-in experiments");
  std::string which;
  sweep->add_option("what", which, "log-size | recovery")->required();
  sweep->add_option("--file-size", file_size, "file size for log-size sweep");

  auto* trace = app.add_subcommand("trace", "pretty-print a trace file");
  trace->add_option("file", trace_file, "trace .tsv file")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return run_or_check(config, scenario, false, out_prefix);
  if (check->parsed()) return run_or_check(config, scenario, true, out_prefix);
  if (trace->parsed()) return pretty_trace(trace_file);

  if (sweep->parsed()) {
    char* tsv = nullptr;
    cfs_status st;
    if (which == "log-size") {
      std::vector<uint64_t> sizes{1ull << 20, 2ull << 20, 4ull << 20,
                                  8ull << 20, 16ull << 20};
      st = cfs_sweep_log_size(parse_size(file_size), sizes.data(),
                              static_cast<int>(sizes.size()), 1, &tsv);
    } else if (which == "recovery") {
      std::vector<uint64_t> sizes{1ull << 20, 4ull << 20, 10ull << 20};
      st = cfs_sweep_recovery(sizes.data(), static_cast<int>(sizes.size()), 1,
                              &tsv);
    } else {
      std::fprintf(stderr, "unknown sweep '%s'\n", which.c_str());
      return 2;
    }
    if (st != CFS_OK) {
      std::fprintf(stderr, "sweep failed: %s\n", cfs_status_name(st));
      return 2;
    }
    std::fputs(tsv, stdout);
    cfs_string_free(tsv);
    return 0;
  }
  return 0;
}
