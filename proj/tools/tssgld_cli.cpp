// Copyright 2026 The tssgld Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// tssgld: gen-env | run | eluder-check | buckets

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "tssgld/experiment.hpp"

namespace {

using namespace tssgld;

enum Exit { kOk = 0, kValidation = 1, kRuntime = 2, kInconclusive = 3 };

struct Common {
  std::string config;
  std::string out;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed_base;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty()) {
    std::ifstream is(c.config);
    if (!is) throw IoError("cannot read config " + c.config);
    std::stringstream ss;
    ss << is.rdbuf();
    cfg = parse_config(ss.str());
  }
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.workers) cfg.workers = *c.workers;
  if (c.seed_base) cfg.seed_base = *c.seed_base;
  cfg.validate();
  return cfg;
}

std::filesystem::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir);
  }
  return dir;
}

int gen_env(const Common& c) {
  const ExperimentConfig cfg = load(c);
  EnvSpec spec = cfg.env;
  spec.seed += cfg.seed_base;
  std::ostringstream os;
  if (spec.kind == EnvKind::cluster) {
    const ClusterEnv env = generate_cluster(spec);
    write_env(os, spec, env.matrix, &env.assignment);
  } else {
    write_env(os, spec, generate(spec));
  }
  if (c.out.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream f(ensure_dir(c.out) / "env.txt", std::ios::binary);
    if (!(f << os.str())) throw IoError("cannot write env.txt");
  }
  return kOk;
}

int run(const Common& c) { return run_experiment(load(c), std::cerr); }

int eluder_check(const Common& c, std::optional<std::size_t> budget) {
  ExperimentConfig cfg = load(c);
  if (budget) cfg.eluder.budget = *budget;
  std::ostringstream report;
  const int code = run_eluder_check(cfg.eluder, report);
  std::cout << report.str();
  if (!c.out.empty()) {
    std::ofstream f(ensure_dir(c.out) / "eluder.txt", std::ios::binary);
    if (!(f << report.str())) throw IoError("cannot write eluder.txt");
  }
  return code;
}

int buckets(const Common& c, const std::string& env_path) {
  RewardMatrix env;
  if (!env_path.empty()) {
    std::ifstream is(env_path);
    if (!is) throw IoError("cannot read env file " + env_path);
    env = read_env(is).matrix;
  } else {
    const ExperimentConfig cfg = load(c);
    EnvSpec spec = cfg.env;
    spec.seed += cfg.seed_base;
    env = generate(spec);
  }
  const std::vector<Bucket> b = bucket_users(env);
  std::ostringstream csv;
  csv << std::fixed << std::setprecision(6) << "user,row_max,bucket\n";
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < env.n_users(); ++i) {
    csv << i << ',' << env.values.row(i).maxCoeff() << ',' << to_string(b[i]) << '\n';
    ++counts[static_cast<int>(b[i])];
  }
  std::cout << "low " << counts[0] << "\nmid " << counts[1] << "\nhigh " << counts[2] << '\n';
  if (!c.out.empty()) {
    std::ofstream f(ensure_dir(c.out) / "buckets.csv", std::ios::binary);
    if (!(f << csv.str())) throw IoError("cannot write buckets.csv");
  }
  return kOk;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key=value config file");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--workers", c.workers, "parallel policy x seed runs")->check(CLI::PositiveNumber);
  sub->add_option("--seed-base", c.seed_base, "first run seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thompson sampling with SGLD matrix factorization: experiments and checks"};
  app.set_version_flag("--version", std::string(tssgld::kVersion));
  app.require_subcommand(1);

  Common common;
  std::optional<std::size_t> budget;
  std::string env_path;

  auto* gen = app.add_subcommand("gen-env", "write a generated environment (env.txt)");
  add_common(gen, common);
  auto* run_cmd = app.add_subcommand("run", "run policies x seeds, write CSVs and manifest");
  add_common(run_cmd, common);
  auto* eluder = app.add_subcommand("eluder-check", "eluder length vs bound on tiny instances");
  add_common(eluder, common);
  eluder->add_option("--budget", budget, "search node budget")->check(CLI::PositiveNumber);
  auto* bucket = app.add_subcommand("buckets", "low/mid/high pickup buckets");
  add_common(bucket, common);
  bucket->add_option("--env", env_path, "env file written by gen-env");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*gen) return gen_env(common);
    if (*run_cmd) return run(common);
    if (*eluder) return eluder_check(common, budget);
    if (*bucket) return buckets(common, env_path);
  } catch (const tssgld::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::logic_error& e) {
    std::cerr << "invalid: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kValidation;
}
