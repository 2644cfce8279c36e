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

#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tssgld/bandit.hpp"
#include "tssgld/common.hpp"
#include "tssgld/eluder.hpp"
#include "tssgld/env.hpp"
#include "tssgld/metrics.hpp"
#include "tssgld/sgld.hpp"

namespace tssgld {

enum class SummaryStat { mean, median };

struct ReportFlags {
  bool regret = true;
  bool attempts = true;
  bool dropoffs = true;
  bool buckets = true;

  bool operator==(const ReportFlags&) const = default;
};

struct EluderCheckConfig {
  double eps = 0.1;
  std::size_t budget = 1000000;
  int max_dim = 3;  // C, N, D each range over 1..max_dim
  std::vector<double> grid{0.0, 0.5, 1.0};
  // Classes larger than this are replaced by a random sample of sample_size.
  long long enumerate_limit = 2000;
  std::size_t sample_size = 200;
  std::uint64_t seed = 0;
  // Test hook: subtracted from the bound to force violations.
  long long bound_offset = 0;

  void validate() const {
    if (!(eps > 0.0)) throw ValidationError("eluder: eps must be positive");
    if (budget < 1) throw ValidationError("eluder: budget must be >= 1");
    if (max_dim < 1) throw ValidationError("eluder: max_dim must be >= 1");
    if (grid.empty()) throw ValidationError("eluder: grid must not be empty");
    if (sample_size < 2) throw ValidationError("eluder: sample_size must be >= 2");
    if (enumerate_limit < 1) throw ValidationError("eluder: enumerate_limit must be >= 1");
  }

  bool operator==(const EluderCheckConfig&) const = default;
};

inline SgldConfig experiment_sgld_defaults() {
  SgldConfig c;
  c.step_size = 0.001;
  c.iters_per_round = 100;
  return c;
}

inline const std::vector<PolicyKind>& all_policies() {
  static const std::vector<PolicyKind> kAll{PolicyKind::oracle, PolicyKind::ts_sgld_full,
                                            PolicyKind::ts_sgld_alternating, PolicyKind::ucb,
                                            PolicyKind::random};
  return kAll;
}

struct ExperimentConfig {
  EnvSpec env;
  SgldConfig sgld = experiment_sgld_defaults();
  int model_rank = 0;  // 0: use env.rank
  double prior_lambda = 0.5;
  double prior_alpha = 0.5;
  std::vector<std::pair<int, double>> alpha_rows;  // per-archetype alpha overrides
  PriorSign prior_sign = PriorSign::as_written;
  double parameter_floor = std::numeric_limits<double>::lowest();
  std::vector<PolicyKind> policies = all_policies();
  PolicyConfig policy;
  int n_seeds = 1;
  std::string output_dir = "out";
  int workers = 1;
  std::uint64_t seed_base = 0;
  SummaryStat summary = SummaryStat::mean;
  ReportFlags report;
  AttemptModel attempts;
  DropoffRule dropoff;
  double listen_a = 2.0;
  double listen_b = 1.0;
  EluderCheckConfig eluder;

  int rank() const { return model_rank > 0 ? model_rank : env.rank; }

  PriorSpec prior(int n_users) const {
    PriorSpec p = PriorSpec::constant(n_users, rank(), env.n_arms, prior_lambda, prior_alpha,
                                      prior_sign);
    for (const auto& [row, value] : alpha_rows) p.alpha.row(row).setConstant(value);
    p.parameter_floor = parameter_floor;
    return p;
  }

  // Per-run sampler settings. reference_count 0 means the final data size.
  SgldConfig sgld_for(std::uint64_t seed) const {
    SgldConfig c = sgld;
    c.seed = seed;
    if (c.scale_step_with_data && c.reference_count == 0) {
      c.reference_count = static_cast<long long>(policy.rounds) * policy.samples_per_step;
    }
    return c;
  }

  PolicyConfig policy_for(PolicyKind kind, std::uint64_t seed) const {
    PolicyConfig p = policy;
    p.policy = kind;
    p.seed = seed;
    return p;
  }

  void validate() const {
    try {
      env.validate();
      sgld.validate();
      policy.validate();
      attempts.validate();
      dropoff.validate();
      eluder.validate();
      if (model_rank < 0) throw ValidationError("sgld.rank must be >= 0");
      if (prior_lambda < 0.0 || prior_alpha < 0.0) {
        throw ValidationError("prior rates must be nonnegative");
      }
      for (const auto& [row, value] : alpha_rows) {
        if (row < 0 || row >= rank()) {
          throw ValidationError("prior.alpha_rows: row " + std::to_string(row) + " out of range");
        }
        if (value < 0.0) throw ValidationError("prior.alpha_rows: rates must be nonnegative");
      }
      if (policies.empty()) throw ValidationError("policy.list must not be empty");
      for (std::size_t i = 0; i < policies.size(); ++i) {
        for (std::size_t j = i + 1; j < policies.size(); ++j) {
          if (policies[i] == policies[j]) {
            throw ValidationError("policy.list: duplicate " + std::string(to_string(policies[i])));
          }
        }
      }
      if (n_seeds < 1) throw ValidationError("run.n_seeds must be >= 1");
      if (workers < 1) throw ValidationError("run.workers must be >= 1");
      if (output_dir.empty()) throw ValidationError("run.output_dir must not be empty");
      if (!(listen_a > 0.0 && listen_b > 0.0)) {
        throw ValidationError("metrics.listen_a and metrics.listen_b must be positive");
      }
    } catch (const ValidationError&) {
      throw;
    } catch (const std::logic_error& e) {
      throw ValidationError(e.what());
    }
  }

  bool operator==(const ExperimentConfig&) const = default;
};

// ---- key=value format ----

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto pos = s.find(sep);
    out.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

inline std::string format_double(double x) {
  if (x == std::numeric_limits<double>::lowest()) return "none";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

struct Field {
  std::string key;
  std::function<bool(std::string_view)> set;  // false on a malformed value
  std::function<std::string()> get;
};

template <typename T>
Field number_field(std::string key, T& ref) {
  return {std::move(key),
          [&ref](std::string_view v) {
            auto x = parse_number<T>(v);
            if (!x) return false;
            ref = *x;
            return true;
          },
          [&ref] {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(ref);
            } else {
              return std::to_string(ref);
            }
          }};
}

inline Field bool_field(std::string key, bool& ref) {
  return {std::move(key),
          [&ref](std::string_view v) {
            if (v == "true" || v == "1") {
              ref = true;
            } else if (v == "false" || v == "0") {
              ref = false;
            } else {
              return false;
            }
            return true;
          },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

template <typename E>
Field enum_field(std::string key, E& ref, std::vector<std::pair<std::string_view, E>> names) {
  return {std::move(key),
          [&ref, names](std::string_view v) {
            for (const auto& [name, e] : names) {
              if (name == v) {
                ref = e;
                return true;
              }
            }
            return false;
          },
          [&ref, names] {
            for (const auto& [name, e] : names) {
              if (e == ref) return std::string(name);
            }
            return std::string("?");
          }};
}

inline std::vector<Field> config_fields(ExperimentConfig& c) {
  std::vector<Field> f;
  f.push_back(number_field("env.n_users", c.env.n_users));
  f.push_back(number_field("env.n_arms", c.env.n_arms));
  f.push_back(number_field("env.rank", c.env.rank));
  f.push_back(number_field("env.noise_mean", c.env.noise_mean));
  f.push_back(number_field("env.noise_std", c.env.noise_std));
  f.push_back(enum_field<EnvKind>("env.kind", c.env.kind,
                                  {{"low_rank", EnvKind::low_rank},
                                   {"cluster", EnvKind::cluster},
                                   {"spectrum_matched", EnvKind::spectrum_matched}}));
  f.push_back(number_field("env.seed", c.env.seed));
  f.push_back(number_field("env.zero_fraction", c.env.zero_fraction));

  f.push_back(number_field("sgld.step_size", c.sgld.step_size));
  f.push_back(number_field("sgld.batch_size", c.sgld.batch_size));
  f.push_back(number_field("sgld.iters_per_round", c.sgld.iters_per_round));
  f.push_back(bool_field("sgld.scale_step_with_data", c.sgld.scale_step_with_data));
  f.push_back(number_field("sgld.reference_count", c.sgld.reference_count));
  f.push_back(number_field("sgld.n_blocks", c.sgld.n_blocks));
  f.push_back(number_field("sgld.workers", c.sgld.workers));
  f.push_back(number_field("sgld.init_std", c.sgld.init_std));
  f.push_back(number_field("sgld.final_step_size", c.sgld.final_step_size));
  f.push_back(number_field("sgld.rank", c.model_rank));

  f.push_back(number_field("prior.lambda", c.prior_lambda));
  f.push_back(number_field("prior.alpha", c.prior_alpha));
  f.push_back({"prior.alpha_rows",
               [&c](std::string_view v) {
                 std::vector<std::pair<int, double>> rows;
                 if (!v.empty()) {
                   for (std::string_view item : split(v, ',')) {
                     const auto colon = item.find(':');
                     if (colon == std::string_view::npos) return false;
                     auto r = parse_number<int>(trim(item.substr(0, colon)));
                     auto a = parse_number<double>(trim(item.substr(colon + 1)));
                     if (!r || !a) return false;
                     rows.emplace_back(*r, *a);
                   }
                 }
                 c.alpha_rows = std::move(rows);
                 return true;
               },
               [&c] {
                 std::string out;
                 for (const auto& [r, a] : c.alpha_rows) {
                   if (!out.empty()) out += ',';
                   out += std::to_string(r) + ':' + format_double(a);
                 }
                 return out;
               }});
  f.push_back(enum_field<PriorSign>("prior.sign", c.prior_sign,
                                    {{"as_written", PriorSign::as_written},
                                     {"standard_exponential", PriorSign::standard_exponential}}));
  f.push_back({"prior.parameter_floor",
               [&c](std::string_view v) {
                 if (v == "none") {
                   c.parameter_floor = std::numeric_limits<double>::lowest();
                   return true;
                 }
                 auto x = parse_number<double>(v);
                 if (!x) return false;
                 c.parameter_floor = *x;
                 return true;
               },
               [&c] { return format_double(c.parameter_floor); }});

  f.push_back({"policy.list",
               [&c](std::string_view v) {
                 std::vector<PolicyKind> out;
                 for (std::string_view name : split(v, ',')) {
                   auto p = parse_policy(name);
                   if (!p) return false;
                   out.push_back(*p);
                 }
                 c.policies = std::move(out);
                 return true;
               },
               [&c] {
                 std::string out;
                 for (PolicyKind p : c.policies) {
                   if (!out.empty()) out += ',';
                   out += to_string(p);
                 }
                 return out;
               }});
  f.push_back(number_field("policy.samples_per_step", c.policy.samples_per_step));
  f.push_back(number_field("policy.rounds", c.policy.rounds));
  f.push_back(number_field("policy.ucb_exploration", c.policy.ucb_exploration));
  f.push_back(enum_field<ArrivalMode>("policy.arrival", c.policy.arrival,
                                      {{"round_robin", ArrivalMode::round_robin},
                                       {"uniform", ArrivalMode::uniform}}));

  f.push_back(number_field("run.n_seeds", c.n_seeds));
  f.push_back({"run.output_dir",
               [&c](std::string_view v) {
                 c.output_dir = std::string(v);
                 return true;
               },
               [&c] { return c.output_dir; }});
  f.push_back(number_field("run.workers", c.workers));
  f.push_back(number_field("run.seed_base", c.seed_base));
  f.push_back(enum_field<SummaryStat>("run.summary", c.summary,
                                      {{"mean", SummaryStat::mean}, {"median", SummaryStat::median}}));

  f.push_back(bool_field("report.regret", c.report.regret));
  f.push_back(bool_field("report.attempts", c.report.attempts));
  f.push_back(bool_field("report.dropoffs", c.report.dropoffs));
  f.push_back(bool_field("report.buckets", c.report.buckets));

  f.push_back(number_field("metrics.max_attempts", c.attempts.max_attempts));
  f.push_back(enum_field<RetryPolicy>("metrics.retry", c.attempts.retry,
                                      {{"same_slot", RetryPolicy::same_slot},
                                       {"policy_resample", RetryPolicy::policy_resample}}));
  f.push_back(number_field("metrics.listen_a", c.listen_a));
  f.push_back(number_field("metrics.listen_b", c.listen_b));

  f.push_back(number_field("dropoff.threshold", c.dropoff.engagement_threshold));
  f.push_back(number_field("dropoff.consecutive_weeks", c.dropoff.consecutive_weeks));
  f.push_back(number_field("dropoff.window_weeks", c.dropoff.window_weeks));
  f.push_back(number_field("dropoff.window_low_weeks", c.dropoff.window_low_weeks));

  f.push_back(number_field("eluder.eps", c.eluder.eps));
  f.push_back(number_field("eluder.budget", c.eluder.budget));
  f.push_back(number_field("eluder.max_dim", c.eluder.max_dim));
  f.push_back({"eluder.grid",
               [&c](std::string_view v) {
                 std::vector<double> g;
                 for (std::string_view item : split(v, ',')) {
                   auto x = parse_number<double>(item);
                   if (!x) return false;
                   g.push_back(*x);
                 }
                 c.eluder.grid = std::move(g);
                 return true;
               },
               [&c] {
                 std::string out;
                 for (double x : c.eluder.grid) {
                   if (!out.empty()) out += ',';
                   out += format_double(x);
                 }
                 return out;
               }});
  f.push_back(number_field("eluder.enumerate_limit", c.eluder.enumerate_limit));
  f.push_back(number_field("eluder.sample_size", c.eluder.sample_size));
  f.push_back(number_field("eluder.seed", c.eluder.seed));
  f.push_back(number_field("eluder.bound_offset", c.eluder.bound_offset));
  return f;
}

}  // namespace detail

/// Parses "section.key=value" lines. '#' starts a comment; blank lines are
/// ignored; later assignments override earlier ones.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::vector<detail::Field> fields = detail::config_fields(cfg);
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", line_no);
    const std::string_view key = detail::trim(line.substr(0, eq));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line_no);
    auto it = std::find_if(fields.begin(), fields.end(),
                           [&](const detail::Field& f) { return f.key == key; });
    if (it == fields.end()) throw ParseError("unknown key '" + std::string(key) + "'", line_no);
    if (!it->set(value)) {
      throw ParseError("malformed value '" + std::string(value) + "' for " + std::string(key),
                       line_no);
    }
  }
  cfg.validate();
  return cfg;
}

/// Every key with its current value, in a fixed order. parse_config on the
/// result reproduces cfg.
inline std::string config_to_text(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  std::string out;
  for (const detail::Field& f : detail::config_fields(copy)) out += f.key + "=" + f.get() + "\n";
  return out;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const detail::Field& f : detail::config_fields(copy)) j[f.key] = f.get();
  return j;
}

// ---- per-run metrics ----

struct MetricsRow {
  std::string policy;
  std::string seed;
  std::string bucket;  // all, low, mid, high
  std::optional<double> mean_attempts;
  std::optional<double> connect_rate;
  std::optional<double> dropoff_rate;
  std::optional<double> rel_random_pct;
};

struct UserAttempts {
  std::vector<double> policy_attempts;
  std::vector<double> policy_connect;
  std::vector<double> random_attempts;
  std::vector<double> random_connect;
};

/// Expected cost of one call per user: the policy calls its top-ranked slot
/// (final scores), the random baseline a uniformly random slot. Under
/// policy_resample the policy walks its ranking and random redraws a slot on
/// every attempt.
inline UserAttempts expected_user_attempts(const RunTrace& trace, const RewardMatrix& env,
                                           const AttemptModel& model, bool policy_is_random) {
  model.validate();
  const int n = env.n_users();
  const int m = env.n_arms();
  UserAttempts out;
  out.policy_attempts.resize(n);
  out.policy_connect.resize(n);
  out.random_attempts.resize(n);
  out.random_connect.resize(n);
  for (int i = 0; i < n; ++i) {
    if (model.retry == RetryPolicy::same_slot) {
      double a = 0.0;
      double c = 0.0;
      for (int j = 0; j < m; ++j) {
        const AttemptExpectation e = expected_attempts(env.values(i, j), model);
        a += e.mean_attempts;
        c += e.connect_prob;
      }
      out.random_attempts[i] = a / m;
      out.random_connect[i] = c / m;
    } else {
      const AttemptExpectation e = expected_attempts(env.values.row(i).mean(), model);
      out.random_attempts[i] = e.mean_attempts;
      out.random_connect[i] = e.connect_prob;
    }
    if (policy_is_random || !trace.final_scores) {
      out.policy_attempts[i] = out.random_attempts[i];
      out.policy_connect[i] = out.random_connect[i];
      continue;
    }
    const std::vector<int> ranked = rank_slots(trace.final_scores->row(i));
    AttemptExpectation e;
    if (model.retry == RetryPolicy::same_slot) {
      e = expected_attempts(env.values(i, ranked.front()), model);
    } else {
      std::vector<double> p(ranked.size());
      for (std::size_t k = 0; k < ranked.size(); ++k) p[k] = env.values(i, ranked[k]);
      e = expected_attempts_sequence(p, model.max_attempts);
    }
    out.policy_attempts[i] = e.mean_attempts;
    out.policy_connect[i] = e.connect_prob;
  }
  return out;
}

inline std::vector<MetricsRow> run_metrics(const RunTrace& trace, const RewardMatrix& env,
                                           const Matrix& engagement, const ExperimentConfig& cfg,
                                           bool policy_is_random) {
  const int n = env.n_users();
  std::optional<UserAttempts> att;
  if (cfg.report.attempts) att = expected_user_attempts(trace, env, cfg.attempts, policy_is_random);
  std::optional<DropoffResult> drops;
  if (cfg.report.dropoffs) {
    drops = simulate_dropoffs(weekly_engagement(trace, engagement, cfg.policy.rounds), cfg.dropoff);
  }

  std::vector<std::pair<std::string, std::vector<int>>> groups;
  groups.push_back({"all", {}});
  for (int i = 0; i < n; ++i) groups[0].second.push_back(i);
  if (cfg.report.buckets) {
    const std::vector<Bucket> b = bucket_users(env);
    for (Bucket k : {Bucket::low, Bucket::mid, Bucket::high}) {
      std::vector<int> users;
      for (int i = 0; i < n; ++i) {
        if (b[i] == k) users.push_back(i);
      }
      groups.push_back({std::string(to_string(k)), std::move(users)});
    }
  }

  std::vector<MetricsRow> rows;
  for (const auto& [name, users] : groups) {
    if (users.empty()) continue;
    MetricsRow row{trace.policy, std::to_string(trace.seed), name, {}, {}, {}, {}};
    const double count = static_cast<double>(users.size());
    if (att) {
      double pa = 0.0, pc = 0.0, ra = 0.0;
      for (int i : users) {
        pa += att->policy_attempts[i];
        pc += att->policy_connect[i];
        ra += att->random_attempts[i];
      }
      row.mean_attempts = pa / count;
      row.connect_rate = pc / count;
      row.rel_random_pct = relative_to_random_pct(pa / count, ra / count);
    }
    if (drops) {
      double d = 0.0;
      for (int i : users) d += drops->drop_week[i].has_value() ? 1.0 : 0.0;
      row.dropoff_rate = d / count;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- experiment runner ----

struct RunOutcome {
  PolicyKind policy = PolicyKind::oracle;
  std::uint64_t seed = 0;
  RunTrace trace;
  std::vector<MetricsRow> metrics;
  bool failed = false;
  std::string error;
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;  // sorted by policy name, then seed
  std::string regret_csv;
  std::string metrics_csv;
  double wall_seconds = 0.0;

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(
        runs.begin(), runs.end(),
        [](const RunOutcome& r) { return r.failed || r.trace.status != RunStatus::ok; }));
  }
};

namespace detail {

// Runs task(i) for i in [0, n) on up to `workers` threads.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task) {
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) task(i);
    });
  }
}

inline double summarize(std::vector<double> xs, SummaryStat stat) {
  if (stat == SummaryStat::mean) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  }
  std::sort(xs.begin(), xs.end());
  const std::size_t k = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[k] : 0.5 * (xs[k - 1] + xs[k]);
}

inline std::string stat_label(SummaryStat s) { return s == SummaryStat::mean ? "mean" : "median"; }

inline void write_cell(std::ostream& os, const std::optional<double>& x) {
  if (x && std::isfinite(*x)) os << *x;
}

inline std::string regret_csv(const std::vector<RunOutcome>& runs, const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  write_regret_header(os);
  std::size_t i = 0;
  while (i < runs.size()) {
    std::size_t j = i;
    std::map<int, std::vector<const RoundRecord*>> by_round;
    for (; j < runs.size() && runs[j].policy == runs[i].policy; ++j) {
      const RunOutcome& r = runs[j];
      if (r.failed) {
        os << to_string(r.policy) << ',' << r.seed << ",failed,,,\n";
        continue;
      }
      write_regret_rows(os, r.trace);
      if (r.trace.status != RunStatus::ok) continue;
      for (const RoundRecord& rec : r.trace.rounds) by_round[rec.round].push_back(&rec);
    }
    for (const auto& [round, recs] : by_round) {
      std::vector<double> inst, cum, nobs;
      for (const RoundRecord* rec : recs) {
        inst.push_back(rec->inst_regret);
        cum.push_back(rec->cum_regret);
        nobs.push_back(static_cast<double>(rec->n_obs));
      }
      os << to_string(runs[i].policy) << ',' << stat_label(cfg.summary) << ',' << round << ','
         << summarize(inst, cfg.summary) << ',' << summarize(cum, cfg.summary) << ','
         << summarize(nobs, cfg.summary) << '\n';
    }
    i = j;
  }
  return os.str();
}

inline std::string metrics_csv(const std::vector<RunOutcome>& runs, const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  os << "policy,seed,bucket,mean_attempts,connect_rate,dropoff_rate,rel_random_pct\n";
  auto emit = [&](const MetricsRow& r) {
    os << r.policy << ',' << r.seed << ',' << r.bucket << ',';
    write_cell(os, r.mean_attempts);
    os << ',';
    write_cell(os, r.connect_rate);
    os << ',';
    write_cell(os, r.dropoff_rate);
    os << ',';
    write_cell(os, r.rel_random_pct);
    os << '\n';
  };
  std::size_t i = 0;
  while (i < runs.size()) {
    std::size_t j = i;
    std::map<std::string, std::vector<const MetricsRow*>> by_bucket;
    for (; j < runs.size() && runs[j].policy == runs[i].policy; ++j) {
      for (const MetricsRow& r : runs[j].metrics) {
        emit(r);
        by_bucket[r.bucket].push_back(&r);
      }
    }
    for (const std::string bucket : {"all", "low", "mid", "high"}) {
      if (!by_bucket.contains(bucket)) continue;
      MetricsRow s{std::string(to_string(runs[i].policy)), stat_label(cfg.summary), bucket,
                   {}, {}, {}, {}};
      auto agg = [&](std::optional<double> MetricsRow::*field) -> std::optional<double> {
        std::vector<double> xs;
        for (const MetricsRow* r : by_bucket[bucket]) {
          if (r->*field) xs.push_back(*(r->*field));
        }
        if (xs.empty()) return std::nullopt;
        return summarize(xs, cfg.summary);
      };
      s.mean_attempts = agg(&MetricsRow::mean_attempts);
      s.connect_rate = agg(&MetricsRow::connect_rate);
      s.dropoff_rate = agg(&MetricsRow::dropoff_rate);
      s.rel_random_pct = agg(&MetricsRow::rel_random_pct);
      emit(s);
    }
    i = j;
  }
  return os.str();
}

}  // namespace detail

/// Runs every policy on every seed without touching the filesystem. Seed k
/// uses run seed seed_base + k for the policy and sampler and env.seed + run
/// seed for the environment, which all policies of that seed share.
inline ExperimentResult run_experiment_in_memory(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int n_seeds = cfg.n_seeds;

  struct SeedEnv {
    std::optional<RewardMatrix> env;
    Matrix engagement;
    std::string error;
  };
  std::vector<SeedEnv> envs(n_seeds);
  detail::parallel_for(static_cast<std::size_t>(n_seeds), cfg.workers, [&](std::size_t k) {
    EnvSpec spec = cfg.env;
    spec.seed = cfg.env.seed + cfg.seed_base + k;
    try {
      envs[k].env = generate(spec);
      envs[k].engagement =
          synthesize_engagement(envs[k].env->values, cfg.listen_a, cfg.listen_b, spec.seed);
    } catch (const std::exception& e) {
      envs[k].error = e.what();
    }
  });

  std::vector<PolicyKind> policies = cfg.policies;
  std::sort(policies.begin(), policies.end(),
            [](PolicyKind a, PolicyKind b) { return to_string(a) < to_string(b); });

  ExperimentResult result;
  result.runs.resize(policies.size() * n_seeds);
  detail::parallel_for(result.runs.size(), cfg.workers, [&](std::size_t t) {
    const std::size_t k = t % n_seeds;
    RunOutcome& out = result.runs[t];
    out.policy = policies[t / n_seeds];
    out.seed = cfg.seed_base + k;
    if (!envs[k].env) {
      out.failed = true;
      out.error = "environment: " + envs[k].error;
      return;
    }
    try {
      const RewardMatrix& env = *envs[k].env;
      out.trace = run_policy(env, cfg.prior(env.n_users()), cfg.sgld_for(out.seed),
                             cfg.policy_for(out.policy, out.seed));
      if (out.trace.status == RunStatus::ok && (cfg.report.attempts || cfg.report.dropoffs)) {
        out.metrics = run_metrics(out.trace, env, envs[k].engagement, cfg,
                                  out.policy == PolicyKind::random);
      }
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
    }
  });

  if (cfg.report.regret) result.regret_csv = detail::regret_csv(result.runs, cfg);
  if (cfg.report.attempts || cfg.report.dropoffs) {
    result.metrics_csv = detail::metrics_csv(result.runs, cfg);
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline nlohmann::ordered_json manifest_json(const ExperimentConfig& cfg,
                                            const ExperimentResult& result) {
  nlohmann::ordered_json j;
  j["software"] = "tssgld";
  j["version"] = kVersion;
  j["config"] = config_to_json(cfg);
  j["config_text"] = config_to_text(cfg);
  j["wall_time_seconds"] = result.wall_seconds;
  nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
  if (cfg.report.regret) outputs.push_back("regret.csv");
  if (cfg.report.attempts || cfg.report.dropoffs) outputs.push_back("metrics.csv");
  j["outputs"] = outputs;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const RunOutcome& r : result.runs) {
    nlohmann::ordered_json e;
    e["policy"] = to_string(r.policy);
    e["seed"] = r.seed;
    if (r.failed) {
      e["status"] = "failed";
      e["error"] = r.error;
    } else if (r.trace.status == RunStatus::diverged) {
      e["status"] = "diverged";
      e["error"] = r.trace.error;
    } else {
      e["status"] = "ok";
      e["cumulative_regret"] = r.trace.cumulative_regret();
    }
    runs.push_back(std::move(e));
  }
  j["runs"] = runs;
  j["failures"] = result.failures();
  return j;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace detail

/// Full pipeline: runs, then writes regret.csv, metrics.csv and manifest.json
/// into cfg.output_dir. Returns 0 when every run succeeded and 2 otherwise,
/// listing the failed runs on `err`.
inline int run_experiment(const ExperimentConfig& cfg, std::ostream& err) {
  cfg.validate();
  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
  const ExperimentResult result = run_experiment_in_memory(cfg);
  if (cfg.report.regret) detail::write_file(dir / "regret.csv", result.regret_csv);
  if (cfg.report.attempts || cfg.report.dropoffs) {
    detail::write_file(dir / "metrics.csv", result.metrics_csv);
  }
  detail::write_file(dir / "manifest.json", manifest_json(cfg, result).dump(2) + "\n");

  if (result.failures() == 0) return 0;
  for (const RunOutcome& r : result.runs) {
    if (r.failed || r.trace.status != RunStatus::ok) {
      err << "run failed: policy=" << to_string(r.policy) << " seed=" << r.seed << ": "
          << (r.failed ? r.error : r.trace.error) << '\n';
    }
  }
  return 2;
}

// ---- eluder check ----

struct EluderCase {
  int clusters = 0;
  int users = 0;
  int dims = 0;
  std::size_t hypotheses = 0;
  bool sampled = false;
  EluderSearch search = EluderSearch::exhaustive;
  EluderResult result;
  long long bound = 0;
  bool verified = false;

  bool violation() const { return static_cast<long long>(result.length) > bound || !verified; }
};

/// Every (C, N, D) in [1, max_dim]^3 with indicator actions. Classes small
/// enough to enumerate are searched exhaustively; larger ones use a random
/// sample and are searched both exhaustively and by greedy DFS.
inline std::vector<EluderCase> eluder_suite(const EluderCheckConfig& cfg) {
  cfg.validate();
  std::vector<EluderCase> cases;
  std::uint64_t index = 0;
  for (int c = 1; c <= cfg.max_dim; ++c) {
    for (int n = 1; n <= cfg.max_dim; ++n) {
      for (int d = 1; d <= cfg.max_dim; ++d, ++index) {
        const long long total = hypothesis_count(c, n, d, cfg.grid.size());
        const bool sampled = total > cfg.enumerate_limit;
        std::vector<ClusterHypothesis> hyps;
        if (sampled) {
          Rng rng = make_rng(cfg.seed, index);
          hyps = sample_hypotheses(c, n, d, cfg.grid, cfg.sample_size, rng);
        } else {
          hyps = enumerate_hypotheses(c, n, d, cfg.grid, cfg.enumerate_limit);
        }
        const std::vector<ActionQuery> actions = indicator_actions(n, d);
        std::vector<EluderSearch> searches{EluderSearch::exhaustive};
        if (std::max({c, n, d}) >= 3) searches.push_back(EluderSearch::greedy_dfs);
        for (EluderSearch s : searches) {
          EluderCase ec;
          ec.clusters = c;
          ec.users = n;
          ec.dims = d;
          ec.hypotheses = hyps.size();
          ec.sampled = sampled;
          ec.search = s;
          ec.result = longest_eluder_sequence(hyps, actions, cfg.eps, s, cfg.budget);
          ec.bound = bound_finite(c, n, d) - cfg.bound_offset;
          ec.verified =
              verify_eluder_sequence(hyps, actions, ec.result.sequence, ec.result.eps_prime);
          cases.push_back(std::move(ec));
        }
      }
    }
  }
  return cases;
}

/// Exit code: 0 all lengths within bounds, 1 any violation, 3 when an
/// exhaustive search ran out of budget (and nothing violated).
inline int run_eluder_check(const EluderCheckConfig& cfg, std::ostream& report) {
  const std::vector<EluderCase> cases = eluder_suite(cfg);
  int violations = 0;
  int inconclusive = 0;
  for (const EluderCase& c : cases) {
    const bool bad = c.violation();
    const bool partial = c.search == EluderSearch::exhaustive && c.result.partial;
    violations += bad ? 1 : 0;
    inconclusive += (partial && !bad) ? 1 : 0;
    report << "C=" << c.clusters << " N=" << c.users << " D=" << c.dims
           << " hypotheses=" << c.hypotheses << (c.sampled ? " (sampled)" : " (full)")
           << " search=" << (c.search == EluderSearch::exhaustive ? "exhaustive" : "greedy_dfs")
           << " length=" << c.result.length << " bound=" << c.bound
           << " eps_prime=" << c.result.eps_prime << " nodes=" << c.result.nodes
           << (c.result.partial ? " partial" : "")
           << (bad ? " VIOLATION" : (partial ? " INCONCLUSIVE" : " ok")) << '\n';
  }
  report << "eluder-check: " << cases.size() << " searches, " << violations << " violations, "
         << inconclusive << " inconclusive\n";
  if (violations > 0) return 1;
  if (inconclusive > 0) return 3;
  return 0;
}

}  // namespace tssgld
