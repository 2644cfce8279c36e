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

// Thompson sampling over SGLD posterior samples, and the baseline policies
// it is compared with.

#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "tssgld/common.hpp"
#include "tssgld/env.hpp"
#include "tssgld/observations.hpp"
#include "tssgld/sgld.hpp"

namespace tssgld {

enum class PolicyKind { ts_sgld_full, ts_sgld_alternating, ucb, random, oracle };
enum class SamplingMethod { full, alternating };

inline std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::ts_sgld_full: return "ts_sgld_full";
    case PolicyKind::ts_sgld_alternating: return "ts_sgld_alternating";
    case PolicyKind::ucb: return "ucb";
    case PolicyKind::random: return "random";
    case PolicyKind::oracle: return "oracle";
  }
  return "unknown";
}

inline std::optional<PolicyKind> parse_policy(std::string_view s) {
  if (s == "ts_sgld_full") return PolicyKind::ts_sgld_full;
  if (s == "ts_sgld_alternating") return PolicyKind::ts_sgld_alternating;
  if (s == "ucb") return PolicyKind::ucb;
  if (s == "random") return PolicyKind::random;
  if (s == "oracle") return PolicyKind::oracle;
  return std::nullopt;
}

struct PolicyConfig {
  PolicyKind policy = PolicyKind::ts_sgld_full;
  int samples_per_step = 1000;
  int rounds = 35;
  double ucb_exploration = std::sqrt(2.0);
  std::uint64_t seed = 0;
  ArrivalMode arrival = ArrivalMode::round_robin;

  void validate() const {
    if (samples_per_step < 1) throw ValidationError("policy: samples_per_step must be >= 1");
    if (rounds < 1) throw ValidationError("policy: rounds must be >= 1");
    if (!(ucb_exploration > 0.0)) throw ValidationError("policy: ucb_exploration must be > 0");
  }

  bool operator==(const PolicyConfig&) const = default;
};

struct Selection {
  int round = 0;
  int user = 0;
  int arm = 0;
  int reward = 0;
  double regret = 0.0;  // expected: best(user) - theta(user, arm)
};

struct RoundRecord {
  int round = 0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
  std::size_t n_obs = 0;
};

enum class RunStatus { ok, diverged };

struct RunTrace {
  std::string policy;
  std::uint64_t seed = 0;
  std::vector<RoundRecord> rounds;
  std::vector<Selection> selections;
  ObservationLog log;
  // Scores the policy would rank arms by after the run (learned P for TS,
  // index values for UCB, the true matrix for the oracle). Empty for random.
  std::optional<Matrix> final_scores;
  std::optional<LatentParams> final_params;
  RunStatus status = RunStatus::ok;
  std::string error;

  double cumulative_regret() const { return rounds.empty() ? 0.0 : rounds.back().cum_regret; }
};

/// Lowest index attaining the maximum.
template <typename Row>
int argmax_lowest(const Row& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = static_cast<int>(j);
  }
  return best;
}

inline int select_arm_ts(const Matrix& p, int user) {
  if (user < 0 || user >= p.rows()) throw DimensionError("select_arm_ts: user out of range");
  return argmax_lowest(p.row(user));
}

namespace detail {

// Accumulates selections into per-round regret records.
class TraceRecorder {
 public:
  TraceRecorder(RunTrace& trace, const RewardMatrix& env) : trace_(trace), env_(env) {
    best_.resize(env.n_users());
    for (int i = 0; i < env.n_users(); ++i) best_[i] = env.values.row(i).maxCoeff();
  }

  int play(int round, int user, int arm, Rng& reward_rng, bool log_it = true) {
    const double theta = env_.values(user, arm);
    const int reward = sample_reward(theta, reward_rng);
    const double regret = best_[user] - theta;
    trace_.selections.push_back({round, user, arm, reward, regret});
    if (log_it) trace_.log.append({round, user, arm, reward});
    round_regret_ += regret;
    return reward;
  }

  void end_round(int round) {
    cum_ += round_regret_;
    trace_.rounds.push_back({round, round_regret_, cum_, trace_.log.size()});
    round_regret_ = 0.0;
  }

 private:
  RunTrace& trace_;
  const RewardMatrix& env_;
  std::vector<double> best_;
  double round_regret_ = 0.0;
  double cum_ = 0.0;
};

inline RunTrace make_trace(const RewardMatrix& env, PolicyKind kind, std::uint64_t seed) {
  RunTrace t;
  t.policy = std::string(to_string(kind));
  t.seed = seed;
  t.log = ObservationLog(env.n_users(), env.n_arms());
  return t;
}

inline LatentParams sample_posterior(SamplingMethod method, std::span<const Observation> data,
                                     const PriorSpec& prior, const SgldConfig& cfg,
                                     const LatentParams& init, Rng& rng) {
  return method == SamplingMethod::full ? run_full_sampling(data, prior, cfg, init, rng)
                                        : run_alternating_sampling(data, prior, cfg, init, rng);
}

}  // namespace detail

/// TS-SGLD. Round 0 plays samples_per_step uniformly random (user, arm)
/// pairs. Every later round continues the SGLD chain on all data gathered so
/// far, materializes one posterior sample P, and serves samples_per_step
/// arrivals with argmax_j P(user, j).
inline RunTrace run_ts_sgld(const RewardMatrix& env, const PriorSpec& prior,
                            const SgldConfig& sgld_cfg, const PolicyConfig& pol,
                            SamplingMethod method) {
  pol.validate();
  sgld_cfg.validate();
  prior.validate();
  const int n = env.n_users();
  const int m = env.n_arms();
  if (prior.lambda.rows() != n || prior.alpha.cols() != m) {
    throw DimensionError("run_ts_sgld: prior shape does not match environment");
  }
  const int rank = static_cast<int>(prior.lambda.cols());
  const PolicyKind kind =
      method == SamplingMethod::full ? PolicyKind::ts_sgld_full : PolicyKind::ts_sgld_alternating;

  RunTrace trace = detail::make_trace(env, kind, pol.seed);
  detail::TraceRecorder rec(trace, env);
  Rng reward_rng = make_rng(pol.seed, 1);
  Rng explore_rng = make_rng(pol.seed, 2);
  Rng sgld_rng = make_rng(sgld_cfg.seed, 3);
  ArrivalStream arrivals(n, pol.arrival, pol.seed);

  LatentParams params = LatentParams::gaussian(n, rank, m, sgld_cfg.init_std, sgld_rng);

  std::uniform_int_distribution<int> any_user(0, n - 1);
  std::uniform_int_distribution<int> any_arm(0, m - 1);
  for (int s = 0; s < pol.samples_per_step; ++s) {
    const int user = any_user(explore_rng);
    rec.play(0, user, any_arm(explore_rng), reward_rng);
  }
  rec.end_round(0);

  try {
    for (int r = 1; r < pol.rounds; ++r) {
      params = detail::sample_posterior(method, trace.log.records(), prior, sgld_cfg, params,
                                        sgld_rng);
      const Matrix p = materialize(params).P;
      for (int s = 0; s < pol.samples_per_step; ++s) {
        const int user = arrivals.next();
        rec.play(r, user, select_arm_ts(p, user), reward_rng);
      }
      rec.end_round(r);
    }
    params = detail::sample_posterior(method, trace.log.records(), prior, sgld_cfg, params,
                                      sgld_rng);
    trace.final_scores = materialize(params).P;
    trace.final_params = params;
  } catch (const NumericalDivergence& e) {
    trace.status = RunStatus::diverged;
    trace.error = e.what();
  }
  return trace;
}

/// Per-user UCB1 over independent arm means. Untried arms are played first,
/// lowest index first.
class UcbState {
 public:
  UcbState(int n_users, int n_arms, double exploration)
      : counts_(n_users * static_cast<std::size_t>(n_arms), 0),
        sums_(n_users * static_cast<std::size_t>(n_arms), 0.0),
        plays_(n_users, 0),
        n_arms_(n_arms),
        c_(exploration) {}

  double index(int user, int arm) const {
    const std::size_t k = slot(user, arm);
    if (counts_[k] == 0) return std::numeric_limits<double>::infinity();
    const double mean = sums_[k] / counts_[k];
    return mean + c_ * std::sqrt(std::log(static_cast<double>(plays_[user])) / counts_[k]);
  }

  int choose(int user) const {
    int best = 0;
    double best_val = index(user, 0);
    for (int j = 1; j < n_arms_; ++j) {
      const double val = index(user, j);
      if (val > best_val) {
        best = j;
        best_val = val;
      }
    }
    return best;
  }

  void update(int user, int arm, int reward) {
    const std::size_t k = slot(user, arm);
    ++counts_[k];
    sums_[k] += reward;
    ++plays_[user];
  }

  Matrix scores(int n_users) const {
    Matrix s(n_users, n_arms_);
    for (int i = 0; i < n_users; ++i) {
      for (int j = 0; j < n_arms_; ++j) {
        const double v = index(i, j);
        s(i, j) = std::isfinite(v) ? v : 1e9;
      }
    }
    return s;
  }

 private:
  std::size_t slot(int user, int arm) const {
    return static_cast<std::size_t>(user) * n_arms_ + arm;
  }

  std::vector<int> counts_;
  std::vector<double> sums_;
  std::vector<long long> plays_;
  int n_arms_;
  double c_;
};

inline RunTrace run_ucb(const RewardMatrix& env, const PolicyConfig& pol) {
  pol.validate();
  RunTrace trace = detail::make_trace(env, PolicyKind::ucb, pol.seed);
  detail::TraceRecorder rec(trace, env);
  Rng reward_rng = make_rng(pol.seed, 1);
  ArrivalStream arrivals(env.n_users(), pol.arrival, pol.seed);
  UcbState ucb(env.n_users(), env.n_arms(), pol.ucb_exploration);
  for (int r = 0; r < pol.rounds; ++r) {
    for (int s = 0; s < pol.samples_per_step; ++s) {
      const int user = arrivals.next();
      const int arm = ucb.choose(user);
      ucb.update(user, arm, rec.play(r, user, arm, reward_rng));
    }
    rec.end_round(r);
  }
  trace.final_scores = ucb.scores(env.n_users());
  return trace;
}

inline RunTrace run_random(const RewardMatrix& env, const PolicyConfig& pol) {
  pol.validate();
  RunTrace trace = detail::make_trace(env, PolicyKind::random, pol.seed);
  detail::TraceRecorder rec(trace, env);
  Rng reward_rng = make_rng(pol.seed, 1);
  Rng arm_rng = make_rng(pol.seed, 2);
  ArrivalStream arrivals(env.n_users(), pol.arrival, pol.seed);
  std::uniform_int_distribution<int> any_arm(0, env.n_arms() - 1);
  for (int r = 0; r < pol.rounds; ++r) {
    for (int s = 0; s < pol.samples_per_step; ++s) {
      const int user = arrivals.next();
      rec.play(r, user, any_arm(arm_rng), reward_rng);
    }
    rec.end_round(r);
  }
  return trace;
}

inline RunTrace run_oracle(const RewardMatrix& env, const PolicyConfig& pol) {
  pol.validate();
  RunTrace trace = detail::make_trace(env, PolicyKind::oracle, pol.seed);
  detail::TraceRecorder rec(trace, env);
  Rng reward_rng = make_rng(pol.seed, 1);
  ArrivalStream arrivals(env.n_users(), pol.arrival, pol.seed);
  for (int r = 0; r < pol.rounds; ++r) {
    for (int s = 0; s < pol.samples_per_step; ++s) {
      const int user = arrivals.next();
      rec.play(r, user, argmax_lowest(env.values.row(user)), reward_rng);
    }
    rec.end_round(r);
  }
  trace.final_scores = env.values;
  return trace;
}

/// Dispatch on pol.policy.
inline RunTrace run_policy(const RewardMatrix& env, const PriorSpec& prior,
                           const SgldConfig& sgld_cfg, const PolicyConfig& pol) {
  switch (pol.policy) {
    case PolicyKind::ts_sgld_full:
      return run_ts_sgld(env, prior, sgld_cfg, pol, SamplingMethod::full);
    case PolicyKind::ts_sgld_alternating:
      return run_ts_sgld(env, prior, sgld_cfg, pol, SamplingMethod::alternating);
    case PolicyKind::ucb: return run_ucb(env, pol);
    case PolicyKind::random: return run_random(env, pol);
    case PolicyKind::oracle: return run_oracle(env, pol);
  }
  throw ValidationError("run_policy: unknown policy");
}

// ---- new-user enrollment ----

enum class EnrollMode {
  warm,  // learn only the new users' u rows against the existing V
  cold,  // fit a fresh model on the new users' data alone
};

struct TrainedModel {
  LatentParams params;
  int n_users = 0;
  int rounds_trained = 0;

  static TrainedModel from_trace(const RunTrace& trace, int rounds) {
    if (!trace.final_params) throw ValidationError("TrainedModel: trace carries no parameters");
    return TrainedModel{*trace.final_params, trace.final_params->n_users(), rounds};
  }
};

/// Serves k_new newly enrolled users (rows n..n+k_new-1 of env_extended) for
/// pol.rounds rounds and returns the trace restricted to them.
///
/// prior covers all n + k_new users. In warm mode the first round already
/// plays argmax of the existing V mixed by the fresh u rows; there is no
/// random exploration round. In cold mode the new users run plain TS-SGLD
/// on their own rows of env_extended.
inline RunTrace enroll_new_users(const TrainedModel& state, int k_new, EnrollMode mode,
                                 const RewardMatrix& env_extended, const PriorSpec& prior,
                                 const SgldConfig& sgld_cfg, const PolicyConfig& pol) {
  pol.validate();
  sgld_cfg.validate();
  if (state.rounds_trained < 1) throw ValidationError("enroll_new_users: model is untrained");
  if (k_new < 0) throw DimensionError("enroll_new_users: negative k_new");
  const int n = state.n_users;
  const int m = state.params.n_arms();
  const int rank = state.params.rank();
  if (env_extended.n_users() != n + k_new || env_extended.n_arms() != m) {
    throw DimensionError("enroll_new_users: extended environment has the wrong shape");
  }
  if (prior.lambda.rows() != n + k_new || prior.lambda.cols() != rank ||
      prior.alpha.rows() != rank || prior.alpha.cols() != m) {
    throw DimensionError("enroll_new_users: prior does not cover the extended user set");
  }
  const std::string label = mode == EnrollMode::warm ? "ts_sgld_warm" : "ts_sgld_cold";
  if (k_new == 0) {
    RunTrace empty;
    empty.policy = label;
    empty.seed = pol.seed;
    return empty;
  }

  if (mode == EnrollMode::cold) {
    RewardMatrix sub{env_extended.values.bottomRows(k_new), env_extended.rank_hint};
    PriorSpec sub_prior{prior.lambda.bottomRows(k_new), prior.alpha, prior.sign,
                        prior.parameter_floor};
    RunTrace t = run_ts_sgld(sub, sub_prior, sgld_cfg, pol, SamplingMethod::full);
    t.policy = label;
    for (Selection& s : t.selections) s.user += n;
    return t;
  }

  RunTrace trace;
  trace.policy = label;
  trace.seed = pol.seed;
  trace.log = ObservationLog(n + k_new, m);
  detail::TraceRecorder rec(trace, env_extended);
  Rng reward_rng = make_rng(pol.seed, 1);
  Rng sgld_rng = make_rng(sgld_cfg.seed, 5);
  ArrivalStream arrivals(k_new, pol.arrival, pol.seed);

  LatentParams params = state.params;
  {
    const LatentParams fresh = LatentParams::gaussian(k_new, rank, m, sgld_cfg.init_std, sgld_rng);
    Matrix u(n + k_new, rank);
    u.topRows(n) = state.params.u;
    u.bottomRows(k_new) = fresh.u;
    params.u = std::move(u);
  }
  try {
    for (int r = 0; r < pol.rounds; ++r) {
      if (r > 0) {
        params = run_user_rows_sampling(trace.log.records(), prior, sgld_cfg, params, n,
                                        n + k_new, sgld_rng);
      }
      const Matrix p = materialize(params).P;
      for (int s = 0; s < pol.samples_per_step; ++s) {
        const int user = n + arrivals.next();
        rec.play(r, user, select_arm_ts(p, user), reward_rng);
      }
      rec.end_round(r);
    }
    trace.final_params = params;
    trace.final_scores = materialize(params).P.bottomRows(k_new);
  } catch (const NumericalDivergence& e) {
    trace.status = RunStatus::diverged;
    trace.error = e.what();
  }
  return trace;
}

// ---- CSV ----

inline void write_regret_header(std::ostream& os) {
  os << "policy,seed,round,inst_regret,cum_regret,n_obs\n";
}

inline void write_regret_rows(std::ostream& os, const RunTrace& trace) {
  os << std::fixed << std::setprecision(6);
  for (const RoundRecord& r : trace.rounds) {
    os << trace.policy << ',' << trace.seed << ',' << r.round << ',' << r.inst_regret << ','
       << r.cum_regret << ',' << r.n_obs << '\n';
  }
  if (trace.status == RunStatus::diverged) {
    os << trace.policy << ',' << trace.seed << ",diverged,,,\n";
  }
}

}  // namespace tssgld
