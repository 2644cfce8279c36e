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

// Program-level outcome metrics: call attempts under a retry cap, dropoffs
// under the listenership rule, pickup buckets, and the combined
// pickup + engagement objective.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tssgld/bandit.hpp"
#include "tssgld/common.hpp"
#include "tssgld/env.hpp"

namespace tssgld {

// ---- attempts ----

enum class RetryPolicy {
  same_slot,        // every retry uses the chosen slot
  policy_resample,  // retry k uses the policy's k-th ranked slot, wrapping
};

struct AttemptModel {
  int max_attempts = 9;
  RetryPolicy retry = RetryPolicy::same_slot;

  void validate() const {
    if (max_attempts < 1) throw ValidationError("attempts: max_attempts must be >= 1");
  }

  bool operator==(const AttemptModel&) const = default;
};

struct AttemptExpectation {
  double mean_attempts = 0.0;  // E[min(first success, cap)]
  double connect_prob = 0.0;   // P(success within cap)
  bool connected = false;      // false when no attempt can succeed
};

/// Attempts for a call whose k-th attempt succeeds with probability
/// per_attempt[(k-1) mod size]. E[attempts] = sum_{k<=cap} P(first k-1 fail).
inline AttemptExpectation expected_attempts_sequence(std::span<const double> per_attempt,
                                                     int max_attempts) {
  if (per_attempt.empty()) throw DimensionError("expected_attempts: empty slot sequence");
  AttemptExpectation out;
  double all_failed = 1.0;
  for (int k = 0; k < max_attempts; ++k) {
    const double p = per_attempt[static_cast<std::size_t>(k) % per_attempt.size()];
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("expected_attempts: p outside [0,1]");
    out.mean_attempts += all_failed;
    all_failed *= 1.0 - p;
  }
  out.connect_prob = 1.0 - all_failed;
  out.connected = out.connect_prob > 0.0;
  return out;
}

/// Same-slot retries: a geometric trial truncated at the cap, so
/// E[attempts] = (1 - (1-p)^cap) / p and P(connect) = 1 - (1-p)^cap.
inline AttemptExpectation expected_attempts(double p, const AttemptModel& model = {}) {
  model.validate();
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("expected_attempts: p outside [0,1]");
  AttemptExpectation out;
  if (p == 0.0) {
    out.mean_attempts = model.max_attempts;
    return out;
  }
  const double miss = std::pow(1.0 - p, model.max_attempts);
  out.connect_prob = 1.0 - miss;
  out.mean_attempts = out.connect_prob / p;
  out.connected = true;
  return out;
}

/// Slot indices by descending score, ties to the lower index.
template <typename Row>
std::vector<int> rank_slots(const Row& scores) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores(a) > scores(b); });
  return order;
}

struct CallPlan {
  int user = 0;
  std::vector<int> ranked_slots;  // front() is the slot the call goes out in
};

struct AttemptSummary {
  double mean_attempts = 0.0;            // over all calls, failures count the cap
  double mean_attempts_connected = 0.0;  // over connected calls only
  double connect_rate = 0.0;
  std::size_t calls = 0;
};

inline AttemptSummary simulate_attempts(std::span<const CallPlan> calls, const RewardMatrix& env,
                                        const AttemptModel& model, Rng& rng) {
  model.validate();
  AttemptSummary out;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  long long total = 0;
  long long connected_total = 0;
  std::size_t connected = 0;
  for (const CallPlan& call : calls) {
    if (call.ranked_slots.empty()) throw DimensionError("simulate_attempts: call without a slot");
    int used = 0;
    bool ok = false;
    for (int k = 0; k < model.max_attempts && !ok; ++k) {
      const std::size_t idx = model.retry == RetryPolicy::same_slot
                                  ? 0
                                  : static_cast<std::size_t>(k) % call.ranked_slots.size();
      ++used;
      ok = unif(rng) < env.values(call.user, call.ranked_slots[idx]);
    }
    total += used;
    if (ok) {
      ++connected;
      connected_total += used;
    }
  }
  out.calls = calls.size();
  if (out.calls > 0) {
    out.mean_attempts = static_cast<double>(total) / out.calls;
    out.connect_rate = static_cast<double>(connected) / out.calls;
  }
  if (connected > 0) out.mean_attempts_connected = static_cast<double>(connected_total) / connected;
  return out;
}

inline double relative_to_random_pct(double policy_attempts, double random_attempts) {
  if (!(random_attempts > 0.0)) return 100.0;
  return std::min(100.0, 100.0 * policy_attempts / random_attempts);
}

// ---- dropoffs ----

struct DropoffRule {
  double engagement_threshold = 0.25;
  int consecutive_weeks = 6;
  int window_weeks = 16;
  int window_low_weeks = 9;

  void validate() const {
    if (consecutive_weeks < 1 || window_weeks < 1 || window_low_weeks < 1) {
      throw ValidationError("dropoff: week counts must be positive");
    }
    if (window_low_weeks > window_weeks) {
      throw ValidationError("dropoff: window_low_weeks exceeds window_weeks");
    }
  }

  bool operator==(const DropoffRule&) const = default;
};

struct DropoffResult {
  std::vector<std::optional<int>> drop_week;  // 1-based week of removal
  double dropoff_rate = 0.0;
};

/// weekly(u, w) is user u's engagement in week w+1. NaN marks a week with no
/// call and never counts as low. A user is removed at the first week that
/// closes either a run of consecutive_weeks low weeks or a trailing
/// window_weeks window with at least window_low_weeks low weeks.
inline DropoffResult simulate_dropoffs(const Matrix& weekly, const DropoffRule& rule = {}) {
  rule.validate();
  if (weekly.cols() < 1) throw DimensionError("simulate_dropoffs: need at least one week");
  DropoffResult out;
  out.drop_week.resize(weekly.rows());
  std::size_t dropped = 0;
  for (Eigen::Index u = 0; u < weekly.rows(); ++u) {
    std::vector<int> low(weekly.cols());
    int run = 0;
    int in_window = 0;
    for (Eigen::Index w = 0; w < weekly.cols(); ++w) {
      low[w] = weekly(u, w) < rule.engagement_threshold ? 1 : 0;
      run = low[w] ? run + 1 : 0;
      in_window += low[w];
      if (w >= rule.window_weeks) in_window -= low[w - rule.window_weeks];
      if (run >= rule.consecutive_weeks || in_window >= rule.window_low_weeks) {
        out.drop_week[u] = static_cast<int>(w) + 1;
        ++dropped;
        break;
      }
    }
  }
  if (weekly.rows() > 0) out.dropoff_rate = static_cast<double>(dropped) / weekly.rows();
  return out;
}

/// One round is one week; a user's weekly engagement is the mean expected
/// engagement of the slots it was called in that week.
inline Matrix weekly_engagement(const RunTrace& trace, const Matrix& engagement, int weeks) {
  Matrix sum = Matrix::Zero(engagement.rows(), weeks);
  Matrix count = Matrix::Zero(engagement.rows(), weeks);
  for (const Selection& s : trace.selections) {
    if (s.round < 0 || s.round >= weeks) continue;
    sum(s.user, s.round) += engagement(s.user, s.arm);
    count(s.user, s.round) += 1.0;
  }
  Matrix out(engagement.rows(), weeks);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out.data()[i] = count.data()[i] > 0 ? sum.data()[i] / count.data()[i]
                                        : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

// ---- buckets ----

enum class Bucket { low, mid, high };

inline std::string_view to_string(Bucket b) {
  switch (b) {
    case Bucket::low: return "low";
    case Bucket::mid: return "mid";
    case Bucket::high: return "high";
  }
  return "unknown";
}

// Row max < 0.2 is low, > 0.8 is high; the boundaries themselves are mid.
inline Bucket bucket_of(double row_max) {
  if (row_max < 0.2) return Bucket::low;
  if (row_max > 0.8) return Bucket::high;
  return Bucket::mid;
}

inline std::vector<Bucket> bucket_users(const RewardMatrix& theta) {
  std::vector<Bucket> out(theta.n_users());
  for (int i = 0; i < theta.n_users(); ++i) out[i] = bucket_of(theta.values.row(i).maxCoeff());
  return out;
}

// ---- pickup + engagement ----

inline Matrix combine_pickup_engagement(const Matrix& pickup, const Matrix& engagement) {
  if (pickup.rows() != engagement.rows() || pickup.cols() != engagement.cols()) {
    throw DimensionError("combine_pickup_engagement: shape mismatch");
  }
  Matrix out(pickup.rows(), 2 * pickup.cols());
  out.leftCols(pickup.cols()) = pickup;
  out.rightCols(pickup.cols()) = engagement;
  return out;
}

/// engagement = pickup * listen_u, listen_u ~ Beta(a, b) per user.
inline Matrix synthesize_engagement(const Matrix& pickup, double beta_a, double beta_b,
                                    std::uint64_t seed) {
  if (!(beta_a > 0.0 && beta_b > 0.0)) throw DomainError("synthesize_engagement: bad Beta shape");
  Rng rng = make_rng(seed, 0x50);
  Matrix out = pickup;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out.row(i) *= detail::draw_beta(beta_a, beta_b, rng);
  }
  return out;
}

/// TS-SGLD on the concatenated [pickup | engagement] matrix. A call in slot
/// j yields two observations: picked up (column j) and engaged (column
/// M + j). Slots are chosen by the engagement half of the posterior sample
/// and regret is measured against the engagement matrix.
inline RunTrace run_ts_sgld_combined(const Matrix& pickup, const Matrix& engagement,
                                     const PriorSpec& prior, const SgldConfig& sgld_cfg,
                                     const PolicyConfig& pol, SamplingMethod method) {
  pol.validate();
  sgld_cfg.validate();
  if (pickup.rows() != engagement.rows() || pickup.cols() != engagement.cols()) {
    throw DimensionError("run_ts_sgld_combined: shape mismatch");
  }
  if ((engagement.array() > pickup.array() + 1e-12).any()) {
    throw DomainError("run_ts_sgld_combined: engagement exceeds pickup");
  }
  const int n = static_cast<int>(pickup.rows());
  const int m = static_cast<int>(pickup.cols());
  if (prior.lambda.rows() != n || prior.alpha.cols() != 2 * m) {
    throw DimensionError("run_ts_sgld_combined: prior must cover 2M columns");
  }
  const int rank = static_cast<int>(prior.lambda.cols());

  RunTrace trace;
  trace.policy = method == SamplingMethod::full ? "ts_sgld_full_combined"
                                                : "ts_sgld_alternating_combined";
  trace.seed = pol.seed;
  trace.log = ObservationLog(n, 2 * m);
  Rng reward_rng = make_rng(pol.seed, 1);
  Rng explore_rng = make_rng(pol.seed, 2);
  Rng sgld_rng = make_rng(sgld_cfg.seed, 3);
  ArrivalStream arrivals(n, pol.arrival, pol.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<double> best(n);
  for (int i = 0; i < n; ++i) best[i] = engagement.row(i).maxCoeff();
  double cum = 0.0;
  auto play = [&](int round, int user, int slot, double& round_regret) {
    const double pick_p = pickup(user, slot);
    const int picked = unif(reward_rng) < pick_p ? 1 : 0;
    int engaged = 0;
    if (picked && pick_p > 0.0) engaged = unif(reward_rng) < engagement(user, slot) / pick_p;
    const double regret = best[user] - engagement(user, slot);
    trace.selections.push_back({round, user, slot, engaged, regret});
    trace.log.append({round, user, slot, picked});
    trace.log.append({round, user, m + slot, engaged});
    round_regret += regret;
  };
  auto close_round = [&](int round, double round_regret) {
    cum += round_regret;
    trace.rounds.push_back({round, round_regret, cum, trace.log.size()});
  };

  LatentParams params = LatentParams::gaussian(n, rank, 2 * m, sgld_cfg.init_std, sgld_rng);
  std::uniform_int_distribution<int> any_user(0, n - 1);
  std::uniform_int_distribution<int> any_slot(0, m - 1);
  double rr = 0.0;
  for (int s = 0; s < pol.samples_per_step; ++s) {
    const int user = any_user(explore_rng);
    play(0, user, any_slot(explore_rng), rr);
  }
  close_round(0, rr);
  try {
    for (int r = 1; r < pol.rounds; ++r) {
      params = detail::sample_posterior(method, trace.log.records(), prior, sgld_cfg, params,
                                        sgld_rng);
      const Matrix p = materialize(params).P;
      rr = 0.0;
      for (int s = 0; s < pol.samples_per_step; ++s) {
        const int user = arrivals.next();
        play(r, user, argmax_lowest(p.row(user).tail(m)), rr);
      }
      close_round(r, rr);
    }
    trace.final_params = params;
    trace.final_scores = materialize(params).P.rightCols(m);
  } catch (const NumericalDivergence& e) {
    trace.status = RunStatus::diverged;
    trace.error = e.what();
  }
  return trace;
}

}  // namespace tssgld
