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

#include <gtest/gtest.h>

#include "tssgld/metrics.hpp"

namespace tssgld {
namespace {

// Sums over every outcome: first success at attempt k, or all cap attempts fail.
std::pair<double, double> enumerate_attempts(double p, int cap) {
  double mean = 0.0, connect = 0.0;
  for (int k = 1; k <= cap; ++k) {
    const double prob = std::pow(1.0 - p, k - 1) * p;
    mean += k * prob;
    connect += prob;
  }
  mean += cap * std::pow(1.0 - p, cap);
  return {mean, connect};
}

TEST(ExpectedAttempts, Examples) {
  const AttemptExpectation one = expected_attempts(1.0);
  EXPECT_DOUBLE_EQ(one.mean_attempts, 1.0);
  EXPECT_DOUBLE_EQ(one.connect_prob, 1.0);
  const AttemptExpectation cap1 = expected_attempts(0.3, AttemptModel{1});
  EXPECT_DOUBLE_EQ(cap1.mean_attempts, 1.0);
  EXPECT_DOUBLE_EQ(cap1.connect_prob, 0.3);
  const AttemptExpectation none = expected_attempts(0.0);
  EXPECT_DOUBLE_EQ(none.mean_attempts, 9.0);
  EXPECT_FALSE(none.connected);
  EXPECT_THROW(expected_attempts(1.2), DomainError);
  EXPECT_THROW(expected_attempts(-0.1), DomainError);
  EXPECT_THROW(expected_attempts(0.5, AttemptModel{0}), ValidationError);
}

TEST(ExpectedAttempts, MatchesEnumeration) {
  for (int cap : {1, 2, 5, 9}) {
    for (double p : {0.01, 0.1, 0.25, 0.5, 0.75, 0.99}) {
      const auto [mean, connect] = enumerate_attempts(p, cap);
      const AttemptExpectation e = expected_attempts(p, AttemptModel{cap});
      EXPECT_NEAR(e.mean_attempts, mean, 1e-12) << p << " " << cap;
      EXPECT_NEAR(e.connect_prob, connect, 1e-12);
      const double seq[] = {p};
      EXPECT_NEAR(expected_attempts_sequence(seq, cap).mean_attempts, mean, 1e-12);
    }
  }
}

TEST(ExpectedAttempts, SequenceWrapsAndValidates) {
  const double seq[] = {0.0, 1.0};
  const AttemptExpectation e = expected_attempts_sequence(seq, 9);
  EXPECT_DOUBLE_EQ(e.mean_attempts, 2.0);
  EXPECT_DOUBLE_EQ(e.connect_prob, 1.0);
  EXPECT_THROW(expected_attempts_sequence({}, 9), DimensionError);
  const double bad[] = {1.5};
  EXPECT_THROW(expected_attempts_sequence(bad, 9), DomainError);
}

TEST(RankSlots, DescendingWithLowIndexTies) {
  Vector s(4);
  s << 0.3, 0.9, 0.3, 0.1;
  EXPECT_EQ(rank_slots(s), (std::vector<int>{1, 0, 2, 3}));
}

TEST(SimulateAttempts, AllOnesNeedsOneAttempt) {
  const RewardMatrix env{Matrix::Ones(3, 4), 1};
  std::vector<CallPlan> calls;
  for (int k = 0; k < 30; ++k) calls.push_back({k % 3, {k % 4}});
  Rng rng = make_rng(1);
  const AttemptSummary s = simulate_attempts(calls, env, {}, rng);
  EXPECT_DOUBLE_EQ(s.mean_attempts, 1.0);
  EXPECT_DOUBLE_EQ(s.connect_rate, 1.0);
  EXPECT_EQ(s.calls, 30u);
}

TEST(SimulateAttempts, ConvergesToExpectation) {
  const RewardMatrix env{Matrix::Constant(1, 1, 0.5), 1};
  const std::vector<CallPlan> calls(100000, CallPlan{0, {0}});
  Rng rng = make_rng(2);
  const AttemptSummary s = simulate_attempts(calls, env, {}, rng);
  const AttemptExpectation e = expected_attempts(0.5);
  EXPECT_NEAR(s.mean_attempts, e.mean_attempts, 0.01 * e.mean_attempts);
  EXPECT_NEAR(s.connect_rate, e.connect_prob, 0.01);
}

TEST(SimulateAttempts, ResampleWalksRankedSlots) {
  RewardMatrix env{Matrix(1, 3), 1};
  env.values << 0.0, 0.2, 0.7;
  const std::vector<CallPlan> calls(100000, CallPlan{0, {0, 2, 1}});
  Rng rng = make_rng(3);
  const AttemptModel model{9, RetryPolicy::policy_resample};
  const AttemptSummary s = simulate_attempts(calls, env, model, rng);
  const double seq[] = {0.0, 0.7, 0.2};
  const AttemptExpectation e = expected_attempts_sequence(seq, 9);
  EXPECT_NEAR(s.mean_attempts, e.mean_attempts, 0.01 * e.mean_attempts);
  EXPECT_THROW(simulate_attempts(std::vector<CallPlan>{{0, {}}}, env, model, rng), DimensionError);
}

TEST(RelativeToRandom, CappedAtHundred) {
  EXPECT_DOUBLE_EQ(relative_to_random_pct(2.0, 4.0), 50.0);
  EXPECT_DOUBLE_EQ(relative_to_random_pct(5.0, 4.0), 100.0);
  EXPECT_DOUBLE_EQ(relative_to_random_pct(1.0, 0.0), 100.0);
}

// Direct evaluation of the removal rule at each week, recounting the window.
std::optional<int> dropoff_oracle(const std::vector<double>& weeks, const DropoffRule& r) {
  const auto low = [&](int w) { return weeks[w] < r.engagement_threshold; };
  for (int w = 0; w < static_cast<int>(weeks.size()); ++w) {
    bool a = w + 1 >= r.consecutive_weeks;
    for (int k = w - r.consecutive_weeks + 1; a && k <= w; ++k) a = low(k);
    int lows = 0;
    for (int k = std::max(0, w - r.window_weeks + 1); k <= w; ++k) lows += low(k);
    if (a || lows >= r.window_low_weeks) return w + 1;
  }
  return std::nullopt;
}

TEST(Dropoffs, Examples) {
  const DropoffResult zero = simulate_dropoffs(Matrix::Zero(4, 20));
  for (const auto& w : zero.drop_week) EXPECT_EQ(w, 6);
  EXPECT_DOUBLE_EQ(zero.dropoff_rate, 1.0);

  Matrix alt(1, 30);
  for (int w = 0; w < 30; ++w) alt(0, w) = w % 2 ? 0.9 : 0.1;
  EXPECT_FALSE(simulate_dropoffs(alt).drop_week[0]);

  EXPECT_DOUBLE_EQ(simulate_dropoffs(Matrix::Ones(5, 30)).dropoff_rate, 0.0);
  EXPECT_THROW(simulate_dropoffs(Matrix::Zero(2, 0)), DimensionError);
}

TEST(Dropoffs, WindowRuleFiresWithoutLongRuns) {
  // Five lows, one high, repeated: the ninth low lands in week 10.
  Matrix m(1, 16);
  for (int w = 0; w < 16; ++w) m(0, w) = (w % 6 == 5) ? 0.9 : 0.0;
  EXPECT_EQ(simulate_dropoffs(m).drop_week[0], 10);
}

TEST(Dropoffs, NanWeeksAreNotLow) {
  Matrix m = Matrix::Zero(1, 12);
  m(0, 3) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(simulate_dropoffs(m).drop_week[0], 10);
}

TEST(Dropoffs, MatchesRuleOracle) {
  Rng rng = make_rng(4);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  const DropoffRule rule;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> weeks(30);
    for (double& w : weeks) w = u(rng);
    const Matrix m = Eigen::Map<const Matrix>(weeks.data(), 1, 30);
    EXPECT_EQ(simulate_dropoffs(m, rule).drop_week[0], dropoff_oracle(weeks, rule));
  }
}

TEST(Dropoffs, LowerThresholdNeverRaisesRate) {
  Rng rng = make_rng(5);
  std::uniform_real_distribution<double> u(0.0, 0.6);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix m(40, 20);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    double prev = 2.0;
    for (double t : {0.5, 0.4, 0.3, 0.25, 0.2, 0.1, 0.0}) {
      DropoffRule r;
      r.engagement_threshold = t;
      const double rate = simulate_dropoffs(m, r).dropoff_rate;
      EXPECT_LE(rate, prev);
      prev = rate;
    }
  }
}

TEST(Dropoffs, RuleValidation) {
  DropoffRule r;
  r.window_low_weeks = 17;
  EXPECT_THROW(simulate_dropoffs(Matrix::Zero(1, 3), r), ValidationError);
}

TEST(WeeklyEngagement, AveragesCallsPerRound) {
  RunTrace t;
  t.selections = {{0, 0, 1, 1, 0.0}, {0, 0, 2, 0, 0.0}, {1, 1, 0, 1, 0.0}};
  Matrix eng(2, 3);
  eng << 0.1, 0.2, 0.4, 0.5, 0.6, 0.7;
  const Matrix w = weekly_engagement(t, eng, 2);
  EXPECT_DOUBLE_EQ(w(0, 0), 0.3);
  EXPECT_TRUE(std::isnan(w(0, 1)));
  EXPECT_TRUE(std::isnan(w(1, 0)));
  EXPECT_DOUBLE_EQ(w(1, 1), 0.5);
}

TEST(Buckets, Boundaries) {
  EXPECT_EQ(bucket_of(0.15), Bucket::low);
  EXPECT_EQ(bucket_of(0.85), Bucket::high);
  EXPECT_EQ(bucket_of(0.2), Bucket::mid);
  EXPECT_EQ(bucket_of(0.8), Bucket::mid);
  EXPECT_EQ(to_string(Bucket::mid), "mid");
}

TEST(Buckets, PartitionUsers) {
  EnvSpec es;
  es.n_users = 300;
  es.n_arms = 7;
  es.kind = EnvKind::spectrum_matched;
  es.seed = 6;
  const RewardMatrix env = generate(es);
  const std::vector<Bucket> b = bucket_users(env);
  ASSERT_EQ(b.size(), 300u);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 300; ++i) {
    ++counts[static_cast<int>(b[i])];
    EXPECT_EQ(b[i], bucket_of(env.values.row(i).maxCoeff()));
  }
  EXPECT_EQ(counts[0] + counts[1] + counts[2], 300);
}

TEST(Combine, ShapesAndHalves) {
  Rng rng = make_rng(7);
  const Matrix pickup = uniform_matrix(10, 7, rng);
  const Matrix same = combine_pickup_engagement(pickup, pickup);
  EXPECT_EQ(same.rows(), 10);
  EXPECT_EQ(same.cols(), 14);
  EXPECT_EQ(same.leftCols(7), same.rightCols(7));
  EXPECT_THROW(combine_pickup_engagement(pickup, Matrix::Zero(10, 6)), DimensionError);

  const Matrix listen = 0.6 * pickup;
  const Matrix both = combine_pickup_engagement(pickup, listen);
  for (int j = 0; j < 7; ++j) {
    EXPECT_NEAR(both.col(7 + j).maxCoeff(), 0.6 * both.col(j).maxCoeff(), 1e-15);
  }
}

TEST(SynthesizeEngagement, BoundedByPickupAndSeeded) {
  Rng rng = make_rng(8);
  const Matrix pickup = uniform_matrix(50, 7, rng);
  const Matrix a = synthesize_engagement(pickup, 2.0, 1.0, 3);
  EXPECT_EQ(a, synthesize_engagement(pickup, 2.0, 1.0, 3));
  EXPECT_TRUE((a.array() <= pickup.array()).all());
  EXPECT_TRUE((a.array() >= 0.0).all());
  for (int i = 0; i < 50; ++i) {
    const double ratio = a(i, 0) / pickup(i, 0);
    for (int j = 1; j < 7; ++j) EXPECT_NEAR(a(i, j), ratio * pickup(i, j), 1e-12);
  }
  EXPECT_THROW(synthesize_engagement(pickup, 0.0, 1.0, 3), DomainError);
}

TEST(CombinedTs, LogsBothHalvesAndScoresEngagement) {
  Rng rng = make_rng(9);
  const Matrix pickup = uniform_matrix(20, 4, rng);
  const Matrix eng = synthesize_engagement(pickup, 2.0, 1.0, 1);
  SgldConfig sgld;
  sgld.step_size = 0.001;
  sgld.iters_per_round = 30;
  sgld.reference_count = 400;
  PolicyConfig pol;
  pol.rounds = 4;
  pol.samples_per_step = 100;
  const RunTrace t = run_ts_sgld_combined(pickup, eng, PriorSpec::constant(20, 2, 8, 0.5, 0.5),
                                          sgld, pol, SamplingMethod::full);
  ASSERT_EQ(t.status, RunStatus::ok);
  EXPECT_EQ(t.log.size(), 800u);
  EXPECT_EQ(t.log.n_arms(), 8);
  for (const Selection& s : t.selections) {
    EXPECT_LT(s.arm, 4);
    EXPECT_NEAR(s.regret, eng.row(s.user).maxCoeff() - eng(s.user, s.arm), 1e-15);
  }
  for (std::size_t k = 0; k < t.log.size(); k += 2) {
    EXPECT_EQ(t.log[k + 1].arm, t.log[k].arm + 4);
    EXPECT_LE(t.log[k + 1].reward, t.log[k].reward);
  }
  ASSERT_TRUE(t.final_scores);
  EXPECT_EQ(t.final_scores->cols(), 4);
  EXPECT_THROW(run_ts_sgld_combined(pickup, eng, PriorSpec::constant(20, 2, 4, 0.5, 0.5), sgld, pol,
                                    SamplingMethod::full),
               DimensionError);
  EXPECT_THROW(run_ts_sgld_combined(eng, pickup, PriorSpec::constant(20, 2, 8, 0.5, 0.5), sgld,
                                    pol, SamplingMethod::full),
               DomainError);
}

}  // namespace
}  // namespace tssgld
