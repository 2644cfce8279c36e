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

#include <sstream>

#include "tssgld/env.hpp"
#include "tssgld/sgld.hpp"

namespace tssgld {
namespace {

LatentParams random_params(int n, int c, int m, double scale, Rng& rng) {
  return LatentParams::gaussian(n, c, m, scale, rng);
}

std::vector<Observation> random_data(int n, int m, int count, Rng& rng) {
  std::uniform_int_distribution<int> pu(0, n - 1), pa(0, m - 1), px(0, 1);
  std::vector<Observation> out;
  for (int k = 0; k < count; ++k) out.push_back({0, pu(rng), pa(rng), px(rng)});
  return out;
}

// Direct log Q from the definition, sharing no code with the library.
double log_q_oracle(int x, const Vector& u_row, const Vector& v_col) {
  double z = 0.0;
  for (Eigen::Index c = 0; c < u_row.size(); ++c) z += std::exp(u_row(c));
  double q = 0.0;
  for (Eigen::Index c = 0; c < u_row.size(); ++c) {
    const double s = 1.0 / (1.0 + std::exp(-v_col(c)));
    q += std::exp(u_row(c)) / z * (x ? s : 1.0 - s);
  }
  return std::log(q);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

TEST(Membership, Examples) {
  const Vector uniform = user_membership(Vector::Zero(4));
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(uniform(c), 0.25, 1e-15);
  Vector r(2);
  r << std::log(3.0), 0.0;
  const Vector p = user_membership(r);
  EXPECT_NEAR(p(0), 0.75, 1e-15);
  EXPECT_NEAR(p(1), 0.25, 1e-15);
  r << 1000.0, 0.0;
  const Vector big = user_membership(r);
  EXPECT_TRUE(big.allFinite());
  EXPECT_NEAR(big(0), 1.0, 1e-12);
  EXPECT_NEAR(big(1), 0.0, 1e-12);
}

TEST(Membership, SumsToOne) {
  Rng rng = make_rng(1);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int k = 0; k < 100; ++k) {
    Vector u(5);
    for (int c = 0; c < 5; ++c) u(c) = g(rng);
    const Vector p = user_membership(u);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_GT(p.minCoeff(), 0.0);
  }
}

TEST(ClusterSuccessProb, Examples) {
  EXPECT_DOUBLE_EQ(cluster_success_prob(0.0), 0.5);
  EXPECT_NEAR(cluster_success_prob(50.0), 1.0, 1e-9);
  const double v = std::log(0.3 / 0.7);
  EXPECT_NEAR(cluster_success_prob(v), 0.3, 1e-15);
  Vector u = Vector::Zero(1), vc(1);
  vc << v;
  EXPECT_NEAR(mixture_likelihood(0, u, vc), 0.7, 1e-15);
}

TEST(MixtureLikelihood, Examples) {
  const Vector u = Vector::Zero(2);
  Vector v(2);
  v << std::log(0.3 / 0.7), std::log(0.7 / 0.3);
  EXPECT_NEAR(mixture_likelihood(1, u, v), 0.5, 1e-15);
  EXPECT_NEAR(mixture_likelihood(0, u, v), 0.5, 1e-15);
  Vector one(1), v1(1);
  one << 0.3;
  v1 << std::log(0.42 / 0.58);
  EXPECT_NEAR(mixture_likelihood(1, one, v1), 0.42, 1e-15);
}

TEST(GradLogPrior, SignsAndShapes) {
  Rng rng = make_rng(2);
  const LatentParams p = random_params(3, 2, 4, 1.0, rng);
  const GradPair ones = grad_log_prior(p, PriorSpec::constant(3, 2, 4, 1.0, 0.0));
  EXPECT_EQ(ones.du, Matrix::Ones(3, 2));
  EXPECT_EQ(ones.dv, Matrix::Zero(2, 4));
  PriorSpec s = PriorSpec::constant(3, 2, 4, 1.0, 1.0, PriorSign::standard_exponential);
  s.lambda(1, 0) = 2.5;
  EXPECT_DOUBLE_EQ(grad_log_prior(p, s).du(1, 0), -2.5);
  EXPECT_THROW(grad_log_prior(p, PriorSpec::constant(4, 2, 4, 1.0, 1.0)), DimensionError);
  EXPECT_THROW(PriorSpec::constant(3, 2, 4, -1.0, 1.0), DomainError);
}

TEST(PointGradient, SingleClusterAnalytic) {
  LatentParams p{Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  const PointGrad g = grad_log_likelihood_point(1, 0, 0, p);
  EXPECT_NEAR(g.dv_col(0), 0.5, 1e-15);
  EXPECT_NEAR(g.dv_col(0), 1.0 - logistic(0.0), 1e-15);
  Rng rng = make_rng(3);
  for (int k = 0; k < 20; ++k) {
    const LatentParams q = random_params(2, 1, 3, 2.0, rng);
    EXPECT_EQ(grad_log_likelihood_point(k % 2, 1, k % 3, q).du_row(0), 0.0);
  }
}

TEST(PointGradient, MatchesFiniteDifferences) {
  Rng rng = make_rng(4);
  const double h = 1e-5;
  for (int c : {1, 2, 3, 5}) {
    for (int draw = 0; draw < 40; ++draw) {
      const LatentParams p = random_params(1, c, 1, 1.5, rng);
      const int x = draw % 2;
      const PointGrad g = grad_log_likelihood_point(x, 0, 0, p);
      const Vector u = p.u.row(0).transpose();
      const Vector v = p.v.col(0);
      for (int k = 0; k < c; ++k) {
        Vector up = u, um = u, vp = v, vm = v;
        up(k) += h;
        um(k) -= h;
        vp(k) += h;
        vm(k) -= h;
        const double fd_u = (log_q_oracle(x, up, v) - log_q_oracle(x, um, v)) / (2 * h);
        const double fd_v = (log_q_oracle(x, u, vp) - log_q_oracle(x, u, vm)) / (2 * h);
        EXPECT_LE(rel_err(g.du_row(k), fd_u), 1e-4) << "c=" << c << " k=" << k;
        EXPECT_LE(rel_err(g.dv_col(k), fd_v), 1e-4) << "c=" << c << " k=" << k;
      }
    }
  }
}

TEST(PointGradient, ClampsVanishingLikelihood) {
  LatentParams p{Matrix::Zero(1, 1), Matrix::Constant(1, 1, -800.0)};
  SgldDiagnostics diag;
  const PointGrad g = grad_log_likelihood_point(1, 0, 0, p, &diag);
  EXPECT_EQ(diag.q_clamps, 1u);
  EXPECT_DOUBLE_EQ(g.q, kMinLikelihood);
  EXPECT_TRUE(std::isfinite(g.dv_col(0)));
}

TEST(PointGradient, OutOfRange) {
  LatentParams p{Matrix::Zero(2, 1), Matrix::Zero(1, 2)};
  EXPECT_THROW(grad_log_likelihood_point(1, 2, 0, p), DimensionError);
  EXPECT_THROW(grad_log_likelihood_point(1, 0, -1, p), DimensionError);
}

TEST(GradLogLikelihood, TouchesOnlyInvolvedRowsAndColumns) {
  Rng rng = make_rng(5);
  const LatentParams p = random_params(4, 3, 5, 1.0, rng);
  const std::vector<Observation> data{{0, 2, 3, 1}};
  const GradPair g = grad_log_likelihood(p, data);
  for (int i = 0; i < 4; ++i) {
    if (i != 2) EXPECT_TRUE(g.du.row(i).isZero(0.0));
  }
  for (int j = 0; j < 5; ++j) {
    if (j != 3) EXPECT_TRUE(g.dv.col(j).isZero(0.0));
  }
}

// Per-user gradient rows from that user's observations alone equal the
// corresponding rows of the full-data gradient.
TEST(GradLogLikelihood, UserRowsAreConditionallyIndependent) {
  Rng rng = make_rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const LatentParams p = random_params(12, 3, 6, 1.0, rng);
    const std::vector<Observation> data = random_data(12, 6, 300, rng);
    const GradPair full = grad_log_likelihood(p, data);
    for (int user = 0; user < 12; ++user) {
      std::vector<Observation> mine;
      for (const Observation& o : data) {
        if (o.user == user) mine.push_back(o);
      }
      const GradPair own = grad_log_likelihood(p, mine);
      EXPECT_LE((own.du.row(user) - full.du.row(user)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(SgldStep, ZeroStepIsIdentity) {
  Rng rng = make_rng(7);
  const LatentParams p = random_params(3, 2, 4, 1.0, rng);
  const std::vector<Observation> data = random_data(3, 4, 10, rng);
  const LatentParams next =
      sgld_step(p, data, 10, PriorSpec::constant(3, 2, 4, 1.0, 1.0), 0.0, true, rng);
  EXPECT_EQ(next, p);
}

TEST(SgldStep, NoiseHasVarianceEqualToStep) {
  Rng init = make_rng(8);
  const LatentParams p = random_params(2, 2, 2, 0.5, init);
  const std::vector<Observation> data{{0, 0, 1, 1}, {0, 1, 0, 0}};
  const PriorSpec prior = PriorSpec::flat(2, 2, 2);
  const double eps = 0.01;
  Rng dummy = make_rng(0);
  const LatentParams drift = sgld_step(p, data, 2, prior, eps, false, dummy);
  Rng rng = make_rng(9);
  const int n = 10000;
  Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(8), sq = Eigen::ArrayXd::Zero(8);
  for (int k = 0; k < n; ++k) {
    const LatentParams next = sgld_step(p, data, 2, prior, eps, true, rng);
    const Matrix du = next.u - drift.u, dv = next.v - drift.v;
    Eigen::ArrayXd inc(8);
    inc << Eigen::Map<const Eigen::ArrayXd>(du.data(), 4), Eigen::Map<const Eigen::ArrayXd>(dv.data(), 4);
    sum += inc;
    sq += inc.square();
  }
  for (int k = 0; k < 8; ++k) {
    const double mean = sum(k) / n;
    const double var = sq(k) / n - mean * mean;
    EXPECT_NEAR(var, eps, 0.1 * eps) << k;
    EXPECT_LT(std::abs(mean), 2.58 * std::sqrt(eps / n)) << k;
  }
}

TEST(SgldStep, NoiselessSingleObservationFollowsScaledGradient) {
  Rng rng = make_rng(10);
  const LatentParams p = random_params(3, 2, 4, 1.0, rng);
  const std::vector<Observation> batch{{0, 1, 2, 1}};
  const std::size_t total = 7;
  const double eps = 0.02;
  const LatentParams next = sgld_step(p, batch, total, PriorSpec::flat(3, 2, 4), eps, false, rng);
  const PointGrad g = grad_log_likelihood_point(1, 1, 2, p);
  const double k = 0.5 * eps * static_cast<double>(total);
  for (int c = 0; c < 2; ++c) {
    EXPECT_NEAR(next.u(1, c) - p.u(1, c), k * g.du_row(c), 1e-14);
    EXPECT_NEAR(next.v(c, 2) - p.v(c, 2), k * g.dv_col(c), 1e-14);
  }
  EXPECT_EQ(next.u.row(0), p.u.row(0));
  EXPECT_EQ(next.v.col(0), p.v.col(0));
}

TEST(SgldStep, PreconditionsAndDivergence) {
  Rng rng = make_rng(11);
  LatentParams p = random_params(2, 1, 2, 1.0, rng);
  const PriorSpec prior = PriorSpec::flat(2, 1, 2);
  const std::vector<Observation> batch{{0, 0, 0, 1}, {0, 0, 1, 0}};
  EXPECT_THROW(sgld_step(p, {}, 1, prior, 0.1, true, rng), DimensionError);
  EXPECT_THROW(sgld_step(p, batch, 1, prior, 0.1, true, rng), DimensionError);
  p.u(1, 0) = std::numeric_limits<double>::infinity();
  try {
    sgld_step(p, batch, 2, prior, 0.1, true, rng);
    FAIL() << "expected NumericalDivergence";
  } catch (const NumericalDivergence& e) {
    EXPECT_EQ(e.coordinate(), "u[1,0]");
  }
}

TEST(SgldStep, StandardExponentialFloorClamps) {
  Rng rng = make_rng(12);
  const LatentParams p{Matrix::Constant(2, 2, 0.01), Matrix::Constant(2, 3, 0.01)};
  PriorSpec prior = PriorSpec::constant(2, 2, 3, 50.0, 50.0, PriorSign::standard_exponential);
  prior.parameter_floor = 0.0;
  const std::vector<Observation> batch{{0, 0, 0, 1}};
  const LatentParams next = sgld_step(p, batch, 1, prior, 0.1, true, rng);
  EXPECT_GE(next.u.minCoeff(), 0.0);
  EXPECT_GE(next.v.minCoeff(), 0.0);
}

TEST(EffectiveStep, KeepsTotalTimesStepConstant) {
  SgldConfig cfg;
  cfg.step_size = 0.01;
  cfg.reference_count = 1000;
  EXPECT_DOUBLE_EQ(effective_step(cfg, 1000), 0.01);
  EXPECT_DOUBLE_EQ(effective_step(cfg, 500) * 500, 0.01 * 1000);
  cfg.scale_step_with_data = false;
  EXPECT_DOUBLE_EQ(effective_step(cfg, 500), 0.01);
}

TEST(BatchSampler, DistinctWithinBatchAndFullWhenSmall) {
  std::vector<Observation> data;
  for (int k = 0; k < 20; ++k) data.push_back({0, k, 0, k % 2});
  BatchSampler s(data, 8);
  Rng rng = make_rng(13);
  for (int rep = 0; rep < 50; ++rep) {
    const auto b = s.next(rng);
    ASSERT_EQ(b.size(), 8u);
    std::set<int> users;
    for (const Observation& o : b) users.insert(o.user);
    EXPECT_EQ(users.size(), 8u);
  }
  BatchSampler all(data, 100);
  EXPECT_EQ(all.next(rng).size(), 20u);
}

TEST(FullSampling, ZeroIterationsReturnsInit) {
  Rng rng = make_rng(14);
  const LatentParams init = random_params(3, 2, 3, 0.1, rng);
  SgldConfig cfg;
  cfg.iters_per_round = 0;
  const std::vector<Observation> data = random_data(3, 3, 5, rng);
  EXPECT_EQ(run_full_sampling(data, PriorSpec::flat(3, 2, 3), cfg, init, rng), init);
  EXPECT_THROW(run_full_sampling({}, PriorSpec::flat(3, 2, 3), cfg, init, rng), DimensionError);
}

TEST(FullSampling, SeededRunsAreIdentical) {
  Rng rng = make_rng(15);
  const LatentParams init = random_params(6, 2, 4, 0.1, rng);
  const std::vector<Observation> data = random_data(6, 4, 60, rng);
  SgldConfig cfg;
  cfg.iters_per_round = 50;
  cfg.batch_size = 20;
  Rng a = make_rng(77), b = make_rng(77);
  const PriorSpec prior = PriorSpec::constant(6, 2, 4, 0.5, 0.5);
  EXPECT_EQ(run_full_sampling(data, prior, cfg, init, a), run_full_sampling(data, prior, cfg, init, b));
}

// Exact posterior of sigma(v) for one Bernoulli arm under a flat prior on v,
// integrated numerically in v.
double quadrature_posterior_mean(int successes, int failures) {
  const double lo = -30.0, hi = 30.0;
  const int steps = 200000;
  const double h = (hi - lo) / steps;
  double num = 0.0, den = 0.0;
  for (int k = 0; k <= steps; ++k) {
    const double v = lo + k * h;
    const double w = (k == 0 || k == steps) ? 0.5 : 1.0;
    const double log_s = -std::log1p(std::exp(-v));
    const double log_f = -std::log1p(std::exp(v));
    const double dens = std::exp(successes * log_s + failures * log_f + 33.65);
    num += w * dens * std::exp(log_s);
    den += w * dens;
  }
  return num / den;
}

TEST(FullSampling, PosteriorMeanMatchesQuadrature) {
  const double oracle = quadrature_posterior_mean(30, 20);
  EXPECT_NEAR(oracle, 0.6, 1e-6);  // Beta(30, 20) in probability space
  std::vector<Observation> data;
  for (int k = 0; k < 50; ++k) data.push_back({0, 0, 0, k < 30 ? 1 : 0});
  const PriorSpec prior = PriorSpec::flat(1, 1, 1);
  SgldConfig burn;
  burn.step_size = 0.05;
  burn.final_step_size = 0.01;
  burn.iters_per_round = 4000;
  burn.batch_size = 50;
  burn.scale_step_with_data = false;
  Rng rng = make_rng(16);
  LatentParams p{Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  p = run_full_sampling(data, prior, burn, p, rng);
  SgldConfig keep = burn;
  keep.step_size = 0.01;
  keep.final_step_size = 0.0;
  keep.iters_per_round = 1;
  double sum = 0.0;
  for (int it = 0; it < 1000; ++it) {
    p = run_full_sampling(data, prior, keep, p, rng);
    sum += logistic(p.v(0, 0));
  }
  EXPECT_NEAR(sum / 1000.0, oracle, 0.05);
}

TEST(BlockBounds, NearEqualContiguous) {
  EXPECT_EQ(block_bounds(10, 4), (std::vector<int>{0, 2, 5, 7, 10}));
  EXPECT_EQ(block_bounds(3, 8), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(block_bounds(5, 1), (std::vector<int>{0, 5}));
}

TEST(AlternatingSampling, SingleBlockMatchesFullStepForU) {
  Rng rng = make_rng(17);
  const LatentParams p = random_params(5, 2, 4, 0.5, rng);
  const std::vector<Observation> batch = random_data(5, 4, 30, rng);
  const PriorSpec prior = PriorSpec::constant(5, 2, 4, 0.5, 0.5);
  SgldConfig cfg;
  cfg.n_blocks = 1;
  const std::uint64_t block_seed = 12345;
  LatentParams alt = p;
  Rng main_rng = make_rng(18);
  alternating_iteration(alt, batch, 60, prior, 0.01, cfg, block_seed, main_rng);
  Rng full_rng = make_rng(block_seed, 0);
  const LatentParams full = sgld_step(p, batch, 60, prior, 0.01, true, full_rng);
  EXPECT_EQ(alt.u, full.u);
}

TEST(AlternatingSampling, VUpdateUsesMergedU) {
  Rng rng = make_rng(19);
  const LatentParams p = random_params(6, 2, 3, 0.5, rng);
  const std::vector<Observation> batch = random_data(6, 3, 40, rng);
  const PriorSpec prior = PriorSpec::flat(6, 2, 3);
  SgldConfig cfg;
  cfg.n_blocks = 3;
  cfg.inject_noise = false;
  LatentParams alt = p;
  Rng main_rng = make_rng(20);
  alternating_iteration(alt, batch, 40, prior, 0.05, cfg, 1, main_rng);
  LatentParams mid{alt.u, p.v};
  const GradPair g = grad_log_likelihood(mid, batch);
  const Matrix expected_v = p.v + 0.5 * 0.05 * g.dv;
  EXPECT_LE((alt.v - expected_v).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(AlternatingSampling, ParallelBlocksMatchSerial) {
  Rng rng = make_rng(21);
  const LatentParams init = random_params(40, 3, 8, 0.1, rng);
  const std::vector<Observation> data = random_data(40, 8, 400, rng);
  const PriorSpec prior = PriorSpec::constant(40, 3, 8, 0.5, 0.5);
  SgldConfig cfg;
  cfg.iters_per_round = 30;
  cfg.batch_size = 100;
  cfg.n_blocks = 4;
  cfg.workers = 1;
  Rng a = make_rng(5);
  const LatentParams serial = run_alternating_sampling(data, prior, cfg, init, a);
  cfg.workers = 4;
  Rng b = make_rng(5);
  const LatentParams parallel = run_alternating_sampling(data, prior, cfg, init, b);
  EXPECT_EQ(serial, parallel);
}

// Two noisy chains never share a final iterate, so both are compared through
// the running mean of P over their last 1000 of 5000 iterations.
TEST(AlternatingSampling, TwoAndFourBlocksAgreeOnAveragedP) {
  EnvSpec es;
  es.n_users = 50;
  es.n_arms = 10;
  es.rank = 2;
  es.kind = EnvKind::cluster;
  es.seed = 3;
  const RewardMatrix env = generate(es);
  Rng data_rng = make_rng(22);
  std::vector<Observation> data;
  for (int rep = 0; rep < 100; ++rep) {
    for (int i = 0; i < 50; ++i) {
      for (int j = 0; j < 10; ++j) data.push_back({0, i, j, sample_reward(env.values(i, j), data_rng)});
    }
  }
  const PriorSpec prior = PriorSpec::flat(50, 2, 10);
  Rng init_rng = make_rng(23);
  const LatentParams init = random_params(50, 2, 10, 0.1, init_rng);
  auto averaged_p = [&](int blocks) {
    SgldConfig cfg;
    cfg.step_size = 0.001;
    cfg.scale_step_with_data = false;
    cfg.batch_size = 1000;
    cfg.n_blocks = blocks;
    cfg.iters_per_round = 4000;
    Rng rng = make_rng(24, static_cast<std::uint64_t>(blocks));
    LatentParams p = run_alternating_sampling(data, prior, cfg, init, rng);
    cfg.iters_per_round = 1;
    Matrix sum = Matrix::Zero(50, 10);
    for (int it = 0; it < 1000; ++it) {
      p = run_alternating_sampling(data, prior, cfg, p, rng);
      sum += materialize(p).P;
    }
    return Matrix(sum / 1000.0);
  };
  const Matrix p2 = averaged_p(2);
  const Matrix p4 = averaged_p(4);
  EXPECT_LE((p2 - p4).norm(), 0.1 * std::sqrt(50.0 * 10.0) * 0.05);
}

TEST(UserRowsSampling, OnlyTouchesRequestedRows) {
  Rng rng = make_rng(25);
  const LatentParams init = random_params(6, 2, 3, 0.5, rng);
  std::vector<Observation> data;
  for (int k = 0; k < 30; ++k) data.push_back({0, 4 + k % 2, k % 3, k % 2});
  SgldConfig cfg;
  cfg.iters_per_round = 20;
  const LatentParams out =
      run_user_rows_sampling(data, PriorSpec::constant(6, 2, 3, 0.5, 0.5), cfg, init, 4, 6, rng);
  EXPECT_EQ(out.v, init.v);
  EXPECT_EQ(out.u.topRows(4), init.u.topRows(4));
  EXPECT_NE(out.u.bottomRows(2), init.u.bottomRows(2));
  EXPECT_THROW(run_user_rows_sampling(data, PriorSpec::flat(6, 2, 3), cfg, init, 0, 4, rng),
               DimensionError);
}

TEST(Materialize, Examples) {
  LatentParams p{Matrix::Zero(3, 2), Matrix(2, 4)};
  p.v.row(0).setConstant(std::log(0.2 / 0.8));
  p.v.row(1).setConstant(std::log(0.8 / 0.2));
  const Materialized m = materialize(p);
  EXPECT_LE((m.P.array() - 0.5).abs().maxCoeff(), 1e-15);

  Rng rng = make_rng(26);
  const LatentParams one = random_params(4, 1, 5, 1.0, rng);
  const Materialized m1 = materialize(one);
  for (int i = 0; i < 4; ++i) EXPECT_LE((m1.P.row(i) - m1.V.row(0)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Materialize, ConvexCombinationBounds) {
  Rng rng = make_rng(27);
  for (int k = 0; k < 50; ++k) {
    const LatentParams p = random_params(8, 3, 6, 3.0, rng);
    const Materialized m = materialize(p);
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(m.U.row(i).sum(), 1.0, 1e-9);
    EXPECT_GE(m.P.minCoeff(), m.V.minCoeff() - 1e-15);
    EXPECT_LE(m.P.maxCoeff(), m.V.maxCoeff() + 1e-15);
    EXPECT_GT(m.P.minCoeff(), 0.0);
    EXPECT_LT(m.P.maxCoeff(), 1.0);
  }
}

TEST(ParamsText, RoundTrip) {
  Rng rng = make_rng(28);
  const LatentParams p = random_params(3, 2, 4, 1.0, rng);
  std::stringstream ss;
  write_params(ss, p);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "u 3 2");
  ss.seekg(0);
  const LatentParams q = read_params(ss);
  EXPECT_LE((q.u - p.u).cwiseAbs().maxCoeff(), 5e-7);
  EXPECT_LE((q.v - p.v).cwiseAbs().maxCoeff(), 5e-7);
  std::istringstream bad("v 1 1\n0.5\n");
  EXPECT_THROW(read_params(bad), ParseError);
}

TEST(SgldConfig, Validation) {
  SgldConfig c;
  EXPECT_NO_THROW(c.validate());
  c.step_size = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = SgldConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = SgldConfig{};
  c.n_blocks = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

}  // namespace
}  // namespace tssgld
