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

// Bayesian matrix factorization sampled with stochastic gradient Langevin
// dynamics.
//
// The model: user i mixes over C archetypes with weights softmax(u_i), and
// archetype c answers arm j with probability logistic(v_cj). A binary
// observation x at (i, j) has likelihood
//
//   Q = sum_c softmax(u_i)_c * (x * s_cj + (1 - x) * (1 - s_cj)),  s = logistic(v)
//
// and the predicted reward matrix is P = U V with U = row-softmax(u),
// V = logistic(v).

#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tssgld/common.hpp"
#include "tssgld/observations.hpp"

namespace tssgld {

enum class PriorSign {
  as_written,            // log-density gradient +lambda, +alpha
  standard_exponential,  // log-density gradient -lambda, -alpha
};

struct LatentParams {
  Matrix u;  // N x C
  Matrix v;  // C x M

  int n_users() const { return static_cast<int>(u.rows()); }
  int rank() const { return static_cast<int>(u.cols()); }
  int n_arms() const { return static_cast<int>(v.cols()); }

  static LatentParams gaussian(int n_users, int rank, int n_arms, double stddev, Rng& rng) {
    LatentParams p{Matrix(n_users, rank), Matrix(rank, n_arms)};
    std::normal_distribution<double> g(0.0, stddev);
    for (Eigen::Index i = 0; i < p.u.size(); ++i) p.u.data()[i] = stddev > 0 ? g(rng) : 0.0;
    for (Eigen::Index i = 0; i < p.v.size(); ++i) p.v.data()[i] = stddev > 0 ? g(rng) : 0.0;
    return p;
  }

  bool all_finite() const { return u.allFinite() && v.allFinite(); }

  bool operator==(const LatentParams& o) const {
    return u.rows() == o.u.rows() && u.cols() == o.u.cols() && v.rows() == o.v.rows() &&
           v.cols() == o.v.cols() && u == o.u && v == o.v;
  }
};

struct PriorSpec {
  Matrix lambda;  // N x C, rates for u
  Matrix alpha;   // C x M, rates for v
  PriorSign sign = PriorSign::as_written;
  // Lower clamp applied to u and v under standard_exponential.
  double parameter_floor = std::numeric_limits<double>::lowest();

  static PriorSpec constant(int n_users, int rank, int n_arms, double lambda, double alpha,
                            PriorSign sign = PriorSign::as_written) {
    if (lambda < 0.0 || alpha < 0.0) throw DomainError("PriorSpec: rates must be nonnegative");
    return PriorSpec{Matrix::Constant(n_users, rank, lambda), Matrix::Constant(rank, n_arms, alpha),
                     sign};
  }

  static PriorSpec flat(int n_users, int rank, int n_arms) {
    return constant(n_users, rank, n_arms, 0.0, 0.0);
  }

  void validate() const {
    if ((lambda.array() < 0.0).any() || (alpha.array() < 0.0).any()) {
      throw DomainError("PriorSpec: rates must be nonnegative");
    }
  }
};

struct SgldConfig {
  double step_size = 0.01;
  int batch_size = 1000;
  int iters_per_round = 200;
  // Keep total_count * step / batch constant: the step is step_size when the
  // log holds reference_count observations.
  bool scale_step_with_data = true;
  long long reference_count = 0;
  std::uint64_t seed = 0;
  int n_blocks = 4;
  int workers = 1;
  double init_std = 0.1;
  // When positive, the step decays geometrically to this value over the
  // iterations of one sampling call.
  double final_step_size = 0.0;
  // Test hook: false drops the Langevin noise term.
  bool inject_noise = true;

  void validate() const {
    if (!(step_size > 0.0)) throw ValidationError("sgld: step_size must be positive");
    if (batch_size < 1) throw ValidationError("sgld: batch_size must be >= 1");
    if (iters_per_round < 0) throw ValidationError("sgld: iters_per_round must be >= 0");
    if (n_blocks < 1) throw ValidationError("sgld: n_blocks must be >= 1");
    if (workers < 1) throw ValidationError("sgld: workers must be >= 1");
    if (reference_count < 0) throw ValidationError("sgld: reference_count must be >= 0");
    if (init_std < 0.0) throw ValidationError("sgld: init_std must be >= 0");
    if (final_step_size < 0.0) throw ValidationError("sgld: final_step_size must be >= 0");
  }

  bool operator==(const SgldConfig&) const = default;
};

inline double effective_step(const SgldConfig& cfg, std::size_t total_count) {
  if (cfg.scale_step_with_data && cfg.reference_count > 0 && total_count > 0) {
    return cfg.step_size * static_cast<double>(cfg.reference_count) /
           static_cast<double>(total_count);
  }
  return cfg.step_size;
}

struct SgldDiagnostics {
  std::size_t q_clamps = 0;
  std::size_t steps = 0;
};

inline constexpr double kMinLikelihood = 1e-300;

// ---- model pieces ----

template <typename Row>
Vector user_membership(const Row& u_row) {
  const Eigen::Index c = u_row.size();
  Vector p(c);
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < c; ++k) mx = std::max(mx, static_cast<double>(u_row(k)));
  double total = 0.0;
  for (Eigen::Index k = 0; k < c; ++k) {
    p(k) = std::exp(u_row(k) - mx);
    total += p(k);
  }
  p /= total;
  return p;
}

inline Vector user_membership(std::span<const double> u_row) {
  return user_membership(Eigen::Map<const Vector>(u_row.data(), static_cast<Eigen::Index>(u_row.size())));
}

inline double cluster_success_prob(double v_entry) { return logistic(v_entry); }

template <typename URow, typename VCol>
double mixture_likelihood(int x, const URow& u_row, const VCol& v_col) {
  const Vector p = user_membership(u_row);
  double q = 0.0;
  for (Eigen::Index c = 0; c < p.size(); ++c) {
    // logistic(-v) = 1 - logistic(v) without cancellation.
    q += p(c) * (x ? logistic(v_col(c)) : logistic(-v_col(c)));
  }
  return q;
}

template <typename URow, typename VCol>
double log_mixture_likelihood(int x, const URow& u_row, const VCol& v_col) {
  return std::log(std::max(mixture_likelihood(x, u_row, v_col), kMinLikelihood));
}

struct GradPair {
  Matrix du;
  Matrix dv;
};

inline GradPair grad_log_prior(const LatentParams& params, const PriorSpec& prior) {
  if (prior.lambda.rows() != params.u.rows() || prior.lambda.cols() != params.u.cols() ||
      prior.alpha.rows() != params.v.rows() || prior.alpha.cols() != params.v.cols()) {
    throw DimensionError("grad_log_prior: prior and parameter shapes differ");
  }
  const double s = prior.sign == PriorSign::as_written ? 1.0 : -1.0;
  return GradPair{s * prior.lambda, s * prior.alpha};
}

struct PointGrad {
  Vector du_row;  // gradient w.r.t. u[user, :]
  Vector dv_col;  // gradient w.r.t. v[:, arm]
  double q = 0.0;
};

namespace detail {

// Writes the point gradient into du_row/dv_col (length C each) and returns Q.
// membership/lik are scratch buffers of length C.
inline double point_gradient(int x, const double* u_row, const Matrix& v, int arm, int rank,
                             double* du_row, double* dv_col, double* membership, double* lik,
                             SgldDiagnostics* diag) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < rank; ++c) mx = std::max(mx, u_row[c]);
  double z = 0.0;
  for (int c = 0; c < rank; ++c) {
    membership[c] = std::exp(u_row[c] - mx);
    z += membership[c];
  }
  double q = 0.0;
  for (int c = 0; c < rank; ++c) {
    membership[c] /= z;
    const double vcj = v(c, arm);
    const double s_pos = logistic(vcj);
    const double s_neg = logistic(-vcj);
    lik[c] = x ? s_pos : s_neg;
    q += membership[c] * lik[c];
    // e^v / (1 + e^v)^2 = s(1 - s)
    dv_col[c] = membership[c] * (x ? 1.0 : -1.0) * s_pos * s_neg;
  }
  if (q < kMinLikelihood) {
    q = kMinLikelihood;
    if (diag) ++diag->q_clamps;
  }
  const double inv_q = 1.0 / q;
  for (int c = 0; c < rank; ++c) {
    dv_col[c] *= inv_q;
    // Softmax Jacobian: d p_c' / d u_c = p_c' (delta_cc' - p_c), so
    // sum_c' (d p_c'/d u_c) L_c' = p_c (L_c - Q).
    du_row[c] = membership[c] * (lik[c] - q) * inv_q;
  }
  return q;
}

}  // namespace detail

inline PointGrad grad_log_likelihood_point(int x, int user, int arm, const LatentParams& params,
                                           SgldDiagnostics* diag = nullptr) {
  if (user < 0 || user >= params.n_users() || arm < 0 || arm >= params.n_arms()) {
    throw DimensionError("grad_log_likelihood_point: user/arm out of range");
  }
  const int rank = params.rank();
  PointGrad g{Vector(rank), Vector(rank), 0.0};
  std::vector<double> membership(rank), lik(rank);
  g.q = detail::point_gradient(x, params.u.row(user).data(), params.v, arm, rank, g.du_row.data(),
                               g.dv_col.data(), membership.data(), lik.data(), diag);
  return g;
}

/// Summed log-likelihood gradient over the observations, accumulated in the
/// given order.
inline GradPair grad_log_likelihood(const LatentParams& params, std::span<const Observation> data,
                                    SgldDiagnostics* diag = nullptr) {
  const int rank = params.rank();
  GradPair g{Matrix::Zero(params.u.rows(), rank), Matrix::Zero(rank, params.v.cols())};
  std::vector<double> du(rank), dv(rank), membership(rank), lik(rank);
  for (const Observation& o : data) {
    detail::point_gradient(o.reward, params.u.row(o.user).data(), params.v, o.arm, rank, du.data(),
                           dv.data(), membership.data(), lik.data(), diag);
    for (int c = 0; c < rank; ++c) {
      g.du(o.user, c) += du[c];
      g.dv(c, o.arm) += dv[c];
    }
  }
  return g;
}

inline double log_likelihood(const LatentParams& params, std::span<const Observation> data) {
  double total = 0.0;
  for (const Observation& o : data) {
    total += log_mixture_likelihood(o.reward, params.u.row(o.user), params.v.col(o.arm));
  }
  return total;
}

// ---- the Langevin step ----

namespace detail {

inline void check_finite(const LatentParams& p, int row_begin, int row_end, bool check_v) {
  for (int i = row_begin; i < row_end; ++i) {
    for (int c = 0; c < p.rank(); ++c) {
      if (!std::isfinite(p.u(i, c))) {
        throw NumericalDivergence("SGLD produced a non-finite parameter",
                                  "u[" + std::to_string(i) + "," + std::to_string(c) + "]");
      }
    }
  }
  if (!check_v) return;
  for (int c = 0; c < p.rank(); ++c) {
    for (int j = 0; j < p.n_arms(); ++j) {
      if (!std::isfinite(p.v(c, j))) {
        throw NumericalDivergence("SGLD produced a non-finite parameter",
                                  "v[" + std::to_string(c) + "," + std::to_string(j) + "]");
      }
    }
  }
}

// Applies (eps/2)(prior + scale * lik) + N(0, eps) to rows [begin, end) of m.
inline void langevin_update_rows(Matrix& m, const Matrix& prior_grad, const Matrix& lik_grad,
                                 int row_begin, int row_end, double eps, double scale,
                                 bool inject_noise, Rng& rng, double floor, bool clamp) {
  const double half = 0.5 * eps;
  const double sd = std::sqrt(eps);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = row_begin; i < row_end; ++i) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double delta = half * (prior_grad(i, c) + scale * lik_grad(i, c));
      if (inject_noise) delta += sd * gauss(rng);
      double next = m(i, c) + delta;
      if (clamp) next = std::max(next, floor);
      m(i, c) = next;
    }
  }
}

inline bool clamps(const PriorSpec& prior) {
  return prior.sign == PriorSign::standard_exponential &&
         prior.parameter_floor > std::numeric_limits<double>::lowest();
}

}  // namespace detail

/// One SGLD update of every coordinate:
///   theta += (eps/2) (grad log prior + (total_count / |batch|) sum grad log lik) + N(0, eps)
/// Noise is drawn for u row-major, then v row-major.
inline LatentParams sgld_step(const LatentParams& params, std::span<const Observation> batch,
                              std::size_t total_count, const PriorSpec& prior, double step_size,
                              bool inject_noise, Rng& rng, SgldDiagnostics* diag = nullptr) {
  if (batch.empty()) throw DimensionError("sgld_step: empty batch");
  if (total_count < batch.size()) {
    throw DimensionError("sgld_step: total_count smaller than batch");
  }
  const GradPair pg = grad_log_prior(params, prior);
  const GradPair lg = grad_log_likelihood(params, batch, diag);
  const double scale = static_cast<double>(total_count) / static_cast<double>(batch.size());
  const bool clamp = detail::clamps(prior);
  LatentParams next = params;
  detail::langevin_update_rows(next.u, pg.du, lg.du, 0, next.n_users(), step_size, scale,
                               inject_noise, rng, prior.parameter_floor, clamp);
  detail::langevin_update_rows(next.v, pg.dv, lg.dv, 0, next.rank(), step_size, scale,
                               inject_noise, rng, prior.parameter_floor, clamp);
  detail::check_finite(next, 0, next.n_users(), true);
  if (diag) ++diag->steps;
  return next;
}

inline LatentParams sgld_step(const LatentParams& params, std::span<const Observation> batch,
                              std::size_t total_count, const PriorSpec& prior,
                              const SgldConfig& cfg, Rng& rng, SgldDiagnostics* diag = nullptr) {
  return sgld_step(params, batch, total_count, prior, effective_step(cfg, total_count),
                   cfg.inject_noise, rng, diag);
}

/// Draws minibatches of distinct records; successive batches are independent.
class BatchSampler {
 public:
  BatchSampler(std::span<const Observation> data, int batch_size)
      : data_(data), batch_size_(batch_size), index_(data.size()) {
    std::iota(index_.begin(), index_.end(), std::size_t{0});
    batch_.reserve(std::min<std::size_t>(data.size(), static_cast<std::size_t>(batch_size)));
  }

  std::span<const Observation> next(Rng& rng) {
    const std::size_t d = data_.size();
    if (static_cast<std::size_t>(batch_size_) >= d) return data_;
    batch_.clear();
    for (std::size_t k = 0; k < static_cast<std::size_t>(batch_size_); ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, d - 1);
      std::swap(index_[k], index_[pick(rng)]);
      batch_.push_back(data_[index_[k]]);
    }
    return batch_;
  }

 private:
  std::span<const Observation> data_;
  int batch_size_;
  std::vector<std::size_t> index_;
  std::vector<Observation> batch_;
};

namespace detail {

inline double annealed_step(double base, const SgldConfig& cfg, int iter) {
  if (cfg.final_step_size <= 0.0 || cfg.iters_per_round <= 1) return base;
  const double frac = static_cast<double>(iter) / static_cast<double>(cfg.iters_per_round - 1);
  return base * std::pow(cfg.final_step_size / cfg.step_size, frac);
}

}  // namespace detail

/// Joint SGLD over u and v: iters_per_round steps, each on a fresh minibatch.
/// The final iterate is returned as the posterior sample.
inline LatentParams run_full_sampling(std::span<const Observation> data, const PriorSpec& prior,
                                      const SgldConfig& cfg, const LatentParams& init, Rng& rng,
                                      SgldDiagnostics* diag = nullptr) {
  cfg.validate();
  if (data.empty()) throw DimensionError("run_full_sampling: no data");
  LatentParams params = init;
  BatchSampler sampler(data, cfg.batch_size);
  const double base = effective_step(cfg, data.size());
  for (int it = 0; it < cfg.iters_per_round; ++it) {
    const auto batch = sampler.next(rng);
    params = sgld_step(params, batch, data.size(), prior, detail::annealed_step(base, cfg, it),
                       cfg.inject_noise, rng, diag);
  }
  return params;
}

/// Near-equal contiguous user ranges.
inline std::vector<int> block_bounds(int n_users, int n_blocks) {
  const int b = std::max(1, std::min(n_blocks, n_users));
  std::vector<int> bounds(b + 1);
  for (int k = 0; k <= b; ++k) {
    bounds[k] = static_cast<int>((static_cast<long long>(n_users) * k) / b);
  }
  return bounds;
}

/// One alternating iteration on a fixed batch.
///
/// u-phase: each user block updates its rows against v as it stood at the
/// start of the iteration, drawing noise from its own sub-stream seeded by
/// mix_seed(block_seed, block). Blocks write disjoint rows and may run on
/// separate threads. v-phase: after all blocks finish, v is updated against
/// the merged u with noise from `rng`.
inline void alternating_iteration(LatentParams& params, std::span<const Observation> batch,
                                  std::size_t total_count, const PriorSpec& prior, double step,
                                  const SgldConfig& cfg, std::uint64_t block_seed, Rng& rng,
                                  SgldDiagnostics* diag = nullptr) {
  const int n = params.n_users();
  const int rank = params.rank();
  const std::vector<int> bounds = block_bounds(n, cfg.n_blocks);
  const int n_blocks = static_cast<int>(bounds.size()) - 1;
  const GradPair pg = grad_log_prior(params, prior);
  const double scale = static_cast<double>(total_count) / static_cast<double>(batch.size());
  const bool clamp = detail::clamps(prior);

  // Per-block observation lists, keeping batch order within a block.
  std::vector<std::vector<Observation>> per_block(n_blocks);
  {
    std::vector<int> block_of(n);
    for (int b = 0; b < n_blocks; ++b) {
      for (int i = bounds[b]; i < bounds[b + 1]; ++i) block_of[i] = b;
    }
    for (const Observation& o : batch) per_block[block_of[o.user]].push_back(o);
  }

  Matrix du = Matrix::Zero(n, rank);
  std::vector<SgldDiagnostics> block_diag(n_blocks);
  const Matrix& v_snapshot = params.v;  // not written during the u-phase

  auto run_block = [&](int b) {
    std::vector<double> g_u(rank), g_v(rank), membership(rank), lik(rank);
    for (const Observation& o : per_block[b]) {
      detail::point_gradient(o.reward, params.u.row(o.user).data(), v_snapshot, o.arm, rank,
                             g_u.data(), g_v.data(), membership.data(), lik.data(), &block_diag[b]);
      for (int c = 0; c < rank; ++c) du(o.user, c) += g_u[c];
    }
    Rng block_rng = make_rng(block_seed, static_cast<std::uint64_t>(b));
    detail::langevin_update_rows(params.u, pg.du, du, bounds[b], bounds[b + 1], step, scale,
                                 cfg.inject_noise, block_rng, prior.parameter_floor, clamp);
  };

  const int workers = std::min(cfg.workers, n_blocks);
  if (workers <= 1) {
    for (int b = 0; b < n_blocks; ++b) run_block(b);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int b = w; b < n_blocks; b += workers) run_block(b);
      });
    }
  }  // barrier: jthreads join here
  detail::check_finite(params, 0, n, false);

  const GradPair lg = grad_log_likelihood(params, batch, diag);
  detail::langevin_update_rows(params.v, pg.dv, lg.dv, 0, rank, step, scale, cfg.inject_noise, rng,
                               prior.parameter_floor, clamp);
  detail::check_finite(params, 0, 0, true);
  if (diag) {
    for (const auto& d : block_diag) diag->q_clamps += d.q_clamps;
    ++diag->steps;
  }
}

inline LatentParams run_alternating_sampling(std::span<const Observation> data,
                                             const PriorSpec& prior, const SgldConfig& cfg,
                                             const LatentParams& init, Rng& rng,
                                             SgldDiagnostics* diag = nullptr) {
  cfg.validate();
  if (data.empty()) throw DimensionError("run_alternating_sampling: no data");
  LatentParams params = init;
  BatchSampler sampler(data, cfg.batch_size);
  const double base = effective_step(cfg, data.size());
  for (int it = 0; it < cfg.iters_per_round; ++it) {
    const auto batch = sampler.next(rng);
    const std::uint64_t block_seed = rng();
    alternating_iteration(params, batch, data.size(), prior, detail::annealed_step(base, cfg, it),
                          cfg, block_seed, rng, diag);
  }
  return params;
}

/// SGLD restricted to u rows [row_begin, row_end) with v held fixed. Used to
/// fit newly enrolled users against an already learned V. `data` should hold
/// only observations of those users.
inline LatentParams run_user_rows_sampling(std::span<const Observation> data,
                                           const PriorSpec& prior, const SgldConfig& cfg,
                                           const LatentParams& init, int row_begin, int row_end,
                                           Rng& rng, SgldDiagnostics* diag = nullptr) {
  cfg.validate();
  if (row_begin < 0 || row_end > init.n_users() || row_begin > row_end) {
    throw DimensionError("run_user_rows_sampling: bad row range");
  }
  LatentParams params = init;
  if (data.empty()) return params;
  for (const Observation& o : data) {
    if (o.user < row_begin || o.user >= row_end) {
      throw DimensionError("run_user_rows_sampling: observation outside the row range");
    }
  }
  BatchSampler sampler(data, cfg.batch_size);
  const double base = effective_step(cfg, data.size());
  const GradPair pg = grad_log_prior(params, prior);
  const bool clamp = detail::clamps(prior);
  for (int it = 0; it < cfg.iters_per_round; ++it) {
    const auto batch = sampler.next(rng);
    const double step = detail::annealed_step(base, cfg, it);
    const double scale = static_cast<double>(data.size()) / static_cast<double>(batch.size());
    const GradPair lg = grad_log_likelihood(params, batch, diag);
    detail::langevin_update_rows(params.u, pg.du, lg.du, row_begin, row_end, step, scale,
                                 cfg.inject_noise, rng, prior.parameter_floor, clamp);
    detail::check_finite(params, row_begin, row_end, false);
    if (diag) ++diag->steps;
  }
  return params;
}

struct Materialized {
  Matrix U;  // N x C, rows on the simplex
  Matrix V;  // C x M, entries in (0,1)
  Matrix P;  // N x M = U V
};

inline Materialized materialize(const LatentParams& params) {
  Materialized m;
  m.U.resize(params.u.rows(), params.u.cols());
  for (Eigen::Index i = 0; i < params.u.rows(); ++i) {
    m.U.row(i) = user_membership(params.u.row(i)).transpose();
  }
  m.V = params.v.unaryExpr([](double x) { return logistic(x); });
  m.P = m.U * m.V;
  return m;
}

// ---- text snapshots: "u N C" block then "v C M" block ----

inline void write_params(std::ostream& os, const LatentParams& p) {
  auto block = [&os](const char* tag, const Matrix& m) {
    os << tag << ' ' << m.rows() << ' ' << m.cols() << '\n';
    os << std::fixed << std::setprecision(6);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (j) os << ' ';
        os << m(i, j);
      }
      os << '\n';
    }
  };
  block("u", p.u);
  block("v", p.v);
}

inline LatentParams read_params(std::istream& is) {
  auto block = [&is](const char* expected) {
    std::string tag;
    Eigen::Index rows = 0, cols = 0;
    if (!(is >> tag >> rows >> cols) || tag != expected || rows < 0 || cols < 0) {
      throw ParseError(std::string("expected '") + expected + " rows cols' header", 0);
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (!(is >> m.data()[i])) throw ParseError("parameter block truncated", 0);
    }
    return m;
  };
  LatentParams p;
  p.u = block("u");
  p.v = block("v");
  if (p.u.cols() != p.v.rows()) throw DimensionError("read_params: rank mismatch between u and v");
  return p;
}

}  // namespace tssgld
