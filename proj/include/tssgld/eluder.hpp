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

// Empirical eps-Eluder dimension of the clustered reward model on small,
// finite hypothesis classes.
//
// A hypothesis is a pair (c, R): an assignment of N users to C clusters and
// a C x D reward matrix. The mean reward of user u under action a is
// R(c(u), :) . a. Action q is eps-dependent on a prefix when every pair of
// hypotheses within eps of each other (l2 over the prefix rewards) is also
// within eps at q.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <unordered_set>
#include <vector>

#include "tssgld/common.hpp"

namespace tssgld {

struct ClusterHypothesis {
  std::vector<int> assignment;  // user -> cluster
  Matrix rewards;               // C x D

  double max_row_norm() const {
    double s = 0.0;
    for (Eigen::Index c = 0; c < rewards.rows(); ++c) s = std::max(s, rewards.row(c).norm());
    return s;
  }
};

struct ActionQuery {
  int user = 0;
  Vector action;  // length D
};

inline double reward_of(const ClusterHypothesis& h, const ActionQuery& q) {
  if (q.user < 0 || q.user >= static_cast<int>(h.assignment.size()) ||
      q.action.size() != h.rewards.cols()) {
    throw DimensionError("reward_of: query does not match hypothesis shape");
  }
  return h.rewards.row(h.assignment[q.user]).dot(q.action);
}

/// Direct pairwise definition, O(H^2 * |prefix|).
inline bool is_eps_dependent(const ActionQuery& q, std::span<const ActionQuery> prefix,
                             std::span<const ClusterHypothesis> hypotheses, double eps) {
  if (hypotheses.empty()) throw DimensionError("is_eps_dependent: no hypotheses");
  for (std::size_t a = 0; a < hypotheses.size(); ++a) {
    for (std::size_t b = a + 1; b < hypotheses.size(); ++b) {
      double dist2 = 0.0;
      for (const ActionQuery& p : prefix) {
        const double d = reward_of(hypotheses[a], p) - reward_of(hypotheses[b], p);
        dist2 += d * d;
      }
      if (std::sqrt(dist2) > eps) continue;
      if (std::abs(reward_of(hypotheses[a], q) - reward_of(hypotheses[b], q)) > eps) return false;
    }
  }
  return true;
}

inline long long bound_finite(int clusters, int users, int dims) {
  if (clusters < 1 || users < 1 || dims < 1) throw DomainError("bound_finite: args must be positive");
  return (2LL * dims + users) * clusters;
}

// Functional form of the infinite-arm bound with unit constants; use for
// trends only.
inline double bound_infinite(int clusters, int users, int dims, double norm_bound, double eps) {
  if (!(eps > 0.0) || !(norm_bound > 0.0)) {
    throw DomainError("bound_infinite: eps and norm bound must be positive");
  }
  return 2.0 * clusters * dims * std::log(1.0 + 2.0 * norm_bound / (eps * eps)) +
         static_cast<double>(clusters) * users;
}

// ---- hypothesis classes and candidate actions ----

inline long long hypothesis_count(int clusters, int users, int dims, std::size_t grid_size) {
  long long count = 1;
  for (int i = 0; i < users; ++i) count *= clusters;
  for (int i = 0; i < clusters * dims; ++i) count *= static_cast<long long>(grid_size);
  return count;
}

/// All C^N assignments times all reward matrices with entries from `grid`.
inline std::vector<ClusterHypothesis> enumerate_hypotheses(int clusters, int users, int dims,
                                                           std::span<const double> grid,
                                                           long long limit = 200000) {
  const long long total = hypothesis_count(clusters, users, dims, grid.size());
  if (grid.empty() || total > limit) {
    throw DimensionError("enumerate_hypotheses: class too large to enumerate");
  }
  std::vector<ClusterHypothesis> out;
  out.reserve(static_cast<std::size_t>(total));
  const int cells = clusters * dims;
  std::vector<int> assign(users, 0);
  for (;;) {
    std::vector<int> digits(cells, 0);
    for (;;) {
      ClusterHypothesis h{assign, Matrix(clusters, dims)};
      for (int k = 0; k < cells; ++k) h.rewards(k / dims, k % dims) = grid[digits[k]];
      out.push_back(std::move(h));
      int k = 0;
      while (k < cells && ++digits[k] == static_cast<int>(grid.size())) digits[k++] = 0;
      if (k == cells) break;
    }
    int u = 0;
    while (u < users && ++assign[u] == clusters) assign[u++] = 0;
    if (u == users) break;
  }
  return out;
}

inline std::vector<ClusterHypothesis> sample_hypotheses(int clusters, int users, int dims,
                                                        std::span<const double> grid,
                                                        std::size_t count, Rng& rng) {
  if (grid.empty()) throw DimensionError("sample_hypotheses: empty grid");
  std::uniform_int_distribution<int> pick_c(0, clusters - 1);
  std::uniform_int_distribution<std::size_t> pick_g(0, grid.size() - 1);
  std::vector<ClusterHypothesis> out(count);
  for (ClusterHypothesis& h : out) {
    h.assignment.resize(users);
    for (int& a : h.assignment) a = pick_c(rng);
    h.rewards.resize(clusters, dims);
    for (Eigen::Index i = 0; i < h.rewards.size(); ++i) h.rewards.data()[i] = grid[pick_g(rng)];
  }
  return out;
}

/// (user, e_j) for every user and arm.
inline std::vector<ActionQuery> indicator_actions(int users, int dims) {
  std::vector<ActionQuery> out;
  for (int u = 0; u < users; ++u) {
    for (int j = 0; j < dims; ++j) out.push_back({u, Vector::Unit(dims, j)});
  }
  return out;
}

/// Indicator actions plus `per_user` directions drawn uniformly on the
/// sphere of radius gamma, for the infinite-arm probe.
inline std::vector<ActionQuery> sphere_actions(int users, int dims, double gamma, int per_user,
                                               Rng& rng) {
  std::vector<ActionQuery> out = indicator_actions(users, dims);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int u = 0; u < users; ++u) {
    for (int k = 0; k < per_user; ++k) {
      Vector a(dims);
      for (int j = 0; j < dims; ++j) a(j) = g(rng);
      const double n = a.norm();
      if (n > 0.0) a *= gamma / n;
      out.push_back({u, std::move(a)});
    }
  }
  return out;
}

// ---- longest sequence search ----

enum class EluderSearch { exhaustive, greedy_dfs };

struct EluderResult {
  int length = 0;
  std::vector<int> sequence;  // indices into the candidate list
  double eps_prime = 0.0;     // scale at which the sequence is independent
  bool partial = false;       // node budget ran out before the search finished
  std::size_t nodes = 0;
};

namespace detail {

// Pairwise reward differences, one row per hypothesis pair.
class PairTable {
 public:
  PairTable(std::span<const ClusterHypothesis> hyps, std::span<const ActionQuery> actions)
      : k_(actions.size()) {
    const std::size_t h = hyps.size();
    Matrix rewards(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(k_));
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t a = 0; a < k_; ++a) rewards(i, a) = reward_of(hyps[i], actions[a]);
    }
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = i + 1; j < h; ++j) {
        bool differs = false;
        for (std::size_t a = 0; a < k_; ++a) {
          const double d = rewards(i, a) - rewards(j, a);
          if (d != 0.0) differs = true;
        }
        // Pairs that agree on every candidate can never separate anything.
        if (!differs) continue;
        for (std::size_t a = 0; a < k_; ++a) diff_.push_back(rewards(i, a) - rewards(j, a));
        ++pairs_;
      }
    }
  }

  std::size_t pairs() const { return pairs_; }
  std::size_t actions() const { return k_; }
  double at(std::size_t pair, std::size_t a) const { return diff_[pair * k_ + a]; }

  double diameter() const {
    double d = 0.0;
    for (double x : diff_) d = std::max(d, std::abs(x));
    return d;
  }

  // Pairs whose squared prefix distance over `mask` is at most eps^2.
  std::vector<std::uint32_t> alive(std::uint64_t mask, double eps) const {
    std::vector<std::uint32_t> out;
    const double lim = eps * eps;
    for (std::size_t p = 0; p < pairs_; ++p) {
      double s = 0.0;
      for (std::size_t a = 0; a < k_ && s <= lim; ++a) {
        if (mask >> a & 1U) s += at(p, a) * at(p, a);
      }
      if (s <= lim) out.push_back(static_cast<std::uint32_t>(p));
    }
    return out;
  }

  // Number of alive pairs that action a separates by more than eps.
  std::size_t separated(const std::vector<std::uint32_t>& alive, std::size_t a, double eps) const {
    std::size_t n = 0;
    for (std::uint32_t p : alive) n += std::abs(at(p, a)) > eps ? 1 : 0;
    return n;
  }

  bool independent(const std::vector<std::uint32_t>& alive, std::size_t a, double eps) const {
    for (std::uint32_t p : alive) {
      if (std::abs(at(p, a)) > eps) return true;
    }
    return false;
  }

 private:
  std::size_t k_;
  std::size_t pairs_ = 0;
  std::vector<double> diff_;
};

inline std::vector<int> mask_path(const std::vector<std::int8_t>& last, std::uint64_t mask) {
  std::vector<int> seq;
  while (mask != 0) {
    const int a = last[mask];
    seq.push_back(a);
    mask &= ~(std::uint64_t{1} << a);
  }
  std::reverse(seq.begin(), seq.end());
  return seq;
}

// Exact: reachability over prefix sets, ascending mask order.
inline EluderResult exhaustive_at(const PairTable& t, double eps, std::size_t budget) {
  const std::size_t k = t.actions();
  const std::uint64_t states = std::uint64_t{1} << k;
  std::vector<std::int8_t> last(states, -1);  // action appended last; -1 unreachable
  std::vector<bool> reachable(states, false);
  reachable[0] = true;
  EluderResult best;
  best.eps_prime = eps;
  for (std::uint64_t mask = 0; mask < states; ++mask) {
    if (!reachable[mask]) continue;
    if (best.nodes >= budget) {
      best.partial = true;
      break;
    }
    ++best.nodes;
    const int len = std::popcount(mask);
    if (len > best.length) {
      best.length = len;
      best.sequence = mask_path(last, mask);
    }
    const auto alive = t.alive(mask, eps);
    for (std::size_t a = 0; a < k; ++a) {
      const std::uint64_t next = mask | (std::uint64_t{1} << a);
      if (next == mask || reachable[next]) continue;
      if (t.independent(alive, a, eps)) {
        reachable[next] = true;
        last[next] = static_cast<std::int8_t>(a);
      }
    }
  }
  return best;
}

// Depth-first, most-separating action first; a lower bound under budget.
inline EluderResult greedy_at(const PairTable& t, double eps, std::size_t budget) {
  const std::size_t k = t.actions();
  EluderResult best;
  best.eps_prime = eps;
  std::unordered_set<std::uint64_t> seen;
  std::vector<int> path;
  auto dfs = [&](auto&& self, std::uint64_t mask) -> void {
    if (best.nodes >= budget) {
      best.partial = true;
      return;
    }
    ++best.nodes;
    if (static_cast<int>(path.size()) > best.length) {
      best.length = static_cast<int>(path.size());
      best.sequence = path;
    }
    if (best.length == static_cast<int>(k)) return;
    const auto alive = t.alive(mask, eps);
    std::vector<std::pair<std::size_t, int>> children;
    for (std::size_t a = 0; a < k; ++a) {
      if (mask >> a & 1U) continue;
      const std::size_t sep = t.separated(alive, a, eps);
      if (sep > 0) children.emplace_back(sep, static_cast<int>(a));
    }
    std::stable_sort(children.begin(), children.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (const auto& [sep, a] : children) {
      const std::uint64_t next = mask | (std::uint64_t{1} << a);
      if (!seen.insert(next).second) continue;
      path.push_back(a);
      self(self, next);
      path.pop_back();
      if (best.partial) return;
    }
  };
  dfs(dfs, 0);
  return best;
}

}  // namespace detail

/// eps' = eps, 2 eps, 4 eps, ... up to the largest pairwise reward gap.
inline std::vector<double> eps_prime_grid(double eps, double diameter) {
  std::vector<double> grid{eps};
  for (double e = 2.0 * eps; e <= diameter; e *= 2.0) grid.push_back(e);
  return grid;
}

/// Longest sequence of candidate actions in which every action is
/// eps'-independent of its predecessors, maximized over the eps' grid.
/// Exhaustive mode is exact (reachability over prefix sets, which is enough
/// because dependence only sees the prefix as a set); greedy_dfs returns a
/// lower bound. `budget` caps expanded nodes summed over the grid.
inline EluderResult longest_eluder_sequence(std::span<const ClusterHypothesis> hypotheses,
                                            std::span<const ActionQuery> candidates, double eps,
                                            EluderSearch search, std::size_t budget) {
  if (hypotheses.empty()) throw DimensionError("longest_eluder_sequence: no hypotheses");
  if (candidates.size() > 62) {
    throw DimensionError("longest_eluder_sequence: at most 62 candidate actions");
  }
  if (budget < 1) throw DomainError("longest_eluder_sequence: budget must be >= 1");
  if (!(eps > 0.0)) throw DomainError("longest_eluder_sequence: eps must be positive");
  const detail::PairTable table(hypotheses, candidates);
  EluderResult best;
  best.eps_prime = eps;
  std::size_t used = 0;
  const std::vector<double> grid = eps_prime_grid(eps, table.diameter());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double e = grid[g];
    const std::size_t left = budget - used;
    EluderResult r = search == EluderSearch::exhaustive ? detail::exhaustive_at(table, e, left)
                                                        : detail::greedy_at(table, e, left);
    used += r.nodes;
    if (r.length > best.length) {
      best.length = r.length;
      best.sequence = r.sequence;
      best.eps_prime = e;
    }
    best.partial = best.partial || r.partial;
    if (best.partial) break;
    if (used >= budget && g + 1 < grid.size()) {
      best.partial = true;
      break;
    }
  }
  best.nodes = used;
  return best;
}

/// Re-checks each element against its prefix with the direct definition.
inline bool verify_eluder_sequence(std::span<const ClusterHypothesis> hypotheses,
                                   std::span<const ActionQuery> candidates,
                                   std::span<const int> sequence, double eps_prime) {
  std::vector<ActionQuery> prefix;
  for (int idx : sequence) {
    const ActionQuery& q = candidates[static_cast<std::size_t>(idx)];
    if (is_eps_dependent(q, prefix, hypotheses, eps_prime)) return false;
    prefix.push_back(q);
  }
  return true;
}

}  // namespace tssgld
