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

#include <span>
#include <string>
#include <vector>

#include "tssgld/common.hpp"

namespace tssgld {

struct Observation {
  int round = 0;
  int user = 0;
  int arm = 0;
  int reward = 0;  // 0 or 1

  bool operator==(const Observation&) const = default;
};

/// Append-only history of (round, user, arm, reward).
class ObservationLog {
 public:
  ObservationLog() = default;
  ObservationLog(int n_users, int n_arms) : n_users_(n_users), n_arms_(n_arms) {}

  void append(const Observation& obs) {
    if (obs.user < 0 || obs.user >= n_users_ || obs.arm < 0 || obs.arm >= n_arms_) {
      throw DimensionError("ObservationLog: user/arm out of bounds");
    }
    if (obs.reward != 0 && obs.reward != 1) {
      throw DomainError("ObservationLog: reward must be 0 or 1");
    }
    if (!records_.empty() && obs.round < records_.back().round) {
      throw DomainError("ObservationLog: rounds must be non-decreasing");
    }
    records_.push_back(obs);
  }

  std::span<const Observation> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const Observation& operator[](std::size_t i) const { return records_[i]; }

  int n_users() const { return n_users_; }
  int n_arms() const { return n_arms_; }

 private:
  int n_users_ = 0;
  int n_arms_ = 0;
  std::vector<Observation> records_;
};

}  // namespace tssgld
