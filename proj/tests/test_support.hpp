// Copyright 2026 The cfq Authors.

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Helpers shared by the test binaries.

#pragma once

#include <array>
#include <variant>
#include <vector>

#include "cfq/channel.hpp"
#include "cfq/secbound.hpp"
#include "path_oracle.hpp"

namespace testing_support {

inline std::vector<oracle::C> row_major(const cfq::CMatrix &m) {
  std::vector<oracle::C> v;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) v.push_back(m(i, k));
  }
  return v;
}

/// Oracle attack for a spec with the balanced default transmission.
inline oracle::Attack oracle_attack(const cfq::channel::ChannelSpec &spec,
                                    double eta) {
  const double t = spec.transmission.value_or(eta);
  if (std::holds_alternative<cfq::channel::Ideal>(spec.variant)) {
    return oracle::ideal(t);
  }
  if (std::holds_alternative<cfq::channel::InterceptResend>(spec.variant)) {
    return oracle::intercept(t);
  }
  const auto &u = std::get<cfq::channel::TwoPassUnitary>(spec.variant);
  return oracle::from_unitaries(u.eve_dim, row_major(u.u_go),
                                row_major(u.u_ret), t);
}

inline std::array<double, 8> as_array(const cfq::secbound::ProbTable &t) {
  return {t.hh_d1, t.hh_d2, t.vv_d1, t.vv_d2,
          t.hv_d1, t.vh_d1, t.hv_d2, t.vh_d2};
}

}  // namespace testing_support
