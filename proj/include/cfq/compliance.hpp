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

// Compliance of a channel with the two detector assumptions: no photon is
// created in the empty channel, and no two detectors fire in one trial.

#pragma once

#include <algorithm>
#include <string>

#include "cfq/channel.hpp"
#include "cfq/edp.hpp"

namespace cfq::channel {

inline constexpr double kComplianceTol = 1e-9;

struct ComplianceReport {
  double vacuum_injection_prob = 0.0;
  double double_click_prob = 0.0;
  bool compliant = true;
};

/// Detector double-click weight on the final EDP register.
inline double double_click_weight(const StateVec &s) {
  const auto &l = s.layout();
  using edp::kB1, edp::kOut1, edp::kOut2;
  const double bob_and_alice = weight(
      s, diagonal_projector(l, {kB1, kOut1, kOut2}, [](const auto &x) {
        return x[0] != "0" && (x[1] != "0" || x[2] != "0");
      }));
  const double both_ports = weight(
      s, diagonal_projector(l, {kOut1, kOut2}, [](const auto &x) {
        return x[0] != "0" && x[1] != "0";
      }));
  return bob_and_alice + both_ports;
}

inline ComplianceReport compliance_from(const edp::PipelineResult &r) {
  ComplianceReport c;
  c.vacuum_injection_prob = std::min(1.0, r.go_injection + r.return_injection);
  c.double_click_prob = std::min(1.0, double_click_weight(r.state));
  c.compliant = c.vacuum_injection_prob < kComplianceTol &&
                c.double_click_prob < kComplianceTol;
  return c;
}

inline ComplianceReport compliance_check(const ChannelSpec &spec, double eta) {
  return compliance_from(edp::run_pipeline(spec, edp::EdpConfig{eta}));
}

}  // namespace cfq::channel
