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

// One-shot exact analysis of a channel: pipeline, compliance, observable
// table, exact error rates of the key branch and the observable bound.

#pragma once

#include <optional>
#include <string>

#include "cfq/channel.hpp"
#include "cfq/compliance.hpp"
#include "cfq/edp.hpp"
#include "cfq/secbound.hpp"

namespace cfq {

struct Analysis {
  channel::ChannelModel model;
  edp::PipelineResult pipeline;
  channel::ComplianceReport compliance;
  secbound::ProbTable table;
  // Empty when the key branch has zero weight.
  std::optional<edp::RhoPrime> rho_prime;
  std::optional<edp::ErrorRates> exact;
  std::optional<secbound::BoundReport> report;
};

inline Analysis analyze_channel(const channel::ChannelSpec &spec, double eta) {
  auto model = channel::resolve(spec, eta);
  auto pipeline = edp::run_pipeline(model, edp::EdpConfig{eta});
  Analysis a{std::move(model), pipeline, channel::compliance_from(pipeline),
             edp::observable_probs(pipeline), {}, {}, {}};
  try {
    a.rho_prime = edp::postselect_key_branch(a.pipeline);
    a.exact = edp::bell_error_rates(*a.rho_prime);
    a.report = secbound::analyze_table(a.table);
  } catch (const secbound::ZeroYield &) {
    a.rho_prime.reset();
    a.exact.reset();
    a.report.reset();
  }
  return a;
}

/// Closed form quoted for the phase error of the visibility/flip channel.
inline double closed_form_phase_error(double v, double p) {
  return (1.0 - v) * (1.0 - p) / 2.0;
}

/// Closed form of the bit error of the visibility/flip channel.
inline double closed_form_bit_error(double v, double p) {
  const double x = 2.0 * (1.0 - v) * (1.0 - p);
  return x / (1.0 + x);
}

}  // namespace cfq
