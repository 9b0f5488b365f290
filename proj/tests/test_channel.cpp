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

#include <gtest/gtest.h>

#include <cmath>

#include "cfq/analysis.hpp"
#include "cfq/channel.hpp"
#include "cfq/compliance.hpp"
#include "test_support.hpp"

namespace {

using namespace cfq;
using channel::ChannelSpec;
using testing_support::as_array;
using testing_support::oracle_attack;

ModeLayout b_e_closs(std::size_t eve_dim) {
  return ModeLayout{Subsystem::qutrit("b"), channel::eve_register(eve_dim),
                    channel::channel_loss_register()};
}

ChannelSpec ideal() { return {channel::Ideal{}, std::nullopt}; }
ChannelSpec intercept() { return {channel::InterceptResend{}, std::nullopt}; }

TEST(Channel, IdealIsIdentityAtUnitTransmission) {
  const auto l = b_e_closs(2);
  const auto m = channel::resolve(ideal(), 1.0);
  for (const std::string x : {"0", "H", "V"}) {
    const auto s = basis_state(l, {x, "e0", "0"});
    EXPECT_LT((channel::apply_go(s, m).amps() - s.amps()).cwiseAbs().maxCoeff(),
              1e-15);
    EXPECT_LT(
        (channel::apply_return(s, m).amps() - s.amps()).cwiseAbs().maxCoeff(),
        1e-15);
  }
}

TEST(Channel, InterceptRecordsOutcomeInPointer) {
  const auto m = channel::resolve(intercept(), 1.0);
  const auto l = b_e_closs(9);
  const auto out = channel::apply_go(basis_state(l, {"H", "e0", "0"}), m);
  // Go pointer shifted by one (H), return pointer untouched: e(1*3+0).
  EXPECT_NEAR(std::abs(out.amplitude({"H", "e3", "0"})), 1.0, 1e-15);
  const auto vac = channel::apply_go(basis_state(l, {"0", "e0", "0"}), m);
  EXPECT_NEAR(std::abs(vac.amplitude({"0", "e0", "0"})), 1.0, 1e-15);
}

TEST(Channel, IdentityTwoPassMatchesIdeal) {
  for (std::size_t d : {1u, 3u}) {
    const auto n = static_cast<Eigen::Index>(3 * d);
    ChannelSpec id{channel::TwoPassUnitary{CMatrix::Identity(n, n),
                                           CMatrix::Identity(n, n), d},
                   std::nullopt};
    const auto a = analyze_channel(id, 0.8);
    const auto b = analyze_channel(ideal(), 0.8);
    const auto x = as_array(a.table), y = as_array(b.table);
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(x[k], y[k], 1e-15);
  }
}

TEST(Channel, BuiltOperatorsAreUnitary) {
  Rng rng(4);
  std::vector<ChannelSpec> specs{ideal(), intercept(),
                                 channel::build_noise_vp(0.98, 0.0),
                                 channel::build_noise_vp(0.9, 0.2),
                                 channel::random_compliant_attack(rng, 3)};
  for (const auto &s : specs) {
    const auto m = channel::resolve(s, 0.7);
    for (const auto *op : {&m.go, &m.ret}) {
      if (*op) EXPECT_TRUE(is_unitary((*op)->matrix()));
    }
    for (auto pass : {channel::Pass::Go, channel::Pass::Return}) {
      EXPECT_TRUE(is_unitary(
          channel::loss_pass_operator(m.transmission, pass).matrix()));
    }
  }
}

TEST(Channel, TwoPassDimensionMismatch) {
  ChannelSpec bad{channel::TwoPassUnitary{CMatrix::Identity(6, 6),
                                          CMatrix::Identity(6, 6), 3},
                  std::nullopt};
  EXPECT_THROW(channel::resolve(bad, 1.0), DimensionError);
}

TEST(NoiseVP, ReproducesTargetTable) {
  for (double eta : {1.0, 0.8, 0.5}) {
    for (auto [v, p] : {std::pair{0.98, 0.0}, {0.9, 0.1}, {0.95, 0.3}}) {
      const auto t = analyze_channel(channel::build_noise_vp(v, p), eta).table;
      EXPECT_NEAR(t.hh_d1, eta / 32, 1e-9);
      EXPECT_NEAR(t.vv_d1, eta / 32, 1e-9);
      EXPECT_NEAR(t.hh_d2, eta / 16, 1e-9);
      EXPECT_NEAR(t.vv_d2, eta / 16, 1e-9);
      EXPECT_NEAR(t.hv_d1, (1 - v) * (1 - p) * eta / 16, 1e-9);
      EXPECT_NEAR(t.vh_d1, (1 - v) * (1 - p) * eta / 16, 1e-9);
    }
  }
}

TEST(NoiseVP, Examples) {
  const auto t = analyze_channel(channel::build_noise_vp(0.98, 0.0), 1.0).table;
  EXPECT_NEAR(secbound::e_bit_from_table(t), 0.0385, 5e-5);
  EXPECT_NEAR(t.hv_d1, 0.02 / 16, 1e-12);

  const auto a = as_array(analyze_channel(channel::build_noise_vp(1, 0), 0.6).table);
  const auto b = as_array(analyze_channel(ideal(), 0.6).table);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
}

TEST(NoiseVP, InfeasibleAndInvalid) {
  EXPECT_THROW(channel::resolve(channel::build_noise_vp(1.0, 0.5), 1.0),
               channel::NoParameterization);
  EXPECT_THROW(channel::build_noise_vp(1.2, 0.0), std::invalid_argument);
  EXPECT_THROW(channel::build_noise_vp(0.9, -0.1), std::invalid_argument);
}

TEST(Compliance, Examples) {
  for (const auto &s : {ideal(), intercept()}) {
    const auto c = channel::compliance_check(s, 1.0);
    EXPECT_EQ(c.vacuum_injection_prob, 0.0);
    EXPECT_EQ(c.double_click_prob, 0.0);
    EXPECT_TRUE(c.compliant);
  }
  UnitaryBuilder ub(channel::eve_layout(2));
  ub.map({"0", "e0"}, {{1.0, {"H", "e1"}}});
  const auto u = ub.build();
  ChannelSpec inject{channel::TwoPassUnitary{u, CMatrix::Identity(6, 6), 2},
                     std::nullopt};
  const auto c = channel::compliance_check(inject, 1.0);
  EXPECT_GT(c.vacuum_injection_prob, 0.1);
  EXPECT_FALSE(c.compliant);
}

TEST(Compliance, RandomAttacksAreCompliant) {
  Rng rng(21);
  for (int k = 0; k < 20; ++k) {
    const auto s = channel::random_compliant_attack(rng, 1 + k % 4);
    const auto c = channel::compliance_check(s, k % 2 ? 1.0 : 0.6);
    ASSERT_TRUE(c.compliant) << k;
    ASSERT_LT(c.vacuum_injection_prob, 1e-12);
    ASSERT_LT(c.double_click_prob, 1e-12);
  }
}

void expect_matches_oracle(const ChannelSpec &spec, double eta) {
  const auto a = analyze_channel(spec, eta);
  const auto o = oracle_attack(spec, eta);
  const auto mine = as_array(a.table);
  const auto ref = oracle::prob_table(o, eta);
  for (std::size_t k = 0; k < 8; ++k) ASSERT_NEAR(mine[k], ref[k], 1e-12) << k;
  const auto kb = oracle::key_branch(o, eta);
  ASSERT_TRUE(a.rho_prime.has_value());
  EXPECT_NEAR(a.rho_prime->lambda, kb.lambda, 1e-12);
  EXPECT_NEAR(a.exact->e_bit, kb.e_bit, 1e-10);
  EXPECT_NEAR(a.exact->e_ph, kb.e_ph, 1e-10);
}

TEST(Oracle, PolarizationRotationChannel) {
  Rng rng(31);
  for (int k = 0; k < 10; ++k) {
    expect_matches_oracle(channel::random_compliant_attack(rng, 1),
                          k % 2 ? 1.0 : 0.7);
  }
}

TEST(Oracle, EntanglingAttacks) {
  Rng rng(37);
  for (int k = 0; k < 12; ++k) {
    expect_matches_oracle(channel::random_compliant_attack(rng, 2 + k % 3),
                          k % 3 ? 1.0 : 0.55);
  }
}

TEST(Oracle, InterceptAndIdeal) {
  for (double eta : {1.0, 0.6}) {
    expect_matches_oracle(intercept(), eta);
    expect_matches_oracle(ideal(), eta);
  }
}

TEST(Oracle, ExplicitTransmission) {
  ChannelSpec s{channel::Ideal{}, 0.3};
  expect_matches_oracle(s, 0.9);
}

TEST(Intercept, IsDetectedByCountingRates) {
  const auto a = analyze_channel(intercept(), 1.0);
  EXPECT_GT(a.exact->e_bit, 0.0);
  const auto p = secbound::extract_params(a.table);
  EXPECT_GT(p.beta + p.beta_prime + p.xi, 0.0);
  // Regression constants from the path oracle.
  EXPECT_NEAR(a.exact->e_bit, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(a.exact->e_ph, 1.0 / 6.0, 1e-12);
}

TEST(Attacks, EveryAttackShiftsRatesOrHasNoPhaseError) {
  Rng rng(41);
  const auto ideal_table = as_array(analyze_channel(ideal(), 1.0).table);
  for (int k = 0; k < 30; ++k) {
    const auto a =
        analyze_channel(channel::random_compliant_attack(rng, 1 + k % 4), 1.0);
    const auto t = as_array(a.table);
    double shift = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      shift = std::max(shift, std::abs(t[i] - ideal_table[i]));
    }
    ASSERT_TRUE(shift > 1e-12 || a.exact->e_ph < 1e-12) << k;
  }
}

}  // namespace
