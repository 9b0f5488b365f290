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
/**
 * @file
 * Exact model of the entanglement-distillation form of the protocol.
 *
 * Register, in canonical order:
 *
 *   A     qubit  {H,V}      Alice's reference particle
 *   a     qutrit {0,H,V}    Alice's protected arm
 *   b     qutrit {0,H,V}    public channel arm
 *   B     qubit  {H,V}      Bob's reference particle
 *   B1    qutrit {0,H,V}    Bob's detection record (non-vacuum = D3 click)
 *   E     e0..e{d-1}        Eve's ancilla
 *   loss  qutrit {0,H,V}    photon lost from arm a
 *   closs {0,H,V,rH,rV}     photon lost in the channel (go / return pass)
 *   cons  {a0,a1,a2}        Alice's polarization-consistency ancilla
 *
 * Recombination at Alice's beam splitter renames (a, b) to the output modes
 * (m1, m2). Pipeline order:
 *
 *   prepare -> channel go -> Bob filter -> U_Bob -> channel return
 *           -> Alice filter -> recombine -> U_A
 *
 * Every step is unitary; the filters are projections that are the identity
 * on the modeled Hilbert space.
 */

#pragma once

#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cfq/channel.hpp"
#include "cfq/qstate.hpp"
#include "cfq/secbound.hpp"

namespace cfq::edp {

using secbound::ProbTable;

inline const std::string kA = "A";
inline const std::string kArmA = "a";
inline const std::string kArmB = "b";
inline const std::string kB = "B";
inline const std::string kB1 = "B1";
inline const std::string kLoss = "loss";
inline const std::string kCons = "cons";
inline const std::string kOut1 = "m1";
inline const std::string kOut2 = "m2";

class PipelineError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct EdpConfig {
  double eta = 1.0;

  void validate() const {
    if (!(eta > 0.0 && eta <= 1.0)) {
      throw std::invalid_argument("eta must lie in (0, 1]");
    }
  }
};

inline StateVec alice_initial(const EdpConfig &config) {
  config.validate();
  ModeLayout l{Subsystem::qubit(kA), Subsystem::qutrit(kArmA),
               Subsystem::qutrit(kArmB)};
  CVector v = CVector::Zero(static_cast<Eigen::Index>(l.total_dim()));
  auto at = [&](std::initializer_list<std::string> labels) -> Complex & {
    return v[static_cast<Eigen::Index>(index_of(l, labels))];
  };
  // (1/sqrt2)|0>_Aa|0>_b with |0>_Aa = i(|HH> + |VV>)/sqrt2, plus
  // (1/2)|X>_A|0>_a|X>_b.
  at({"H", "H", "0"}) = 0.5 * kI;
  at({"V", "V", "0"}) = 0.5 * kI;
  at({"H", "0", "H"}) = 0.5;
  at({"V", "0", "V"}) = 0.5;
  return StateVec(std::move(l), std::move(v));
}

inline StateVec bob_initial() {
  ModeLayout l{Subsystem::qubit(kB), Subsystem::qutrit(kB1)};
  const double r = 1.0 / std::sqrt(2.0);
  return r * basis_state(l, {"H", "0"}) + r * basis_state(l, {"V", "0"});
}

/// Full initial register with every ancilla in its ground state.
inline StateVec initial_register(const EdpConfig &config,
                                 std::size_t eve_register_dim) {
  const auto single = [](Subsystem s, const std::string &label) {
    ModeLayout l{std::move(s)};
    return basis_state(l, {label});
  };
  return tensor({alice_initial(config), bob_initial(),
                 single(channel::eve_register(eve_register_dim), "e0"),
                 single(Subsystem::qutrit(kLoss), "0"),
                 single(channel::channel_loss_register(), "0"),
                 single(Subsystem::reg(kCons, 3, "a"), "a0")});
}

struct Filtered {
  StateVec kept;
  double abort_prob;
};

/// Projects `mode` onto span{|0>,|H>,|V>}. Any other population of the mode
/// is what the filter detects (and the protocol aborts on).
inline Filtered trojan_filter(const StateVec &state, const std::string &mode) {
  auto proj = diagonal_projector(state.layout(), {mode}, [](const auto &l) {
    return l[0] == "0" || l[0] == "H" || l[0] == "V";
  });
  auto [kept, prob] = project(state, proj);
  return {std::move(kept), 1.0 - prob};
}

inline Operator u_bob_operator() {
  UnitaryBuilder ub(ModeLayout{Subsystem::qubit(kB), Subsystem::qutrit(kB1),
                               Subsystem::qutrit(kArmB)});
  for (std::string x : {"H", "V"}) {
    // Bob's detector takes the photon whose polarization matches his
    // particle and leaves everything else in b.
    for (std::string y : {"0", "H", "V"}) {
      if (y == x) continue;
      ub.map({x, "0", y}, {{1.0, {x, "0", y}}});
    }
    ub.map({x, "0", x}, {{1.0, {x, x, "0"}}});
    ub.map({x, x, "0"}, {{1.0, {x, "0", x}}});
  }
  return Operator::unitary({kB, kB1, kArmB}, ub.build());
}

inline StateVec u_bob(const StateVec &state) {
  return apply(u_bob_operator(), state);
}

/// Alice's beam splitter on (a, b) with arm-a transmission eta:
///   a -> sqrt(eta)(i m1 + m2)/sqrt2 + sqrt(1-eta) loss
///   b -> (m1 + i m2)/sqrt2
inline Operator recombine_operator(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("eta must lie in [0, 1]");
  }
  const double r = 1.0 / std::sqrt(2.0);
  const double se = std::sqrt(eta);
  const double sl = std::sqrt(1.0 - eta);
  UnitaryBuilder ub(ModeLayout{Subsystem::qutrit(kArmA),
                               Subsystem::qutrit(kArmB),
                               Subsystem::qutrit(kLoss)});
  ub.map({"0", "0", "0"}, {{1.0, {"0", "0", "0"}}});
  for (std::string x : {"H", "V"}) {
    ub.map({x, "0", "0"},
           {{se * r * kI, {x, "0", "0"}}, {se * r, {"0", x, "0"}},
            {sl, {"0", "0", x}}});
    ub.map({"0", x, "0"}, {{r, {x, "0", "0"}}, {r * kI, {"0", x, "0"}}});
  }
  return Operator::unitary({kArmA, kArmB, kLoss}, ub.build());
}

inline StateVec recombine(const StateVec &state, double eta) {
  if (!state.layout().contains(kArmA) || !state.layout().contains(kArmB)) {
    throw PipelineError("recombine needs modes a and b (already applied?)");
  }
  StateVec out = apply(recombine_operator(eta), state);
  return out.with_layout(
      out.layout().renamed(kArmA, kOut1).renamed(kArmB, kOut2));
}

inline Operator u_a_operator() {
  UnitaryBuilder ub(ModeLayout{Subsystem::qubit(kA), Subsystem::qutrit(kOut1),
                               Subsystem::reg(kCons, 3, "a")});
  for (std::string x : {"H", "V"}) {
    ub.map({x, "0", "a0"}, {{1.0, {x, "0", "a0"}}});
    for (std::string y : {"H", "V"}) {
      const std::string flag = (x == y) ? "a1" : "a2";
      ub.map({x, y, "a0"}, {{1.0, {x, y, flag}}});
      ub.map({x, y, flag}, {{1.0, {x, y, "a0"}}});
    }
  }
  return Operator::unitary({kA, kOut1, kCons}, ub.build());
}

inline StateVec u_a_consistency(const StateVec &state) {
  if (!state.layout().contains(kOut1)) {
    throw PipelineError("consistency check runs after recombination");
  }
  return apply(u_a_operator(), state);
}

/// Photon-number weight with both a and b occupied (never happens without
/// photon injection into the vacuum branch).
inline double double_occupancy(const StateVec &state) {
  return weight(state, diagonal_projector(state.layout(), {kArmA, kArmB},
                                          [](const auto &l) {
                                            return l[0] != "0" && l[1] != "0";
                                          }));
}

struct PipelineResult {
  StateVec state;  // after U_A
  double eta = 1.0;
  double bob_abort = 0.0;
  double alice_abort = 0.0;
  double go_injection = 0.0;
  double return_injection = 0.0;
};

inline PipelineResult run_pipeline(const channel::ChannelModel &model,
                                   const EdpConfig &config) {
  config.validate();
  PipelineResult r{initial_register(config, model.register_dim()), config.eta};
  StateVec s = channel::apply_go(r.state, model);
  r.go_injection = double_occupancy(s);
  auto bob = trojan_filter(s, kArmB);
  r.bob_abort = bob.abort_prob;
  s = u_bob(bob.kept);
  s = channel::apply_return(s, model);
  r.return_injection = double_occupancy(s);
  auto alice = trojan_filter(s, kArmB);
  r.alice_abort = alice.abort_prob;
  s = recombine(alice.kept, config.eta);
  r.state = u_a_consistency(s);
  return r;
}

inline PipelineResult run_pipeline(const channel::ChannelSpec &spec,
                                   const EdpConfig &config) {
  return run_pipeline(channel::resolve(spec, config.eta), config);
}

/// Builds a vector over `layout` from (subsystem -> label) assignments;
/// unspecified subsystems must be absent.
inline CVector labeled_vector(
    const ModeLayout &layout,
    const std::vector<std::pair<Complex, std::map<std::string, std::string>>>
        &terms) {
  CVector v = CVector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
  for (const auto &[c, assignment] : terms) {
    std::vector<std::string> labels;
    for (const auto &s : layout.subsystems()) labels.push_back(assignment.at(s.name));
    v[static_cast<Eigen::Index>(index_of(layout, labels))] += c;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Observables

/// Pr(X_A Y_B 0_B1 Z_D) with Z = X. Detector-1 entries come from the
/// consistency ancilla (cons = a1, m2 empty) and are halved; detector-2
/// entries are direct projections with m1 empty.
/// Weights at or below this are rounding residue and reported as zero.
inline constexpr double kNumericalZero = 1e-15;

inline ProbTable observable_probs(const PipelineResult &r) {
  const auto &layout = r.state.layout();
  auto snap = [](double w) { return w <= kNumericalZero ? 0.0 : w; };
  auto d1 = [&](const std::string &x, const std::string &y) {
    return 0.5 * snap(weight(r.state, basis_projector(layout, {kA, kB, kB1, kOut2, kCons},
                                                      {x, y, "0", "0", "a1"})));
  };
  auto d2 = [&](const std::string &x, const std::string &y) {
    return snap(weight(r.state, basis_projector(layout, {kA, kB, kB1, kOut1, kOut2},
                                                {x, y, "0", "0", x})));
  };
  ProbTable t;
  t.eta = r.eta;
  t.hh_d1 = d1("H", "H");
  t.hh_d2 = d2("H", "H");
  t.vv_d1 = d1("V", "V");
  t.vv_d2 = d2("V", "V");
  t.hv_d1 = d1("H", "V");
  t.vh_d1 = d1("V", "H");
  t.hv_d2 = d2("H", "V");
  t.vh_d2 = d2("V", "H");
  return t;
}

struct RhoPrime {
  DensityOp rho;        // normalized, on A, m1, B (layout order)
  double lambda = 0.0;  // 16 x branch probability
  double branch_prob = 0.0;
};

/// Key branch: Bob's record empty, mode 2 empty, consistency ancilla a1.
inline RhoPrime postselect_key_branch(const PipelineResult &r) {
  const auto &layout = r.state.layout();
  auto proj = basis_projector(layout, {kOut2, kB1, kCons}, {"0", "0", "a1"});
  const double w = weight(r.state, proj);
  if (w <= kNumericalZero) {
    throw secbound::ZeroYield("key branch probability below 1e-15");
  }
  StateVec branch = apply(proj, r.state);
  DensityOp rho = reduced_density(branch, {kA, kB, kOut1});
  return {DensityOp(rho.layout(), rho.matrix() / w), 16.0 * w, w};
}

enum class Bell { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

/// Bell-type vectors on A (x) B (x) m1, mode 1 carrying A's polarization.
inline CVector bell_vector(const ModeLayout &layout, Bell which) {
  const double r = 1.0 / std::sqrt(2.0);
  const bool phi = which == Bell::PhiPlus || which == Bell::PhiMinus;
  const double sign =
      (which == Bell::PhiPlus || which == Bell::PsiPlus) ? 1.0 : -1.0;
  const std::string b_for_h = phi ? "H" : "V";
  const std::string b_for_v = phi ? "V" : "H";
  return labeled_vector(
      layout, {{r, {{kA, "H"}, {kB, b_for_h}, {kOut1, "H"}}},
               {sign * r, {{kA, "V"}, {kB, b_for_v}, {kOut1, "V"}}}});
}

struct ErrorRates {
  double e_bit = 0.0;
  double e_ph = 0.0;
  std::array<double, 4> bell_weights{};  // phi+, phi-, psi+, psi-
};

inline ErrorRates bell_error_rates(const RhoPrime &rp) {
  ErrorRates e;
  const auto &layout = rp.rho.layout();
  for (int k = 0; k < 4; ++k) {
    e.bell_weights[static_cast<std::size_t>(k)] =
        rp.rho.expectation(bell_vector(layout, static_cast<Bell>(k)));
  }
  const auto &w = e.bell_weights;
  e.e_bit = std::clamp(w[2] + w[3], 0.0, 1.0);
  e.e_ph = std::clamp(w[1] + w[3], 0.0, 1.0);
  return e;
}

}  // namespace cfq::edp
