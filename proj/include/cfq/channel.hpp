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
 * Channel and eavesdropper models acting on the public mode b.
 *
 * Every channel has two parts:
 *  - a round-trip transmission t for mode b, realized as a beam splitter
 *    into the channel-loss register "closs" with intensity sqrt(t) per pass.
 *    By default t equals Alice's arm-a transmission eta, which keeps the
 *    interferometer balanced;
 *  - optional unitaries on b (x) E applied by Eve on the go pass (after the
 *    loss) and on the return pass (before the loss).
 *
 * Attacks are identical and independent across trials.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "cfq/qstate.hpp"

namespace cfq::channel {

inline const std::string kModeB = "b";
inline const std::string kEve = "E";
inline const std::string kChannelLoss = "closs";

class NoParameterization : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Ideal {};

/// Visibility V and polarization flip probability p.
struct NoiseVP {
  double v = 1.0;
  double p = 0.0;
};

/// Projective {0,H,V} measurement of b on both passes, outcome kept by Eve.
struct InterceptResend {};

/// Arbitrary unitaries on b (x) E, b most significant. With eve_dim == 1 the
/// matrices act on b alone.
struct TwoPassUnitary {
  CMatrix u_go;
  CMatrix u_ret;
  std::size_t eve_dim = 1;
};

struct ChannelSpec {
  std::variant<Ideal, NoiseVP, InterceptResend, TwoPassUnitary> variant;
  /// Round-trip transmission of mode b; empty means "match eta".
  std::optional<double> transmission;

  [[nodiscard]] std::string name() const {
    switch (variant.index()) {
      case 0: return "ideal";
      case 1: return "noise_vp";
      case 2: return "intercept";
      default: return "two_pass";
    }
  }
};

/// A spec resolved against a concrete eta: every operator is built.
struct ChannelModel {
  std::string variant;
  std::size_t eve_dim = 1;
  double transmission = 1.0;
  std::optional<Operator> go;
  std::optional<Operator> ret;
  /// Internal parameters chosen while resolving (for reproducibility).
  std::vector<std::pair<std::string, double>> fitted;

  /// Allocated size of the E register.
  [[nodiscard]] std::size_t register_dim() const {
    return std::max<std::size_t>(2, eve_dim);
  }
};

inline Subsystem eve_register(std::size_t dim) {
  return Subsystem::reg(kEve, std::max<std::size_t>(2, dim), "e");
}

inline std::vector<std::string> eve_targets(std::size_t eve_dim) {
  if (eve_dim <= 1) return {kModeB};
  return {kModeB, kEve};
}

inline ModeLayout eve_layout(std::size_t eve_dim) {
  if (eve_dim <= 1) return ModeLayout{Subsystem::qutrit(kModeB)};
  return ModeLayout{Subsystem::qutrit(kModeB), eve_register(eve_dim)};
}

/// Loss record: empty, lost on the go pass (H, V) or on the return pass
/// (rH, rV). Separate slots keep a lost photon from re-entering b.
inline Subsystem channel_loss_register() {
  return {kChannelLoss, {"0", "H", "V", "rH", "rV"}};
}

enum class Pass { Go, Return };

/// One pass of fiber loss: |X>_b -> tau|X>_b + s|lost X>_closs with
/// tau^2 = sqrt(t); an occupied loss record is left alone.
inline Operator loss_pass_operator(double transmission, Pass pass) {
  if (!(transmission >= 0.0 && transmission <= 1.0)) {
    throw std::invalid_argument("transmission must lie in [0, 1]");
  }
  const double tau = std::pow(transmission, 0.25);
  const double s = std::sqrt(std::max(0.0, 1.0 - tau * tau));
  UnitaryBuilder ub(
      ModeLayout{Subsystem::qutrit(kModeB), channel_loss_register()});
  ub.map({"0", "0"}, {{1.0, {"0", "0"}}});
  for (std::string x : {"H", "V"}) {
    const std::string mine = pass == Pass::Go ? x : "r" + x;
    const std::string other = pass == Pass::Go ? "r" + x : x;
    ub.map({x, "0"}, {{tau, {x, "0"}}, {s, {"0", mine}}});
    ub.map({"0", mine}, {{-s, {x, "0"}}, {tau, {"0", mine}}});
    ub.map({"0", other}, {{1.0, {"0", other}}});
  }
  return Operator::unitary({kModeB, kChannelLoss}, ub.build());
}

namespace detail {

inline Operator intercept_pass(bool go) {
  // E = (go pointer) x (return pointer); each pointer shifts by the b digit.
  const std::size_t d = 9;
  CMatrix u = CMatrix::Zero(27, 27);
  for (std::size_t x = 0; x < 3; ++x) {
    for (std::size_t g = 0; g < 3; ++g) {
      for (std::size_t r = 0; r < 3; ++r) {
        const std::size_t in = x * d + g * 3 + r;
        const std::size_t g2 = go ? (g + x) % 3 : g;
        const std::size_t r2 = go ? r : (r + x) % 3;
        const std::size_t out = x * d + g2 * 3 + r2;
        u(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)) = 1.0;
      }
    }
  }
  return Operator::unitary({kModeB, kEve}, std::move(u));
}

struct NoiseFit {
  double transmission;
  double overlap;
};

// Mismatched-basis detector-1 rate (physical) of the noise construction is
// (1/16)[eta - 2 v sqrt(eta t (1-p)) + t(1-p)]; the target is
// (1/16) 2 eta (1-V)(1-p).
inline NoiseFit fit_noise(double V, double p, double eta,
                          std::optional<double> transmission) {
  double t = transmission.value_or(
      p < 1.0 ? std::min(1.0, eta / (1.0 - p)) : 1.0);
  const double kept = t * (1.0 - p);
  const double target = 2.0 * eta * (1.0 - V) * (1.0 - p);
  if (kept <= 0.0) {
    if (std::abs(eta - target) > 1e-12) {
      throw NoParameterization("no photon survives the flip channel");
    }
    return {t, 1.0};
  }
  const double v = (eta + kept - target) / (2.0 * std::sqrt(eta * kept));
  if (!(v >= -1.0 - 1e-12 && v <= 1.0 + 1e-12)) {
    throw NoParameterization(
        "no visibility/flip channel reproduces V=" + std::to_string(V) +
        ", p=" + std::to_string(p) + " at eta=" + std::to_string(eta) +
        " (required overlap " + std::to_string(v) + ")");
  }
  return {t, std::clamp(v, -1.0, 1.0)};
}

inline Operator noise_return(double p, double v) {
  const double a = std::sqrt(1.0 - p);
  const double f = std::sqrt(p);
  const double w = std::sqrt(std::max(0.0, 1.0 - v * v));
  UnitaryBuilder ub(eve_layout(3));
  ub.map({"0", "e0"}, {{1.0, {"0", "e0"}}});
  ub.map({"H", "e0"},
         {{a * v, {"H", "e0"}}, {a * w, {"H", "e1"}}, {f, {"V", "e2"}}});
  ub.map({"V", "e0"},
         {{a * v, {"V", "e0"}}, {a * w, {"V", "e1"}}, {f, {"H", "e2"}}});
  return Operator::unitary({kModeB, kEve}, ub.build());
}

}  // namespace detail

inline ChannelSpec build_noise_vp(double V, double p) {
  if (!(V >= 0.0 && V <= 1.0) || !(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("V and p must lie in [0, 1]");
  }
  return ChannelSpec{NoiseVP{V, p}, std::nullopt};
}

inline ChannelModel resolve(const ChannelSpec &spec, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("eta must lie in (0, 1]");
  }
  ChannelModel m;
  m.variant = spec.name();
  m.transmission = spec.transmission.value_or(eta);
  std::visit(
      [&](const auto &v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Ideal>) {
          m.eve_dim = 1;
        } else if constexpr (std::is_same_v<T, NoiseVP>) {
          const auto fit = detail::fit_noise(v.v, v.p, eta, spec.transmission);
          m.eve_dim = 3;
          m.transmission = fit.transmission;
          m.ret = detail::noise_return(v.p, fit.overlap);
          m.fitted = {{"transmission", fit.transmission},
                      {"dephasing_overlap", fit.overlap},
                      {"flip_probability", v.p}};
        } else if constexpr (std::is_same_v<T, InterceptResend>) {
          m.eve_dim = 9;
          m.go = detail::intercept_pass(true);
          m.ret = detail::intercept_pass(false);
        } else {
          const auto n = static_cast<Eigen::Index>(3 * v.eve_dim);
          if (v.eve_dim < 1 || v.u_go.rows() != n || v.u_ret.rows() != n) {
            throw DimensionError("two-pass unitaries must be " +
                                 std::to_string(n) + "x" + std::to_string(n));
          }
          m.eve_dim = v.eve_dim;
          m.go = Operator::unitary(eve_targets(v.eve_dim), v.u_go);
          m.ret = Operator::unitary(eve_targets(v.eve_dim), v.u_ret);
        }
      },
      spec.variant);
  if (!(m.transmission >= 0.0 && m.transmission <= 1.0)) {
    throw std::invalid_argument("transmission must lie in [0, 1]");
  }
  return m;
}

namespace detail {

inline StateVec apply_loss(const StateVec &state, double transmission,
                           Pass pass) {
  if (!state.layout().contains(kChannelLoss)) {
    if (transmission < 1.0) {
      throw DimensionError("lossy channel needs a '" + kChannelLoss +
                           "' register");
    }
    return state;
  }
  return apply(loss_pass_operator(transmission, pass), state);
}

inline StateVec apply_eve(const StateVec &state,
                          const std::optional<Operator> &op,
                          std::size_t eve_dim) {
  if (!op) return state;
  if (eve_dim > 1 &&
      state.layout().find(kEve).dim() != eve_dim) {
    throw DimensionError("E register has dim " +
                         std::to_string(state.layout().find(kEve).dim()) +
                         ", channel needs " + std::to_string(eve_dim));
  }
  return apply(*op, state);
}

}  // namespace detail

inline StateVec apply_go(const StateVec &state, const ChannelModel &m) {
  return detail::apply_eve(detail::apply_loss(state, m.transmission, Pass::Go), m.go,
                           m.eve_dim);
}

inline StateVec apply_return(const StateVec &state, const ChannelModel &m) {
  return detail::apply_loss(detail::apply_eve(state, m.ret, m.eve_dim),
                            m.transmission, Pass::Return);
}

/// Block-diagonal unitary on b (x) E: identity on b for the vacuum block
/// (Eve may still rotate her ancilla), arbitrary on the one-photon block.
/// strength in (0, 1] takes the matching fractional power of each Haar
/// sample; 1 is plain Haar.
inline CMatrix random_block_unitary(Rng &rng, std::size_t eve_dim,
                                    double strength) {
  const auto d = static_cast<Eigen::Index>(eve_dim);
  CMatrix u = CMatrix::Zero(3 * d, 3 * d);
  if (eve_dim > 1) {
    u.topLeftCorner(d, d) = unitary_power(random_unitary(eve_dim, rng), strength);
  } else {
    u(0, 0) = 1.0;
  }
  u.bottomRightCorner(2 * d, 2 * d) =
      unitary_power(random_unitary(2 * eve_dim, rng), strength);
  return u;
}

inline ChannelSpec random_compliant_attack(Rng &rng, std::size_t eve_dim,
                                           double strength = 1.0) {
  if (eve_dim < 1) throw std::invalid_argument("eve_dim must be >= 1");
  if (!(strength > 0.0 && strength <= 1.0)) {
    throw std::invalid_argument("strength must lie in (0, 1]");
  }
  TwoPassUnitary t;
  t.eve_dim = eve_dim;
  t.u_go = random_block_unitary(rng, eve_dim, strength);
  t.u_ret = random_block_unitary(rng, eve_dim, strength);
  return ChannelSpec{std::move(t), std::nullopt};
}

}  // namespace cfq::channel
