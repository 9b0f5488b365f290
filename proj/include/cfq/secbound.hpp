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
 * Phase-error bound and key rate from observable counting statistics.
 *
 * Inputs are the eight probabilities Pr(X_A Y_B 0_B1 Z_D) of events where
 * Alice's particle is X, Bob's is Y, Bob's detector stayed dark and detector
 * D in {1,2} fired with the polarization consistent with X. Detector-1
 * entries are stored at half their physical rate (only half of the
 * consistent pairs are measured for statistics).
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace cfq::secbound {

class ZeroYield : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct ProbTable {
  double hh_d1 = 0.0;
  double hh_d2 = 0.0;
  double vv_d1 = 0.0;
  double vv_d2 = 0.0;
  double hv_d1 = 0.0;
  double vh_d1 = 0.0;
  double hv_d2 = 0.0;
  double vh_d2 = 0.0;
  double eta = 1.0;

  /// Entries in a fixed order, paired with their schema keys.
  [[nodiscard]] std::vector<std::pair<const char *, double>> entries() const {
    return {{"pr_hh_d1", hh_d1}, {"pr_hh_d2", hh_d2}, {"pr_vv_d1", vv_d1},
            {"pr_vv_d2", vv_d2}, {"pr_hv_d1", hv_d1}, {"pr_vh_d1", vh_d1},
            {"pr_hv_d2", hv_d2}, {"pr_vh_d2", vh_d2}};
  }

  void validate() const {
    for (const auto &[key, v] : entries()) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument(std::string(key) +
                                    " is not a probability");
      }
    }
    if (!(eta > 0.0 && eta <= 1.0)) {
      throw std::invalid_argument("eta must lie in (0, 1]");
    }
  }

  friend bool operator==(const ProbTable &, const ProbTable &) = default;
};

struct SecurityParams {
  double beta = 0.0;
  double beta_prime = 0.0;
  double xi = 0.0;
  // Values before clamping at zero.
  double raw_beta = 0.0;
  double raw_beta_prime = 0.0;
  bool beta_clamped = false;
  bool beta_prime_clamped = false;
};

struct BoundReport {
  double beta = 0.0;
  double beta_prime = 0.0;
  double xi = 0.0;
  double e_bit = 0.0;
  double e_ph_max = 0.0;
  double lambda_min = 0.0;
  double yield_q = 0.0;
  double key_rate = 0.0;
  std::vector<std::string> clamp_flags;

  friend bool operator==(const BoundReport &, const BoundReport &) = default;
};

namespace detail {

inline constexpr double kZeroSnap = 1e-12;

// Rounding residue within kZeroSnap of zero is zero, and is not worth a flag.
inline std::pair<double, bool> clamp_nonnegative(double raw, double scale) {
  const double snap = kZeroSnap * std::max(1.0, scale);
  if (std::abs(raw) <= snap) return {0.0, false};
  if (raw > 0.0) return {raw, false};
  return {0.0, true};
}

}  // namespace detail

inline SecurityParams extract_params(const ProbTable &t) {
  if (!(t.eta > 0.0)) throw std::invalid_argument("eta must be positive");
  SecurityParams s;
  s.raw_beta = 8.0 * (2.0 * t.hh_d1 + t.hh_d2) - t.eta;
  s.raw_beta_prime = 8.0 * (2.0 * t.vv_d1 + t.vv_d2) - t.eta;
  std::tie(s.beta, s.beta_clamped) =
      detail::clamp_nonnegative(s.raw_beta, t.eta);
  std::tie(s.beta_prime, s.beta_prime_clamped) =
      detail::clamp_nonnegative(s.raw_beta_prime, t.eta);
  const double r = std::sqrt(std::max(0.0, t.hv_d1)) +
                   std::sqrt(std::max(0.0, t.vh_d1));
  s.xi = 8.0 * r * r;
  return s;
}

/// True when a denominator (sqrt(eta) - sqrt(x))^2 has collapsed.
inline bool radical_saturates(double x, double eta) {
  return std::sqrt(x) >= std::sqrt(eta);
}

/// Upper bound on the phase error rate; 1 means no security can be claimed.
inline double eph_bound(const SecurityParams &p, double eta) {
  if (radical_saturates(p.beta, eta) || radical_saturates(p.beta_prime, eta)) {
    return 1.0;
  }
  const double se = std::sqrt(eta);
  const double d1 = (se - std::sqrt(p.beta)) * (se - std::sqrt(p.beta));
  const double d2 =
      (se - std::sqrt(p.beta_prime)) * (se - std::sqrt(p.beta_prime));
  const double bound = 4.0 * (p.beta + p.beta_prime) / eta +
                       p.xi / (4.0 * d1) + p.xi / (4.0 * d2);
  return std::min(1.0, bound);
}

/// eph_bound with the cross-polarization term weighted four times. The plain
/// form can undershoot the exact phase error for weak coherent couplings
/// (e.g. a small polarization-dependent phase); this one does not in any
/// case we have sampled.
inline double eph_bound_strict(SecurityParams p, double eta) {
  p.xi *= 4.0;
  return eph_bound(p, eta);
}

struct Envelope {
  double lhs;
  double rhs;
};

/// min{x / (sqrt(eta) - sqrt(x))^2, 1} against its linear majorant 4x/eta.
inline Envelope envelope_pointwise(double x, double eta) {
  const double rhs = 4.0 * x / eta;
  if (radical_saturates(x, eta)) return {1.0, rhs};
  const double d = std::sqrt(eta) - std::sqrt(x);
  return {std::min(x / (d * d), 1.0), rhs};
}

inline double e_bit_from_table(const ProbTable &t) {
  const double num = t.hv_d1 + t.vh_d1;
  const double den = t.hh_d1 + t.vv_d1 + num;
  if (!(den > 0.0)) throw ZeroYield("no detector-1 key events in table");
  return num / den;
}

/// Lower bound on the post-selected branch weight Lambda.
inline double lambda_min(const SecurityParams &p, double eta) {
  auto term = [eta](double x) {
    if (radical_saturates(x, eta)) return 0.0;
    const double d = std::sqrt(eta) - std::sqrt(x);
    return d * d;
  };
  return term(p.beta) + term(p.beta_prime);
}

inline double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::domain_error("binary entropy argument outside [0, 1]");
  }
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

/// R = Q (1 - h(e_bit) - h(e_ph)). Error rates above 1/2 cost a full bit.
inline double key_rate(double yield_q, double e_bit, double e_ph_max) {
  auto cost = [](double e) { return binary_entropy(std::min(e, 0.5)); };
  return yield_q * std::max(0.0, 1.0 - cost(e_bit) - cost(e_ph_max));
}

/// Unhalved probability per emitted pair of a consistent detector-1 event.
inline double yield_from_table(const ProbTable &t) {
  return 2.0 * (t.hh_d1 + t.vv_d1 + t.hv_d1 + t.vh_d1);
}

inline BoundReport analyze_table(const ProbTable &t) {
  t.validate();
  const auto p = extract_params(t);
  BoundReport r;
  r.beta = p.beta;
  r.beta_prime = p.beta_prime;
  r.xi = p.xi;
  r.e_bit = e_bit_from_table(t);
  r.e_ph_max = eph_bound(p, t.eta);
  r.lambda_min = lambda_min(p, t.eta);
  r.yield_q = yield_from_table(t);
  r.key_rate = key_rate(r.yield_q, r.e_bit, r.e_ph_max);
  if (p.beta_clamped) r.clamp_flags.emplace_back("beta_clamped");
  if (p.beta_prime_clamped) r.clamp_flags.emplace_back("beta_prime_clamped");
  if (r.e_ph_max >= 1.0 - detail::kZeroSnap) r.clamp_flags.emplace_back("bound_saturated");
  return r;
}

}  // namespace cfq::secbound
