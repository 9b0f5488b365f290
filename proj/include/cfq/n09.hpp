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
 * Prepare-and-measure Monte Carlo of the counterfactual protocol.
 *
 * A trial draws Alice's and Bob's bits, propagates the photon through the
 * go pass, Bob's projective detection, the return pass and Alice's beam
 * splitter, then Born-samples the detectors. The branch structure for each
 * bit pair is computed once from the same stage functions used for single
 * trials; sampling then only selects branches.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cfq/channel.hpp"
#include "cfq/compliance.hpp"
#include "cfq/edp.hpp"
#include "cfq/qstate.hpp"
#include "cfq/secbound.hpp"

namespace cfq::n09 {

class ComplianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Outcome { D1, D2, D3, NoClick, Lost };

struct Click {
  Outcome outcome = Outcome::NoClick;
  char polarization = 0;  // 'H', 'V', or 0 when no detector fired

  [[nodiscard]] std::string label() const {
    switch (outcome) {
      case Outcome::D1: return std::string("D1(") + polarization + ")";
      case Outcome::D2: return std::string("D2(") + polarization + ")";
      case Outcome::D3: return std::string("D3(") + polarization + ")";
      case Outcome::NoClick: return "no_click";
      case Outcome::Lost: return "lost";
    }
    return "?";
  }

  static Click parse(const std::string &s) {
    if (s == "no_click") return {Outcome::NoClick, 0};
    if (s == "lost") return {Outcome::Lost, 0};
    if (s.size() == 5 && s[0] == 'D' && s[2] == '(' && s[4] == ')' &&
        (s[3] == 'H' || s[3] == 'V')) {
      const Outcome o = s[1] == '1'   ? Outcome::D1
                        : s[1] == '2' ? Outcome::D2
                        : s[1] == '3' ? Outcome::D3
                                      : Outcome::NoClick;
      if (o != Outcome::NoClick) return {o, s[3]};
    }
    throw std::invalid_argument("unknown outcome label '" + s + "'");
  }

  friend bool operator==(const Click &, const Click &) = default;
};

struct TrialRecord {
  std::uint64_t trial_index = 0;
  int alice_bit = 0;
  int bob_bit = 0;
  Click click;
};

inline std::string polarization_of(int bit) {
  if (bit != 0 && bit != 1) throw std::invalid_argument("bit must be 0 or 1");
  return bit == 0 ? "H" : "V";
}

/// (i|X>_a|0>_b + |0>_a|X>_b)/sqrt2 with X = H for 0 and V for 1.
inline StateVec encode(int bit) {
  const std::string x = polarization_of(bit);
  const ModeLayout l{Subsystem::qutrit(edp::kArmA),
                     Subsystem::qutrit(edp::kArmB)};
  const double r = 1.0 / std::sqrt(2.0);
  return Complex(0.0, r) * basis_state(l, {x, "0"}) +
         Complex(r, 0.0) * basis_state(l, {"0", x});
}

/// encode(bit) with Eve's ancilla and both loss records attached.
inline StateVec trial_register(int bit, std::size_t eve_register_dim) {
  auto one = [](Subsystem s, const std::string &label) {
    ModeLayout l{std::move(s)};
    return basis_state(l, {label});
  };
  return tensor({encode(bit), one(channel::eve_register(eve_register_dim), "e0"),
                 one(channel::channel_loss_register(), "0"),
                 one(Subsystem::qutrit(edp::kLoss), "0")});
}

// ---------------------------------------------------------------------------
// Stages

struct BobSplit {
  Branch click;   // photon in b with Bob's polarization
  Branch passed;  // everything else, reflected back
};

inline BobSplit bob_branches(const StateVec &state, int bob_bit) {
  const auto &l = state.layout();
  const std::string x = polarization_of(bob_bit);
  auto click = project(state, basis_projector(l, {edp::kArmB}, {x}));
  auto passed = project(state, diagonal_projector(l, {edp::kArmB},
                                                  [&](const auto &v) {
                                                    return v[0] != x;
                                                  }));
  return {std::move(click), std::move(passed)};
}

struct BobResult {
  StateVec state;
  std::optional<char> d3;
};

inline BobResult bob_measure(const StateVec &state, int bob_bit, Rng &rng) {
  auto split = bob_branches(state, bob_bit);
  const std::array<double, 2> probs{split.click.prob, split.passed.prob};
  if (sample_index(probs, rng) == 0) {
    return {split.click.branch.normalized(), polarization_of(bob_bit)[0]};
  }
  return {split.passed.branch.normalized(), std::nullopt};
}

struct Leaf {
  Click click;
  double prob;
};

/// Recombines and lists detector outcomes with their probabilities
/// (relative to the input norm).
inline std::vector<Leaf> detect_branches(const StateVec &state, double eta) {
  const StateVec s = edp::recombine(state, eta);
  const auto &l = s.layout();
  const double norm = s.norm2();
  if (!(norm > 0.0)) throw StateError("cannot detect on a zero state");
  auto w = [&](std::vector<std::string> targets,
               std::function<bool(const std::vector<std::string> &)> keep) {
    return weight(s, diagonal_projector(l, std::move(targets), keep)) / norm;
  };
  std::vector<Leaf> leaves;
  for (const char x : {'H', 'V'}) {
    const std::string xs(1, x);
    leaves.push_back({{Outcome::D1, x}, w({edp::kOut1}, [&](const auto &v) {
                        return v[0] == xs;
                      })});
    leaves.push_back({{Outcome::D2, x},
                      w({edp::kOut1, edp::kOut2}, [&](const auto &v) {
                        return v[0] == "0" && v[1] == xs;
                      })});
  }
  const std::vector<std::string> dark{edp::kOut1, edp::kOut2, edp::kLoss,
                                      channel::kChannelLoss};
  leaves.push_back({{Outcome::Lost, 0}, w(dark, [](const auto &v) {
                      return v[0] == "0" && v[1] == "0" &&
                             (v[2] != "0" || v[3] != "0");
                    })});
  leaves.push_back({{Outcome::NoClick, 0}, w(dark, [](const auto &v) {
                      return v[0] == "0" && v[1] == "0" && v[2] == "0" &&
                             v[3] == "0";
                    })});
  return leaves;
}

inline std::vector<double> leaf_probs(const std::vector<Leaf> &leaves) {
  std::vector<double> p;
  p.reserve(leaves.size());
  for (const auto &leaf : leaves) p.push_back(leaf.prob);
  return p;
}

inline Click interfere_detect(const StateVec &state, double eta, Rng &rng) {
  const auto leaves = detect_branches(state, eta);
  return leaves[sample_index(leaf_probs(leaves), rng)].click;
}

// ---------------------------------------------------------------------------
// Session

struct SessionConfig {
  std::uint64_t n_trials = 1;
  double eta = 1.0;
  channel::ChannelSpec channel;
  std::uint64_t rng_seed = 0;
  /// Trials between progress callbacks; 0 disables them.
  std::uint64_t report_interval = 0;

  void validate() const {
    if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
    if (!(eta > 0.0 && eta <= 1.0)) {
      throw std::invalid_argument("eta must lie in (0, 1]");
    }
  }
};

/// Branch tree for one (alice_bit, bob_bit) pair.
struct BranchTree {
  double p_click = 0.0;      // D3 with Bob's polarization
  std::vector<Leaf> leaves;  // conditional on no D3 click
};

class Simulator {
 public:
  Simulator(const channel::ChannelSpec &spec, double eta)
      : eta_(eta), model_(channel::resolve(spec, eta)) {
    const auto report = channel::compliance_from(
        edp::run_pipeline(model_, edp::EdpConfig{eta}));
    if (!report.compliant) {
      throw ComplianceError(
          "channel violates the detector assumptions (vacuum injection " +
          std::to_string(report.vacuum_injection_prob) + ", double click " +
          std::to_string(report.double_click_prob) + ")");
    }
    for (int a = 0; a < 2; ++a) {
      const StateVec go =
          channel::apply_go(trial_register(a, model_.register_dim()), model_);
      for (int b = 0; b < 2; ++b) {
        auto split = bob_branches(go, b);
        BranchTree &t = trees_[static_cast<std::size_t>(2 * a + b)];
        t.p_click = split.click.prob;
        if (split.passed.prob > 0.0) {
          const StateVec back = channel::apply_return(
              split.passed.branch.normalized(), model_);
          t.leaves = detect_branches(back, eta_);
        }
        probs_[static_cast<std::size_t>(2 * a + b)] = leaf_probs(t.leaves);
      }
    }
  }

  [[nodiscard]] double eta() const { return eta_; }
  [[nodiscard]] const channel::ChannelModel &model() const { return model_; }
  [[nodiscard]] const BranchTree &tree(int alice_bit, int bob_bit) const {
    return trees_.at(static_cast<std::size_t>(2 * alice_bit + bob_bit));
  }

  /// Exact probability of (alice_bit, bob_bit, click) per trial.
  [[nodiscard]] double exact_probability(int alice_bit, int bob_bit,
                                         const Click &c) const {
    const auto &t = tree(alice_bit, bob_bit);
    double p = 0.0;
    if (c.outcome == Outcome::D3) {
      if (c.polarization == polarization_of(bob_bit)[0]) p = t.p_click;
    } else {
      for (const auto &leaf : t.leaves) {
        if (leaf.click == c) p += (1.0 - t.p_click) * leaf.prob;
      }
    }
    return 0.25 * p;
  }

  TrialRecord run_trial(std::uint64_t index, Rng &rng) const {
    std::uniform_int_distribution<int> bit(0, 1);
    TrialRecord r;
    r.trial_index = index;
    r.alice_bit = bit(rng);
    r.bob_bit = bit(rng);
    const auto k = static_cast<std::size_t>(2 * r.alice_bit + r.bob_bit);
    const auto &t = trees_[k];
    const std::array<double, 2> stage{t.p_click, 1.0 - t.p_click};
    if (sample_index(stage, rng) == 0) {
      r.click = {Outcome::D3, polarization_of(r.bob_bit)[0]};
    } else {
      r.click = t.leaves[sample_index(probs_[k], rng)].click;
    }
    return r;
  }

 private:
  double eta_;
  channel::ChannelModel model_;
  std::array<BranchTree, 4> trees_{};
  std::array<std::vector<double>, 4> probs_{};
};

/// Exact ProbTable implied by the Monte Carlo branch structure.
inline secbound::ProbTable exact_prob_table(const Simulator &sim) {
  auto entry = [&](int a, int b, Outcome o) {
    const double p =
        sim.exact_probability(a, b, {o, polarization_of(a)[0]});
    return o == Outcome::D1 ? 0.5 * p : p;
  };
  secbound::ProbTable t;
  t.eta = sim.eta();
  t.hh_d1 = entry(0, 0, Outcome::D1);
  t.hh_d2 = entry(0, 0, Outcome::D2);
  t.vv_d1 = entry(1, 1, Outcome::D1);
  t.vv_d2 = entry(1, 1, Outcome::D2);
  t.hv_d1 = entry(0, 1, Outcome::D1);
  t.vh_d1 = entry(1, 0, Outcome::D1);
  t.hv_d2 = entry(0, 1, Outcome::D2);
  t.vh_d2 = entry(1, 0, Outcome::D2);
  return t;
}

struct CountKey {
  int alice_bit;
  int bob_bit;
  std::string outcome;

  friend auto operator<=>(const CountKey &, const CountKey &) = default;
  friend bool operator==(const CountKey &, const CountKey &) = default;
};

struct SessionStats {
  std::uint64_t n_trials = 0;
  double eta = 1.0;
  std::uint64_t rng_seed = 0;
  std::string channel;
  std::map<CountKey, std::uint64_t> counts;
  std::uint64_t sifted_key_bits = 0;
  double qber = 0.0;
  double d1_flip_rate = 0.0;
  double d3_mismatch_rate = 0.0;
  std::map<std::string, double> yields;
  secbound::ProbTable prob_table_estimate;
  secbound::ProbTable prob_table_stderr;

  [[nodiscard]] std::uint64_t count(int a, int b, const Click &c) const {
    auto it = counts.find({a, b, c.label()});
    return it == counts.end() ? 0 : it->second;
  }

  friend bool operator==(const SessionStats &, const SessionStats &) = default;
};

/// Raw tallies; merging is associative and order-independent.
struct Tally {
  std::uint64_t n = 0;
  std::map<CountKey, std::uint64_t> counts;

  void add(const TrialRecord &r) {
    ++n;
    ++counts[{r.alice_bit, r.bob_bit, r.click.label()}];
  }

  void merge(const Tally &o) {
    n += o.n;
    for (const auto &[k, v] : o.counts) counts[k] += v;
  }
};

inline SessionStats summarize(const Tally &tally, const SessionConfig &cfg) {
  SessionStats s;
  s.n_trials = tally.n;
  s.eta = cfg.eta;
  s.rng_seed = cfg.rng_seed;
  s.channel = cfg.channel.name();
  s.counts = tally.counts;
  const double n = static_cast<double>(tally.n);

  std::uint64_t d1 = 0, d1_flipped = 0, sifted_err = 0, d3 = 0, d3_bad = 0;
  std::map<std::string, std::uint64_t> per_detector;
  for (const auto &[k, v] : tally.counts) {
    const Click c = Click::parse(k.outcome);
    const char enc = polarization_of(k.alice_bit)[0];
    switch (c.outcome) {
      case Outcome::D1:
        per_detector["D1"] += v;
        d1 += v;
        if (c.polarization != enc) {
          d1_flipped += v;
        } else {
          s.sifted_key_bits += v;
          if (k.bob_bit != k.alice_bit) sifted_err += v;
        }
        break;
      case Outcome::D2: per_detector["D2"] += v; break;
      case Outcome::D3:
        per_detector["D3"] += v;
        d3 += v;
        if (c.polarization != enc) d3_bad += v;
        break;
      case Outcome::NoClick: per_detector["no_click"] += v; break;
      case Outcome::Lost: per_detector["lost"] += v; break;
    }
  }
  auto ratio = [](std::uint64_t a, std::uint64_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  s.qber = ratio(sifted_err, s.sifted_key_bits);
  s.d1_flip_rate = ratio(d1_flipped, d1);
  s.d3_mismatch_rate = ratio(d3_bad, d3);
  for (const char *k : {"D1", "D2", "D3", "no_click", "lost"}) {
    s.yields[k] = static_cast<double>(per_detector[k]) / n;
  }

  auto est = [&](int a, int b, Outcome o, double &value, double &se) {
    const double p =
        static_cast<double>(s.count(a, b, {o, polarization_of(a)[0]})) / n;
    const double f = o == Outcome::D1 ? 0.5 : 1.0;
    value = f * p;
    se = f * std::sqrt(p * (1.0 - p) / n);
  };
  auto &e = s.prob_table_estimate;
  auto &d = s.prob_table_stderr;
  e.eta = d.eta = cfg.eta;
  est(0, 0, Outcome::D1, e.hh_d1, d.hh_d1);
  est(0, 0, Outcome::D2, e.hh_d2, d.hh_d2);
  est(1, 1, Outcome::D1, e.vv_d1, d.vv_d1);
  est(1, 1, Outcome::D2, e.vv_d2, d.vv_d2);
  est(0, 1, Outcome::D1, e.hv_d1, d.hv_d1);
  est(1, 0, Outcome::D1, e.vh_d1, d.vh_d1);
  est(0, 1, Outcome::D2, e.hv_d2, d.hv_d2);
  est(1, 0, Outcome::D2, e.vh_d2, d.vh_d2);
  return s;
}

inline constexpr std::uint64_t kBatchSize = 1u << 16;

/// Independent stream for one batch of trials.
inline Rng batch_rng(std::uint64_t seed, std::uint64_t batch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(batch),
                    static_cast<std::uint32_t>(batch >> 32)};
  return Rng(seq);
}

using TrialSink = std::function<void(const TrialRecord &)>;
using Progress = std::function<void(std::uint64_t done, std::uint64_t total)>;

inline Tally run_batch(const Simulator &sim, std::uint64_t seed,
                       std::uint64_t batch, std::uint64_t first,
                       std::uint64_t count, const TrialSink &sink) {
  Rng rng = batch_rng(seed, batch);
  Tally t;
  for (std::uint64_t i = 0; i < count; ++i) {
    const TrialRecord r = sim.run_trial(first + i, rng);
    t.add(r);
    if (sink) sink(r);
  }
  return t;
}

inline SessionStats run_session(const SessionConfig &cfg,
                                 const TrialSink &sink = {},
                                 const Progress &progress = {}) {
  cfg.validate();
  const Simulator sim(cfg.channel, cfg.eta);
  Tally total;
  std::uint64_t next_report = cfg.report_interval;
  for (std::uint64_t batch = 0, first = 0; first < cfg.n_trials;
       ++batch, first += kBatchSize) {
    const std::uint64_t count = std::min(kBatchSize, cfg.n_trials - first);
    total.merge(run_batch(sim, cfg.rng_seed, batch, first, count, sink));
    while (progress && cfg.report_interval > 0 && total.n >= next_report) {
      progress(total.n, cfg.n_trials);
      next_report += cfg.report_interval;
    }
  }
  return summarize(total, cfg);
}

/// Single trial from scratch, sharing the seeded per-batch stream layout of
/// run_session: trial k of a session equals run_trial(cfg, k).
inline TrialRecord run_trial(const SessionConfig &cfg, std::uint64_t index) {
  cfg.validate();
  const Simulator sim(cfg.channel, cfg.eta);
  const std::uint64_t batch = index / kBatchSize;
  Rng rng = batch_rng(cfg.rng_seed, batch);
  TrialRecord r;
  for (std::uint64_t i = batch * kBatchSize; i <= index; ++i) {
    r = sim.run_trial(i, rng);
  }
  return r;
}

}  // namespace cfq::n09
