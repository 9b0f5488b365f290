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

// JSON and CSV records. Every double written out is first rounded to 12
// significant digits, so parse(emit(x)) reproduces the rounded x exactly.

#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfq/analysis.hpp"
#include "cfq/channel.hpp"
#include "cfq/n09.hpp"
#include "cfq/secbound.hpp"

namespace cfq::io {

using nlohmann::json;

/// Malformed or schema-violating input.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double round12(double x) {
  if (!std::isfinite(x)) return x;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

inline std::string fmt12(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline json num(double x) {
  if (!std::isfinite(x)) throw std::domain_error("non-finite value in output");
  return round12(x);
}

/// Parses JSON text; syntax errors carry line and column.
inline json parse_text(const std::string &text, const std::string &origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0,
                                                  text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InputError(origin + ":" + std::to_string(line) + ":" +
                     std::to_string(col) + ": malformed JSON");
  }
}

inline std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_file(const std::string &path) {
  return parse_text(read_file(path), path);
}

namespace detail {

inline const json &field(const json &j, const std::string &key,
                         const std::string &where) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw InputError(where + ": missing key '" + key + "'");
  return *it;
}

inline double number(const json &j, const std::string &key,
                     const std::string &where) {
  const json &v = field(j, key, where);
  if (!v.is_number()) {
    throw InputError(where + ": '" + key + "' must be a number");
  }
  return v.get<double>();
}

inline std::uint64_t count(const json &j, const std::string &key,
                           const std::string &where) {
  const json &v = field(j, key, where);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw InputError(where + ": '" + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline void only_keys(const json &j, std::initializer_list<std::string> keys,
                      const std::string &where) {
  for (const auto &[k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw InputError(where + ": unexpected key '" + k + "'");
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ProbTable

inline json to_json(const secbound::ProbTable &t) {
  json j = json::object();
  for (const auto &[k, v] : t.entries()) j[k] = num(v);
  j["eta"] = num(t.eta);
  return j;
}

inline secbound::ProbTable prob_table_from_json(const json &j,
                                                const std::string &where) {
  detail::only_keys(j,
                    {"pr_hh_d1", "pr_hh_d2", "pr_vv_d1", "pr_vv_d2",
                     "pr_hv_d1", "pr_vh_d1", "pr_hv_d2", "pr_vh_d2", "eta"},
                    where);
  secbound::ProbTable t;
  auto get = [&](const char *k) { return detail::number(j, k, where); };
  t.hh_d1 = get("pr_hh_d1");
  t.hh_d2 = get("pr_hh_d2");
  t.vv_d1 = get("pr_vv_d1");
  t.vv_d2 = get("pr_vv_d2");
  t.hv_d1 = get("pr_hv_d1");
  t.vh_d1 = get("pr_vh_d1");
  t.hv_d2 = get("pr_hv_d2");
  t.vh_d2 = get("pr_vh_d2");
  t.eta = get("eta");
  try {
    t.validate();
  } catch (const std::invalid_argument &e) {
    throw InputError(where + ": " + e.what());
  }
  return t;
}

/// Accepts a bare table or a record embedding one under "prob_table" or
/// "prob_table_estimate".
inline secbound::ProbTable statistics_from_json(const json &j,
                                                const std::string &where) {
  if (j.is_object()) {
    for (const char *k : {"prob_table", "prob_table_estimate"}) {
      if (j.contains(k)) return prob_table_from_json(j.at(k), where + "/" + k);
    }
  }
  return prob_table_from_json(j, where);
}

// ---------------------------------------------------------------------------
// BoundReport

inline json to_json(const secbound::BoundReport &r) {
  return json{{"beta", num(r.beta)},
              {"beta_prime", num(r.beta_prime)},
              {"xi", num(r.xi)},
              {"e_bit", num(r.e_bit)},
              {"e_ph_max", num(r.e_ph_max)},
              {"lambda_min", num(r.lambda_min)},
              {"yield_q", num(r.yield_q)},
              {"key_rate", num(r.key_rate)},
              {"clamp_flags", r.clamp_flags}};
}

inline secbound::BoundReport bound_report_from_json(const json &j,
                                                    const std::string &where) {
  secbound::BoundReport r;
  auto get = [&](const char *k) { return detail::number(j, k, where); };
  r.beta = get("beta");
  r.beta_prime = get("beta_prime");
  r.xi = get("xi");
  r.e_bit = get("e_bit");
  r.e_ph_max = get("e_ph_max");
  r.lambda_min = get("lambda_min");
  r.yield_q = get("yield_q");
  r.key_rate = get("key_rate");
  const json &flags = detail::field(j, "clamp_flags", where);
  if (!flags.is_array()) throw InputError(where + ": clamp_flags must be a list");
  for (const auto &f : flags) {
    if (!f.is_string()) throw InputError(where + ": clamp flag must be a string");
    r.clamp_flags.push_back(f.get<std::string>());
  }
  return r;
}

// ---------------------------------------------------------------------------
// ChannelSpec

inline json matrix_to_json(const CMatrix &m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      row.push_back(json::array({num(m(i, k).real()), num(m(i, k).imag())}));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline CMatrix matrix_from_json(const json &j, const std::string &where) {
  if (!j.is_array() || j.empty()) {
    throw InputError(where + ": matrix must be a non-empty list of rows");
  }
  const auto n = static_cast<Eigen::Index>(j.size());
  CMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json &row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw InputError(where + ": matrix must be square");
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      const json &c = row[static_cast<std::size_t>(k)];
      if (!c.is_array() || c.size() != 2 || !c[0].is_number() ||
          !c[1].is_number()) {
        throw InputError(where + ": entries must be [re, im] pairs");
      }
      m(i, k) = Complex(c[0].get<double>(), c[1].get<double>());
    }
  }
  return m;
}

inline json to_json(const channel::ChannelSpec &spec) {
  json j{{"variant", spec.name()}};
  if (const auto *n = std::get_if<channel::NoiseVP>(&spec.variant)) {
    j["v"] = num(n->v);
    j["p"] = num(n->p);
  } else if (const auto *t =
                 std::get_if<channel::TwoPassUnitary>(&spec.variant)) {
    j["eve_dim"] = t->eve_dim;
    j["u_go"] = matrix_to_json(t->u_go);
    j["u_ret"] = matrix_to_json(t->u_ret);
  }
  if (spec.transmission) j["transmission"] = num(*spec.transmission);
  return j;
}

inline channel::ChannelSpec channel_from_json(const json &j,
                                              const std::string &where) {
  const json &variant = detail::field(j, "variant", where);
  if (!variant.is_string()) throw InputError(where + ": variant must be a string");
  const auto name = variant.get<std::string>();
  channel::ChannelSpec spec;
  if (name == "ideal") {
    detail::only_keys(j, {"variant", "transmission"}, where);
    spec.variant = channel::Ideal{};
  } else if (name == "noise_vp") {
    detail::only_keys(j, {"variant", "v", "p", "transmission"}, where);
    const double v = detail::number(j, "v", where);
    const double p = detail::number(j, "p", where);
    try {
      spec = channel::build_noise_vp(v, p);
    } catch (const std::invalid_argument &e) {
      throw InputError(where + ": " + e.what());
    }
  } else if (name == "intercept") {
    detail::only_keys(j, {"variant", "transmission"}, where);
    spec.variant = channel::InterceptResend{};
  } else if (name == "two_pass") {
    detail::only_keys(j, {"variant", "eve_dim", "u_go", "u_ret", "transmission"},
                      where);
    channel::TwoPassUnitary t;
    t.eve_dim = detail::count(j, "eve_dim", where);
    t.u_go = matrix_from_json(detail::field(j, "u_go", where), where + "/u_go");
    t.u_ret =
        matrix_from_json(detail::field(j, "u_ret", where), where + "/u_ret");
    const auto n = static_cast<Eigen::Index>(3 * t.eve_dim);
    if (t.eve_dim < 1 || t.u_go.rows() != n || t.u_ret.rows() != n) {
      throw InputError(where + ": two_pass matrices must be 3*eve_dim square");
    }
    for (const auto *u : {&t.u_go, &t.u_ret}) {
      if (!is_unitary(*u)) throw InputError(where + ": matrix is not unitary");
    }
    spec.variant = std::move(t);
  } else {
    throw InputError(where + ": unknown variant '" + name + "'");
  }
  if (j.contains("transmission")) {
    const double t = detail::number(j, "transmission", where);
    if (!(t >= 0.0 && t <= 1.0)) {
      throw InputError(where + ": transmission must lie in [0, 1]");
    }
    spec.transmission = t;
  }
  return spec;
}

/// `ideal`, `intercept`, `noise_vp:V,p` or `@file.json`.
inline channel::ChannelSpec parse_channel_arg(const std::string &arg) {
  if (arg == "ideal") return {channel::Ideal{}, std::nullopt};
  if (arg == "intercept") return {channel::InterceptResend{}, std::nullopt};
  if (!arg.empty() && arg[0] == '@') {
    const std::string path = arg.substr(1);
    return channel_from_json(parse_file(path), path);
  }
  const std::string prefix = "noise_vp:";
  if (arg.rfind(prefix, 0) == 0) {
    const std::string rest = arg.substr(prefix.size());
    const auto comma = rest.find(',');
    if (comma != std::string::npos) {
      const std::string a = rest.substr(0, comma);
      const std::string b = rest.substr(comma + 1);
      char *end_a = nullptr;
      char *end_b = nullptr;
      const double v = std::strtod(a.c_str(), &end_a);
      const double p = std::strtod(b.c_str(), &end_b);
      if (!a.empty() && !b.empty() && *end_a == '\0' && *end_b == '\0') {
        try {
          return channel::build_noise_vp(v, p);
        } catch (const std::invalid_argument &e) {
          throw InputError(std::string("--channel: ") + e.what());
        }
      }
    }
    throw InputError("--channel: expected noise_vp:V,p");
  }
  throw InputError("--channel: expected ideal, intercept, noise_vp:V,p or "
                   "@file.json, got '" + arg + "'");
}

// ---------------------------------------------------------------------------
// SessionStats

inline json to_json(const n09::SessionStats &s) {
  json counts = json::array();
  for (const auto &[k, v] : s.counts) {
    counts.push_back({{"alice_bit", k.alice_bit},
                      {"bob_bit", k.bob_bit},
                      {"outcome", k.outcome},
                      {"count", v}});
  }
  json yields = json::object();
  for (const auto &[k, v] : s.yields) yields[k] = num(v);
  return json{{"n_trials", s.n_trials},
              {"eta", num(s.eta)},
              {"seed", s.rng_seed},
              {"channel", s.channel},
              {"counts", std::move(counts)},
              {"sifted_key_bits", s.sifted_key_bits},
              {"qber", num(s.qber)},
              {"d1_flip_rate", num(s.d1_flip_rate)},
              {"d3_mismatch_rate", num(s.d3_mismatch_rate)},
              {"yields", std::move(yields)},
              {"prob_table_estimate", to_json(s.prob_table_estimate)},
              {"prob_table_stderr", to_json(s.prob_table_stderr)}};
}

inline n09::SessionStats session_stats_from_json(const json &j,
                                                 const std::string &where) {
  n09::SessionStats s;
  s.n_trials = detail::count(j, "n_trials", where);
  s.eta = detail::number(j, "eta", where);
  s.rng_seed = detail::count(j, "seed", where);
  s.channel = detail::field(j, "channel", where).get<std::string>();
  for (const auto &c : detail::field(j, "counts", where)) {
    n09::CountKey key{static_cast<int>(detail::count(c, "alice_bit", where)),
                      static_cast<int>(detail::count(c, "bob_bit", where)),
                      detail::field(c, "outcome", where).get<std::string>()};
    s.counts[key] = detail::count(c, "count", where);
  }
  s.sifted_key_bits = detail::count(j, "sifted_key_bits", where);
  s.qber = detail::number(j, "qber", where);
  s.d1_flip_rate = detail::number(j, "d1_flip_rate", where);
  s.d3_mismatch_rate = detail::number(j, "d3_mismatch_rate", where);
  for (const auto &[k, v] : detail::field(j, "yields", where).items()) {
    s.yields[k] = v.get<double>();
  }
  s.prob_table_estimate =
      prob_table_from_json(detail::field(j, "prob_table_estimate", where),
                           where + "/prob_table_estimate");
  s.prob_table_stderr =
      prob_table_from_json(detail::field(j, "prob_table_stderr", where),
                           where + "/prob_table_stderr");
  return s;
}

/// The same record with every double rounded as on output.
inline n09::SessionStats rounded(n09::SessionStats s) {
  s.eta = round12(s.eta);
  s.qber = round12(s.qber);
  s.d1_flip_rate = round12(s.d1_flip_rate);
  s.d3_mismatch_rate = round12(s.d3_mismatch_rate);
  for (auto &[k, v] : s.yields) v = round12(v);
  for (auto *t : {&s.prob_table_estimate, &s.prob_table_stderr}) {
    t->hh_d1 = round12(t->hh_d1);
    t->hh_d2 = round12(t->hh_d2);
    t->vv_d1 = round12(t->vv_d1);
    t->vv_d2 = round12(t->vv_d2);
    t->hv_d1 = round12(t->hv_d1);
    t->vh_d1 = round12(t->vh_d1);
    t->hv_d2 = round12(t->hv_d2);
    t->vh_d2 = round12(t->vh_d2);
    t->eta = round12(t->eta);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Analysis

inline json to_json(const Analysis &a, const channel::ChannelSpec &spec,
                    double eta) {
  json j{{"channel", to_json(spec)},
         {"eta", num(eta)},
         {"compliance",
          {{"vacuum_injection_prob", num(a.compliance.vacuum_injection_prob)},
           {"double_click_prob", num(a.compliance.double_click_prob)},
           {"compliant", a.compliance.compliant}}},
         {"prob_table", to_json(a.table)}};
  json fitted = json::object();
  fitted["transmission"] = num(a.model.transmission);
  for (const auto &[k, v] : a.model.fitted) fitted[k] = num(v);
  j["channel_parameters"] = std::move(fitted);
  if (a.report) {
    j["report"] = to_json(*a.report);
    j["exact"] = {{"e_bit", num(a.exact->e_bit)},
                  {"e_ph", num(a.exact->e_ph)},
                  {"lambda", num(a.rho_prime->lambda)},
                  {"bell_weights",
                   {{"phi_plus", num(a.exact->bell_weights[0])},
                    {"phi_minus", num(a.exact->bell_weights[1])},
                    {"psi_plus", num(a.exact->bell_weights[2])},
                    {"psi_minus", num(a.exact->bell_weights[3])}}}};
    j["bound_slack"] = num(a.report->e_ph_max - a.exact->e_ph);
  } else {
    j["report"] = nullptr;
    j["exact"] = nullptr;
  }
  if (const auto *n = std::get_if<channel::NoiseVP>(&spec.variant)) {
    j["paper_e_ph_closed_form"] = num(closed_form_phase_error(n->v, n->p));
    j["closed_form_e_bit"] = num(closed_form_bit_error(n->v, n->p));
  }
  return j;
}

// ---------------------------------------------------------------------------
// CSV

/// Flattens nested objects into "a.b" keys; arrays become ';'-joined cells.
inline void flatten(const json &j, const std::string &prefix,
                    std::vector<std::pair<std::string, std::string>> &out) {
  if (j.is_object()) {
    for (const auto &[k, v] : j.items()) {
      flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    }
  } else if (j.is_array()) {
    std::string cell;
    for (const auto &v : j) {
      if (!cell.empty()) cell += ';';
      cell += v.is_string() ? v.get<std::string>() : v.dump();
    }
    out.emplace_back(prefix, cell);
  } else if (j.is_number_float()) {
    out.emplace_back(prefix, fmt12(j.get<double>()));
  } else if (j.is_string()) {
    out.emplace_back(prefix, j.get<std::string>());
  } else {
    out.emplace_back(prefix, j.dump());
  }
}

inline std::string key_value_csv(const json &j) {
  std::vector<std::pair<std::string, std::string>> rows;
  flatten(j, "", rows);
  std::string s = "key,value\n";
  for (const auto &[k, v] : rows) s += k + "," + v + "\n";
  return s;
}

inline std::string trial_csv_header() {
  return "trial_index,alice_bit,bob_bit,outcome,polarization\n";
}

inline std::string trial_csv_row(const n09::TrialRecord &r) {
  const std::string label = r.click.label();
  const std::string outcome =
      r.click.polarization ? label.substr(0, 2) : label;
  const std::string pol =
      r.click.polarization ? std::string(1, r.click.polarization) : "";
  return std::to_string(r.trial_index) + "," + std::to_string(r.alice_bit) +
         "," + std::to_string(r.bob_bit) + "," + outcome + "," + pol + "\n";
}

struct SweepRow {
  double v, p, eta, e_bit, e_ph_max, key_rate;
};

inline std::string sweep_csv(const std::vector<SweepRow> &rows) {
  std::string s = "v,p,eta,e_bit,e_ph_max,key_rate\n";
  for (const auto &r : rows) {
    s += fmt12(r.v) + "," + fmt12(r.p) + "," + fmt12(r.eta) + "," +
         fmt12(r.e_bit) + "," + fmt12(r.e_ph_max) + "," + fmt12(r.key_rate) +
         "\n";
  }
  return s;
}

inline json sweep_json(const std::vector<SweepRow> &rows) {
  json a = json::array();
  for (const auto &r : rows) {
    a.push_back({{"v", num(r.v)},
                 {"p", num(r.p)},
                 {"eta", num(r.eta)},
                 {"e_bit", num(r.e_bit)},
                 {"e_ph_max", num(r.e_ph_max)},
                 {"key_rate", num(r.key_rate)}});
  }
  return a;
}

}  // namespace cfq::io
