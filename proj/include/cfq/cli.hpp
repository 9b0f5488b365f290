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

// Command-line front end: cfq <simulate|analyze|bound|sweep|verify>.
//
// Exit codes: 0 ok, 1 property violation, 2 user error, 3 channel rejected
// by the compliance check.

#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cfq/analysis.hpp"
#include "cfq/channel.hpp"
#include "cfq/io.hpp"
#include "cfq/n09.hpp"
#include "cfq/secbound.hpp"

namespace cfq::cli {

enum Exit : int { kOk = 0, kViolation = 1, kUserError = 2, kNonCompliant = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string channel = "ideal";
  double eta = 1.0;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
};

inline std::uint64_t resolve_seed(const std::optional<std::uint64_t> &flag) {
  if (flag) return *flag;
  if (const char *env = std::getenv("CFQ_SEED"); env && *env) {
    char *end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0' || errno != 0 || env[0] == '-') {
      throw UsageError(std::string("CFQ_SEED is not an unsigned integer: ") +
                       env);
    }
    return v;
  }
  return 0;
}

inline void check_eta(double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw UsageError("--eta must lie in (0, 1]");
}

/// Output destinations are checked before any computation starts.
inline void check_out_path(const std::string &path) {
  if (path.empty()) return;
  namespace fs = std::filesystem;
  const fs::path p(path);
  if (fs::is_directory(p)) throw UsageError("--out names a directory: " + path);
  const fs::path parent = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (!fs::is_directory(parent)) {
    throw UsageError("output directory does not exist: " + parent.string());
  }
}

inline void write_output(const std::string &text, const std::string &path,
                         std::ostream &out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << text;
}

inline std::string render(const nlohmann::json &j, const std::string &format) {
  if (format == "csv") return io::key_value_csv(j);
  return j.dump(2) + "\n";
}

inline void warn_flags(const secbound::BoundReport &r, std::ostream &err) {
  for (const auto &f : r.clamp_flags) err << "warning: " << f << "\n";
}

// ---------------------------------------------------------------------------
// Grid parsing for sweep: "x", "x,y,z" or "start:stop:step" (inclusive).

inline std::vector<double> parse_grid(const std::string &spec,
                                      const std::string &name) {
  auto to_double = [&](const std::string &s) {
    char *end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || !std::isfinite(v)) {
      throw UsageError("--" + name + ": bad number '" + s + "'");
    }
    return v;
  };
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    if (parts.size() != 3) {
      throw UsageError("--" + name + ": expected start:stop:step");
    }
    const double a = to_double(parts[0]);
    const double b = to_double(parts[1]);
    const double step = to_double(parts[2]);
    if (!(step > 0.0)) throw UsageError("--" + name + ": step must be positive");
    if (b < a) throw UsageError("--" + name + ": stop is below start");
    const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) {
      out.push_back(std::min(b, a + static_cast<double>(i) * step));
    }
    return out;
  }
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ',');) {
    out.push_back(to_double(item));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

struct SimulateArgs {
  Common c;
  std::uint64_t trials = 100000;
  std::string trial_log;
  std::uint64_t report_interval = 0;
};

inline int cmd_simulate(const SimulateArgs &a, std::ostream &out,
                        std::ostream &err) {
  check_eta(a.c.eta);
  if (a.trials < 1) throw UsageError("--trials must be >= 1");
  check_out_path(a.c.out);
  check_out_path(a.trial_log);
  n09::SessionConfig cfg{a.trials, a.c.eta, io::parse_channel_arg(a.c.channel),
                         resolve_seed(a.c.seed), a.report_interval};

  std::string trial_rows;
  const bool want_rows = a.c.format == "csv" || !a.trial_log.empty();
  if (want_rows) trial_rows = io::trial_csv_header();
  n09::TrialSink sink;
  if (want_rows) {
    sink = [&](const n09::TrialRecord &r) { trial_rows += io::trial_csv_row(r); };
  }
  n09::Progress progress = [&](std::uint64_t done, std::uint64_t total) {
    err << "progress " << done << "/" << total << "\n";
  };
  const auto stats = n09::run_session(cfg, sink, progress);

  double key_rate = 0.0;
  try {
    const auto r = secbound::analyze_table(stats.prob_table_estimate);
    key_rate = r.key_rate;
  } catch (const secbound::ZeroYield &) {
  }
  std::ostream &summary = a.c.out.empty() ? err : out;
  summary << "trials " << stats.n_trials << " D1 " << io::fmt12(stats.yields.at("D1"))
          << " D2 " << io::fmt12(stats.yields.at("D2")) << " D3 "
          << io::fmt12(stats.yields.at("D3")) << " lost "
          << io::fmt12(stats.yields.at("lost")) << " qber "
          << io::fmt12(stats.qber) << " sifted " << stats.sifted_key_bits
          << " key_rate " << io::fmt12(key_rate) << "\n";

  if (a.c.format == "csv") {
    write_output(trial_rows, a.c.out, out);
  } else {
    write_output(io::to_json(stats).dump(2) + "\n", a.c.out, out);
    if (!a.trial_log.empty()) write_output(trial_rows, a.trial_log, out);
  }
  return kOk;
}

inline int cmd_analyze(const Common &c, std::ostream &out, std::ostream &err) {
  check_eta(c.eta);
  check_out_path(c.out);
  const auto spec = io::parse_channel_arg(c.channel);
  const Analysis a = analyze_channel(spec, c.eta);
  if (!a.compliance.compliant) {
    err << "error: channel is not compliant (vacuum injection "
        << io::fmt12(a.compliance.vacuum_injection_prob) << ", double click "
        << io::fmt12(a.compliance.double_click_prob) << ")\n";
    return kNonCompliant;
  }
  auto j = io::to_json(a, spec, c.eta);
  if (a.report) {
    warn_flags(*a.report, err);
    j["e_ph_max_strict"] = io::num(secbound::eph_bound_strict(
        secbound::extract_params(a.table), c.eta));
  } else {
    err << "warning: key branch has zero weight; no bound reported\n";
  }
  write_output(render(j, c.format), c.out, out);
  return kOk;
}

inline int cmd_bound(const std::string &file, const Common &c,
                     std::ostream &out, std::ostream &err) {
  check_out_path(c.out);
  const auto table = io::statistics_from_json(io::parse_file(file), file);
  secbound::BoundReport r;
  try {
    r = secbound::analyze_table(table);
  } catch (const secbound::ZeroYield &e) {
    throw UsageError(file + ": " + e.what());
  }
  warn_flags(r, err);
  write_output(render(io::to_json(r), c.format), c.out, out);
  return kOk;
}

struct SweepArgs {
  std::string v = "1";
  std::string p = "0";
  std::string eta = "1";
  std::string out;
  std::string format = "csv";
};

inline int cmd_sweep(const SweepArgs &a, std::ostream &out, std::ostream &err) {
  check_out_path(a.out);
  const auto vs = parse_grid(a.v, "v");
  const auto ps = parse_grid(a.p, "p");
  const auto etas = parse_grid(a.eta, "eta");
  if (vs.empty() || ps.empty() || etas.empty()) {
    throw UsageError("sweep grid is empty");
  }
  for (double e : etas) check_eta(e);
  std::vector<io::SweepRow> rows;
  for (double v : vs) {
    for (double p : ps) {
      for (double eta : etas) {
        try {
          const Analysis an = analyze_channel(channel::build_noise_vp(v, p), eta);
          if (!an.report) {
            err << "warning: skipping v=" << io::fmt12(v) << " p=" << io::fmt12(p)
                << " eta=" << io::fmt12(eta) << ": zero key yield\n";
            continue;
          }
          rows.push_back({v, p, eta, an.report->e_bit, an.report->e_ph_max,
                          an.report->key_rate});
        } catch (const channel::NoParameterization &e) {
          err << "warning: skipping v=" << io::fmt12(v) << " p=" << io::fmt12(p)
              << " eta=" << io::fmt12(eta) << ": " << e.what() << "\n";
        }
      }
    }
  }
  if (rows.empty()) throw UsageError("no feasible grid point");
  write_output(a.format == "json" ? io::sweep_json(rows).dump(2) + "\n"
                                  : io::sweep_csv(rows),
               a.out, out);
  return kOk;
}

struct VerifyArgs {
  Common c;
  std::uint64_t samples = 100;
  std::size_t eve_dim = 3;
  double strength = 1.0;
  std::string bound = "standard";
  double bound_scale = 1.0;
};

struct VerifyCase {
  std::string name;
  double exact = 0.0;
  double bound = 0.0;
};

inline int cmd_verify(const VerifyArgs &a, std::ostream &out,
                      std::ostream &err) {
  check_eta(a.c.eta);
  check_out_path(a.c.out);
  if (a.eve_dim < 1) throw UsageError("--eve-dim must be >= 1");
  if (!(a.strength > 0.0 && a.strength <= 1.0)) {
    throw UsageError("--strength must lie in (0, 1]");
  }
  if (a.bound != "standard" && a.bound != "strict") {
    throw UsageError("--bound must be standard or strict");
  }
  Rng rng(resolve_seed(a.c.seed));
  const double eta = a.c.eta;
  auto bound_of = [&](const secbound::ProbTable &t) {
    const auto p = secbound::extract_params(t);
    const double b = a.bound == "strict" ? secbound::eph_bound_strict(p, eta)
                                         : secbound::eph_bound(p, eta);
    return a.bound_scale * b;
  };

  std::vector<VerifyCase> cases;
  std::uint64_t rejected = 0;
  auto evaluate = [&](const std::string &name,
                      const channel::ChannelSpec &spec) -> bool {
    const Analysis an = analyze_channel(spec, eta);
    if (!an.compliance.compliant) return false;
    if (an.exact) {
      cases.push_back({name, an.exact->e_ph, bound_of(an.table)});
    } else {
      cases.push_back({name, 0.0, 1.0});
    }
    return true;
  };

  evaluate("ideal", {channel::Ideal{}, std::nullopt});
  {
    const auto n = static_cast<Eigen::Index>(3 * a.eve_dim);
    channel::TwoPassUnitary id{CMatrix::Identity(n, n), CMatrix::Identity(n, n),
                               a.eve_dim};
    evaluate("identity", {id, std::nullopt});
  }
  evaluate("intercept", {channel::InterceptResend{}, std::nullopt});
  const std::uint64_t max_draws = 10 * a.samples + 10;
  std::uint64_t accepted = 0;
  for (std::uint64_t draw = 0; accepted < a.samples && draw < max_draws;
       ++draw) {
    const auto spec =
        channel::random_compliant_attack(rng, a.eve_dim, a.strength);
    if (evaluate("sample " + std::to_string(accepted), spec)) {
      ++accepted;
    } else {
      ++rejected;
    }
  }
  if (accepted < a.samples) {
    err << "error: too many non-compliant draws\n";
    return kViolation;
  }

  double max_violation = -1e300;
  const VerifyCase *worst = nullptr;
  for (const auto &k : cases) {
    const double v = k.exact - k.bound;
    if (v > max_violation) {
      max_violation = v;
      worst = &k;
    }
  }
  const bool ok = max_violation <= 1e-9;
  nlohmann::json j{{"samples", a.samples},
                   {"eve_dim", a.eve_dim},
                   {"seed", resolve_seed(a.c.seed)},
                   {"eta", io::num(eta)},
                   {"strength", io::num(a.strength)},
                   {"bound", a.bound},
                   {"cases", cases.size()},
                   {"rejected", rejected},
                   {"max_violation", io::num(max_violation)},
                   {"worst_case", worst->name},
                   {"worst_exact_e_ph", io::num(worst->exact)},
                   {"worst_bound", io::num(worst->bound)},
                   {"success", ok}};
  std::ostream &summary = a.c.out.empty() ? err : out;
  summary << (ok ? "verify ok" : "verify FAILED") << ": " << cases.size()
          << " cases, max(exact e_ph - bound) = " << io::fmt12(max_violation)
          << " (" << worst->name << "), rejected " << rejected << "\n";
  write_output(render(j, a.c.format), a.c.out, out);
  return ok ? kOk : kViolation;
}

// ---------------------------------------------------------------------------

inline void add_common(CLI::App *app, Common &c, bool with_channel = true) {
  if (with_channel) {
    app->add_option("--channel", c.channel,
                    "ideal | noise_vp:V,p | intercept | @file.json");
    app->add_option("--eta", c.eta, "Alice's arm transmission in (0, 1]");
  }
  app->add_option("--out", c.out, "output file (default: stdout)");
  app->add_option("--format", c.format, "json | csv")
      ->check(CLI::IsMember({"json", "csv"}));
}

inline int run_cli(int argc, const char *const *argv, std::ostream &out,
                   std::ostream &err) {
  CLI::App app{"cfq: counterfactual QKD toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  SimulateArgs sim;
  auto *s = app.add_subcommand("simulate", "Monte Carlo protocol session");
  add_common(s, sim.c);
  s->add_option("--seed", sim.c.seed, "RNG seed (fallback: CFQ_SEED, then 0)");
  s->add_option("--trials", sim.trials, "number of trials");
  s->add_option("--trial-log", sim.trial_log, "per-trial CSV file");
  s->add_option("--report-interval", sim.report_interval,
                "progress line every N trials");

  Common an;
  auto *z = app.add_subcommand("analyze", "exact analysis and bound");
  add_common(z, an);
  z->add_option("--seed", an.seed, "ignored (analysis is exact)");

  Common bd;
  std::string stats_file;
  auto *b = app.add_subcommand("bound", "bound from a statistics file");
  b->add_option("file", stats_file, "ProbTable JSON")->required();
  add_common(b, bd, false);

  SweepArgs sw;
  auto *w = app.add_subcommand("sweep", "grid over V, p and eta (CSV rows)");
  w->add_option("--v", sw.v, "visibility grid: x | x,y | start:stop:step");
  w->add_option("--p", sw.p, "flip probability grid");
  w->add_option("--eta", sw.eta, "eta grid");
  w->add_option("--out", sw.out, "output file (default: stdout)");
  w->add_option("--format", sw.format, "csv | json")
      ->check(CLI::IsMember({"json", "csv"}));

  VerifyArgs vf;
  auto *v = app.add_subcommand("verify", "bound validity on random attacks");
  add_common(v, vf.c);
  v->add_option("--seed", vf.c.seed, "RNG seed (fallback: CFQ_SEED, then 0)");
  v->add_option("--samples", vf.samples, "number of random attacks");
  v->add_option("--eve-dim", vf.eve_dim, "ancilla dimension");
  v->add_option("--strength", vf.strength,
                "fractional power of each Haar unitary, in (0, 1]");
  v->add_option("--bound", vf.bound, "standard | strict")
      ->check(CLI::IsMember({"standard", "strict"}));
  v->add_option("--bound-scale", vf.bound_scale)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  }

  try {
    if (*s) return cmd_simulate(sim, out, err);
    if (*z) return cmd_analyze(an, out, err);
    if (*b) return cmd_bound(stats_file, bd, out, err);
    if (*w) return cmd_sweep(sw, out, err);
    if (*v) return cmd_verify(vf, out, err);
  } catch (const n09::ComplianceError &e) {
    err << "error: " << e.what() << "\n";
    return kNonCompliant;
  } catch (const UsageError &e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const io::InputError &e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const channel::NoParameterization &e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const std::invalid_argument &e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const std::exception &e) {
    err << "internal error: " << e.what() << "\n";
    return kViolation;
  }
  return kUserError;
}

}  // namespace cfq::cli
