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
 * Dense state vectors and density operators over small labeled product
 * registers.
 *
 * A ModeLayout is an ordered list of named subsystems, each with its own basis
 * labels. Indexing is mixed radix with the first subsystem most significant,
 * so the layout [qutrit{0,H,V}, qubit{H,V}] maps ("V","H") to 2*2+0 = 4.
 * Operators carry the names of the subsystems they act on and are embedded
 * (identity elsewhere) when applied.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cfq {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Rng = std::mt19937_64;

inline constexpr Complex kI{0.0, 1.0};

/// Numerical tolerance policy shared by every module.
struct Tolerances {
  double structural = 1e-10;  // unitarity, hermiticity, idempotence
  double arithmetic = 1e-12;  // norm and trace identities
  double psd_floor = 1e-9;    // minimum admissible eigenvalue
};

inline Tolerances &tolerances() {
  static Tolerances tol;
  return tol;
}

class LayoutError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class StateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// ---------------------------------------------------------------------------
// Layout

struct Subsystem {
  std::string name;
  std::vector<std::string> labels;

  [[nodiscard]] std::size_t dim() const { return labels.size(); }

  [[nodiscard]] std::size_t label_index(std::string_view label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
      throw LayoutError("unknown label '" + std::string(label) +
                        "' for subsystem '" + name + "'");
    }
    return static_cast<std::size_t>(it - labels.begin());
  }

  static Subsystem qubit(std::string name) {
    return {std::move(name), {"H", "V"}};
  }
  static Subsystem qutrit(std::string name) {
    return {std::move(name), {"0", "H", "V"}};
  }
  /// Generic register with labels prefix0, prefix1, ...
  static Subsystem reg(std::string name, std::size_t dim,
                       const std::string &prefix) {
    std::vector<std::string> labels;
    labels.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      labels.push_back(prefix + std::to_string(i));
    }
    return {std::move(name), std::move(labels)};
  }
};

class ModeLayout {
 public:
  ModeLayout() = default;

  explicit ModeLayout(std::vector<Subsystem> subsystems)
      : subsystems_(std::move(subsystems)) {
    for (std::size_t i = 0; i < subsystems_.size(); ++i) {
      const auto &s = subsystems_[i];
      if (s.dim() < 2) {
        throw LayoutError("subsystem '" + s.name + "' must have dim >= 2");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (subsystems_[j].name == s.name) {
          throw LayoutError("duplicate subsystem name '" + s.name + "'");
        }
      }
      for (std::size_t a = 0; a < s.dim(); ++a) {
        for (std::size_t b = 0; b < a; ++b) {
          if (s.labels[a] == s.labels[b]) {
            throw LayoutError("duplicate label '" + s.labels[a] + "' in '" +
                              s.name + "'");
          }
        }
      }
    }
    strides_.assign(subsystems_.size(), 1);
    total_ = 1;
    for (std::size_t i = subsystems_.size(); i-- > 0;) {
      strides_[i] = total_;
      total_ *= subsystems_[i].dim();
    }
  }

  ModeLayout(std::initializer_list<Subsystem> subsystems)
      : ModeLayout(std::vector<Subsystem>(subsystems)) {}

  [[nodiscard]] std::size_t size() const { return subsystems_.size(); }
  [[nodiscard]] std::size_t total_dim() const { return total_; }
  [[nodiscard]] const Subsystem &at(std::size_t i) const {
    return subsystems_.at(i);
  }
  [[nodiscard]] const std::vector<Subsystem> &subsystems() const {
    return subsystems_;
  }
  [[nodiscard]] std::size_t stride(std::size_t i) const {
    return strides_.at(i);
  }

  [[nodiscard]] bool contains(std::string_view name) const {
    return std::any_of(subsystems_.begin(), subsystems_.end(),
                       [&](const Subsystem &s) { return s.name == name; });
  }

  [[nodiscard]] std::size_t position(std::string_view name) const {
    for (std::size_t i = 0; i < subsystems_.size(); ++i) {
      if (subsystems_[i].name == name) return i;
    }
    throw LayoutError("no subsystem named '" + std::string(name) + "'");
  }

  [[nodiscard]] const Subsystem &find(std::string_view name) const {
    return subsystems_[position(name)];
  }

  /// Digit of subsystem `pos` inside full index `index`.
  [[nodiscard]] std::size_t digit(std::size_t index, std::size_t pos) const {
    return (index / strides_[pos]) % subsystems_[pos].dim();
  }

  [[nodiscard]] ModeLayout renamed(std::string_view from,
                                   std::string to) const {
    auto subs = subsystems_;
    subs[position(from)].name = std::move(to);
    return ModeLayout(std::move(subs));
  }

  [[nodiscard]] ModeLayout concat(const ModeLayout &other) const {
    auto subs = subsystems_;
    subs.insert(subs.end(), other.subsystems_.begin(), other.subsystems_.end());
    return ModeLayout(std::move(subs));
  }

  friend bool operator==(const ModeLayout &x, const ModeLayout &y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x.subsystems_[i].name != y.subsystems_[i].name ||
          x.subsystems_[i].labels != y.subsystems_[i].labels) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Subsystem> subsystems_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 1;
};

inline std::size_t index_of(const ModeLayout &layout,
                            std::span<const std::string> labels) {
  if (labels.size() != layout.size()) {
    throw LayoutError("expected " + std::to_string(layout.size()) +
                      " labels, got " + std::to_string(labels.size()));
  }
  std::size_t index = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    index += layout.at(i).label_index(labels[i]) * layout.stride(i);
  }
  return index;
}

inline std::size_t index_of(const ModeLayout &layout,
                            std::initializer_list<std::string> labels) {
  return index_of(layout, std::span<const std::string>(labels.begin(),
                                                       labels.size()));
}

inline std::vector<std::string> labels_of(const ModeLayout &layout,
                                          std::size_t index) {
  if (index >= layout.total_dim()) {
    throw LayoutError("index " + std::to_string(index) + " out of range");
  }
  std::vector<std::string> out;
  out.reserve(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    out.push_back(layout.at(i).labels[layout.digit(index, i)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// States

inline bool all_finite(const CVector &v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) {
      return false;
    }
  }
  return true;
}

/// Amplitude vector over a layout. Subnormalized vectors are legal: a
/// post-selected branch carries its probability in norm2().
class StateVec {
 public:
  StateVec(ModeLayout layout, CVector amps)
      : layout_(std::move(layout)), amps_(std::move(amps)) {
    if (static_cast<std::size_t>(amps_.size()) != layout_.total_dim()) {
      throw DimensionError("amplitude vector size " +
                           std::to_string(amps_.size()) +
                           " does not match layout dimension " +
                           std::to_string(layout_.total_dim()));
    }
    if (!all_finite(amps_)) throw StateError("non-finite amplitude");
    norm2_ = amps_.squaredNorm();
    if (norm2_ > 1.0 + tolerances().arithmetic) {
      throw StateError("state norm2 " + std::to_string(norm2_) + " exceeds 1");
    }
  }

  [[nodiscard]] const ModeLayout &layout() const { return layout_; }
  [[nodiscard]] const CVector &amps() const { return amps_; }
  [[nodiscard]] double norm2() const { return norm2_; }

  [[nodiscard]] Complex amplitude(std::span<const std::string> labels) const {
    return amps_[static_cast<Eigen::Index>(index_of(layout_, labels))];
  }
  [[nodiscard]] Complex amplitude(
      std::initializer_list<std::string> labels) const {
    return amps_[static_cast<Eigen::Index>(index_of(layout_, labels))];
  }

  [[nodiscard]] StateVec normalized() const {
    if (norm2_ <= 0.0) throw StateError("cannot normalize a zero state");
    return StateVec(layout_, amps_ / std::sqrt(norm2_));
  }

  [[nodiscard]] StateVec with_layout(ModeLayout layout) const {
    return StateVec(std::move(layout), amps_);
  }

 private:
  ModeLayout layout_;
  CVector amps_;
  double norm2_ = 0.0;
};

inline StateVec basis_state(const ModeLayout &layout,
                            std::span<const std::string> labels) {
  CVector v = CVector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
  v[static_cast<Eigen::Index>(index_of(layout, labels))] = 1.0;
  return StateVec(layout, std::move(v));
}

inline StateVec basis_state(const ModeLayout &layout,
                            std::initializer_list<std::string> labels) {
  return basis_state(layout,
                     std::span<const std::string>(labels.begin(),
                                                  labels.size()));
}

inline StateVec tensor(const StateVec &x, const StateVec &y) {
  const auto &a = x.amps();
  const auto &b = y.amps();
  CVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.segment(i * b.size(), b.size()) = a[i] * b;
  }
  return StateVec(x.layout().concat(y.layout()), std::move(out));
}

inline StateVec tensor(std::initializer_list<StateVec> parts) {
  auto it = parts.begin();
  StateVec acc = *it++;
  for (; it != parts.end(); ++it) acc = tensor(acc, *it);
  return acc;
}

inline StateVec operator+(const StateVec &x, const StateVec &y) {
  if (!(x.layout() == y.layout())) throw LayoutError("layout mismatch in +");
  return StateVec(x.layout(), x.amps() + y.amps());
}

inline StateVec operator*(Complex c, const StateVec &x) {
  return StateVec(x.layout(), c * x.amps());
}

// ---------------------------------------------------------------------------
// Operators

inline double unitarity_defect(const CMatrix &m) {
  if (m.rows() != m.cols()) return INFINITY;
  return (m.adjoint() * m - CMatrix::Identity(m.rows(), m.cols()))
      .cwiseAbs()
      .maxCoeff();
}

inline bool is_unitary(const CMatrix &m) {
  return unitarity_defect(m) <= tolerances().structural;
}

/// A dense matrix acting on the product space of named target subsystems.
class Operator {
 public:
  Operator(std::vector<std::string> targets, CMatrix matrix,
           bool claims_unitary = false)
      : targets_(std::move(targets)), matrix_(std::move(matrix)) {
    if (matrix_.rows() != matrix_.cols()) {
      throw DimensionError("operator matrix must be square");
    }
    if (targets_.empty()) throw LayoutError("operator needs a target");
    is_unitary_ = claims_unitary;
    if (claims_unitary && !cfq::is_unitary(matrix_)) {
      throw DimensionError("matrix is not unitary (defect " +
                           std::to_string(unitarity_defect(matrix_)) + ")");
    }
  }

  static Operator unitary(std::vector<std::string> targets, CMatrix matrix) {
    return Operator(std::move(targets), std::move(matrix), true);
  }

  [[nodiscard]] const std::vector<std::string> &targets() const {
    return targets_;
  }
  [[nodiscard]] const CMatrix &matrix() const { return matrix_; }
  [[nodiscard]] bool is_unitary() const { return is_unitary_; }
  [[nodiscard]] std::size_t dim() const {
    return static_cast<std::size_t>(matrix_.rows());
  }

 private:
  std::vector<std::string> targets_;
  CMatrix matrix_;
  bool is_unitary_ = false;
};

/// Sub-layout of the target subsystems, in the operator's target order.
inline ModeLayout target_layout(const ModeLayout &layout,
                                const std::vector<std::string> &targets) {
  std::vector<Subsystem> subs;
  subs.reserve(targets.size());
  for (const auto &t : targets) subs.push_back(layout.find(t));
  return ModeLayout(std::move(subs));
}

/// Precomputed index arithmetic for embedding a target-space operator.
struct Embedding {
  std::vector<std::size_t> offsets;  // target sub-index -> full-index offset
  std::vector<std::size_t> bases;    // full indices with all target digits 0

  Embedding(const ModeLayout &layout, const std::vector<std::string> &targets) {
    std::vector<std::size_t> pos;
    pos.reserve(targets.size());
    for (const auto &t : targets) {
      auto p = layout.position(t);
      if (std::find(pos.begin(), pos.end(), p) != pos.end()) {
        throw LayoutError("repeated target '" + t + "'");
      }
      pos.push_back(p);
    }
    std::size_t tdim = 1;
    for (auto p : pos) tdim *= layout.at(p).dim();
    offsets.assign(tdim, 0);
    for (std::size_t t = 0; t < tdim; ++t) {
      std::size_t rem = t, off = 0;
      for (std::size_t j = pos.size(); j-- > 0;) {
        const auto d = layout.at(pos[j]).dim();
        off += (rem % d) * layout.stride(pos[j]);
        rem /= d;
      }
      offsets[t] = off;
    }
    const auto n = layout.total_dim();
    bases.reserve(n / tdim);
    for (std::size_t i = 0; i < n; ++i) {
      bool zero = true;
      for (auto p : pos) {
        if (layout.digit(i, p) != 0) {
          zero = false;
          break;
        }
      }
      if (zero) bases.push_back(i);
    }
  }

  [[nodiscard]] std::size_t target_dim() const { return offsets.size(); }
};

inline CVector apply_matrix(const CMatrix &m, const Embedding &emb,
                            const CVector &in) {
  const auto tdim = static_cast<Eigen::Index>(emb.target_dim());
  CVector out(in.size());
  CVector x(tdim);
  for (auto base : emb.bases) {
    for (Eigen::Index t = 0; t < tdim; ++t) {
      x[t] = in[static_cast<Eigen::Index>(base + emb.offsets[t])];
    }
    CVector y = m * x;
    for (Eigen::Index t = 0; t < tdim; ++t) {
      out[static_cast<Eigen::Index>(base + emb.offsets[t])] = y[t];
    }
  }
  return out;
}

inline void check_operator_fits(const Operator &op, const ModeLayout &layout) {
  std::size_t tdim = 1;
  for (const auto &t : op.targets()) {
    if (!layout.contains(t)) {
      throw LayoutError("operator target '" + t + "' not in layout");
    }
    tdim *= layout.find(t).dim();
  }
  if (tdim != op.dim()) {
    throw DimensionError("operator dimension " + std::to_string(op.dim()) +
                         " does not match target dimension " +
                         std::to_string(tdim));
  }
}

inline StateVec apply(const Operator &op, const StateVec &state) {
  check_operator_fits(op, state.layout());
  Embedding emb(state.layout(), op.targets());
  return StateVec(state.layout(), apply_matrix(op.matrix(), emb, state.amps()));
}

/// Diagonal projector on `targets` keeping basis states accepted by `keep`,
/// which receives the target labels in target order.
inline Operator diagonal_projector(
    const ModeLayout &layout, std::vector<std::string> targets,
    const std::function<bool(const std::vector<std::string> &)> &keep) {
  const ModeLayout sub = target_layout(layout, targets);
  CMatrix p = CMatrix::Zero(static_cast<Eigen::Index>(sub.total_dim()),
                            static_cast<Eigen::Index>(sub.total_dim()));
  for (std::size_t i = 0; i < sub.total_dim(); ++i) {
    if (keep(labels_of(sub, i))) {
      p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
    }
  }
  return Operator(std::move(targets), std::move(p));
}

/// Projector onto a single joint basis state of the targets.
inline Operator basis_projector(const ModeLayout &layout,
                                std::vector<std::string> targets,
                                std::vector<std::string> labels) {
  return diagonal_projector(layout, std::move(targets),
                            [labels = std::move(labels)](const auto &l) {
                              return l == labels;
                            });
}

struct Branch {
  StateVec branch;
  double prob;
};

/// P|psi> (unnormalized) and its probability relative to the input norm.
inline Branch project(const StateVec &state, const Operator &projector) {
  check_operator_fits(projector, state.layout());
  const auto &p = projector.matrix();
  if ((p * p - p).cwiseAbs().maxCoeff() > tolerances().structural) {
    throw StateError("projector is not idempotent");
  }
  if (state.norm2() <= 0.0) throw StateError("cannot project a zero state");
  StateVec out = apply(Operator(projector.targets(), p), state);
  const double prob = std::clamp(out.norm2() / state.norm2(), 0.0, 1.0);
  return {std::move(out), prob};
}

/// Probability weight (not relative) of the projected component.
inline double weight(const StateVec &state, const Operator &projector) {
  check_operator_fits(projector, state.layout());
  Embedding emb(state.layout(), projector.targets());
  return apply_matrix(projector.matrix(), emb, state.amps()).squaredNorm();
}

// ---------------------------------------------------------------------------
// Density operators

class DensityOp {
 public:
  DensityOp(ModeLayout layout, CMatrix matrix)
      : layout_(std::move(layout)), matrix_(std::move(matrix)) {
    const auto n = static_cast<Eigen::Index>(layout_.total_dim());
    if (matrix_.rows() != n || matrix_.cols() != n) {
      throw DimensionError("density matrix size does not match layout");
    }
    if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() >
        tolerances().structural) {
      throw StateError("density matrix is not Hermitian");
    }
    trace_ = matrix_.trace().real();
    if (trace_ < -tolerances().structural ||
        trace_ > 1.0 + tolerances().structural) {
      throw StateError("density trace " + std::to_string(trace_) +
                       " outside [0,1]");
    }
  }

  [[nodiscard]] const ModeLayout &layout() const { return layout_; }
  [[nodiscard]] const CMatrix &matrix() const { return matrix_; }
  [[nodiscard]] double trace() const { return trace_; }

  [[nodiscard]] double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(matrix_,
                                              Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  [[nodiscard]] bool is_psd() const {
    return min_eigenvalue() >= -tolerances().psd_floor;
  }

  [[nodiscard]] DensityOp normalized() const {
    if (trace_ <= 0.0) throw StateError("cannot normalize zero-trace density");
    return DensityOp(layout_, matrix_ / trace_);
  }

  /// <v|rho|v> for a vector over the same layout.
  [[nodiscard]] double expectation(const CVector &v) const {
    return (v.adjoint() * matrix_ * v)(0, 0).real();
  }

 private:
  ModeLayout layout_;
  CMatrix matrix_;
  double trace_ = 0.0;
};

inline DensityOp to_density(const StateVec &state) {
  return DensityOp(state.layout(), state.amps() * state.amps().adjoint());
}

inline DensityOp mix(const std::vector<std::pair<double, DensityOp>> &terms) {
  if (terms.empty()) throw StateError("mix of zero terms");
  const auto &layout = terms.front().second.layout();
  CMatrix acc = CMatrix::Zero(terms.front().second.matrix().rows(),
                              terms.front().second.matrix().cols());
  for (const auto &[w, rho] : terms) {
    if (w < 0.0) throw StateError("negative mixing weight");
    if (!(rho.layout() == layout)) {
      throw LayoutError("layout mismatch across mixed terms");
    }
    acc += w * rho.matrix();
  }
  return DensityOp(layout, std::move(acc));
}

namespace detail {

struct TraceSplit {
  ModeLayout kept;
  std::vector<std::size_t> keep_pos;
  std::vector<std::size_t> drop_pos;
};

inline TraceSplit split_for_trace(const ModeLayout &layout,
                                  const std::vector<std::string> &keep) {
  if (keep.empty()) throw LayoutError("partial trace needs a kept subsystem");
  TraceSplit s;
  std::vector<Subsystem> subs;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto &name = layout.at(i).name;
    if (std::find(keep.begin(), keep.end(), name) != keep.end()) {
      s.keep_pos.push_back(i);
      subs.push_back(layout.at(i));
    } else {
      s.drop_pos.push_back(i);
    }
  }
  for (const auto &k : keep) (void)layout.position(k);
  s.kept = ModeLayout(std::move(subs));
  return s;
}

// Full index = kept_offset[k] + drop_offset[r].
inline std::vector<std::size_t> offsets_for(
    const ModeLayout &layout, const std::vector<std::size_t> &positions) {
  std::size_t n = 1;
  for (auto p : positions) n *= layout.at(p).dim();
  std::vector<std::size_t> out(n, 0);
  for (std::size_t t = 0; t < n; ++t) {
    std::size_t rem = t, off = 0;
    for (std::size_t j = positions.size(); j-- > 0;) {
      const auto d = layout.at(positions[j]).dim();
      off += (rem % d) * layout.stride(positions[j]);
      rem /= d;
    }
    out[t] = off;
  }
  return out;
}

}  // namespace detail

/// Reduced density on `keep` (subsystems in layout order).
inline DensityOp partial_trace(const DensityOp &rho,
                               const std::vector<std::string> &keep) {
  auto split = detail::split_for_trace(rho.layout(), keep);
  const auto ko = detail::offsets_for(rho.layout(), split.keep_pos);
  const auto ro = detail::offsets_for(rho.layout(), split.drop_pos);
  const auto n = static_cast<Eigen::Index>(ko.size());
  CMatrix out = CMatrix::Zero(n, n);
  const auto &m = rho.matrix();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Complex acc = 0.0;
      for (auto r : ro) {
        acc += m(static_cast<Eigen::Index>(ko[i] + r),
                 static_cast<Eigen::Index>(ko[j] + r));
      }
      out(i, j) = acc;
    }
  }
  return DensityOp(std::move(split.kept), std::move(out));
}

/// Same as partial_trace(to_density(state), keep) without forming the full
/// density matrix.
inline DensityOp reduced_density(const StateVec &state,
                                 const std::vector<std::string> &keep) {
  auto split = detail::split_for_trace(state.layout(), keep);
  const auto ko = detail::offsets_for(state.layout(), split.keep_pos);
  const auto ro = detail::offsets_for(state.layout(), split.drop_pos);
  CMatrix psi(static_cast<Eigen::Index>(ko.size()),
              static_cast<Eigen::Index>(ro.size()));
  for (std::size_t k = 0; k < ko.size(); ++k) {
    for (std::size_t r = 0; r < ro.size(); ++r) {
      psi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(r)) =
          state.amps()[static_cast<Eigen::Index>(ko[k] + ro[r])];
    }
  }
  CMatrix rho = psi * psi.adjoint();
  rho = 0.5 * (rho + rho.adjoint());
  return DensityOp(std::move(split.kept), std::move(rho));
}

// ---------------------------------------------------------------------------
// Sampling

/// Draws an index from a discrete distribution (weights need not be
/// normalized).
inline std::size_t sample_index(std::span<const double> probs, Rng &rng) {
  double total = 0.0;
  for (double p : probs) total += p;
  if (!(total > 0.0)) throw StateError("cannot sample from zero weights");
  std::uniform_real_distribution<double> u(0.0, total);
  const double x = u(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (x < acc) return i;
  }
  return last;
}

struct Measurement {
  std::size_t outcome;
  StateVec collapsed;
};

/// Born-rule measurement with a complete set of orthogonal projectors.
inline Measurement born_sample(const StateVec &state,
                               const std::vector<Operator> &projectors,
                               Rng &rng) {
  if (projectors.empty()) throw StateError("empty measurement");
  const auto &targets = projectors.front().targets();
  CMatrix sum = CMatrix::Zero(projectors.front().matrix().rows(),
                              projectors.front().matrix().cols());
  for (const auto &p : projectors) {
    if (p.targets() != targets) {
      throw StateError("measurement projectors must share targets");
    }
    sum += p.matrix();
  }
  if ((sum - CMatrix::Identity(sum.rows(), sum.cols())).cwiseAbs().maxCoeff() >
      tolerances().structural) {
    throw StateError("projectors do not sum to identity");
  }
  std::vector<Branch> branches;
  std::vector<double> probs;
  branches.reserve(projectors.size());
  for (const auto &p : projectors) {
    branches.push_back(project(state, p));
    probs.push_back(branches.back().prob);
  }
  const auto k = sample_index(probs, rng);
  return {k, branches[k].branch.normalized()};
}

// ---------------------------------------------------------------------------
// Unitary construction helpers

/// Haar-random unitary: QR of a complex Gaussian matrix with the phases of
/// R's diagonal folded into Q.
inline CMatrix random_unitary(std::size_t n, Rng &rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const auto m = static_cast<Eigen::Index>(n);
  CMatrix z(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) z(i, j) = Complex(g(rng), g(rng));
  }
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ() * CMatrix::Identity(m, m);
  CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < m; ++j) {
    const Complex d = r(j, j);
    const double a = std::abs(d);
    q.col(j) *= (a > 0.0 ? d / a : Complex(1.0));
  }
  return q;
}

/// U^s on the principal branch; s=1 returns U, s=0 the identity.
inline CMatrix unitary_power(const CMatrix &u, double s) {
  Eigen::ComplexSchur<CMatrix> schur(u);
  const CMatrix &t = schur.matrixT();
  CMatrix d = CMatrix::Zero(t.rows(), t.cols());
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    d(i, i) = std::exp(kI * (s * std::arg(t(i, i))));
  }
  const CMatrix &q = schur.matrixU();
  return q * d * q.adjoint();
}

/// Fills the columns not marked `fixed` with an orthonormal basis of the
/// complement of the fixed columns. Candidates are tried in the order e_j
/// (the column's own basis vector) then e_0, e_1, ... so unreached inputs
/// map to themselves whenever that is consistent.
inline CMatrix complete_unitary(const CMatrix &partial,
                                const std::vector<bool> &fixed) {
  const auto n = partial.rows();
  CMatrix out = partial;
  std::vector<CVector> basis;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (fixed[static_cast<std::size_t>(j)]) basis.emplace_back(out.col(j));
  }
  auto residual = [&](CVector v) {
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto &b : basis) v -= b * b.dot(v);
    }
    return v;
  };
  for (Eigen::Index j = 0; j < n; ++j) {
    if (fixed[static_cast<std::size_t>(j)]) continue;
    bool placed = false;
    for (Eigen::Index c = -1; c < n && !placed; ++c) {
      CVector e = CVector::Zero(n);
      e[c < 0 ? j : c] = 1.0;
      CVector r = residual(e);
      const double nr = r.norm();
      if (nr > 1e-6) {
        r /= nr;
        out.col(j) = r;
        basis.push_back(r);
        placed = true;
      }
    }
    if (!placed) throw DimensionError("fixed columns are not orthonormal");
  }
  if (!is_unitary(out)) throw DimensionError("completion is not unitary");
  return out;
}

/// Column map builder: maps input basis labels to output superpositions over
/// a target sub-layout; unspecified columns are completed to a unitary.
class UnitaryBuilder {
 public:
  explicit UnitaryBuilder(ModeLayout sub)
      : sub_(std::move(sub)),
        partial_(CMatrix::Zero(static_cast<Eigen::Index>(sub_.total_dim()),
                               static_cast<Eigen::Index>(sub_.total_dim()))),
        fixed_(sub_.total_dim(), false) {}

  UnitaryBuilder &map(std::initializer_list<std::string> in,
                      std::vector<std::pair<Complex, std::vector<std::string>>>
                          out) {
    const auto j = static_cast<Eigen::Index>(index_of(sub_, in));
    partial_.col(j).setZero();
    for (const auto &[c, labels] : out) {
      partial_(static_cast<Eigen::Index>(index_of(sub_, labels)), j) += c;
    }
    fixed_[static_cast<std::size_t>(j)] = true;
    return *this;
  }

  [[nodiscard]] const ModeLayout &layout() const { return sub_; }

  [[nodiscard]] CMatrix build() const {
    return complete_unitary(partial_, fixed_);
  }

 private:
  ModeLayout sub_;
  CMatrix partial_;
  std::vector<bool> fixed_;
};

}  // namespace cfq
