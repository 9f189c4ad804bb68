#pragma once

// Finite discrete distributions and the information measures used by the
// rest of the library. All entropic quantities are in nats.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "synth/error.hpp"

namespace synth {

using Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNormTol = 1e-9;     // accepted drift after construction
inline constexpr double kRenormTol = 1e-6;   // inputs this close to 1 are rescaled
inline constexpr double kClampTol = 1e-12;   // negatives this small are clamped to 0

enum class Units { Nats, Bits };

/// Converts a value in nats to the requested units.
inline double to_units(double nats, Units u) {
  return u == Units::Bits ? nats / std::log(2.0) : nats;
}
inline double from_units(double value, Units u) {
  return u == Units::Bits ? value * std::log(2.0) : value;
}

/// Validated, normalized probability vector. Symbols default to 0..k-1.
class Pmf {
 public:
  Pmf() = default;
  explicit Pmf(Eigen::VectorXd mass, std::vector<int> symbols = {});

  static Pmf uniform(Index k);
  static Pmf point(Index k, Index at);
  /// (1-p, p): mass p on symbol 1.
  static Pmf bernoulli(double p);

  Index size() const { return mass_.size(); }
  const Eigen::VectorXd& mass() const { return mass_; }
  const std::vector<int>& symbols() const { return symbols_; }
  double operator()(Index i) const { return mass_(i); }
  double operator[](Index i) const { return mass_(i); }

 private:
  Eigen::VectorXd mass_;
  std::vector<int> symbols_;
};

/// Joint pmf on rows x cols.
class JointPmf {
 public:
  JointPmf() = default;
  explicit JointPmf(Eigen::MatrixXd mass, std::vector<int> row_symbols = {},
                    std::vector<int> col_symbols = {});

  static JointPmf product(const Pmf& px, const Pmf& py);
  /// Doubly symmetric binary source: X uniform, Y = X xor Bern(p).
  static JointPmf dsbs(double p);

  Index rows() const { return mass_.rows(); }
  Index cols() const { return mass_.cols(); }
  const Eigen::MatrixXd& mass() const { return mass_; }
  double operator()(Index i, Index j) const { return mass_(i, j); }
  const std::vector<int>& row_symbols() const { return row_symbols_; }
  const std::vector<int>& col_symbols() const { return col_symbols_; }

  Pmf row_marginal() const;
  Pmf col_marginal() const;

 private:
  Eigen::MatrixXd mass_;
  std::vector<int> row_symbols_;
  std::vector<int> col_symbols_;
};

/// Row-stochastic matrix: row i is the output pmf given input i.
class Channel {
 public:
  Channel() = default;
  explicit Channel(Eigen::MatrixXd rows, std::vector<int> input_symbols = {},
                   std::vector<int> output_symbols = {});

  static Channel identity(Index k);
  /// Binary symmetric channel with crossover probability a.
  static Channel bsc(double a);
  /// Row i of pi_{Y|X}; rows with zero input mass become uniform.
  static Channel conditional_of(const JointPmf& joint);

  Index inputs() const { return rows_.rows(); }
  Index outputs() const { return rows_.cols(); }
  const Eigen::MatrixXd& matrix() const { return rows_; }
  double operator()(Index in, Index out) const { return rows_(in, out); }
  Pmf row(Index in) const { return Pmf(rows_.row(in).transpose()); }
  const std::vector<int>& input_symbols() const { return input_symbols_; }
  const std::vector<int>& output_symbols() const { return output_symbols_; }

  JointPmf joint_with(const Pmf& input) const;

 private:
  Eigen::MatrixXd rows_;
  std::vector<int> input_symbols_;
  std::vector<int> output_symbols_;
};

// ---------------------------------------------------------------------------
// Expression-friendly measures on raw mass arrays.

/// -sum p log p over the positive entries.
template <typename Derived>
double entropy_of(const Eigen::DenseBase<Derived>& mass) {
  double h = 0.0;
  for (Index i = 0; i < mass.rows(); ++i)
    for (Index j = 0; j < mass.cols(); ++j) {
      const double v = mass(i, j);
      if (v > 0.0) h -= v * std::log(v);
    }
  return h;
}

/// sum over supp(p) of p log(p/q); +inf when q vanishes on supp(p).
template <typename DerivedP, typename DerivedQ>
double kl_of(const Eigen::DenseBase<DerivedP>& p, const Eigen::DenseBase<DerivedQ>& q) {
  double d = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    const double pi = p(i);
    if (pi <= 0.0) continue;
    const double qi = q(i);
    if (qi <= 0.0) return kInf;
    d += pi * std::log(pi / qi);
  }
  return d;
}

/// log max over supp(p) of p/q; +inf when q vanishes on supp(p).
template <typename DerivedP, typename DerivedQ>
double renyi_inf_of(const Eigen::DenseBase<DerivedP>& p, const Eigen::DenseBase<DerivedQ>& q) {
  double best = 0.0;
  bool any = false;
  for (Index i = 0; i < p.size(); ++i) {
    const double pi = p(i);
    if (pi <= 0.0) continue;
    const double qi = q(i);
    if (qi <= 0.0) return kInf;
    const double r = pi / qi;
    if (!any || r > best) best = r;
    any = true;
  }
  return any ? std::log(best) : 0.0;
}

double entropy(const Pmf& p);
double entropy(const JointPmf& j);
/// H2(x) = -x log x - (1-x) log(1-x), in nats.
double binary_entropy(double x);
double mutual_information(const JointPmf& j);
/// H(Y|X) for the joint in row=X, col=Y orientation.
double conditional_entropy(const JointPmf& j);
double kl_divergence(const Pmf& p, const Pmf& q);
double renyi_inf_divergence(const Pmf& p, const Pmf& q);
/// D_inf(P_{Y|X} || Q_{Y|X} | P_X) = D_inf(P_X P_{Y|X} || P_X Q_{Y|X}).
double renyi_inf_divergence(const Channel& p, const Channel& q, const Pmf& px);
double tv_distance(const Pmf& p, const Pmf& q);
double tv_distance(const JointPmf& p, const JointPmf& q);

// ---------------------------------------------------------------------------
// Sequences over a finite alphabet, indexed by mixed-radix encoding with
// position 0 as the most significant digit.

inline constexpr std::uint64_t kDefaultAtomBudget = 200'000;

/// k^n, throwing BudgetExceeded when it exceeds `budget`.
std::uint64_t checked_power(Index k, int n, std::uint64_t budget);

std::uint64_t encode_sequence(std::span<const int> symbols, Index alphabet);
std::vector<int> decode_sequence(std::uint64_t index, Index alphabet, int n);

/// Pmf over all length-n strings of an alphabet, enumerated explicitly.
class SequenceDist {
 public:
  SequenceDist() = default;
  SequenceDist(int n, Index alphabet, Eigen::VectorXd mass);

  int length() const { return n_; }
  Index alphabet() const { return alphabet_; }
  Index atoms() const { return mass_.size(); }
  const Eigen::VectorXd& mass() const { return mass_; }
  double operator()(std::uint64_t index) const { return mass_(static_cast<Index>(index)); }
  double at(std::span<const int> symbols) const { return (*this)(encode_sequence(symbols, alphabet_)); }
  Pmf as_pmf() const { return Pmf(mass_); }

 private:
  int n_ = 0;
  Index alphabet_ = 0;
  Eigen::VectorXd mass_;
};

SequenceDist product_power(const Pmf& p, int n, std::uint64_t budget = kDefaultAtomBudget);

/// Product channel: row x^n, column y^n, entries prod_i W(y_i|x_i).
Eigen::MatrixXd channel_power(const Channel& w, int n, std::uint64_t budget = kDefaultAtomBudget);

/// The n-fold product joint pmf with row/col indices in mixed radix.
JointPmf joint_power(const JointPmf& j, int n, std::uint64_t budget = kDefaultAtomBudget);

// ---------------------------------------------------------------------------
// Strong typicality: |T(x) - P(x)| <= eps P(x) for every symbol.

struct TypicalSetSpec {
  Pmf base;
  double eps = 0.1;
  int n = 1;
};

/// Inclusive integer bounds on the count of a symbol with probability q.
struct CountBounds {
  long lo = 0;
  long hi = 0;
};
CountBounds typical_count_bounds(double q, int n, double eps);

bool is_strongly_typical(std::span<const int> seq, const TypicalSetSpec& ts);
/// (x^n, y^n) in T_eps(P_XY); the conditional set T_eps(P_XY | x^n) is the
/// set of y^n for which this holds.
bool is_jointly_typical(std::span<const int> x, std::span<const int> y, const JointPmf& pxy,
                        double eps);

/// pi^n restricted to T_eps(pi) and renormalized.
SequenceDist truncate_to_typical(const Pmf& p, int n, double eps,
                                 std::uint64_t budget = kDefaultAtomBudget);

/// Membership mask of T_eps(p) over all k^n strings.
std::vector<char> typical_mask(const Pmf& p, int n, double eps,
                               std::uint64_t budget = kDefaultAtomBudget);

}  // namespace synth
