#include "synth/dist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

namespace synth {

namespace {

std::vector<int> default_symbols(Index k) {
  std::vector<int> s(static_cast<std::size_t>(k));
  std::iota(s.begin(), s.end(), 0);
  return s;
}

void check_symbols(const std::vector<int>& s, Index k, const char* what) {
  if (static_cast<Index>(s.size()) != k)
    throw DomainError(std::string(what) + ": symbol list length does not match mass");
  if (std::set<int>(s.begin(), s.end()).size() != s.size())
    throw DomainError(std::string(what) + ": duplicate symbols");
}

// Clamps tiny negatives, rejects bad entries and rescales sums close to 1.
template <typename Derived>
void normalize_in_place(Eigen::DenseBase<Derived>& m, const char* what) {
  if (m.size() == 0) throw DomainError(std::string(what) + ": empty mass");
  double total = 0.0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      double& v = m(i, j);
      if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite mass");
      if (v < 0.0) {
        if (v < -kClampTol) throw DomainError(std::string(what) + ": negative mass");
        v = 0.0;
      }
      total += v;
    }
  if (std::abs(total - 1.0) > kRenormTol)
    throw DomainError(std::string(what) + ": mass sums to " + std::to_string(total));
  m /= total;
}

}  // namespace

// ---------------------------------------------------------------------------

Pmf::Pmf(Eigen::VectorXd mass, std::vector<int> symbols) : mass_(std::move(mass)) {
  normalize_in_place(mass_, "Pmf");
  symbols_ = symbols.empty() ? default_symbols(mass_.size()) : std::move(symbols);
  check_symbols(symbols_, mass_.size(), "Pmf");
}

Pmf Pmf::uniform(Index k) {
  if (k < 1) throw DomainError("Pmf::uniform: k must be positive");
  return Pmf(Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)));
}

Pmf Pmf::point(Index k, Index at) {
  if (at < 0 || at >= k) throw DomainError("Pmf::point: index out of range");
  Eigen::VectorXd m = Eigen::VectorXd::Zero(k);
  m(at) = 1.0;
  return Pmf(m);
}

Pmf Pmf::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("Pmf::bernoulli: p outside [0,1]");
  Eigen::VectorXd m(2);
  m << 1.0 - p, p;
  return Pmf(m);
}

JointPmf::JointPmf(Eigen::MatrixXd mass, std::vector<int> row_symbols,
                   std::vector<int> col_symbols)
    : mass_(std::move(mass)) {
  normalize_in_place(mass_, "JointPmf");
  row_symbols_ = row_symbols.empty() ? default_symbols(mass_.rows()) : std::move(row_symbols);
  col_symbols_ = col_symbols.empty() ? default_symbols(mass_.cols()) : std::move(col_symbols);
  check_symbols(row_symbols_, mass_.rows(), "JointPmf rows");
  check_symbols(col_symbols_, mass_.cols(), "JointPmf cols");
}

JointPmf JointPmf::product(const Pmf& px, const Pmf& py) {
  return JointPmf(px.mass() * py.mass().transpose(), px.symbols(), py.symbols());
}

JointPmf JointPmf::dsbs(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("JointPmf::dsbs: p outside [0,1]");
  Eigen::Matrix2d m;
  m << (1.0 - p) / 2, p / 2, p / 2, (1.0 - p) / 2;
  return JointPmf(m);
}

Pmf JointPmf::row_marginal() const { return Pmf(mass_.rowwise().sum(), row_symbols_); }
Pmf JointPmf::col_marginal() const { return Pmf(mass_.colwise().sum().transpose(), col_symbols_); }

Channel::Channel(Eigen::MatrixXd rows, std::vector<int> input_symbols,
                 std::vector<int> output_symbols)
    : rows_(std::move(rows)) {
  if (rows_.rows() == 0 || rows_.cols() == 0) throw DomainError("Channel: empty matrix");
  for (Index i = 0; i < rows_.rows(); ++i) {
    Eigen::RowVectorXd r = rows_.row(i);
    normalize_in_place(r, "Channel row");
    rows_.row(i) = r;
  }
  input_symbols_ = input_symbols.empty() ? default_symbols(rows_.rows()) : std::move(input_symbols);
  output_symbols_ =
      output_symbols.empty() ? default_symbols(rows_.cols()) : std::move(output_symbols);
  check_symbols(input_symbols_, rows_.rows(), "Channel inputs");
  check_symbols(output_symbols_, rows_.cols(), "Channel outputs");
}

Channel Channel::identity(Index k) { return Channel(Eigen::MatrixXd::Identity(k, k)); }

Channel Channel::bsc(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw DomainError("Channel::bsc: a outside [0,1]");
  Eigen::Matrix2d m;
  m << 1.0 - a, a, a, 1.0 - a;
  return Channel(m);
}

Channel Channel::conditional_of(const JointPmf& joint) {
  Eigen::MatrixXd m = joint.mass();
  for (Index i = 0; i < m.rows(); ++i) {
    const double s = m.row(i).sum();
    if (s > 0.0)
      m.row(i) /= s;
    else
      m.row(i).setConstant(1.0 / static_cast<double>(m.cols()));
  }
  return Channel(m, joint.row_symbols(), joint.col_symbols());
}

JointPmf Channel::joint_with(const Pmf& input) const {
  if (input.size() != inputs()) throw DomainError("Channel::joint_with: size mismatch");
  return JointPmf(input.mass().asDiagonal() * rows_, input_symbols_, output_symbols_);
}

// ---------------------------------------------------------------------------

double entropy(const Pmf& p) { return entropy_of(p.mass()); }
double entropy(const JointPmf& j) { return entropy_of(j.mass()); }

double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("binary_entropy: argument outside [0,1]");
  double h = 0.0;
  if (x > 0.0) h -= x * std::log(x);
  if (x < 1.0) h -= (1.0 - x) * std::log1p(-x);
  return h;
}

double mutual_information(const JointPmf& j) {
  const Eigen::VectorXd px = j.mass().rowwise().sum();
  const Eigen::RowVectorXd py = j.mass().colwise().sum();
  double i = 0.0;
  for (Index r = 0; r < j.rows(); ++r)
    for (Index c = 0; c < j.cols(); ++c) {
      const double v = j(r, c);
      if (v > 0.0) i += v * std::log(v / (px(r) * py(c)));
    }
  return std::max(i, 0.0);
}

double conditional_entropy(const JointPmf& j) {
  return std::max(entropy_of(j.mass()) - entropy_of(j.mass().rowwise().sum()), 0.0);
}

double kl_divergence(const Pmf& p, const Pmf& q) {
  if (p.size() != q.size()) throw DomainError("kl_divergence: size mismatch");
  return std::max(kl_of(p.mass(), q.mass()), 0.0);
}

double renyi_inf_divergence(const Pmf& p, const Pmf& q) {
  if (p.size() != q.size()) throw DomainError("renyi_inf_divergence: size mismatch");
  return renyi_inf_of(p.mass(), q.mass());
}

double renyi_inf_divergence(const Channel& p, const Channel& q, const Pmf& px) {
  if (p.inputs() != q.inputs() || p.outputs() != q.outputs() || px.size() != p.inputs())
    throw DomainError("renyi_inf_divergence: size mismatch");
  const Eigen::MatrixXd a = px.mass().asDiagonal() * p.matrix();
  const Eigen::MatrixXd b = px.mass().asDiagonal() * q.matrix();
  return renyi_inf_of(a.reshaped(), b.reshaped());
}

double tv_distance(const Pmf& p, const Pmf& q) {
  if (p.size() != q.size()) throw DomainError("tv_distance: size mismatch");
  return 0.5 * (p.mass() - q.mass()).cwiseAbs().sum();
}

double tv_distance(const JointPmf& p, const JointPmf& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) throw DomainError("tv_distance: size mismatch");
  return 0.5 * (p.mass() - q.mass()).cwiseAbs().sum();
}

// ---------------------------------------------------------------------------

std::uint64_t checked_power(Index k, int n, std::uint64_t budget) {
  if (k < 1 || n < 1) throw DomainError("sequence space needs k >= 1 and n >= 1");
  std::uint64_t total = 1;
  for (int i = 0; i < n; ++i) {
    total *= static_cast<std::uint64_t>(k);
    if (total > budget)
      throw BudgetExceeded(std::to_string(k) + "^" + std::to_string(n) +
                           " atoms exceed the enumeration budget of " + std::to_string(budget));
  }
  return total;
}

std::uint64_t encode_sequence(std::span<const int> symbols, Index alphabet) {
  std::uint64_t idx = 0;
  for (int s : symbols) {
    if (s < 0 || s >= alphabet) throw DomainError("encode_sequence: symbol out of range");
    idx = idx * static_cast<std::uint64_t>(alphabet) + static_cast<std::uint64_t>(s);
  }
  return idx;
}

std::vector<int> decode_sequence(std::uint64_t index, Index alphabet, int n) {
  std::vector<int> out(static_cast<std::size_t>(n));
  const auto k = static_cast<std::uint64_t>(alphabet);
  for (int i = n - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<int>(index % k);
    index /= k;
  }
  return out;
}

SequenceDist::SequenceDist(int n, Index alphabet, Eigen::VectorXd mass)
    : n_(n), alphabet_(alphabet), mass_(std::move(mass)) {
  if (n < 1) throw DomainError("SequenceDist: n must be >= 1");
  if (static_cast<std::uint64_t>(mass_.size()) != checked_power(alphabet, n, ~std::uint64_t{0}))
    throw DomainError("SequenceDist: mass length is not alphabet^n");
  normalize_in_place(mass_, "SequenceDist");
}

namespace {

// Fills v with the n-fold Kronecker power of base (position 0 most significant).
Eigen::VectorXd kron_power(const Eigen::VectorXd& base, int n) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(1);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd next(v.size() * base.size());
    for (Index a = 0; a < v.size(); ++a) next.segment(a * base.size(), base.size()) = v(a) * base;
    v = std::move(next);
  }
  return v;
}

}  // namespace

SequenceDist product_power(const Pmf& p, int n, std::uint64_t budget) {
  checked_power(p.size(), n, budget);
  return SequenceDist(n, p.size(), kron_power(p.mass(), n));
}

Eigen::MatrixXd channel_power(const Channel& w, int n, std::uint64_t budget) {
  const std::uint64_t rows = checked_power(w.inputs(), n, budget);
  const std::uint64_t cols = checked_power(w.outputs(), n, budget);
  if (rows * cols > budget * budget) throw BudgetExceeded("channel_power: too many atoms");
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(1, 1);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd next(m.rows() * w.inputs(), m.cols() * w.outputs());
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c)
        next.block(r * w.inputs(), c * w.outputs(), w.inputs(), w.outputs()) = m(r, c) * w.matrix();
    m = std::move(next);
  }
  return m;
}

JointPmf joint_power(const JointPmf& j, int n, std::uint64_t budget) {
  const std::uint64_t rows = checked_power(j.rows(), n, budget);
  const std::uint64_t cols = checked_power(j.cols(), n, budget);
  if (rows * cols > budget) throw BudgetExceeded("joint_power: too many atoms");
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(1, 1);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd next(m.rows() * j.rows(), m.cols() * j.cols());
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c)
        next.block(r * j.rows(), c * j.cols(), j.rows(), j.cols()) = m(r, c) * j.mass();
    m = std::move(next);
  }
  return JointPmf(m);
}

// ---------------------------------------------------------------------------

CountBounds typical_count_bounds(double q, int n, double eps) {
  if (!(eps >= 0.0)) throw DomainError("typicality: eps must be >= 0");
  if (q <= 0.0) return {0, 0};
  const double nn = static_cast<double>(n);
  // The 1e-9 guard keeps exact-type boundaries (e.g. eps = 0) inside the set.
  const double lo = std::ceil(nn * q * (1.0 - eps) - 1e-9);
  const double hi = std::floor(nn * q * (1.0 + eps) + 1e-9);
  return {static_cast<long>(std::max(lo, 0.0)), static_cast<long>(std::min(hi, nn))};
}

bool is_strongly_typical(std::span<const int> seq, const TypicalSetSpec& ts) {
  const Index k = ts.base.size();
  std::vector<long> counts(static_cast<std::size_t>(k), 0);
  for (int s : seq) {
    if (s < 0 || s >= k) throw DomainError("is_strongly_typical: symbol out of range");
    ++counts[static_cast<std::size_t>(s)];
  }
  const int n = static_cast<int>(seq.size());
  for (Index i = 0; i < k; ++i) {
    const CountBounds b = typical_count_bounds(ts.base(i), n, ts.eps);
    const long c = counts[static_cast<std::size_t>(i)];
    if (c < b.lo || c > b.hi) return false;
  }
  return true;
}

bool is_jointly_typical(std::span<const int> x, std::span<const int> y, const JointPmf& pxy,
                        double eps) {
  if (x.size() != y.size()) throw DomainError("is_jointly_typical: length mismatch");
  const Index cols = pxy.cols();
  std::vector<int> pairs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0 || x[i] >= pxy.rows() || y[i] < 0 || y[i] >= cols)
      throw DomainError("is_jointly_typical: symbol out of range");
    pairs[i] = static_cast<int>(x[i] * cols + y[i]);
  }
  const Eigen::VectorXd flat = pxy.mass().transpose().reshaped();
  return is_strongly_typical(pairs, {Pmf(flat), eps, static_cast<int>(x.size())});
}

std::vector<char> typical_mask(const Pmf& p, int n, double eps, std::uint64_t budget) {
  const std::uint64_t total = checked_power(p.size(), n, budget);
  std::vector<CountBounds> bounds;
  for (Index i = 0; i < p.size(); ++i) bounds.push_back(typical_count_bounds(p(i), n, eps));
  std::vector<char> mask(total, 0);
  std::vector<int> digits(static_cast<std::size_t>(n), 0);
  std::vector<long> counts(static_cast<std::size_t>(p.size()), 0);
  counts[0] = n;
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    bool ok = true;
    for (std::size_t s = 0; s < counts.size() && ok; ++s)
      ok = counts[s] >= bounds[s].lo && counts[s] <= bounds[s].hi;
    mask[idx] = ok ? 1 : 0;
    // Mixed-radix increment keeping symbol counts current.
    for (int pos = n - 1; pos >= 0; --pos) {
      auto& d = digits[static_cast<std::size_t>(pos)];
      --counts[static_cast<std::size_t>(d)];
      if (++d < p.size()) {
        ++counts[static_cast<std::size_t>(d)];
        break;
      }
      d = 0;
      ++counts[0];
    }
  }
  return mask;
}

SequenceDist truncate_to_typical(const Pmf& p, int n, double eps, std::uint64_t budget) {
  Eigen::VectorXd m = product_power(p, n, budget).mass();
  const std::vector<char> mask = typical_mask(p, n, eps, budget);
  double kept = 0.0;
  for (Index i = 0; i < m.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) m(i) = 0.0;
    kept += m(i);
  }
  if (kept <= 0.0)
    throw EmptyTypicalSet("truncate_to_typical: typical set is empty for n=" + std::to_string(n) +
                          ", eps=" + std::to_string(eps));
  return SequenceDist(n, p.size(), m / kept);
}

}  // namespace synth
