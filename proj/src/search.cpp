#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include "synth/parallel.hpp"
#include "synth/regions.hpp"
#include "synth/rng.hpp"

namespace synth {

namespace {

constexpr double kZeroProb = 1e-12;
constexpr double kLogitClamp = 40.0;

struct Point {
  double r = 0.0;
  double s = 0.0;
};

struct Probs {
  Eigen::VectorXd pw;
  Eigen::MatrixXd px, py;
};

void softmax(const double* in, Index k, Index stride, double* out, Index out_stride) {
  double mx = -kInf;
  for (Index i = 0; i < k; ++i) mx = std::max(mx, in[i * stride]);
  double total = 0.0;
  for (Index i = 0; i < k; ++i) {
    const double e = std::exp(in[i * stride] - mx);
    out[i * out_stride] = e;
    total += e;
  }
  double kept = 0.0;
  for (Index i = 0; i < k; ++i) {
    double& v = out[i * out_stride];
    v /= total;
    if (v < kZeroProb) v = 0.0;
    kept += v;
  }
  for (Index i = 0; i < k; ++i) out[i * out_stride] /= kept;
}

// A decomposition with K free symbols, made to induce pi exactly by scaling
// it by c and adding point-mass symbols carrying the remainder Q.
struct Repaired {
  Probs base;
  double c = 1.0;
  Eigen::MatrixXd q;
};

class Evaluator {
 public:
  Evaluator(const JointPmf& pi, Bound bound, Index k)
      : pi_(pi.mass()), bound_(bound), k_(k), nx_(pi.rows()), ny_(pi.cols()),
        cost_(log_loss_cost(pi)), hx_pi_(entropy(pi.row_marginal())), h_pi_(entropy(pi)) {}

  Index dims() const { return k_ * (1 + nx_ + ny_); }
  Index k() const { return k_; }

  Repaired repair(const Eigen::VectorXd& theta) const {
    Repaired out;
    Probs& p = out.base;
    p.pw.resize(k_);
    p.px.resize(k_, nx_);
    p.py.resize(k_, ny_);
    softmax(theta.data(), k_, 1, p.pw.data(), 1);
    const double* tx = theta.data() + k_;
    const double* ty = tx + k_ * nx_;
    for (Index w = 0; w < k_; ++w) {
      softmax(tx + w * nx_, nx_, 1, p.px.data() + w, k_);
      softmax(ty + w * ny_, ny_, 1, p.py.data() + w, k_);
    }
    const Eigen::MatrixXd joint = p.px.transpose() * p.pw.asDiagonal() * p.py;
    double c = 1.0;
    for (Index i = 0; i < joint.size(); ++i) {
      const double j = joint.data()[i];
      if (j > 0.0) c = std::min(c, pi_.data()[i] / j);
    }
    out.c = c;
    out.q = (pi_ - c * joint).cwiseMax(0.0);
    return out;
  }

  Point eval(const Eigen::VectorXd& theta) const {
    if (bound_ == Bound::Outer) {
      const RateConstraints rc = outer_constraints(decomposition(theta), JointPmf(pi_));
      return {rc.r_min, rc.sum_min};
    }
    const Repaired rp = repair(theta);
    const Probs& p = rp.base;
    double cond_x = 0.0, sum = 0.0;
    bool infinite = false;
    for (Index w = 0; w < k_; ++w) {
      const double weight = rp.c * p.pw(w);
      if (weight <= 0.0) continue;
      const double hx = entropy_of(p.px.row(w)), hy = entropy_of(p.py.row(w));
      cond_x += weight * hx;
      if (bound_ == Bound::Inner) {
        const double h = max_cross_entropy_value(p.px.row(w).transpose(), p.py.row(w).transpose(), cost_);
        if (h == kInf) infinite = true;
        else sum += weight * (h - hx - hy);
      } else {
        sum -= weight * (hx + hy);
      }
    }
    Point pt;
    pt.r = std::max(hx_pi_ - cond_x, 0.0);
    if (bound_ == Bound::Inner) {
      for (Index i = 0; i < rp.q.size(); ++i)
        if (rp.q.data()[i] > 0.0) sum += rp.q.data()[i] * cost_.data()[i];
      pt.s = infinite ? kInf : sum;
    } else {
      pt.s = std::max(h_pi_ + sum, 0.0);
    }
    return pt;
  }

  Decomposition decomposition(const Eigen::VectorXd& theta) const {
    const Repaired rp = repair(theta);
    std::vector<Index> cells;
    for (Index i = 0; i < rp.q.size(); ++i)
      if (rp.q.data()[i] > 0.0) cells.push_back(i);
    const Index total = k_ + static_cast<Index>(cells.size());
    Eigen::VectorXd pw(total);
    Eigen::MatrixXd px = Eigen::MatrixXd::Zero(total, nx_), py = Eigen::MatrixXd::Zero(total, ny_);
    pw.head(k_) = rp.c * rp.base.pw;
    px.topRows(k_) = rp.base.px;
    py.topRows(k_) = rp.base.py;
    for (std::size_t t = 0; t < cells.size(); ++t) {
      const Index w = k_ + static_cast<Index>(t), cell = cells[t];
      pw(w) = rp.q.data()[cell];
      px(w, cell % nx_) = 1.0;
      py(w, cell / nx_) = 1.0;
    }
    return compact({Pmf(pw / pw.sum()), Channel(px), Channel(py)});
  }

  std::optional<Eigen::VectorXd> logits_of(const Decomposition& d) const {
    if (d.w_size() > k_) return std::nullopt;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(dims());
    auto lg = [](double v) { return v > 0.0 ? std::max(std::log(v), -kLogitClamp) : -kLogitClamp; };
    for (Index w = 0; w < k_; ++w) {
      if (w >= d.w_size()) {
        theta(w) = -kLogitClamp;
        continue;
      }
      theta(w) = lg(d.pw(w));
      for (Index x = 0; x < nx_; ++x) theta(k_ + w * nx_ + x) = lg(d.px_given_w(w, x));
      for (Index y = 0; y < ny_; ++y) theta(k_ + k_ * nx_ + w * ny_ + y) = lg(d.py_given_w(w, y));
    }
    return theta;
  }

 private:
  Eigen::MatrixXd pi_;
  Bound bound_;
  Index k_, nx_, ny_;
  Eigen::MatrixXd cost_;
  double hx_pi_, h_pi_;
};

struct Entry {
  Point pt;
  Eigen::VectorXd theta;               // empty for seeds evaluated directly
  std::optional<Decomposition> dec;
};

struct Scalarization {
  double cs, cr;
  double operator()(const Point& p) const { return p.s == kInf ? kInf : cs * p.s + cr * p.r; }
};

Scalarization angle(int j, int count) {
  const double phi = count == 1 ? 0.25 * std::numbers::pi : 0.5 * std::numbers::pi * j / (count - 1);
  return {std::cos(phi), std::sin(phi)};
}

// Compass search with a Hooke-Jeeves pattern step on f(theta); on_improve
// sees every accepted point.
template <typename F, typename OnImprove>
void compass(Eigen::VectorXd theta, F&& f, double min_step, long max_evals, long& evals,
             OnImprove&& on_improve) {
  double fcur = f(theta);
  ++evals;
  on_improve(theta, fcur);
  const long limit = evals + max_evals;
  double h = 1.0;
  auto try_point = [&](const Eigen::VectorXd& cand) {
    const double fv = f(cand);
    ++evals;
    if (fv < fcur - 1e-15) {
      theta = cand;
      fcur = fv;
      on_improve(theta, fcur);
      return true;
    }
    return false;
  };
  while (h >= min_step && evals < limit) {
    const Eigen::VectorXd start = theta;
    bool improved = false;
    for (Index i = 0; i < theta.size() && evals < limit; ++i) {
      for (double sgn : {1.0, -1.0}) {
        Eigen::VectorXd cand = theta;
        cand(i) = std::clamp(cand(i) + sgn * h, -kLogitClamp, kLogitClamp);
        if (cand(i) == theta(i)) continue;
        if (try_point(cand)) {
          improved = true;
          break;
        }
      }
    }
    if (improved) {
      try_point((2.0 * theta - start).cwiseMax(-kLogitClamp).cwiseMin(kLogitClamp));
    } else {
      h *= 0.5;
    }
  }
}

void local_search(const Evaluator& ev, const Eigen::VectorXd& theta, Scalarization f,
                  const SearchOptions& opts, std::vector<Entry>& archive, long& evals) {
  Point cur;
  compass(
      theta, [&](const Eigen::VectorXd& t) { cur = ev.eval(t); return f(cur); }, opts.min_step,
      opts.max_evals_per_run, evals,
      [&](const Eigen::VectorXd& t, double) { archive.push_back({cur, t, std::nullopt}); });
}

// Lower-left convex chain of the points: r increasing, s decreasing.
std::vector<std::size_t> lower_chain(const std::vector<Entry>& pts) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (std::isfinite(pts[i].pt.s)) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (pts[a].pt.r != pts[b].pt.r) return pts[a].pt.r < pts[b].pt.r;
    if (pts[a].pt.s != pts[b].pt.s) return pts[a].pt.s < pts[b].pt.s;
    return a < b;
  });
  std::vector<std::size_t> hull;
  for (std::size_t i : idx) {
    const Point& p = pts[i].pt;
    if (!hull.empty() && pts[hull.back()].pt.r == p.r) continue;
    while (hull.size() >= 2) {
      const Point& a = pts[hull[hull.size() - 2]].pt;
      const Point& b = pts[hull.back()].pt;
      const double cross = (b.r - a.r) * (p.s - a.s) - (b.s - a.s) * (p.r - a.r);
      if (cross <= 0.0) hull.pop_back();
      else break;
    }
    hull.push_back(i);
  }
  // Keep the non-increasing part only.
  std::size_t cut = 0;
  for (std::size_t i = 1; i < hull.size(); ++i)
    if (pts[hull[i]].pt.s < pts[hull[cut]].pt.s) cut = i;
  hull.resize(cut + 1);
  return hull;
}

// min over the time-sharing chain of max(r, s - r0); returns the chain point used.
Point chain_boundary(const std::vector<Point>& chain, double r0) {
  if (chain.front().r >= chain.front().s - r0) return chain.front();
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    const Point& a = chain[i];
    const Point& b = chain[i + 1];
    if (b.r >= b.s - r0) {
      const double lam = (a.s - r0 - a.r) / ((b.r - a.r) - (b.s - a.s));
      return {a.r + lam * (b.r - a.r), a.s + lam * (b.s - a.s)};
    }
  }
  return chain.back();
}

std::vector<Decomposition> standard_seeds(const JointPmf& pi) {
  const Index nx = pi.rows(), ny = pi.cols();
  const Eigen::MatrixXd& m = pi.mass();
  std::vector<Decomposition> out;
  // W = Y.
  {
    const Eigen::VectorXd py = m.colwise().sum().transpose();
    Eigen::MatrixXd px(ny, nx);
    for (Index y = 0; y < ny; ++y)
      px.row(y) = py(y) > 0 ? Eigen::RowVectorXd(m.col(y).transpose() / py(y))
                            : Eigen::RowVectorXd::Constant(nx, 1.0 / nx);
    out.push_back(compact({Pmf(py), Channel(px), Channel::identity(ny)}));
  }
  // W = X.
  {
    const Eigen::VectorXd px = m.rowwise().sum();
    Eigen::MatrixXd py(nx, ny);
    for (Index x = 0; x < nx; ++x)
      py.row(x) = px(x) > 0 ? Eigen::RowVectorXd(m.row(x) / px(x))
                            : Eigen::RowVectorXd::Constant(ny, 1.0 / ny);
    out.push_back(compact({Pmf(px), Channel::identity(nx), Channel(py)}));
  }
  // W = (X, Y).
  {
    Eigen::VectorXd pw(nx * ny);
    Eigen::MatrixXd px = Eigen::MatrixXd::Zero(nx * ny, nx), py = Eigen::MatrixXd::Zero(nx * ny, ny);
    for (Index x = 0; x < nx; ++x)
      for (Index y = 0; y < ny; ++y) {
        pw(x * ny + y) = m(x, y);
        px(x * ny + y, x) = 1.0;
        py(x * ny + y, y) = 1.0;
      }
    out.push_back(compact({Pmf(pw), Channel(px), Channel(py)}));
  }
  return out;
}

Point point_of(const Decomposition& d, const JointPmf& pi, Bound bound) {
  const RateConstraints rc = bound == Bound::Inner   ? inner_constraints(d, pi)
                             : bound == Bound::Outer ? outer_constraints(d, pi)
                                                     : cuff_constraints(d, pi);
  return {rc.r_min, rc.sum_min};
}

// ---------------------------------------------------------------------------
// Inner and Cuff bounds: r = H(X) - sum_w P(w) H(X|w) and the sum bound are
// both linear in the mixing weights, so each scalarized problem is a linear
// program over mixtures of product components that induce pi. It is solved
// by column generation; the point masses on supp(pi) give a feasible basis.

struct Column {
  Eigen::VectorXd px, py;
  double hx = 0.0;
  double s = 0.0;       // sum-bound contribution per unit weight
  Eigen::VectorXd a;    // px py^T on the support cells
};

class LinearSearch {
 public:
  LinearSearch(const JointPmf& pi, Bound bound, const SearchOptions& opts)
      : pi_(pi), bound_(bound), opts_(opts), nx_(pi.rows()), ny_(pi.cols()),
        cost_(log_loss_cost(pi)), hx_pi_(entropy(pi.row_marginal())),
        s_offset_(bound == Bound::Cuff ? entropy(pi) : 0.0) {
    for (Index c = 0; c < pi.mass().size(); ++c)
      if (pi.mass().data()[c] > 0.0) cells_.push_back(c);
    rhs_.resize(static_cast<Index>(cells_.size()));
    for (std::size_t i = 0; i < cells_.size(); ++i) rhs_(static_cast<Index>(i)) = pi.mass().data()[cells_[i]];
    // A tiny fixed perturbation of the right-hand side removes the primal
    // degeneracy; reported weights use the exact right-hand side.
    shifted_ = rhs_;
    for (Index i = 0; i < m(); ++i) shifted_(i) += 1e-11 * (1.0 + to_unit(counter_hash(0x6465676eULL, {static_cast<std::uint64_t>(i)})));
    for (Index c : cells_) {
      Eigen::VectorXd px = Eigen::VectorXd::Zero(nx_), py = Eigen::VectorXd::Zero(ny_);
      px(c % nx_) = 1.0;
      py(c / nx_) = 1.0;
      basis_.push_back(static_cast<Index>(columns_.size()));
      columns_.push_back(*make_column(px, py));
    }
  }

  Index m() const { return static_cast<Index>(cells_.size()); }
  Index theta_dims() const { return nx_ + ny_; }
  long evaluations() const { return evals_; }

  std::optional<Column> make_column(const Eigen::VectorXd& px, const Eigen::VectorXd& py) const {
    Column col{px, py, entropy_of(px), 0.0, Eigen::VectorXd(m())};
    const double hy = entropy_of(py);
    double on_support = 0.0;
    for (Index i = 0; i < m(); ++i) {
      const Index c = cells_[static_cast<std::size_t>(i)];
      col.a(i) = px(c % nx_) * py(c / nx_);
      on_support += col.a(i);
    }
    if (on_support < 1.0 - 1e-12) return std::nullopt;  // mass on a zero cell of pi
    if (bound_ == Bound::Inner) {
      const double h = max_cross_entropy_value(px, py, cost_);
      if (h == kInf) return std::nullopt;
      col.s = h - col.hx - hy;
    } else {
      col.s = -col.hx - hy;
    }
    return col;
  }

  void add_seed(const Decomposition& d) {
    for (Index w = 0; w < d.w_size(); ++w)
      if (d.pw(w) > 0.0)
        if (auto c = make_column(d.px_given_w.matrix().row(w).transpose(),
                                 d.py_given_w.matrix().row(w).transpose()))
          columns_.push_back(std::move(*c));
  }

  struct Solution {
    Point pt;
    std::vector<std::pair<Index, double>> weights;  // column, weight
  };

  // Optimal mixture for cs * s + cr * r over the current pool plus columns
  // found by pricing.
  Solution solve(Scalarization f) {
    std::vector<double> history;
    double random_at = kInf;
    for (int round = 0; round < kMaxRounds; ++round) {
      master(f);
      const double v = f(current().pt);
      history.push_back(v);
      const bool stalled = history.size() > kStallWindow &&
                           history[history.size() - 1 - kStallWindow] - v < kStallTol;
      if (!stalled && price(anchored_starts(), f)) continue;
      if (random_at - v < kStallTol) break;
      random_at = v;
      if (!price(random_starts(), f)) break;
    }
    return current();
  }

  // The mixture, scaled to fit under pi, plus point masses on the remainder
  // so that it induces pi exactly.
  Decomposition decomposition(const Solution& sol) const {
    const Index k = static_cast<Index>(sol.weights.size());
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(nx_, ny_);
    for (const auto& [j, lam] : sol.weights) {
      const Column& c = columns_[static_cast<std::size_t>(j)];
      joint += lam * c.px * c.py.transpose();
    }
    double scale = 1.0;
    for (Index i = 0; i < joint.size(); ++i)
      if (joint.data()[i] > 0.0) scale = std::min(scale, pi_.mass().data()[i] / joint.data()[i]);
    const Eigen::MatrixXd rest = (pi_.mass() - scale * joint).cwiseMax(0.0);
    std::vector<Index> cells;
    for (Index i = 0; i < rest.size(); ++i)
      if (rest.data()[i] > 0.0) cells.push_back(i);
    const Index total = k + static_cast<Index>(cells.size());
    Eigen::VectorXd pw(total);
    Eigen::MatrixXd px = Eigen::MatrixXd::Zero(total, nx_), py = Eigen::MatrixXd::Zero(total, ny_);
    for (Index w = 0; w < k; ++w) {
      const auto& [j, lam] = sol.weights[static_cast<std::size_t>(w)];
      pw(w) = scale * lam;
      px.row(w) = columns_[static_cast<std::size_t>(j)].px.transpose();
      py.row(w) = columns_[static_cast<std::size_t>(j)].py.transpose();
    }
    for (std::size_t t = 0; t < cells.size(); ++t) {
      const Index w = k + static_cast<Index>(t), cell = cells[t];
      pw(w) = rest.data()[cell];
      px(w, cell % nx_) = 1.0;
      py(w, cell / nx_) = 1.0;
    }
    return compact({Pmf(pw / pw.sum()), Channel(px), Channel(py)});
  }


 private:
  static constexpr int kMaxRounds = 200;
  static constexpr int kMaxPivots = 20000;
  static constexpr double kReducedTol = 1e-9;
  static constexpr std::size_t kStallWindow = 5;
  static constexpr double kStallTol = 1e-8;

  double cost(const Column& c, Scalarization f) const { return f.cs * c.s - f.cr * c.hx; }

  Eigen::MatrixXd basis_matrix() const {
    Eigen::MatrixXd b(m(), m());
    for (Index i = 0; i < m(); ++i) b.col(i) = columns_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])].a;
    return b;
  }

  // Primal simplex from the current (always feasible) basis. Dantzig pricing,
  // Bland's rule after a run of degenerate pivots.
  void master(Scalarization f) {
    int degenerate = 0;
    bool bland = false;
    for (int pivot = 0; pivot < kMaxPivots; ++pivot) {
      const Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix());
      const Eigen::VectorXd x = lu.solve(shifted_);
      if (!x.allFinite()) throw NumericFailure("search: singular basis in the master problem");
      Eigen::VectorXd cb(m());
      for (Index i = 0; i < m(); ++i) cb(i) = cost(columns_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])], f);
      duals_ = lu.transpose().solve(cb);
      bland = bland || degenerate > 50;
      Index enter = -1;
      double best = -kReducedTol;
      for (Index j = 0; j < static_cast<Index>(columns_.size()); ++j) {
        const Column& c = columns_[static_cast<std::size_t>(j)];
        const double d = cost(c, f) - duals_.dot(c.a);
        if (d < best) {
          if (std::find(basis_.begin(), basis_.end(), j) != basis_.end()) continue;
          enter = j;
          best = d;
          if (bland) break;
        }
      }
      if (enter < 0) {
        x_ = lu.solve(rhs_).cwiseMax(0.0);
        return;
      }
      const Eigen::VectorXd dir = lu.solve(columns_[static_cast<std::size_t>(enter)].a);
      const double pivot_tol = std::max(1e-11, 1e-9 * dir.cwiseAbs().maxCoeff());
      Index leave = -1;
      double t = kInf;
      for (Index i = 0; i < m(); ++i) {
        if (dir(i) <= pivot_tol) continue;
        const double ti = std::max(x(i), 0.0) / dir(i);
        const double tie = 1e-12 * std::max(t == kInf ? 0.0 : t, 1e-3);
        if (ti < t - tie || (ti <= t + tie && leave >= 0 &&
                             basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          t = std::min(t, ti);
          leave = i;
        }
      }
      if (leave < 0) throw NumericFailure("search: unbounded master problem");
      degenerate = t * -best <= 1e-15 ? degenerate + 1 : 0;
      basis_[static_cast<std::size_t>(leave)] = enter;
    }
    throw NumericFailure("search: pivot limit reached in the master problem");
  }

  Solution current() const {
    Solution sol;
    double cond = 0.0, s = 0.0;
    for (Index i = 0; i < m(); ++i) {
      const double lam = x_(i);
      if (lam <= 0.0) continue;
      const Index j = basis_[static_cast<std::size_t>(i)];
      const Column& c = columns_[static_cast<std::size_t>(j)];
      sol.weights.emplace_back(j, lam);
      cond += lam * c.hx;
      s += lam * c.s;
    }
    sol.pt = {std::max(hx_pi_ - cond, 0.0), std::max(s_offset_ + s, 0.0)};
    return sol;
  }

  std::pair<Eigen::VectorXd, Eigen::VectorXd> probs(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd px(nx_), py(ny_);
    softmax(theta.data(), nx_, 1, px.data(), 1);
    softmax(theta.data() + nx_, ny_, 1, py.data(), 1);
    return {px, py};
  }

  Eigen::VectorXd logits(const Column& c) const {
    Eigen::VectorXd t(theta_dims());
    auto lg = [](double v) { return v > 0.0 ? std::max(std::log(v), -kLogitClamp) : -kLogitClamp; };
    for (Index x = 0; x < nx_; ++x) t(x) = lg(c.px(x));
    for (Index y = 0; y < ny_; ++y) t(nx_ + y) = lg(c.py(y));
    return t;
  }

  // Current mixture components, then jittered copies of them.
  std::vector<Eigen::VectorXd> anchored_starts() {
    std::vector<Eigen::VectorXd> out;
    for (Index i = 0; i < m(); ++i)
      if (x_(i) > 0.0) out.push_back(logits(columns_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])]));
    const std::size_t k = out.size();
    for (std::size_t i = 0; i < k; ++i) {
      std::mt19937_64 rng(counter_hash(opts_.seed, {0x70726963ULL, pricing_round_, i}));
      std::normal_distribution<double> g(0.0, 0.5);
      Eigen::VectorXd t = out[i];
      for (Index j = 0; j < t.size(); ++j)
        if (t(j) > -kLogitClamp) t(j) += g(rng);
      out.push_back(t);
    }
    ++pricing_round_;
    return out;
  }

  std::vector<Eigen::VectorXd> random_starts() {
    std::vector<Eigen::VectorXd> out;
    for (int i = 0; i < opts_.restarts; ++i) {
      std::mt19937_64 rng(counter_hash(opts_.seed, {0x72616e64ULL, pricing_round_, static_cast<std::uint64_t>(i)}));
      std::normal_distribution<double> g(0.0, 1.5);
      Eigen::VectorXd t(theta_dims());
      for (Index j = 0; j < t.size(); ++j) t(j) = g(rng);
      out.push_back(t);
    }
    ++pricing_round_;
    return out;
  }

  // Compass search for columns of negative reduced cost from each start; adds
  // the distinct ones found and reports whether any were.
  bool price(const std::vector<Eigen::VectorXd>& starts, Scalarization f) {
    const int n = static_cast<int>(starts.size());
    std::vector<std::optional<Column>> found(static_cast<std::size_t>(n));
    std::vector<long> used(static_cast<std::size_t>(n), 0);
    parallel_for(n, opts_.threads, [&](int i) {
      auto reduced = [&](const Eigen::VectorXd& t) {
        const auto [px, py] = probs(t);
        const std::optional<Column> c = make_column(px, py);
        return c ? cost(*c, f) - duals_.dot(c->a) : kInf;
      };
      Eigen::VectorXd best;
      double best_value = kInf;
      compass(starts[static_cast<std::size_t>(i)], reduced, opts_.min_step, opts_.max_evals_per_run,
              used[static_cast<std::size_t>(i)], [&](const Eigen::VectorXd& t, double v) {
                best = t;
                best_value = v;
              });
      if (best_value < -kReducedTol) {
        const auto [px, py] = probs(best);
        found[static_cast<std::size_t>(i)] = make_column(px, py);
      }
    });
    const std::size_t first_new = columns_.size();
    for (int i = 0; i < n; ++i) {
      evals_ += used[static_cast<std::size_t>(i)];
      auto& c = found[static_cast<std::size_t>(i)];
      if (!c) continue;
      bool duplicate = false;
      for (std::size_t j = first_new; j < columns_.size(); ++j)
        if ((columns_[j].a - c->a).cwiseAbs().maxCoeff() < 1e-12) duplicate = true;
      if (!duplicate) columns_.push_back(std::move(*c));
    }
    return columns_.size() > first_new;
  }

  const JointPmf& pi_;
  Bound bound_;
  const SearchOptions& opts_;
  Index nx_, ny_;
  Eigen::MatrixXd cost_;
  double hx_pi_, s_offset_;
  std::vector<Index> cells_;
  Eigen::VectorXd rhs_, shifted_;
  std::vector<Column> columns_;
  std::vector<Index> basis_;
  Eigen::VectorXd x_, duals_;
  std::uint64_t pricing_round_ = 0;
  long evals_ = 0;
};

SearchResult linear_search(const JointPmf& pi, const std::vector<double>& r0_grid, Bound bound,
                           const SearchOptions& opts) {
  LinearSearch ls(pi, bound, opts);
  for (const auto& d : standard_seeds(pi)) ls.add_seed(d);
  ls.add_seed({Pmf::point(1, 0), Channel(pi.mass().rowwise().sum().transpose()),
               Channel(pi.mass().colwise().sum())});
  for (const auto& d : opts.seeds) ls.add_seed(d);

  struct Vertex {
    Point pt;
    Decomposition dec;
  };
  std::vector<Vertex> found;
  auto run = [&](Scalarization f) {
    const LinearSearch::Solution sol = ls.solve(f);
    found.push_back({sol.pt, ls.decomposition(sol)});
    return sol.pt;
  };
  const int D = opts.directions;
  for (int j = 0; j < D; ++j) {
    Scalarization f = angle(j, D);
    // Keep both weights positive so the extreme directions give proper vertices.
    f.cs = std::max(f.cs, 1e-7);
    f.cr = std::max(f.cr, 1e-7);
    run(f);
  }

  // Refine between neighbouring vertices along the chord normals until the
  // chain stops moving.
  auto chain_of = [&] {
    std::vector<Entry> entries;
    for (const Vertex& v : found) entries.push_back({v.pt, {}, std::nullopt});
    return lower_chain(entries);
  };
  for (int sweep = 0, budget = 2 * D; sweep < 8 && budget > 0; ++sweep) {
    const std::vector<std::size_t> idx = chain_of();
    bool moved = false;
    for (std::size_t i = 0; i + 1 < idx.size() && budget > 0; ++i) {
      const Point a = found[idx[i]].pt, b = found[idx[i + 1]].pt;
      const double cs = b.r - a.r, cr = a.s - b.s, norm = std::hypot(cs, cr);
      if (norm < 1e-9) continue;
      const Scalarization f{cs / norm, cr / norm};
      --budget;
      if (f(run(f)) < f(a) - 1e-10) moved = true;
    }
    if (!moved) break;
  }

  SearchResult out;
  std::vector<Point> chain;
  for (std::size_t i : chain_of()) {
    chain.push_back(found[i].pt);
    out.hull.push_back({found[i].pt.r, found[i].pt.s});
    out.hull_decompositions.push_back(reduce_cardinality(found[i].dec, pi, bound));
  }
  out.curve.param_name = "R0";
  out.curve.units = Units::Nats;
  for (double r0 : r0_grid) {
    const Point p = chain_boundary(chain, r0);
    out.curve.param.push_back(r0);
    out.curve.r_bound.push_back(p.r);
    out.curve.sum_bound.push_back(p.s);
    out.curve.boundary.push_back({r0, std::max(p.r, p.s - r0)});
  }
  out.evaluations = ls.evaluations();
  return out;
}

// The outer sum bound is not linear in P_W, so it gets a direct local search
// over repaired decompositions, started from the inner optimum.
SearchResult outer_search(const JointPmf& pi, const std::vector<double>& r0_grid,
                          const SearchOptions& opts) {
  const Bound bound = Bound::Outer;
  const SearchResult inner = linear_search(pi, r0_grid, Bound::Inner, opts);
  const Index k = opts.w_size > 0 ? opts.w_size : pi.rows() * pi.cols() + 1;
  const Evaluator ev(pi, bound, k);
  const int D = opts.directions;

  std::vector<Entry> archive;
  long evals = 0;

  // Seeds are always recorded exactly; those that fit K symbols also start runs.
  std::vector<Decomposition> seeds = standard_seeds(pi);
  seeds.push_back({Pmf::point(1, 0), Channel(pi.mass().rowwise().sum().transpose()),
                   Channel(pi.mass().colwise().sum())});
  for (const auto& s : opts.seeds) seeds.push_back(s);
  for (const auto& s : inner.hull_decompositions) seeds.push_back(s);
  std::vector<Eigen::VectorXd> starts;
  for (const auto& s : seeds) {
    try {
      archive.push_back({point_of(s, pi, bound), {}, s});
    } catch (const PreconditionViolated&) {
      continue;  // the product seed only induces pi for product sources
    }
    if (auto t = ev.logits_of(s)) starts.push_back(*t);
  }
  for (int i = 0; i < opts.restarts; ++i) {
    std::mt19937_64 rng(counter_hash(opts.seed, {static_cast<std::uint64_t>(i)}));
    std::normal_distribution<double> g(0.0, 1.5);
    Eigen::VectorXd t(ev.dims());
    for (Index j = 0; j < t.size(); ++j) t(j) = g(rng);
    starts.push_back(t);
  }

  // Phase 1: independent runs spread over the scalarization angles.
  const int n_starts = static_cast<int>(starts.size());
  std::vector<std::vector<Entry>> run_archives(static_cast<std::size_t>(n_starts));
  std::vector<long> run_evals(static_cast<std::size_t>(n_starts), 0);
  parallel_for(n_starts, opts.threads, [&](int i) {
    const int j = D == 1 ? 0 : static_cast<int>(std::lround((i + 0.5) / n_starts * (D - 1)));
    local_search(ev, starts[static_cast<std::size_t>(i)], angle(j, D), opts,
                 run_archives[static_cast<std::size_t>(i)], run_evals[static_cast<std::size_t>(i)]);
  });
  for (int i = 0; i < n_starts; ++i) {
    auto& a = run_archives[static_cast<std::size_t>(i)];
    archive.insert(archive.end(), std::make_move_iterator(a.begin()), std::make_move_iterator(a.end()));
    evals += run_evals[static_cast<std::size_t>(i)];
  }

  // Phase 2: continuation sweeps across angles from the best archived start.
  for (int pass = 0; pass < 2; ++pass)
    for (int step = 0; step < D; ++step) {
      const int j = pass == 0 ? step : D - 1 - step;
      const Scalarization f = angle(j, D);
      std::size_t best = archive.size();
      for (std::size_t e = 0; e < archive.size(); ++e) {
        if (archive[e].theta.size() == 0) continue;
        if (best == archive.size() || f(archive[e].pt) < f(archive[best].pt)) best = e;
      }
      if (best == archive.size()) break;
      local_search(ev, archive[best].theta, f, opts, archive, evals);
    }

  SearchResult out;
  std::vector<Point> chain;
  for (std::size_t i : lower_chain(archive)) {
    chain.push_back(archive[i].pt);
    out.hull.push_back({archive[i].pt.r, archive[i].pt.s});
    out.hull_decompositions.push_back(
        compact(archive[i].dec ? *archive[i].dec : ev.decomposition(archive[i].theta)));
  }
  out.curve.param_name = "R0";
  out.curve.units = Units::Nats;
  for (double r0 : r0_grid) {
    const Point p = chain_boundary(chain, r0);
    out.curve.param.push_back(r0);
    out.curve.r_bound.push_back(p.r);
    out.curve.sum_bound.push_back(p.s);
    out.curve.boundary.push_back({r0, std::max(p.r, p.s - r0)});
  }
  out.evaluations = evals + inner.evaluations;
  return out;
}


}  // namespace

SearchResult search_lower_boundary(const JointPmf& pi, const std::vector<double>& r0_grid,
                                   Bound bound, const SearchOptions& opts) {
  if (opts.restarts < 0 || opts.directions < 1 || opts.max_evals_per_run < 1)
    throw DomainError("search_lower_boundary: invalid options");
  return bound == Bound::Outer ? outer_search(pi, r0_grid, opts) : linear_search(pi, r0_grid, bound, opts);
}

SearchResult multi_letter_inner(const JointPmf& pi, int n, const std::vector<double>& r0_grid,
                                SearchOptions opts, std::uint64_t budget) {
  if (n < 1 || n > 3) throw DomainError("multi_letter_inner: n must be 1, 2 or 3");
  if (n == 1) return search_lower_boundary(pi, r0_grid, Bound::Inner, opts);
  const JointPmf pin = joint_power(pi, n, budget);

  const SearchResult single = search_lower_boundary(pi, r0_grid, Bound::Inner, opts);
  for (const auto& d : single.hull_decompositions) {
    Decomposition t = d;
    for (int i = 1; i < n; ++i) t = tensor(t, d);
    opts.seeds.push_back(compact(t));
  }
  if (opts.w_size == 0) opts.w_size = 4;
  std::vector<double> scaled;
  for (double r0 : r0_grid) scaled.push_back(r0 * n);
  SearchResult res = search_lower_boundary(pin, scaled, Bound::Inner, opts);

  const double inv = 1.0 / n;
  for (auto& p : res.hull) {
    p.r_min *= inv;
    p.sum_min *= inv;
  }
  for (std::size_t i = 0; i < res.curve.param.size(); ++i) {
    res.curve.param[i] = r0_grid[i];
    res.curve.r_bound[i] *= inv;
    res.curve.sum_bound[i] *= inv;
    res.curve.boundary[i] = {r0_grid[i], res.curve.boundary[i].r * inv};
  }
  return res;
}

}  // namespace synth
