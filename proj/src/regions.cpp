#include "synth/regions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace synth {

namespace {

double log2_safe_ratio_term(double weight, double a0, double b0) {
  // weight * log2(a0 / b0) with 0 * inf = 0.
  if (weight == 0.0) return 0.0;
  return weight * std::log2(a0 / b0);
}

double h2_bits(double x) { return binary_entropy(x) / std::log(2.0); }

struct PerSymbol {
  Eigen::VectorXd hx, hy;  // H(X|w), H(Y|w)
};

PerSymbol conditional_entropies(const Decomposition& d) {
  PerSymbol s{Eigen::VectorXd(d.w_size()), Eigen::VectorXd(d.w_size())};
  for (Index w = 0; w < d.w_size(); ++w) {
    s.hx(w) = entropy_of(d.px_given_w.matrix().row(w));
    s.hy(w) = entropy_of(d.py_given_w.matrix().row(w));
  }
  return s;
}

double r_min_of(const Decomposition& d, const JointPmf& pi, const PerSymbol& s) {
  return std::max(entropy(pi.row_marginal()) - d.pw.mass().dot(s.hx), 0.0);
}

}  // namespace

void check_shapes(const Decomposition& d) {
  if (d.px_given_w.inputs() != d.pw.size() || d.py_given_w.inputs() != d.pw.size())
    throw DomainError("decomposition: channel inputs must match |W|");
}

JointPmf induced_joint(const Decomposition& d) {
  check_shapes(d);
  const Eigen::MatrixXd m = d.px_given_w.matrix().transpose() * d.pw.mass().asDiagonal() *
                            d.py_given_w.matrix();
  return JointPmf(m, d.px_given_w.output_symbols(), d.py_given_w.output_symbols());
}

void require_induces(const Decomposition& d, const JointPmf& pi, double tol) {
  const JointPmf q = induced_joint(d);
  if (q.rows() != pi.rows() || q.cols() != pi.cols())
    throw PreconditionViolated("decomposition alphabet does not match the source");
  const double err = (q.mass() - pi.mass()).cwiseAbs().maxCoeff();
  if (err > tol)
    throw PreconditionViolated("decomposition does not induce the source (max error " +
                               std::to_string(err) + ")");
}

Decomposition compact(const Decomposition& d) {
  check_shapes(d);
  std::vector<Index> keep;
  std::vector<double> weight;
  for (Index w = 0; w < d.w_size(); ++w) {
    if (d.pw(w) <= 0.0) continue;
    bool merged = false;
    for (std::size_t k = 0; k < keep.size() && !merged; ++k) {
      const Index o = keep[k];
      if ((d.px_given_w.matrix().row(o) - d.px_given_w.matrix().row(w)).cwiseAbs().maxCoeff() < 1e-14 &&
          (d.py_given_w.matrix().row(o) - d.py_given_w.matrix().row(w)).cwiseAbs().maxCoeff() < 1e-14) {
        weight[k] += d.pw(w);
        merged = true;
      }
    }
    if (!merged) {
      keep.push_back(w);
      weight.push_back(d.pw(w));
    }
  }
  const auto k = static_cast<Index>(keep.size());
  Eigen::VectorXd pw(k);
  Eigen::MatrixXd px(k, d.px_given_w.outputs()), py(k, d.py_given_w.outputs());
  for (Index i = 0; i < k; ++i) {
    pw(i) = weight[static_cast<std::size_t>(i)];
    px.row(i) = d.px_given_w.matrix().row(keep[static_cast<std::size_t>(i)]);
    py.row(i) = d.py_given_w.matrix().row(keep[static_cast<std::size_t>(i)]);
  }
  return {Pmf(pw), Channel(px, {}, d.px_given_w.output_symbols()),
          Channel(py, {}, d.py_given_w.output_symbols())};
}

RateConstraints cuff_constraints(const Decomposition& d, const JointPmf& pi) {
  require_induces(d, pi);
  const PerSymbol s = conditional_entropies(d);
  const double cond = d.pw.mass().dot(s.hx + s.hy);
  return {r_min_of(d, pi, s), std::max(entropy(pi) - cond, 0.0)};
}

RateConstraints inner_constraints(const Decomposition& d, const JointPmf& pi) {
  require_induces(d, pi);
  const PerSymbol s = conditional_entropies(d);
  const Eigen::MatrixXd cost = log_loss_cost(pi);
  double sum = 0.0;
  for (Index w = 0; w < d.w_size(); ++w) {
    if (d.pw(w) <= 0.0) continue;
    const double h = max_cross_entropy_value(d.px_given_w.matrix().row(w).transpose(),
                                             d.py_given_w.matrix().row(w).transpose(), cost);
    if (h == kInf) return {r_min_of(d, pi, s), kInf};
    sum += d.pw(w) * (h - s.hx(w) - s.hy(w));
  }
  return {r_min_of(d, pi, s), sum};
}

RateConstraints outer_constraints(const Decomposition& d, const JointPmf& pi) {
  require_induces(d, pi);
  const PerSymbol s = conditional_entropies(d);
  const Eigen::MatrixXd cost = log_loss_cost(pi);
  const Index k = d.w_size();
  Eigen::MatrixXd c(k, k);
  for (Index w = 0; w < k; ++w)
    for (Index v = 0; v < k; ++v)
      c(w, v) = (d.pw(w) > 0.0 && d.pw(v) > 0.0)
                    ? max_cross_entropy_value(d.px_given_w.matrix().row(w).transpose(),
                                              d.py_given_w.matrix().row(v).transpose(), cost)
                    : 0.0;
  double best;
  try {
    best = solve_transport({d.pw, d.pw, c, Sense::Minimize}).objective;
  } catch (const Infeasible&) {
    best = kInf;
  }
  const double cond = d.pw.mass().dot(s.hx + s.hy);
  return {r_min_of(d, pi, s), best == kInf ? kInf : best - cond};
}

Decomposition reduce_cardinality(const Decomposition& d, const JointPmf& pi, Bound bound) {
  if (bound == Bound::Outer)
    throw DomainError("reduce_cardinality: the outer sum bound is not linear in P_W");
  require_induces(d, pi);
  Decomposition cur = compact(d);
  const Index nx = pi.rows(), ny = pi.cols();
  const Index target = nx * ny + 1;
  if (cur.w_size() <= target) return cur;

  const PerSymbol s = conditional_entropies(cur);
  const Eigen::MatrixXd cost = log_loss_cost(pi);
  const Index k = cur.w_size();
  // Column w: flattened P_{X|w} P_{Y|w}^T and H(X|w); objective: per-symbol sum term.
  Eigen::MatrixXd a(nx * ny + 1, k);
  Eigen::VectorXd obj(k);
  for (Index w = 0; w < k; ++w) {
    const Eigen::MatrixXd cell =
        cur.px_given_w.matrix().row(w).transpose() * cur.py_given_w.matrix().row(w);
    a.col(w).head(nx * ny) = cell.reshaped();
    a(nx * ny, w) = s.hx(w);
    const double h = bound == Bound::Inner
                         ? max_cross_entropy_value(cur.px_given_w.matrix().row(w).transpose(),
                                                   cur.py_given_w.matrix().row(w).transpose(), cost)
                         : 0.0;
    obj(w) = h - s.hx(w) - s.hy(w);
  }
  Eigen::VectorXd lambda = cur.pw.mass();
  std::vector<Index> live(static_cast<std::size_t>(k));
  std::iota(live.begin(), live.end(), Index{0});
  while (static_cast<Index>(live.size()) > target) {
    Eigen::MatrixXd sub(a.rows(), static_cast<Index>(live.size()));
    for (std::size_t i = 0; i < live.size(); ++i) sub.col(static_cast<Index>(i)) = a.col(live[i]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    Eigen::VectorXd z = lu.kernel().col(0);
    double dir = 0.0;
    for (std::size_t i = 0; i < live.size(); ++i) dir += z(static_cast<Index>(i)) * obj(live[i]);
    if (dir > 0.0 || (dir == 0.0 && z.minCoeff() >= 0.0)) z = -z;
    double t = kInf;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const double zi = z(static_cast<Index>(i));
      if (zi < 0.0) {
        const double ti = -lambda(live[i]) / zi;
        if (ti < t) {
          t = ti;
          hit = i;
        }
      }
    }
    if (!std::isfinite(t)) throw NumericFailure("reduce_cardinality: degenerate kernel direction");
    for (std::size_t i = 0; i < live.size(); ++i)
      lambda(live[i]) = std::max(lambda(live[i]) + t * z(static_cast<Index>(i)), 0.0);
    lambda(live[hit]) = 0.0;
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(hit));
    for (std::size_t i = 0; i < live.size();) {
      if (lambda(live[i]) <= 0.0)
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
      else
        ++i;
    }
  }
  Decomposition out{Pmf(lambda / lambda.sum()), cur.px_given_w, cur.py_given_w};
  return compact(out);
}

// ---------------------------------------------------------------------------

double boundary_at(const RegionCurve& c, double r0) {
  double best = kInf;
  for (std::size_t i = 0; i < c.r_bound.size(); ++i) {
    const double v = std::max(c.r_bound[i], c.sum_bound[i] - r0);
    if (v < best) best = v;
  }
  return std::max(best, 0.0);
}

void fill_corner_boundary(RegionCurve& c) {
  c.boundary.clear();
  for (std::size_t i = 0; i < c.r_bound.size(); ++i) {
    const double r0 = std::max(c.sum_bound[i] - c.r_bound[i], 0.0);
    c.boundary.push_back({r0, std::isfinite(r0) ? boundary_at(c, r0) : c.r_bound[i]});
  }
}

RegionCurve convert_units(const RegionCurve& c, Units to) {
  if (c.units == to) return c;
  RegionCurve out = c;
  const double f = to == Units::Bits ? 1.0 / std::log(2.0) : std::log(2.0);
  for (auto& v : out.r_bound) v *= f;
  for (auto& v : out.sum_bound) v *= f;
  for (auto& p : out.boundary) {
    p.r0 *= f;
    p.r *= f;
  }
  out.units = to;
  return out;
}

std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw DomainError("linspace: count must be >= 1");
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    v[static_cast<std::size_t>(i)] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  if (count > 1) v.back() = hi;
  return v;
}

namespace {

void check_dsbs(double p, double a) {
  if (!(p >= 0.0 && p <= 0.5)) throw DomainError("DSBS region: p must lie in [0, 1/2]");
  if (!(a >= 0.0 && a <= p)) throw DomainError("DSBS region: a must lie in [0, p]");
}

double dsbs_b(double p, double a) {
  if (p == 0.5) return 0.5;
  return std::clamp((p - a) / (1.0 - 2.0 * a), 0.0, 0.5);
}

RegionCurve make_curve(const std::string& name, const std::vector<double>& grid,
                       RateConstraints (*f)(double, double), double param) {
  RegionCurve c;
  c.param_name = name;
  c.units = Units::Bits;
  for (double g : grid) {
    const RateConstraints rc = f(param, g);
    c.param.push_back(g);
    c.r_bound.push_back(rc.r_min);
    c.sum_bound.push_back(rc.sum_min);
  }
  fill_corner_boundary(c);
  return c;
}

}  // namespace

RateConstraints dsbs_exact_constraints_bits(double p, double a) {
  check_dsbs(p, a);
  const double b = dsbs_b(p, a);
  const double a0 = (1.0 - p) / 2, b0 = p / 2;
  const double sum = std::log2(1.0 / a0) + log2_safe_ratio_term(a + b, a0, b0) - h2_bits(a) - h2_bits(b);
  return {1.0 - h2_bits(a), std::max(sum, 0.0)};
}

RateConstraints dsbs_tv_constraints_bits(double p, double a) {
  check_dsbs(p, a);
  const double b = dsbs_b(p, a);
  return {1.0 - h2_bits(a), std::max(1.0 + h2_bits(p) - h2_bits(a) - h2_bits(b), 0.0)};
}

RegionCurve dsbs_exact_region(double p, const std::vector<double>& a_grid) {
  return make_curve("a", a_grid, &dsbs_exact_constraints_bits, p);
}

RegionCurve dsbs_exact_region(double p, int points) {
  check_dsbs(p, 0.0);
  return dsbs_exact_region(p, linspace(0.0, p, points));
}

RegionCurve dsbs_tv_region(double p, const std::vector<double>& a_grid) {
  return make_curve("a", a_grid, &dsbs_tv_constraints_bits, p);
}

RegionCurve dsbs_tv_region(double p, int points) {
  check_dsbs(p, 0.0);
  return dsbs_tv_region(p, linspace(0.0, p, points));
}

namespace {

void check_gaussian(double rho, double alpha) {
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("Gaussian region: rho must lie in [0,1)");
  if (!(alpha >= rho && alpha < 1.0)) throw DomainError("Gaussian region: alpha must lie in [rho,1)");
}

double gaussian_beta(double rho, double alpha) { return rho == 0.0 ? 0.0 : rho / alpha; }

}  // namespace

double gaussian_inner_gap_nats(double rho, double alpha) {
  check_gaussian(rho, alpha);
  const double beta = gaussian_beta(rho, alpha);
  return rho * std::sqrt((1.0 - alpha * alpha) * (1.0 - beta * beta)) / (1.0 - rho * rho);
}

RateConstraints gaussian_tv_constraints_bits(double rho, double alpha) {
  check_gaussian(rho, alpha);
  const double beta = gaussian_beta(rho, alpha);
  const double r = 0.5 * std::log2(1.0 / (1.0 - alpha * alpha));
  const double denom = (1.0 - alpha * alpha) * (1.0 - beta * beta);
  const double sum = denom > 0.0 ? 0.5 * std::log2((1.0 - rho * rho) / denom) : kInf;
  return {r, sum};
}

RateConstraints gaussian_exact_inner_constraints_bits(double rho, double alpha) {
  RateConstraints rc = gaussian_tv_constraints_bits(rho, alpha);
  rc.sum_min += gaussian_inner_gap_nats(rho, alpha) / std::log(2.0);
  return rc;
}

std::vector<double> gaussian_default_grid(double rho, int points) {
  return linspace(rho + 1e-6, 1.0 - 1e-6, points);
}

RegionCurve gaussian_tv_region(double rho, const std::vector<double>& alpha_grid) {
  return make_curve("alpha", alpha_grid, &gaussian_tv_constraints_bits, rho);
}

RegionCurve gaussian_exact_inner_region(double rho, const std::vector<double>& alpha_grid) {
  return make_curve("alpha", alpha_grid, &gaussian_exact_inner_constraints_bits, rho);
}

// ---------------------------------------------------------------------------

Decomposition tensor(const Decomposition& a, const Decomposition& b) {
  const Index ka = a.w_size(), kb = b.w_size();
  const Index xa = a.px_given_w.outputs(), xb = b.px_given_w.outputs();
  const Index ya = a.py_given_w.outputs(), yb = b.py_given_w.outputs();
  Eigen::VectorXd pw(ka * kb);
  Eigen::MatrixXd px(ka * kb, xa * xb), py(ka * kb, ya * yb);
  for (Index i = 0; i < ka; ++i)
    for (Index j = 0; j < kb; ++j) {
      const Index w = i * kb + j;
      pw(w) = a.pw(i) * b.pw(j);
      for (Index u = 0; u < xa; ++u)
        for (Index v = 0; v < xb; ++v) px(w, u * xb + v) = a.px_given_w(i, u) * b.px_given_w(j, v);
      for (Index u = 0; u < ya; ++u)
        for (Index v = 0; v < yb; ++v) py(w, u * yb + v) = a.py_given_w(i, u) * b.py_given_w(j, v);
    }
  return {Pmf(pw), Channel(px), Channel(py)};
}

double necessary_conditional_entropy(const JointPmf& pi) {
  const Index nx = pi.rows(), ny = pi.cols();
  if (ny > 12) throw DomainError("necessary_conditional_entropy: |Y| must be at most 12");
  const Eigen::MatrixXd& m = pi.mass();
  const Eigen::RowVectorXd py = m.colwise().sum();
  const double hx = entropy_of(m.rowwise().sum());

  // Restricted growth strings enumerate set partitions of {0..ny-1}.
  std::vector<int> block(static_cast<std::size_t>(ny), 0), maxv(static_cast<std::size_t>(ny), 0);
  double best = kInf;
  Eigen::MatrixXd grouped(nx, ny);
  Eigen::RowVectorXd gy(ny);
  while (true) {
    const int nb = 1 + *std::max_element(block.begin(), block.end());
    grouped.leftCols(nb).setZero();
    gy.head(nb).setZero();
    for (Index y = 0; y < ny; ++y) {
      grouped.col(block[static_cast<std::size_t>(y)]) += m.col(y);
      gy(block[static_cast<std::size_t>(y)]) += py(y);
    }
    double dev = 0.0;
    for (Index y = 0; y < ny && dev <= 1e-9; ++y) {
      const int b = block[static_cast<std::size_t>(y)];
      if (gy(b) <= 0.0) continue;
      for (Index x = 0; x < nx; ++x)
        dev = std::max(dev, std::abs(m(x, y) - grouped(x, b) * py(y) / gy(b)));
    }
    if (dev <= 1e-9) best = std::min(best, std::max(entropy_of(grouped.leftCols(nb)) - hx, 0.0));

    // Next restricted growth string.
    Index i = ny - 1;
    while (i > 0 && block[static_cast<std::size_t>(i)] > maxv[static_cast<std::size_t>(i - 1)]) --i;
    if (i == 0) break;
    ++block[static_cast<std::size_t>(i)];
    for (Index j = i; j < ny; ++j) {
      if (j > i) block[static_cast<std::size_t>(j)] = 0;
      maxv[static_cast<std::size_t>(j)] =
          std::max(maxv[static_cast<std::size_t>(j - 1)], block[static_cast<std::size_t>(j)]);
    }
  }
  return best;
}

}  // namespace synth
