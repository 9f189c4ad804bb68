#include "synth/coupling.hpp"

#include <cmath>
#include <numbers>

namespace synth {

Eigen::MatrixXd log_loss_cost(const JointPmf& pi) {
  return pi.mass().unaryExpr([](double v) { return v > 0.0 ? -std::log(v) : kInf; });
}

Coupling max_cross_entropy(const Pmf& px, const Pmf& py, const JointPmf& pi) {
  if (px.size() != pi.rows() || py.size() != pi.cols())
    throw DomainError("max_cross_entropy: marginals do not match the alphabet of pi");
  return solve_transport({px, py, log_loss_cost(pi), Sense::Maximize});
}

double max_cross_entropy_value(const Eigen::VectorXd& px, const Eigen::VectorXd& py,
                               const Eigen::MatrixXd& cost) {
  Index rs[2], cs[2];
  int m = 0, n = 0;
  for (Index i = 0; i < px.size(); ++i)
    if (px(i) > 0.0 && m++ < 2) rs[m - 1] = i;
  for (Index j = 0; j < py.size(); ++j)
    if (py(j) > 0.0 && n++ < 2) cs[n - 1] = j;
  if (m > 2 || n > 2) return solve_transport({Pmf(px), Pmf(py), cost, Sense::Maximize}).objective;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (cost(rs[i], cs[j]) == kInf) return kInf;
  if (m == 1 || n == 1) {
    double v = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) v += px(rs[i]) * py(cs[j]) * cost(rs[i], cs[j]);
    return v;
  }
  const double a = px(rs[0]) / (px(rs[0]) + px(rs[1]));
  const double b = py(cs[0]) / (py(cs[0]) + py(cs[1]));
  const double c00 = cost(rs[0], cs[0]), c01 = cost(rs[0], cs[1]);
  const double c10 = cost(rs[1], cs[0]), c11 = cost(rs[1], cs[1]);
  auto f = [&](double t) { return t * c00 + (a - t) * c01 + (b - t) * c10 + (1.0 - a - b + t) * c11; };
  return std::max(f(std::max(0.0, a + b - 1.0)), f(std::min(a, b)));
}

double dsbs_max_cross_entropy(double alpha, double beta, double p) {
  if (!(alpha >= 0.0 && alpha <= 1.0 && beta >= 0.0 && beta <= 1.0))
    throw DomainError("dsbs_max_cross_entropy: alpha, beta must lie in [0,1]");
  if (!(p >= 0.0 && p <= 0.5)) throw DomainError("dsbs_max_cross_entropy: p must lie in [0,1/2]");
  const double a0 = (1.0 - p) / 2, b0 = p / 2;
  const double t = std::min(alpha + beta, 2.0 - alpha - beta);
  if (p == 0.0) return t == 0.0 ? std::log(1.0 / a0) : kInf;
  return std::log(1.0 / a0) + t * std::log(a0 / b0);
}

double gaussian_max_cross_entropy(double mu1, double mu2, double var1, double var2, double rho) {
  if (!(var1 > 0.0 && var2 > 0.0)) throw DomainError("gaussian_max_cross_entropy: variances must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("gaussian_max_cross_entropy: rho must lie in [0,1)");
  const double q = 1.0 - rho * rho;
  const double second = 0.5 * (var1 + mu1 * mu1 + var2 + mu2 * mu2);
  const double min_cross = mu1 * mu2 - std::sqrt(var1 * var2);
  return std::log(2.0 * std::numbers::pi * std::sqrt(q)) + (second - rho * min_cross) / q;
}

CrossEntropyReport check_maximal_cross_entropy_properties(const JointPmf& pi, const Pmf* px,
                                                         const Pmf* py) {
  CrossEntropyReport r;
  const Pmf mx = pi.row_marginal(), my = pi.col_marginal();
  r.joint_entropy = entropy(pi);
  r.marginal_value = max_cross_entropy(mx, my, pi).objective;
  r.slack_a = r.marginal_value - r.joint_entropy;
  r.tv_to_product = tv_distance(pi, JointPmf::product(mx, my));
  r.is_product = r.tv_to_product < 1e-8;
  r.equality_a = std::abs(r.slack_a) < 1e-8;
  r.equality_matches_product = r.is_product == r.equality_a;
  if (px && py) {
    r.value_b = max_cross_entropy(*px, *py, pi).objective;
    r.product_b = coupling_cost(px->mass() * py->mass().transpose(), log_loss_cost(pi));
    r.slack_b = *r.value_b - *r.product_b;
  }
  return r;
}

}  // namespace synth
