// Acceptance checks, one PASS/FAIL line per criterion.
//   acceptance                 runs all nine
//   acceptance --criterion N   runs one; exit status 1 on FAIL

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "synth/codebook.hpp"
#include "synth/coupling.hpp"
#include "synth/exact_synth.hpp"
#include "synth/regions.hpp"

using namespace synth;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double h2b(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return -(x * std::log2(x) + (1.0 - x) * std::log2(1.0 - x));
}

double entropy_nats(const Eigen::MatrixXd& m) {
  double h = 0.0;
  for (Index i = 0; i < m.size(); ++i)
    if (m.data()[i] > 0.0) h -= m.data()[i] * std::log(m.data()[i]);
  return h;
}

int threads() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

Decomposition dsbs_member(double p, double a) {
  const double b = (p - a) / (1.0 - 2.0 * a);
  return {Pmf::uniform(2), Channel::bsc(a), Channel::bsc(b)};
}

Eigen::VectorXd random_mass(std::mt19937_64& rng, Index k, double zero_prob) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd v(k);
  for (;;) {
    for (Index i = 0; i < k; ++i) v(i) = u(rng) < zero_prob ? 0.0 : -std::log(1.0 - u(rng));
    if (v.sum() > 0.0) break;
  }
  return v / v.sum();
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const double p = 0.2;
  Outcome o;
  bool ok = true;

  const RateConstraints at_p = dsbs_exact_constraints_bits(p, p);
  const double r_expect = 1.0 - h2b(p);
  const double r0_expect = h2b(p);
  const double r0_corner = at_p.sum_min - at_p.r_min;
  ok &= std::abs(at_p.r_min - r_expect) <= 1e-9 && std::abs(r0_corner - r0_expect) <= 1e-9;
  ok &= std::abs(r_expect - 0.278072) < 5e-7 && std::abs(r0_expect - 0.721928) < 5e-7;

  // The same member through the general inner bound (LP per w).
  const RateConstraints gen = inner_constraints(dsbs_member(p, p), JointPmf::dsbs(p));
  const double gen_err = std::max(std::abs(gen.r_min / std::log(2.0) - at_p.r_min),
                                  std::abs(gen.sum_min / std::log(2.0) - at_p.sum_min));
  ok &= gen_err <= 1e-9;

  double min_margin = kInf, worst_general = 0.0;
  const int interior = 999;
  for (int i = 1; i <= interior; ++i) {
    const double a = p * i / (interior + 1);
    const RateConstraints ex = dsbs_exact_constraints_bits(p, a);
    const RateConstraints tv = dsbs_tv_constraints_bits(p, a);
    min_margin = std::min(min_margin, ex.sum_min - tv.sum_min);
    if (i % 100 == 0) {
      const RateConstraints g = inner_constraints(dsbs_member(p, a), JointPmf::dsbs(p));
      worst_general = std::max(worst_general, std::abs(g.sum_min / std::log(2.0) - ex.sum_min));
    }
  }
  ok &= min_margin > 1e-6 && worst_general <= 1e-9;
  const double t = seconds_since(t0);
  ok &= t < 1.0;
  o.pass = ok;
  o.detail = fmt("R(a=p)=%.9f bits, corner R0=%.9f bits (H2=%.9f), general-LP err %.1e, min exact-TV sum margin "
                 "on (0,p) %.3e bits, %.3fs",
                 at_p.r_min, r0_corner, r0_expect, std::max(gen_err, worst_general), min_margin, t);
  return o;
}

Outcome criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  const double p = 0.2;
  const std::vector<double> grid_bits = linspace(0.0, 1.0, 21);
  std::vector<double> grid_nats;
  for (double g : grid_bits) grid_nats.push_back(g * std::log(2.0));

  SearchOptions so;
  so.restarts = 32;
  so.seed = 1;
  so.threads = threads();
  const SearchResult res = search_lower_boundary(JointPmf::dsbs(p), grid_nats, Bound::Inner, so);

  // Closed-form boundary: min over a of max(r_bound, sum_bound - R0) on a fine grid.
  const RegionCurve fine = dsbs_exact_region(p, 200001);
  double lo = kInf, hi = -kInf;
  for (std::size_t i = 0; i < grid_bits.size(); ++i) {
    const double closed = boundary_at(fine, grid_bits[i]);
    const double searched = res.curve.boundary[i].r / std::log(2.0);
    lo = std::min(lo, searched - closed);
    hi = std::max(hi, searched - closed);
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = lo >= -1e-9 && hi <= 1e-3 && t < 120.0;
  o.detail = fmt("searched - closed form over 21 R0 points in [%.3e, %.3e] bits (allowed [0, 1e-3]), %ld evals, "
                 "%.2fs",
                 lo, hi, res.evaluations, t);
  return o;
}

Outcome criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20261016);
  std::uniform_int_distribution<int> size(1, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0, worst_marg = 0.0;
  int bad = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Index m = size(rng), n = size(rng);
    TransportProblem tp;
    tp.row = Pmf(random_mass(rng, m, 0.15));
    tp.col = Pmf(random_mass(rng, n, 0.15));
    tp.cost = Eigen::MatrixXd(m, n);
    const bool integral = trial % 3 == 0;  // many ties
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j) tp.cost(i, j) = integral ? std::floor(4.0 * u(rng)) : 10.0 * u(rng) - 5.0;
    tp.sense = trial % 2 ? Sense::Maximize : Sense::Minimize;

    const Coupling c = solve_transport(tp);
    double best = tp.sense == Sense::Minimize ? kInf : -kInf;
    for (const Coupling& v : enumerate_vertex_couplings(tp.row, tp.col)) {
      const double val = coupling_cost(v.joint.mass(), tp.cost);
      best = tp.sense == Sense::Minimize ? std::min(best, val) : std::max(best, val);
    }
    const double recomputed = coupling_cost(c.joint.mass(), tp.cost);
    const double err = std::max(std::abs(c.objective - best), std::abs(recomputed - best));
    worst = std::max(worst, err);
    const Eigen::MatrixXd& q = c.joint.mass();
    worst_marg = std::max({worst_marg, (q.rowwise().sum() - tp.row.mass()).cwiseAbs().maxCoeff(),
                           (q.colwise().sum().transpose() - tp.col.mass()).cwiseAbs().maxCoeff()});
    if (err > 1e-9) ++bad;
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = bad == 0 && worst_marg <= 1e-8 && t < 30.0;
  o.detail = fmt("500 instances, %d above 1e-9, worst |solver - vertex optimum| %.2e, worst marginal error %.2e, %.2fs",
                 bad, worst, worst_marg, t);
  return o;
}

Outcome criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(1, 4);
  int violations = 0, iff_fail = 0, products = 0;
  double min_slack_nonproduct = kInf;
  for (int trial = 0; trial < 500; ++trial) {
    const Index m = size(rng), n = size(rng);
    Eigen::MatrixXd mass;
    if (trial % 4 == 0) {
      mass = random_mass(rng, m, 0.2) * random_mass(rng, n, 0.2).transpose();
    } else {
      const Eigen::VectorXd flat = random_mass(rng, m * n, 0.2);
      mass = Eigen::Map<const Eigen::MatrixXd>(flat.data(), m, n);
    }
    const JointPmf pi(mass);
    const double h = entropy_nats(mass);
    const double value = max_cross_entropy(pi.row_marginal(), pi.col_marginal(), pi).objective;
    const Eigen::MatrixXd prod = mass.rowwise().sum() * mass.colwise().sum();
    const double tv = 0.5 * (mass - prod).cwiseAbs().sum();
    const double slack = value - h;
    if (slack < -1e-12) ++violations;
    const bool is_product = tv < 1e-8;
    const bool equal = std::abs(slack) < 1e-8;
    if (is_product != equal) ++iff_fail;
    if (is_product) ++products;
    else min_slack_nonproduct = std::min(min_slack_nonproduct, slack);
  }

  // Closed form for the DSBS against the LP on marginals Bern(alpha), Bern(beta) as P(0).
  double worst = 0.0;
  for (double p : {0.1, 0.2, 0.4}) {
    const JointPmf pi = JointPmf::dsbs(p);
    for (int i = 1; i <= 9; ++i)
      for (int j = 1; j <= 9; ++j) {
        const double alpha = i / 10.0, beta = j / 10.0;
        const Pmf px(Eigen::Vector2d(alpha, 1.0 - alpha));
        const Pmf py(Eigen::Vector2d(beta, 1.0 - beta));
        const double lp = max_cross_entropy(px, py, pi).objective;
        worst = std::max(worst, std::abs(lp - dsbs_max_cross_entropy(alpha, beta, p)));
      }
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = violations == 0 && iff_fail == 0 && worst <= 1e-9;
  o.detail = fmt("500 pmfs (%d products): %d inequality violations, %d equality/product mismatches, smallest "
                 "non-product slack %.3e; 243-point closed form vs LP max err %.2e; %.2fs",
                 products, violations, iff_fail, min_slack_nonproduct, worst, t);
  return o;
}

Outcome criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  const double rho = 0.5;
  const std::vector<double> grid = gaussian_default_grid(rho, 201);
  double worst_gap = 0.0, worst_eq18 = 0.0;

  // Gauss-Hermite (probabilists') nodes for E over W ~ N(0,1): the cross-entropy
  // is quadratic in the conditional means, so 3 nodes are exact.
  const double gh_x[3] = {-std::sqrt(3.0), 0.0, std::sqrt(3.0)};
  const double gh_w[3] = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
  for (double alpha : grid) {
    const double beta = rho / alpha;
    const RateConstraints ex = gaussian_exact_inner_constraints_bits(rho, alpha);
    const RateConstraints tv = gaussian_tv_constraints_bits(rho, alpha);
    const double gap = (ex.sum_min - tv.sum_min) * std::log(2.0);
    const double expect = rho * std::sqrt((1.0 - alpha * alpha) * (1.0 - beta * beta)) / (1.0 - rho * rho);
    worst_gap = std::max(worst_gap, std::abs(gap - expect));

    // Inner sum bound from its definition: -h(XY|W) + E_w H(P_X|w, P_Y|w || pi).
    const double vx = 1.0 - alpha * alpha, vy = 1.0 - beta * beta;
    const double h_cond = std::log(2.0 * std::numbers::pi * std::exp(1.0)) + 0.5 * std::log(vx * vy);
    double cross = 0.0;
    for (int k = 0; k < 3; ++k)
      cross += gh_w[k] * gaussian_max_cross_entropy(alpha * gh_x[k], beta * gh_x[k], vx, vy, rho);
    const double direct = cross - h_cond;
    worst_eq18 = std::max(worst_eq18, std::abs(direct - ex.sum_min * std::log(2.0)) / std::max(1.0, std::abs(direct)));
  }
  // Gap toward alpha -> 1.
  const double gap_near_one = gaussian_inner_gap_nats(rho, 1.0 - 1e-9);
  bool shrinking = true;
  double prev = kInf;
  for (double alpha : {0.9, 0.99, 0.999, 0.9999, 1.0 - 1e-9}) {
    const RateConstraints ex = gaussian_exact_inner_constraints_bits(rho, alpha);
    const RateConstraints tv = gaussian_tv_constraints_bits(rho, alpha);
    const double g = ex.sum_min - tv.sum_min;
    shrinking &= g < prev;
    prev = g;
  }
  // R0 bounds at R = I(X;Y), i.e. alpha -> rho.
  const double a_edge = rho + 1e-6;
  const RateConstraints ex_edge = gaussian_exact_inner_constraints_bits(rho, a_edge);
  const RateConstraints tv_edge = gaussian_tv_constraints_bits(rho, a_edge);
  const double r0_exact = ex_edge.sum_min - ex_edge.r_min;
  const double r0_tv = tv_edge.sum_min - tv_edge.r_min;
  const bool diverge = r0_exact > 1e3 && r0_tv > 1e3;
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = worst_gap <= 1e-12 && worst_eq18 <= 1e-12 && gap_near_one < 1e-4 && shrinking && diverge;
  o.detail = fmt("gap vs rho*sqrt((1-a^2)(1-b^2))/(1-rho^2) max err %.2e nats; sum bound vs quadrature of its "
                 "definition rel err %.2e; gap at alpha=1-1e-9 %.2e nats, monotone to 0: %s; R0 bounds at "
                 "alpha=rho+1e-6: exact %.3f bits, TV %.3f bits (need > 1e3); %.3fs",
                 worst_gap, worst_eq18, gap_near_one, shrinking ? "yes" : "no", r0_exact, r0_tv, t);
  return o;
}

Outcome criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();
  const JointPmf pi = JointPmf::dsbs(0.2);
  const double bit = std::log(2.0);
  DemoOptions opt;
  opt.n = 8;
  opt.eps = 0.1;
  opt.r = 1.15 * bit;
  opt.r0 = 0.15 * bit;
  int finite = 0, inexact = 0;
  double worst = 0.0, rate_lo = kInf, rate_hi = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    opt.seed = seed;
    const DemoReport rep = end_to_end_demo(pi, opt);
    if (!rep.finite) continue;
    ++finite;
    worst = std::max(worst, rep.exactness_max_abs_error);
    if (!(rep.exactness_max_abs_error <= 1e-12)) ++inexact;
    rate_lo = std::min(rate_lo, rep.rates.total / bit);
    rate_hi = std::max(rate_hi, rep.rates.total / bit);
  }

  DemoOptions q = opt;
  q.n = 6;
  q.eps = 0.2;
  q.r = 1.6 * bit;
  q.rational = true;
  int q_finite = 0, q_exact = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    q.seed = seed;
    const DemoReport rep = end_to_end_demo(pi, q);
    if (!rep.finite) continue;
    ++q_finite;
    if (rep.rational_exact) ++q_exact;
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = finite >= 15 && inexact == 0 && q_finite > 0 && q_exact == q_finite && t < 300.0;
  o.detail = fmt("n=8: %d/20 seeds finite, max atomwise error %.2e, expected rate %.3f-%.3f bits/symbol; "
                 "rational n=6: %d/%d finite seeds exact; %.2fs",
                 finite, worst, rate_lo, rate_hi, q_exact, q_finite, t);
  return o;
}

Outcome criterion_7() {
  const auto t0 = std::chrono::steady_clock::now();
  // W = X uniform, Y|W = BSC(0.2): I(W;X) = I(W;XY) = log 2 nats.
  CodebookParams p;
  p.qw = Pmf::uniform(2);
  p.qx_given_w = Channel::identity(2);
  p.qy_given_w = Channel::bsc(0.2);
  p.r0 = 0.0;
  p.seed = 7;
  const double bound = std::log(2.0);
  const int trials = 200;

  std::string above;
  std::vector<double> fractions;
  for (int n : {6, 8, 10, 12}) {
    p.n = n;
    p.r = bound + 0.2;
    const CoveringReport rep = covering_experiment(p, trials, 0.2, DeficitKind::Distributed, threads());
    fractions.push_back(rep.fraction_below);
    above += fmt(" n=%d:%.3f", n, rep.fraction_below);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < fractions.size(); ++i) monotone &= fractions[i] >= fractions[i - 1];

  p.n = 12;
  p.r = bound - 0.15;
  const CoveringReport below = covering_experiment(p, trials, 0.2, DeficitKind::Distributed, threads());
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = monotone && fractions.back() > 0.8 && below.fraction_below < 0.5 && t < 600.0;
  o.detail = fmt("fraction of %d codebooks with deficit < 0.2 nats at bound+0.2:%s (non-decreasing: %s, need > 0.8 "
                 "at n=12); at bound-0.15, n=12: %.3f (need < 0.5); %.1fs",
                 trials, above.c_str(), monotone ? "yes" : "no", below.fraction_below, t);
  return o;
}

Outcome criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> wsize(1, 12), ksize(1, 6);
  int fail = 0, mismatch = 0;
  double tightest = kInf;
  for (int trial = 0; trial < 1000; ++trial) {
    const Index w = wsize(rng), k = ksize(rng);
    const Eigen::VectorXd flat = random_mass(rng, w * k, trial % 5 == 0 ? 0.3 : 0.0);
    const Eigen::MatrixXd joint = Eigen::Map<const Eigen::MatrixXd>(flat.data(), w, k);

    double h = 0.0, len = 0.0;
    for (Index c = 0; c < k; ++c) {
      const double pk = joint.col(c).sum();
      if (pk <= 0.0) continue;
      std::vector<double> cond(static_cast<std::size_t>(w));
      for (Index r = 0; r < w; ++r) cond[static_cast<std::size_t>(r)] = joint(r, c) / pk;
      const std::vector<int> lengths = huffman_code(cond);
      double kraft = 0.0;
      for (Index r = 0; r < w; ++r) {
        const double q = cond[static_cast<std::size_t>(r)];
        if (q > 0.0) {
          h -= pk * q * std::log2(q);
          len += pk * q * lengths[static_cast<std::size_t>(r)];
          kraft += std::ldexp(1.0, -lengths[static_cast<std::size_t>(r)]);
        }
      }
      if (kraft > 1.0) ++fail;
    }
    if (!(h <= len && len < h + 1.0)) ++fail;
    tightest = std::min(tightest, std::min(len - h, h + 1.0 - len));
    const ConditionalHuffman ch = conditional_huffman_rate(joint);
    if (std::abs(ch.length_bits - len) > 1e-12 || std::abs(ch.entropy_bits - h) > 1e-12 || !ch.sandwich) ++mismatch;
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = fail == 0 && mismatch == 0 && t < 5.0;
  o.detail = fmt("1000 joints: %d sandwich/Kraft failures, %d library mismatches, closest approach to an edge %.3e "
                 "bits, %.3fs",
                 fail, mismatch, tightest, t);
  return o;
}

Outcome criterion_9() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (double p : {0.1, 0.3}) {
    const double expect = h2b(p) * std::log(2.0);
    worst = std::max(worst, std::abs(necessary_conditional_entropy(JointPmf::dsbs(p)) - expect));
  }
  const JointPmf ind = JointPmf::product(Pmf(Eigen::Vector3d(0.2, 0.5, 0.3)), Pmf(Eigen::Vector3d(0.1, 0.6, 0.3)));
  const double v_ind = necessary_conditional_entropy(ind);
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = worst <= 1e-9 && std::abs(v_ind) <= 1e-9;
  o.detail = fmt("DSBS p in {0.1,0.3}: max |H(Y|X)-nec - H2(p)| %.2e nats; independent source %.2e; %.3fs", worst,
                 v_ind, t);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> checks{criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                                                      criterion_6, criterion_7, criterion_8, criterion_9};
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      which.push_back(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: acceptance [--criterion N]...\n");
      return 2;
    }
  }
  if (which.empty())
    for (int i = 1; i <= 9; ++i) which.push_back(i);

  bool all = true;
  for (int c : which) {
    if (c < 1 || c > 9) {
      std::fprintf(stderr, "no criterion %d\n", c);
      return 2;
    }
    Outcome o;
    try {
      o = checks[static_cast<std::size_t>(c - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d: %s  %s\n", c, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all &= o.pass;
  }
  return all ? 0 : 1;
}
