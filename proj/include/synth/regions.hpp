#pragma once

// Rate regions for exact and TV-approximate channel synthesis: per
// decomposition constraints, closed-form DSBS and Gaussian curves, and a
// numerical search over decompositions.

#include <cstdint>
#include <string>
#include <vector>

#include "synth/coupling.hpp"

namespace synth {

/// Test channel P_W P_{X|W} P_{Y|W}.
struct Decomposition {
  Pmf pw;
  Channel px_given_w;
  Channel py_given_w;

  Index w_size() const { return pw.size(); }
};

/// Throws DomainError on shape mismatch.
void check_shapes(const Decomposition& d);

/// sum_w P(w) P_{X|W}(.|w) P_{Y|W}(.|w)^T.
JointPmf induced_joint(const Decomposition& d);

/// Throws PreconditionViolated unless induced_joint(d) equals pi within tol.
void require_induces(const Decomposition& d, const JointPmf& pi, double tol = 1e-8);

/// Drops zero-mass symbols of W and merges symbols with identical conditionals.
Decomposition compact(const Decomposition& d);

/// Rate constraints R >= r_min and R0 + R >= sum_min, in nats.
struct RateConstraints {
  double r_min = 0.0;
  double sum_min = 0.0;
};

struct RatePoint {
  double r0 = 0.0;
  double r = 0.0;
};

/// R >= I(W;X), R0 + R >= I(W;XY).
RateConstraints cuff_constraints(const Decomposition& d, const JointPmf& pi);
/// Sum bound -H(XY|W) + sum_w P(w) H(P_{X|w}, P_{Y|w} || pi).
RateConstraints inner_constraints(const Decomposition& d, const JointPmf& pi);
/// Sum bound -H(XY|W) + min over couplings Q of (P_W, P_W) of
/// sum Q(w,w') H(P_{X|w}, P_{Y|w'} || pi).
RateConstraints outer_constraints(const Decomposition& d, const JointPmf& pi);

/// Reduces the support of W to at most |X||Y| + 1 symbols while keeping the
/// induced joint and I(W;X) fixed and not increasing the sum bound. Valid for
/// the inner and Cuff bounds, whose constraints are linear in P_W.
enum class Bound { Inner, Outer, Cuff };
Decomposition reduce_cardinality(const Decomposition& d, const JointPmf& pi, Bound bound);

// ---------------------------------------------------------------------------

/// Sampled family of constraint pairs plus the lower boundary
/// R*(R0) = min over the family of max(r_bound, sum_bound - R0).
struct RegionCurve {
  std::string param_name;
  std::vector<double> param;
  std::vector<double> r_bound;
  std::vector<double> sum_bound;
  /// Lower boundary evaluated at each r0 (same length).
  std::vector<RatePoint> boundary;
  Units units = Units::Bits;
};

/// min over members of max(r_bound, sum_bound - r0) in the curve's units.
double boundary_at(const RegionCurve& c, double r0);

/// Fills c.boundary with one point per member, at its corner R0 = sum_bound - r_bound.
void fill_corner_boundary(RegionCurve& c);

RegionCurve convert_units(const RegionCurve& c, Units to);

/// Evenly spaced points on [lo, hi].
std::vector<double> linspace(double lo, double hi, int count);

/// a in [0, p], b = (p - a) / (1 - 2a); R >= 1 - H2(a) bits and
/// R0 + R >= log2(1/alpha0) + (a + b) log2(alpha0/beta0) - H2(a) - H2(b).
RateConstraints dsbs_exact_constraints_bits(double p, double a);
/// Same family with the TV sum bound 1 + H2(p) - H2(a) - H2(b).
RateConstraints dsbs_tv_constraints_bits(double p, double a);

RegionCurve dsbs_exact_region(double p, const std::vector<double>& a_grid);
RegionCurve dsbs_exact_region(double p, int points = 201);
RegionCurve dsbs_tv_region(double p, const std::vector<double>& a_grid);
RegionCurve dsbs_tv_region(double p, int points = 201);

/// alpha in [rho, 1), beta = rho / alpha.
RateConstraints gaussian_tv_constraints_bits(double rho, double alpha);
RateConstraints gaussian_exact_inner_constraints_bits(double rho, double alpha);
/// rho sqrt((1-alpha^2)(1-beta^2)) / (1-rho^2) in nats.
double gaussian_inner_gap_nats(double rho, double alpha);

std::vector<double> gaussian_default_grid(double rho, int points = 201);
RegionCurve gaussian_tv_region(double rho, const std::vector<double>& alpha_grid);
RegionCurve gaussian_exact_inner_region(double rho, const std::vector<double>& alpha_grid);

// ---------------------------------------------------------------------------

struct SearchOptions {
  int restarts = 32;
  std::uint64_t seed = 1;
  int directions = 17;           // scalarization angles between the two axes
  int w_size = 0;                // free W symbols in the outer search; 0 means |X||Y| + 1
  long max_evals_per_run = 3000;
  double min_step = 1e-7;
  int threads = 1;
  /// Extra starting decompositions (any W size).
  std::vector<Decomposition> seeds;
};

struct SearchResult {
  RegionCurve curve;                        // units: nats
  std::vector<RateConstraints> hull;        // lower convex chain of (r, sum) pairs
  std::vector<Decomposition> hull_decompositions;
  long evaluations = 0;
};

/// Traces an upper bound on the lower boundary of a region by local search
/// over decompositions; every evaluated decomposition induces pi exactly.
/// Boundary points at r0_grid, in nats, with time sharing between the points
/// found.
SearchResult search_lower_boundary(const JointPmf& pi, const std::vector<double>& r0_grid,
                                   Bound bound, const SearchOptions& opts = {});

/// The same search on pi^n with rates divided by n. Product decompositions of
/// the single-letter optimum seed the search.
SearchResult multi_letter_inner(const JointPmf& pi, int n, const std::vector<double>& r0_grid,
                                SearchOptions opts = {},
                                std::uint64_t budget = kDefaultAtomBudget);

/// Product decomposition d1 x d2 for the product source.
Decomposition tensor(const Decomposition& a, const Decomposition& b);

/// min H(f(Y)|X) over partitions f of the Y alphabet with X - f(Y) - Y.
double necessary_conditional_entropy(const JointPmf& pi);

}  // namespace synth
