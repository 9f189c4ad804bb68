#pragma once

// Transportation problems over the coupling polytope C(P, Q).

#include <utility>
#include <vector>

#include "synth/dist.hpp"

namespace synth {

enum class Sense { Minimize, Maximize };

/// Costs may be +inf. In minimize sense a +inf cell may carry no mass; in
/// maximize sense any +inf cell inside supp(row) x supp(col) makes the value
/// +inf. -inf is allowed in maximize sense only, with the mirrored meaning.
struct TransportProblem {
  Pmf row;
  Pmf col;
  Eigen::MatrixXd cost;
  Sense sense = Sense::Minimize;
};

/// Dual certificate in the caller's sense: reduced costs c - u_i - v_j are
/// >= 0 (minimize) or <= 0 (maximize) on every support cell.
struct TransportCertificate {
  Eigen::VectorXd u;  // zero on rows outside supp(row)
  Eigen::VectorXd v;
  std::vector<std::pair<Index, Index>> basis;
  /// Largest amount by which a finite-cost reduced cost has the wrong sign.
  double max_violation = 0.0;
  int pivots = 0;
};

struct Coupling {
  JointPmf joint;
  double objective = 0.0;
  TransportCertificate certificate;
};

/// Transportation simplex with lexicographic perturbation and Bland's rule.
/// Returns an optimal vertex coupling; throws Infeasible when every coupling
/// puts positive mass on a +inf cell in minimize sense.
Coupling solve_transport(const TransportProblem& tp);

/// All vertices of C(px, py), found by enumerating spanning trees of the
/// support graph. Requires |supp px| * |supp py| <= 25.
std::vector<Coupling> enumerate_vertex_couplings(const Pmf& px, const Pmf& py);

/// Sum of mass * cost with 0 * inf = 0.
double coupling_cost(const Eigen::MatrixXd& mass, const Eigen::MatrixXd& cost);

}  // namespace synth
