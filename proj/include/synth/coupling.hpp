#pragma once

// Maximal cross-entropy H(P_X, P_Y || pi): the largest E_Q[-log pi] over
// couplings Q of (P_X, P_Y).

#include <optional>

#include "synth/transport.hpp"

namespace synth {

/// Value and an optimal coupling. The value is +inf exactly when pi vanishes
/// somewhere on supp(px) x supp(py); the coupling is then the product.
Coupling max_cross_entropy(const Pmf& px, const Pmf& py, const JointPmf& pi);

/// Cost matrix -log pi with +inf where pi = 0.
Eigen::MatrixXd log_loss_cost(const JointPmf& pi);

/// Value only, on raw mass vectors and a log-loss cost matrix. Supports of
/// size 1 and 2x2 are solved in closed form, larger ones by the simplex.
double max_cross_entropy_value(const Eigen::VectorXd& px, const Eigen::VectorXd& py,
                               const Eigen::MatrixXd& cost);

/// DSBS with crossover p, alpha = P_X(0), beta = P_Y(0).
double dsbs_max_cross_entropy(double alpha, double beta, double p);

/// Standard bivariate normal pi with correlation rho against marginals
/// N(mu1, var1) and N(mu2, var2); the optimal coupling is antitone.
double gaussian_max_cross_entropy(double mu1, double mu2, double var1, double var2, double rho);

struct CrossEntropyReport {
  double joint_entropy = 0.0;        // H(pi)
  double marginal_value = 0.0;       // H(pi_X, pi_Y || pi)
  double slack_a = 0.0;              // marginal_value - joint_entropy
  double tv_to_product = 0.0;        // |pi - pi_X pi_Y|
  bool is_product = false;           // tv_to_product < 1e-8
  bool equality_a = false;           // slack_a < 1e-8
  bool equality_matches_product = false;
  std::optional<double> value_b;     // H(P_X, P_Y || pi)
  std::optional<double> product_b;   // sum P_X P_Y log 1/pi
  std::optional<double> slack_b;
};

/// Checks H(pi_X, pi_Y || pi) >= H(pi) with equality iff pi is a product,
/// and, when px/py are given, H(P_X, P_Y || pi) >= sum P_X P_Y log 1/pi.
CrossEntropyReport check_maximal_cross_entropy_properties(const JointPmf& pi,
                                                         const Pmf* px = nullptr,
                                                         const Pmf* py = nullptr);

}  // namespace synth
