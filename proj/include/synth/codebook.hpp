#pragma once

// Truncated i.i.d. random codebooks and exact evaluation of the output
// distributions they induce, for Monte Carlo checks of Renyi covering.

#include <cstdint>
#include <span>
#include <vector>

#include "synth/dist.hpp"

namespace synth {

struct CodebookParams {
  Pmf qw;
  Channel qx_given_w;
  Channel qy_given_w;
  int n = 1;
  double r = 0.0;   // nats per symbol
  double r0 = 0.0;  // nats per symbol
  double eps = -1.0;  // negative selects default_eps(n)
  std::uint64_t seed = 0;
  std::uint64_t budget = kDefaultAtomBudget;  // per-side enumeration limit
};

/// 0.2 for n <= 10, 0.1 above.
double default_eps(int n);
double effective_eps(const CodebookParams& p);
/// ceil(e^{nR}) and ceil(e^{nR0}).
std::uint64_t message_count(const CodebookParams& p);
std::uint64_t key_count(const CodebookParams& p);

/// Q_W Q_{X|W} Q_{Y|W} summed over w: the single-letter joint being covered.
JointPmf covered_joint(const CodebookParams& p);

class Codebook {
 public:
  Codebook() = default;
  Codebook(int n, std::uint64_t messages, std::uint64_t keys, std::vector<int> symbols);

  int length() const { return n_; }
  std::uint64_t messages() const { return messages_; }
  std::uint64_t keys() const { return keys_; }
  std::uint64_t size() const { return messages_ * keys_; }
  std::span<const int> codeword(std::uint64_t m, std::uint64_t k) const;
  /// Codeword by flat slot k * messages + m.
  std::span<const int> slot(std::uint64_t s) const;

 private:
  int n_ = 0;
  std::uint64_t messages_ = 0;
  std::uint64_t keys_ = 0;
  std::vector<int> symbols_;
};

/// Q^n_{X|W}(.|w^n) restricted to the conditional shell T_{4 eps}(Q_W Q_{X|W} | w^n)
/// and renormalized. Throws EmptyTypicalSet when the shell is empty.
SequenceDist truncated_conditional(const Pmf& qw, const Channel& q, std::span<const int> w_seq,
                                   double eps, std::uint64_t budget = kDefaultAtomBudget);

/// Codewords drawn i.i.d. from Q_W^n restricted to T_{2 eps}(Q_W). A draw whose
/// X or Y shell is empty is redrawn, at most 100 times.
Codebook sample_codebook(const CodebookParams& p);

/// Exact output law, rows x^n and columns y^n in mixed radix. The budget
/// applies to |X|^n |Y|^n.
JointPmf induced_joint_output(const Codebook& cb, const CodebookParams& p,
                              std::uint64_t budget = kDefaultAtomBudget);

/// D_inf(induced output || target^n) in nats, streamed one x^n row at a time.
double covering_deficit(const Codebook& cb, const CodebookParams& p, const JointPmf& target,
                        int threads = 1);

struct CentralizedDeficits {
  double forward = 0.0;
  double reverse = 0.0;
};

/// forward = max_k D_inf(Q_{X^n|k} || qx^n); reverse = max_k D_inf(qx^n on T_eps || Q_{X^n|k}).
CentralizedDeficits centralized_deficits(const Codebook& cb, const CodebookParams& p,
                                         const Pmf& qx, double eps);

enum class DeficitKind { Distributed, Forward, Reverse };

struct CoveringReport {
  int n = 0;
  double r = 0.0;
  double r0 = 0.0;
  double eps = 0.0;
  int trials = 0;
  double threshold = 0.0;
  DeficitKind kind = DeficitKind::Distributed;
  std::vector<double> deficits;
  int below = 0;
  double fraction_below = 0.0;
  double ci_lo = 0.0;  // Clopper-Pearson 95%
  double ci_hi = 1.0;
};

/// Trial t uses seed counter_hash(p.seed, {t}).
CoveringReport covering_experiment(const CodebookParams& p, int trials, double threshold,
                                   DeficitKind kind = DeficitKind::Distributed, int threads = 1);

}  // namespace synth
