#pragma once

// Exact channel synthesis from an approximate code: mixture decomposition
// around a synthesized channel, per-key Huffman coding of the message, and
// rate accounting. The channel arithmetic is templated on the scalar so the
// same code runs in double and in boost::multiprecision::cpp_rational.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "synth/codebook.hpp"
#include "synth/dist.hpp"
#include "synth/regions.hpp"

namespace synth {

using Rational = boost::multiprecision::cpp_rational;

/// Conditional law over Y^n for each x^n; only rows with `defined` set carry
/// a distribution.
template <typename S>
struct BasicSynthesizedChannel {
  int n = 0;
  Index x_alphabet = 0;
  Index y_alphabet = 0;
  double eps = 0.0;
  std::uint64_t x_atoms = 0;
  std::uint64_t y_atoms = 0;
  std::vector<char> typical;  // x^n in T_eps(pi_X)
  std::vector<char> defined;
  std::vector<S> rows;  // row-major, x_atoms * y_atoms

  S& operator()(std::uint64_t x, std::uint64_t y) { return rows[x * y_atoms + y]; }
  const S& operator()(std::uint64_t x, std::uint64_t y) const { return rows[x * y_atoms + y]; }
};

using SynthesizedChannel = BasicSynthesizedChannel<double>;
using RationalChannel = BasicSynthesizedChannel<Rational>;

/// The channel induced by the likelihood encoder m ~ Q(x^n | w(m,k)) and the
/// decoder y^n ~ Q(y^n | w(m,k)), averaged over uniform keys. Rows of T_eps
/// that some key cannot encode stay undefined.
SynthesizedChannel synthesized_channel(const Codebook& cb, const CodebookParams& p, const JointPmf& pi);
RationalChannel synthesized_channel_rational(const Codebook& cb, const CodebookParams& p,
                                             const JointPmf& pi);

/// pi^n_{Y|X} in the same layout, every row defined.
SynthesizedChannel target_channel(const JointPmf& pi, int n, double eps,
                                  std::uint64_t budget = kDefaultAtomBudget);
RationalChannel target_channel_rational(const JointPmf& pi, int n, double eps,
                                        std::uint64_t budget = kDefaultAtomBudget);

/// D_inf(P || pi^n_{Y|X} | rows of T_eps); +inf if a typical row is undefined.
double channel_deficit(const SynthesizedChannel& p, const SynthesizedChannel& target);

/// Residual (e^d pi - P) / (e^d - 1) on typical rows, written with
/// lambda = e^{-d} as (pi - lambda P) / (1 - lambda). Throws
/// PreconditionViolated naming the first atom with lambda P > pi. For
/// lambda = 1 the residual is pi itself.
template <typename S>
BasicSynthesizedChannel<S> mixture_residual(const BasicSynthesizedChannel<S>& p,
                                            const BasicSynthesizedChannel<S>& target, const S& lambda);

SynthesizedChannel mixture_decompose(const SynthesizedChannel& p, const SynthesizedChannel& target,
                                     double delta);

/// lambda P + (1 - lambda) residual on typical rows and target rows elsewhere.
template <typename S>
BasicSynthesizedChannel<S> compose_exact(const BasicSynthesizedChannel<S>& p,
                                         const BasicSynthesizedChannel<S>& residual,
                                         const BasicSynthesizedChannel<S>& target, const S& lambda);

double max_abs_error(const SynthesizedChannel& a, const SynthesizedChannel& b);
bool identical(const RationalChannel& a, const RationalChannel& b);

/// Huffman codeword lengths. Symbols of zero mass get no codeword (length 0).
/// Ties: lowest mass, then smallest symbol index, then earliest creation.
std::vector<int> huffman_code(const std::vector<double>& mass);
std::vector<int> huffman_code(const Pmf& p);

struct ConditionalHuffman {
  double length_bits = 0.0;   // sum_k P(k) L_k
  double entropy_bits = 0.0;  // H(W|K)
  double max_key_length_bits = 0.0;
  bool sandwich = false;      // H <= L < H + 1
};

/// joint(w, k) = P(W=w, K=k); columns with zero mass are skipped.
ConditionalHuffman conditional_huffman_rate(const Eigen::MatrixXd& joint);

struct RateComponents {
  int n = 1;
  double delta = 0.0;         // nats
  double r = 0.0;             // nats per symbol of the approximate code
  double pi_typical = 1.0;    // pi_X^n(T_eps)
  Index y_alphabet = 2;
};

struct RateBreakdown {
  double flag = 0.0;
  double code = 0.0;
  double fallback = 0.0;
  double total = 0.0;
};

/// pi(T)(1/n + e^{-d} R + (1 - e^{-d}) log|Y|) + (1 - pi(T)) log|Y|, nats per symbol.
RateBreakdown rate_breakdown(const RateComponents& c);
double expected_rate(const RateComponents& c);

enum class DemoDecomposition { WEqualsX, WEqualsY, Given };

struct DemoOptions {
  int n = 8;
  double r0 = 0.0;  // nats per symbol
  double r = 0.0;
  std::uint64_t seed = 0;
  double eps = -1.0;  // negative selects default_eps(n)
  DemoDecomposition decomposition = DemoDecomposition::WEqualsX;
  Decomposition given;
  bool rational = false;  // requires n <= 6
};

struct DemoReport {
  int n = 0;
  double eps = 0.0;
  double r0 = 0.0;
  double r = 0.0;
  std::uint64_t messages = 0;
  std::uint64_t keys = 0;
  bool finite = false;
  double deficit = kInf;
  double delta = kInf;
  double fallback_probability = 1.0;
  double pi_typical = 0.0;
  double exactness_max_abs_error = kInf;
  bool rational = false;
  bool rational_exact = false;
  ConditionalHuffman huffman;
  double measured_rate = 0.0;  // L / n in nats per symbol
  double shared_rate = 0.0;    // log K / n
  RateBreakdown rates;
  std::string diagnostic;
};

/// Codebook, deficit, mixture decomposition, exact assembly and rate
/// accounting for one seed. An infinite deficit is reported, not thrown.
DemoReport end_to_end_demo(const JointPmf& pi, const DemoOptions& opts);

/// Codebook parameters for the chosen decomposition of pi.
CodebookParams demo_params(const JointPmf& pi, const DemoOptions& opts);

}  // namespace synth
