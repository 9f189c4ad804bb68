#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "synth/exact_synth.hpp"

using namespace synth;

namespace {

double log2_sum_kraft(const std::vector<int>& len, const std::vector<double>& mass) {
  double k = 0.0;
  for (std::size_t i = 0; i < len.size(); ++i)
    if (mass[i] > 0.0) k += std::ldexp(1.0, -len[i]);
  return k;
}

std::vector<double> random_pmf(std::mt19937_64& rng, int k) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(static_cast<std::size_t>(k));
  double s = 0.0;
  for (auto& x : v) s += (x = e(rng));
  for (auto& x : v) x /= s;
  return v;
}

SynthesizedChannel one_letter_uniform() { return target_channel(JointPmf(Eigen::Matrix2d::Constant(0.25)), 1, 10.0); }

}  // namespace

TEST(MixtureDecompose, TargetItselfIsItsOwnResidual) {
  const SynthesizedChannel t = target_channel(JointPmf::dsbs(0.2), 4, 0.2);
  for (double delta : {1e-12, 0.3, 2.0}) {
    const SynthesizedChannel r = mixture_decompose(t, t, delta);
    for (std::uint64_t x = 0; x < t.x_atoms; ++x) {
      if (!t.typical[x]) continue;
      for (std::uint64_t y = 0; y < t.y_atoms; ++y) EXPECT_NEAR(r(x, y), t(x, y), 1e-12);
    }
  }
}

TEST(MixtureDecompose, BoundaryCaseGivesPointMass) {
  const SynthesizedChannel t = one_letter_uniform();
  SynthesizedChannel p = t;
  p(0, 0) = 0.55;
  p(0, 1) = 0.45;
  const SynthesizedChannel r = mixture_decompose(p, t, std::log(1.1));
  EXPECT_NEAR(r(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(r(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(r(1, 0), 0.5, 1e-12);
}

TEST(MixtureDecompose, DeltaBelowDeficitNamesWitness) {
  const SynthesizedChannel t = one_letter_uniform();
  SynthesizedChannel p = t;
  p(1, 0) = 0.3;
  p(1, 1) = 0.7;
  EXPECT_NEAR(channel_deficit(p, t), std::log(1.4), 1e-15);
  try {
    mixture_decompose(p, t, std::log(1.3));
    FAIL() << "expected PreconditionViolated";
  } catch (const PreconditionViolated& e) {
    EXPECT_NE(std::string(e.what()).find("x^n index 1, y^n index 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(mixture_decompose(p, t, -0.1), DomainError);
}

TEST(MixtureDecompose, IdentityHoldsOnRandomPerturbations) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  const SynthesizedChannel t = target_channel(JointPmf::dsbs(0.3), 5, 0.2);
  SynthesizedChannel p = t;
  for (std::uint64_t x = 0; x < t.x_atoms; ++x) {
    double s = 0.0;
    for (std::uint64_t y = 0; y < t.y_atoms; ++y) s += (p(x, y) = t(x, y) * u(rng));
    for (std::uint64_t y = 0; y < t.y_atoms; ++y) p(x, y) /= s;
  }
  const double d = channel_deficit(p, t) + 1e-12;
  const SynthesizedChannel r = mixture_decompose(p, t, d);
  const SynthesizedChannel c = compose_exact(p, r, t, std::exp(-d));
  EXPECT_LE(max_abs_error(c, t), 1e-12);
  for (std::uint64_t x = 0; x < t.x_atoms; ++x) {
    if (!t.typical[x]) continue;
    double s = 0.0;
    for (std::uint64_t y = 0; y < t.y_atoms; ++y) {
      EXPECT_GE(r(x, y), 0.0);
      s += r(x, y);
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(MixtureDecompose, RationalPathIsExact) {
  const RationalChannel t = target_channel_rational(JointPmf::dsbs(0.2), 3, 0.5);
  RationalChannel p = t;
  // Move a third of the mass of one atom to its neighbour in every row.
  for (std::uint64_t x = 0; x < t.x_atoms; ++x) {
    const Rational moved = p(x, 0) / 3;
    p(x, 0) -= moved;
    p(x, 1) += moved;
  }
  Rational lambda(1);
  for (std::uint64_t x = 0; x < t.x_atoms; ++x)
    for (std::uint64_t y = 0; y < t.y_atoms; ++y)
      if (t.typical[x] && p(x, y) > 0 && t(x, y) / p(x, y) < lambda) lambda = t(x, y) / p(x, y);
  const RationalChannel r = mixture_residual(p, t, lambda);
  EXPECT_TRUE(identical(compose_exact(p, r, t, lambda), t));
  EXPECT_THROW(mixture_residual(p, t, Rational(1)), PreconditionViolated);
}

TEST(Huffman, TextbookCases) {
  EXPECT_EQ(huffman_code(std::vector<double>{0.5, 0.25, 0.25}), (std::vector<int>{1, 2, 2}));
  const std::vector<int> u3 = huffman_code(Pmf::uniform(3));
  EXPECT_EQ(u3, (std::vector<int>{2, 2, 1}));
  EXPECT_DOUBLE_EQ((u3[0] + u3[1] + u3[2]) / 3.0, 5.0 / 3.0);
  EXPECT_EQ(huffman_code(std::vector<double>{1.0}), (std::vector<int>{0}));
  EXPECT_EQ(huffman_code(std::vector<double>{0.0, 0.7, 0.0, 0.3}), (std::vector<int>{0, 1, 0, 1}));
  EXPECT_EQ(huffman_code(Pmf::uniform(4)), (std::vector<int>{2, 2, 2, 2}));
  EXPECT_THROW(huffman_code(std::vector<double>{0.0, 0.0}), DomainError);
  EXPECT_THROW(huffman_code(std::vector<double>{}), DomainError);
}

TEST(Huffman, TiesFollowSymbolOrder) {
  // Equal masses merge in index order: {0,1}, then {2,3}, then 4 joins {0,1}.
  EXPECT_EQ(huffman_code(std::vector<double>{0.2, 0.2, 0.2, 0.2, 0.2}), (std::vector<int>{3, 3, 2, 2, 2}));
  EXPECT_EQ(huffman_code(std::vector<double>{0.25, 0.25, 0.25, 0.25}), (std::vector<int>{2, 2, 2, 2}));
}

TEST(Huffman, KraftEqualityAndSandwich) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = random_pmf(rng, 1 + trial % 12);
    const auto len = huffman_code(p);
    if (p.size() > 1) EXPECT_DOUBLE_EQ(log2_sum_kraft(len, p), 1.0);
    double l = 0.0, h = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      l += p[i] * len[i];
      h -= p[i] * std::log2(p[i]);
    }
    EXPECT_LE(h, l + 1e-12);
    EXPECT_LT(l, h + 1.0);
  }
}

TEST(Huffman, BeatsRandomPrefixCodes) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + trial % 7;
    const auto p = random_pmf(rng, k);
    const auto len = huffman_code(p);
    double best = 0.0;
    for (int i = 0; i < k; ++i) best += p[static_cast<std::size_t>(i)] * len[static_cast<std::size_t>(i)];
    // Random lengths, deepened until Kraft holds.
    std::uniform_int_distribution<int> d(1, k);
    std::vector<int> other(static_cast<std::size_t>(k));
    for (auto& v : other) v = d(rng);
    double kraft = 0.0;
    for (int v : other) kraft += std::ldexp(1.0, -v);
    while (kraft > 1.0) {
      kraft = 0.0;
      for (auto& v : other) kraft += std::ldexp(1.0, -(++v));
    }
    double l = 0.0;
    for (int i = 0; i < k; ++i) l += p[static_cast<std::size_t>(i)] * other[static_cast<std::size_t>(i)];
    EXPECT_LE(best, l + 1e-12);
  }
}

TEST(ConditionalHuffman, IndependentUniformAndDeterministic) {
  const Eigen::MatrixXd indep = Eigen::MatrixXd::Constant(8, 3, 1.0 / 24.0);
  const ConditionalHuffman a = conditional_huffman_rate(indep);
  EXPECT_DOUBLE_EQ(a.length_bits, 3.0);
  EXPECT_NEAR(a.entropy_bits, 3.0, 1e-12);
  EXPECT_TRUE(a.sandwich);
  const Eigen::MatrixXd diag = Eigen::MatrixXd::Identity(4, 4) / 4.0;
  const ConditionalHuffman b = conditional_huffman_rate(diag);
  EXPECT_DOUBLE_EQ(b.length_bits, 0.0);
  EXPECT_DOUBLE_EQ(b.entropy_bits, 0.0);
  EXPECT_TRUE(b.sandwich);
}

TEST(ConditionalHuffman, RandomJointsSatisfySandwich) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto v = random_pmf(rng, 32);
    const Eigen::MatrixXd j = Eigen::Map<const Eigen::MatrixXd>(v.data(), 8, 4);
    const ConditionalHuffman c = conditional_huffman_rate(j);
    EXPECT_TRUE(c.sandwich);
    EXPECT_GE(c.max_key_length_bits, c.length_bits - 1e-12);
  }
  EXPECT_THROW(conditional_huffman_rate(Eigen::MatrixXd::Constant(2, 2, 0.3)), DomainError);
}

TEST(ExpectedRate, FormulaLimits) {
  // Full typical set, delta -> 0: 1/n + R.
  EXPECT_NEAR(expected_rate({10, 0.0, 0.4, 1.0, 2}), 0.1 + 0.4, 1e-15);
  // |Y| = 1: 1/n + e^{-delta} R.
  EXPECT_NEAR(expected_rate({4, 0.5, 0.3, 1.0, 1}), 0.25 + std::exp(-0.5) * 0.3, 1e-15);
  const RateBreakdown b = rate_breakdown({8, 0.05, 0.6, 0.7, 2});
  const double keep = std::exp(-0.05);
  EXPECT_NEAR(b.flag, 0.7 / 8, 1e-15);
  EXPECT_NEAR(b.code, 0.7 * keep * 0.6, 1e-15);
  EXPECT_NEAR(b.fallback, 0.7 * (1 - keep) * std::log(2.0) + 0.3 * std::log(2.0), 1e-15);
  EXPECT_NEAR(b.total, b.flag + b.code + b.fallback, 1e-15);
  EXPECT_THROW(expected_rate({0, 0.0, 0.0, 1.0, 2}), DomainError);
}

TEST(SynthesizedChannel, ConstantCodewordGivesTruncatedMarginal) {
  const JointPmf pi = JointPmf::product(Pmf::bernoulli(0.3), Pmf::bernoulli(0.6));
  Eigen::MatrixXd rx(1, 2), ry(1, 2);
  rx << 0.7, 0.3;
  ry << 0.4, 0.6;
  const CodebookParams p{Pmf::point(1, 0), Channel(rx), Channel(ry), 6, 0.0, 0.0, 0.2, 1};
  const Codebook cb = sample_codebook(p);
  const SynthesizedChannel c = synthesized_channel(cb, p, pi);
  const SequenceDist ty = truncated_conditional(p.qw, p.qy_given_w, cb.codeword(0, 0), 0.2);
  const SequenceDist tx = truncated_conditional(p.qw, p.qx_given_w, cb.codeword(0, 0), 0.2);
  for (std::uint64_t x = 0; x < c.x_atoms; ++x) {
    EXPECT_EQ(c.defined[x] != 0, tx(x) > 0.0);
    if (!c.defined[x]) continue;
    for (std::uint64_t y = 0; y < c.y_atoms; ++y) EXPECT_NEAR(c(x, y), ty(y), 1e-15);
  }
}

TEST(EndToEnd, DsbsIsExactAndRatesAreConsistent) {
  DemoOptions o;
  o.n = 8;
  o.eps = 0.1;
  o.r = 1.15 * std::log(2.0);
  o.r0 = 0.15 * std::log(2.0);
  o.seed = 3;
  const DemoReport r = end_to_end_demo(JointPmf::dsbs(0.2), o);
  ASSERT_TRUE(r.finite) << r.diagnostic;
  EXPECT_EQ(r.messages, 589u);
  EXPECT_EQ(r.keys, 3u);
  EXPECT_LE(r.exactness_max_abs_error, 1e-12);
  EXPECT_TRUE(r.huffman.sandwich);
  EXPECT_NEAR(r.fallback_probability, 1.0 - std::exp(-r.delta), 1e-15);
  EXPECT_GE(r.measured_rate, r.huffman.entropy_bits * std::log(2.0) / 8 - 1e-12);
  EXPECT_LT(r.measured_rate, (r.huffman.entropy_bits + 1.0) * std::log(2.0) / 8);
  EXPECT_LE(r.measured_rate, std::log(589.0) / 8 + 1e-12);
  EXPECT_NEAR(r.rates.total, expected_rate({8, r.delta, r.measured_rate, r.pi_typical, 2}), 1e-15);
  EXPECT_NEAR(r.pi_typical, 70.0 / 256.0, 1e-15);
}

TEST(EndToEnd, SameSeedSameReport) {
  DemoOptions o;
  o.n = 6;
  o.r = 1.6 * std::log(2.0);
  o.r0 = 0.1;
  o.seed = 9;
  const DemoReport a = end_to_end_demo(JointPmf::dsbs(0.2), o);
  const DemoReport b = end_to_end_demo(JointPmf::dsbs(0.2), o);
  EXPECT_EQ(a.deficit, b.deficit);
  EXPECT_EQ(a.huffman.length_bits, b.huffman.length_bits);
  EXPECT_EQ(a.rates.total, b.rates.total);
}

TEST(EndToEnd, RationalModeCertifiesExactness) {
  DemoOptions o;
  o.n = 6;
  o.r = 1.6 * std::log(2.0);
  o.r0 = 0.15 * std::log(2.0);
  o.seed = 1;
  o.rational = true;
  const DemoReport r = end_to_end_demo(JointPmf::dsbs(0.2), o);
  ASSERT_TRUE(r.finite) << r.diagnostic;
  EXPECT_TRUE(r.rational_exact);
  o.n = 7;
  EXPECT_THROW(end_to_end_demo(JointPmf::dsbs(0.2), o), DomainError);
}

TEST(EndToEnd, WEqualsYDecomposition) {
  DemoOptions o;
  o.n = 6;
  o.r = 1.6 * std::log(2.0);
  o.seed = 2;
  o.decomposition = DemoDecomposition::WEqualsY;
  const DemoReport r = end_to_end_demo(JointPmf::dsbs(0.2), o);
  ASSERT_TRUE(r.finite) << r.diagnostic;
  EXPECT_LE(r.exactness_max_abs_error, 1e-12);
}

TEST(EndToEnd, ProductSourceWithConstantW) {
  const JointPmf pi = JointPmf::product(Pmf::bernoulli(0.5), Pmf::bernoulli(0.25));
  DemoOptions o;
  o.n = 6;
  o.decomposition = DemoDecomposition::Given;
  Eigen::MatrixXd rx(1, 2), ry(1, 2);
  rx << 0.5, 0.5;
  ry << 0.75, 0.25;
  o.given = {Pmf::point(1, 0), Channel(rx), Channel(ry)};
  const DemoReport r = end_to_end_demo(pi, o);
  ASSERT_TRUE(r.finite) << r.diagnostic;
  EXPECT_EQ(r.messages * r.keys, 1u);
  EXPECT_LE(r.exactness_max_abs_error, 1e-12);
  EXPECT_DOUBLE_EQ(r.huffman.length_bits, 0.0);
  EXPECT_NEAR(r.rates.flag, r.pi_typical / 6, 1e-15);
}

TEST(EndToEnd, UncoveredSourceIsReportedNotThrown) {
  DemoOptions o;
  o.n = 6;
  o.r = 0.2;
  o.seed = 4;
  const DemoReport r = end_to_end_demo(JointPmf::dsbs(0.2), o);
  EXPECT_FALSE(r.finite);
  EXPECT_FALSE(r.diagnostic.empty());
  EXPECT_EQ(r.deficit, kInf);
}
