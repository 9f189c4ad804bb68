#include "synth/exact_synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <sstream>
#include <tuple>

namespace synth {

namespace {

template <typename S>
struct Shell {
  std::vector<std::uint32_t> idx;
  std::vector<S> p;
};

template <typename S>
S from_double(double v) {
  return S(v);
}

// Support from the double enumeration, masses recomputed in S.
template <typename S>
Shell<S> make_shell(const Pmf& qw, const Channel& q, const std::vector<int>& w, double eps,
                    std::uint64_t budget) {
  const SequenceDist d = truncated_conditional(qw, q, w, eps, budget);
  const int n = static_cast<int>(w.size());
  Shell<S> s;
  S total(0);
  for (Index i = 0; i < d.atoms(); ++i) {
    if (d.mass()(i) <= 0.0) continue;
    const std::vector<int> o = decode_sequence(static_cast<std::uint64_t>(i), q.outputs(), n);
    S prob(1);
    for (int t = 0; t < n; ++t)
      prob *= from_double<S>(q(w[static_cast<std::size_t>(t)], o[static_cast<std::size_t>(t)]));
    s.idx.push_back(static_cast<std::uint32_t>(i));
    s.p.push_back(prob);
    total += prob;
  }
  for (auto& v : s.p) v /= total;
  return s;
}

template <typename S>
BasicSynthesizedChannel<S> empty_like(int n, Index kx, Index ky, double eps, std::uint64_t budget) {
  BasicSynthesizedChannel<S> c;
  c.n = n;
  c.x_alphabet = kx;
  c.y_alphabet = ky;
  c.eps = eps;
  c.x_atoms = checked_power(kx, n, budget);
  c.y_atoms = checked_power(ky, n, budget);
  if (c.x_atoms > budget / c.y_atoms) throw BudgetExceeded("synthesized channel: |X|^n |Y|^n over budget");
  c.rows.assign(c.x_atoms * c.y_atoms, S(0));
  c.defined.assign(c.x_atoms, 0);
  return c;
}

std::vector<char> source_mask(const JointPmf& pi, int n, double eps, std::uint64_t budget) {
  std::vector<char> m = typical_mask(pi.row_marginal(), n, eps, budget);
  if (std::none_of(m.begin(), m.end(), [](char c) { return c != 0; }))
    throw EmptyTypicalSet("source typical set T_eps(pi_X) is empty");
  return m;
}

template <typename S>
BasicSynthesizedChannel<S> synthesize(const Codebook& cb, const CodebookParams& p, const JointPmf& pi) {
  if (pi.rows() != p.qx_given_w.outputs() || pi.cols() != p.qy_given_w.outputs())
    throw DomainError("synthesized_channel: pi shape differs from the output alphabets");
  if (cb.length() != p.n) throw DomainError("synthesized_channel: blocklength mismatch");
  const double eps = effective_eps(p);
  auto c = empty_like<S>(p.n, pi.rows(), pi.cols(), eps, p.budget);
  c.typical = source_mask(pi, p.n, eps, p.budget);

  std::map<std::vector<int>, std::pair<Shell<S>, Shell<S>>> cache;
  std::vector<S> num(c.rows.size()), den(c.x_atoms);
  std::vector<std::uint64_t> covered(c.x_atoms, 0);
  const S inv_keys = S(1) / S(static_cast<long long>(cb.keys()));
  for (std::uint64_t k = 0; k < cb.keys(); ++k) {
    std::fill(num.begin(), num.end(), S(0));
    std::fill(den.begin(), den.end(), S(0));
    for (std::uint64_t m = 0; m < cb.messages(); ++m) {
      const std::vector<int> w(cb.codeword(m, k).begin(), cb.codeword(m, k).end());
      auto it = cache.find(w);
      if (it == cache.end())
        it = cache.emplace(w, std::make_pair(make_shell<S>(p.qw, p.qx_given_w, w, eps, p.budget),
                                             make_shell<S>(p.qw, p.qy_given_w, w, eps, p.budget)))
                 .first;
      const auto& [a, b] = it->second;
      for (std::size_t i = 0; i < a.idx.size(); ++i) {
        const std::uint64_t x = a.idx[i];
        den[x] += a.p[i];
        for (std::size_t j = 0; j < b.idx.size(); ++j) num[x * c.y_atoms + b.idx[j]] += a.p[i] * b.p[j];
      }
    }
    for (std::uint64_t x = 0; x < c.x_atoms; ++x) {
      if (den[x] == S(0)) continue;
      ++covered[x];
      const S scale = inv_keys / den[x];
      for (std::uint64_t y = 0; y < c.y_atoms; ++y)
        if (num[x * c.y_atoms + y] != S(0)) c(x, y) += scale * num[x * c.y_atoms + y];
    }
  }
  for (std::uint64_t x = 0; x < c.x_atoms; ++x) {
    c.defined[x] = covered[x] == cb.keys() ? 1 : 0;
    if (!c.defined[x])
      for (std::uint64_t y = 0; y < c.y_atoms; ++y) c(x, y) = S(0);
  }
  return c;
}

template <typename S>
BasicSynthesizedChannel<S> target(const JointPmf& pi, int n, double eps, std::uint64_t budget) {
  auto c = empty_like<S>(n, pi.rows(), pi.cols(), eps, budget);
  c.typical = source_mask(pi, n, eps, budget);
  const Index kx = pi.rows(), ky = pi.cols();
  std::vector<S> cond(static_cast<std::size_t>(kx * ky));
  for (Index x = 0; x < kx; ++x) {
    S row(0);
    for (Index y = 0; y < ky; ++y) row += from_double<S>(pi(x, y));
    for (Index y = 0; y < ky; ++y)
      cond[static_cast<std::size_t>(x * ky + y)] =
          row == S(0) ? S(1) / S(static_cast<long long>(ky)) : from_double<S>(pi(x, y)) / row;
  }
  for (std::uint64_t x = 0; x < c.x_atoms; ++x) {
    c.defined[x] = 1;
    const std::vector<int> xs = decode_sequence(x, kx, n);
    for (std::uint64_t y = 0; y < c.y_atoms; ++y) {
      const std::vector<int> ys = decode_sequence(y, ky, n);
      S v(1);
      for (int i = 0; i < n && v != S(0); ++i)
        v *= cond[static_cast<std::size_t>(xs[static_cast<std::size_t>(i)] * ky + ys[static_cast<std::size_t>(i)])];
      c(x, y) = v;
    }
  }
  return c;
}

template <typename S>
void check_layout(const BasicSynthesizedChannel<S>& a, const BasicSynthesizedChannel<S>& b) {
  if (a.n != b.n || a.x_atoms != b.x_atoms || a.y_atoms != b.y_atoms || a.typical != b.typical)
    throw DomainError("channels differ in blocklength, alphabets or typical set");
}

std::string witness(std::uint64_t x, std::uint64_t y) {
  std::ostringstream os;
  os << "x^n index " << x << ", y^n index " << y;
  return os.str();
}

}  // namespace

SynthesizedChannel synthesized_channel(const Codebook& cb, const CodebookParams& p, const JointPmf& pi) {
  return synthesize<double>(cb, p, pi);
}

RationalChannel synthesized_channel_rational(const Codebook& cb, const CodebookParams& p,
                                             const JointPmf& pi) {
  return synthesize<Rational>(cb, p, pi);
}

SynthesizedChannel target_channel(const JointPmf& pi, int n, double eps, std::uint64_t budget) {
  return target<double>(pi, n, eps, budget);
}

RationalChannel target_channel_rational(const JointPmf& pi, int n, double eps, std::uint64_t budget) {
  return target<Rational>(pi, n, eps, budget);
}

double channel_deficit(const SynthesizedChannel& p, const SynthesizedChannel& t) {
  check_layout(p, t);
  double best = -kInf;
  for (std::uint64_t x = 0; x < p.x_atoms; ++x) {
    if (!p.typical[x]) continue;
    if (!p.defined[x]) return kInf;
    for (std::uint64_t y = 0; y < p.y_atoms; ++y) {
      const double v = p(x, y);
      if (v <= 0.0) continue;
      if (t(x, y) <= 0.0) return kInf;
      best = std::max(best, std::log(v / t(x, y)));
    }
  }
  return best;
}

namespace {
// Smallest target/P over typical rows, exactly; zero when undefined.
Rational min_ratio(const RationalChannel& p, const RationalChannel& t) {
  check_layout(p, t);
  bool any = false;
  Rational best(0);
  for (std::uint64_t x = 0; x < p.x_atoms; ++x) {
    if (!p.typical[x]) continue;
    if (!p.defined[x]) return Rational(0);
    for (std::uint64_t y = 0; y < p.y_atoms; ++y) {
      if (p(x, y) == 0) continue;
      const Rational r = t(x, y) / p(x, y);
      if (!any || r < best) best = r;
      any = true;
    }
  }
  return any ? best : Rational(1);
}
}  // namespace

namespace {

// Residual as pi + (pi - P) * odds with odds = lambda / (1 - lambda); this form
// keeps P = pi exact when lambda is close to 1.
template <typename S>
BasicSynthesizedChannel<S> residual_impl(const BasicSynthesizedChannel<S>& p, const BasicSynthesizedChannel<S>& t,
                                         const S& lambda, const S& odds) {
  check_layout(p, t);
  BasicSynthesizedChannel<S> r = p;
  std::fill(r.rows.begin(), r.rows.end(), S(0));
  std::fill(r.defined.begin(), r.defined.end(), 0);
  const bool same = lambda == S(1);
  for (std::uint64_t x = 0; x < p.x_atoms; ++x) {
    if (!p.typical[x]) continue;
    if (!p.defined[x]) throw PreconditionViolated("mixture_residual: typical row undefined, " + witness(x, 0));
    r.defined[x] = 1;
    for (std::uint64_t y = 0; y < p.y_atoms; ++y) {
      const S lp = lambda * p(x, y);
      if constexpr (std::is_same_v<S, double>) {
        if (lp > t(x, y) * (1.0 + 1e-12))
          throw PreconditionViolated("mixture_residual: P exceeds e^delta pi at " + witness(x, y));
      } else {
        if (lp > t(x, y)) throw PreconditionViolated("mixture_residual: P exceeds e^delta pi at " + witness(x, y));
      }
      if (same) {
        r(x, y) = t(x, y);
        continue;
      }
      S v = t(x, y) + (t(x, y) - p(x, y)) * odds;
      if (v < S(0)) v = S(0);
      r(x, y) = v;
    }
  }
  return r;
}

}  // namespace

template <typename S>
BasicSynthesizedChannel<S> mixture_residual(const BasicSynthesizedChannel<S>& p,
                                            const BasicSynthesizedChannel<S>& t, const S& lambda) {
  if (!(lambda > S(0)) || lambda > S(1)) throw DomainError("mixture_residual: lambda must lie in (0, 1]");
  return residual_impl(p, t, lambda, lambda == S(1) ? S(0) : S(lambda / (S(1) - lambda)));
}

template <typename S>
BasicSynthesizedChannel<S> compose_exact(const BasicSynthesizedChannel<S>& p,
                                         const BasicSynthesizedChannel<S>& residual,
                                         const BasicSynthesizedChannel<S>& t, const S& lambda) {
  check_layout(p, t);
  check_layout(residual, t);
  BasicSynthesizedChannel<S> c = t;
  for (std::uint64_t x = 0; x < p.x_atoms; ++x) {
    if (!p.typical[x]) continue;
    if (!p.defined[x] || !residual.defined[x])
      throw PreconditionViolated("compose_exact: typical row undefined, " + witness(x, 0));
    for (std::uint64_t y = 0; y < p.y_atoms; ++y) c(x, y) = lambda * p(x, y) + (S(1) - lambda) * residual(x, y);
  }
  return c;
}

template SynthesizedChannel mixture_residual(const SynthesizedChannel&, const SynthesizedChannel&, const double&);
template RationalChannel mixture_residual(const RationalChannel&, const RationalChannel&, const Rational&);
template SynthesizedChannel compose_exact(const SynthesizedChannel&, const SynthesizedChannel&,
                                          const SynthesizedChannel&, const double&);
template RationalChannel compose_exact(const RationalChannel&, const RationalChannel&, const RationalChannel&,
                                       const Rational&);

SynthesizedChannel mixture_decompose(const SynthesizedChannel& p, const SynthesizedChannel& t, double delta) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw DomainError("mixture_decompose: delta must be finite and >= 0");
  if (delta == 0.0) return mixture_residual(p, t, 1.0);
  return residual_impl(p, t, std::exp(-delta), 1.0 / std::expm1(delta));
}

double max_abs_error(const SynthesizedChannel& a, const SynthesizedChannel& b) {
  check_layout(a, b);
  double e = 0.0;
  for (std::size_t i = 0; i < a.rows.size(); ++i) e = std::max(e, std::abs(a.rows[i] - b.rows[i]));
  return e;
}

bool identical(const RationalChannel& a, const RationalChannel& b) {
  check_layout(a, b);
  return a.rows == b.rows;
}

std::vector<int> huffman_code(const std::vector<double>& mass) {
  std::vector<int> len(mass.size(), 0);
  struct Node {
    double mass;
    std::size_t min_symbol;
    std::size_t created;
    std::size_t id;
  };
  auto later = [](const Node& a, const Node& b) {
    return std::tie(a.mass, a.min_symbol, a.created) > std::tie(b.mass, b.min_symbol, b.created);
  };
  std::priority_queue<Node, std::vector<Node>, decltype(later)> heap(later);
  std::vector<std::size_t> parent;
  std::vector<std::size_t> leaf_of(mass.size(), SIZE_MAX);
  for (std::size_t s = 0; s < mass.size(); ++s) {
    if (!(mass[s] >= 0.0) || !std::isfinite(mass[s])) throw DomainError("huffman_code: masses must be finite and >= 0");
    if (mass[s] == 0.0) continue;
    leaf_of[s] = parent.size();
    heap.push({mass[s], s, parent.size(), parent.size()});
    parent.push_back(SIZE_MAX);
  }
  if (heap.empty()) throw DomainError("huffman_code: empty support");
  while (heap.size() > 1) {
    const Node a = heap.top();
    heap.pop();
    const Node b = heap.top();
    heap.pop();
    const std::size_t id = parent.size();
    parent.push_back(SIZE_MAX);
    parent[a.id] = id;
    parent[b.id] = id;
    heap.push({a.mass + b.mass, std::min(a.min_symbol, b.min_symbol), id, id});
  }
  for (std::size_t s = 0; s < mass.size(); ++s) {
    if (leaf_of[s] == SIZE_MAX) continue;
    int depth = 0;
    for (std::size_t v = leaf_of[s]; parent[v] != SIZE_MAX; v = parent[v]) ++depth;
    len[s] = depth;
  }
  return len;
}

std::vector<int> huffman_code(const Pmf& p) {
  return huffman_code(std::vector<double>(p.mass().data(), p.mass().data() + p.size()));
}

ConditionalHuffman conditional_huffman_rate(const Eigen::MatrixXd& joint) {
  if (joint.size() == 0 || (joint.array() < 0.0).any() || !joint.allFinite())
    throw DomainError("conditional_huffman_rate: joint must be finite, nonnegative and nonempty");
  const double total = joint.sum();
  if (std::abs(total - 1.0) > kRenormTol) throw DomainError("conditional_huffman_rate: joint does not sum to 1");
  ConditionalHuffman out;
  for (Index k = 0; k < joint.cols(); ++k) {
    const double pk = joint.col(k).sum();
    if (pk <= 0.0) continue;
    const Eigen::VectorXd cond = joint.col(k) / pk;
    const std::vector<int> len = huffman_code(std::vector<double>(cond.data(), cond.data() + cond.size()));
    double lk = 0.0, hk = 0.0;
    for (Index w = 0; w < cond.size(); ++w) {
      if (cond(w) <= 0.0) continue;
      lk += cond(w) * len[static_cast<std::size_t>(w)];
      hk -= cond(w) * std::log2(cond(w));
    }
    out.length_bits += pk / total * lk;
    out.entropy_bits += pk / total * hk;
    out.max_key_length_bits = std::max(out.max_key_length_bits, lk);
  }
  out.sandwich = out.entropy_bits <= out.length_bits + 1e-12 && out.length_bits < out.entropy_bits + 1.0;
  return out;
}

RateBreakdown rate_breakdown(const RateComponents& c) {
  if (c.n < 1 || c.y_alphabet < 1 || !(c.delta >= 0.0) || !(c.pi_typical >= 0.0 && c.pi_typical <= 1.0))
    throw DomainError("rate_breakdown: invalid components");
  const double keep = std::exp(-c.delta);
  const double logy = std::log(static_cast<double>(c.y_alphabet));
  RateBreakdown b;
  b.flag = c.pi_typical / c.n;
  b.code = c.pi_typical * keep * c.r;
  b.fallback = c.pi_typical * (1.0 - keep) * logy + (1.0 - c.pi_typical) * logy;
  b.total = b.flag + b.code + b.fallback;
  return b;
}

double expected_rate(const RateComponents& c) { return rate_breakdown(c).total; }

CodebookParams demo_params(const JointPmf& pi, const DemoOptions& o) {
  CodebookParams p;
  switch (o.decomposition) {
    case DemoDecomposition::WEqualsX:
      p.qw = pi.row_marginal();
      p.qx_given_w = Channel::identity(pi.rows());
      p.qy_given_w = Channel::conditional_of(pi);
      break;
    case DemoDecomposition::WEqualsY:
      p.qw = pi.col_marginal();
      p.qx_given_w = Channel::conditional_of(JointPmf(pi.mass().transpose()));
      p.qy_given_w = Channel::identity(pi.cols());
      break;
    case DemoDecomposition::Given:
      require_induces(o.given, pi);
      p.qw = o.given.pw;
      p.qx_given_w = o.given.px_given_w;
      p.qy_given_w = o.given.py_given_w;
      break;
  }
  p.n = o.n;
  p.r = o.r;
  p.r0 = o.r0;
  p.eps = o.eps;
  p.seed = o.seed;
  return p;
}

namespace {

// P(m, k) under the source pi_X^n restricted to T_eps and the likelihood encoder.
Eigen::MatrixXd message_key_joint(const Codebook& cb, const CodebookParams& p, const SequenceDist& src) {
  const double eps = effective_eps(p);
  std::map<std::vector<int>, Shell<double>> cache;
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(static_cast<Index>(cb.messages()), static_cast<Index>(cb.keys()));
  std::vector<double> den(static_cast<std::size_t>(src.atoms()));
  for (std::uint64_t k = 0; k < cb.keys(); ++k) {
    std::fill(den.begin(), den.end(), 0.0);
    std::vector<const Shell<double>*> shells;
    for (std::uint64_t m = 0; m < cb.messages(); ++m) {
      const std::vector<int> w(cb.codeword(m, k).begin(), cb.codeword(m, k).end());
      auto it = cache.find(w);
      if (it == cache.end()) it = cache.emplace(w, make_shell<double>(p.qw, p.qx_given_w, w, eps, p.budget)).first;
      shells.push_back(&it->second);
      for (std::size_t i = 0; i < it->second.idx.size(); ++i) den[it->second.idx[i]] += it->second.p[i];
    }
    for (std::uint64_t m = 0; m < cb.messages(); ++m) {
      const auto& a = *shells[m];
      double v = 0.0;
      for (std::size_t i = 0; i < a.idx.size(); ++i)
        if (src(a.idx[i]) > 0.0) v += src(a.idx[i]) * a.p[i] / den[a.idx[i]];
      joint(static_cast<Index>(m), static_cast<Index>(k)) = v / static_cast<double>(cb.keys());
    }
  }
  return joint;
}

}  // namespace

DemoReport end_to_end_demo(const JointPmf& pi, const DemoOptions& o) {
  if (o.rational && o.n > 6) throw DomainError("end_to_end_demo: rational mode needs n <= 6");
  const CodebookParams p = demo_params(pi, o);
  DemoReport rep;
  rep.n = o.n;
  rep.eps = effective_eps(p);
  rep.r0 = o.r0;
  rep.r = o.r;
  rep.rational = o.rational;
  rep.messages = message_count(p);
  rep.keys = key_count(p);
  rep.shared_rate = std::log(static_cast<double>(rep.keys)) / o.n;
  const SequenceDist src = truncate_to_typical(pi.row_marginal(), o.n, rep.eps, p.budget);
  {
    const SequenceDist full = product_power(pi.row_marginal(), o.n, p.budget);
    const std::vector<char> mask = typical_mask(pi.row_marginal(), o.n, rep.eps, p.budget);
    for (Index i = 0; i < full.atoms(); ++i)
      if (mask[static_cast<std::size_t>(i)]) rep.pi_typical += full.mass()(i);
  }

  Codebook cb;
  try {
    cb = sample_codebook(p);
  } catch (const EmptyTypicalSet& e) {
    rep.diagnostic = std::string("codebook: ") + e.what();
    return rep;
  }
  const SynthesizedChannel approx = synthesized_channel(cb, p, pi);
  const SynthesizedChannel tgt = target_channel(pi, o.n, rep.eps, p.budget);
  rep.deficit = channel_deficit(approx, tgt);
  if (!std::isfinite(rep.deficit)) {
    std::uint64_t missing = 0;
    for (std::uint64_t x = 0; x < approx.x_atoms; ++x) missing += approx.typical[x] && !approx.defined[x];
    rep.diagnostic = "infinite deficit: " + std::to_string(missing) +
                     " typical source strings are not encodable under every key";
    return rep;
  }
  rep.finite = true;
  rep.delta = rep.deficit + 1e-12;
  rep.fallback_probability = -std::expm1(-rep.delta);
  const SynthesizedChannel residual = mixture_decompose(approx, tgt, rep.delta);
  const SynthesizedChannel composite = compose_exact(approx, residual, tgt, std::exp(-rep.delta));
  rep.exactness_max_abs_error = max_abs_error(composite, tgt);

  if (o.rational) {
    const RationalChannel ra = synthesized_channel_rational(cb, p, pi);
    const RationalChannel rt = target_channel_rational(pi, o.n, rep.eps, p.budget);
    const Rational lambda = min_ratio(ra, rt);
    const RationalChannel rr = mixture_residual(ra, rt, lambda);
    rep.rational_exact = identical(compose_exact(ra, rr, rt, lambda), rt);
  }

  rep.huffman = conditional_huffman_rate(message_key_joint(cb, p, src));
  rep.measured_rate = rep.huffman.length_bits * std::log(2.0) / o.n;
  rep.rates = rate_breakdown({o.n, rep.delta, rep.measured_rate, rep.pi_typical, pi.cols()});
  return rep;
}

}  // namespace synth
