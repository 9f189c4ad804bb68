#include "synth/codebook.hpp"

#include <boost/math/distributions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "synth/parallel.hpp"
#include "synth/rng.hpp"

namespace synth {

namespace {

constexpr int kMaxShellAttempts = 100;
constexpr std::uint64_t kMaxCodewords = 20'000'000;

// All k^n strings as rows of digits, position 0 most significant.
std::vector<std::uint8_t> digit_table(Index k, int n, std::uint64_t total) {
  std::vector<std::uint8_t> t(total * static_cast<std::uint64_t>(n), 0);
  std::vector<std::uint8_t> d(static_cast<std::size_t>(n), 0);
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    std::copy(d.begin(), d.end(), t.begin() + static_cast<std::ptrdiff_t>(idx * n));
    for (int pos = n - 1; pos >= 0; --pos) {
      if (++d[static_cast<std::size_t>(pos)] < k) break;
      d[static_cast<std::size_t>(pos)] = 0;
    }
  }
  return t;
}

struct Sparse {
  std::vector<std::uint32_t> idx;
  std::vector<double> p;
  bool empty() const { return idx.empty(); }
};

// Conditional shell of one channel given w^n, over the digit table of the
// output alphabet.
class ShellBuilder {
 public:
  ShellBuilder(const Pmf& qw, const Channel& q, int n, double eps4, std::uint64_t budget)
      : kw_(qw.size()), ko_(q.outputs()), n_(n), q_(q.matrix()) {
    if (q.inputs() != kw_) throw DomainError("codebook: channel input size differs from |W|");
    total_ = checked_power(ko_, n, budget);
    digits_ = digit_table(ko_, n, total_);
    for (Index w = 0; w < kw_; ++w)
      for (Index o = 0; o < ko_; ++o) bounds_.push_back(typical_count_bounds(qw(w) * q(w, o), n, eps4));
  }

  std::uint64_t total() const { return total_; }
  const std::uint8_t* digits(std::uint64_t idx) const { return digits_.data() + idx * n_; }

  Sparse build(std::span<const int> w) const {
    Sparse s;
    std::vector<long> counts(static_cast<std::size_t>(kw_ * ko_));
    double mass = 0.0;
    for (std::uint64_t idx = 0; idx < total_; ++idx) {
      const std::uint8_t* d = digits(idx);
      std::fill(counts.begin(), counts.end(), 0);
      double prob = 1.0;
      for (int i = 0; i < n_; ++i) {
        ++counts[static_cast<std::size_t>(w[i] * ko_ + d[i])];
        prob *= q_(w[i], d[i]);
      }
      if (prob <= 0.0) continue;
      bool ok = true;
      for (std::size_t c = 0; c < counts.size() && ok; ++c)
        ok = counts[c] >= bounds_[c].lo && counts[c] <= bounds_[c].hi;
      if (!ok) continue;
      s.idx.push_back(static_cast<std::uint32_t>(idx));
      s.p.push_back(prob);
      mass += prob;
    }
    for (double& v : s.p) v /= mass;
    return s;
  }

 private:
  Index kw_, ko_;
  int n_;
  Eigen::MatrixXd q_;
  std::uint64_t total_ = 0;
  std::vector<std::uint8_t> digits_;
  std::vector<CountBounds> bounds_;
};

void check_params(const CodebookParams& p) {
  if (p.n < 1) throw DomainError("codebook: n must be >= 1");
  if (!(p.r >= 0.0) || !(p.r0 >= 0.0) || !std::isfinite(p.r) || !std::isfinite(p.r0))
    throw DomainError("codebook: rates must be finite and >= 0");
  if (p.qx_given_w.inputs() != p.qw.size() || p.qy_given_w.inputs() != p.qw.size())
    throw DomainError("codebook: channel input size differs from |W|");
  if (p.qx_given_w.outputs() > 255 || p.qy_given_w.outputs() > 255 || p.qw.size() > 255)
    throw DomainError("codebook: alphabets above 255 symbols are not supported");
}

// Everything about a parameter set that does not depend on the seed.
struct Model {
  int n = 0;
  double eps = 0.0;
  Index kw = 0;
  std::uint64_t nw = 0;
  std::vector<std::uint64_t> w_index;  // typical w^n
  std::vector<double> cdf;
  std::vector<Sparse> shell_x, shell_y;
  std::vector<int> pos_of;  // w index -> position in w_index, or -1
  ShellBuilder bx, by;

  Model(const CodebookParams& p, int threads)
      : n(p.n), eps(effective_eps(p)), kw(p.qw.size()),
        bx(p.qw, p.qx_given_w, p.n, 4.0 * effective_eps(p), p.budget),
        by(p.qw, p.qy_given_w, p.n, 4.0 * effective_eps(p), p.budget) {
    nw = checked_power(kw, n, p.budget);
    const std::vector<char> mask = typical_mask(p.qw, n, 2.0 * eps, p.budget);
    pos_of.assign(nw, -1);
    double acc = 0.0;
    for (std::uint64_t idx = 0; idx < nw; ++idx) {
      if (!mask[idx]) continue;
      const std::vector<int> w = decode_sequence(idx, kw, n);
      double prob = 1.0;
      for (int s : w) prob *= p.qw(s);
      if (prob <= 0.0) continue;
      pos_of[idx] = static_cast<int>(w_index.size());
      w_index.push_back(idx);
      acc += prob;
      cdf.push_back(acc);
    }
    if (w_index.empty()) throw EmptyTypicalSet("codebook: T_2eps(Q_W) is empty");
    for (double& c : cdf) c /= acc;
    shell_x.resize(w_index.size());
    shell_y.resize(w_index.size());
    parallel_for(static_cast<int>(w_index.size()), threads, [&](int i) {
      const std::vector<int> w = decode_sequence(w_index[static_cast<std::size_t>(i)], kw, n);
      shell_x[static_cast<std::size_t>(i)] = bx.build(w);
      shell_y[static_cast<std::size_t>(i)] = by.build(w);
    });
  }

  // Typical-set position of the codeword for (m, k).
  int draw(std::uint64_t seed, std::uint64_t m, std::uint64_t k) const {
    for (int attempt = 0; attempt < kMaxShellAttempts; ++attempt) {
      const double u = to_unit(counter_hash(seed, {m, k, static_cast<std::uint64_t>(attempt)}));
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const auto pos = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
      if (!shell_x[pos].empty() && !shell_y[pos].empty()) return static_cast<int>(pos);
    }
    throw EmptyTypicalSet("codebook: conditional shell empty after " +
                          std::to_string(kMaxShellAttempts) + " draws");
  }

  Codebook sample(const CodebookParams& p, std::uint64_t seed) const {
    const std::uint64_t mcount = message_count(p), kcount = key_count(p);
    if (mcount > kMaxCodewords / kcount) throw BudgetExceeded("codebook: too many codewords");
    std::vector<int> symbols(mcount * kcount * static_cast<std::uint64_t>(n));
    for (std::uint64_t k = 0; k < kcount; ++k)
      for (std::uint64_t m = 0; m < mcount; ++m) {
        const int pos = draw(seed, m, k);
        const std::vector<int> w = decode_sequence(w_index[static_cast<std::size_t>(pos)], kw, n);
        std::copy(w.begin(), w.end(), symbols.begin() + static_cast<std::ptrdiff_t>((k * mcount + m) * n));
      }
    return Codebook(n, mcount, kcount, std::move(symbols));
  }

  int position(std::span<const int> w) const {
    const int pos = pos_of[encode_sequence(w, kw)];
    if (pos < 0) throw DomainError("codebook: codeword outside T_2eps(Q_W)");
    if (shell_x[static_cast<std::size_t>(pos)].empty() || shell_y[static_cast<std::size_t>(pos)].empty())
      throw EmptyTypicalSet("codebook: codeword with an empty conditional shell");
    return pos;
  }

  // Codeword multiplicities by typical-set position.
  std::vector<double> weights(const Codebook& cb) const {
    if (cb.length() != n) throw DomainError("codebook: blocklength mismatch");
    std::vector<double> wt(w_index.size(), 0.0);
    const double inv = 1.0 / static_cast<double>(cb.size());
    for (std::uint64_t s = 0; s < cb.size(); ++s) wt[static_cast<std::size_t>(position(cb.slot(s)))] += inv;
    return wt;
  }

  struct Entry {
    std::uint32_t pos;
    double coef;
  };

  // For every x^n, the codewords whose X shell contains it, in position order.
  std::vector<std::vector<Entry>> by_x(const std::vector<double>& wt) const {
    std::vector<std::vector<Entry>> rows(bx.total());
    for (std::size_t pos = 0; pos < wt.size(); ++pos) {
      if (wt[pos] == 0.0) continue;
      const Sparse& a = shell_x[pos];
      for (std::size_t j = 0; j < a.idx.size(); ++j)
        rows[a.idx[j]].push_back({static_cast<std::uint32_t>(pos), wt[pos] * a.p[j]});
    }
    return rows;
  }
};

}  // namespace

double default_eps(int n) { return n <= 10 ? 0.2 : 0.1; }

double effective_eps(const CodebookParams& p) { return p.eps < 0.0 ? default_eps(p.n) : p.eps; }

namespace {
std::uint64_t ceil_exp(double x) {
  const double v = std::exp(x);
  if (!(v < 1e15)) throw BudgetExceeded("codebook: e^{nR} too large");
  // Tolerates rounding when e^{nR} is meant to be an integer.
  return static_cast<std::uint64_t>(std::max(1.0, std::ceil(v * (1.0 - 1e-12))));
}
}  // namespace

std::uint64_t message_count(const CodebookParams& p) { return ceil_exp(p.n * p.r); }
std::uint64_t key_count(const CodebookParams& p) { return ceil_exp(p.n * p.r0); }

JointPmf covered_joint(const CodebookParams& p) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p.qx_given_w.outputs(), p.qy_given_w.outputs());
  for (Index w = 0; w < p.qw.size(); ++w)
    m += p.qw(w) * p.qx_given_w.matrix().row(w).transpose() * p.qy_given_w.matrix().row(w);
  return JointPmf(m);
}

Codebook::Codebook(int n, std::uint64_t messages, std::uint64_t keys, std::vector<int> symbols)
    : n_(n), messages_(messages), keys_(keys), symbols_(std::move(symbols)) {
  if (symbols_.size() != messages_ * keys_ * static_cast<std::uint64_t>(n_))
    throw DomainError("Codebook: symbol count does not match dimensions");
}

std::span<const int> Codebook::codeword(std::uint64_t m, std::uint64_t k) const {
  if (m >= messages_ || k >= keys_) throw DomainError("Codebook: index out of range");
  return slot(k * messages_ + m);
}

std::span<const int> Codebook::slot(std::uint64_t s) const {
  return {symbols_.data() + s * static_cast<std::uint64_t>(n_), static_cast<std::size_t>(n_)};
}

SequenceDist truncated_conditional(const Pmf& qw, const Channel& q, std::span<const int> w_seq,
                                   double eps, std::uint64_t budget) {
  if (!(eps >= 0.0)) throw DomainError("truncated_conditional: eps must be >= 0");
  const int n = static_cast<int>(w_seq.size());
  if (n < 1) throw DomainError("truncated_conditional: empty w sequence");
  for (int s : w_seq)
    if (s < 0 || s >= qw.size()) throw DomainError("truncated_conditional: symbol out of range");
  const ShellBuilder b(qw, q, n, 4.0 * eps, budget);
  const Sparse s = b.build(w_seq);
  if (s.empty()) throw EmptyTypicalSet("truncated_conditional: conditional shell is empty");
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(static_cast<Index>(b.total()));
  for (std::size_t j = 0; j < s.idx.size(); ++j) mass(s.idx[j]) = s.p[j];
  return SequenceDist(n, q.outputs(), std::move(mass));
}

Codebook sample_codebook(const CodebookParams& p) {
  check_params(p);
  return Model(p, 1).sample(p, p.seed);
}

JointPmf induced_joint_output(const Codebook& cb, const CodebookParams& p, std::uint64_t budget) {
  check_params(p);
  const std::uint64_t nx = checked_power(p.qx_given_w.outputs(), p.n, p.budget);
  const std::uint64_t ny = checked_power(p.qy_given_w.outputs(), p.n, p.budget);
  if (nx > budget / ny) throw BudgetExceeded("induced_joint_output: |X|^n |Y|^n over budget");
  const Model model(p, 1);
  const std::vector<double> wt = model.weights(cb);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Index>(nx), static_cast<Index>(ny));
  for (std::size_t pos = 0; pos < wt.size(); ++pos) {
    if (wt[pos] == 0.0) continue;
    const Sparse& a = model.shell_x[pos];
    const Sparse& b = model.shell_y[pos];
    for (std::size_t i = 0; i < a.idx.size(); ++i)
      for (std::size_t j = 0; j < b.idx.size(); ++j) out(a.idx[i], b.idx[j]) += wt[pos] * a.p[i] * b.p[j];
  }
  return JointPmf(std::move(out));
}

namespace {

double distributed_deficit(const Model& model, const Codebook& cb, const JointPmf& target, int threads) {
  const std::vector<double> wt = model.weights(cb);
  const auto rows = model.by_x(wt);
  const int n = model.n;
  const Eigen::MatrixXd log_pi = target.mass().array().log().matrix();
  const std::uint64_t ny = model.by.total();

  constexpr int kChunk = 64;
  const int chunks = static_cast<int>((rows.size() + kChunk - 1) / kChunk);
  std::vector<double> best(static_cast<std::size_t>(chunks), -kInf);
  parallel_for(chunks, threads, [&](int c) {
    std::vector<double> acc(ny, 0.0);
    std::vector<std::uint32_t> touched;
    double local = -kInf;
    const std::size_t end = std::min(rows.size(), static_cast<std::size_t>(c + 1) * kChunk);
    for (std::size_t x = static_cast<std::size_t>(c) * kChunk; x < end; ++x) {
      if (rows[x].empty()) continue;
      for (const auto& e : rows[x]) {
        const Sparse& b = model.shell_y[e.pos];
        for (std::size_t j = 0; j < b.idx.size(); ++j) {
          double& slot = acc[b.idx[j]];
          if (slot == 0.0) touched.push_back(b.idx[j]);
          slot += e.coef * b.p[j];
        }
      }
      const std::uint8_t* dx = model.bx.digits(x);
      for (std::uint32_t y : touched) {
        const std::uint8_t* dy = model.by.digits(y);
        double lt = 0.0;
        for (int i = 0; i < n; ++i) lt += log_pi(dx[i], dy[i]);
        local = std::max(local, std::log(acc[y]) - lt);
        acc[y] = 0.0;
      }
      touched.clear();
    }
    best[static_cast<std::size_t>(c)] = local;
  });
  return *std::max_element(best.begin(), best.end());
}

CentralizedDeficits centralized(const Model& model, const Codebook& cb, const Pmf& qx, double eps,
                                std::uint64_t budget) {
  if (cb.length() != model.n) throw DomainError("codebook: blocklength mismatch");
  const std::uint64_t nx = model.bx.total();
  const SequenceDist prod = product_power(qx, model.n, budget);
  if (static_cast<std::uint64_t>(prod.atoms()) != nx) throw DomainError("centralized_deficits: |X| mismatch");
  const SequenceDist trunc = truncate_to_typical(qx, model.n, eps, budget);
  CentralizedDeficits out{-kInf, -kInf};
  Eigen::VectorXd q(static_cast<Index>(nx));
  const double inv = 1.0 / static_cast<double>(cb.messages());
  for (std::uint64_t k = 0; k < cb.keys(); ++k) {
    q.setZero();
    for (std::uint64_t m = 0; m < cb.messages(); ++m) {
      const Sparse& a = model.shell_x[static_cast<std::size_t>(model.position(cb.codeword(m, k)))];
      for (std::size_t j = 0; j < a.idx.size(); ++j) q(a.idx[j]) += inv * a.p[j];
    }
    out.forward = std::max(out.forward, renyi_inf_of(q, prod.mass()));
    out.reverse = std::max(out.reverse, renyi_inf_of(trunc.mass(), q));
  }
  return out;
}

}  // namespace

double covering_deficit(const Codebook& cb, const CodebookParams& p, const JointPmf& target, int threads) {
  check_params(p);
  if (target.rows() != p.qx_given_w.outputs() || target.cols() != p.qy_given_w.outputs())
    throw DomainError("covering_deficit: target shape differs from the output alphabets");
  return distributed_deficit(Model(p, threads), cb, target, threads);
}

CentralizedDeficits centralized_deficits(const Codebook& cb, const CodebookParams& p, const Pmf& qx,
                                         double eps) {
  check_params(p);
  if (qx.size() != p.qx_given_w.outputs()) throw DomainError("centralized_deficits: |X| mismatch");
  return centralized(Model(p, 1), cb, qx, eps, p.budget);
}

CoveringReport covering_experiment(const CodebookParams& p, int trials, double threshold,
                                   DeficitKind kind, int threads) {
  check_params(p);
  if (trials < 1) throw DomainError("covering_experiment: trials must be >= 1");
  if (std::isnan(threshold)) throw DomainError("covering_experiment: threshold is NaN");
  const Model model(p, threads);
  const JointPmf target = covered_joint(p);
  const Pmf qx = target.row_marginal();

  CoveringReport rep;
  rep.n = p.n;
  rep.r = p.r;
  rep.r0 = p.r0;
  rep.eps = model.eps;
  rep.trials = trials;
  rep.threshold = threshold;
  rep.kind = kind;
  rep.deficits.assign(static_cast<std::size_t>(trials), 0.0);
  parallel_for(trials, threads, [&](int t) {
    const Codebook cb = model.sample(p, counter_hash(p.seed, {static_cast<std::uint64_t>(t)}));
    double d = 0.0;
    if (kind == DeficitKind::Distributed) {
      d = distributed_deficit(model, cb, target, 1);
    } else {
      const CentralizedDeficits c = centralized(model, cb, qx, model.eps, p.budget);
      d = kind == DeficitKind::Forward ? c.forward : c.reverse;
    }
    rep.deficits[static_cast<std::size_t>(t)] = d;
  });
  for (double d : rep.deficits)
    if (d < threshold || threshold == kInf) ++rep.below;
  rep.fraction_below = static_cast<double>(rep.below) / trials;
  using boost::math::beta_distribution;
  using boost::math::quantile;
  rep.ci_lo = rep.below == 0 ? 0.0 : quantile(beta_distribution<>(rep.below, trials - rep.below + 1), 0.025);
  rep.ci_hi = rep.below == trials ? 1.0 : quantile(beta_distribution<>(rep.below + 1, trials - rep.below), 0.975);
  return rep;
}

}  // namespace synth
