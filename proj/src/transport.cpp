#include "synth/transport.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace synth {

namespace {

constexpr double kFlowTieTol = 1e-12;
constexpr int kMaxPivots = 100000;

// Flow with a symbolic perturbation coefficient: value + eps * e.
struct LexFlow {
  double value = 0.0;
  double e = 0.0;
};

bool lex_less(const LexFlow& a, const LexFlow& b) {
  if (std::abs(a.value - b.value) > kFlowTieTol) return a.value < b.value;
  return a.e < b.e;
}

// Cost with an infinity count: flag * M + finite for a symbolic M.
struct LexCost {
  double flag = 0.0;
  double fin = 0.0;
};

std::vector<Index> support_of(const Pmf& p) {
  std::vector<Index> s;
  for (Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) s.push_back(i);
  return s;
}

class Simplex {
 public:
  Simplex(Eigen::VectorXd a, Eigen::VectorXd b, Eigen::MatrixXd flag, Eigen::MatrixXd fin)
      : m_(a.size()), n_(b.size()), a_(std::move(a)), b_(std::move(b)),
        flag_(std::move(flag)), fin_(std::move(fin)) {
    tol_ = 1e-12 * (1.0 + fin_.cwiseAbs().maxCoeff());
    basic_.assign(static_cast<std::size_t>(m_ * n_), 0);
    flow_.assign(static_cast<std::size_t>(m_ * n_), LexFlow{});
    northwest_corner();
  }

  void run() {
    for (pivots_ = 0; pivots_ < kMaxPivots; ++pivots_) {
      compute_potentials();
      const Index enter = entering_cell();
      if (enter < 0) return;
      pivot(enter);
    }
    throw NumericFailure("transport simplex exceeded the pivot limit");
  }

  Index cell(Index i, Index j) const { return i * n_ + j; }
  bool is_basic(Index i, Index j) const { return basic_[static_cast<std::size_t>(cell(i, j))]; }
  double flow(Index i, Index j) const { return flow_[static_cast<std::size_t>(cell(i, j))].value; }
  const std::vector<LexCost>& u() const { return u_; }
  const std::vector<LexCost>& v() const { return v_; }
  int pivots() const { return pivots_; }

  LexCost reduced(Index i, Index j) const {
    const auto si = static_cast<std::size_t>(i);
    const auto sj = static_cast<std::size_t>(j);
    return {flag_(i, j) - u_[si].flag - v_[sj].flag, fin_(i, j) - u_[si].fin - v_[sj].fin};
  }

 private:
  void northwest_corner() {
    std::vector<LexFlow> ra(static_cast<std::size_t>(m_)), rb(static_cast<std::size_t>(n_));
    for (Index i = 0; i < m_; ++i) ra[static_cast<std::size_t>(i)] = {a_(i), 1.0};
    for (Index j = 0; j < n_; ++j) rb[static_cast<std::size_t>(j)] = {b_(j), 0.0};
    rb.back().e = static_cast<double>(m_);
    Index i = 0, j = 0;
    while (true) {
      auto& x = ra[static_cast<std::size_t>(i)];
      auto& y = rb[static_cast<std::size_t>(j)];
      const auto c = static_cast<std::size_t>(cell(i, j));
      basic_[c] = 1;
      if (i == m_ - 1 && j == n_ - 1) {
        flow_[c] = x;
        break;
      }
      if (j == n_ - 1 || (i < m_ - 1 && lex_less(x, y))) {
        flow_[c] = x;
        y.value -= x.value;
        y.e -= x.e;
        ++i;
      } else {
        flow_[c] = y;
        x.value -= y.value;
        x.e -= y.e;
        ++j;
      }
    }
  }

  // Tree adjacency over nodes 0..m-1 (rows) and m..m+n-1 (columns).
  std::vector<std::vector<Index>> adjacency() const {
    std::vector<std::vector<Index>> adj(static_cast<std::size_t>(m_ + n_));
    for (Index i = 0; i < m_; ++i)
      for (Index j = 0; j < n_; ++j)
        if (is_basic(i, j)) {
          adj[static_cast<std::size_t>(i)].push_back(m_ + j);
          adj[static_cast<std::size_t>(m_ + j)].push_back(i);
        }
    return adj;
  }

  void compute_potentials() {
    u_.assign(static_cast<std::size_t>(m_), LexCost{});
    v_.assign(static_cast<std::size_t>(n_), LexCost{});
    const auto adj = adjacency();
    std::vector<char> seen(static_cast<std::size_t>(m_ + n_), 0);
    std::vector<Index> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const Index node = stack.back();
      stack.pop_back();
      for (Index nb : adj[static_cast<std::size_t>(node)]) {
        if (seen[static_cast<std::size_t>(nb)]) continue;
        seen[static_cast<std::size_t>(nb)] = 1;
        if (node < m_) {
          const Index j = nb - m_;
          const auto& ui = u_[static_cast<std::size_t>(node)];
          v_[static_cast<std::size_t>(j)] = {flag_(node, j) - ui.flag, fin_(node, j) - ui.fin};
        } else {
          const Index j = node - m_;
          const auto& vj = v_[static_cast<std::size_t>(j)];
          u_[static_cast<std::size_t>(nb)] = {flag_(nb, j) - vj.flag, fin_(nb, j) - vj.fin};
        }
        stack.push_back(nb);
      }
    }
  }

  // Bland: first improving nonbasic cell in row-major order.
  Index entering_cell() const {
    for (Index i = 0; i < m_; ++i)
      for (Index j = 0; j < n_; ++j) {
        if (is_basic(i, j)) continue;
        const LexCost rc = reduced(i, j);
        if (rc.flag < -0.5 || (std::abs(rc.flag) < 0.5 && rc.fin < -tol_)) return cell(i, j);
      }
    return -1;
  }

  void pivot(Index enter) {
    const Index ei = enter / n_, ej = enter % n_;
    // Path in the basis tree from row ei to column ej.
    const auto adj = adjacency();
    std::vector<Index> parent(static_cast<std::size_t>(m_ + n_), -1);
    std::vector<Index> queue{ei};
    parent[static_cast<std::size_t>(ei)] = ei;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const Index node = queue[q];
      for (Index nb : adj[static_cast<std::size_t>(node)]) {
        if (parent[static_cast<std::size_t>(nb)] >= 0) continue;
        parent[static_cast<std::size_t>(nb)] = node;
        queue.push_back(nb);
      }
    }
    std::vector<Index> minus, plus;
    Index node = m_ + ej;
    bool sign_minus = true;
    while (node != ei) {
      const Index prev = parent[static_cast<std::size_t>(node)];
      const Index c = node < m_ ? cell(node, prev - m_) : cell(prev, node - m_);
      (sign_minus ? minus : plus).push_back(c);
      sign_minus = !sign_minus;
      node = prev;
    }
    Index leave = -1;
    for (Index c : minus) {
      const auto& f = flow_[static_cast<std::size_t>(c)];
      if (leave < 0 || lex_less(f, flow_[static_cast<std::size_t>(leave)]) ||
          (!lex_less(flow_[static_cast<std::size_t>(leave)], f) && c < leave))
        leave = c;
    }
    const LexFlow theta = flow_[static_cast<std::size_t>(leave)];
    for (Index c : minus) {
      auto& f = flow_[static_cast<std::size_t>(c)];
      f.value -= theta.value;
      f.e -= theta.e;
    }
    for (Index c : plus) {
      auto& f = flow_[static_cast<std::size_t>(c)];
      f.value += theta.value;
      f.e += theta.e;
    }
    flow_[static_cast<std::size_t>(enter)] = theta;
    basic_[static_cast<std::size_t>(enter)] = 1;
    basic_[static_cast<std::size_t>(leave)] = 0;
    flow_[static_cast<std::size_t>(leave)] = LexFlow{};
  }

  Index m_, n_;
  Eigen::VectorXd a_, b_;
  Eigen::MatrixXd flag_, fin_;
  double tol_;
  std::vector<char> basic_;
  std::vector<LexFlow> flow_;
  std::vector<LexCost> u_, v_;
  int pivots_ = 0;
};

void check_shapes(const TransportProblem& tp) {
  if (tp.cost.rows() != tp.row.size() || tp.cost.cols() != tp.col.size())
    throw DomainError("transport: cost is " + std::to_string(tp.cost.rows()) + "x" +
                      std::to_string(tp.cost.cols()) + " but marginals have sizes " +
                      std::to_string(tp.row.size()) + " and " + std::to_string(tp.col.size()));
  for (Index i = 0; i < tp.cost.size(); ++i)
    if (std::isnan(tp.cost.data()[i])) throw DomainError("transport: NaN cost");
}

}  // namespace

double coupling_cost(const Eigen::MatrixXd& mass, const Eigen::MatrixXd& cost) {
  double total = 0.0;
  for (Index i = 0; i < mass.rows(); ++i)
    for (Index j = 0; j < mass.cols(); ++j)
      if (mass(i, j) > 0.0) total += mass(i, j) * cost(i, j);
  return total;
}

Coupling solve_transport(const TransportProblem& tp) {
  check_shapes(tp);
  const auto rs = support_of(tp.row);
  const auto cs = support_of(tp.col);
  const Index m = static_cast<Index>(rs.size()), n = static_cast<Index>(cs.size());
  const double sign = tp.sense == Sense::Maximize ? -1.0 : 1.0;

  // Work in minimize sense on the supports; a blocked cell is one whose
  // (sign-adjusted) cost is +inf.
  Eigen::MatrixXd flag(m, n), fin(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      const double c = sign * tp.cost(rs[static_cast<std::size_t>(i)], cs[static_cast<std::size_t>(j)]);
      if (c == -kInf) {
        if (tp.sense == Sense::Minimize)
          throw DomainError("transport: -inf cost in minimize sense");
        Coupling out{JointPmf::product(tp.row, tp.col), kInf, {}};
        return out;
      }
      flag(i, j) = c == kInf ? 1.0 : 0.0;
      fin(i, j) = c == kInf ? 0.0 : c;
    }

  Eigen::VectorXd a(m), b(n);
  for (Index i = 0; i < m; ++i) a(i) = tp.row(rs[static_cast<std::size_t>(i)]);
  for (Index j = 0; j < n; ++j) b(j) = tp.col(cs[static_cast<std::size_t>(j)]);
  Simplex sx(a, b, flag, fin);
  sx.run();

  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(tp.row.size(), tp.col.size());
  TransportCertificate cert;
  cert.u = Eigen::VectorXd::Zero(tp.row.size());
  cert.v = Eigen::VectorXd::Zero(tp.col.size());
  cert.pivots = sx.pivots();
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      const Index gi = rs[static_cast<std::size_t>(i)], gj = cs[static_cast<std::size_t>(j)];
      if (sx.is_basic(i, j)) {
        cert.basis.emplace_back(gi, gj);
        const double f = sx.flow(i, j);
        if (flag(i, j) > 0.5 && f > kFlowTieTol)
          throw Infeasible("transport: every coupling uses an infinite-cost cell");
        mass(gi, gj) = std::max(f, 0.0);
      } else {
        const LexCost rc = sx.reduced(i, j);
        if (rc.flag < -0.5)
          cert.max_violation = kInf;
        else if (std::abs(rc.flag) < 0.5)
          cert.max_violation = std::max(cert.max_violation, -rc.fin);
      }
    }
  for (Index i = 0; i < m; ++i) cert.u(rs[static_cast<std::size_t>(i)]) = sign * sx.u()[static_cast<std::size_t>(i)].fin;
  for (Index j = 0; j < n; ++j) cert.v(cs[static_cast<std::size_t>(j)]) = sign * sx.v()[static_cast<std::size_t>(j)].fin;

  JointPmf joint(mass, tp.row.symbols(), tp.col.symbols());
  const double objective = coupling_cost(joint.mass(), tp.cost);
  return {std::move(joint), objective, std::move(cert)};
}

// ---------------------------------------------------------------------------

namespace {

struct UnionFind {
  explicit UnionFind(Index n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), Index{0});
  }
  Index find(Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  }
  std::vector<Index> parent;
};

class TreeEnumerator {
 public:
  TreeEnumerator(Eigen::VectorXd a, Eigen::VectorXd b) : a_(std::move(a)), b_(std::move(b)) {
    m_ = a_.size();
    n_ = b_.size();
    for (Index i = 0; i < m_; ++i)
      for (Index j = 0; j < n_; ++j) edges_.emplace_back(i, m_ + j);
  }

  template <typename Visit>
  void run(Visit&& visit) {
    state_.assign(edges_.size(), 0);
    recurse(0, 0, visit);
  }

 private:
  // state: 0 undecided, 1 included, 2 excluded.
  template <typename Visit>
  void recurse(std::size_t e, Index chosen, Visit& visit) {
    const Index need = m_ + n_ - 1;
    if (chosen == need) {
      visit(tree_flows());
      return;
    }
    if (e == edges_.size()) return;
    if (static_cast<Index>(edges_.size() - e) < need - chosen) return;
    if (acyclic_with(e)) {
      state_[e] = 1;
      recurse(e + 1, chosen + 1, visit);
    }
    state_[e] = 2;
    if (connected_without_excluded()) recurse(e + 1, chosen, visit);
    state_[e] = 0;
  }

  bool acyclic_with(std::size_t e) const {
    UnionFind uf(m_ + n_);
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      if (state_[k] != 1 && k != e) continue;
      const Index r1 = uf.find(edges_[k].first), r2 = uf.find(edges_[k].second);
      if (r1 == r2) return false;
      uf.parent[static_cast<std::size_t>(r1)] = r2;
    }
    return true;
  }

  bool connected_without_excluded() const {
    UnionFind uf(m_ + n_);
    Index components = m_ + n_;
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      if (state_[k] == 2) continue;
      const Index r1 = uf.find(edges_[k].first), r2 = uf.find(edges_[k].second);
      if (r1 != r2) {
        uf.parent[static_cast<std::size_t>(r1)] = r2;
        --components;
      }
    }
    return components == 1;
  }

  // Solves the tree flows by repeatedly peeling leaves.
  Eigen::MatrixXd tree_flows() const {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m_, n_);
    std::vector<double> rem(static_cast<std::size_t>(m_ + n_));
    for (Index i = 0; i < m_; ++i) rem[static_cast<std::size_t>(i)] = a_(i);
    for (Index j = 0; j < n_; ++j) rem[static_cast<std::size_t>(m_ + j)] = b_(j);
    std::vector<std::size_t> live;
    for (std::size_t k = 0; k < edges_.size(); ++k)
      if (state_[k] == 1) live.push_back(k);
    std::vector<int> degree(static_cast<std::size_t>(m_ + n_), 0);
    for (std::size_t k : live) {
      ++degree[static_cast<std::size_t>(edges_[k].first)];
      ++degree[static_cast<std::size_t>(edges_[k].second)];
    }
    std::vector<char> done(edges_.size(), 0);
    for (std::size_t round = 0; round < live.size(); ++round) {
      for (std::size_t k : live) {
        if (done[k]) continue;
        const auto [r, c] = edges_[k];
        Index leaf = -1, other = -1;
        if (degree[static_cast<std::size_t>(r)] == 1) {
          leaf = r;
          other = c;
        } else if (degree[static_cast<std::size_t>(c)] == 1) {
          leaf = c;
          other = r;
        } else {
          continue;
        }
        const double f = rem[static_cast<std::size_t>(leaf)];
        x(r, c - m_) = f;
        rem[static_cast<std::size_t>(leaf)] = 0.0;
        rem[static_cast<std::size_t>(other)] -= f;
        --degree[static_cast<std::size_t>(leaf)];
        --degree[static_cast<std::size_t>(other)];
        done[k] = 1;
        break;
      }
    }
    return x;
  }

  Eigen::VectorXd a_, b_;
  Index m_ = 0, n_ = 0;
  std::vector<std::pair<Index, Index>> edges_;
  std::vector<char> state_;
};

}  // namespace

std::vector<Coupling> enumerate_vertex_couplings(const Pmf& px, const Pmf& py) {
  const auto rs = support_of(px);
  const auto cs = support_of(py);
  const Index m = static_cast<Index>(rs.size()), n = static_cast<Index>(cs.size());
  if (m * n > 25) throw DomainError("enumerate_vertex_couplings: more than 25 support cells");
  Eigen::VectorXd a(m), b(n);
  for (Index i = 0; i < m; ++i) a(i) = px(rs[static_cast<std::size_t>(i)]);
  for (Index j = 0; j < n; ++j) b(j) = py(cs[static_cast<std::size_t>(j)]);

  std::map<std::vector<long long>, Eigen::MatrixXd> unique;
  TreeEnumerator(a, b).run([&](const Eigen::MatrixXd& x) {
    if (x.minCoeff() < -1e-12) return;
    std::vector<long long> key(static_cast<std::size_t>(x.size()));
    for (Index k = 0; k < x.size(); ++k)
      key[static_cast<std::size_t>(k)] = std::llround(x.data()[k] / 1e-10);
    unique.emplace(std::move(key), x);
  });

  std::vector<Coupling> out;
  for (const auto& [_, x] : unique) {
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(px.size(), py.size());
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j)
        mass(rs[static_cast<std::size_t>(i)], cs[static_cast<std::size_t>(j)]) = std::max(x(i, j), 0.0);
    out.push_back({JointPmf(mass, px.symbols(), py.symbols()), 0.0, {}});
  }
  return out;
}

}  // namespace synth
