#include "ltvchase/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

namespace ltvchase::conic {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::Unbounded:
      return "unbounded";
    case SolveStatus::MaxIter:
      return "max_iter";
  }
  return "unknown";
}

SparseVector sparse_from_dense(const Vector& v) {
  SparseVector s(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) s.insert(i) = v[i];
  }
  return s;
}

void SocpProblem::validate() const {
  if (num_vars < 0) throw BadDims("SocpProblem: negative variable count");
  if (objective.size() != num_vars) {
    throw BadDims(fmt::format("SocpProblem: objective has {} entries for {} variables",
                              objective.size(), num_vars));
  }
  if (!objective.allFinite()) throw BadDims("SocpProblem: objective is not finite");
  for (const auto& ineq : linear_ineqs) {
    if (ineq.normal.size() != num_vars) throw BadDims("SocpProblem: linear normal size");
    if (!std::isfinite(ineq.offset)) throw BadDims("SocpProblem: linear offset not finite");
  }
  for (const auto& soc : soc_constraints) {
    if (soc.A.cols() != num_vars || soc.b.size() != soc.A.rows() ||
        soc.c.size() != num_vars) {
      throw BadDims("SocpProblem: second-order cone block sizes");
    }
  }
}

double max_violation(const SocpProblem& problem, const Vector& z) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& ineq : problem.linear_ineqs) {
    worst = std::max(worst, ineq.normal.dot(z) - ineq.offset);
  }
  for (const auto& soc : problem.soc_constraints) {
    const Vector lhs = soc.A * z + soc.b;
    worst = std::max(worst, lhs.norm() - (soc.c.dot(z) + soc.d));
  }
  return worst;
}

namespace {

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;

struct SocBlock {
  int row = 0;   // first row in G
  int size = 0;  // cone dimension
  std::vector<int> cols;  // column support (original indices)
  Matrix G;               // size x cols.size(), dense restriction of G
  Matrix GtJG;            // G' J G, constant per problem
  std::vector<int> slots;  // lower-triangle slots into the permuted normal matrix
};

constexpr int kRefinePasses = 4;
constexpr double kRefineTol = 1e-12;
constexpr double kInitialRegularization = 1e-15;

// Nesterov-Todd scaling for one second-order cone.
struct SocScaling {
  double eta = 1.0;
  Vector w;  // normalized scaling point, w' J w = 1
};

double soc_jnorm(const Eigen::Ref<const Vector>& x) {
  const double t = x[0];
  const double r = x.tail(x.size() - 1).norm();
  return std::sqrt(std::max((t - r) * (t + r), 0.0));
}

// Largest alpha in (0, inf] with x + alpha d in the closed cone, x interior.
double soc_step(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& d) {
  const auto x1 = x.tail(x.size() - 1);
  const auto d1 = d.tail(d.size() - 1);
  const double a = d[0] * d[0] - d1.squaredNorm();
  const double b = x[0] * d[0] - x1.dot(d1);
  const double c = std::max(x[0] * x[0] - x1.squaredNorm(), 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  const double scale = std::max({std::abs(a), std::abs(b), c, 1e-300});
  if (std::abs(a) <= 1e-14 * scale) {
    return b < 0.0 ? -c / (2.0 * b) : inf;
  }
  const double disc = b * b - a * c;
  if (disc < 0.0) return inf;
  const double sq = std::sqrt(disc);
  // roots of a t^2 + 2 b t + c
  const double q = -(b + std::copysign(sq, b));
  double r1 = q / a;
  double r2 = (q != 0.0) ? c / q : inf;
  double best = inf;
  if (r1 > 0.0) best = std::min(best, r1);
  if (r2 > 0.0) best = std::min(best, r2);
  if (best == inf && d[0] < 0.0) best = -x[0] / d[0];
  return best;
}

struct ProblemData {
  int n = 0;
  int m = 0;  // rows of G
  int lp = 0;
  std::vector<int> soc_sizes;
  RowSparse G;
  SparseMatrix Gt;
  Vector h;
  Vector c;
  double h_norm = 0.0;

  // Normal-matrix bookkeeping (permuted lower triangle).
  std::vector<int> perm;  // original column -> permuted index
  SparseMatrix pattern;
  std::vector<int> lp_slot_start;
  std::vector<int> lp_slots;
  std::vector<int> diag_slots;
  std::vector<SocBlock> blocks;

  explicit ProblemData(const SocpProblem& problem);

  int slot(int i, int j) const;  // original indices
  SocpSolution run(const Vector& objective, const SolverSettings& settings) const;
};

ProblemData::ProblemData(const SocpProblem& problem) {
  problem.validate();
  n = problem.num_vars;
  lp = static_cast<int>(problem.linear_ineqs.size());
  m = lp;
  for (const auto& soc : problem.soc_constraints) {
    soc_sizes.push_back(static_cast<int>(soc.A.rows()) + 1);
    m += soc_sizes.back();
  }
  c = problem.objective;

  // G z + s = h.  a.z <= b  ->  row a, h = b.
  // ||A z + b|| <= c.z + d  ->  s = (c.z + d, A z + b) in Q, so rows (-c', -A), h = (d, b).
  std::vector<Eigen::Triplet<double>> trip;
  h.resize(m);
  int row = 0;
  for (const auto& ineq : problem.linear_ineqs) {
    for (SparseVector::InnerIterator it(ineq.normal); it; ++it) {
      trip.emplace_back(row, static_cast<int>(it.index()), it.value());
    }
    h[row++] = ineq.offset;
  }
  for (const auto& soc : problem.soc_constraints) {
    for (SparseVector::InnerIterator it(soc.c); it; ++it) {
      trip.emplace_back(row, static_cast<int>(it.index()), -it.value());
    }
    h[row] = soc.d;
    SparseMatrix A = soc.A;
    A.makeCompressed();
    for (int k = 0; k < A.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
        trip.emplace_back(row + 1 + static_cast<int>(it.row()), static_cast<int>(it.col()),
                          -it.value());
      }
    }
    h.segment(row + 1, soc.b.size()) = soc.b;
    row += static_cast<int>(soc.A.rows()) + 1;
  }
  G.resize(m, n);
  G.setFromTriplets(trip.begin(), trip.end());
  G.makeCompressed();
  Gt = SparseMatrix(G.transpose());
  h_norm = m > 0 ? h.lpNorm<Eigen::Infinity>() : 0.0;

  // Symmetric pattern of G' D G plus the diagonal.
  std::vector<Eigen::Triplet<double>> pat;
  for (int i = 0; i < n; ++i) pat.emplace_back(i, i, 1.0);
  for (int r = 0; r < lp; ++r) {
    for (RowSparse::InnerIterator a(G, r); a; ++a) {
      for (RowSparse::InnerIterator b(G, r); b; ++b) {
        pat.emplace_back(static_cast<int>(a.col()), static_cast<int>(b.col()), 1.0);
      }
    }
  }
  row = lp;
  for (int size : soc_sizes) {
    SocBlock blk;
    blk.row = row;
    blk.size = size;
    for (int r = row; r < row + size; ++r) {
      for (RowSparse::InnerIterator it(G, r); it; ++it) blk.cols.push_back(static_cast<int>(it.col()));
    }
    std::sort(blk.cols.begin(), blk.cols.end());
    blk.cols.erase(std::unique(blk.cols.begin(), blk.cols.end()), blk.cols.end());
    const int k = static_cast<int>(blk.cols.size());
    blk.G = Matrix::Zero(size, k);
    for (int r = row; r < row + size; ++r) {
      for (RowSparse::InnerIterator it(G, r); it; ++it) {
        const auto pos = std::lower_bound(blk.cols.begin(), blk.cols.end(), static_cast<int>(it.col()));
        blk.G(r - row, pos - blk.cols.begin()) = it.value();
      }
    }
    Matrix JG = blk.G;
    JG.bottomRows(size - 1) *= -1.0;
    blk.GtJG = blk.G.transpose() * JG;
    for (int a : blk.cols) {
      for (int b : blk.cols) pat.emplace_back(a, b, 1.0);
    }
    blocks.push_back(std::move(blk));
    row += size;
  }
  SparseMatrix full(n, n);
  full.setFromTriplets(pat.begin(), pat.end());

  // Fill-reducing ordering.
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
  Eigen::AMDOrdering<int> amd;
  amd(full, pinv);
  const Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> P = pinv.inverse();
  perm.assign(n, 0);
  for (int i = 0; i < n; ++i) perm[i] = P.indices()[i];

  std::vector<Eigen::Triplet<double>> low;
  for (int k = 0; k < full.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(full, k); it; ++it) {
      const int pi = perm[it.row()];
      const int pj = perm[it.col()];
      if (pi >= pj) low.emplace_back(pi, pj, 0.0);
    }
  }
  pattern.resize(n, n);
  pattern.setFromTriplets(low.begin(), low.end());
  pattern.makeCompressed();

  diag_slots.resize(n);
  for (int i = 0; i < n; ++i) diag_slots[i] = slot(i, i);
  lp_slot_start.assign(lp + 1, 0);
  for (int r = 0; r < lp; ++r) {
    for (RowSparse::InnerIterator a(G, r); a; ++a) {
      for (RowSparse::InnerIterator b(G, r); b; ++b) {
        if (b.col() > a.col()) break;
        lp_slots.push_back(slot(static_cast<int>(a.col()), static_cast<int>(b.col())));
      }
    }
    lp_slot_start[r + 1] = static_cast<int>(lp_slots.size());
  }
  for (auto& blk : blocks) {
    const int k = static_cast<int>(blk.cols.size());
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b <= a; ++b) blk.slots.push_back(slot(blk.cols[a], blk.cols[b]));
    }
  }
}

int ProblemData::slot(int i, int j) const {
  int pi = perm[i];
  int pj = perm[j];
  if (pi < pj) std::swap(pi, pj);
  const int* outer = pattern.outerIndexPtr();
  const int* inner = pattern.innerIndexPtr();
  const int* first = inner + outer[pj];
  const int* last = inner + outer[pj + 1];
  const int* pos = std::lower_bound(first, last, pi);
  return static_cast<int>(pos - inner);
}

// Iteration state and cone arithmetic for one solve.
class Iterate {
 public:
  Iterate(const ProblemData& p, const Vector& c) : p_(p), c_(c) {
    scal_.resize(p.soc_sizes.size());
    lp_w_.resize(p.lp);
  }

  // ---- cone helpers on vectors of length m ----
  template <typename F>
  void for_each_soc(F&& f) const {
    int row = p_.lp;
    for (std::size_t k = 0; k < p_.soc_sizes.size(); ++k) {
      f(k, row, p_.soc_sizes[k]);
      row += p_.soc_sizes[k];
    }
  }

  // Smallest alpha such that x + alpha*e is on the cone boundary, negated.
  double max_infeasibility(const Vector& x) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < p_.lp; ++i) worst = std::max(worst, -x[i]);
    for_each_soc([&](std::size_t, int row, int size) {
      worst = std::max(worst, x.segment(row + 1, size - 1).norm() - x[row]);
    });
    return worst;
  }

  void add_identity(Vector& x, double alpha) const {
    x.head(p_.lp).array() += alpha;
    for_each_soc([&](std::size_t, int row, int) { x[row] += alpha; });
  }

  // Jordan product u o v.
  Vector jordan(const Vector& u, const Vector& v) const {
    Vector r(u.size());
    r.head(p_.lp) = u.head(p_.lp).cwiseProduct(v.head(p_.lp));
    for_each_soc([&](std::size_t, int row, int size) {
      r[row] = u.segment(row, size).dot(v.segment(row, size));
      r.segment(row + 1, size - 1) =
          u[row] * v.segment(row + 1, size - 1) + v[row] * u.segment(row + 1, size - 1);
    });
    return r;
  }

  // Solves lambda o x = d.
  Vector jordan_solve(const Vector& lam, const Vector& d) const {
    Vector x(d.size());
    x.head(p_.lp) = d.head(p_.lp).cwiseQuotient(lam.head(p_.lp));
    for_each_soc([&](std::size_t, int row, int size) {
      const auto l1 = lam.segment(row + 1, size - 1);
      const auto d1 = d.segment(row + 1, size - 1);
      const double l0 = lam[row];
      const double det = l0 * l0 - l1.squaredNorm();
      const double x0 = (l0 * d[row] - l1.dot(d1)) / det;
      x[row] = x0;
      x.segment(row + 1, size - 1) = (d1 - x0 * l1) / l0;
    });
    return x;
  }

  double cone_degree() const {
    return static_cast<double>(p_.lp + static_cast<int>(p_.soc_sizes.size()));
  }

  double step_to_boundary(const Vector& x, const Vector& d) const {
    double alpha = std::numeric_limits<double>::infinity();
    for (int i = 0; i < p_.lp; ++i) {
      if (d[i] < 0.0) alpha = std::min(alpha, -x[i] / d[i]);
    }
    for_each_soc([&](std::size_t, int row, int size) {
      alpha = std::min(alpha, soc_step(x.segment(row, size), d.segment(row, size)));
    });
    return alpha;
  }

  // ---- scaling ----
  bool update_scaling(const Vector& s, const Vector& z) {
    for (int i = 0; i < p_.lp; ++i) {
      if (!(s[i] > 0.0) || !(z[i] > 0.0)) return false;
      lp_w_[i] = std::sqrt(s[i] / z[i]);
    }
    bool ok = true;
    for_each_soc([&](std::size_t k, int row, int size) {
      const auto sk = s.segment(row, size);
      const auto zk = z.segment(row, size);
      const double sn = soc_jnorm(sk);
      const double zn = soc_jnorm(zk);
      if (!(sn > 0.0) || !(zn > 0.0)) {
        ok = false;
        return;
      }
      Vector sb = sk / sn;
      Vector zb = zk / zn;
      const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 0.0));
      Vector w = sb;
      w[0] += zb[0];
      w.tail(size - 1) -= zb.tail(size - 1);
      w /= 2.0 * gamma;
      scal_[k].eta = std::sqrt(sn / zn);
      scal_[k].w = std::move(w);
    });
    return ok;
  }

  // y = W x (inverse = false) or W^{-1} x.
  Vector apply_w(const Vector& x, bool inverse) const {
    Vector y(x.size());
    if (inverse) {
      y.head(p_.lp) = x.head(p_.lp).cwiseQuotient(lp_w_);
    } else {
      y.head(p_.lp) = x.head(p_.lp).cwiseProduct(lp_w_);
    }
    for_each_soc([&](std::size_t k, int row, int size) {
      const auto& sc = scal_[k];
      const double w0 = sc.w[0];
      const auto w1 = sc.w.tail(size - 1);
      const double x0 = x[row];
      const auto x1 = x.segment(row + 1, size - 1);
      const double w1x1 = w1.dot(x1);
      if (inverse) {
        y[row] = (w0 * x0 - w1x1) / sc.eta;
        y.segment(row + 1, size - 1) = (x1 + (-x0 + w1x1 / (1.0 + w0)) * w1) / sc.eta;
      } else {
        y[row] = sc.eta * (w0 * x0 + w1x1);
        y.segment(row + 1, size - 1) = sc.eta * (x1 + (x0 + w1x1 / (1.0 + w0)) * w1);
      }
    });
    return y;
  }

  // W^2 x (inverse = false) or W^{-2} x, using W-bar^2 = 2 w w' - J.
  Vector apply_w2(const Vector& x, bool inverse) const {
    Vector y(x.size());
    if (inverse) {
      y.head(p_.lp) = x.head(p_.lp).cwiseQuotient(lp_w_.cwiseAbs2());
    } else {
      y.head(p_.lp) = x.head(p_.lp).cwiseProduct(lp_w_.cwiseAbs2());
    }
    for_each_soc([&](std::size_t k, int row, int size) {
      const auto& sc = scal_[k];
      const double w0 = sc.w[0];
      const auto w1 = sc.w.tail(size - 1);
      const double x0 = x[row];
      const auto x1 = x.segment(row + 1, size - 1);
      // inverse uses J w in place of w
      const double sgn = inverse ? -1.0 : 1.0;
      const double f = inverse ? 1.0 / (sc.eta * sc.eta) : sc.eta * sc.eta;
      const double wx = w0 * x0 + sgn * w1.dot(x1);
      y[row] = f * (2.0 * w0 * wx - x0);
      y.segment(row + 1, size - 1) = f * (2.0 * sgn * wx * w1 + x1);
    });
    return y;
  }

  // Assembles G' W^{-2} G + delta I into the permuted pattern and factors it.
  bool factor(Ldlt& ldlt, SparseMatrix& M, double delta_rel) const {
    double* val = M.valuePtr();
    std::fill(val, val + M.nonZeros(), 0.0);
    for (int r = 0; r < p_.lp; ++r) {
      const double d = 1.0 / (lp_w_[r] * lp_w_[r]);
      int k = p_.lp_slot_start[r];
      for (RowSparse::InnerIterator a(p_.G, r); a; ++a) {
        for (RowSparse::InnerIterator b(p_.G, r); b; ++b) {
          if (b.col() > a.col()) break;
          val[p_.lp_slots[k++]] += d * a.value() * b.value();
        }
      }
    }
    for (std::size_t b = 0; b < p_.blocks.size(); ++b) {
      const auto& blk = p_.blocks[b];
      const auto& sc = scal_[b];
      Vector Jw = sc.w;
      Jw.tail(blk.size - 1) *= -1.0;
      const Vector u = blk.G.transpose() * Jw;
      const double f = 1.0 / (sc.eta * sc.eta);
      const int k = static_cast<int>(blk.cols.size());
      int idx = 0;
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j <= i; ++j) {
          val[blk.slots[idx++]] += f * (2.0 * u[i] * u[j] - blk.GtJG(i, j));
        }
      }
    }
    double dmax = 0.0;
    for (int i = 0; i < p_.n; ++i) dmax = std::max(dmax, val[p_.diag_slots[i]]);
    const double delta = delta_rel * (1.0 + dmax);
    for (int i = 0; i < p_.n; ++i) val[p_.diag_slots[i]] += delta;
    ldlt.factorize(M);
    return ldlt.info() == Eigen::Success;
  }

  // Solves [0 G'; G -W'W] [u; v] = [a; b] using the normal equations, with
  // iterative refinement against the unregularized system.
  void solve_kkt(const Ldlt& ldlt, const Vector& a, const Vector& b, Vector& u, Vector& v) const {
    u = Vector::Zero(p_.n);
    v = Vector::Zero(p_.m);
    Vector ra = a;
    Vector rb = b;
    const double ref = std::max({1.0, a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>()});
    Vector prhs(p_.n);
    for (int pass = 0; pass < kRefinePasses; ++pass) {
      const Vector rhs = ra + p_.Gt * apply_w2(rb, true);
      for (int i = 0; i < p_.n; ++i) prhs[p_.perm[i]] = rhs[i];
      const Vector psol = ldlt.solve(prhs);
      Vector du(p_.n);
      for (int i = 0; i < p_.n; ++i) du[i] = psol[p_.perm[i]];
      v += apply_w2(p_.G * du - rb, true);
      u += du;
      ra = a - p_.Gt * v;
      rb = b - (p_.G * u - apply_w2(v, false));
      const double res = std::max(ra.lpNorm<Eigen::Infinity>(), rb.lpNorm<Eigen::Infinity>());
      if (res <= kRefineTol * ref) break;
    }
  }

 private:
  const ProblemData& p_;
  const Vector& c_;
  std::vector<SocScaling> scal_;
  Vector lp_w_;
};

}  // namespace

struct ConeSolver::Impl : ProblemData {
  using ProblemData::ProblemData;
};

SocpSolution ProblemData::run(const Vector& obj, const SolverSettings& settings) const {
  if (obj.size() != n) {
    throw BadDims(fmt::format("ConeSolver: objective has {} entries for {} variables", obj.size(), n));
  }
  SocpSolution out;
  out.primal = Vector::Zero(n);
  if (m == 0) {
    out.status = obj.isZero(0.0) ? SolveStatus::Optimal : SolveStatus::Unbounded;
    return out;
  }

  Iterate it(*this, obj);
  Ldlt ldlt;
  SparseMatrix M = pattern;
  ldlt.analyzePattern(M);

  const double c_norm = std::max(1.0, obj.lpNorm<Eigen::Infinity>());
  const double h_scale = std::max(1.0, h_norm);

  // Initial point with W = I.
  Vector s = Vector::Ones(m);
  Vector z = Vector::Ones(m);
  for (int i = lp; i < m; ++i) s[i] = z[i] = 0.0;
  {
    int row = lp;
    for (int size : soc_sizes) {
      s[row] = z[row] = 1.0;
      row += size;
    }
  }
  it.update_scaling(s, z);  // identity scaling
  double delta_rel = kInitialRegularization;
  if (!it.factor(ldlt, M, delta_rel)) {
    out.status = SolveStatus::MaxIter;
    return out;
  }
  Vector x;
  Vector sh;
  it.solve_kkt(ldlt, Vector::Zero(n), h, x, sh);  // x = argmin ||Gx - h||, sh = Gx - h
  s = -sh;
  Vector xd;
  it.solve_kkt(ldlt, -obj, Vector::Zero(m), xd, z);
  {
    const double ap = it.max_infeasibility(s);
    if (ap >= 0.0) it.add_identity(s, 1.0 + ap);
    const double ad = it.max_infeasibility(z);
    if (ad >= 0.0) it.add_identity(z, 1.0 + ad);
  }
  double tau = 1.0;
  double kappa = 1.0;

  const double degree = it.cone_degree();
  Vector best_x = x;
  double best_res = std::numeric_limits<double>::infinity();

  for (int k = 0; k <= settings.max_iter; ++k) {
    out.iterations = k;
    const Vector Gx = G * x;
    const Vector Gtz = Gt * z;
    const Vector e1 = Gtz + obj * tau;
    const Vector e2 = s + Gx - h * tau;
    const double cx = obj.dot(x);
    const double hz = h.dot(z);
    const double e3 = kappa + cx + hz;
    const double gap = s.dot(z);
    const double mu = (gap + tau * kappa) / (degree + 1.0);

    const double pres = e2.lpNorm<Eigen::Infinity>() / tau;
    const double dres = e1.lpNorm<Eigen::Infinity>() / tau;
    const double pcost = cx / tau;
    const double dcost = -hz / tau;
    const double abs_gap = gap / (tau * tau);
    const double gap_ref = std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
    out.residuals = {pres, dres, abs_gap};

    const double res_score = std::max({pres / h_scale, dres / c_norm, abs_gap / gap_ref});
    if (res_score < best_res) {
      best_res = res_score;
      best_x = x / tau;
    }

    if (pres <= settings.feas_tol && dres <= settings.feas_tol &&
        (abs_gap <= settings.gap_tol * gap_ref || std::abs(pcost - dcost) <= settings.gap_tol * gap_ref)) {
      out.status = SolveStatus::Optimal;
      out.primal = x / tau;
      out.objective_value = obj.dot(out.primal);
      return out;
    }
    if (hz < 0.0) {
      const double pinf = Gtz.lpNorm<Eigen::Infinity>() / (-hz);
      if (pinf <= settings.feas_tol) {
        out.status = SolveStatus::Infeasible;
        out.primal = x / tau;
        out.objective_value = std::numeric_limits<double>::infinity();
        return out;
      }
    }
    if (cx < 0.0) {
      const double dinf = (Gx + s).lpNorm<Eigen::Infinity>() / (-cx);
      if (dinf <= settings.feas_tol) {
        out.status = SolveStatus::Unbounded;
        out.primal = x / tau;
        out.objective_value = -std::numeric_limits<double>::infinity();
        return out;
      }
    }
    if (k == settings.max_iter) break;

    if (!it.update_scaling(s, z)) break;
    const Vector lam = it.apply_w(z, false);
    bool factored = false;
    for (int attempt = 0; attempt < 6 && !factored; ++attempt) {
      factored = it.factor(ldlt, M, delta_rel);
      if (!factored) delta_rel *= 100.0;
    }
    if (!factored) break;

    Vector x1, z1;
    it.solve_kkt(ldlt, -obj, h, x1, z1);
    const double denom1 = obj.dot(x1) + h.dot(z1);

    auto direction = [&](double sigma, const Vector& ds_target, double dk_target, Vector& dx, Vector& dz,
                         Vector& ds, double& dtau, double& dkappa) {
      const Vector lam_inv_ds = it.jordan_solve(lam, ds_target);
      const Vector bx = -(1.0 - sigma) * e1;
      const Vector bz = -(1.0 - sigma) * e2 - it.apply_w(lam_inv_ds, false);
      const double btau = -(1.0 - sigma) * e3 - dk_target / tau;
      Vector x2, z2;
      it.solve_kkt(ldlt, bx, bz, x2, z2);
      dtau = (btau - obj.dot(x2) - h.dot(z2)) / (denom1 - kappa / tau);
      dx = x2 + dtau * x1;
      dz = z2 + dtau * z1;
      ds = it.apply_w(lam_inv_ds - it.apply_w(dz, false), false);
      dkappa = (dk_target - kappa * dtau) / tau;
    };
    auto max_step = [&](const Vector& ds, const Vector& dz, double dtau, double dkappa) {
      double a = std::min(it.step_to_boundary(s, ds), it.step_to_boundary(z, dz));
      if (dtau < 0.0) a = std::min(a, -tau / dtau);
      if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
      return a;
    };

    // Predictor.
    const Vector lam_sq = it.jordan(lam, lam);
    Vector dx, dz, ds;
    double dtau = 0.0, dkappa = 0.0;
    direction(0.0, -lam_sq, -tau * kappa, dx, dz, ds, dtau, dkappa);
    const double alpha_aff = std::min(1.0, max_step(ds, dz, dtau, dkappa));
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 1e-6, 1.0);

    // Corrector.
    Vector ds_target = -lam_sq - it.jordan(it.apply_w(ds, true), it.apply_w(dz, false));
    it.add_identity(ds_target, sigma * mu);
    const double dk_target = -tau * kappa - dtau * dkappa + sigma * mu;
    direction(sigma, ds_target, dk_target, dx, dz, ds, dtau, dkappa);
    const double alpha = std::min(1.0, 0.99 * max_step(ds, dz, dtau, dkappa));
    if (!(alpha > 1e-12) || !dx.allFinite()) break;

    x += alpha * dx;
    s += alpha * ds;
    z += alpha * dz;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
  }
  out.status = SolveStatus::MaxIter;
  out.primal = best_x;
  out.objective_value = obj.dot(best_x);
  return out;
}

ConeSolver::ConeSolver(const SocpProblem& problem) : impl_(std::make_unique<Impl>(problem)) {}
ConeSolver::~ConeSolver() = default;
ConeSolver::ConeSolver(ConeSolver&&) noexcept = default;
ConeSolver& ConeSolver::operator=(ConeSolver&&) noexcept = default;

int ConeSolver::num_vars() const { return impl_->n; }

SocpSolution ConeSolver::solve(const SolverSettings& settings) const {
  return impl_->run(impl_->c, settings);
}

SocpSolution ConeSolver::solve(const Vector& objective, const SolverSettings& settings) const {
  return impl_->run(objective, settings);
}

SocpSolution solve_socp(const SocpProblem& problem, const SolverSettings& settings) {
  return ConeSolver(problem).solve(settings);
}

}  // namespace ltvchase::conic
