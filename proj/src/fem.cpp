#include "smpbe/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smpbe/error.hpp"

namespace smpbe {

namespace {

constexpr std::array<std::array<int, 3>, 4> kFaces{{{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}}};

// Degree-5 seven-point rule on a triangle: (barycentric a, b, b) orbits with weights summing to 1.
struct TriRule {
  std::array<std::array<double, 3>, 7> bary;
  std::array<double, 7> w;
};

TriRule make_tri_rule() {
  TriRule r{};
  const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
  const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
  r.bary[0] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  r.w[0] = 0.225;
  r.bary[1] = {a1, b1, b1};
  r.bary[2] = {b1, a1, b1};
  r.bary[3] = {b1, b1, a1};
  r.bary[4] = {a2, b2, b2};
  r.bary[5] = {b2, a2, b2};
  r.bary[6] = {b2, b2, a2};
  for (int q = 1; q < 4; ++q) r.w[q] = w1;
  for (int q = 4; q < 7; ++q) r.w[q] = w2;
  return r;
}

double norm2(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

}  // namespace

// ---------------------------------------------------------------------------------------------
// CSR

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int p = ptr[i]; p < ptr[i + 1]; ++p) s += val[p] * x[col[p]];
    y[i] = s;
  }
}

long CsrMatrix::find(int i, int j) const {
  const auto b = col.begin() + ptr[i], e = col.begin() + ptr[i + 1];
  const auto it = std::lower_bound(b, e, j);
  if (it == e || *it != j) return -1;
  return static_cast<long>(it - col.begin());
}

double CsrMatrix::at(int i, int j) const {
  const long p = find(i, j);
  return p < 0 ? 0.0 : val[p];
}

CsrMatrix csr_from_triplets(int n, std::vector<std::array<double, 3>> t) {
  std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
    return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
  });
  CsrMatrix A;
  A.n = n;
  A.ptr.assign(n + 1, 0);
  for (std::size_t q = 0; q < t.size(); ++q) {
    const int i = static_cast<int>(t[q][0]), j = static_cast<int>(t[q][1]);
    if (i < 0 || i >= n || j < 0 || j >= n) throw InputError("csr_from_triplets: index out of range");
    if (!A.col.empty() && q > 0 && static_cast<int>(t[q - 1][0]) == i && static_cast<int>(t[q - 1][1]) == j) {
      A.val.back() += t[q][2];
      continue;
    }
    A.col.push_back(j);
    A.val.push_back(t[q][2]);
    ++A.ptr[i + 1];
  }
  for (int i = 0; i < n; ++i) A.ptr[i + 1] += A.ptr[i];
  return A;
}

// ---------------------------------------------------------------------------------------------
// IC(0)

IncompleteCholesky::IncompleteCholesky(const CsrMatrix& A) : A_(&A), lu_(A.val), diag_(A.n, -1) {
  const int n = A.n;
  for (int i = 0; i < n; ++i) diag_[i] = static_cast<int>(A.find(i, i));
  std::vector<int> where(n, -1);
  for (int i = 0; i < n && !fallback_; ++i) {
    if (diag_[i] < 0) {
      fallback_ = true;
      break;
    }
    for (int p = A.ptr[i]; p < A.ptr[i + 1]; ++p) where[A.col[p]] = p;
    for (int p = A.ptr[i]; p < A.ptr[i + 1]; ++p) {
      const int k = A.col[p];
      if (k >= i) break;
      lu_[p] /= lu_[diag_[k]];
      const double lik = lu_[p];
      for (int q = diag_[k] + 1; q < A.ptr[k + 1]; ++q) {
        const int w = where[A.col[q]];
        if (w >= 0) lu_[w] -= lik * lu_[q];
      }
    }
    for (int p = A.ptr[i]; p < A.ptr[i + 1]; ++p) where[A.col[p]] = -1;
    if (!(lu_[diag_[i]] > 0.0) || !std::isfinite(lu_[diag_[i]])) fallback_ = true;
  }
  if (fallback_) {
    inv_diag_.assign(n, 1.0);
    for (int i = 0; i < n; ++i) {
      const double d = A.at(i, i);
      if (d > 0.0) inv_diag_[i] = 1.0 / d;
    }
    lu_.clear();
  }
}

void IncompleteCholesky::apply(std::span<const double> r, std::span<double> z) const {
  const auto& A = *A_;
  const int n = A.n;
  if (fallback_) {
    for (int i = 0; i < n; ++i) z[i] = inv_diag_[i] * r[i];
    return;
  }
  for (int i = 0; i < n; ++i) {
    double s = r[i];
    for (int p = A.ptr[i]; p < diag_[i]; ++p) s -= lu_[p] * z[A.col[p]];
    z[i] = s;
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = z[i];
    for (int p = diag_[i] + 1; p < A.ptr[i + 1]; ++p) s -= lu_[p] * z[A.col[p]];
    z[i] = s / lu_[diag_[i]];
  }
}

LinearSolveStats pcg(const CsrMatrix& A, std::span<const double> b, std::span<double> x, double tol, int max_iter,
                     const Preconditioner& precond) {
  const int n = A.n;
  LinearSolveStats stats;
  std::vector<double> r(n), z(n), p(n), q(n);
  A.multiply(x, q);
  for (int i = 0; i < n; ++i) r[i] = b[i] - q[i];
  const double bnorm = norm2(b);
  const double target = bnorm > 0.0 ? tol * bnorm : 1e-12;
  double rnorm = norm2(r);
  auto rel = [&](double rn) { return bnorm > 0.0 ? rn / bnorm : rn; };
  stats.relative_residual = rel(rnorm);
  if (rnorm <= target) {
    stats.converged = true;
    return stats;
  }
  auto prec = [&](std::span<const double> in, std::span<double> out) {
    if (precond) precond(in, out);
    else std::copy(in.begin(), in.end(), out.begin());
  };
  prec(r, z);
  p = z;
  double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
  for (int it = 1; it <= max_iter; ++it) {
    A.multiply(p, q);
    const double pq = std::inner_product(p.begin(), p.end(), q.begin(), 0.0);
    if (!(pq > 0.0)) throw SolverError("pcg: matrix is not positive definite");
    const double a = rz / pq;
    for (int i = 0; i < n; ++i) {
      x[i] += a * p[i];
      r[i] -= a * q[i];
    }
    rnorm = norm2(r);
    stats.iterations = it;
    stats.relative_residual = rel(rnorm);
    if (rnorm <= target) {
      stats.converged = true;
      break;
    }
    prec(r, z);
    const double rz_new = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return stats;
}

// ---------------------------------------------------------------------------------------------
// FemSpace

FemSpace::FemSpace(const InterfaceMesh& mesh) : mesh_(&mesh) {
  const auto nt = mesh.tets.size();
  const int nv = static_cast<int>(mesh.vertices.size());
  vol_.resize(nt);
  grad_.resize(nt);
  mass_s_.assign(nv, 0.0);
  std::vector<std::vector<int>> adj(nv);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& c = mesh.tets[t];
    const auto& V = mesh.vertices;
    const double vol = signed_volume(V[c[0]], V[c[1]], V[c[2]], V[c[3]]);
    if (!(vol > 0.0)) throw InputError("fem: tetrahedron " + std::to_string(t) + " is degenerate or inverted");
    vol_[t] = vol;
    for (int i = 0; i < 4; ++i) {
      const auto& f = kFaces[i];
      const Vec3 a = V[c[f[0]]], b = V[c[f[1]]], d = V[c[f[2]]];
      grad_[t][i] = cross(b - a, d - a) * (-1.0 / (6.0 * vol));
    }
    if (mesh.regions[t] == Region::Solvent)
      for (int v : c) mass_s_[v] += 0.25 * vol;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) adj[c[i]].push_back(c[j]);
  }
  pattern_.n = nv;
  pattern_.ptr.assign(nv + 1, 0);
  for (int i = 0; i < nv; ++i) {
    auto& a = adj[i];
    if (a.empty()) a.push_back(i);
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    pattern_.ptr[i + 1] = pattern_.ptr[i] + static_cast<int>(a.size());
  }
  pattern_.col.reserve(pattern_.ptr[nv]);
  for (auto& a : adj) {
    pattern_.col.insert(pattern_.col.end(), a.begin(), a.end());
    std::vector<int>().swap(a);
  }
  pattern_.val.assign(pattern_.col.size(), 0.0);
}

CsrMatrix FemSpace::stiffness(double eps_p, double eps_s) const {
  CsrMatrix K = pattern_;
  for (std::size_t t = 0; t < mesh_->tets.size(); ++t) {
    const auto& c = mesh_->tets[t];
    const auto& g = grad_[t];
    const double e = (mesh_->regions[t] == Region::Solute ? eps_p : eps_s) * vol_[t];
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) K.val[K.find(c[i], c[j])] += e * dot(g[i], g[j]);
  }
  return K;
}

void FemSpace::apply_stiffness(double eps_p, double eps_s, std::span<const double> u, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t t = 0; t < mesh_->tets.size(); ++t) {
    const auto& c = mesh_->tets[t];
    const auto& g = grad_[t];
    const double e = (mesh_->regions[t] == Region::Solute ? eps_p : eps_s) * vol_[t];
    const Vec3 gu = g[0] * u[c[0]] + g[1] * u[c[1]] + g[2] * u[c[2]] + g[3] * u[c[3]];
    for (int i = 0; i < 4; ++i) out[c[i]] += e * dot(g[i], gu);
  }
}

std::vector<double> FemSpace::psi_rhs(const CoulombField& coulomb, double eps_p, double eps_s) const {
  static const TriRule rule = make_tri_rule();
  std::vector<double> b(nodes(), 0.0);
  const double jump = eps_p - eps_s;
  if (jump == 0.0) return b;
  const auto& V = mesh_->vertices;
  for (std::size_t t = 0; t < mesh_->tets.size(); ++t) {
    if (mesh_->regions[t] != Region::Solvent) continue;
    const auto& c = mesh_->tets[t];
    // Integral of grad G over K as a sum of outward face fluxes of G.
    Vec3 I;
    for (const auto& f : kFaces) {
      const Vec3 a = V[c[f[0]]], bb = V[c[f[1]]], d = V[c[f[2]]];
      const Vec3 area = cross(bb - a, d - a) * 0.5;
      double s = 0.0;
      for (int q = 0; q < 7; ++q) {
        const auto& l = rule.bary[q];
        s += rule.w[q] * coulomb.G(a * l[0] + bb * l[1] + d * l[2]);
      }
      I += area * s;
    }
    for (int i = 0; i < 4; ++i) b[c[i]] += jump * dot(grad_[t][i], I);
  }
  return b;
}

// ---------------------------------------------------------------------------------------------
// Systems

std::vector<double> SparseSystem::rhs(std::span<const double> nodal) const {
  std::vector<double> b = load;
  std::vector<double> g(dirichlet_nodes.size());
  for (std::size_t d = 0; d < g.size(); ++d) g[d] = nodal[dirichlet_nodes[d]];
  for (int i = 0; i < coupling.n; ++i)
    for (int p = coupling.ptr[i]; p < coupling.ptr[i + 1]; ++p) b[i] -= coupling.val[p] * g[coupling.col[p]];
  return b;
}

SparseSystem eliminate_dirichlet(const CsrMatrix& full, std::span<const double> load,
                                 std::span<const int> dirichlet_nodes) {
  SparseSystem s;
  const int n = full.n;
  s.node_index.assign(n, 0);
  std::vector<char> is_d(n, 0);
  for (int v : dirichlet_nodes) {
    if (v < 0 || v >= n) throw InputError("eliminate_dirichlet: node out of range");
    is_d[v] = 1;
  }
  for (int v = 0; v < n; ++v) {
    if (is_d[v]) {
      s.node_index[v] = -static_cast<int>(s.dirichlet_nodes.size()) - 1;
      s.dirichlet_nodes.push_back(v);
    } else {
      s.node_index[v] = static_cast<int>(s.free_nodes.size());
      s.free_nodes.push_back(v);
    }
  }
  const int nf = static_cast<int>(s.free_nodes.size());
  s.matrix.n = nf;
  s.coupling.n = nf;
  s.matrix.ptr.assign(nf + 1, 0);
  s.coupling.ptr.assign(nf + 1, 0);
  s.load.resize(nf);
  for (int f = 0; f < nf; ++f) {
    const int i = s.free_nodes[f];
    s.load[f] = load[i];
    for (int p = full.ptr[i]; p < full.ptr[i + 1]; ++p) {
      const int j = s.node_index[full.col[p]];
      if (j >= 0) {
        s.matrix.col.push_back(j);
        s.matrix.val.push_back(full.val[p]);
      } else {
        s.coupling.col.push_back(-j - 1);
        s.coupling.val.push_back(full.val[p]);
      }
    }
    s.matrix.ptr[f + 1] = static_cast<int>(s.matrix.col.size());
    s.coupling.ptr[f + 1] = static_cast<int>(s.coupling.col.size());
  }
  return s;
}

SparseSystem assemble_psi_system(const FemSpace& space, const CoulombField& coulomb, const ModelParams& params) {
  const auto K = space.stiffness(params.eps_p, params.eps_s);
  const auto b = space.psi_rhs(coulomb, params.eps_p, params.eps_s);
  return eliminate_dirichlet(K, b, space.mesh().boundary_nodes);
}

SparseSystem assemble_direction_system(const FemSpace& space, std::span<const double> w, std::span<const double> phi,
                                       const ModelParams& params, std::span<const double> source) {
  const int n = space.nodes();
  if (static_cast<int>(w.size()) != n || static_cast<int>(phi.size()) != n)
    throw InputError("assemble_direction_system: nodal vector size mismatch");
  if (!source.empty() && static_cast<int>(source.size()) != n)
    throw InputError("assemble_direction_system: source size mismatch");
  auto K = space.stiffness(params.eps_p, params.eps_s);
  std::vector<double> load(n);
  K.multiply(phi, load);
  const auto& m = space.solvent_mass();
  for (int i = 0; i < n; ++i) {
    load[i] = -load[i];
    if (m[i] == 0.0) continue;
    if (!std::isfinite(w[i])) throw SolverError("assemble_direction_system: non-finite potential at solvent node " + std::to_string(i));
    const auto rc = reaction_coeffs(w[i], params);
    K.val[K.find(i, i)] += m[i] * rc.nl_prime;
    load[i] -= m[i] * (rc.nl - (source.empty() ? 0.0 : source[i]));
  }
  return eliminate_dirichlet(K, load, space.mesh().boundary_nodes);
}

FemSolveResult pcg_ilu(const SparseSystem& system, std::span<const double> nodal_guess, double tol_rel, int max_iter) {
  FemSolveResult res;
  res.nodal.assign(nodal_guess.begin(), nodal_guess.end());
  const int nf = system.free_count();
  std::vector<double> x(nf);
  for (int f = 0; f < nf; ++f) x[f] = nodal_guess[system.free_nodes[f]];
  const auto b = system.rhs(nodal_guess);
  IncompleteCholesky ic(system.matrix);
  res.stats = pcg(system.matrix, b, x, tol_rel, max_iter,
                  [&ic](std::span<const double> r, std::span<double> z) { ic.apply(r, z); });
  for (int f = 0; f < nf; ++f) res.nodal[system.free_nodes[f]] = x[f];
  return res;
}

}  // namespace smpbe
