#include "smpbe/hybrid.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "smpbe/error.hpp"
#include "smpbe/fd.hpp"

namespace smpbe {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class F>
void for_interior(const UniformGrid& g, F&& f) {
  for (int k = 1; k < g.nz() - 1; ++k)
    for (int j = 1; j < g.ny() - 1; ++j)
      for (int i = 1; i < g.nx() - 1; ++i) f(i, j, k);
}

double mean(const std::vector<int>& v) {
  if (v.empty()) return 0.0;
  return static_cast<double>(std::accumulate(v.begin(), v.end(), 0L)) / static_cast<double>(v.size());
}

}  // namespace

void SolverConfig::validate() const {
  if (!(omega_psi > 0.0 && omega_psi < 2.0) || !(omega_p > 0.0 && omega_p < 2.0))
    throw InputError("SolverConfig: relaxation parameters must lie in (0, 2)");
  if (!(tol_dd > 0.0) || !(tol_newton > 0.0) || !(tol_linear > 0.0))
    throw InputError("SolverConfig: tolerances must be positive");
  if (max_sweeps < 1 || max_newton < 0 || max_linear < 1 || max_halvings < 0)
    throw InputError("SolverConfig: iteration limits must be positive");
  auto order = box_order;
  std::sort(order.begin(), order.end());
  for (int b = 0; b < 6; ++b)
    if (order[b] != b) throw InputError("SolverConfig: box order must be a permutation of 0..5");
}

double SolveReport::mean_mg() const { return mean(mg_iterations); }
double SolveReport::mean_ilu() const { return mean(ilu_iterations); }
double SolveReport::mean_sweeps() const { return mean(sweep_counts); }

// ---------------------------------------------------------------------------------------------
// Coupling

Coupling::Coupling(const BoxPartition& partition, const InterfaceMesh& mesh) : part_(&partition), mesh_(&mesh) {
  const auto& lat = partition.lattice();
  const auto& cb = partition.central();
  if (mesh.lattice_link.size() != mesh.vertex_count())
    throw InputError("coupling: mesh is not attached to the partition");
  lattice_dof_.assign(lat.size(), 1);
  std::vector<char> linked(lat.size(), 0);
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    const auto L = mesh.lattice_link[v];
    if (L < 0) continue;
    links_.emplace_back(static_cast<int>(v), static_cast<std::size_t>(L));
    linked[L] = 1;
  }
  for (int v : mesh.boundary_nodes)
    if (mesh.lattice_link[v] < 0) throw InputError("coupling: central-box boundary node is not a lattice point");

  std::unique_ptr<PointLocator> loc;
  for (int k = cb.lo[2]; k <= cb.hi[2]; ++k)
    for (int j = cb.lo[1]; j <= cb.hi[1]; ++j)
      for (int i = cb.lo[0]; i <= cb.hi[0]; ++i) {
        const auto L = lat.index(i, j, k);
        if (cb.interior(i, j, k)) lattice_dof_[L] = 0;
        if (linked[L]) continue;
        if (!loc) loc = std::make_unique<PointLocator>(make_locator(mesh, partition));
        const auto hit = loc->locate(lat.point(i, j, k));
        if (!hit) throw InputError("coupling: lattice point outside the central-box mesh");
        Interp it;
        it.lattice = L;
        it.nodes = mesh.tets[hit->tet];
        it.w = hit->bary;
        interp_.push_back(it);
      }
}

std::vector<double> Coupling::read_box(const CompositeField& f, int box) const {
  const auto& lat = part_->lattice();
  const auto& b = part_->box(box);
  const auto g = part_->grid(box);
  std::vector<double> out(g.size());
  for (int k = 0; k < g.nz(); ++k)
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i)
        out[g.index(i, j, k)] = f.lattice[lat.index(b.lo[0] + i, b.lo[1] + j, b.lo[2] + k)];
  return out;
}

void Coupling::write_box_interior(CompositeField& f, int box, std::span<const double> values) const {
  const auto& lat = part_->lattice();
  const auto& b = part_->box(box);
  const auto g = part_->grid(box);
  for_interior(g, [&](int i, int j, int k) {
    f.lattice[lat.index(b.lo[0] + i, b.lo[1] + j, b.lo[2] + k)] = values[g.index(i, j, k)];
  });
}

void Coupling::lattice_to_mesh(CompositeField& f) const {
  for (const auto& [v, L] : links_) f.mesh[v] = f.lattice[L];
}

void Coupling::mesh_to_lattice(CompositeField& f) const {
  for (const auto& [v, L] : links_) f.lattice[L] = f.mesh[v];
  for (const auto& it : interp_) {
    double s = 0.0;
    for (int q = 0; q < 4; ++q) s += it.w[q] * f.mesh[it.nodes[q]];
    f.lattice[it.lattice] = s;
  }
}

double relative_change(const Coupling& c, const CompositeField& before, const CompositeField& after) {
  double diff = 0.0, size = 0.0;
  auto acc = [&](double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b)) return;
    diff = std::max(diff, std::abs(a - b));
    size = std::max(size, std::abs(b));
  };
  for (std::size_t i = 0; i < after.lattice.size(); ++i) acc(before.lattice[i], after.lattice[i]);
  const auto& links = c.mesh().lattice_link;
  for (std::size_t v = 0; v < after.mesh.size(); ++v)
    if (links[v] < 0) acc(before.mesh[v], after.mesh[v]);
  return size > 0.0 ? diff / size : diff;
}

// ---------------------------------------------------------------------------------------------
// Energy functional

EnergyFunctional::EnergyFunctional(const Coupling& coupling, const FemSpace& space, const ModelParams& params,
                                   const CompositeField& U, const CompositeField* S)
    : c_(&coupling), space_(&space), params_(params), U_(&U), S_(S) {
  const auto& part = coupling.partition();
  const auto& lat = part.lattice();
  const auto& cb = part.central();
  const auto& mesh = coupling.mesh();
  const std::size_t P = lat.points_per_axis();
  const std::size_t stride[3] = {1, P, P * P};
  const double h = lat.h();
  const double h3 = h * h * h;

  // Outside the central box the functional is the 7-point energy: weight eps_s h per axis edge and
  // mass h^3 per point. On the central-box boundary the mesh already carries part of both.
  std::vector<int> node_of(lat.size(), -1);
  for (int v : mesh.boundary_nodes) node_of[static_cast<std::size_t>(mesh.lattice_link[v])] = v;
  const CsrMatrix K = space.stiffness(params.eps_p, params.eps_s);
  const auto& ms = space.solvent_mass();

  auto where = [&](const std::array<int, 3>& q) {
    // 0 outside, 1 on the boundary, 2 strictly inside the central box
    bool in = true, strict = true;
    for (int a = 0; a < 3; ++a) {
      if (q[a] < cb.lo[a] || q[a] > cb.hi[a]) in = false;
      if (q[a] <= cb.lo[a] || q[a] >= cb.hi[a]) strict = false;
    }
    return strict ? 2 : (in ? 1 : 0);
  };

  lat_mass_.assign(lat.size(), 0.0);
  lat_edge_.assign(lat.size(), {0.0, 0.0, 0.0});
  for (std::size_t L = 0; L < lat.size(); ++L) {
    const auto q = lat.ijk(L);
    const int wq = where(q);
    if (wq == 0) {
      double m = h3;
      for (int a = 0; a < 3; ++a)
        if (q[a] == 0 || q[a] == static_cast<int>(P) - 1) m *= 0.5;
      lat_mass_[L] = m;
    }
    if (wq == 1) lat_mass_[L] = h3 - ms[static_cast<std::size_t>(node_of[L])];
    for (int a = 0; a < 3; ++a) {
      auto r = q;
      if (++r[a] >= static_cast<int>(P)) continue;
      const int wr = where(r);
      if (wq == 2 || wr == 2) continue;
      double w = params.eps_s * h;
      if (wq == 1 && wr == 1) w += K.at(node_of[L], node_of[L + stride[a]]);
      lat_edge_[L][a] = w;
    }
  }

  mesh_free_.assign(mesh.vertex_count(), 1);
  for (int v : mesh.boundary_nodes) mesh_free_[v] = 0;
  lat_free_.assign(lat.size(), 0);
  for (std::size_t L = 0; L < lat.size(); ++L) {
    const auto ijk = lat.ijk(L);
    lat_free_[L] = coupling.lattice_point_is_dof(L) && !lat.on_outer_boundary(ijk[0], ijk[1], ijk[2]);
  }
}

void EnergyFunctional::stiffness_apply(const CompositeField& v, CompositeField& out) const {
  const auto& lat = c_->partition().lattice();
  const std::size_t P = lat.points_per_axis();
  const std::size_t stride[3] = {1, P, P * P};
  std::fill(out.lattice.begin(), out.lattice.end(), 0.0);
  for (std::size_t L = 0; L < lat.size(); ++L)
    for (int a = 0; a < 3; ++a) {
      const double w = lat_edge_[L][a];
      if (w == 0.0) continue;
      const double d = w * (v.lattice[L] - v.lattice[L + stride[a]]);
      out.lattice[L] += d;
      out.lattice[L + stride[a]] -= d;
    }
  space_->apply_stiffness(params_.eps_p, params_.eps_s, v.mesh, out.mesh);
}

void EnergyFunctional::lumped_apply(const CompositeField& v, const CompositeField* d, CompositeField& out,
                                    bool second) const {
  auto term = [&](double m, double u, double s, double vv, double dd) {
    if (m == 0.0) return 0.0;
    const auto rc = reaction_coeffs(u + vv, params_);
    return second ? m * rc.nl_prime * dd : m * (rc.nl - s);
  };
  const auto& ms = space_->solvent_mass();
  for (std::size_t L = 0; L < out.lattice.size(); ++L)
    out.lattice[L] += term(lat_mass_[L], U_->lattice[L], S_ ? S_->lattice[L] : 0.0, v.lattice[L],
                           d ? d->lattice[L] : 0.0);
  for (std::size_t n = 0; n < out.mesh.size(); ++n)
    out.mesh[n] += term(ms[n], U_->mesh[n], S_ ? S_->mesh[n] : 0.0, v.mesh[n], d ? d->mesh[n] : 0.0);
}

double EnergyFunctional::reaction_sum(const CompositeField& v, const CompositeField* d) const {
  double s = 0.0;
  auto term = [&](double m, double u, double src, double vv, double dd) {
    if (m == 0.0) return 0.0;
    if (d) return m * (reaction_energy_delta(u + vv, dd, params_) - src * dd);
    return m * (reaction_energy(u + vv, params_) - src * vv);
  };
  const auto& ms = space_->solvent_mass();
  for (std::size_t L = 0; L < v.lattice.size(); ++L)
    s += term(lat_mass_[L], U_->lattice[L], S_ ? S_->lattice[L] : 0.0, v.lattice[L], d ? d->lattice[L] : 0.0);
  for (std::size_t n = 0; n < v.mesh.size(); ++n)
    s += term(ms[n], U_->mesh[n], S_ ? S_->mesh[n] : 0.0, v.mesh[n], d ? d->mesh[n] : 0.0);
  return s;
}

double EnergyFunctional::value(const CompositeField& v) const {
  CompositeField Av(v.lattice.size(), v.mesh.size());
  stiffness_apply(v, Av);
  const double a = std::inner_product(v.lattice.begin(), v.lattice.end(), Av.lattice.begin(), 0.0) +
                   std::inner_product(v.mesh.begin(), v.mesh.end(), Av.mesh.begin(), 0.0);
  const double J = 0.5 * a + reaction_sum(v, nullptr);
  if (!std::isfinite(J)) throw SolverError("energy functional is not finite");
  return J;
}

double EnergyFunctional::delta(const CompositeField& v, const CompositeField& d) const {
  CompositeField w(v.lattice.size(), v.mesh.size());
  for (std::size_t i = 0; i < w.lattice.size(); ++i) w.lattice[i] = v.lattice[i] + 0.5 * d.lattice[i];
  for (std::size_t i = 0; i < w.mesh.size(); ++i) w.mesh[i] = v.mesh[i] + 0.5 * d.mesh[i];
  CompositeField Aw(v.lattice.size(), v.mesh.size());
  stiffness_apply(w, Aw);
  // a(v + d/2, d) = a(v, d) + a(d, d)/2
  const double a = std::inner_product(d.lattice.begin(), d.lattice.end(), Aw.lattice.begin(), 0.0) +
                   std::inner_product(d.mesh.begin(), d.mesh.end(), Aw.mesh.begin(), 0.0);
  const double dJ = a + reaction_sum(v, &d);
  if (!std::isfinite(dJ)) throw SolverError("energy functional is not finite");
  return dJ;
}

CompositeField EnergyFunctional::gradient(const CompositeField& v) const {
  CompositeField r(v.lattice.size(), v.mesh.size());
  stiffness_apply(v, r);
  lumped_apply(v, nullptr, r, false);
  const auto& mesh = c_->mesh();
  for (int n : mesh.boundary_nodes) r.lattice[static_cast<std::size_t>(mesh.lattice_link[n])] += r.mesh[n];
  for (std::size_t L = 0; L < r.lattice.size(); ++L)
    if (!lat_free_[L]) r.lattice[L] = 0.0;
  for (std::size_t n = 0; n < r.mesh.size(); ++n)
    if (!mesh_free_[n]) r.mesh[n] = 0.0;
  return r;
}

CompositeField EnergyFunctional::hessian_apply(const CompositeField& v, const CompositeField& d) const {
  CompositeField r(v.lattice.size(), v.mesh.size());
  stiffness_apply(d, r);
  lumped_apply(v, &d, r, true);
  const auto& mesh = c_->mesh();
  for (int n : mesh.boundary_nodes) r.lattice[static_cast<std::size_t>(mesh.lattice_link[n])] += r.mesh[n];
  for (std::size_t L = 0; L < r.lattice.size(); ++L)
    if (!lat_free_[L]) r.lattice[L] = 0.0;
  for (std::size_t n = 0; n < r.mesh.size(); ++n)
    if (!mesh_free_[n]) r.mesh[n] = 0.0;
  return r;
}

double EnergyFunctional::dot(const CompositeField& a, const CompositeField& b) const {
  double s = 0.0;
  for (std::size_t L = 0; L < a.lattice.size(); ++L)
    if (lat_free_[L]) s += a.lattice[L] * b.lattice[L];
  for (std::size_t n = 0; n < a.mesh.size(); ++n)
    if (mesh_free_[n]) s += a.mesh[n] * b.mesh[n];
  return s;
}

// ---------------------------------------------------------------------------------------------
// Problem

HybridProblem::HybridProblem(BoxPartition partition, InterfaceMesh mesh, ChargeSystem charges, ModelParams params)
    : partition_(std::move(partition)),
      mesh_(std::make_unique<InterfaceMesh>(std::move(mesh))),
      params_(params),
      coulomb_(std::move(charges), params) {
  params_.validate();
  if (mesh_->imported) attach_to_partition(*mesh_, partition_);
  for (const auto& a : coulomb_.charges().atoms()) {
    const auto& D = partition_.D();
    const Vec3 lo = D.lo, hi = D.hi();
    for (int ax = 0; ax < 3; ++ax)
      if (!(a.position[ax] > lo[ax] && a.position[ax] < hi[ax]))
        throw InputError("problem: every atom must lie inside the box D");
  }
  coupling_ = std::make_unique<Coupling>(partition_, *mesh_);
  space_ = std::make_unique<FemSpace>(*mesh_);
  locator_ = std::make_unique<PointLocator>(make_locator(*mesh_, partition_));
  G_ = sample([this](const Vec3& r) { return coulomb_.G_or_nan(r); });
}

CompositeField HybridProblem::sample(const ScalarFunction& f) const {
  CompositeField out = zeros();
  const auto& lat = partition_.lattice();
  for (std::size_t L = 0; L < lat.size(); ++L) out.lattice[L] = f(lat.point(L));
  for (std::size_t v = 0; v < mesh_->vertex_count(); ++v) {
    const auto link = mesh_->lattice_link[v];
    out.mesh[v] = link >= 0 ? out.lattice[static_cast<std::size_t>(link)] : f(mesh_->vertices[v]);
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Schwarz iterations

namespace {

struct FemBox {
  SparseSystem system;
  std::unique_ptr<IncompleteCholesky> ic;

  explicit FemBox(SparseSystem s) : system(std::move(s)), ic(std::make_unique<IncompleteCholesky>(system.matrix)) {}

  LinearSolveStats solve(std::span<const double> guess, std::vector<double>& nodal, double tol, int max_iter) const {
    const int nf = system.free_count();
    std::vector<double> x(nf);
    for (int f = 0; f < nf; ++f) x[f] = guess[system.free_nodes[f]];
    const auto b = system.rhs(guess);
    const auto* icp = ic.get();
    auto stats = pcg(system.matrix, b, x, tol, max_iter,
                     [icp](std::span<const double> r, std::span<double> z) { icp->apply(r, z); });
    nodal.assign(guess.begin(), guess.end());
    for (int f = 0; f < nf; ++f) nodal[system.free_nodes[f]] = x[f];
    return stats;
  }
};

struct FdBox {
  std::unique_ptr<FdBoxSolver> solver;
  std::vector<double> rhs;
};

SchwarzResult schwarz(const HybridProblem& problem, const SolverConfig& cfg, double omega, std::vector<FdBox>& fd,
                      const FemBox& fem, CompositeField& x, SolveReport* report) {
  const auto& c = problem.coupling();
  const auto& mesh = problem.mesh();
  std::vector<char> mesh_bnd(mesh.vertex_count(), 0);
  for (int v : mesh.boundary_nodes) mesh_bnd[v] = 1;
  SchwarzResult res;
  c.lattice_to_mesh(x);
  std::vector<double> sol;
  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    const CompositeField before = x;
    for (int b : cfg.box_order) {
      auto vals = c.read_box(x, b);
      const auto cur = vals;
      const auto st = fd[b].solver->solve(fd[b].rhs, vals, cfg.tol_linear, cfg.max_linear);
      if (report) report->mg_iterations.push_back(st.iterations);
      for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = (1.0 - omega) * cur[i] + omega * vals[i];
      c.write_box_interior(x, b, vals);
    }
    c.lattice_to_mesh(x);
    const auto st = fem.solve(x.mesh, sol, cfg.tol_linear, cfg.max_linear);
    if (report) report->ilu_iterations.push_back(st.iterations);
    for (std::size_t v = 0; v < sol.size(); ++v)
      if (!mesh_bnd[v]) x.mesh[v] = (1.0 - omega) * x.mesh[v] + omega * sol[v];
    c.mesh_to_lattice(x);
    res.sweeps = sweep;
    res.last_change = relative_change(c, before, x);
    if (res.last_change <= cfg.tol_dd) {
      res.converged = true;
      break;
    }
  }
  if (report) report->sweep_counts.push_back(res.sweeps);
  return res;
}

void set_outer_boundary(const HybridProblem& problem, CompositeField& x, const ScalarFunction& f) {
  const auto& lat = problem.partition().lattice();
  const int N = lat.intervals();
  for (int k = 0; k <= N; ++k)
    for (int j = 0; j <= N; ++j)
      for (int i = 0; i <= N; ++i)
        if (lat.on_outer_boundary(i, j, k)) x.lattice[lat.index(i, j, k)] = f ? f(lat.point(i, j, k)) : 0.0;
}

}  // namespace

SchwarzResult solve_psi(const HybridProblem& problem, const SolverConfig& config, CompositeField& psi,
                        SolveReport* report) {
  config.validate();
  const auto& part = problem.partition();
  const auto& coul = problem.coulomb();
  const auto& params = problem.params();
  const auto& g = config.boundary_u;
  set_outer_boundary(problem, psi, [&](const Vec3& r) { return (g ? g(r) : 0.0) - coul.G(r); });
  std::vector<FdBox> fd(6);
  for (int b = 0; b < 6; ++b) {
    const auto grid = part.grid(b);
    fd[b].solver = std::make_unique<FdBoxSolver>(grid, params.eps_s, std::vector<double>{});
    fd[b].rhs.assign(grid.size(), 0.0);
  }
  FemBox fem(assemble_psi_system(problem.space(), coul, params));
  auto res = schwarz(problem, config, config.omega_psi, fd, fem, psi, report);
  if (report) {
    report->psi_sweeps = res.sweeps;
    report->psi_converged = res.converged;
  }
  return res;
}

SchwarzResult solve_direction(const HybridProblem& problem, const SolverConfig& config, const CompositeField& U,
                              const CompositeField& phi, const CompositeField* S, CompositeField& p,
                              SolveReport* report) {
  config.validate();
  const auto& part = problem.partition();
  const auto& lat = part.lattice();
  const auto& params = problem.params();
  set_outer_boundary(problem, p, {});
  std::vector<FdBox> fd(6);
  for (int b = 0; b < 6; ++b) {
    const auto grid = part.grid(b);
    const auto& box = part.box(b);
    std::vector<double> reaction(grid.size(), 0.0);
    auto& rhs = fd[b].rhs;
    rhs = discrete_laplacian(lat, phi.lattice, box);
    for (int k = 0; k < grid.nz(); ++k)
      for (int j = 0; j < grid.ny(); ++j)
        for (int i = 0; i < grid.nx(); ++i) {
          const auto gi = grid.index(i, j, k);
          const auto L = lat.index(box.lo[0] + i, box.lo[1] + j, box.lo[2] + k);
          const double w = U.lattice[L] + phi.lattice[L];
          if (!std::isfinite(w)) throw SolverError("direction: non-finite potential on an outer box");
          const auto rc = reaction_coeffs(w, params);
          reaction[gi] = rc.nl_prime;
          rhs[gi] = params.eps_s * rhs[gi] - rc.nl + (S ? S->lattice[L] : 0.0);
        }
    fd[b].solver = std::make_unique<FdBoxSolver>(grid, params.eps_s, std::move(reaction));
  }
  std::vector<double> w(problem.mesh().vertex_count());
  for (std::size_t v = 0; v < w.size(); ++v) w[v] = U.mesh[v] + phi.mesh[v];
  FemBox fem(assemble_direction_system(problem.space(), w, phi.mesh, params,
                                       S ? std::span<const double>(S->mesh) : std::span<const double>{}));
  return schwarz(problem, config, config.omega_p, fd, fem, p, report);
}

SmpbeSolution solve_smpbe(const HybridProblem& problem, const SolverConfig& config) {
  config.validate();
  SmpbeSolution out;
  auto& rep = out.report;
  rep.lattice_points = problem.partition().lattice().size();
  rep.mesh_nodes = problem.mesh().vertex_count();
  rep.mesh_tets = problem.mesh().tet_count();
  const auto& c = problem.coupling();
  const auto& G = problem.G();

  auto t0 = Clock::now();
  out.psi = problem.zeros();
  const auto pres = solve_psi(problem, config, out.psi, &rep);
  rep.seconds_psi = seconds_since(t0);
  if (!pres.converged) {
    std::ostringstream os;
    os << "Psi iteration stopped after " << pres.sweeps << " sweeps with relative change " << pres.last_change;
    rep.message = os.str();
  }

  CompositeField U = problem.zeros();
  for (std::size_t i = 0; i < U.lattice.size(); ++i) U.lattice[i] = G.lattice[i] + out.psi.lattice[i];
  for (std::size_t i = 0; i < U.mesh.size(); ++i) U.mesh[i] = G.mesh[i] + out.psi.mesh[i];
  std::optional<CompositeField> S;
  if (config.solvent_source) {
    S = problem.sample(config.solvent_source);
    for (auto& s : S->lattice)
      if (!std::isfinite(s)) s = 0.0;
    for (auto& s : S->mesh)
      if (!std::isfinite(s)) s = 0.0;
  }
  const CompositeField* Sp = S ? &*S : nullptr;

  t0 = Clock::now();
  EnergyFunctional J(c, problem.space(), problem.params(), U, Sp);
  out.phi = problem.zeros();
  bool newton_ok = config.max_newton == 0;
  const bool linear = problem.params().kappa2 == 0.0 && !Sp;
  if (linear) newton_ok = true;
  for (int k = 0; k < config.max_newton && !linear; ++k) {
    CompositeField p = problem.zeros();
    const auto dres = solve_direction(problem, config, U, out.phi, Sp, p, &rep);
    NewtonStep step;
    step.sweeps = dres.sweeps;
    const double g0 = J.norm(J.gradient(out.phi));
    double lambda = 1.0;
    bool accepted = false;
    CompositeField d = p;
    for (int halv = 0; halv <= config.max_halvings; ++halv) {
      for (std::size_t i = 0; i < d.lattice.size(); ++i) d.lattice[i] = lambda * p.lattice[i];
      for (std::size_t i = 0; i < d.mesh.size(); ++i) d.mesh[i] = lambda * p.mesh[i];
      step.halvings = halv;
      if (k == 0 && config.first_direction_start) {
        accepted = true;
        break;
      }
      if (J.delta(out.phi, d) <= 0.0) {
        accepted = true;
        step.accepted_by_energy = true;
        break;
      }
      CompositeField trial = out.phi;
      for (std::size_t i = 0; i < d.lattice.size(); ++i) trial.lattice[i] += d.lattice[i];
      for (std::size_t i = 0; i < d.mesh.size(); ++i) trial.mesh[i] += d.mesh[i];
      if (J.norm(J.gradient(trial)) <= g0) {
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      std::ostringstream os;
      os << "line search failed at Newton iteration " << k + 1 << " after " << config.max_halvings << " halvings";
      rep.message = os.str();
      rep.newton.push_back(step);
      break;
    }
    double upd = 0.0;
    for (std::size_t i = 0; i < d.lattice.size(); ++i) {
      out.phi.lattice[i] += d.lattice[i];
      upd = std::max(upd, std::abs(d.lattice[i]));
    }
    for (std::size_t i = 0; i < d.mesh.size(); ++i) {
      out.phi.mesh[i] += d.mesh[i];
      upd = std::max(upd, std::abs(d.mesh[i]));
    }
    step.lambda = lambda;
    step.update_norm = upd;
    step.J = J.value(out.phi);
    step.J_prime_norm = J.norm(J.gradient(out.phi));
    rep.newton.push_back(step);
    const bool done = config.gradient_stop ? step.J_prime_norm < config.tol_newton : upd <= config.tol_newton;
    if (done) {
      newton_ok = true;
      break;
    }
  }
  rep.seconds_newton = seconds_since(t0);
  if (!newton_ok && rep.message.empty()) rep.message = "Newton iteration limit reached";
  rep.converged = newton_ok && pres.converged;

  out.u = problem.zeros();
  for (std::size_t i = 0; i < U.lattice.size(); ++i) out.u.lattice[i] = U.lattice[i] + out.phi.lattice[i];
  for (std::size_t i = 0; i < U.mesh.size(); ++i) out.u.mesh[i] = U.mesh[i] + out.phi.mesh[i];
  return out;
}

}  // namespace smpbe
