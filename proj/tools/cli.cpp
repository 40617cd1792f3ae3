#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>

#include "smpbe/analysis.hpp"
#include "smpbe/error.hpp"

namespace smpbe::cli {

Scenario parse_scenario(const std::string& s) {
  if (s == "born") return Scenario::Born;
  if (s == "dipole") return Scenario::Dipole;
  if (s == "manufactured") return Scenario::Manufactured;
  if (s == "molecule") return Scenario::Molecule;
  throw InputError("unknown scenario '" + s + "' (born | dipole | manufactured | molecule)");
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Born: return "born";
    case Scenario::Dipole: return "dipole";
    case Scenario::Manufactured: return "manufactured";
    case Scenario::Molecule: return "molecule";
  }
  return "?";
}

Format parse_format(const std::string& s) {
  if (s == "csv") return Format::Csv;
  if (s == "vtk") return Format::Vtk;
  throw InputError("unsupported format '" + s + "' (csv | vtk)");
}

Boundary parse_boundary(const std::string& s) {
  if (s == "zero") return Boundary::Zero;
  if (s == "analytic") return Boundary::Analytic;
  throw InputError("unknown boundary '" + s + "' (zero | analytic)");
}

ScanRange parse_scan(const std::string& s) {
  ScanRange r;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  std::string rest;
  if (!(in >> r.start >> c1 >> r.step >> c2 >> r.end) || c1 != ':' || c2 != ':' || (in >> rest)) {
    throw InputError("--is-scan expects start:step:end, got '" + s + "'");
  }
  xi_grid(r.start, r.step, r.end);
  return r;
}

void RunSpec::validate() const {
  if (scenario == Scenario::Molecule && pqr.empty()) throw InputError("molecule scenario requires --pqr");
  if (!mesh.empty() && scenario != Scenario::Molecule) throw InputError("--mesh is only used by the molecule scenario");
  if ((!receptor.empty() || !ligand.empty()) && (scenario != Scenario::Molecule || receptor.empty() || ligand.empty()))
    throw InputError("--receptor and --ligand go together with the molecule scenario");
  if (!receptor.empty() && !mesh.empty()) throw InputError("binding runs build their meshes; --mesh is not supported");
  if (is_scan && scenario != Scenario::Molecule) throw InputError("--is-scan is only used by the molecule scenario");
  if (boundary == Boundary::Analytic && (scenario == Scenario::Dipole || scenario == Scenario::Molecule))
    throw InputError("an analytic boundary exists only for a single ion (born, manufactured)");
  if (!(margin > 0.0)) throw InputError("--margin must be positive");
  if (out.empty()) throw InputError("--out must not be empty");
  if (!(I_s >= 0.0)) throw InputError("--is must be non-negative");
  SolverConfig c;
  c.omega_psi = omega_psi;
  c.omega_p = omega_p;
  c.tol_dd = tol_dd;
  c.tol_newton = tol_newton;
  c.tol_linear = tol_linear;
  c.validate();
}

std::optional<RunSpec> parse_command_line(int argc, const char* const* argv, int& exit_code) {
  RunSpec s;
  std::string scenario = "born", format = "csv", boundary, scan;
  int n = 0, m = 0, mu = 0;

  CLI::App app{"Size-modified Poisson-Boltzmann hybrid solver"};
  app.set_config("--config", "", "key = value file; command-line flags take precedence");
  app.add_option("scenario,--scenario", scenario, "born | dipole | manufactured | molecule")->capture_default_str();
  app.add_option("--pqr", s.pqr, "PQR file (molecule scenario, or the ion of the manufactured scenario)");
  app.add_option("--mesh", s.mesh, "central-box mesh in smpbe-mesh 1 format");
  app.add_option("--receptor", s.receptor, "receptor PQR for binding energies");
  app.add_option("--ligand", s.ligand, "ligand PQR for binding energies");
  app.add_option("--out", s.out, "output directory")->capture_default_str();
  auto* on = app.add_option("--n", n, "h = |D|/2^n");
  auto* om = app.add_option("--m", m, "tau = 2^m h");
  auto* omu = app.add_option("--mu", mu, "eta = mu |D|/2");
  app.add_option("--omega-psi", s.omega_psi)->capture_default_str();
  app.add_option("--omega-p", s.omega_p)->capture_default_str();
  app.add_option("--lambda", s.lambda, "ion size (A)")->capture_default_str();
  app.add_option("--eps-p", s.eps_p)->capture_default_str();
  app.add_option("--eps-s", s.eps_s)->capture_default_str();
  app.add_option("--is", s.I_s, "ionic strength (mol/L)")->capture_default_str();
  app.add_option("--temp", s.temperature, "temperature (K)")->capture_default_str();
  app.add_option("--tol-dd", s.tol_dd)->capture_default_str();
  app.add_option("--tol-newton", s.tol_newton)->capture_default_str();
  app.add_option("--tol-linear", s.tol_linear)->capture_default_str();
  app.add_option("--margin", s.margin, "box margin around the molecule (A)")->capture_default_str();
  app.add_flag("--pbe", s.pbe, "classical PBE (Lambda = 0)");
  app.add_option("--is-scan", scan, "start:step:end in xi = ln I_s");
  app.add_option("--boundary", boundary, "zero | analytic");
  app.add_option("--format", format, "csv | vtk")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    exit_code = app.exit(e);
    return std::nullopt;
  }
  s.scenario = parse_scenario(scenario);
  s.format = parse_format(format);
  if (!boundary.empty()) s.boundary = parse_boundary(boundary);
  if (!scan.empty()) s.is_scan = parse_scan(scan);
  if (on->count()) s.n = n;
  if (om->count()) s.m = m;
  if (omu->count()) s.mu = mu;
  s.validate();
  return s;
}

namespace {

struct Setup {
  ChargeSystem charges;
  Cube D;
  int n = 0, m = 0, mu = 0;
  bool analytic = false;  // Born boundary and manufactured source
};

struct Solved {
  std::unique_ptr<HybridProblem> problem;
  SmpbeSolution sol;
  ModelParams params;
  double error = std::numeric_limits<double>::quiet_NaN();
  double dE = 0.0;
  double seconds = 0.0;
};

ModelParams params_for(const RunSpec& s, double I_s) {
  return ModelParams::make(s.eps_p, s.eps_s, s.pbe ? 0.0 : s.lambda, s.temperature, I_s);
}

SolverConfig config_for(const RunSpec& s) {
  SolverConfig c;
  c.omega_psi = s.omega_psi;
  c.omega_p = s.omega_p;
  c.tol_dd = s.tol_dd;
  c.tol_newton = s.tol_newton;
  c.tol_linear = s.tol_linear;
  if (s.scenario == Scenario::Molecule) c.first_direction_start = true;
  return c;
}

Setup setup_for(const RunSpec& s) {
  Setup st;
  switch (s.scenario) {
    case Scenario::Born:
    case Scenario::Manufactured:
      if (!s.pqr.empty()) {
        st.charges = read_pqr_file(s.pqr);
        if (st.charges.size() != 1) throw InputError("the manufactured ion needs a PQR with exactly one atom");
        st.D = bounding_box_for(st.charges, st.charges.atoms()[0].radius);
      } else {
        st.charges = ChargeSystem({Atom{{0, 0, 0}, 1.0, 1.0}});
        st.D = {{-2, -2, -2}, 4};
      }
      st.n = s.n.value_or(4);
      st.m = s.m.value_or(st.n - 2);
      st.mu = s.mu.value_or(2);
      st.analytic = s.boundary != Boundary::Zero;
      break;
    case Scenario::Dipole:
      st.charges = ChargeSystem({Atom{{1, 0, 0}, 3.0, 1.5}, Atom{{-1, 0, 0}, -3.0, 1.5}});
      st.D = {{-4, -4, -4}, 8};
      st.n = s.n.value_or(5);
      st.m = s.m.value_or(st.n - 3);
      st.mu = s.mu.value_or(2);
      break;
    case Scenario::Molecule:
      st.charges = read_pqr_file(s.pqr);
      st.D = bounding_box_for(st.charges, s.margin);
      st.n = s.n.value_or(3);
      st.m = s.m.value_or(2);
      st.mu = s.mu.value_or(4);
      break;
  }
  return st;
}

Solved solve(const RunSpec& s, const ChargeSystem& charges, const Cube& D, int n, int m, int mu, bool analytic,
             double I_s, const std::string& mesh_file) {
  const auto t0 = std::chrono::steady_clock::now();
  Solved out;
  out.params = params_for(s, I_s);
  auto part = build_partition(D, n, m, mu);
  InterfaceMesh mesh;
  if (mesh_file.empty()) {
    mesh = build_central_mesh(part, LevelSetGeometry::from_charges(charges));
  } else {
    mesh = read_mesh_file(mesh_file);
    attach_to_partition(mesh, part);
  }
  out.problem = std::make_unique<HybridProblem>(std::move(part), std::move(mesh), charges, out.params);
  const double mesh_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  SolverConfig cfg = config_for(s);
  const ModelParams p = out.params;
  if (analytic) {
    auto U = [charges, p](const Vec3& r) { return born_analytic(r, charges, p); };
    cfg.boundary_u = U;
    cfg.solvent_source = [U, p](const Vec3& r) { return reaction_nl(U(r), p); };
  }
  out.sol = solve_smpbe(*out.problem, cfg);
  out.sol.report.seconds_mesh = mesh_seconds;
  if (analytic) out.error = rel_l2_error(*out.problem, out.sol.u, cfg.boundary_u);
  out.dE = solvation_energy(*out.problem, out.sol.psi, out.sol.phi).dE;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write " + p.string());
  return f;
}

void report_solve(std::ostream& r, const std::string& label, const Solved& s) {
  const auto& rep = s.sol.report;
  const auto& part = s.problem->partition();
  r << "[" << label << "]\n";
  r << "n = " << part.n() << "\nm = " << part.m() << "\nmu = " << part.mu() << "\nh = " << fmt(part.h()) << '\n';
  r << "tau = " << fmt(part.tau()) << "\neta = " << fmt(part.eta()) << '\n';
  r << "omega_lo = " << fmt(part.Omega().lo.x) << "," << fmt(part.Omega().lo.y) << "," << fmt(part.Omega().lo.z)
    << "\nomega_side = " << fmt(part.Omega().side) << '\n';
  r << "I_s = " << fmt(s.params.I_s) << "\nalpha = " << fmt(s.params.alpha) << "\nkappa2 = " << fmt(s.params.kappa2)
    << "\nM = " << fmt(s.params.M) << '\n';
  r << "lattice_points = " << rep.lattice_points << "\nmesh_nodes = " << rep.mesh_nodes
    << "\nmesh_tets = " << rep.mesh_tets << '\n';
  r << "converged = " << (rep.converged ? "true" : "false") << '\n';
  if (!rep.message.empty()) r << "message = " << rep.message << '\n';
  r << "psi_sweeps = " << rep.psi_sweeps << "\npsi_converged = " << (rep.psi_converged ? "true" : "false") << '\n';
  r << "pcg_mg_avg = " << fmt(rep.mean_mg()) << "\npcg_ilu_avg = " << fmt(rep.mean_ilu())
    << "\nsweep_avg = " << fmt(rep.mean_sweeps()) << "\nnewton_iterations = " << rep.newton.size() << '\n';
  for (std::size_t k = 0; k < rep.newton.size(); ++k) {
    const auto& st = rep.newton[k];
    r << "newton." << k + 1 << " = lambda " << fmt(st.lambda) << " halvings " << st.halvings << " sweeps " << st.sweeps
      << " J " << fmt(st.J) << " |J'| " << fmt(st.J_prime_norm) << " update " << fmt(st.update_norm)
      << (st.accepted_by_energy ? " energy" : " gradient") << '\n';
  }
  if (!std::isnan(s.error)) r << "rel_l2_error = " << fmt(s.error) << '\n';
  r << "dE_kcal_per_mol = " << fmt(s.dE) << '\n';
  r << "seconds_mesh = " << fmt(rep.seconds_mesh) << "\nseconds_psi = " << fmt(rep.seconds_psi)
    << "\nseconds_newton = " << fmt(rep.seconds_newton) << "\nseconds_total = " << fmt(s.seconds) << '\n';
  r << "table_row = " << (std::isnan(s.error) ? std::string("-") : fmt(s.error)) << " " << fmt(rep.mean_mg()) << " "
    << fmt(rep.mean_ilu()) << " " << fmt(rep.mean_sweeps()) << " " << rep.newton.size() << "\n\n";
}

double write_outputs(const RunSpec& s, const Solved& main, const std::filesystem::path& dir) {
  const auto& prob = *main.problem;
  const auto& lat = prob.partition().lattice();
  const auto& u = main.sol.u;
  if (s.format == Format::Csv) {
    auto f = open_out(dir / "field.csv");
    write_field_csv(f, prob, u);
    auto g = open_out(dir / "efield.csv");
    write_gradient_csv(g, lat, negative_gradient(lat, u.lattice));
  } else {
    auto f = open_out(dir / "field.vtk");
    write_lattice_vtk(f, lat, u.lattice);
    auto g = open_out(dir / "mesh.vtk");
    write_mesh_vtk(g, prob.mesh(), u.mesh);
  }

  const auto model = s.pbe ? IonModel::PBE : IonModel::SMPBE;
  const auto geom = LevelSetGeometry::from_charges(prob.coulomb().charges());
  double cmax = 0.0;
  auto solvent = [&](const Vec3& p) { return geom.empty() || geom.phi(p) > 0.0; };
  auto c = open_out(dir / "concentration.csv");
  c << "x,y,z,c_na,c_cl\n";
  int kz = static_cast<int>(std::lround(-lat.origin().z / lat.h()));
  kz = std::clamp(kz, 0, lat.intervals());
  for (std::size_t L = 0; L < lat.size(); ++L) {
    const Vec3 p = lat.point(L);
    if (!solvent(p) || !std::isfinite(u.lattice[L])) continue;
    const auto cc = concentrations(u.lattice[L], main.params, model);
    cmax = std::max({cmax, cc.na, cc.cl});
    if (lat.ijk(L)[2] == kz)
      c << fmt(p.x) << ',' << fmt(p.y) << ',' << fmt(p.z) << ',' << fmt(cc.na) << ',' << fmt(cc.cl) << '\n';
  }
  const auto& mesh = prob.mesh();
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    if (mesh.lattice_link[v] >= 0 || !solvent(mesh.vertices[v]) || !std::isfinite(u.mesh[v])) continue;
    const auto cc = concentrations(u.mesh[v], main.params, model);
    cmax = std::max({cmax, cc.na, cc.cl});
  }
  return cmax;
}

}  // namespace

int run(const RunSpec& s, std::ostream& log) {
  s.validate();
  const std::filesystem::path dir(s.out);
  std::filesystem::create_directories(dir);
  const Setup st = setup_for(s);

  std::ostringstream rep;
  rep << "scenario = " << to_string(s.scenario) << '\n';
  rep << "eps_p = " << fmt(s.eps_p) << "\neps_s = " << fmt(s.eps_s) << "\nLambda = " << fmt(s.pbe ? 0.0 : s.lambda)
      << "\nT = " << fmt(s.temperature) << "\nmodel = " << (s.pbe ? "pbe" : "smpbe") << '\n';
  rep << "omega_psi = " << fmt(s.omega_psi) << "\nomega_p = " << fmt(s.omega_p) << "\ntol_dd = " << fmt(s.tol_dd)
      << "\ntol_newton = " << fmt(s.tol_newton) << "\ntol_linear = " << fmt(s.tol_linear) << '\n';
  rep << "boundary = " << (st.analytic ? "analytic" : "zero") << "\nsolvent_source = " << (st.analytic ? "analytic" : "none")
      << "\nD_lo = " << fmt(st.D.lo.x) << "," << fmt(st.D.lo.y) << "," << fmt(st.D.lo.z) << "\nD_side = " << fmt(st.D.side)
      << "\natoms = " << st.charges.size() << "\nnet_charge = " << fmt(st.charges.net_charge()) << "\n\n";

  bool ok = true;
  std::ofstream energy = open_out(dir / "energy.csv");
  energy << "label,n,h,I_s,xi,dE_kcal_per_mol,rel_l2_error\n";
  auto record = [&](const std::string& label, const Solved& x) {
    report_solve(rep, label, x);
    energy << label << ',' << x.problem->partition().n() << ',' << fmt(x.problem->partition().h()) << ','
           << fmt(x.params.I_s) << ',' << (x.params.I_s > 0 ? fmt(std::log(x.params.I_s)) : std::string("-inf")) << ','
           << fmt(x.dE) << ',' << (std::isnan(x.error) ? std::string("") : fmt(x.error)) << '\n';
    ok = ok && x.sol.report.converged;
    log << label << ": " << (x.sol.report.converged ? "converged" : "NOT converged") << ", dE = " << fmt(x.dE)
        << " kcal/mol" << (std::isnan(x.error) ? "" : ", rel l2 error = " + fmt(x.error)) << '\n';
  };

  std::optional<Solved> main;
  if (s.scenario == Scenario::Born && st.n > 1 && st.m > 0) {
    Solved coarse = solve(s, st.charges, st.D, st.n - 1, st.m - 1, st.mu, st.analytic, s.I_s, "");
    record("coarse", coarse);
    main = solve(s, st.charges, st.D, st.n, st.m, st.mu, st.analytic, s.I_s, "");
    record("fine", *main);
    if (st.analytic && coarse.error > 0 && main->error > 0)
      rep << "[refinement]\norder = " << fmt(std::log2(coarse.error / main->error)) << "\n\n";
  } else if (s.is_scan) {
    const auto xs = xi_grid(s.is_scan->start, s.is_scan->step, s.is_scan->end);
    std::vector<std::pair<double, double>> pts;
    std::ofstream slope = open_out(dir / "slope.csv");
    ChargeSystem rec, lig;
    if (!s.receptor.empty()) {
      rec = read_pqr_file(s.receptor);
      lig = read_pqr_file(s.ligand);
    }
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const double I = std::exp(xs[j]);
      Solved cx = solve(s, st.charges, st.D, st.n, st.m, st.mu, false, I, s.mesh);
      record("complex." + std::to_string(j), cx);
      double Eb = cx.dE;
      if (!s.receptor.empty()) {
        Solved a = solve(s, rec, st.D, st.n, st.m, st.mu, false, I, "");
        record("receptor." + std::to_string(j), a);
        Solved b = solve(s, lig, st.D, st.n, st.m, st.mu, false, I, "");
        record("ligand." + std::to_string(j), b);
        Eb -= a.dE + b.dE;
      }
      pts.emplace_back(I, Eb);
      main = std::move(cx);
    }
    const auto fit = binding_slope(pts, s.temperature);
    slope << "xi,I_s,E_b_kcal_per_mol,fit\n";
    for (const auto& [I, E] : pts) {
      const double xi = std::log(I);
      slope << fmt(xi) << ',' << fmt(I) << ',' << fmt(E) << ',' << fmt(fit.m * xi + fit.b) << '\n';
    }
    rep << "[slope]\nm = " << fmt(fit.m) << "\nb = " << fmt(fit.b) << "\nm_s = " << fmt(fit.m_s)
        << "\nresidual = " << fmt(fit.residual) << "\n\n";
    log << "slope m = " << fmt(fit.m) << ", scaled slope m_s = " << fmt(fit.m_s) << '\n';
  } else {
    main = solve(s, st.charges, st.D, st.n, st.m, st.mu, st.analytic, s.I_s, s.mesh);
    record("solve", *main);
  }

  const double cmax = write_outputs(s, *main, dir);
  rep << "[concentrations]\nmax_mol_per_L = " << fmt(cmax) << "\nsaturation_mol_per_L = "
      << fmt(s.pbe ? std::numeric_limits<double>::infinity() : saturation_concentration(s.lambda)) << "\n";
  rep << "\nstatus = " << (ok ? "converged" : "diverged") << '\n';
  auto r = open_out(dir / "report.txt");
  r << rep.str();
  log << "max concentration = " << fmt(cmax) << " mol/L; outputs in " << dir.string() << '\n';
  return ok ? 0 : 2;
}

}  // namespace smpbe::cli
