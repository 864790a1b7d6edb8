#include "unravel/run.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "unravel/io.hpp"
#include "unravel/ostensible_engine.hpp"
#include "unravel/parallel.hpp"

namespace unravel {

namespace {

Json conventions() {
  return {{"vectorization", "row-major: res(rho)[d*i+j] = rho(i,j)"},
          {"basis", "index 0 is the excited level"},
          {"reshuffle", "R(d*i+j, d*m+n) = S(d*i+m, d*j+n)"},
          {"eigen_order", "descending, largest component real positive"},
          {"dgs_pairing", "rho = E[phi dual^T], dual started at conj(psi0)"},
          {"dgs_noise_coupling", "kappa = i/sqrt(2); X = (L+L^dag)/sqrt(2), Y = (L-L^dag)/(i sqrt(2))"},
          {"dgs_driving_law", "complementary covariance from Z, R and 4*I; proper part 2*J_+"},
          {"heaviside_at_zero", "1_0^(0) = 0, 1_0^(1) = 1"}};
}

Json tolerances(const RunConfig& cfg) {
  return {{"self_adjoint", cfg.oracle.tol.self_adjoint},
          {"cp", cfg.oracle.tol.cp},
          {"kraus_cutoff", cfg.oracle.tol.kraus_cutoff},
          {"channel_sum", cfg.oracle.tol.channel_sum},
          {"den_tol", kDenTol},
          {"trace_tol", cfg.oracle.trace_tol}};
}

Json policy(const RunConfig& cfg, double c0) {
  const auto& p = cfg.jump.policy;
  return {{"c0", c0},
          {"c0_auto", p.c0_auto},
          {"r_max", p.r_max},
          {"w_max", p.w_max},
          {"sampling", cfg.jump.sampling == JumpSampling::waiting_time ? "waiting_time" : "bernoulli"},
          {"p_max", cfg.jump.p_max},
          {"oracle_clip", cfg.oracle.clip.enabled},
          {"block_size", 512}};
}

std::vector<double> min_choi(const RunConfig& cfg) {
  const FlowReport flow = propagate_flow(cfg.model, cfg.grid, cfg.oracle);
  std::vector<double> out;
  for (const auto& s : flow.choi_spectra) out.push_back(s(s.size() - 1));
  return out;
}

void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << body;
}

struct Stochastic {
  EnsembleEstimate estimate;
  Json diagnostics;
  double c0 = 0.0;
};

Stochastic run_stochastic(const RunConfig& cfg, Engine engine, int workers) {
  Stochastic s;
  if (engine == Engine::jump) {
    JumpRunConfig jc{cfg.n_traj, cfg.seed, cfg.jump, cfg.estimator, cfg.observables, workers};
    const JumpRunResult r = run_jump_ensemble(cfg.model, cfg.psi0, cfg.grid, jc);
    const auto& d = r.diagnostics;
    s.estimate = r.estimate;
    s.c0 = d.c0;
    s.diagnostics = {{"g", d.g},
                     {"max_norm_defect", d.max_norm_defect},
                     {"max_factorization_defect", d.max_factorization_defect},
                     {"total_jumps", d.total_jumps},
                     {"absorbed_paths", d.absorbed_paths},
                     {"clipped_evaluations", d.clipped_evaluations},
                     {"capped_rates", d.capped_rates}};
  } else {
    OstensibleRunConfig oc{cfg.n_traj, cfg.seed, cfg.jump.policy, cfg.observables, workers};
    const OstensibleRunResult r = run_ostensible_ensemble(cfg.model, cfg.psi0, cfg.grid, oc);
    s.estimate = r.estimate;
    s.c0 = r.c0;
    s.diagnostics = {{"total_jumps", r.total_jumps},
                     {"clipped_evaluations", r.clipped_evaluations},
                     {"horizon_warning", r.horizon_warning}};
  }
  return s;
}

}  // namespace

RunOutcome execute_run(const RunConfig& cfg, const std::string& out_dir, int workers) {
  const auto start = std::chrono::steady_clock::now();
  if (workers <= 0) workers = worker_count();
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  RunOutcome outcome;
  Json& m = outcome.manifest;
  m["version"] = kVersion;
  m["engine"] = to_string(cfg.engine);
  m["config"] = cfg.source;
  m["config_hash"] = git_blob_hash(cfg.source.dump());
  m["seed"] = cfg.seed;
  m["grid"] = {{"t0", cfg.grid.t0}, {"t_final", cfg.grid.t_final}, {"n_steps", cfg.grid.n_steps}};
  m["observables"] = cfg.observable_names;
  m["conventions"] = conventions();
  m["tolerances"] = tolerances(cfg);

  const auto csv = dir / (cfg.prefix + ".csv");
  std::ostringstream body;
  switch (cfg.engine) {
    case Engine::oracle:
    case Engine::check_cp: {
      const std::vector<CMatrix> states =
          integrate_master(cfg.model, cfg.psi0 * cfg.psi0.adjoint(), cfg.grid, cfg.oracle);
      write_oracle_csv(body, cfg.grid.times(), states, cfg.observable_names, cfg.observables,
                       min_choi(cfg));
      m["policy"] = policy(cfg, cfg.jump.policy.c0);
      break;
    }
    case Engine::jump:
    case Engine::ostensible: {
      const Stochastic s = run_stochastic(cfg, cfg.engine, workers);
      write_estimate_csv(body, s.estimate, cfg.observable_names);
      m["estimator"] = to_string(s.estimate.kind);
      m["n_traj"] = cfg.n_traj;
      m["policy"] = policy(cfg, s.c0);
      m["diagnostics"] = s.diagnostics;
      break;
    }
    case Engine::compare: {
      const Stochastic s = run_stochastic(cfg, cfg.compare_with, workers);
      const std::vector<CMatrix> states =
          integrate_master(cfg.model, cfg.psi0 * cfg.psi0.adjoint(), cfg.grid, cfg.oracle);
      write_estimate_csv(body, s.estimate, cfg.observable_names);
      std::ostringstream cmp;
      write_compare_csv(cmp, s.estimate, states, cfg.observable_names);
      const auto path = dir / (cfg.prefix + "_compare.csv");
      write_file(path, cmp.str());
      outcome.files.push_back(path.string());
      std::size_t inside = 0, total = 0;
      for (std::size_t k = 0; k < states.size(); ++k)
        for (std::size_t o = 0; o < cfg.observables.size(); ++o, ++total)
          inside += std::abs(z_score(s.estimate.obs_mean(k, o),
                                     expectation(states[k], cfg.observables[o]),
                                     s.estimate.obs_se(k, o))) <= 2.0;
      m["compare"] = {{"engine", to_string(cfg.compare_with)},
                      {"fraction_within_2se", double(inside) / double(total)}};
      m["estimator"] = to_string(s.estimate.kind);
      m["n_traj"] = cfg.n_traj;
      m["policy"] = policy(cfg, s.c0);
      m["diagnostics"] = s.diagnostics;
      break;
    }
    case Engine::dgs: {
      const CMatrix h = cfg.system_hamiltonian;
      DgsRunConfig dc{cfg.n_traj, cfg.seed, cfg.driving, cfg.observables, workers};
      const DgsRunResult r =
          run_dgs_ensemble(*cfg.environment, [h](double) { return h; }, cfg.psi0, cfg.grid, dc);
      write_estimate_csv(body, r.estimate, cfg.observable_names);
      Json aug;
      try {
        const AugmentedCovariance cov = build_augmented_covariance(
            assemble_kernel_matrix(*cfg.environment, cfg.grid), cfg.grid);
        aug = {{"psd", true}, {"min_eigenvalue", cov.min_eigenvalue},
               {"max_diagonal", cov.max_diagonal}, {"epsilon", cov.epsilon},
               {"floored", cov.floored}};
      } catch (const CovarianceNotPsd& e) {
        aug = {{"psd", false}, {"min_eigenvalue", e.min_eigenvalue},
               {"max_diagonal", e.max_diagonal}};
      }
      m["estimator"] = "dgs";
      m["n_traj"] = cfg.n_traj;
      m["diagnostics"] = {
          {"driving_rank", r.rank},
          {"proper_trace", r.proper_trace},
          {"discretization", cfg.driving.discretization == NoiseDiscretization::cell_average
                                 ? "cell_average"
                                 : "point"},
          {"augmented_covariance", aug}};
      break;
    }
  }
  write_file(csv, body.str());
  outcome.files.insert(outcome.files.begin(), csv.string());
  m["outputs"] = outcome.files;
  m["workers"] = workers;
  m["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto manifest = dir / (cfg.prefix + "_manifest.json");
  write_file(manifest, m.dump(2) + "\n");
  outcome.files.push_back(manifest.string());
  return outcome;
}

CpReport check_cp(const RunConfig& cfg) {
  if (cfg.engine == Engine::dgs) throw ConfigError("check-cp needs a master-equation model");
  OracleOptions opt = cfg.oracle;
  const FlowReport flow = propagate_flow(cfg.model, cfg.grid, opt);
  CpReport r;
  r.times = flow.times;
  for (std::size_t k = 0; k < flow.times.size(); ++k) {
    r.min_choi.push_back(flow.choi_spectra[k](flow.choi_spectra[k].size() - 1));
    r.cp.push_back(flow.cp_flags[k]);
    r.couplings.push_back(evaluate_couplings(cfg.model, flow.times[k], opt.clip));
  }
  return r;
}

void write_cp_report(std::ostream& out, const CpReport& r) {
  out << "t,min_choi,cp";
  if (!r.couplings.empty())
    for (std::size_t l = 0; l < r.couplings.front().size(); ++l) out << ",w" << l;
  out << '\n';
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out << format_number(r.times[k]) << ',' << format_number(r.min_choi[k]) << ','
        << (r.cp[k] ? 1 : 0);
    for (double w : r.couplings[k]) out << ',' << format_number(w);
    out << '\n';
  }
}

}  // namespace unravel
