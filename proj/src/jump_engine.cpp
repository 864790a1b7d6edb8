#include "unravel/jump_engine.hpp"

#include <algorithm>
#include <cmath>

#include "coefficient_table.hpp"
#include "unravel/parallel.hpp"

namespace unravel {

Rates choose_rates(const std::vector<double>& w, const RatePolicy& policy) {
  Rates out;
  double wmin = 0.0;
  for (double v : w) wmin = std::min(wmin, v);
  out.c = std::max(0.0, -wmin) + policy.c0;
  out.r.resize(w.size());
  for (std::size_t l = 0; l < w.size(); ++l) {
    out.r[l] = std::min(w[l] + out.c, policy.r_max);
    if (out.r[l] < 0.0) throw NumericalError("negative jump rate");
  }
  return out;
}

CompletedChannelSet complete_channels(const std::vector<Channel>& channels, Index d,
                                      const std::vector<CMatrix>& explicit_ops, double uplift) {
  if (channels.empty()) throw ConfigError("channel completion needs at least one channel");
  CompletedChannelSet set;
  std::vector<CMatrix> ops;
  for (const auto& c : channels) {
    set.channels.push_back({c.op, c.coupling, false});
    ops.push_back(c.op);
  }
  const auto sum = check_channel_sum(ops);
  if (sum.proportional && uplift == 0.0) {
    set.g = sum.g;
    return set;
  }
  auto zero = [](double) { return 0.0; };
  if (!explicit_ops.empty()) {
    for (const auto& m : explicit_ops) {
      set.channels.push_back({m, zero, true});
      ops.push_back(m);
    }
    const auto full = check_channel_sum(ops);
    if (!full.proportional) throw ConfigError("completion operators do not complete the set");
    set.g = full.g;
    return set;
  }
  set.g = sum.g + uplift;
  const CMatrix def = sum.deficiency + uplift * CMatrix::Identity(d, d);
  const auto es = hermitian_eigensystem(def);
  for (Index k = 0; k < d; ++k) {
    const double lam = es.values(k);
    if (lam <= 1e-12) continue;
    const CVector u = es.vectors.col(k);
    set.channels.push_back({CMatrix(std::sqrt(lam) * u * u.adjoint()), zero, true});
  }
  return set;
}

CompletedChannelSet complete_channels(const CanonicalModel& m) {
  return complete_channels(m.channels, m.dim, m.completion);
}

namespace {

// Rates, couplings and Hamiltonians shared by all trajectories of a run.
struct RunTable {
  TimeGrid grid;
  int nch = 0;
  double g = 0.0;
  double c0 = 0.0;
  std::vector<double> w, r;     // half grid, [j * nch + l]
  std::vector<double> cum_c;    // int_0^t c on the grid
  std::vector<CMatrix> hamiltonian;  // half grid
  MatrixFunction h_fn;
  std::size_t clipped = 0;
  std::size_t capped = 0;
};

RunTable build_table(const CompletedChannelSet& set, const MatrixFunction& h,
                     const TimeGrid& grid, const RatePolicy& policy) {
  RunTable tab;
  tab.grid = grid;
  tab.nch = int(set.channels.size());
  tab.g = set.g;
  tab.h_fn = h;
  std::vector<ScalarFunction> couplings;
  for (const auto& c : set.channels) couplings.push_back(c.coupling);
  const auto cw = detail::tabulate_couplings(couplings, grid, {true, policy.w_max});
  tab.clipped = cw.clipped;
  const int n_half = 2 * grid.n_steps + 1;
  RatePolicy pol = policy;
  if (policy.c0_auto) {
    double wmax = 0.0;
    for (double v : cw.w) wmax = std::max(wmax, std::abs(v));
    pol.c0 = 0.5 * wmax;
  }
  tab.c0 = pol.c0;
  tab.w = cw.w;
  tab.r.resize(tab.w.size());
  std::vector<double> c(n_half);
  std::vector<double> wj(tab.nch);
  for (int j = 0; j < n_half; ++j) {
    for (int l = 0; l < tab.nch; ++l) wj[l] = cw.at(j, l);
    const Rates rates = choose_rates(wj, pol);
    c[j] = rates.c;
    for (int l = 0; l < tab.nch; ++l) {
      tab.r[std::size_t(j) * tab.nch + l] = rates.r[l];
      if (rates.r[l] < wj[l] + rates.c) ++tab.capped;
    }
    const double t = grid.t0 + (grid.t_final - grid.t0) * double(j) / double(n_half - 1);
    tab.hamiltonian.push_back(h(t));
  }
  tab.cum_c.assign(grid.size(), 0.0);
  const double dt = grid.dt();
  for (int k = 0; k < grid.n_steps; ++k)
    tab.cum_c[k + 1] =
        tab.cum_c[k] + dt / 6.0 * (c[2 * k] + 4.0 * c[2 * k + 1] + c[2 * k + 2]);
  return tab;
}

template <int D>
using Vec = Eigen::Matrix<Complex, D, 1>;
template <int D>
using Mat = Eigen::Matrix<Complex, D, D>;

template <int D>
class JumpKernel {
 public:
  JumpKernel(const RunTable& tab, const CompletedChannelSet& set, const JumpOptions& opt,
             Index dim)
      : tab_(tab), opt_(opt), dim_(dim) {
    for (const auto& c : set.channels) {
      ops_.push_back(c.op);
      ldl_.push_back(c.op.adjoint() * c.op);
    }
    for (const auto& h : tab.hamiltonian) h_.push_back(h);
    for (auto& s : scratch_) {
      s.w.resize(tab.nch);
      s.r.resize(tab.nch);
      s.h.resize(dim, dim);
    }
    lpsi_.resize(dim);
  }

  struct Coeffs {
    const Mat<D>* h;
    const double* w;
    const double* r;
  };

  struct State {
    Vec<D> psi;
    double lam = 0.0;
    double lnmu = 0.0;
  };

  // sink(k, psi, mu, jumps, lnmu), on_jump(t, channel)
  template <typename Sink, typename OnJump>
  void run(const CVector& psi0, StreamRng& rng, Sink&& sink, OnJump&& on_jump) {
    const TimeGrid& grid = tab_.grid;
    const double dt = grid.dt();
    State st;
    st.psi = psi0;
    st.psi.normalize();
    double prod = 1.0;
    int njumps = 0;
    double threshold = rng.exponential();
    bool dead = false;
    sink(0, st.psi, 1.0, 0, 0.0);
    State trial, probe;
    for (int k = 0; k < grid.n_steps; ++k) {
      if (dead) {
        sink(k + 1, st.psi, 0.0, njumps, st.lnmu);
        continue;
      }
      const double ta = grid.time(k);
      const double tb = grid.time(k + 1);
      if (opt_.sampling == JumpSampling::bernoulli) {
        dead = bernoulli_cell(k, st, prod, njumps, rng, on_jump);
      } else {
        double t = ta;
        bool full = true;
        while (true) {
          const double h = tb - t;
          if (h <= 1e-14 * dt) break;
          Coeffs ca, cm, cb;
          if (full) {
            ca = table(2 * k);
            cm = table(2 * k + 1);
            cb = table(2 * k + 2);
          } else {
            ca = interp(k, t, 0);
            cm = interp(k, t + 0.5 * h, 1);
            cb = interp(k, tb, 2);
          }
          rk4(st, h, ca, cm, cb, trial);
          if (trial.lam < threshold) {
            st = trial;
            break;
          }
          const double s = locate(k, t, h, st, trial, threshold, probe);
          st = probe;
          t += s;
          full = false;
          st.psi.normalize();
          const Coeffs at = interp(k, t, 2);
          if (jump(at, st, prod, rng)) {
            ++njumps;
            on_jump(t, last_channel_);
          }
          st.lam = 0.0;
          threshold = rng.exponential();
          if (prod == 0.0) {
            dead = true;
            break;
          }
        }
      }
      st.psi.normalize();
      sink(k + 1, st.psi, dead ? 0.0 : prod * std::exp(st.lnmu), njumps, st.lnmu);
    }
  }

 private:
  Coeffs table(int j) const {
    const std::size_t o = std::size_t(j) * tab_.nch;
    return {&h_[j], &tab_.w[o], &tab_.r[o]};
  }

  Coeffs interp(int k, double t, int slot) {
    const TimeGrid& grid = tab_.grid;
    const double u = std::clamp((t - grid.time(k)) / grid.dt(), 0.0, 1.0);
    double a, b, c;
    detail::lagrange3(u, a, b, c);
    auto& s = scratch_[slot];
    const std::size_t o = std::size_t(2 * k) * tab_.nch;
    const int n = tab_.nch;
    for (int l = 0; l < n; ++l) {
      s.w[l] = a * tab_.w[o + l] + b * tab_.w[o + n + l] + c * tab_.w[o + 2 * n + l];
      s.r[l] = std::max(0.0, a * tab_.r[o + l] + b * tab_.r[o + n + l] +
                                 c * tab_.r[o + 2 * n + l]);
    }
    s.h = tab_.h_fn(t);
    return {&s.h, s.w.data(), s.r.data()};
  }

  void deriv(const Coeffs& c, const State& s, State& out) {
    const double n2 = s.psi.squaredNorm();
    out.psi.noalias() = Complex(0, -1) * (*c.h * s.psi);
    out.lam = 0.0;
    out.lnmu = 0.0;
    for (std::size_t l = 0; l < ops_.size(); ++l) {
      lpsi_.noalias() = ops_[l] * s.psi;
      const double q = lpsi_.squaredNorm() / n2;
      if (c.w[l] != 0.0) out.psi.noalias() -= 0.5 * c.w[l] * (ldl_[l] * s.psi - q * s.psi);
      out.lam += c.r[l] * q;
      out.lnmu += (c.r[l] - c.w[l]) * q;
    }
  }

  void axpy(const State& s, double h, const State& k, State& out) {
    out.psi.noalias() = s.psi + h * k.psi;
    out.lam = s.lam + h * k.lam;
    out.lnmu = s.lnmu + h * k.lnmu;
  }

  void rk4(const State& s, double h, const Coeffs& ca, const Coeffs& cm, const Coeffs& cb,
           State& out) {
    deriv(ca, s, k1_);
    axpy(s, 0.5 * h, k1_, tmp_);
    deriv(cm, tmp_, k2_);
    axpy(s, 0.5 * h, k2_, tmp_);
    deriv(cm, tmp_, k3_);
    axpy(s, h, k3_, tmp_);
    deriv(cb, tmp_, k4_);
    out.psi.noalias() = s.psi + (h / 6.0) * (k1_.psi + 2.0 * k2_.psi + 2.0 * k3_.psi + k4_.psi);
    out.lam = s.lam + (h / 6.0) * (k1_.lam + 2.0 * k2_.lam + 2.0 * k3_.lam + k4_.lam);
    out.lnmu = s.lnmu + (h / 6.0) * (k1_.lnmu + 2.0 * k2_.lnmu + 2.0 * k3_.lnmu + k4_.lnmu);
  }

  // Illinois search for the step length at which the hazard reaches the threshold.
  double locate(int k, double t, double h, const State& st, const State& full,
                double threshold, State& probe) {
    double s_lo = 0.0, f_lo = st.lam - threshold;
    double s_hi = h, f_hi = full.lam - threshold;
    probe = full;
    double s = h;
    int side = 0;
    const double ftol = 1e-13 * std::max(1.0, threshold);
    for (int it = 0; it < 100; ++it) {
      s = s_hi - f_hi * (s_hi - s_lo) / (f_hi - f_lo);
      if (!(s > s_lo && s < s_hi)) s = 0.5 * (s_lo + s_hi);
      const Coeffs ca = interp(k, t, 0);
      const Coeffs cm = interp(k, t + 0.5 * s, 1);
      const Coeffs cb = interp(k, t + s, 2);
      rk4(st, s, ca, cm, cb, probe);
      const double f = probe.lam - threshold;
      if (std::abs(f) <= ftol || s_hi - s_lo <= 1e-15 * tab_.grid.dt()) break;
      if (f < 0.0) {
        s_lo = s;
        f_lo = f;
        if (side == -1) f_hi *= 0.5;
        side = -1;
      } else {
        s_hi = s;
        f_hi = f;
        if (side == 1) f_lo *= 0.5;
        side = 1;
      }
    }
    return s;
  }

  // Applies one jump at the current state; false if no channel can fire.
  bool jump(const Coeffs& c, State& st, double& prod, StreamRng& rng) {
    const std::size_t n = ops_.size();
    weights_.assign(n, 0.0);
    double total = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      lpsi_.noalias() = ops_[l] * st.psi;
      const double nrm = lpsi_.norm();
      if (nrm < 1e-14) continue;
      weights_[l] = c.r[l] * nrm * nrm;
      total += weights_[l];
    }
    if (!(total > 0.0)) return false;
    double u = rng.uniform() * total;
    std::size_t l = 0;
    for (; l + 1 < n; ++l) {
      if (u < weights_[l]) break;
      u -= weights_[l];
    }
    while (weights_[l] == 0.0) l = (l + n - 1) % n;
    lpsi_.noalias() = ops_[l] * st.psi;
    st.psi = lpsi_ / lpsi_.norm();
    prod *= c.w[l] / c.r[l];
    last_channel_ = int(l);
    return true;
  }

  template <typename OnJump>
  bool bernoulli_cell(int k, State& st, double& prod, int& njumps, StreamRng& rng,
                      OnJump&& on_jump) {
    const TimeGrid& grid = tab_.grid;
    const double dt = grid.dt();
    const Coeffs c0 = table(2 * k);
    double p = 0.0;
    for (std::size_t l = 0; l < ops_.size(); ++l)
      p += c0.r[l] * (ops_[l] * st.psi).squaredNorm() * dt;
    const int m = std::max(1, int(std::ceil(p / opt_.p_max)));
    const double h = dt / m;
    State next;
    for (int i = 0; i < m; ++i) {
      const double t = grid.time(k) + i * h;
      Coeffs ca, cm, cb;
      if (m == 1) {
        ca = table(2 * k);
        cm = table(2 * k + 1);
        cb = table(2 * k + 2);
      } else {
        ca = interp(k, t, 0);
        cm = interp(k, t + 0.5 * h, 1);
        cb = interp(k, t + h, 2);
      }
      rk4(st, h, ca, cm, cb, next);
      st = next;
      st.psi.normalize();
      double pj = 0.0;
      for (std::size_t l = 0; l < ops_.size(); ++l)
        pj += cb.r[l] * (ops_[l] * st.psi).squaredNorm() * h;
      if (rng.uniform() < pj && jump(cb, st, prod, rng)) {
        ++njumps;
        on_jump(t + h, last_channel_);
        if (prod == 0.0) return true;
      }
    }
    return false;
  }

  struct Scratch {
    Mat<D> h;
    std::vector<double> w, r;
  };

  const RunTable& tab_;
  JumpOptions opt_;
  Index dim_;
  std::vector<Mat<D>> ops_, ldl_, h_;
  Scratch scratch_[3];
  State k1_, k2_, k3_, k4_, tmp_;
  Vec<D> lpsi_;
  std::vector<double> weights_;
  int last_channel_ = 0;
};

template <int D, typename Body>
void with_kernel(const RunTable& tab, const CompletedChannelSet& set, const JumpOptions& opt,
                 Index dim, Body&& body) {
  JumpKernel<D> kernel(tab, set, opt, dim);
  body(kernel);
}

template <typename Body>
void dispatch(const RunTable& tab, const CompletedChannelSet& set, const JumpOptions& opt,
              Index dim, Body&& body) {
  if (dim == 2)
    with_kernel<2>(tab, set, opt, dim, body);
  else
    with_kernel<Eigen::Dynamic>(tab, set, opt, dim, body);
}

}  // namespace

TrajectoryPath run_trajectory(const CompletedChannelSet& set, const MatrixFunction& h,
                              const CVector& psi0, const TimeGrid& grid,
                              const JumpOptions& opt, StreamRng& rng) {
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw ConfigError("initial state must be normalized");
  TrajectoryPath path;
  path.times = grid.times();
  path.psi.resize(grid.size());
  path.mu.resize(grid.size());
  const Index dim = psi0.size();
  if (set.channels.empty()) {
    // Closed system: plain Schrodinger evolution.
    CompletedChannelSet none;
    RunTable tab = build_table(none, h, grid, opt.policy);
    dispatch(tab, none, opt, dim, [&](auto& kernel) {
      kernel.run(psi0, rng,
                 [&](int k, const auto& psi, double mu, int, double) {
                   path.psi[k] = psi;
                   path.mu[k] = mu;
                 },
                 [&](double, int) {});
    });
    return path;
  }
  RunTable tab = build_table(set, h, grid, opt.policy);
  dispatch(tab, set, opt, dim, [&](auto& kernel) {
    kernel.run(psi0, rng,
               [&](int k, const auto& psi, double mu, int, double) {
                 path.psi[k] = psi;
                 path.mu[k] = mu;
               },
               [&](double t, int l) { path.jumps.push_back({t, l}); });
  });
  return path;
}

EnsembleEstimate estimate_state(const std::vector<TrajectoryPath>& paths, EstimatorKind kind,
                                const std::vector<CMatrix>& observables) {
  if (paths.size() < 2) throw ConfigError("at least two paths are required");
  const auto& first = paths.front();
  const Index d = first.psi.front().size();
  EnsembleAccumulator acc(int(first.times.size()), d,
                          observables.empty() ? default_observables(d) : observables);
  for (const auto& p : paths) {
    if (p.times.size() != first.times.size()) throw ShapeError("paths must share a grid");
    std::size_t j = 0;
    for (std::size_t k = 0; k < p.times.size(); ++k) {
      while (j < p.jumps.size() && p.jumps[j].time <= p.times[k]) ++j;
      acc.add(int(k), p.mu[k], p.psi[k], p.psi[k], int(j));
    }
    acc.finish_path();
  }
  return acc.finalize(kind, first.times);
}

JumpRunResult run_jump_ensemble(const CanonicalModel& m, const CVector& psi0,
                                const TimeGrid& grid, const JumpRunConfig& cfg) {
  if (cfg.n_traj < 2) throw ConfigError("n_traj must be at least 2");
  if (psi0.size() != m.dim) throw ShapeError("initial state dimension mismatch");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw ConfigError("initial state must be normalized");
  const CompletedChannelSet set =
      m.channels.empty() ? CompletedChannelSet{} : complete_channels(m);
  const RunTable tab = build_table(set, m.hamiltonian, grid, cfg.options.policy);
  const auto observables = cfg.observables.empty() ? default_observables(m.dim) : cfg.observables;

  constexpr std::size_t kBlock = 512;
  const std::size_t n_blocks = (cfg.n_traj + kBlock - 1) / kBlock;
  struct Part {
    EnsembleAccumulator acc;
    JumpRunDiagnostics diag;
  };
  std::vector<Part> parts(n_blocks);
  const int workers = cfg.workers > 0 ? cfg.workers : worker_count();

  for_each_block(n_blocks, workers, [&](std::size_t b) {
    Part part{EnsembleAccumulator(grid.size(), m.dim, observables), {}};
    dispatch(tab, set, cfg.options, m.dim, [&](auto& kernel) {
      const std::size_t lo = b * kBlock, hi = std::min(cfg.n_traj, lo + kBlock);
      for (std::size_t i = lo; i < hi; ++i) {
        StreamRng rng(cfg.seed, i);
        double final_mu = 1.0;
        kernel.run(
            psi0, rng,
            [&](int k, const auto& psi, double mu, int jumps, double lnmu) {
              part.diag.max_norm_defect =
                  std::max(part.diag.max_norm_defect, std::abs(psi.norm() - 1.0));
              if (mu != 0.0) {
                const double defect = std::abs(std::expm1(lnmu - tab.g * tab.cum_c[k]));
                part.diag.max_factorization_defect =
                    std::max(part.diag.max_factorization_defect, defect);
              }
              part.acc.add(k, mu, psi, psi, jumps);
              final_mu = mu;
            },
            [&](double, int) { ++part.diag.total_jumps; });
        if (final_mu == 0.0) ++part.diag.absorbed_paths;
        part.acc.finish_path();
      }
    });
    parts[b] = std::move(part);
  });

  Part total = pairwise_reduce(parts, 0, n_blocks, [](Part& a, const Part& b) {
    a.acc.merge(b.acc);
    a.diag.max_norm_defect = std::max(a.diag.max_norm_defect, b.diag.max_norm_defect);
    a.diag.max_factorization_defect =
        std::max(a.diag.max_factorization_defect, b.diag.max_factorization_defect);
    a.diag.total_jumps += b.diag.total_jumps;
    a.diag.absorbed_paths += b.diag.absorbed_paths;
  });
  JumpRunResult res{total.acc.finalize(cfg.estimator, grid.times()), total.diag};
  res.diagnostics.c0 = tab.c0;
  res.diagnostics.g = tab.g;
  res.diagnostics.clipped_evaluations = tab.clipped;
  res.diagnostics.capped_rates = tab.capped;
  return res;
}

}  // namespace unravel
