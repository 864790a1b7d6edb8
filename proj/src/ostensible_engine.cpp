#include "unravel/ostensible_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coefficient_table.hpp"
#include "unravel/parallel.hpp"

namespace unravel {

CMatrix drift_matrix(const CMatrix& h, const std::vector<CMatrix>& ops,
                     const std::vector<double>& w, const std::vector<double>& r) {
  const Index d = h.rows();
  CMatrix a = Complex(0, -1) * h;
  for (std::size_t l = 0; l < ops.size(); ++l)
    a -= 0.5 * (w[l] * ops[l].adjoint() * ops[l] - r[l] * CMatrix::Identity(d, d));
  return a;
}

CMatrix drift_matrix(const CanonicalModel& m, double t, const std::vector<double>& r,
                     const ClipPolicy& clip) {
  std::vector<CMatrix> ops;
  for (const auto& c : m.channels) ops.push_back(c.op);
  return drift_matrix(m.hamiltonian(t), ops, evaluate_couplings(m, t, clip), r);
}

namespace {

constexpr double kBlowUp = 1e150;

struct OstTable {
  TimeGrid grid;
  int nch = 0;
  double c0 = 0.0;
  detail::CouplingTable w;        // half grid
  std::vector<double> r;          // grid nodes, [k * nch + l]
  std::vector<double> cum;        // cumulative hazard at nodes
  std::vector<CMatrix> hamiltonian;  // half grid
  MatrixFunction h_fn;
};

OstTable build_table(const CanonicalModel& m, const TimeGrid& grid, const RatePolicy& policy) {
  OstTable tab;
  tab.grid = grid;
  tab.nch = int(m.channels.size());
  tab.h_fn = m.hamiltonian;
  std::vector<ScalarFunction> couplings;
  for (const auto& c : m.channels) couplings.push_back(c.coupling);
  tab.w = detail::tabulate_couplings(couplings, grid, {true, policy.w_max});
  RatePolicy pol = policy;
  if (policy.c0_auto) {
    double wmax = 0.0;
    for (double v : tab.w.w) wmax = std::max(wmax, std::abs(v));
    pol.c0 = 0.5 * wmax;
  }
  tab.c0 = pol.c0;
  const int n = grid.size();
  tab.r.resize(std::size_t(n) * tab.nch);
  tab.cum.resize(std::size_t(n) * tab.nch);
  std::vector<double> wk(tab.nch);
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < tab.nch; ++l) wk[l] = tab.w.at(2 * k, l);
    const Rates rates = choose_rates(wk, pol);
    for (int l = 0; l < tab.nch; ++l) tab.r[std::size_t(k) * tab.nch + l] = rates.r[l];
  }
  const double dt = grid.dt();
  for (int l = 0; l < tab.nch; ++l) {
    tab.cum[l] = 0.0;
    for (int k = 1; k < n; ++k)
      tab.cum[std::size_t(k) * tab.nch + l] =
          tab.cum[std::size_t(k - 1) * tab.nch + l] +
          0.5 * dt * (tab.r[std::size_t(k - 1) * tab.nch + l] + tab.r[std::size_t(k) * tab.nch + l]);
  }
  for (int j = 0; j < 2 * grid.n_steps + 1; ++j)
    tab.hamiltonian.push_back(
        m.hamiltonian(grid.t0 + (grid.t_final - grid.t0) * double(j) / double(2 * grid.n_steps)));
  return tab;
}

template <int D>
using Vec = Eigen::Matrix<Complex, D, 1>;
template <int D>
using Mat = Eigen::Matrix<Complex, D, D>;

template <int D>
class OstensibleKernel {
 public:
  OstensibleKernel(const OstTable& tab, const CanonicalModel& m) : tab_(tab) {
    for (const auto& c : m.channels) {
      ops_.push_back(c.op);
      ldl_.push_back(c.op.adjoint() * c.op);
    }
    const Index d = m.dim;
    const int nh = 2 * tab.grid.n_steps + 1;
    // Drift matrices on the half grid.
    for (int j = 0; j < nh; ++j) {
      Mat<D> a = Complex(0, -1) * Mat<D>(tab.hamiltonian[j]);
      const double u = 0.5 * (j % 2);
      const int k = j / 2;
      for (int l = 0; l < tab.nch; ++l) {
        const double r = rate(k, l, u);
        a -= 0.5 * (tab.w.at(j, l) * ldl_[l] - r * Mat<D>::Identity(d, d));
      }
      drift_.push_back(a);
    }
    scratch_.resize(d, d);
    next_.resize(tab.nch);
  }

  double rate(int k, int l, double u) const {
    const auto& r = tab_.r;
    const int n = tab_.nch;
    if (u == 0.0) return r[std::size_t(k) * n + l];
    return (1.0 - u) * r[std::size_t(k) * n + l] + u * r[std::size_t(k + 1) * n + l];
  }

  // Time at which channel l's cumulative hazard reaches `target`.
  double invert(int l, double target) const {
    const int n = tab_.grid.size();
    const int nch = tab_.nch;
    if (target >= tab_.cum[std::size_t(n - 1) * nch + l]) return std::numeric_limits<double>::infinity();
    int lo = 0, hi = n - 1;  // cum[lo] <= target < cum[hi]
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      if (tab_.cum[std::size_t(mid) * nch + l] <= target)
        lo = mid;
      else
        hi = mid;
    }
    const double dt = tab_.grid.dt();
    const double r0 = tab_.r[std::size_t(lo) * nch + l];
    const double slope = (tab_.r[std::size_t(lo + 1) * nch + l] - r0) / dt;
    const double delta = target - tab_.cum[std::size_t(lo) * nch + l];
    const double disc = std::max(0.0, r0 * r0 + 2.0 * slope * delta);
    const double s = 2.0 * delta / (r0 + std::sqrt(disc));
    return tab_.grid.time(lo) + std::clamp(s, 0.0, dt);
  }

  double cumulative(int l, double t) const {
    const TimeGrid& g = tab_.grid;
    const int k = std::clamp(int((t - g.t0) / g.dt()), 0, g.n_steps - 1);
    const double s = t - g.time(k);
    const double r0 = tab_.r[std::size_t(k) * tab_.nch + l];
    const double r1 = tab_.r[std::size_t(k + 1) * tab_.nch + l];
    return tab_.cum[std::size_t(k) * tab_.nch + l] + r0 * s + 0.5 * (r1 - r0) / g.dt() * s * s;
  }

  const Mat<D>& interp_drift(int k, double t, int slot) {
    const TimeGrid& g = tab_.grid;
    const double u = std::clamp((t - g.time(k)) / g.dt(), 0.0, 1.0);
    double a, b, c;
    detail::lagrange3(u, a, b, c);
    Mat<D>& out = slots_[slot];
    out = Complex(0, -1) * Mat<D>(tab_.h_fn(t));
    const Index d = out.rows();
    for (int l = 0; l < tab_.nch; ++l) {
      const double w = a * tab_.w.at(2 * k, l) + b * tab_.w.at(2 * k + 1, l) +
                       c * tab_.w.at(2 * k + 2, l);
      out -= 0.5 * (w * ldl_[l] - rate(k, l, u) * Mat<D>::Identity(d, d));
    }
    return out;
  }

  double coupling_at(int k, double t, int l) const {
    const TimeGrid& g = tab_.grid;
    const double u = std::clamp((t - g.time(k)) / g.dt(), 0.0, 1.0);
    double a, b, c;
    detail::lagrange3(u, a, b, c);
    return a * tab_.w.at(2 * k, l) + b * tab_.w.at(2 * k + 1, l) + c * tab_.w.at(2 * k + 2, l);
  }

  void rk4(Vec<D>& phi, double h, const Mat<D>& a0, const Mat<D>& am, const Mat<D>& a1) {
    k1_.noalias() = a0 * phi;
    tmp_ = phi + 0.5 * h * k1_;
    k2_.noalias() = am * tmp_;
    tmp_ = phi + 0.5 * h * k2_;
    k3_.noalias() = am * tmp_;
    tmp_ = phi + h * k3_;
    k4_.noalias() = a1 * tmp_;
    phi += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
  }

  // sink(k, phi, lambda, jumps), on_jump(t, l)
  template <typename Sink, typename OnJump>
  void run(const CVector& psi0, StreamRng& rng, Sink&& sink, OnJump&& on_jump) {
    const TimeGrid& g = tab_.grid;
    Vec<D> phi = psi0;
    double lambda = 1.0;
    int njumps = 0;
    bool zero = false;
    for (int l = 0; l < tab_.nch; ++l) next_[l] = invert(l, rng.exponential());
    sink(0, phi, lambda, 0);
    for (int k = 0; k < g.n_steps; ++k) {
      const double tb = g.time(k + 1);
      if (!zero) {
        double t = g.time(k);
        bool full = true;
        while (true) {
          int l_next = -1;
          double tau = std::numeric_limits<double>::infinity();
          for (int l = 0; l < tab_.nch; ++l)
            if (next_[l] < tau) {
              tau = next_[l];
              l_next = l;
            }
          if (!(tau < tb)) {
            if (full)
              rk4(phi, tb - t, drift_[2 * k], drift_[2 * k + 1], drift_[2 * k + 2]);
            else if (tb - t > 0.0)
              rk4(phi, tb - t, interp_drift(k, t, 0), interp_drift(k, 0.5 * (t + tb), 1),
                  interp_drift(k, tb, 2));
            break;
          }
          tau = std::max(tau, t);
          if (tau > t)
            rk4(phi, tau - t, interp_drift(k, t, 0), interp_drift(k, 0.5 * (t + tau), 1),
                interp_drift(k, tau, 2));
          t = tau;
          full = false;
          phi = ops_[l_next] * phi;
          const double u = (t - g.time(k)) / g.dt();
          lambda *= coupling_at(k, t, l_next) / rate(k, l_next, std::clamp(u, 0.0, 1.0));
          ++njumps;
          on_jump(t, l_next);
          next_[l_next] = invert(l_next, cumulative(l_next, t) + rng.exponential());
          if (phi.squaredNorm() == 0.0 || lambda == 0.0) {
            zero = true;
            break;
          }
        }
        if (!(phi.norm() < kBlowUp) || !(std::abs(lambda) < kBlowUp))
          throw BlowUp("ostensible blow-up at t=" + std::to_string(tb));
      }
      sink(k + 1, phi, zero ? 0.0 : lambda, njumps);
    }
  }

 private:
  const OstTable& tab_;
  std::vector<Mat<D>> ops_, ldl_, drift_;
  Mat<D> scratch_;
  Mat<D> slots_[3];
  Vec<D> k1_, k2_, k3_, k4_, tmp_;
  std::vector<double> next_;
};

template <typename Body>
void dispatch(const OstTable& tab, const CanonicalModel& m, Body&& body) {
  if (m.dim == 2) {
    OstensibleKernel<2> kernel(tab, m);
    body(kernel);
  } else {
    OstensibleKernel<Eigen::Dynamic> kernel(tab, m);
    body(kernel);
  }
}

}  // namespace

OstensiblePath run_ostensible_trajectory(const CanonicalModel& m, const CVector& psi0,
                                         const TimeGrid& grid, const RatePolicy& policy,
                                         StreamRng& rng) {
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw ConfigError("initial state must be normalized");
  const OstTable tab = build_table(m, grid, policy);
  OstensiblePath path;
  path.times = grid.times();
  path.phi.resize(grid.size());
  path.lambda.resize(grid.size());
  dispatch(tab, m, [&](auto& kernel) {
    kernel.run(psi0, rng,
               [&](int k, const auto& phi, double lambda, int) {
                 path.phi[k] = phi;
                 path.lambda[k] = lambda;
               },
               [&](double t, int l) { path.jumps.push_back({t, l}); });
  });
  return path;
}

EnsembleEstimate estimate_ostensible(const std::vector<OstensiblePath>& paths,
                                     const std::vector<CMatrix>& observables) {
  if (paths.size() < 2) throw ConfigError("at least two paths are required");
  const auto& first = paths.front();
  const Index d = first.phi.front().size();
  EnsembleAccumulator acc(int(first.times.size()), d,
                          observables.empty() ? default_observables(d) : observables);
  for (const auto& p : paths) {
    std::size_t j = 0;
    for (std::size_t k = 0; k < p.times.size(); ++k) {
      while (j < p.jumps.size() && p.jumps[j].time <= p.times[k]) ++j;
      acc.add(int(k), p.lambda[k], p.phi[k], p.phi[k], int(j));
    }
    acc.finish_path();
  }
  return acc.finalize(EstimatorKind::ostensible, first.times);
}

OstensibleRunResult run_ostensible_ensemble(const CanonicalModel& m, const CVector& psi0,
                                            const TimeGrid& grid,
                                            const OstensibleRunConfig& cfg) {
  if (cfg.n_traj < 2) throw ConfigError("n_traj must be at least 2");
  if (psi0.size() != m.dim) throw ShapeError("initial state dimension mismatch");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw ConfigError("initial state must be normalized");
  const OstTable tab = build_table(m, grid, cfg.policy);
  const auto observables = cfg.observables.empty() ? default_observables(m.dim) : cfg.observables;

  constexpr std::size_t kBlock = 512;
  const std::size_t n_blocks = (cfg.n_traj + kBlock - 1) / kBlock;
  struct Part {
    EnsembleAccumulator acc;
    std::size_t jumps = 0;
  };
  std::vector<Part> parts(n_blocks);
  const int workers = cfg.workers > 0 ? cfg.workers : worker_count();
  for_each_block(n_blocks, workers, [&](std::size_t b) {
    Part part{EnsembleAccumulator(grid.size(), m.dim, observables), 0};
    dispatch(tab, m, [&](auto& kernel) {
      const std::size_t lo = b * kBlock, hi = std::min(cfg.n_traj, lo + kBlock);
      for (std::size_t i = lo; i < hi; ++i) {
        StreamRng rng(cfg.seed, i);
        kernel.run(psi0, rng,
                   [&](int k, const auto& phi, double lambda, int jumps) {
                     part.acc.add(k, lambda, phi, phi, jumps);
                   },
                   [&](double, int) { ++part.jumps; });
        part.acc.finish_path();
      }
    });
    parts[b] = std::move(part);
  });
  Part total = pairwise_reduce(parts, 0, n_blocks, [](Part& a, const Part& b) {
    a.acc.merge(b.acc);
    a.jumps += b.jumps;
  });
  OstensibleRunResult res{total.acc.finalize(EstimatorKind::ostensible, grid.times()), tab.c0,
                          total.jumps, tab.w.clipped, false};
  res.horizon_warning = res.estimate.trace_se.maxCoeff() > 0.2;
  return res;
}

}  // namespace unravel
