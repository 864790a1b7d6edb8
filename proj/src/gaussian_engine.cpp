#include "unravel/gaussian_engine.hpp"

#include <cmath>
#include <random>

#include "unravel/parallel.hpp"

namespace unravel {

namespace {

constexpr double kBlowUp = 1e150;
const Complex kKappa(0.0, 1.0 / std::sqrt(2.0));

// 8-point Gauss-Legendre on [-1, 1].
constexpr double kGlNodes[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                0.7966664774136267,  0.9602898564975363};
constexpr double kGlWeights[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                  0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                  0.2223810344533745, 0.1012285362903763};

double heaviside0(double x) { return x > 0.0 ? 1.0 : 0.0; }
double heaviside1(double x) { return x >= 0.0 ? 1.0 : 0.0; }

struct PairBlocks {
  Eigen::Matrix2cd Z, R, I;
};

PairBlocks pair_blocks(const KernelBlock& k) {
  const Complex f = 0.5 * (std::conj(k.k21) + k.k12);
  const Complex mid = 0.5 * (k.k11 + std::conj(k.k22));
  const double s = mid.real();
  const Complex a(0.0, mid.imag());
  PairBlocks b;
  b.Z << f, -s, -s, std::conj(f);
  b.R << -a, 0.0, 0.0, a;
  b.I << k.k11 - std::conj(k.k22), -k.k12 + std::conj(k.k21), std::conj(k.k12) - k.k21,
      -std::conj(k.k11) + k.k22;
  return b;
}

// E[eta(t) eta(s)^T] for eta = (x-left, x-right, y-left, y-right); four times the
// interference block I/(4i).
Eigen::Matrix4cd eta_block(const Eigen::Matrix2cd& i_ts, const Eigen::Matrix2cd& i_st) {
  Eigen::Matrix4cd n = Eigen::Matrix4cd::Zero();
  n.topRightCorner<2, 2>() = Complex(0, -1) * i_ts;
  n.bottomLeftCorner<2, 2>() = Complex(0, -1) * i_st.transpose();
  return n;
}

// Real covariance of the smallest-proper-part law with complementary covariance m.
Matrix<double> minimal_real_covariance(const CMatrix& m, double* proper_trace) {
  const Index p = m.rows();
  Matrix<double> j(2 * p, 2 * p);
  j.topLeftCorner(p, p) = 0.5 * m.real();
  j.topRightCorner(p, p) = 0.5 * m.imag();
  j.bottomLeftCorner(p, p) = 0.5 * m.imag();
  j.bottomRightCorner(p, p) = -0.5 * m.real();
  j = (0.5 * (j + j.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Matrix<double>> es(j);
  const RVector lam = es.eigenvalues().cwiseMax(0.0);
  Matrix<double> w = es.eigenvectors() * (2.0 * lam).asDiagonal() * es.eigenvectors().transpose();
  if (proper_trace) *proper_trace = w.trace();
  return w;
}

Matrix<double> proper_real_covariance(const CMatrix& q) {
  const Index p = q.rows();
  Matrix<double> w(2 * p, 2 * p);
  w.topLeftCorner(p, p) = 0.5 * q.real();
  w.topRightCorner(p, p) = -0.5 * q.imag();
  w.bottomLeftCorner(p, p) = 0.5 * q.imag();
  w.bottomRightCorner(p, p) = 0.5 * q.real();
  return w;
}

// Columns scaled so that factor * factor^T = w, dropping null directions.
Matrix<double> psd_factor(const Matrix<double>& w) {
  Eigen::SelfAdjointEigenSolver<Matrix<double>> es((0.5 * (w + w.transpose())).eval());
  const RVector& lam = es.eigenvalues();
  const double cut = 1e-14 * std::max(lam.maxCoeff(), 0.0);
  std::vector<Index> keep;
  for (Index i = lam.size() - 1; i >= 0; --i)
    if (lam(i) > cut) keep.push_back(i);
  Matrix<double> f(w.rows(), Index(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c)
    f.col(Index(c)) = es.eigenvectors().col(keep[c]) * std::sqrt(lam(keep[c]));
  return f;
}

CVector to_complex(const RVector& x) {
  const Index p = x.size() / 2;
  return x.head(p).cast<Complex>() + Complex(0, 1) * x.tail(p).cast<Complex>();
}

RVector standard_normals(StreamRng& rng, Index n) {
  std::normal_distribution<double> normal;
  RVector z(n);
  for (Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

}  // namespace

KernelValues kernel_functions(const BosonEnvironment& env, double tau) {
  KernelValues out{0.0, 0.0};
  for (const auto& mode : env.modes) {
    const Complex phase = std::exp(Complex(0.0, -mode.omega * tau));
    const double g2 = std::norm(mode.g);
    if (env.beta.is_vacuum()) {
      out.f1 += g2 * phase;
      continue;
    }
    const double bw = env.beta.value * mode.omega;
    if (!(bw > 0.0)) throw ConfigError("thermal weights need beta*omega > 0");
    const double boltz = std::exp(-bw);
    out.f1 += g2 * phase / (1.0 - boltz);
    out.f2 += g2 * phase * boltz / (1.0 - boltz);
  }
  return out;
}

KernelBlock kernel_block(const BosonEnvironment& env, double t, double s) {
  const KernelValues kv = kernel_functions(env, t - s);
  KernelBlock k;
  k.k11 = -heaviside0(t - s) * kv.f1 - heaviside1(s - t) * kv.f2;
  k.k12 = kv.f2;
  k.k21 = kv.f1;
  k.k22 = -heaviside1(t - s) * kv.f2 - heaviside0(s - t) * kv.f1;
  return k;
}

KernelTable assemble_kernel_matrix(const BosonEnvironment& env, const TimeGrid& grid) {
  KernelTable tab;
  tab.times = grid.times();
  const int m = grid.size();
  const double dt = grid.dt();
  for (int lag = -(m - 1); lag <= m - 1; ++lag) {
    const KernelValues kv = kernel_functions(env, lag * dt);
    tab.f1.push_back(kv.f1);
    tab.f2.push_back(kv.f2);
  }
  tab.S.resize(m, m);
  tab.A.resize(m, m);
  tab.f.resize(m, m);
  for (auto& k : tab.K) k.resize(m, m);
  for (int k = 0; k < m; ++k) {
    for (int l = 0; l < m; ++l) {
      const KernelBlock b = kernel_block(env, tab.times[k], tab.times[l]);
      tab.K[0](k, l) = b.k11;
      tab.K[1](k, l) = b.k12;
      tab.K[2](k, l) = b.k21;
      tab.K[3](k, l) = b.k22;
      const Complex mid = 0.5 * (b.k11 + std::conj(b.k22));
      tab.S(k, l) = mid.real();
      tab.A(k, l) = Complex(0.0, mid.imag());
      tab.f(k, l) = 0.5 * (std::conj(b.k21) + b.k12);
    }
  }
  return tab;
}

AugmentedCovariance build_augmented_covariance(const KernelTable& table, const TimeGrid& grid,
                                               const CovarianceOptions& opt) {
  const int m = int(table.times.size());
  if (m != grid.size()) throw ShapeError("kernel table and grid differ");
  CMatrix z(2 * m, 2 * m), r(2 * m, 2 * m), i(4 * m, 4 * m);
  for (int k = 0; k < m; ++k) {
    for (int l = 0; l < m; ++l) {
      const KernelBlock b{table.K[0](k, l), table.K[1](k, l), table.K[2](k, l),
                          table.K[3](k, l)};
      const KernelBlock bt{table.K[0](l, k), table.K[1](l, k), table.K[2](l, k),
                           table.K[3](l, k)};
      const PairBlocks pb = pair_blocks(b);
      z.block<2, 2>(2 * k, 2 * l) = pb.Z;
      r.block<2, 2>(2 * k, 2 * l) = pb.R;
      i.block<4, 4>(4 * k, 4 * l) = 0.25 * eta_block(pb.I, pair_blocks(bt).I);
    }
  }
  return augmented_from_blocks(std::move(z), std::move(r), std::move(i), opt);
}

AugmentedCovariance augmented_from_blocks(CMatrix Z, CMatrix R, CMatrix I,
                                          const CovarianceOptions& opt) {
  const Index p = Z.rows();
  if (Z.cols() != p || R.rows() != p || R.cols() != p || p % 2 != 0 || I.rows() != 2 * p ||
      I.cols() != 2 * p)
    throw ShapeError("augmented blocks have inconsistent shapes");
  AugmentedCovariance cov;
  cov.m = int(p / 2);
  cov.Z = std::move(Z);
  cov.R = std::move(R);
  cov.I = std::move(I);
  // Augmented covariance of (zeta, conj zeta) and its real form through T.
  CMatrix gamma(2 * p, 2 * p);
  gamma << cov.Z, cov.R, cov.R.conjugate(), cov.Z.conjugate();
  CMatrix t(2 * p, 2 * p);
  const CMatrix id = CMatrix::Identity(p, p);
  t << id, Complex(0, 1) * id, id, Complex(0, -1) * id;
  t /= std::sqrt(2.0);
  const CMatrix c = t.adjoint() * gamma * t;
  cov.real_form = (0.5 * (c.real() + c.real().transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Matrix<double>> es(cov.real_form);
  cov.min_eigenvalue = es.eigenvalues()(0);
  cov.max_diagonal = cov.real_form.diagonal().maxCoeff();
  if (cov.min_eigenvalue < -opt.psd_tol * cov.max_diagonal)
    throw CovarianceNotPsd(cov.min_eigenvalue, cov.max_diagonal);
  cov.floored = cov.min_eigenvalue < 0.0;
  const Matrix<double> floored = es.eigenvectors() *
                                 es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                                 es.eigenvectors().transpose();
  bool ok = false;
  for (double scale : {0.0, 1e-12, 1e-10, 1e-8}) {
    const double eps = scale * cov.max_diagonal;
    Eigen::LLT<Matrix<double>> llt(floored + eps * Matrix<double>::Identity(2 * p, 2 * p));
    if (llt.info() == Eigen::Success) {
      cov.epsilon = eps;
      cov.zeta_factor = llt.matrixL();
      ok = true;
      break;
    }
  }
  if (!ok) throw CovarianceNotPsd(cov.min_eigenvalue, cov.max_diagonal);
  cov.eta_factor = psd_factor(minimal_real_covariance(4.0 * cov.I, nullptr));
  return cov;
}

std::vector<GaussianDraws> sample_processes(const AugmentedCovariance& cov, StreamRng& rng,
                                            std::size_t n_draws) {
  std::vector<GaussianDraws> out;
  out.reserve(n_draws);
  const int m = cov.m;
  auto zeta = [&]() {
    const RVector x = cov.zeta_factor * standard_normals(rng, cov.zeta_factor.cols());
    const CVector z = to_complex(x) / std::sqrt(2.0);
    CMatrix zm(m, 2);
    for (int k = 0; k < m; ++k) zm.row(k) << z(2 * k), z(2 * k + 1);
    return zm;
  };
  for (std::size_t i = 0; i < n_draws; ++i) {
    GaussianDraws d;
    d.zeta1 = zeta();
    d.zeta2 = zeta();
    const CVector e = to_complex(cov.eta_factor * standard_normals(rng, cov.eta_factor.cols()));
    d.eta.resize(m, 4);
    for (int k = 0; k < m; ++k) d.eta.row(k) = e.segment<4>(4 * k).transpose();
    d.gamma1 = d.zeta1.col(0) + d.zeta1.col(1).conjugate();
    d.gamma2 = d.zeta2.col(0) + d.zeta2.col(1).conjugate();
    out.push_back(std::move(d));
  }
  return out;
}

CMatrix driving_from_draws(const GaussianDraws& d, int n_cells) {
  CMatrix u(n_cells, 4);
  for (int k = 0; k < n_cells; ++k) {
    u(k, 0) = d.gamma1(k) + d.eta(k, 0);
    u(k, 1) = std::conj(d.gamma1(k)) + d.eta(k, 1);
    u(k, 2) = d.gamma2(k) + d.eta(k, 2);
    u(k, 3) = std::conj(d.gamma2(k)) + d.eta(k, 3);
  }
  return u;
}

Eigen::Matrix4cd driving_kernel(const BosonEnvironment& env, double tau) {
  const PairBlocks ts = pair_blocks(kernel_block(env, tau, 0.0));
  const PairBlocks st = pair_blocks(kernel_block(env, 0.0, tau));
  const Eigen::Matrix2cd& z = ts.Z;
  const Eigen::Matrix2cd& r = ts.R;
  // gamma = zeta_1 + conj zeta_2 on the left, its conjugate on the right.
  const Complex gg = r(0, 0) + z(0, 1) + std::conj(z(1, 0)) + std::conj(r(1, 1));
  const Complex gb = z(0, 0) + r(0, 1) + std::conj(r(1, 0)) + std::conj(z(1, 1));
  Eigen::Matrix2cd pair;
  pair << gg, gb, std::conj(gb), std::conj(gg);
  Eigen::Matrix4cd m = eta_block(ts.I, st.I);
  m.topLeftCorner<2, 2>() += pair;
  m.bottomRightCorner<2, 2>() += pair;
  return m;
}

DrivingLaw build_driving_law(const BosonEnvironment& env, const TimeGrid& grid,
                             const DrivingOptions& opt) {
  const int n = grid.n_steps;
  const double h = grid.dt();
  std::vector<Eigen::Matrix4cd> lag(2 * n - 1);
  for (int d = -(n - 1); d <= n - 1; ++d) {
    Eigen::Matrix4cd acc = Eigen::Matrix4cd::Zero();
    if (opt.discretization == NoiseDiscretization::point) {
      acc = driving_kernel(env, d * h);
    } else {
      // Average over a cell pair: tent weight on (d-1)h..(d+1)h, split at the kink.
      for (int side = 0; side < 2; ++side) {
        for (int q = 0; q < 8; ++q) {
          const double u = 0.5 * h * (kGlNodes[q] + (side == 0 ? -1.0 : 1.0));
          const double weight = 0.5 * h * kGlWeights[q] * (1.0 - std::abs(u) / h) / h;
          acc += weight * driving_kernel(env, d * h + u);
        }
      }
    }
    lag[d + n - 1] = acc;
  }
  DrivingLaw law;
  law.n = n;
  law.complementary.resize(4 * n, 4 * n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) law.complementary.block<4, 4>(4 * k, 4 * l) = lag[k - l + n - 1];
  law.complementary = (0.5 * (law.complementary + law.complementary.transpose())).eval();
  law.real_covariance = minimal_real_covariance(law.complementary, &law.proper_trace);
  if (opt.extra_proper.size() > 0) {
    if (opt.extra_proper.rows() != 4 * n || opt.extra_proper.cols() != 4 * n)
      throw ShapeError("extra proper covariance must be 4n x 4n");
    law.real_covariance += proper_real_covariance(opt.extra_proper);
    law.proper_trace += std::real(opt.extra_proper.trace());
  }
  law.factor = psd_factor(law.real_covariance);
  return law;
}

CMatrix sample_driving(const DrivingLaw& law, StreamRng& rng) {
  const CVector v = to_complex(law.factor * standard_normals(rng, law.factor.cols()));
  CMatrix u(law.n, 4);
  for (int k = 0; k < law.n; ++k) u.row(k) = v.segment<4>(4 * k).transpose();
  return u;
}

namespace {

struct DgsSystem {
  CMatrix x, y;
  std::vector<CMatrix> h;  // half grid
};

DgsSystem make_system(const MatrixFunction& hf, const CMatrix& L, const TimeGrid& grid) {
  DgsSystem s;
  s.x = (L + L.adjoint()) / std::sqrt(2.0);
  s.y = (L - L.adjoint()) / Complex(0.0, std::sqrt(2.0));
  for (int j = 0; j < 2 * grid.n_steps + 1; ++j)
    s.h.push_back(hf(grid.t0 + (grid.t_final - grid.t0) * double(j) / double(2 * grid.n_steps)));
  return s;
}

void rk4_linear(CVector& v, double h, const CMatrix& a0, const CMatrix& am, const CMatrix& a1) {
  const CVector k1 = a0 * v;
  const CVector k2 = am * (v + 0.5 * h * k1);
  const CVector k3 = am * (v + 0.5 * h * k2);
  const CVector k4 = a1 * (v + h * k3);
  v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <typename Sink>
void integrate_pair(const DgsSystem& sys, const CMatrix& drive, const CVector& psi0,
                    const TimeGrid& grid, Sink&& sink) {
  if (drive.rows() < grid.n_steps || drive.cols() != 4) throw ShapeError("drive must be n x 4");
  CVector phi = psi0;
  CVector dual = psi0.conjugate();
  sink(0, phi, dual);
  const CMatrix xc = sys.x.conjugate(), yc = sys.y.conjugate();
  for (int k = 0; k < grid.n_steps; ++k) {
    const double h = grid.time(k + 1) - grid.time(k);
    const CMatrix nl = kKappa * (sys.x * drive(k, 0) + sys.y * drive(k, 2));
    const CMatrix nr = std::conj(kKappa) * (xc * drive(k, 1) + yc * drive(k, 3));
    const Complex mi(0, -1), pi(0, 1);
    rk4_linear(phi, h, mi * sys.h[2 * k] + nl, mi * sys.h[2 * k + 1] + nl,
               mi * sys.h[2 * k + 2] + nl);
    rk4_linear(dual, h, pi * sys.h[2 * k].conjugate() + nr, pi * sys.h[2 * k + 1].conjugate() + nr,
               pi * sys.h[2 * k + 2].conjugate() + nr);
    if (!(phi.norm() < kBlowUp) || !(dual.norm() < kBlowUp))
      throw BlowUp("dgs blow-up at t=" + std::to_string(grid.time(k + 1)));
    sink(k + 1, phi, dual);
  }
}

}  // namespace

DgsPair run_dgs_pair(const MatrixFunction& h, const CMatrix& L, const CMatrix& drive,
                     const CVector& psi0, const TimeGrid& grid) {
  const DgsSystem sys = make_system(h, L, grid);
  DgsPair pair;
  integrate_pair(sys, drive, psi0, grid, [&](int, const CVector& a, const CVector& b) {
    pair.phi.push_back(a);
    pair.dual.push_back(b);
  });
  return pair;
}

DgsPair run_dgs_pair(const MatrixFunction& h, const CMatrix& L, const GaussianDraws& draws,
                     const CVector& psi0, const TimeGrid& grid) {
  return run_dgs_pair(h, L, driving_from_draws(draws, grid.n_steps), psi0, grid);
}

EnsembleEstimate estimate_dgs(const std::vector<DgsPair>& pairs, const std::vector<double>& times,
                              const std::vector<CMatrix>& observables) {
  if (pairs.size() < 2) throw ConfigError("at least two pairs are required");
  const Index d = pairs.front().phi.front().size();
  EnsembleAccumulator acc(int(times.size()), d,
                          observables.empty() ? default_observables(d) : observables);
  for (const auto& p : pairs) {
    for (std::size_t k = 0; k < times.size(); ++k)
      acc.add(int(k), 1.0, p.phi[k], CVector(p.dual[k].conjugate()));
    acc.finish_path();
  }
  return acc.finalize(EstimatorKind::dgs, times);
}

DgsRunResult run_dgs_ensemble(const BosonEnvironment& env, const MatrixFunction& h,
                              const CVector& psi0, const TimeGrid& grid, const DgsRunConfig& cfg) {
  if (cfg.n_traj < 2) throw ConfigError("n_traj must be at least 2");
  if (env.L.rows() != psi0.size()) throw ShapeError("coupling operator dimension mismatch");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw ConfigError("initial state must be normalized");
  const DrivingLaw law = build_driving_law(env, grid, cfg.driving);
  const DgsSystem sys = make_system(h, env.L, grid);
  const Index d = psi0.size();
  const auto observables = cfg.observables.empty() ? default_observables(d) : cfg.observables;
  const int n = grid.n_steps;

  constexpr std::size_t kBlock = 512;
  const std::size_t n_blocks = (cfg.n_traj + kBlock - 1) / kBlock;
  std::vector<EnsembleAccumulator> parts(n_blocks);
  const int workers = cfg.workers > 0 ? cfg.workers : worker_count();
  for_each_block(n_blocks, workers, [&](std::size_t b) {
    EnsembleAccumulator acc(grid.size(), d, observables);
    const std::size_t lo = b * kBlock, hi = std::min(cfg.n_traj, lo + kBlock);
    Matrix<double> z(law.factor.cols(), Index(hi - lo));
    for (std::size_t i = lo; i < hi; ++i) {
      StreamRng rng(cfg.seed, i);
      z.col(Index(i - lo)) = standard_normals(rng, law.factor.cols());
    }
    const Matrix<double> x = law.factor * z;
    const Index p = 4 * n;
    CMatrix u(n, 4);
    for (std::size_t i = lo; i < hi; ++i) {
      const Index c = Index(i - lo);
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < 4; ++j) u(k, j) = Complex(x(4 * k + j, c), x(p + 4 * k + j, c));
      integrate_pair(sys, u, psi0, grid, [&](int k, const CVector& a, const CVector& bb) {
        acc.add(k, 1.0, a, bb.conjugate());
      });
      acc.finish_path();
    }
    parts[b] = std::move(acc);
  });
  EnsembleAccumulator total = pairwise_reduce(
      parts, 0, n_blocks, [](EnsembleAccumulator& a, const EnsembleAccumulator& b) { a.merge(b); });
  return {total.finalize(EstimatorKind::dgs, grid.times()), law.proper_trace, law.factor.cols()};
}

}  // namespace unravel
