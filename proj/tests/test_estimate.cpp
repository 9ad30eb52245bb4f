#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "covest/estimate.hpp"
#include "covest/simulate.hpp"

using namespace covest;
using std::numbers::pi;

namespace {

Matrix sigma2() {
  Matrix s(2, 2);
  s << 1.0, 0.5, 0.5, 1.0;
  return s;
}

// Generalised least squares over the set with explicit Kronecker weights.
Matrix brute_weighted(const Matrix& y, const Spectrum& spec, double e, const Matrix& sw, const IndexSet& set) {
  const Eigen::Index d = y.rows();
  Matrix itot = Matrix::Zero(d * d, d * d);
  Vector num = Vector::Zero(d * d);
  for (long long p = set.lo; p <= set.hi; p += set.step) {
    const double lam = spec.eigenvalue(p);
    Matrix c = sw * lam;
    c.diagonal().array() += e;
    const Matrix ci = c.inverse();
    const Matrix ip = 0.25 * lam * lam * kron(ci, ci);
    const Vector yp = y.col(p - 1);
    Matrix th = yp * yp.transpose();
    th.diagonal().array() -= e;
    itot += ip;
    num += ip * vec(th / lam);
  }
  return mat(itot.ldlt().solve(num), d);
}

Matrix rotation(double angle) {
  Matrix q(2, 2);
  q << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return q;
}

}  // namespace

TEST(PerFreq, Examples) {
  Vector y(1);
  y << 2.0;
  EXPECT_DOUBLE_EQ(per_freq_estimate(y, 0.5, 0.25, 1.0)(0), 7.5);
  const Vector z = per_freq_estimate(Vector::Zero(2), 0.5, 1.0, 4.0);
  EXPECT_DOUBLE_EQ(z(0), -0.5);
  EXPECT_DOUBLE_EQ(z(1), 0.0);
  EXPECT_DOUBLE_EQ(z(3), -0.5);
}

TEST(Window, DefaultsAndResolve) {
  const WindowConfig w;
  EXPECT_NEAR(w.a_for(1e6), 1.0 / std::pow(std::log(1e6), 2), 1e-15);
  EXPECT_NEAR(w.b_for(1e6), std::log(1e6), 1e-15);
  const IndexWindow r = WindowConfig{0.1, 10.0, SplitMode::None}.resolve(100.0, 1e6, 500);
  EXPECT_EQ(r.lo, 10);
  EXPECT_EQ(r.hi, 500);
  EXPECT_THROW((WindowConfig{1.5, 10.0}.validate()), ValidationError);
  EXPECT_THROW(parse_split("halves"), ValidationError);
}

TEST(IndexSet, ParitySplitIsDisjointCover) {
  for (IndexWindow w : {IndexWindow{3, 20}, IndexWindow{4, 21}, IndexWindow{1, 1}}) {
    const IndexSet ev = IndexSet::even(w);
    const IndexSet od = IndexSet::odd(w);
    EXPECT_EQ(ev.size() + od.size(), w.size());
    for (long long p = ev.lo; p <= ev.hi; p += 2) EXPECT_EQ(p % 2, 0);
    for (long long p = od.lo; p <= od.hi; p += 2) EXPECT_EQ(p % 2, 1);
  }
}

TEST(Weighted, MatchesBruteForce) {
  const ParamModel m(SymMatrix(sigma2()), 1.0, 1e4, Spectrum::brownian_motion());
  RngStream rng(1, 0);
  const SeqSample s = sample_sequence(m, 300, rng);
  Matrix sw(2, 2);
  sw << 1.3, -0.2, -0.2, 0.7;
  for (const IndexSet set : {IndexSet{5, 300, 1}, IndexSet{6, 300, 2}, IndexSet{7, 7, 1}}) {
    const WeightedResult r = weighted_estimate(s.values, m.spectrum, m.noise(), SymMatrix(sw), set);
    EXPECT_LT(rel_frobenius(r.estimate, brute_weighted(s.values, m.spectrum, m.noise(), sw, set)), 1e-11);
  }
}

TEST(Oracle, SingleFrequencyReducesToPerFreq) {
  const ParamModel m(SymMatrix(sigma2()), 1.0, 1e4, Spectrum::brownian_motion());
  RngStream rng(2, 0);
  const SeqSample s = sample_sequence(m, 1, rng);
  const EstimateReport r = oracle_estimate(s, m.sigma, WindowConfig{1e-9, 2.0, SplitMode::None});
  EXPECT_EQ(r.window.lo, 1);
  EXPECT_EQ(r.window.hi, 1);
  const Vector pf = per_freq_estimate(s.y(1), m.spectrum.eigenvalue(1), 1.0, 1e4);
  EXPECT_LT((r.estimate - pf).norm(), 1e-12 * pf.norm());
}

TEST(Oracle, EmptyWindowRejected) {
  const ParamModel m(SymMatrix(sigma2()), 1.0, 1e4, Spectrum::brownian_motion());
  RngStream rng(3, 0);
  const SeqSample s = sample_sequence(m, 2, rng);
  EXPECT_THROW(oracle_estimate(s, m.sigma, WindowConfig{0.5, 2.0}), ValidationError);
}

TEST(Oracle, RotationEquivariant) {
  const Matrix q = rotation(0.7);
  const ParamModel m(SymMatrix(sigma2()), 1.0, 1e5, Spectrum::brownian_motion());
  const ParamModel mq(SymMatrix::from_symmetrised(q * sigma2() * q.transpose()), 1.0, 1e5, Spectrum::brownian_motion());
  RngStream rng(4, 0);
  const SeqSample s = sample_sequence(m, 1500, rng);
  const SeqSample sq{mq, s.p_max, q * s.values, s.seed};
  const WindowConfig cfg;
  const Matrix a = oracle_estimate(s, m.sigma, cfg).matrix();
  const Matrix b = oracle_estimate(sq, mq.sigma, cfg).matrix();
  EXPECT_LT(rel_frobenius(b, q * a * q.transpose()), 1e-10);
  const Matrix c = adaptive_estimate(s, cfg, 2.0).matrix();
  const Matrix d = adaptive_estimate(sq, cfg, 2.0).matrix();
  EXPECT_LT(rel_frobenius(d, q * c * q.transpose()), 1e-10);
}

TEST(Oracle, UnbiasedInSmallMonteCarlo) {
  const ParamModel m(SymMatrix(sigma2()), 1.0, 1e4, Spectrum::brownian_motion());
  const WindowConfig cfg;
  const long long p = cfg.resolve(balance_index(m.spectrum, m.n), m.n).hi;
  const int reps = 400;
  Matrix est(reps, 4);
  for (int r = 0; r < reps; ++r) {
    RngStream rng(5, static_cast<std::uint64_t>(r));
    est.row(r) = oracle_estimate(sample_sequence(m, p, rng), m.sigma, cfg).estimate.transpose();
  }
  const Vector mean = est.colwise().mean();
  const Vector sd = ((est.rowwise() - mean.transpose()).array().square().colwise().sum() / (reps - 1)).sqrt();
  for (int j = 0; j < 4; ++j) EXPECT_LT(std::abs(mean(j) - vec(sigma2())(j)), 4.0 * sd(j) / std::sqrt(reps)) << j;
}

TEST(PreEstimate, ClampsIntoBounds) {
  const ParamModel m(SymMatrix(sigma2()), 1.0, 1e4, Spectrum::brownian_motion());
  RngStream rng(6, 0);
  const SeqSample s = sample_sequence(m, 200, rng);
  bool clamped = false;
  Matrix raw;
  const SymMatrix pre = pre_estimate(s, IndexSet{2, 200, 2}, 0.6, &clamped, &raw);
  EXPECT_TRUE(clamped);
  EXPECT_LE(pre.eigenvalues().maxCoeff(), 0.6 + 1e-12);
  EXPECT_GE(pre.eigenvalues().minCoeff(), kPreClampFloor - 1e-15);
  EXPECT_GT(SymMatrix::from_symmetrised(raw).eigenvalues().maxCoeff(), 0.6);
}

TEST(Adaptive, ReportsSplitOccupancy) {
  const ParamModel m(SymMatrix(sigma2()), 1.0, 1e5, Spectrum::brownian_motion());
  RngStream rng(7, 0);
  const SeqSample s = sample_sequence(m, 2000, rng);
  const EstimateReport par = adaptive_estimate(s, WindowConfig{0, 0, SplitMode::Parity}, 2.0);
  EXPECT_EQ(par.diagnostics.occupancy + par.diagnostics.pre_occupancy, par.window.size());
  const EstimateReport cf = adaptive_estimate(s, WindowConfig{0, 0, SplitMode::CrossFit}, 2.0);
  EXPECT_EQ(cf.diagnostics.occupancy, cf.window.size());
  EXPECT_EQ(cf.pre_estimate.rows(), 2);
  EXPECT_EQ(cf.covariance.rows(), 4);
}

TEST(Adaptive, CloseToOracleAtLargeN) {
  const ParamModel m(SymMatrix(sigma2()), 1.0, 1e8, Spectrum::brownian_motion());
  const WindowConfig cfg;
  RngStream rng(8, 0);
  const SeqSample s = sample_sequence(m, cfg.resolve(balance_index(m.spectrum, m.n), m.n).hi, rng);
  const Vector o = oracle_estimate(s, m.sigma, cfg).estimate;
  const Vector a = adaptive_estimate(s, cfg, 2.0).estimate;
  // the gap is far below the n^{-1/4} estimation error
  EXPECT_LT((a - o).norm() * std::pow(1e8, 0.25), 0.5);
}

TEST(Whitening, ScalarNoise) {
  Matrix y(2, 3);
  y << 1, 2, 3, 4, 5, 6;
  const Whitening w = whiten_reduce(y, SymMatrix(Matrix(4.0 * Matrix::Identity(2, 2))));
  EXPECT_LT((w.data - y / 2.0).norm(), 1e-15);
  const Vector v = vec(Matrix::Identity(2, 2));
  EXPECT_LT((w.back(v) - 4.0 * v).norm(), 1e-14);
}

TEST(Whitening, KnownNoiseMatrixRecoversSigma) {
  Matrix h(2, 2);
  h << 2.0, 0.6, 0.6, 1.0;
  const SymMatrix hs(h);
  const Matrix hr = psd_sqrt(hs).matrix();
  // Y_p = Sigma^{1/2} lambda^{1/2} Z + (H/n)^{1/2} Z'
  const double n = 1e6;
  const Spectrum bm = Spectrum::brownian_motion();
  const Matrix sr = psd_sqrt(SymMatrix(sigma2())).matrix();
  const WindowConfig cfg;
  const int reps = 100;
  Matrix acc = Matrix::Zero(2, 2);
  for (int r = 0; r < reps; ++r) {
    RngStream rng(9, static_cast<std::uint64_t>(r));
    const long long p_max = 4500;
    Matrix y(2, p_max);
    for (long long p = 1; p <= p_max; ++p) {
      const Vector z1 = rng.normals(2);
      const Vector z2 = rng.normals(2);
      y.col(p - 1) = std::sqrt(bm.eigenvalue(p)) * sr * z1 + hr * z2 / std::sqrt(n);
    }
    const Whitening w = whiten_reduce(y, hs);
    const ParamModel pm(SymMatrix(sigma2()), 1.0, n, bm, 1e3);
    const SeqSample ws = whiten_sample(SeqSample{pm, p_max, y, {}}, w);
    const EstimateReport rep = oracle_estimate(ws, ws.model.sigma, cfg);
    acc += mat(w.back(rep.estimate), 2);
  }
  acc /= reps;
  EXPECT_LT(rel_frobenius(acc, sigma2()), 0.03);
}

TEST(Integrated, SingleBlockReducesToParametric) {
  const double n = 1e6;
  const double s_bound = 2.5;
  const ObservationSchedule sched = ObservationSchedule::uniform(2, static_cast<long long>(n), 1.0);
  const BlockModel bm = BlockModel::build(LinearSigmaPath::constant(sigma2()), sched, 1, s_bound);
  RngStream rng(10, 0, 0, Purpose::Block);
  const BlockSeqSample blocks = sample_block_sequence(bm, 6000, rng);
  const BlockWindowRule rule{WindowConfig{0.01, 10.0, SplitMode::CrossFit}, 0};
  const IntegratedReport ir = integrated_covol_estimate(blocks, rule, s_bound);

  // Same data in the sequence model: BB spectrum, window rescaled to its centre.
  const ParamModel pm(SymMatrix(sigma2()), 1.0, n, Spectrum::brownian_bridge());
  const SeqSample s{pm, 6000, blocks.values[0], blocks.seed};
  const double ratio = block_window_centre(bm, 0, s_bound) / balance_index(pm.spectrum, n);
  const WindowConfig pc{0.01 * ratio, 10.0 * ratio, SplitMode::CrossFit};
  const EstimateReport ad = adaptive_estimate(s, pc, s_bound);
  ASSERT_EQ(ad.window.lo, ir.block_windows[0].lo);
  ASSERT_EQ(ad.window.hi, ir.block_windows[0].hi);
  EXPECT_LT((ad.estimate - ir.summary.estimate).norm(), 1e-12);
}

TEST(Integrated, ConstantPathSmallMonteCarlo) {
  ObservationSchedule sched;
  sched.components = {{100000, 1.0, 0.0}, {200000, 0.5, 0.4}};
  const BlockModel bm = BlockModel::build(LinearSigmaPath::constant(sigma2()), sched, 8, 2.5);
  const BlockWindowRule rule{};
  long long p_max = 1;
  for (int k = 0; k < bm.m; ++k)
    p_max = std::max(p_max, rule.window.resolve(block_window_centre(bm, k, 2.5), bm.n_min).hi);
  const int reps = 200;
  Matrix est(reps, 4);
  for (int r = 0; r < reps; ++r) {
    RngStream rng(11, static_cast<std::uint64_t>(r), 0, Purpose::Block);
    est.row(r) = integrated_covol_estimate(sample_block_sequence(bm, p_max, rng), rule, 2.5).summary.estimate.transpose();
  }
  const Vector mean = est.colwise().mean();
  const Vector sd = ((est.rowwise() - mean.transpose()).array().square().colwise().sum() / (reps - 1)).sqrt();
  for (int j = 0; j < 4; ++j) EXPECT_LT(std::abs(mean(j) - vec(sigma2())(j)), 4.0 * sd(j) / std::sqrt(reps)) << j;
}

TEST(Integrated, RejectsTooManyBlocks) {
  BlockModel bm;
  bm.m = 20;
  bm.n_min = 100;
  bm.s_bound = 2.0;
  bm.sigma.assign(20, SymMatrix::identity(1));
  bm.xi2.assign(20, Vector::Ones(1));
  EXPECT_THROW(bm.validate(), ValidationError);
}

TEST(OracleWeights, SumToIdentity) {
  const ParamModel m(SymMatrix(sigma2()), 1.0, 1e4, Spectrum::brownian_motion());
  const std::vector<Matrix> w = oracle_weights(m, IndexSet{3, 120, 1});
  Matrix total = Matrix::Zero(4, 4);
  for (const auto& b : w) total += b;
  EXPECT_LT((total - Matrix::Identity(4, 4)).norm(), 1e-12);
  // weights at S I, as used by the pre-estimate
  const ParamModel ms(SymMatrix(Matrix(2.0 * Matrix::Identity(2, 2))), 1.0, 1e4, Spectrum::brownian_motion(), 2.5);
  total.setZero();
  for (const auto& b : oracle_weights(ms, IndexSet{2, 120, 2})) total += b;
  EXPECT_LT((total - Matrix::Identity(4, 4)).norm(), 1e-12);
}

TEST(PreEstimate, UnclampedValueIsUnbiased) {
  const ParamModel m(SymMatrix(sigma2()), 1.0, 1e4, Spectrum::brownian_motion());
  const IndexWindow w = WindowConfig{}.resolve(balance_index(m.spectrum, m.n), m.n);
  const int reps = 400;
  Matrix raws(reps, 4);
  for (int r = 0; r < reps; ++r) {
    RngStream rng(10, static_cast<std::uint64_t>(r));
    Matrix raw;
    pre_estimate(sample_sequence(m, w.hi, rng), IndexSet::odd(w), 2.0, nullptr, &raw);
    raws.row(r) = vec(raw).transpose();
  }
  const Vector mean = raws.colwise().mean();
  const Vector sd = ((raws.rowwise() - mean.transpose()).array().square().colwise().sum() / (reps - 1)).sqrt();
  for (int j = 0; j < 4; ++j) EXPECT_LT(std::abs(mean(j) - vec(sigma2())(j)), 4.0 * sd(j) / std::sqrt(reps)) << j;
}

TEST(PreEstimate, TruthAsPreGivesOracle) {
  const ParamModel m(SymMatrix(sigma2()), 1.0, 1e5, Spectrum::brownian_motion());
  const WindowConfig cfg{0, 0, SplitMode::Parity};
  const IndexWindow w = cfg.resolve(balance_index(m.spectrum, m.n), m.n);
  RngStream rng(11, 0);
  const SeqSample s = sample_sequence(m, w.hi, rng);
  const detail::AdaptiveCore c =
      detail::adaptive_from_pre(s.values, m.spectrum, m.noise(), w, SplitMode::Parity, m.sigma, m.sigma);
  const EstimateReport o = oracle_estimate(s, m.sigma, cfg);
  EXPECT_LT((vec(c.estimate) - o.estimate).norm(), 1e-13 * o.estimate.norm());
}

TEST(PerFreq, ZeroObservationGivesMinusNoiseRatio) {
  const Vector z = per_freq_estimate(Vector::Zero(3), 0.2, 2.0, 10.0);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(z(i + 3 * j), i == j ? -1.0 : 0.0);
}
