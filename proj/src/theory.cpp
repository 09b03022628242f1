#include "wav/theory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <exception>
#include <mutex>
#include <thread>

namespace wav::theory {

namespace {

MatrixXd gaussian(int rows, int cols, Rng& rng) {
  MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

// Runs fn(trial) for every trial, spread over `jobs` threads. Results land
// in trial order, so reductions do not depend on scheduling.
template <std::size_t K, class Fn>
std::vector<std::array<double, K>> run_trials(int trials, int jobs, Fn&& fn) {
  std::vector<std::array<double, K>> out(static_cast<std::size_t>(trials));
  const int workers = std::clamp(jobs, 1, std::max(trials, 1));
  if (workers == 1) {
    for (int t = 0; t < trials; ++t) out[static_cast<std::size_t>(t)] = fn(t);
    return out;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int t = w; t < trials; t += workers) out[static_cast<std::size_t>(t)] = fn(t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

// Neumaier-compensated mean and standard error of column k.
template <std::size_t K>
Moments moments(const std::vector<std::array<double, K>>& v, std::size_t k) {
  auto compensated = [&](auto&& f) {
    double sum = 0.0, c = 0.0;
    for (const auto& row : v) {
      const double x = f(row[k]);
      const double t = sum + x;
      c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
      sum = t;
    }
    return sum + c;
  };
  const double n = static_cast<double>(v.size());
  Moments m;
  m.mean = compensated([](double x) { return x; }) / n;
  if (v.size() > 1) {
    const double ss = compensated([&](double x) { return (x - m.mean) * (x - m.mean); });
    m.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return m;
}

}  // namespace

double LinearGaussianSpec::lambda() const {
  if (B.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(B);
  return svd.singularValues()(0);
}

void LinearGaussianSpec::validate() const {
  if (d_s < 1 || d_a < 1 || d_z < 1) throw PreconditionError("d_s, d_a and d_z must be positive");
  if (d_z > d_s) throw PreconditionError("d_z must not exceed d_s");
  if (!(sigma_s > 0.0) || !(sigma_a > 0.0)) throw PreconditionError("sigma_s and sigma_a must be positive");
  auto shape = [](const MatrixXd& m, int r, int c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw PreconditionError(std::string(name) + " has shape " + std::to_string(m.rows()) + "x" +
                              std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" + std::to_string(c));
    }
  };
  shape(A, d_s, d_s, "A");
  shape(B, d_s, d_a, "B");
  shape(M, d_z, d_s, "M");
  shape(H, d_a, 2 * d_z, "H");
}

LinearGaussianSpec make_spec(int d_s, int d_a, int d_z, double sigma_s, double sigma_a, double lambda,
                             std::uint64_t seed) {
  if (d_a > d_s) throw PreconditionError("make_spec: column-orthonormal B needs d_a <= d_s");
  if (!(lambda > 0.0)) throw PreconditionError("make_spec: lambda must be positive");
  LinearGaussianSpec spec;
  spec.d_s = d_s;
  spec.d_a = d_a;
  spec.d_z = d_z;
  spec.sigma_s = sigma_s;
  spec.sigma_a = sigma_a;
  Rng rng(seed);
  spec.A = gaussian(d_s, d_s, rng) / std::sqrt(static_cast<double>(d_s));
  const MatrixXd G = gaussian(d_s, d_a, rng);
  const MatrixXd Q = Eigen::HouseholderQR<MatrixXd>(G).householderQ() * MatrixXd::Identity(d_s, d_a);
  spec.B = lambda * Q;
  spec.M = MatrixXd::Zero(d_z, d_s);
  for (int i = 0; i < d_z; ++i) spec.M(i, i) = 1.0;
  spec.H = gaussian(d_a, 2 * d_z, rng) / std::sqrt(2.0 * d_z);
  spec.validate();
  return spec;
}

RegressionProblem sample_forward_problem(const LinearGaussianSpec& spec, int n, Rng& rng) {
  if (n < 1) throw PreconditionError("sample_forward_problem: n must be positive");
  RegressionProblem p;
  p.truth.resize(spec.d_s, spec.d_s + spec.d_a);
  p.truth << spec.A, spec.B;
  p.X = gaussian(n, spec.d_s + spec.d_a, rng);
  p.Y = p.X * p.truth.transpose() + spec.sigma_s * gaussian(n, spec.d_s, rng);
  return p;
}

RegressionProblem sample_inverse_problem(const LinearGaussianSpec& spec, int n, Rng& rng) {
  if (n < 1) throw PreconditionError("sample_inverse_problem: n must be positive");
  RegressionProblem p;
  p.truth = spec.H;
  p.X = gaussian(n, 2 * spec.d_z, rng);
  p.Y = p.X * p.truth.transpose() + spec.sigma_a * gaussian(n, spec.d_a, rng);
  return p;
}

MatrixXd ols_fit(const MatrixXd& X, const MatrixXd& Y) {
  if (X.rows() != Y.rows()) throw PreconditionError("ols_fit: X and Y differ in row count");
  if (X.rows() < X.cols()) {
    throw PreconditionError("ols_fit: n = " + std::to_string(X.rows()) + " < D = " + std::to_string(X.cols()));
  }
  const MatrixXd G = X.transpose() * X;
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(G, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(G.rows() - 1);
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    throw PreconditionError("ols_fit: X^T X is rank deficient or ill-conditioned (cond " +
                            std::to_string(lo > 0.0 ? hi / lo : INFINITY) + ")");
  }
  return G.llt().solve(X.transpose() * Y);
}

LemmaResult lemma_excess_risk(int D, int n, double nu, int trials, std::uint64_t seed, int jobs) {
  if (D < 1 || n <= D + 1) throw PreconditionError("lemma_excess_risk: needs n > D + 1");
  if (trials < 1) throw PreconditionError("lemma_excess_risk: trials must be positive");
  if (!(nu >= 0.0)) throw PreconditionError("lemma_excess_risk: nu must be non-negative");
  const auto vals = run_trials<1>(trials, jobs, [&](int t) {
    Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(t)});
    // The error of OLS does not depend on w*, so w* = 0; nu = 0 then gives exactly 0.
    const MatrixXd X = gaussian(n, D, rng);
    const MatrixXd y = nu * gaussian(n, 1, rng);
    return std::array<double, 1>{ols_fit(X, y).squaredNorm()};
  });
  LemmaResult r;
  r.D = D;
  r.n = n;
  r.nu = nu;
  r.trials = trials;
  const auto m = moments(vals, 0);
  r.empirical = m.mean;
  r.std_err = m.se;
  r.theoretical = nu * nu * D / static_cast<double>(n - D - 1);
  r.rel_err = r.theoretical > 0.0 ? std::abs(r.empirical - r.theoretical) / r.theoretical : std::abs(r.empirical);
  return r;
}

GapReport gap_bounds(const LinearGaussianSpec& spec, int n) {
  spec.validate();
  const int D = spec.d_s + spec.d_a;
  const int Dz = 2 * spec.d_z;
  if (n <= D + 1) {
    throw PreconditionError("measure_gap: n = " + std::to_string(n) + " violates n > d_s + d_a + 1 = " +
                            std::to_string(D + 1));
  }
  if (n <= Dz + 1) {
    throw PreconditionError("measure_gap: n = " + std::to_string(n) + " violates n > 2 d_z + 1 = " +
                            std::to_string(Dz + 1));
  }
  GapReport r;
  r.d_s = spec.d_s;
  r.d_a = spec.d_a;
  r.d_z = spec.d_z;
  r.sigma_s = spec.sigma_s;
  r.sigma_a = spec.sigma_a;
  r.lambda = spec.lambda();
  r.n = n;
  const double ss = spec.sigma_s * spec.sigma_s;
  const double sa = spec.sigma_a * spec.sigma_a;
  const double l2 = r.lambda * r.lambda;
  r.theo_EF = ss * D / static_cast<double>(n - D - 1);
  r.theo_EI_bound = l2 * (static_cast<double>(spec.d_a) / spec.d_s) * sa * Dz / static_cast<double>(n - Dz - 1);
  r.factor_dim = (static_cast<double>(D) / Dz) * (static_cast<double>(spec.d_s) / spec.d_a);
  r.factor_stoch = ss / (l2 * sa);
  r.factor_sample = static_cast<double>(n - Dz - 1) / static_cast<double>(n - D - 1);
  // Computed from the two risks, not from the factors, so the audit means something.
  r.gamma_bound = r.theo_EF / r.theo_EI_bound;
  return r;
}

GapReport measure_gap(const LinearGaussianSpec& spec, int n, int trials, std::uint64_t seed, int jobs) {
  if (trials < 1) throw PreconditionError("measure_gap: trials must be positive");
  GapReport r = gap_bounds(spec, n);
  r.trials = trials;
  const double inv_ds = 1.0 / spec.d_s;
  const auto vals = run_trials<2>(trials, jobs, [&](int t) {
    Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(t)});
    const auto fwd = sample_forward_problem(spec, n, rng);
    const double ef = (ols_fit(fwd.X, fwd.Y).transpose() - fwd.truth).squaredNorm() * inv_ds;
    const auto inv = sample_inverse_problem(spec, n, rng);
    const double ei = (spec.B * (ols_fit(inv.X, inv.Y).transpose() - inv.truth)).squaredNorm() * inv_ds;
    return std::array<double, 2>{ef, ei};
  });
  const auto mf = moments(vals, 0);
  const auto mi = moments(vals, 1);
  r.emp_EF = mf.mean;
  r.se_EF = mf.se;
  r.emp_EI = mi.mean;
  r.se_EI = mi.se;
  r.emp_ratio = r.emp_EF / r.emp_EI;
  r.rel_err_EF = std::abs(r.emp_EF - r.theo_EF) / r.theo_EF;
  r.ei_tightness = r.emp_EI / r.theo_EI_bound;
  r.warning = trials < kMinTrustedTrials;
  return r;
}

std::vector<GapReport> sweep_gap(const std::vector<LinearGaussianSpec>& specs, const std::vector<int>& n_grid,
                                 int trials, std::uint64_t seed, int jobs) {
  std::vector<GapReport> out;
  out.reserve(specs.size() * n_grid.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (std::size_t j = 0; j < n_grid.size(); ++j) {
      out.push_back(measure_gap(specs[i], n_grid[j], trials, derive_seed(seed, {i, j}), jobs));
    }
  }
  return out;
}

bool factorization_exact(const GapReport& r, double tol) {
  const double product = r.factor_dim * r.factor_stoch * r.factor_sample;
  return std::abs(product - r.gamma_bound) <= tol * std::abs(r.gamma_bound);
}

bool bound_direction_holds(const GapReport& r, double k) { return r.emp_EI <= r.theo_EI_bound + k * r.se_EI; }

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string gap_csv_header() {
  return "d_s,d_a,d_z,sigma_s,sigma_a,lambda,n,trials,emp_EF,theo_EF,emp_EI,theo_EI_bound,emp_ratio,gamma_bound,"
         "factor_dim,factor_stoch,factor_sample,rel_err_EF,warning";
}

std::string gap_csv_row(const GapReport& r) {
  std::ostringstream os;
  os << r.d_s << ',' << r.d_a << ',' << r.d_z;
  for (double v : {r.sigma_s, r.sigma_a, r.lambda}) os << ',' << format_number(v);
  os << ',' << r.n << ',' << r.trials;
  for (double v : {r.emp_EF, r.theo_EF, r.emp_EI, r.theo_EI_bound, r.emp_ratio, r.gamma_bound, r.factor_dim,
                   r.factor_stoch, r.factor_sample, r.rel_err_EF}) {
    os << ',' << format_number(v);
  }
  os << ',' << (r.warning ? 1 : 0);
  return os.str();
}

std::string lemma_csv_header() { return "D,n,nu,trials,empirical,theoretical,rel_err,std_err"; }

std::string lemma_csv_row(const LemmaResult& r) {
  std::ostringstream os;
  os << r.D << ',' << r.n << ',' << format_number(r.nu) << ',' << r.trials;
  for (double v : {r.empirical, r.theoretical, r.rel_err, r.std_err}) os << ',' << format_number(v);
  return os.str();
}

}  // namespace wav::theory
