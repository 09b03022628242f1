#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wav/common.hpp"

namespace wav::theory {

using Eigen::MatrixXd;

/// Linear-Gaussian forward and inverse problems.
///   forward: s' = A s + B a + noise(sigma_s)
///   inverse: a  = H [z; z'] + noise(sigma_a), z = M s
struct LinearGaussianSpec {
  int d_s = 20;
  int d_a = 2;
  int d_z = 2;
  MatrixXd A;  // d_s x d_s
  MatrixXd B;  // d_s x d_a
  MatrixXd M;  // d_z x d_s
  MatrixXd H;  // d_a x 2 d_z
  double sigma_s = 1.0;
  double sigma_a = 0.1;

  /// Operator norm of B, always recomputed.
  double lambda() const;
  /// Throws PreconditionError on inconsistent shapes or non-positive noise.
  void validate() const;
};

/// Default matrices: A, H iid N(0, 1/dim); B column-orthonormal times
/// `lambda`; M selects the first d_z coordinates.
LinearGaussianSpec make_spec(int d_s, int d_a, int d_z, double sigma_s, double sigma_a, double lambda,
                             std::uint64_t seed);

struct RegressionProblem {
  MatrixXd X;      // n x D, iid standard normal
  MatrixXd Y;      // n x q
  MatrixXd truth;  // q x D, Y = X truth^T + noise
};

RegressionProblem sample_forward_problem(const LinearGaussianSpec& spec, int n, Rng& rng);
RegressionProblem sample_inverse_problem(const LinearGaussianSpec& spec, int n, Rng& rng);

inline constexpr double kMaxCondition = 1e8;

/// Normal-equations least squares, D x q. Throws PreconditionError when
/// n < D or cond(X^T X) > kMaxCondition.
MatrixXd ols_fit(const MatrixXd& X, const MatrixXd& Y);

struct LemmaResult {
  int D = 0;
  int n = 0;
  double nu = 0.0;
  int trials = 0;
  double empirical = 0.0;
  double theoretical = 0.0;
  double rel_err = 0.0;
  double std_err = 0.0;
};

/// Excess risk of OLS with isotropic design: mean over trials of
/// |w_hat - w|^2, against nu^2 D / (n - D - 1).
LemmaResult lemma_excess_risk(int D, int n, double nu, int trials, std::uint64_t seed, int jobs = 1);

struct GapReport {
  int d_s = 0, d_a = 0, d_z = 0;
  double sigma_s = 0.0, sigma_a = 0.0, lambda = 0.0;
  int n = 0;
  int trials = 0;
  double emp_EF = 0.0;
  double theo_EF = 0.0;
  double emp_EI = 0.0;
  double theo_EI_bound = 0.0;
  double se_EF = 0.0;
  double se_EI = 0.0;
  double emp_ratio = 0.0;
  double gamma_bound = 0.0;
  double factor_dim = 0.0;
  double factor_stoch = 0.0;
  double factor_sample = 0.0;
  double rel_err_EF = 0.0;
  double ei_tightness = 0.0;  // emp_EI / theo_EI_bound
  bool warning = false;       // too few trials for the 5% tolerance to mean anything
};

/// Trials below this count set GapReport::warning.
inline constexpr int kMinTrustedTrials = 1000;

/// Closed-form part only (bounds and factors), no sampling.
GapReport gap_bounds(const LinearGaussianSpec& spec, int n);

/// Monte Carlo forward and inverse errors with independent whitened
/// regressions per trial:
///   E_F = |Theta_hat - Theta|_F^2 / d_s,  Theta = [A B]
///   E_I = |B (H_hat - H)|_F^2 / d_s
GapReport measure_gap(const LinearGaussianSpec& spec, int n, int trials, std::uint64_t seed, int jobs = 1);

/// One report per (spec, n) in row-major order.
std::vector<GapReport> sweep_gap(const std::vector<LinearGaussianSpec>& specs, const std::vector<int>& n_grid,
                                 int trials, std::uint64_t seed, int jobs = 1);

/// Product of the three factors equals gamma_bound to `tol` (relative).
bool factorization_exact(const GapReport& r, double tol = 1e-12);
/// Empirical E_I within the bound plus `k` standard errors.
bool bound_direction_holds(const GapReport& r, double k = 2.0);

std::string gap_csv_header();
std::string gap_csv_row(const GapReport& r);
std::string lemma_csv_header();
std::string lemma_csv_row(const LemmaResult& r);

/// Shortest round-trip decimal for CSV output, locale independent.
std::string format_number(double v);

// ---------------------------------------------------------------------------
// Discrete latent demo of the verification subset.

/// Four blocks with `kValues` values each; blocks 0 and 1 form the
/// verification subset S, blocks 2 and 3 are the rest of the scene.
/// Seed support holds the non-S pairs with (z2 + z3) mod V in {0, 1};
/// compositional OOS holds the other pairs, whose individual values all
/// occur in the seed.
struct TlcmSpec {
  static constexpr int kValues = 4;
  static constexpr int kBlocks = 4;
  static constexpr int kActions = 4;
  bool aliasing = false;     // actions 2 and 3 share their effect on S
  bool back_action = false;  // OOS scene values perturb block 1 of S
};

using TlcmState = std::array<int, TlcmSpec::kBlocks>;

bool tlcm_in_seed_support(const TlcmState& z);
TlcmState tlcm_step(const TlcmSpec& spec, const TlcmState& z, int action);

/// Checks by enumeration that S-next does not depend on non-S blocks
/// (insulation) and that distinct actions give distinct S-transitions
/// (injectivity). Flags-off specs pass both.
struct TlcmAudit {
  bool insulated = false;
  bool injective = false;
};
TlcmAudit audit_tlcm(const TlcmSpec& spec);

struct TlcmReport {
  std::size_t seed_size = 0;
  std::size_t oos_size = 0;
  double s_restricted_accuracy = 0.0;
  double dense_accuracy = 0.0;
  /// Best accuracy any function of the S-transition can reach on the OOS
  /// set, by enumeration of its (transition, action) counts.
  double s_optimum = 0.0;
  double aliased_pair_accuracy = 0.0;  // OOS items with action 2 or 3
  double aliased_pair_optimum = 0.0;
};

/// Trains two lookup inverse models on seed-support transitions, one keyed
/// on the S-transition and one on the full transition, and scores both on
/// `oos_size` compositional OOS transitions. Unseen keys fall back to the
/// most frequent seed action.
TlcmReport tlcm_demo(const TlcmSpec& spec, std::size_t seed_size, std::size_t oos_size, std::uint64_t seed);

}  // namespace wav::theory
