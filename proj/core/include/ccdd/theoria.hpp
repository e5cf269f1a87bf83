#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ccdd/batch.hpp"
#include "ccdd/embedder.hpp"
#include "ccdd/schedules.hpp"

/// Numerical checks of the structural claims behind joint diffusion: looped
/// networks as Euler integrators, Lie-Trotter splitting of the coupled
/// generator, finite discrete support and monotone information loss.
namespace ccdd::theoria {

/// Residual block Phi(h) = h + tanh(h W1 + b1) W2 + b2, row-wise on L x d.
struct LoopedBlock {
  Matrix w1;  // d x hidden
  Matrix b1;  // 1 x hidden
  Matrix w2;  // hidden x d
  Matrix b2;  // 1 x d

  Matrix apply(const Matrix& h) const;
  int dim() const { return static_cast<int>(w1.rows()); }

  static LoopedBlock random(int dim, int hidden, std::uint64_t seed, double scale = 0.5);
  /// Phi(h) = h.
  static LoopedBlock identity(int dim, int hidden);
};

struct LoopedRollout {
  std::vector<Matrix> euler;   // T + 1 states
  std::vector<Matrix> looped;  // T + 1 states
  double max_abs_gap = 0.0;
};

/// Euler with step 1/T on v(z) = T (Phi(z) - z) next to T direct applications
/// of Phi. Throws DomainError for T < 1.
LoopedRollout simulate_looped_via_euler(const LoopedBlock& block, const Matrix& h0, int steps);

/// Time-dependent vector field v(z, t).
using VectorField = std::function<Matrix(const Matrix&, double)>;

/// Classical RK4 with `steps` uniform steps on [0, horizon].
Matrix integrate_rk4(const VectorField& field, const Matrix& z0, double horizon, int steps);

struct EmulationResult {
  std::vector<int> meshes;
  std::vector<double> errors;  // terminal max-abs error per mesh
  double slope = 0.0;          // log error vs log step size
};

/// For each mesh T, composes the per-step blocks z -> z + dt v(z, t_k) and
/// compares the terminal state with an RK4 reference on `reference_steps`.
EmulationResult looped_emulates_integrator(const VectorField& field, const Matrix& z0,
                                           double horizon, std::span<const int> meshes,
                                           int reference_steps);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Two-state CTMC X (rates g01: 0->1, g10: 1->0) modulating an OU process
/// dZ = kappa (mu_X - Z) dt + sigma dW with mu_0 = -1, mu_1 = +1. The law of
/// (X, Z) is tracked as per-state cell masses on a finite-volume grid with
/// reflecting ends.
struct CoupledToyProcess {
  double g01 = 1.0;
  double g10 = 1.0;
  double kappa = 2.0;
  double sigma = 0.5;
  double z_min = -4.0;
  double z_max = 4.0;
  int cells = 512;
  double horizon = 1.0;
  double reference_step = 1e-4;
  /// Initial law: X = 0 with probability p0, Z ~ N(z0_mean, z0_std^2).
  double p0 = 1.0;
  double z0_mean = 0.0;
  double z0_std = 0.3;

  /// Throws ConfigError on an invalid grid or a step beyond the explicit
  /// stability limit.
  void validate() const;
};

/// Per-state cell masses, 2 x cells.
using JointLaw = Matrix;

JointLaw initial_law(const CoupledToyProcess& process);
/// Fully coupled reference law at the horizon.
JointLaw reference_law(const CoupledToyProcess& process);
/// Lie-Trotter law: exact CTMC step, then the frozen-state transport, per
/// macro step `dt`.
JointLaw split_law(const CoupledToyProcess& process, double dt);
double total_variation(const JointLaw& a, const JointLaw& b);

/// TV distance between the split and reference laws at the horizon.
double trotter_error(const CoupledToyProcess& process, double dt);

struct SupportCounts {
  std::size_t discrete_embedded = 0;
  std::size_t continuous = 0;
  std::size_t bound = 0;  // (V + 1)^L
};

/// Counts distinct embedded discrete forward states (random clean sequences,
/// masked positions embedded as zero) and distinct continuous forward draws
/// around one fixed clean embedding. Throws ConfigError when V L > 16.
SupportCounts support_atomicity_check(int vocab_size, int length, const Codebook& codebook,
                                      const DiscreteSchedule& discrete,
                                      const ContinuousSchedule& continuous, double t,
                                      int n_samples, std::uint64_t seed);

/// Exact I(x0; x_t) in nats for one position with source distribution p.
double mutual_information(std::span<const double> source, const DiscreteSchedule& schedule,
                          double t);
double entropy(std::span<const double> p);

struct InfoDecayResult {
  std::vector<double> t;
  std::vector<double> mi;
  bool non_increasing = true;
  double source_entropy = 0.0;
  /// Logit-ensemble check.
  double token_entropy = 0.0;
  double logit_token_mi = 0.0;
  bool bounds_hold = true;
};

/// MI along the grid for a uniform source over V (V <= 8), plus the
/// logit-ensemble bounds H(token) <= ln V and I(logits; token) <= H(token)
/// from `n_samples` plug-in draws.
InfoDecayResult info_decay_suite(int vocab_size, const DiscreteSchedule& schedule,
                                 std::span<const double> t_grid, int n_samples,
                                 std::uint64_t seed);

struct CheckRow {
  std::string name;
  double value = 0.0;
  std::string criterion;
  bool pass = false;
};

struct VerifyReport {
  std::vector<CheckRow> rows;
  /// CSV lines "series,x,y" with the convergence data behind the slopes.
  std::vector<std::string> series;
  bool all_pass() const;
};

/// Runs the whole suite on the default configuration.
VerifyReport run_verify_suite(std::uint64_t seed);

}  // namespace ccdd::theoria
