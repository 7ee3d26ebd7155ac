#pragma once

// Single-trajectory ridge regression for Theta = [A B] from an open-loop
// run driven by i.i.d. Gaussian inputs, plus its finite-sample error bound.

#include <cstdint>
#include <optional>

#include "declqr/lti_system.hpp"

namespace declqr {

struct IdentificationData {
  Matrix Z;      // (n+m) x N, columns z(t) = [x(t); u(t)]
  Matrix Xplus;  // n x N, columns x(t+1)
  Matrix W;      // n x N, the realized noise (kept for diagnostics)
  double sigma_u = 0.0;
  double sigma_w = 0.0;
  int n = 0;
  int m = 0;

  int samples() const { return static_cast<int>(Z.cols()); }
};

// x(0) = 0, u(t) ~ N(0, sigma_u^2 I), w(t) ~ N(0, sigma_w^2 I), t < N.
IdentificationData collect(const SystemModel& model, int samples, double sigma_u, std::uint64_t seed);
// Same with caller-supplied inputs (m x N) and noise (n x N).
IdentificationData collect_with(const SystemModel& model, const Matrix& inputs, const Matrix& noise,
                                double sigma_u);

struct Estimate {
  Matrix theta;  // n x (n+m)
  Matrix A_hat;
  Matrix B_hat;
  double lambda = 0.0;
};

// min(sigma_w, sigma_u)^2 / 40.
double default_lambda(double sigma_w, double sigma_u);

// Theta^ = X+ Z^T (lambda I + Z Z^T)^{-1}. Throws PreconditionViolated for lambda <= 0.
Estimate estimate(const IdentificationData& data, double lambda);

struct ErrorBoundInputs {
  int n = 0;
  int m = 0;
  int samples = 0;
  double delta = 0.05;
  double lambda = 0.0;
  double sigma_w = 1.0;
  double sigma_u = 1.0;
  double kappa0 = 1.0;
  double gamma0 = 0.5;
  double norm_B = 0.0;
  double vartheta = 1.0;
};

struct ErrorBound {
  double z_b = 0.0;
  double eps0 = 0.0;
};

// Minimum sample count 200 (n+m) log(48/delta).
double min_samples(int n, int m, double delta);

// Throws PreconditionViolated naming the failed inequality.
ErrorBound error_bound(const ErrorBoundInputs& in);

struct EventReport {
  bool samples_ok = false;  // N >= 200 (n+m) log(48/delta)
  bool e_w = false;
  bool e_u = false;
  bool e_z = false;
  std::optional<bool> e_theta;  // only with the true model
  double max_w = 0.0;
  double max_u = 0.0;
  double min_eig_zz = 0.0;

  bool all() const { return e_w && e_u && e_z && e_theta.value_or(true); }
};

// Checks the high-probability events on a realized trajectory. The inputs
// in Z are recovered from its last m rows.
EventReport event_diagnostics(const IdentificationData& data, const SystemModel* truth, double delta, double lambda);

}  // namespace declqr
