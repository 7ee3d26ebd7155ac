#pragma once

#include <Eigen/Dense>

namespace declqr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

double spectral_norm(const Matrix& m);
double spectral_radius(const Matrix& m);
double min_singular_value(const Matrix& m);
Matrix symmetrize(const Matrix& m);

// ||M^k|| <= kappa * gamma^k for 0 <= k <= horizon, with gamma = (1 + rho) / 2
// and horizon the smallest K with gamma^K < 1e-12.
struct DecayCertificate {
  double rho = 0.0;
  double gamma = 0.0;
  double kappa = 1.0;
  int horizon = 0;
};

// Requires rho(m) < 1; throws Unstable otherwise.
DecayCertificate decay_certificate(const Matrix& m);

// Verifies the certificate against explicit matrix powers.
bool certificate_holds(const Matrix& m, const DecayCertificate& cert, double rel_tol = 1e-12);

// Solves X = M + L^T X L for Schur-stable L by squaring (Smith doubling).
Matrix solve_stein(const Matrix& L, const Matrix& M, double tol = 1e-14, int max_iter = 200);

}  // namespace declqr
