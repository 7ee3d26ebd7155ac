#include "declqr/linalg.hpp"

#include <cmath>

#include "declqr/errors.hpp"

namespace declqr {

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double min_singular_value(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().tail(1)(0);
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

DecayCertificate decay_certificate(const Matrix& m) {
  DecayCertificate cert;
  cert.rho = spectral_radius(m);
  if (!(cert.rho < 1.0)) throw Unstable("matrix is not Schur stable (rho = " + std::to_string(cert.rho) + ")");
  cert.gamma = 0.5 * (1.0 + cert.rho);
  cert.horizon = static_cast<int>(std::ceil(std::log(1e-12) / std::log(cert.gamma)));
  cert.kappa = 1.0;
  Matrix power = Matrix::Identity(m.rows(), m.cols());
  double scale = 1.0;
  for (int k = 1; k <= cert.horizon; ++k) {
    power = power * m;
    scale *= cert.gamma;
    cert.kappa = std::max(cert.kappa, spectral_norm(power) / scale);
  }
  return cert;
}

bool certificate_holds(const Matrix& m, const DecayCertificate& cert, double rel_tol) {
  Matrix power = Matrix::Identity(m.rows(), m.cols());
  double bound = cert.kappa;
  for (int k = 0; k <= cert.horizon; ++k) {
    if (spectral_norm(power) > bound * (1.0 + rel_tol)) return false;
    power = power * m;
    bound *= cert.gamma;
  }
  return true;
}

Matrix solve_stein(const Matrix& L, const Matrix& M, double tol, int max_iter) {
  Matrix x = M;
  Matrix a = L;
  for (int it = 0; it < max_iter; ++it) {
    Matrix increment = a.transpose() * x * a;
    x += increment;
    x = symmetrize(x);
    if (increment.norm() <= tol * (1.0 + x.norm())) return x;
    a = a * a;
  }
  throw NoConvergence("Stein equation did not converge");
}

}  // namespace declqr
