#include "declqr/sysid.hpp"

#include <algorithm>
#include <cmath>

#include "declqr/errors.hpp"

namespace declqr {

IdentificationData collect(const SystemModel& model, int samples, double sigma_u, std::uint64_t seed) {
  if (samples < 1) throw ValidationError("identification needs at least one sample");
  if (!(sigma_u > 0.0)) throw ValidationError("sigma_u must be positive");
  const Matrix noise = gaussian_matrix(model.partition.n(), samples, model.sigma_w, derive_seed(seed, 0));
  const Matrix inputs = gaussian_matrix(model.partition.m(), samples, sigma_u, derive_seed(seed, 1));
  return collect_with(model, inputs, noise, sigma_u);
}

IdentificationData collect_with(const SystemModel& model, const Matrix& inputs, const Matrix& noise,
                                double sigma_u) {
  model.check_shapes();
  const int n = model.partition.n();
  const int m = model.partition.m();
  const int samples = static_cast<int>(inputs.cols());
  if (inputs.rows() != m || noise.rows() != n || noise.cols() != samples) {
    throw ShapeMismatch("collect: inputs must be m x N and noise n x N");
  }
  IdentificationData data;
  data.n = n;
  data.m = m;
  data.sigma_u = sigma_u;
  data.sigma_w = model.sigma_w;
  data.Z = Matrix::Zero(n + m, samples);
  data.Xplus = Matrix::Zero(n, samples);
  data.W = noise;
  Vector x = Vector::Zero(n);
  for (int t = 0; t < samples; ++t) {
    data.Z.col(t).head(n) = x;
    data.Z.col(t).tail(m) = inputs.col(t);
    x = model.A * x + model.B * inputs.col(t) + noise.col(t);
    data.Xplus.col(t) = x;
  }
  return data;
}

double default_lambda(double sigma_w, double sigma_u) {
  const double lo = std::min(sigma_w, sigma_u);
  return lo * lo / 40.0;
}

Estimate estimate(const IdentificationData& data, double lambda) {
  if (!(lambda > 0.0)) throw PreconditionViolated("ridge parameter lambda must be positive");
  const int d = static_cast<int>(data.Z.rows());
  Matrix gram = data.Z * data.Z.transpose();
  gram.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("ridge Gram matrix is not positive definite");
  Estimate est;
  est.lambda = lambda;
  est.theta = llt.solve(data.Z * data.Xplus.transpose()).transpose();
  est.A_hat = est.theta.leftCols(data.n);
  est.B_hat = est.theta.rightCols(d - data.n);
  return est;
}

double min_samples(int n, int m, double delta) { return 200.0 * (n + m) * std::log(48.0 / delta); }

ErrorBound error_bound(const ErrorBoundInputs& in) {
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw PreconditionViolated("delta must lie in (0, 1)");
  if (in.samples < min_samples(in.n, in.m, in.delta)) {
    throw PreconditionViolated("N >= 200 (n+m) log(48/delta) fails: N = " + std::to_string(in.samples) +
                               ", need " + std::to_string(min_samples(in.n, in.m, in.delta)));
  }
  const double lo = std::min(in.sigma_w, in.sigma_u);
  const double hi = std::max(in.sigma_w, in.sigma_u);
  if (!(lo > 0.0)) throw PreconditionViolated("sigma_w and sigma_u must be positive");
  if (in.lambda < lo * lo / 40.0 * (1.0 - 1e-12)) {
    throw PreconditionViolated("lambda >= min(sigma_w, sigma_u)^2 / 40 fails");
  }
  if (in.vartheta < in.norm_B) throw PreconditionViolated("vartheta >= ||B|| fails");
  if (!(in.gamma0 < 1.0) || in.kappa0 < 1.0) throw PreconditionViolated("need kappa0 >= 1 and gamma0 < 1");

  const double log_term = std::log(4.0 * in.samples / in.delta);
  ErrorBound out;
  out.z_b = 5.0 * in.kappa0 / (1.0 - in.gamma0) * hi *
            std::sqrt((in.norm_B * in.norm_B * in.m + in.m + in.n) * log_term);
  const double inner = 2.0 * in.n * in.sigma_w * in.sigma_w * (in.n + in.m) *
                           std::log((in.samples + out.z_b * out.z_b / in.lambda) / in.delta) +
                       in.lambda * in.n * in.vartheta * in.vartheta;
  out.eps0 = 4.0 * std::sqrt(160.0 / (in.samples * lo * lo) * inner);
  return out;
}

EventReport event_diagnostics(const IdentificationData& data, const SystemModel* truth, double delta, double lambda) {
  EventReport rep;
  const int samples = data.samples();
  const int n = data.n;
  const int m = data.m;
  rep.samples_ok = samples >= min_samples(n, m, delta);
  const double log_term = std::log(4.0 * samples / delta);
  for (int t = 0; t < samples; ++t) {
    rep.max_w = std::max(rep.max_w, data.W.col(t).norm());
    rep.max_u = std::max(rep.max_u, data.Z.col(t).tail(m).norm());
  }
  rep.e_w = rep.max_w <= data.sigma_w * std::sqrt(5.0 * n * log_term);
  rep.e_u = rep.max_u <= data.sigma_u * std::sqrt(5.0 * m * log_term);

  const Matrix zz = data.Z * data.Z.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(zz, Eigen::EigenvaluesOnly);
  rep.min_eig_zz = es.eigenvalues()(0);
  const double lo = std::min(data.sigma_w, data.sigma_u);
  rep.e_z = rep.min_eig_zz >= (samples - 1) * lo * lo / 40.0;

  if (truth) {
    Matrix theta(n, n + m);
    theta << truth->A, truth->B;
    const Matrix delta_theta = theta - estimate(data, lambda).theta;
    Matrix v = zz;
    v.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(v);
    const double logdet_ratio = 2.0 * llt.matrixLLT().diagonal().array().log().sum() - (n + m) * std::log(lambda);
    const double lhs = (delta_theta * v * delta_theta.transpose()).trace();
    const double rhs = 4.0 * data.sigma_w * data.sigma_w * n * (std::log(4.0 * n / delta) + logdet_ratio) +
                       2.0 * lambda * theta.squaredNorm();
    rep.e_theta = lhs <= rhs;
  }
  return rep;
}

}  // namespace declqr
