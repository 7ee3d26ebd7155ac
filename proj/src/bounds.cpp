#include "declqr/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "declqr/errors.hpp"

namespace declqr {

StabilityConstants stability_constants(const SystemModel& model, const GainSet& gains, const InfoGraph& ig) {
  const auto& part = model.partition;
  StabilityConstants out;
  const DecayCertificate plant = decay_certificate(model.A);
  out.kappa0 = plant.kappa;
  out.gamma0 = plant.gamma;
  out.kappa = plant.kappa;
  out.gamma = plant.gamma;
  for (int s : ig.roots()) {
    const NodeSet& ss = ig.node(s);
    const Matrix loop = submatrix(model.A, ss, ss, part.state, part.state) +
                        submatrix(model.B, ss, ss, part.state, part.input) * gains.nodes[s].K;
    DecayCertificate cert;
    try {
      cert = decay_certificate(loop);
    } catch (const Unstable& e) {
      throw Unstable("root loop at node " + std::to_string(s) + ": " + e.what());
    }
    out.kappa = std::max(out.kappa, cert.kappa);
    out.gamma = std::max(out.gamma, cert.gamma);
    out.roots.push_back(cert);
  }
  return out;
}

MagnitudeConstants magnitude_constants(const SystemModel& model, const GainSet& gains) {
  MagnitudeConstants out;
  out.Gamma = std::max(spectral_norm(model.A), spectral_norm(model.B));
  for (const auto& g : gains.nodes) {
    out.Gamma = std::max({out.Gamma, spectral_norm(g.P), spectral_norm(g.K)});
  }
  out.Gamma_tilde = out.Gamma + 1.0;
  return out;
}

AnalysisConstants analysis_constants(double kappa, double gamma, double gamma_tilde, double sigma_w, int n, int p,
                                     int q, int d_max, double sigma1_R, double sigma1_R_inv) {
  AnalysisConstants out;
  const double gt = gamma_tilde;
  out.zeta_b = std::sqrt(4.0 * n * p * sigma_w * sigma_w * std::pow(gt, 4 * d_max) * kappa * kappa /
                         (1.0 - gamma * gamma));
  out.eps_bar = std::pow(1.0 - gamma, 3) / (768.0 * std::pow(kappa, 4) * p * q) * std::pow(gt + 1.0, -2) *
                std::pow(gt, -9) * std::pow(1.0 + sigma1_R_inv, -2) *
                std::pow(20.0 * (gt + 1.0) * (gt + 1.0) * std::pow(gt, 7) * sigma1_R, -d_max);
  return out;
}

ProblemConstants problem_constants(const SystemModel& model, const Network& net, const GainSet& true_gains) {
  ProblemConstants c;
  c.n = model.partition.n();
  c.m = model.partition.m();
  c.p = model.partition.p();
  c.q = static_cast<int>(net.info.size());
  c.d_max = net.d_max;
  c.sigma_w = model.sigma_w;
  c.sigma1_R = spectral_norm(model.R);
  c.sigma1_R_inv = 1.0 / min_singular_value(model.R);
  c.sigma1_Q = spectral_norm(model.Q);
  c.stab = stability_constants(model, true_gains, net.info);
  c.mag = magnitude_constants(model, true_gains);
  const auto a = analysis_constants(c.stab.kappa, c.stab.gamma, c.mag.Gamma_tilde, c.sigma_w, c.n, c.p, c.q,
                                    c.d_max, c.sigma1_R, c.sigma1_R_inv);
  c.zeta_b = a.zeta_b;
  c.eps_bar = a.eps_bar;
  return c;
}

// ---- Report ----------------------------------------------------------------------

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kHolds:
      return "holds";
    case Verdict::kViolated:
      return "violated";
    case Verdict::kNotApplicable:
      return "not-applicable";
    case Verdict::kUnmeasured:
      return "unmeasured";
  }
  return "unknown";
}

void BoundReport::add(std::string name, double rhs, std::optional<double> measured, std::optional<double> stderr_,
                      bool applicable) {
  BoundEntry e{std::move(name), rhs, measured, stderr_, Verdict::kUnmeasured};
  if (!applicable) {
    e.holds = Verdict::kNotApplicable;
  } else if (measured) {
    const double slack = 3.0 * stderr_.value_or(0.0);
    e.holds = *measured <= rhs + slack ? Verdict::kHolds : Verdict::kViolated;
  }
  entries.push_back(std::move(e));
}

const BoundEntry* BoundReport::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

int BoundReport::violations() const {
  return static_cast<int>(
      std::count_if(entries.begin(), entries.end(), [](const BoundEntry& e) { return e.holds == Verdict::kViolated; }));
}

// ---- Riccati perturbation --------------------------------------------------------

namespace {

double perturb_core(const ProblemConstants& c) {
  const double k = c.stab.kappa;
  const double g = c.stab.gamma;
  return k * k / (1.0 - g * g) * (1.0 + c.sigma1_R_inv);
}

double growth(const ProblemConstants& c) { return 20.0 * std::pow(c.mag.Gamma_tilde, 9) * c.sigma1_R; }

}  // namespace

double root_eps_threshold(const ProblemConstants& c) {
  const double k = c.stab.kappa;
  const double g = c.stab.gamma;
  return std::pow(1.0 - g * g, 2) / (768.0 * std::pow(k, 4)) * std::pow(c.mag.Gamma_tilde, -11) *
         std::pow(1.0 + c.sigma1_R_inv, -2);
}

double node_eps_threshold(const ProblemConstants& c) { return root_eps_threshold(c) * std::pow(growth(c), -c.d_max); }

PerturbationBound riccati_perturbation_bound(double eps, const ProblemConstants& c, int l_rs) {
  const double gt = c.mag.Gamma_tilde;
  PerturbationBound out;
  out.p_rhs = 6.0 * perturb_core(c) * std::pow(gt, 5) * eps;
  out.k_rhs = 18.0 * perturb_core(c) * std::pow(gt, 8) * eps;
  if (l_rs == 0) {
    out.admissible = eps <= root_eps_threshold(c);
  } else {
    out.k_rhs *= std::pow(growth(c), l_rs - 1);
    out.p_rhs *= std::pow(growth(c), l_rs);
    out.admissible = eps <= node_eps_threshold(c);
  }
  return out;
}

BoundReport riccati_perturbation_bounds(double eps, const ProblemConstants& c, const InfoGraph& ig,
                                        const GainSet* true_gains, const GainSet* est_gains) {
  BoundReport rep;
  rep.eps = eps;
  const bool measured = true_gains && est_gains;
  for (std::size_t r = 0; r < ig.size(); ++r) {
    const int ri = static_cast<int>(r);
    const int l = ig.is_root(ri) ? 0 : *ig.path_length(ri, ig.root_of(ri));
    const auto b = riccati_perturbation_bound(eps, c, l);
    std::string label = "{";
    for (std::size_t k = 0; k < ig.node(ri).size(); ++k) label += (k ? "," : "") + std::to_string(ig.node(ri)[k] + 1);
    label += "}";
    const std::string kind = l == 0 ? "root" : "node";
    std::optional<double> dp, dk;
    if (measured) {
      dp = spectral_norm(est_gains->nodes[r].P - true_gains->nodes[r].P);
      dk = spectral_norm(est_gains->nodes[r].K - true_gains->nodes[r].K);
    }
    rep.add(kind + ".P" + label, b.p_rhs, dp, std::nullopt, b.admissible);
    rep.add(kind + ".K" + label, b.k_rhs, dk, std::nullopt, b.admissible);
  }
  return rep;
}

// ---- Cost and state bounds --------------------------------------------------------

namespace {

// 4 sigma_w^2 Gamma~^{4 Dmax} kappa^2 / (1 - gamma^2)
double cov_core(const ProblemConstants& c) {
  const double k = c.stab.kappa;
  const double g = c.stab.gamma;
  return 4.0 * c.sigma_w * c.sigma_w * std::pow(c.mag.Gamma_tilde, 4 * c.d_max) * k * k / (1.0 - g * g);
}

double du_sqrt(const ProblemConstants& c) {
  const double k = c.stab.kappa;
  const double g = c.stab.gamma;
  return 58.0 * k * k * std::pow(c.mag.Gamma_tilde + 1.0, 2 * c.d_max + 3) * c.p * c.p * c.q * c.q /
         std::pow(1.0 - g, 2) * c.zeta_b * c.eps_bar;
}

double dx_sqrt(const ProblemConstants& c) {
  const double k = c.stab.kappa;
  const double g = c.stab.gamma;
  return 58.0 * k * k * k * c.mag.Gamma * std::pow(c.mag.Gamma_tilde + 1.0, 2 * c.d_max + 3) * c.p * c.p * c.q *
         c.q / std::pow(1.0 - g, 3) * c.zeta_b * c.eps_bar;
}

}  // namespace

double zeta_cov_rhs(const ProblemConstants& c) { return c.p * cov_core(c); }
double zeta_sq_rhs(const ProblemConstants& c) { return c.n * c.p * cov_core(c); }
double x_tilde_rhs(const ProblemConstants& c) { return static_cast<double>(c.n) * c.p * c.q * c.q * cov_core(c); }
double u_tilde_rhs(const ProblemConstants& c) { return x_tilde_rhs(c) * c.mag.Gamma_tilde * c.mag.Gamma_tilde; }
double du_rhs(const ProblemConstants& c) { return std::pow(du_sqrt(c), 2); }
double dx_rhs(const ProblemConstants& c) { return std::pow(dx_sqrt(c), 2); }
double x_hat_rhs(const ProblemConstants& c) { return std::pow(dx_sqrt(c) + c.q * c.zeta_b, 2); }
double u_hat_rhs(const ProblemConstants& c) {
  return std::pow(du_sqrt(c) + c.q * c.mag.Gamma_tilde * c.zeta_b, 2);
}

double tilde_gap_rhs(const ProblemConstants& c, double eps, double phi) {
  const double k = c.stab.kappa;
  const double g = c.stab.gamma;
  const double gt = c.mag.Gamma_tilde;
  return 72.0 * std::pow(k, 4) * c.sigma_w * c.sigma_w * c.n * c.p * c.q / std::pow(1.0 - g * g, 2) *
             std::pow(gt, 4 * c.d_max + 8) * (std::pow(c.mag.Gamma, 3) + c.sigma1_R) * (1.0 + c.sigma1_R_inv) *
             std::pow(growth(c), c.d_max) * eps +
         phi;
}

double hat_gap_rhs(const ProblemConstants& c) {
  const double k = c.stab.kappa;
  const double g = c.stab.gamma;
  const double gt = c.mag.Gamma_tilde;
  return 696.0 * std::pow(k, 6) * c.sigma_w * c.sigma_w * c.n * std::pow(c.p, 4) * std::pow(c.q, 3) /
         (std::pow(1.0 - g, 4) * (1.0 - g * g)) * std::pow(gt, 4 * c.d_max + 2) *
         std::pow(gt + 1.0, 2 * c.d_max + 3) * (c.sigma1_Q + c.sigma1_R) * c.eps_bar;
}

StationaryMeasurements stationary_measurements(const SystemModel& model, const Network& net,
                                               const GainSet& true_gains, const GainSet& est_gains,
                                               const Matrix& a_hat, const Matrix& b_hat) {
  const auto& part = model.partition;
  const int n = part.n();
  StationaryMeasurements out;
  out.j_star = optimal_cost(true_gains, net.info, part, model.sigma_w);

  // The gaps are O(eps) or smaller, far below the rounding level of the
  // costs themselves, so every loop is written in difference coordinates:
  //   y = (zeta*, delta = zeta~ - zeta*, d = zeta^ - zeta~, e = x^ - x~)
  // with x~ = S zeta~. Noise only drives zeta*; everything downstream is
  // coupled through blocks built from dA, dB, dK directly.
  GainSet dk = est_gains;
  for (std::size_t r = 0; r < dk.nodes.size(); ++r) dk.nodes[r].K -= true_gains.nodes[r].K;
  const CeModel ce(a_hat, b_hat, est_gains, net, part);
  const StackedDynamics hat = stack_dynamics(ce.zeta);
  const StackedDynamics star = stack_dynamics(InternalStateModel(model.A, model.B, true_gains, net.info, part));
  const StackedDynamics tilde = stack_dynamics(InternalStateModel(model.A, model.B, est_gains, net.info, part));
  const Matrix zero_a = Matrix::Zero(n, n);
  const StackedDynamics gain_gap = stack_dynamics(InternalStateModel(zero_a, model.B, dk, net.info, part));
  const StackedDynamics model_gap =
      stack_dynamics(InternalStateModel(a_hat - model.A, b_hat - model.B, est_gains, net.info, part));
  const int nz = static_cast<int>(hat.M.rows());
  const Matrix da = model.A - ce.a_hat_masked;
  const Matrix db = model.B - ce.b_hat_masked;
  const Matrix& k = hat.K;
  const Matrix& s = hat.S;

  // w^(t) = w(t) + dA x^(t) + dB u^(t), x^ = e + S zeta~, u^ = K (d + zeta~).
  const int o_star = 0, o_delta = nz, o_d = 2 * nz, o_e = 3 * nz;
  const int dim = 3 * nz + n;
  const Matrix feed = model_gap.M + hat.E * (da * s + db * k);
  Matrix big = Matrix::Zero(dim, dim);
  big.block(o_star, o_star, nz, nz) = star.M;
  big.block(o_delta, o_star, nz, nz) = gain_gap.M;
  big.block(o_delta, o_delta, nz, nz) = tilde.M;
  big.block(o_d, o_star, nz, nz) = feed;
  big.block(o_d, o_delta, nz, nz) = feed;
  big.block(o_d, o_d, nz, nz) = hat.M + hat.E * db * k;
  big.block(o_d, o_e, nz, n) = hat.E * da;
  big.block(o_e, o_d, n, nz) = model.B * k;
  big.block(o_e, o_e, n, n) = model.A;
  Matrix g = Matrix::Zero(dim, n);
  g.block(o_star, 0, nz, n) = star.E;

  const double rho = spectral_radius(big);
  if (!(rho < 1.0)) {
    throw Unstable("certainty-equivalent closed loop has spectral radius " + std::to_string(rho));
  }
  const Matrix sigma = solve_stein(big.transpose(), model.sigma_w * model.sigma_w * g * g.transpose());
  const auto quad = [&](const Matrix& c) { return std::max(0.0, (c * sigma * c.transpose()).trace()); };
  // E[a^T W b] for a = ca y, b = cb y.
  const auto cross = [&](const Matrix& ca, const Matrix& w, const Matrix& cb) {
    return (w * cb * sigma * ca.transpose()).trace();
  };

  Matrix zeta_tilde = Matrix::Zero(nz, dim);
  zeta_tilde.block(0, o_star, nz, nz).setIdentity();
  zeta_tilde.block(0, o_delta, nz, nz).setIdentity();
  Matrix pick_d = Matrix::Zero(nz, dim);
  pick_d.block(0, o_d, nz, nz).setIdentity();
  Matrix pick_e = Matrix::Zero(n, dim);
  pick_e.block(0, o_e, n, n).setIdentity();
  Matrix pick_delta = Matrix::Zero(nz, dim);
  pick_delta.block(0, o_delta, nz, nz).setIdentity();
  Matrix pick_star = Matrix::Zero(nz, dim);
  pick_star.block(0, o_star, nz, nz).setIdentity();

  const Matrix x_tilde = s * zeta_tilde;
  const Matrix u_tilde = k * zeta_tilde;
  const Matrix x_hat = pick_e + x_tilde;
  const Matrix u_hat = k * (pick_d + zeta_tilde);
  const Matrix du = k * pick_d;
  const Matrix x_star = s * pick_star;
  const Matrix u_star = star.K * pick_star;
  const Matrix dx_tilde = s * pick_delta;
  const Matrix du_tilde = k * pick_delta + gain_gap.K * pick_star;

  out.tilde_gap = cross(dx_tilde, model.Q, x_tilde + x_star) + cross(du_tilde, model.R, u_tilde + u_star);
  out.hat_gap = cross(pick_e, model.Q, x_hat + x_tilde) + cross(du, model.R, u_hat + u_tilde);
  out.j_tilde = out.j_star + out.tilde_gap;
  out.j_hat = out.j_tilde + out.hat_gap;
  out.x_hat_sq = quad(x_hat);
  out.u_hat_sq = quad(u_hat);
  out.x_tilde_sq = quad(x_tilde);
  out.u_tilde_sq = quad(u_tilde);
  out.du_sq = quad(du);
  out.dx_sq = quad(pick_e);
  const Matrix zt_cov = zeta_tilde * sigma * zeta_tilde.transpose();
  for (std::size_t r = 0; r < net.info.size(); ++r) {
    const int d = part.state.dim(net.info.node(static_cast<int>(r)));
    const int off = tilde.offsets[r];
    const Matrix block = zt_cov.block(off, off, d, d);
    out.max_zeta_tilde_cov = std::max(out.max_zeta_tilde_cov, spectral_norm(block));
    out.max_zeta_tilde_sq = std::max(out.max_zeta_tilde_sq, block.trace());
  }
  return out;
}

BoundReport suboptimality_bounds(const ProblemConstants& c, double eps, double phi,
                                 const StationaryMeasurements* measured, bool strict) {
  if (strict && eps > c.eps_bar) {
    throw PreconditionViolated("eps = " + std::to_string(eps) + " exceeds eps_bar = " + std::to_string(c.eps_bar));
  }
  const bool small = eps <= node_eps_threshold(c);
  const bool tiny = eps <= c.eps_bar;
  const auto m = [&](double StationaryMeasurements::*field) -> std::optional<double> {
    if (!measured) return std::nullopt;
    return measured->*field;
  };
  std::optional<double> tilde_measured, hat_measured;
  if (measured) {
    tilde_measured = measured->tilde_gap;
    hat_measured = measured->hat_gap;
  }
  BoundReport rep;
  rep.eps = eps;
  rep.add("zeta.cov", zeta_cov_rhs(c), m(&StationaryMeasurements::max_zeta_tilde_cov), std::nullopt, small);
  rep.add("zeta.sq", zeta_sq_rhs(c), m(&StationaryMeasurements::max_zeta_tilde_sq), std::nullopt, small);
  rep.add("x_tilde.sq", x_tilde_rhs(c), m(&StationaryMeasurements::x_tilde_sq), std::nullopt, small);
  rep.add("u_tilde.sq", u_tilde_rhs(c), m(&StationaryMeasurements::u_tilde_sq), std::nullopt, small);
  rep.add("gap.tilde", tilde_gap_rhs(c, eps, phi), tilde_measured, std::nullopt, small);
  rep.add("du.sq", du_rhs(c), m(&StationaryMeasurements::du_sq), std::nullopt, tiny);
  rep.add("dx.sq", dx_rhs(c), m(&StationaryMeasurements::dx_sq), std::nullopt, tiny);
  rep.add("x_hat.sq", x_hat_rhs(c), m(&StationaryMeasurements::x_hat_sq), std::nullopt, tiny);
  rep.add("u_hat.sq", u_hat_rhs(c), m(&StationaryMeasurements::u_hat_sq), std::nullopt, tiny);
  rep.add("gap.hat", hat_gap_rhs(c), hat_measured, std::nullopt, tiny);
  return rep;
}

// ---- End-to-end --------------------------------------------------------------------

EndToEndBound end_to_end_bound(const ProblemConstants& c, const EndToEndInputs& in) {
  EndToEndBound out;
  if (c.sigma_w == 0.0) return out;
  if (in.check_preconditions && c.d_max > in.d_cap) {
    throw PreconditionViolated("D_max = " + std::to_string(c.d_max) + " exceeds D_cap = " + std::to_string(in.d_cap));
  }
  const double lo = std::min(c.sigma_w, in.sigma_u);
  const double hi = std::max(c.sigma_w, in.sigma_u);
  if (in.check_preconditions && in.lambda < lo * lo / 40.0 * (1.0 - 1e-12)) {
    throw PreconditionViolated("lambda >= min(sigma_w, sigma_u)^2 / 40 fails");
  }
  const double big_n = in.samples;
  out.z_b = 5.0 * c.stab.kappa0 / (1.0 - c.stab.gamma0) * hi *
            std::sqrt((in.norm_B * in.norm_B * in.m + in.m + in.n) * std::log(4.0 * big_n / in.delta));
  out.alpha = 160.0 / (lo * lo) *
              (2.0 * in.n * c.sigma_w * c.sigma_w * (in.n + in.m) *
                   std::log((big_n + out.z_b * out.z_b / in.lambda) / in.delta) +
               in.lambda * in.n * in.vartheta * in.vartheta);
  if (in.check_preconditions && big_n < out.alpha / c.eps_bar) {
    throw PreconditionViolated("N >= alpha / eps_bar fails: need N >= " + std::to_string(out.alpha / c.eps_bar));
  }
  const double k = c.stab.kappa;
  const double g = c.stab.gamma;
  const double gt = c.mag.Gamma_tilde;
  const int d = in.d_cap;
  out.rhs = in.c1 * std::pow(k, 6) * c.sigma_w * c.sigma_w * c.n * std::pow(c.p, 4) * std::pow(c.q, 3) /
            std::pow(1.0 - g * g, 2) * std::pow(gt, 11 * d + 5) * std::pow(gt + 1.0, 2 * d + 3) *
            (std::pow(c.mag.Gamma, 3) + c.sigma1_R + c.sigma1_Q) * std::pow(c.sigma1_R, d) *
            std::sqrt(out.alpha / big_n);
  return out;
}

double calibrate_c1(const ProblemConstants& c, EndToEndInputs in, const std::vector<double>& gaps, double delta) {
  if (gaps.empty()) throw ValidationError("no gaps to calibrate against");
  if (!(delta >= 0.0 && delta < 1.0)) throw PreconditionViolated("delta must lie in [0, 1)");
  in.c1 = 1.0;
  const double unit = end_to_end_bound(c, in).rhs;
  if (!(unit > 0.0)) throw PreconditionViolated("end-to-end bound is zero; C1 is undetermined");
  std::vector<double> ratios;
  for (double g : gaps) ratios.push_back(std::max(0.0, g / unit));
  std::sort(ratios.begin(), ratios.end());
  const auto need = static_cast<std::size_t>(std::ceil((1.0 - delta) * static_cast<double>(ratios.size()) - 1e-9));
  return need == 0 ? 0.0 : ratios[need - 1];
}

}  // namespace declqr
