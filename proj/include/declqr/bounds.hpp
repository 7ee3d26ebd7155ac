#pragma once

// Numerical evaluation of the perturbation, suboptimality and sample
// complexity bounds, plus exact stationary measurements to compare them with.

#include <optional>
#include <string>
#include <vector>

#include "declqr/controllers.hpp"
#include "declqr/riccati.hpp"

namespace declqr {

struct StabilityConstants {
  double kappa0 = 1.0;
  double gamma0 = 0.5;
  double kappa = 1.0;
  double gamma = 0.5;
  std::vector<DecayCertificate> roots;  // per root, in InfoGraph::roots() order
};

// Certificates for A and every root loop A_ss + B_ss K_s. Throws Unstable
// naming the root.
StabilityConstants stability_constants(const SystemModel& model, const GainSet& gains, const InfoGraph& ig);

struct MagnitudeConstants {
  double Gamma = 0.0;
  double Gamma_tilde = 1.0;
};

MagnitudeConstants magnitude_constants(const SystemModel& model, const GainSet& gains);

// Everything the bound formulas consume.
struct ProblemConstants {
  int n = 0;
  int m = 0;
  int p = 0;
  int q = 0;  // |U|
  int d_max = 0;
  double sigma_w = 1.0;
  double sigma1_R = 1.0;
  double sigma1_R_inv = 1.0;
  double sigma1_Q = 1.0;
  StabilityConstants stab;
  MagnitudeConstants mag;
  double zeta_b = 0.0;
  double eps_bar = 0.0;
};

struct AnalysisConstants {
  double zeta_b = 0.0;
  double eps_bar = 0.0;
};

AnalysisConstants analysis_constants(double kappa, double gamma, double gamma_tilde, double sigma_w, int n, int p,
                                     int q, int d_max, double sigma1_R, double sigma1_R_inv);

ProblemConstants problem_constants(const SystemModel& model, const Network& net, const GainSet& true_gains);

// ---- Report plumbing ------------------------------------------------------------

enum class Verdict { kHolds, kViolated, kNotApplicable, kUnmeasured };
std::string to_string(Verdict v);

struct BoundEntry {
  std::string name;
  double rhs = 0.0;
  std::optional<double> measured;
  std::optional<double> stderr_;
  Verdict holds = Verdict::kUnmeasured;
};

struct BoundReport {
  double eps = 0.0;
  std::vector<BoundEntry> entries;

  // Records an entry; the verdict is kHolds when measured <= rhs + 3 stderr.
  void add(std::string name, double rhs, std::optional<double> measured = std::nullopt,
           std::optional<double> stderr_ = std::nullopt, bool applicable = true);
  const BoundEntry* find(const std::string& name) const;
  int violations() const;
};

// ---- Riccati perturbation ---------------------------------------------------------

// Admissibility thresholds on eps for roots and for general nodes.
double root_eps_threshold(const ProblemConstants& c);
double node_eps_threshold(const ProblemConstants& c);

struct PerturbationBound {
  double p_rhs = 0.0;
  double k_rhs = 0.0;
  bool admissible = false;
};

// l_rs = 0 for a root; otherwise the path length from r to its root.
PerturbationBound riccati_perturbation_bound(double eps, const ProblemConstants& c, int l_rs);

// Per-node entries "P[r]"/"K[r]" with measured ||P^_r - P_r||, ||K^_r - K_r||.
BoundReport riccati_perturbation_bounds(double eps, const ProblemConstants& c, const InfoGraph& ig,
                                        const GainSet* true_gains = nullptr, const GainSet* est_gains = nullptr);

// ---- Cost and state bounds ----------------------------------------------------------

double zeta_cov_rhs(const ProblemConstants& c);
double zeta_sq_rhs(const ProblemConstants& c);
double x_tilde_rhs(const ProblemConstants& c);
double u_tilde_rhs(const ProblemConstants& c);
double du_rhs(const ProblemConstants& c);
double dx_rhs(const ProblemConstants& c);
double x_hat_rhs(const ProblemConstants& c);
double u_hat_rhs(const ProblemConstants& c);
double tilde_gap_rhs(const ProblemConstants& c, double eps, double phi);
double hat_gap_rhs(const ProblemConstants& c);

// Exact stationary second moments of the closed loops driven by (A^, B^, K^).
// Covariances start at zero and increase monotonically in t, so these are
// also the suprema over t.
struct StationaryMeasurements {
  double j_star = 0.0;
  double j_tilde = 0.0;
  double j_hat = 0.0;
  double max_zeta_tilde_cov = 0.0;  // max_s ||lim E zeta~_s zeta~_s^T||
  double max_zeta_tilde_sq = 0.0;   // max_s E ||zeta~_s||^2
  double x_tilde_sq = 0.0;
  double u_tilde_sq = 0.0;
  double x_hat_sq = 0.0;
  double u_hat_sq = 0.0;
  double du_sq = 0.0;  // E ||u^ - u~||^2
  double dx_sq = 0.0;  // E ||x^ - x~||^2
  double tilde_gap = 0.0;  // J~ - J*, computed without cancellation
  double hat_gap = 0.0;    // J^ - J~
};

// Throws Unstable when the certainty-equivalent closed loop is not Schur stable.
StationaryMeasurements stationary_measurements(const SystemModel& model, const Network& net,
                                               const GainSet& true_gains, const GainSet& est_gains,
                                               const Matrix& a_hat, const Matrix& b_hat);

// All cost/state bounds at eps. With strict set, eps > eps_bar throws
// PreconditionViolated; otherwise the gated entries become not-applicable.
BoundReport suboptimality_bounds(const ProblemConstants& c, double eps, double phi,
                                 const StationaryMeasurements* measured = nullptr, bool strict = false);

// ---- End-to-end ----------------------------------------------------------------------

struct EndToEndInputs {
  int n = 0;
  int m = 0;
  double samples = 0.0;
  double delta = 0.05;
  double lambda = 0.0;
  double vartheta = 1.0;
  double sigma_u = 1.0;
  double norm_B = 0.0;
  int d_cap = 0;
  double c1 = 1.0;
  bool check_preconditions = true;
};

struct EndToEndBound {
  double alpha = 0.0;
  double z_b = 0.0;
  double rhs = 0.0;
};

// Requires N >= alpha / eps_bar and D_max <= D_cap (when checking).
EndToEndBound end_to_end_bound(const ProblemConstants& c, const EndToEndInputs& in);

// Smallest C1 for which the end-to-end bound covers at least a (1 - delta)
// fraction of the measured gaps (in.c1 is ignored). Nonpositive gaps are
// covered by any C1 >= 0.
double calibrate_c1(const ProblemConstants& c, EndToEndInputs in, const std::vector<double>& gaps, double delta);

}  // namespace declqr
