#pragma once

// Gain/cost recursion over the information graph:
//
//   K_r = -(R_rr + B_sr^T P_s B_sr)^{-1} B_sr^T P_s A_sr
//   P_r = Q_rr + K_r^T R_rr K_r + (A_sr + B_sr K_r)^T P_s (A_sr + B_sr K_r)
//
// where s is the unique successor of r. At self-loop roots this is a DARE.

#include <string>
#include <vector>

#include "declqr/linalg.hpp"
#include "declqr/lti_system.hpp"

namespace declqr {

enum class GainKind { kTrueModel, kEstimate, kMixedTilde };

std::string to_string(GainKind kind);

struct NodeGain {
  Matrix K;  // m_r x n_r
  Matrix P;  // n_r x n_r
};

struct GainSet {
  GainKind kind = GainKind::kTrueModel;
  std::vector<NodeGain> nodes;  // indexed by information-graph node
};

struct DareSolution {
  Matrix P;
  Matrix K;
  int iterations = 0;
};

struct RiccatiOptions {
  double tol = 1e-12;
  long max_iter = 1'000'000;
};

// Value iteration from P = Q until ||P+ - P||_F <= tol (1 + ||P||_F).
// Throws NoConvergence.
DareSolution solve_root_dare(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                             const RiccatiOptions& options = {});

// One application of the gain formula and the P update.
NodeGain riccati_step(const Matrix& a_sr, const Matrix& b_sr, const Matrix& q_rr, const Matrix& r_rr,
                      const Matrix& p_s);

// Runs the recursion on (a, b), which may be the true matrices or estimates;
// Q and R always come from `cost`.
GainSet synthesize_gains(const Matrix& a, const Matrix& b, const SystemModel& cost, const InfoGraph& ig,
                         GainKind kind, const RiccatiOptions& options = {});

inline GainSet synthesize_gains(const SystemModel& model, const InfoGraph& ig, const RiccatiOptions& options = {}) {
  return synthesize_gains(model.A, model.B, model, ig, GainKind::kTrueModel, options);
}

// sigma_w^2 * sum_i Tr(I_{{i},s} P_s I_{s,{i}}) with s = s_i(0).
double noise_weighted_trace(const std::vector<Matrix>& p, const InfoGraph& ig, const Partition& part,
                            double sigma_w);

// J* from true-model gains.
double optimal_cost(const GainSet& gains, const InfoGraph& ig, const Partition& part, double sigma_w);

struct TildeCost {
  std::vector<Matrix> P;
  double cost = 0.0;
};

// P~ recursion with true (A, B) and the supplied gains, and the resulting
// cost J~. Throws UnstableMixedLoop when a root loop A_ss + B_ss K_s is not
// Schur stable.
TildeCost tilde_P_and_cost(const GainSet& gains, const SystemModel& model, const InfoGraph& ig);

}  // namespace declqr
