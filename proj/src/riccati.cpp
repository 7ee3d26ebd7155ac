#include "declqr/riccati.hpp"

#include <cmath>

#include "declqr/errors.hpp"

namespace declqr {

std::string to_string(GainKind kind) {
  switch (kind) {
    case GainKind::kTrueModel:
      return "true-model";
    case GainKind::kEstimate:
      return "estimate";
    case GainKind::kMixedTilde:
      return "mixed-tilde";
  }
  return "unknown";
}

NodeGain riccati_step(const Matrix& a_sr, const Matrix& b_sr, const Matrix& q_rr, const Matrix& r_rr,
                      const Matrix& p_s) {
  NodeGain out;
  const Matrix bt_p = b_sr.transpose() * p_s;
  const Matrix gram = symmetrize(r_rr + bt_p * b_sr);
  out.K = -gram.llt().solve(bt_p * a_sr);
  const Matrix closed = a_sr + b_sr * out.K;
  out.P = symmetrize(q_rr + out.K.transpose() * r_rr * out.K + closed.transpose() * p_s * closed);
  return out;
}

DareSolution solve_root_dare(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                             const RiccatiOptions& options) {
  if (a.rows() != a.cols() || b.rows() != a.rows() || q.rows() != a.rows() || r.rows() != b.cols()) {
    throw ShapeMismatch("solve_root_dare: inconsistent shapes");
  }
  DareSolution sol;
  sol.P = symmetrize(q);
  for (long it = 1; it <= options.max_iter; ++it) {
    NodeGain next = riccati_step(a, b, q, r, sol.P);
    const double change = (next.P - sol.P).norm();
    const double scale = 1.0 + sol.P.norm();
    sol.P = std::move(next.P);
    sol.K = std::move(next.K);
    sol.iterations = static_cast<int>(it);
    if (!std::isfinite(change)) break;
    if (change <= options.tol * scale) {
      // Gain at the fixed point.
      sol.K = riccati_step(a, b, q, r, sol.P).K;
      return sol;
    }
  }
  throw NoConvergence("Riccati value iteration did not converge within " + std::to_string(options.max_iter) +
                      " iterations");
}

GainSet synthesize_gains(const Matrix& a, const Matrix& b, const SystemModel& cost, const InfoGraph& ig,
                         GainKind kind, const RiccatiOptions& options) {
  const auto& part = cost.partition;
  if (a.rows() != part.n() || a.cols() != part.n() || b.rows() != part.n() || b.cols() != part.m()) {
    throw ShapeMismatch("synthesize_gains: (A, B) do not match the partition");
  }
  GainSet gains;
  gains.kind = kind;
  gains.nodes.resize(ig.size());
  for (int r : ig.top_down_order()) {
    const NodeSet& rs = ig.node(r);
    const Matrix q_rr = submatrix(cost.Q, rs, rs, part.state, part.state);
    const Matrix r_rr = submatrix(cost.R, rs, rs, part.input, part.input);
    if (ig.is_root(r)) {
      try {
        auto sol = solve_root_dare(submatrix(a, rs, rs, part.state, part.state),
                                   submatrix(b, rs, rs, part.state, part.input), q_rr, r_rr, options);
        gains.nodes[r] = {std::move(sol.K), std::move(sol.P)};
      } catch (const NoConvergence& e) {
        std::string name = "{";
        for (std::size_t k = 0; k < rs.size(); ++k) name += (k ? "," : "") + std::to_string(rs[k] + 1);
        throw NoConvergence(std::string(e.what()) + " at root " + name + "}");
      }
    } else {
      const int s = ig.parent(r);
      const NodeSet& ss = ig.node(s);
      gains.nodes[r] = riccati_step(submatrix(a, ss, rs, part.state, part.state),
                                    submatrix(b, ss, rs, part.state, part.input), q_rr, r_rr, gains.nodes[s].P);
    }
  }
  return gains;
}

double noise_weighted_trace(const std::vector<Matrix>& p, const InfoGraph& ig, const Partition& part,
                            double sigma_w) {
  double total = 0.0;
  for (int i = 0; i < part.p(); ++i) {
    const int s = ig.origin(i);
    const int off = part.state.offset_within(ig.node(s), i);
    const int dim = part.state.dim(i);
    total += p[s].block(off, off, dim, dim).trace();
  }
  return sigma_w * sigma_w * total;
}

double optimal_cost(const GainSet& gains, const InfoGraph& ig, const Partition& part, double sigma_w) {
  if (gains.kind != GainKind::kTrueModel) throw ValidationError("optimal_cost requires true-model gains");
  std::vector<Matrix> p;
  p.reserve(gains.nodes.size());
  for (const auto& g : gains.nodes) p.push_back(g.P);
  return noise_weighted_trace(p, ig, part, sigma_w);
}

TildeCost tilde_P_and_cost(const GainSet& gains, const SystemModel& model, const InfoGraph& ig) {
  const auto& part = model.partition;
  TildeCost out;
  out.P.resize(ig.size());
  for (int r : ig.top_down_order()) {
    const NodeSet& rs = ig.node(r);
    const Matrix& k_r = gains.nodes[r].K;
    const Matrix q_rr = submatrix(model.Q, rs, rs, part.state, part.state);
    const Matrix r_rr = submatrix(model.R, rs, rs, part.input, part.input);
    const Matrix stage = q_rr + k_r.transpose() * r_rr * k_r;
    const int s = ig.parent(r);
    const NodeSet& ss = ig.node(s);
    const Matrix closed =
        submatrix(model.A, ss, rs, part.state, part.state) + submatrix(model.B, ss, rs, part.state, part.input) * k_r;
    if (ig.is_root(r)) {
      const double rho = spectral_radius(closed);
      if (!(rho < 1.0)) {
        throw UnstableMixedLoop("mixed root loop A_ss + B_ss K_s has spectral radius " + std::to_string(rho));
      }
      out.P[r] = solve_stein(closed, symmetrize(stage));
    } else {
      out.P[r] = symmetrize(stage + closed.transpose() * out.P[s] * closed);
    }
  }
  out.cost = noise_weighted_trace(out.P, ig, part, model.sigma_w);
  return out;
}

}  // namespace declqr
