#pragma once

// Runtime policies built on the information-graph internal states:
//
//   zeta_s(t+1) = sum_{r -> s} (A_sr + B_sr K_r) zeta_r(t) + sum_{w_i -> s} I_{s,{i}} w_i(t)
//   u_i(t)      = sum_{r containing i} I_{{i},r} K_r zeta_r(t)
//
// The sum over r -> s includes the self loop at roots. The noise term is
// nonzero only at the leaf s_i(0).

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "declqr/lti_system.hpp"
#include "declqr/riccati.hpp"

namespace declqr {

using InternalStateMap = std::vector<Vector>;  // indexed by info-graph node

// The zeta recursion for one choice of (A, B, K). With the true model this
// drives u*, with (A, B, K^) it drives u~, with (A^, B^, K^) it drives u^.
class InternalStateModel {
 public:
  InternalStateModel() = default;
  InternalStateModel(const Matrix& a, const Matrix& b, const GainSet& gains, const InfoGraph& ig,
                     const Partition& part);

  const InfoGraph& info() const { return *ig_; }
  const Partition& partition() const { return part_; }
  const GainSet& gains() const { return gains_; }

  // A_sr + B_sr K_r with s the successor of r.
  const Matrix& transition(int r) const { return transition_[r]; }

  InternalStateMap zero_state() const;

  // zeta(t+1) from zeta(t) and the (true or estimated) disturbance w(t).
  InternalStateMap advance(const InternalStateMap& zeta, const Vector& w) const;

  // Right-hand side of the recursion for a single node. `prev(v)` supplies
  // the previous value of each child v (and of s itself at a root); w_source
  // is w_j for the injected source j of a leaf, nullptr for none.
  Vector node_update(int s, const std::function<const Vector&(int)>& prev, const Vector* w_source) const;

  // Full control vector sum_r I_{V,r} K_r zeta_r.
  Vector control(const InternalStateMap& zeta) const;
  // K_r zeta_r restricted to the rows of subsystem i (i must belong to r).
  Vector control_rows(int r, int i, const Vector& zeta_r) const;

  // sum_s I_{V,s} zeta_s, the state reconstruction.
  Vector state_sum(const InternalStateMap& zeta) const;

 private:
  const InfoGraph* ig_ = nullptr;
  Partition part_;
  GainSet gains_;
  std::vector<Matrix> transition_;
};

// The recursion written as one linear system over the stacked vector of
// all zeta_r (node order): zeta+ = M zeta + E w, u = K zeta, sum_s I_{V,s} zeta_s = S zeta.
struct StackedDynamics {
  Matrix M;
  Matrix E;
  Matrix K;
  Matrix S;
  std::vector<int> offsets;  // start of each node's block
};

StackedDynamics stack_dynamics(const InternalStateModel& model);

struct StepResult {
  Vector u;
  InternalStateMap zeta_next;
};

// u*(t) from zeta(t), then zeta(t+1) using the true w(t).
StepResult optimal_step(const InternalStateModel& model, const InternalStateMap& zeta, const Vector& w);
// Same structure; the model must be built from the true (A, B) and K^.
StepResult tilde_step(const InternalStateModel& model, const InternalStateMap& zeta, const Vector& w);

// Certainty-equivalent model: the zeta recursion on (A^, B^, K^) plus the
// per-subsystem rows A^_{j,N_j}, B^_{j,N_j} used to reconstruct w^.
struct CeModel {
  InternalStateModel zeta;
  Matrix a_hat_masked;
  Matrix b_hat_masked;
  std::vector<NodeSet> neighbors;

  CeModel() = default;
  CeModel(const Matrix& a_hat, const Matrix& b_hat, const GainSet& gains, const Network& net,
          const Partition& part);
};

struct CeStepResult {
  Vector u;                   // u^(t)
  InternalStateMap zeta_now;  // zeta^(t)
  Vector w_prev;              // w^(t-1)
};

// Given zeta^(t-1), x(t-1), x(t), u^(t-1): w^(t-1) = x(t) - A^_N x(t-1) - B^_N u^(t-1),
// zeta^(t) by the recursion, then u^(t). At t = 0 pass zeta^(-1) = 0,
// x(-1) = 0 and u^(-1) = 0, which yields w^(-1) = x(0).
CeStepResult ce_centralized_step(const CeModel& model, const InternalStateMap& zeta_prev, const Vector& x_prev,
                                 const Vector& x_now, const Vector& u_prev);

// ---- Per-agent runtime -------------------------------------------------------

enum MemoryRole : unsigned { kLeafRole = 1u, kRootRole = 2u };

struct MemoryKey {
  int node = 0;
  int time = 0;
  auto operator<=>(const MemoryKey&) const = default;
};

// The rolling set M_i of stored zeta^ values. An entry may serve as a leaf
// value, a root anchor, or both (a non-isolated root that is also a leaf).
class AgentMemory {
 public:
  struct Entry {
    Vector value;
    unsigned roles = 0;
  };

  int agent() const { return agent_; }
  void set_agent(int i) { agent_ = i; }

  std::size_t size() const { return entries_.size(); }
  bool contains(int node, int time) const { return entries_.count({node, time}) > 0; }
  const Vector& at(int node, int time) const;
  // Earliest stored timestamp for a node, or nullopt.
  std::optional<int> earliest(int node) const;

  void put(int node, int time, Vector value, MemoryRole role);
  // Removes the role; the entry disappears once it has none left.
  void drop_role(int node, int time, MemoryRole role);

  std::set<MemoryKey> keys() const;
  // Largest size reached since construction.
  std::size_t peak() const { return peak_; }
  const std::map<MemoryKey, Entry>& entries() const { return entries_; }

 private:
  int agent_ = 0;
  std::map<MemoryKey, Entry> entries_;
  std::size_t peak_ = 0;
};

// Zero-filled initial memory: leaves s = s_j(0) at k in [-2Dmax-1, -D_ij-1],
// roots at -Dmax-1.
AgentMemory decentralized_init(const AgentView& view, const DelayMatrix& d, const InfoGraph& ig,
                               const BlockLayout& state);

// The states x_j(k) the plant hands agent i at time t:
// j in V_i and max(0, t-Dmax-1) <= k <= t-D_ij. Every read is logged.
class VisibleStates {
 public:
  VisibleStates() = default;
  VisibleStates(int agent, int t, std::map<std::pair<int, int>, Vector> states)
      : agent_(agent), t_(t), states_(std::move(states)) {}

  // Extracts the exact window from a trajectory filled up to x(t).
  static VisibleStates window(const AgentView& view, const DelayMatrix& d, const Matrix& x, int t,
                              const BlockLayout& state);
  // The keys the window must contain.
  static std::set<std::pair<int, int>> expected_keys(const AgentView& view, const DelayMatrix& d, int t);

  int agent() const { return agent_; }
  int time() const { return t_; }
  // Throws MissingState when (j, k) is not present.
  const Vector& x(int j, int k) const;
  std::set<std::pair<int, int>> keys() const;
  const std::set<std::pair<int, int>>& access_log() const { return log_; }
  void erase(int j, int k) { states_.erase({j, k}); }

 private:
  int agent_ = 0;
  int t_ = 0;
  std::map<std::pair<int, int>, Vector> states_;
  mutable std::set<std::pair<int, int>> log_;
};

// Shared read-only data for all agents.
struct DecentralizedContext {
  const Network* net = nullptr;
  const CeModel* ce = nullptr;
};

// One step of agent i. Requires `visible` to hold exactly its window
// (validated) and `memory` to satisfy the top-of-step invariant. Returns
// u^_i(t) and leaves memory ready for t + 1. Throws MissingState.
Vector decentralized_step(const DecentralizedContext& ctx, const AgentView& view, AgentMemory& memory,
                          const VisibleStates& visible, int t);

class DecentralizedAgent {
 public:
  DecentralizedAgent(const DecentralizedContext& ctx, int agent);

  Vector step(const VisibleStates& visible, int t) { return decentralized_step(ctx_, view_, memory_, visible, t); }
  const AgentView& view() const { return view_; }
  const AgentMemory& memory() const { return memory_; }

 private:
  DecentralizedContext ctx_;
  AgentView view_;
  AgentMemory memory_;
};

// (2 Dmax + 2) p + 2 p.
std::size_t memory_bound(int d_max, int p);

// ---- Closed loop --------------------------------------------------------------

enum class ControllerKind { kOptimal, kCeCentralized, kCeDecentralized, kTilde, kExternalInputs };

std::string to_string(ControllerKind kind);
// Throws ValidationError for unknown names.
ControllerKind controller_kind_from_string(const std::string& name);

struct ClosedLoopConfig {
  ControllerKind kind = ControllerKind::kOptimal;
  int horizon = 0;
  std::uint64_t seed = 0;
  // True-model gains for optimal; synthesized on demand when null.
  const GainSet* true_gains = nullptr;
  // Estimated model and gains for ce-* and tilde; ignored by optimal.
  Matrix a_hat;
  Matrix b_hat;
  const GainSet* estimate_gains = nullptr;
  // m x T, used by external-inputs.
  Matrix external_inputs;
  // Optional explicit noise (n x T); otherwise drawn from the seed.
  Matrix noise;
};

struct ClosedLoopRun {
  Trajectory traj;
  double cost = 0.0;
  // Largest |M_i| over the run, per agent (ce-decentralized only).
  std::vector<std::size_t> peak_memory;
  // Internal states per step for optimal/tilde (zeta(t), t = 0..T-1), kept
  // only when requested.
  std::vector<InternalStateMap> zeta_history;
};

// Steps plant and controller jointly with x(0) = 0. The noise is
// gaussian_matrix(n, T, sigma_w, seed), so every controller kind sees the
// same disturbances for a given seed.
ClosedLoopRun run_closed_loop(const SystemModel& model, const Network& net, const ClosedLoopConfig& config,
                              bool keep_zeta = false);

}  // namespace declqr
