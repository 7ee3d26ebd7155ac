#include "declqr/controllers.hpp"

#include <algorithm>

#include "declqr/errors.hpp"

namespace declqr {

namespace {

std::string set_name(const NodeSet& s) {
  std::string out = "{";
  for (std::size_t k = 0; k < s.size(); ++k) out += (k ? "," : "") + std::to_string(s[k] + 1);
  return out + "}";
}

}  // namespace

InternalStateModel::InternalStateModel(const Matrix& a, const Matrix& b, const GainSet& gains, const InfoGraph& ig,
                                       const Partition& part)
    : ig_(&ig), part_(part), gains_(gains) {
  if (gains.nodes.size() != ig.size()) throw ShapeMismatch("gain set does not match the information graph");
  transition_.resize(ig.size());
  for (std::size_t r = 0; r < ig.size(); ++r) {
    const NodeSet& rs = ig.node(static_cast<int>(r));
    const NodeSet& ss = ig.node(ig.parent(static_cast<int>(r)));
    transition_[r] = submatrix(a, ss, rs, part.state, part.state) +
                     submatrix(b, ss, rs, part.state, part.input) * gains.nodes[r].K;
  }
}

InternalStateMap InternalStateModel::zero_state() const {
  InternalStateMap z(ig_->size());
  for (std::size_t r = 0; r < z.size(); ++r) z[r] = Vector::Zero(part_.state.dim(ig_->node(static_cast<int>(r))));
  return z;
}

Vector InternalStateModel::node_update(int s, const std::function<const Vector&(int)>& prev,
                                       const Vector* w_source) const {
  const NodeSet& ss = ig_->node(s);
  Vector out = Vector::Zero(part_.state.dim(ss));
  for (int v : ig_->children(s)) out.noalias() += transition_[v] * prev(v);
  if (ig_->is_root(s)) out.noalias() += transition_[s] * prev(s);
  if (w_source && ig_->is_leaf(s)) {
    const int j = ig_->leaf_source(s);
    out.segment(part_.state.offset_within(ss, j), part_.state.dim(j)) += *w_source;
  }
  return out;
}

InternalStateMap InternalStateModel::advance(const InternalStateMap& zeta, const Vector& w) const {
  InternalStateMap next(zeta.size());
  const auto prev = [&](int v) -> const Vector& { return zeta[v]; };
  for (std::size_t s = 0; s < zeta.size(); ++s) {
    const int si = static_cast<int>(s);
    if (ig_->is_leaf(si)) {
      const int j = ig_->leaf_source(si);
      const Vector wj = w.segment(part_.state.offset(j), part_.state.dim(j));
      next[s] = node_update(si, prev, &wj);
    } else {
      next[s] = node_update(si, prev, nullptr);
    }
  }
  return next;
}

Vector InternalStateModel::control(const InternalStateMap& zeta) const {
  Vector u = Vector::Zero(part_.m());
  for (std::size_t r = 0; r < zeta.size(); ++r) {
    scatter_add(u, gains_.nodes[r].K * zeta[r], ig_->node(static_cast<int>(r)), part_.input);
  }
  return u;
}

Vector InternalStateModel::control_rows(int r, int i, const Vector& zeta_r) const {
  const int off = part_.input.offset_within(ig_->node(r), i);
  return gains_.nodes[r].K.middleRows(off, part_.input.dim(i)) * zeta_r;
}

Vector InternalStateModel::state_sum(const InternalStateMap& zeta) const {
  Vector x = Vector::Zero(part_.n());
  for (std::size_t r = 0; r < zeta.size(); ++r) scatter_add(x, zeta[r], ig_->node(static_cast<int>(r)), part_.state);
  return x;
}

StackedDynamics stack_dynamics(const InternalStateModel& model) {
  const InfoGraph& ig = model.info();
  const Partition& part = model.partition();
  StackedDynamics out;
  int total = 0;
  for (std::size_t r = 0; r < ig.size(); ++r) {
    out.offsets.push_back(total);
    total += part.state.dim(ig.node(static_cast<int>(r)));
  }
  out.M = Matrix::Zero(total, total);
  out.E = Matrix::Zero(total, part.n());
  out.K = Matrix::Zero(part.m(), total);
  out.S = Matrix::Zero(part.n(), total);
  for (std::size_t r = 0; r < ig.size(); ++r) {
    const int ri = static_cast<int>(r);
    const NodeSet& rs = ig.node(ri);
    const int dr = part.state.dim(rs);
    const int s = ig.parent(ri);
    out.M.block(out.offsets[s], out.offsets[r], part.state.dim(ig.node(s)), dr) = model.transition(ri);
    if (ig.is_leaf(ri)) {
      const int j = ig.leaf_source(ri);
      out.E.block(out.offsets[r] + part.state.offset_within(rs, j), part.state.offset(j), part.state.dim(j),
                  part.state.dim(j)) = Matrix::Identity(part.state.dim(j), part.state.dim(j));
    }
    const Matrix& k = model.gains().nodes[r].K;
    for (int i : rs) {
      out.K.block(part.input.offset(i), out.offsets[r], part.input.dim(i), dr) =
          k.middleRows(part.input.offset_within(rs, i), part.input.dim(i));
      out.S.block(part.state.offset(i), out.offsets[r] + part.state.offset_within(rs, i), part.state.dim(i),
                  part.state.dim(i)) = Matrix::Identity(part.state.dim(i), part.state.dim(i));
    }
  }
  return out;
}

StepResult optimal_step(const InternalStateModel& model, const InternalStateMap& zeta, const Vector& w) {
  return {model.control(zeta), model.advance(zeta, w)};
}

StepResult tilde_step(const InternalStateModel& model, const InternalStateMap& zeta, const Vector& w) {
  return optimal_step(model, zeta, w);
}

CeModel::CeModel(const Matrix& a_hat, const Matrix& b_hat, const GainSet& gains, const Network& net,
                 const Partition& part)
    : zeta(a_hat, b_hat, gains, net.info, part),
      a_hat_masked(mask_to_neighbors(a_hat, net.neighbors, part.state, part.state)),
      b_hat_masked(mask_to_neighbors(b_hat, net.neighbors, part.state, part.input)),
      neighbors(net.neighbors) {}

CeStepResult ce_centralized_step(const CeModel& model, const InternalStateMap& zeta_prev, const Vector& x_prev,
                                 const Vector& x_now, const Vector& u_prev) {
  const auto& part = model.zeta.partition();
  if (x_prev.size() != part.n() || x_now.size() != part.n() || u_prev.size() != part.m()) {
    throw ShapeMismatch("ce_centralized_step: state or input dimension mismatch");
  }
  CeStepResult out;
  out.w_prev = x_now - model.a_hat_masked * x_prev - model.b_hat_masked * u_prev;
  out.zeta_now = model.zeta.advance(zeta_prev, out.w_prev);
  out.u = model.zeta.control(out.zeta_now);
  return out;
}

// ---- AgentMemory ---------------------------------------------------------------

const Vector& AgentMemory::at(int node, int time) const {
  auto it = entries_.find({node, time});
  if (it == entries_.end()) throw MissingState("memory has no entry for node " + std::to_string(node) + " at time " +
                                               std::to_string(time));
  return it->second.value;
}

std::optional<int> AgentMemory::earliest(int node) const {
  auto it = entries_.lower_bound({node, std::numeric_limits<int>::min()});
  if (it == entries_.end() || it->first.node != node) return std::nullopt;
  return it->first.time;
}

void AgentMemory::put(int node, int time, Vector value, MemoryRole role) {
  auto& e = entries_[{node, time}];
  e.value = std::move(value);
  e.roles |= role;
  peak_ = std::max(peak_, entries_.size());
}

void AgentMemory::drop_role(int node, int time, MemoryRole role) {
  auto it = entries_.find({node, time});
  if (it == entries_.end()) return;
  it->second.roles &= ~static_cast<unsigned>(role);
  if (it->second.roles == 0) entries_.erase(it);
}

std::set<MemoryKey> AgentMemory::keys() const {
  std::set<MemoryKey> out;
  for (const auto& [k, e] : entries_) out.insert(k);
  return out;
}

AgentMemory decentralized_init(const AgentView& view, const DelayMatrix& d, const InfoGraph& ig,
                               const BlockLayout& state) {
  AgentMemory mem;
  mem.set_agent(view.agent);
  const int dm = view.d_max;
  for (int s : view.ordered_leaves) {
    const int dij = d(view.agent, ig.leaf_source(s));
    for (int k = -2 * dm - 1; k <= -dij - 1; ++k) mem.put(s, k, Vector::Zero(state.dim(ig.node(s))), kLeafRole);
  }
  for (int s : view.roots) mem.put(s, -dm - 1, Vector::Zero(state.dim(ig.node(s))), kRootRole);
  return mem;
}

std::size_t memory_bound(int d_max, int p) {
  return static_cast<std::size_t>((2 * d_max + 2) * p + 2 * p);
}

// ---- VisibleStates --------------------------------------------------------------

std::set<std::pair<int, int>> VisibleStates::expected_keys(const AgentView& view, const DelayMatrix& d, int t) {
  std::set<std::pair<int, int>> keys;
  for (int j : view.visible_sources) {
    for (int k = std::max(0, t - view.d_max - 1); k <= t - d(view.agent, j); ++k) keys.insert({j, k});
  }
  return keys;
}

VisibleStates VisibleStates::window(const AgentView& view, const DelayMatrix& d, const Matrix& x, int t,
                                    const BlockLayout& state) {
  std::map<std::pair<int, int>, Vector> states;
  for (const auto& [j, k] : expected_keys(view, d, t)) {
    states.emplace(std::make_pair(j, k), x.col(k).segment(state.offset(j), state.dim(j)));
  }
  return VisibleStates(view.agent, t, std::move(states));
}

const Vector& VisibleStates::x(int j, int k) const {
  auto it = states_.find({j, k});
  if (it == states_.end()) {
    throw MissingState("agent " + std::to_string(agent_ + 1) + " at t=" + std::to_string(t_) + " lacks x_" +
                       std::to_string(j + 1) + "(" + std::to_string(k) + ")");
  }
  log_.insert({j, k});
  return it->second;
}

std::set<std::pair<int, int>> VisibleStates::keys() const {
  std::set<std::pair<int, int>> out;
  for (const auto& [k, v] : states_) out.insert(k);
  return out;
}

// ---- Decentralized step -----------------------------------------------------------

namespace {

// Evaluates zeta^ values for one agent within one step. Values come from
// memory or are rolled forward from it; anything else is a MissingState.
class AgentStep {
 public:
  AgentStep(const DecentralizedContext& ctx, const AgentView& view, AgentMemory& memory,
            const VisibleStates& visible)
      : ctx_(ctx), view_(view), mem_(memory), vis_(visible), ig_(ctx.net->info),
        part_(ctx.ce->zeta.partition()) {}

  const Vector& zeta(int r, int k) {
    if (mem_.contains(r, k)) return mem_.at(r, k);
    if (auto it = scratch_.find({r, k}); it != scratch_.end()) return it->second;
    const std::string where = set_name(ig_.node(r)) + " at time " + std::to_string(k);
    if (!view_.in_tree(r)) throw MissingState("agent " + std::to_string(view_.agent + 1) + " cannot form node " + where);
    if (ig_.is_leaf(r)) throw MissingState("leaf " + where + " is not in memory");
    if (ig_.is_root(r)) {
      auto first = mem_.earliest(r);
      if (!first || k < *first) throw MissingState("root " + where + " precedes the stored anchor");
    }
    Vector v = ctx_.ce->zeta.node_update(r, [&](int c) -> const Vector& { return zeta(c, k - 1); }, nullptr);
    return scratch_.emplace(MemoryKey{r, k}, std::move(v)).first->second;
  }

  // u^_l(k), re-derived from internal states.
  Vector input(int l, int k) {
    Vector u = Vector::Zero(part_.input.dim(l));
    for (int r : ig_.containing(l)) u += ctx_.ce->zeta.control_rows(r, l, zeta(r, k));
    return u;
  }

  // w^_j(k) with w^(k) = 0 for k < -1 and w^(-1) = x(0).
  Vector disturbance(int j, int k) {
    if (k < -1) return Vector::Zero(part_.state.dim(j));
    if (k == -1) return vis_.x(j, 0);
    const auto& st = part_.state;
    const auto& in = part_.input;
    Vector w = vis_.x(j, k + 1);
    for (int l : ctx_.ce->neighbors[j]) {
      w.noalias() -= ctx_.ce->a_hat_masked.block(st.offset(j), st.offset(l), st.dim(j), st.dim(l)) * vis_.x(l, k);
      w.noalias() -= ctx_.ce->b_hat_masked.block(st.offset(j), in.offset(l), st.dim(j), in.dim(l)) * input(l, k);
    }
    return w;
  }

  // zeta^_s(k) for a leaf s, from its source's disturbance at k - 1.
  Vector leaf_value(int s, int k) {
    const Vector w = disturbance(ig_.leaf_source(s), k - 1);
    return ctx_.ce->zeta.node_update(s, [&](int c) -> const Vector& { return zeta(c, k - 1); }, &w);
  }

 private:
  const DecentralizedContext& ctx_;
  const AgentView& view_;
  AgentMemory& mem_;
  const VisibleStates& vis_;
  const InfoGraph& ig_;
  const Partition& part_;
  std::map<MemoryKey, Vector> scratch_;
};

}  // namespace

Vector decentralized_step(const DecentralizedContext& ctx, const AgentView& view, AgentMemory& memory,
                          const VisibleStates& visible, int t) {
  const DelayMatrix& d = ctx.net->delays;
  const InfoGraph& ig = ctx.net->info;
  const int i = view.agent;

  const auto expected = VisibleStates::expected_keys(view, d, t);
  const auto given = visible.keys();
  for (const auto& key : expected) {
    if (!given.count(key)) {
      throw MissingState("agent " + std::to_string(i + 1) + " at t=" + std::to_string(t) + " was not given x_" +
                         std::to_string(key.first + 1) + "(" + std::to_string(key.second) + ")");
    }
  }
  if (given.size() != expected.size()) {
    throw ValidationError("agent " + std::to_string(i + 1) + " was handed states outside its information window");
  }

  AgentStep step(ctx, view, memory, visible);
  for (int s : view.ordered_leaves) {
    const int k = t - d(i, ig.leaf_source(s));
    memory.put(s, k, step.leaf_value(s, k), kLeafRole);
  }
  for (int s : view.roots) {
    const int k = t - view.d_max;
    Vector v = step.zeta(s, k);
    memory.put(s, k, std::move(v), kRootRole);
  }
  Vector u = step.input(i, t);

  for (int s : view.ordered_leaves) memory.drop_role(s, t - 2 * view.d_max - 1, kLeafRole);
  for (int s : view.roots) memory.drop_role(s, t - view.d_max - 1, kRootRole);
  return u;
}

DecentralizedAgent::DecentralizedAgent(const DecentralizedContext& ctx, int agent)
    : ctx_(ctx), view_(agent_view(ctx.net->info, ctx.net->delays, agent)) {
  memory_ = decentralized_init(view_, ctx.net->delays, ctx.net->info, ctx.ce->zeta.partition().state);
}

// ---- Closed loop -------------------------------------------------------------------

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kOptimal:
      return "optimal";
    case ControllerKind::kCeCentralized:
      return "ce-centralized";
    case ControllerKind::kCeDecentralized:
      return "ce-decentralized";
    case ControllerKind::kTilde:
      return "tilde";
    case ControllerKind::kExternalInputs:
      return "external-inputs";
  }
  return "unknown";
}

ControllerKind controller_kind_from_string(const std::string& name) {
  for (auto k : {ControllerKind::kOptimal, ControllerKind::kCeCentralized, ControllerKind::kCeDecentralized,
                 ControllerKind::kTilde, ControllerKind::kExternalInputs}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown controller kind '" + name + "'");
}

ClosedLoopRun run_closed_loop(const SystemModel& model, const Network& net, const ClosedLoopConfig& config,
                              bool keep_zeta) {
  model.check_shapes();
  const auto& part = model.partition;
  const int n = part.n();
  const int m = part.m();
  const int horizon = config.horizon;
  if (horizon < 1) throw ValidationError("closed loop horizon must be at least 1");

  ClosedLoopRun run;
  Trajectory& traj = run.traj;
  if (config.noise.size() > 0) {
    if (config.noise.rows() != n || config.noise.cols() != horizon) throw ShapeMismatch("noise must be n x T");
    traj.w = config.noise;
  } else {
    traj.w = gaussian_matrix(n, horizon, model.sigma_w, config.seed);
  }
  traj.x = Matrix::Zero(n, horizon + 1);
  traj.u = Matrix::Zero(m, horizon);

  const bool needs_estimate = config.kind == ControllerKind::kCeCentralized ||
                              config.kind == ControllerKind::kCeDecentralized ||
                              config.kind == ControllerKind::kTilde;
  if (needs_estimate && !config.estimate_gains) throw ValidationError(to_string(config.kind) + " needs estimate gains");
  const bool needs_hat = config.kind == ControllerKind::kCeCentralized || config.kind == ControllerKind::kCeDecentralized;
  if (needs_hat && (config.a_hat.rows() != n || config.a_hat.cols() != n || config.b_hat.rows() != n ||
                    config.b_hat.cols() != m)) {
    throw ShapeMismatch("estimated (A, B) have the wrong shape");
  }
  if (config.kind == ControllerKind::kExternalInputs &&
      (config.external_inputs.rows() != m || config.external_inputs.cols() < horizon)) {
    throw ShapeMismatch("external inputs must be m x T");
  }

  GainSet true_gains;
  InternalStateModel zeta_model;
  CeModel ce;
  if (config.kind == ControllerKind::kOptimal) {
    true_gains = config.true_gains ? *config.true_gains : synthesize_gains(model, net.info);
    zeta_model = InternalStateModel(model.A, model.B, true_gains, net.info, part);
  } else if (config.kind == ControllerKind::kTilde) {
    zeta_model = InternalStateModel(model.A, model.B, *config.estimate_gains, net.info, part);
  } else if (needs_hat) {
    ce = CeModel(config.a_hat, config.b_hat, *config.estimate_gains, net, part);
  }

  InternalStateMap zeta;
  if (config.kind == ControllerKind::kOptimal || config.kind == ControllerKind::kTilde) zeta = zeta_model.zero_state();
  if (config.kind == ControllerKind::kCeCentralized) zeta = ce.zeta.zero_state();
  Vector x_prev = Vector::Zero(n);
  Vector u_prev = Vector::Zero(m);

  DecentralizedContext ctx{&net, &ce};
  std::vector<DecentralizedAgent> agents;
  if (config.kind == ControllerKind::kCeDecentralized) {
    for (int i = 0; i < part.p(); ++i) agents.emplace_back(ctx, i);
  }

  for (int t = 0; t < horizon; ++t) {
    Vector u;
    switch (config.kind) {
      case ControllerKind::kOptimal:
      case ControllerKind::kTilde:
        if (keep_zeta) run.zeta_history.push_back(zeta);
        u = zeta_model.control(zeta);
        break;
      case ControllerKind::kCeCentralized: {
        auto res = ce_centralized_step(ce, zeta, x_prev, traj.x.col(t), u_prev);
        u = std::move(res.u);
        zeta = std::move(res.zeta_now);
        if (keep_zeta) run.zeta_history.push_back(zeta);
        break;
      }
      case ControllerKind::kCeDecentralized:
        u = Vector::Zero(m);
        for (auto& agent : agents) {
          const int i = agent.view().agent;
          auto vis = VisibleStates::window(agent.view(), net.delays, traj.x, t, part.state);
          u.segment(part.input.offset(i), part.input.dim(i)) = agent.step(vis, t);
        }
        break;
      case ControllerKind::kExternalInputs:
        u = config.external_inputs.col(t);
        break;
    }
    traj.u.col(t) = u;
    traj.x.col(t + 1) = model.A * traj.x.col(t) + model.B * u + traj.w.col(t);
    if (config.kind == ControllerKind::kOptimal || config.kind == ControllerKind::kTilde) {
      zeta = zeta_model.advance(zeta, traj.w.col(t));
    }
    x_prev = traj.x.col(t);
    u_prev = u;
  }

  for (const auto& agent : agents) run.peak_memory.push_back(agent.memory().peak());
  run.cost = empirical_cost(traj, model.Q, model.R);
  return run;
}

}  // namespace declqr
