#include "declqr/lti_system.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <string>

#include "declqr/errors.hpp"

namespace declqr {

BlockLayout::BlockLayout(std::vector<int> dims) : dims_(std::move(dims)) {
  offsets_.assign(1, 0);
  for (int d : dims_) {
    if (d < 0) throw ValidationError("block dimension must be nonnegative");
    offsets_.push_back(offsets_.back() + d);
  }
}

int BlockLayout::dim(const NodeSet& s) const {
  int total = 0;
  for (int i : s) total += dims_.at(i);
  return total;
}

int BlockLayout::offset_within(const NodeSet& s, int i) const {
  int pos = 0;
  for (int k : s) {
    if (k == i) return pos;
    pos += dims_.at(k);
  }
  throw IndexOutOfRange("block " + std::to_string(i + 1) + " is not in the node set");
}

Partition::Partition(std::vector<int> state_dims, std::vector<int> input_dims)
    : state(state_dims), input(input_dims) {
  if (state_dims.size() != input_dims.size() || state_dims.empty()) {
    throw ValidationError("partition: state and input dims must have the same nonzero length");
  }
  for (std::size_t i = 0; i < state_dims.size(); ++i) {
    if (input_dims[i] < 1 || state_dims[i] < input_dims[i]) {
      throw ValidationError("partition: need n_i >= m_i >= 1 for every subsystem");
    }
  }
}

namespace {

void check_set(const NodeSet& s, const BlockLayout& layout) {
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] < 0 || s[k] >= layout.blocks()) throw IndexOutOfRange("block index out of range");
    if (k > 0 && s[k] <= s[k - 1]) throw IndexOutOfRange("node set must be strictly ascending");
  }
}

}  // namespace

Matrix submatrix(const Matrix& m, const NodeSet& rows, const NodeSet& cols,
                 const BlockLayout& row_layout, const BlockLayout& col_layout) {
  check_set(rows, row_layout);
  check_set(cols, col_layout);
  if (m.rows() != row_layout.total() || m.cols() != col_layout.total()) {
    throw ShapeMismatch("submatrix: matrix does not match the partition");
  }
  Matrix out(row_layout.dim(rows), col_layout.dim(cols));
  int r0 = 0;
  for (int i : rows) {
    int c0 = 0;
    for (int j : cols) {
      out.block(r0, c0, row_layout.dim(i), col_layout.dim(j)) =
          m.block(row_layout.offset(i), col_layout.offset(j), row_layout.dim(i), col_layout.dim(j));
      c0 += col_layout.dim(j);
    }
    r0 += row_layout.dim(i);
  }
  return out;
}

Matrix selector(const BlockLayout& layout, const NodeSet& rows, const NodeSet& cols) {
  return submatrix(Matrix::Identity(layout.total(), layout.total()), rows, cols, layout, layout);
}

Vector gather(const Vector& v, const NodeSet& s, const BlockLayout& layout) {
  Vector out(layout.dim(s));
  int pos = 0;
  for (int i : s) {
    out.segment(pos, layout.dim(i)) = v.segment(layout.offset(i), layout.dim(i));
    pos += layout.dim(i);
  }
  return out;
}

void scatter_add(Vector& v, const Vector& part, const NodeSet& s, const BlockLayout& layout) {
  int pos = 0;
  for (int i : s) {
    v.segment(layout.offset(i), layout.dim(i)) += part.segment(pos, layout.dim(i));
    pos += layout.dim(i);
  }
}

void SystemModel::check_shapes() const {
  const int n = partition.n();
  const int m = partition.m();
  if (A.rows() != n || A.cols() != n) throw ShapeMismatch("A must be n x n");
  if (B.rows() != n || B.cols() != m) throw ShapeMismatch("B must be n x m");
  if (Q.rows() != n || Q.cols() != n) throw ShapeMismatch("Q must be n x n");
  if (R.rows() != m || R.cols() != m) throw ShapeMismatch("R must be m x m");
  if (!(sigma_w >= 0.0)) throw ValidationError("sigma_w must be nonnegative");
}

std::vector<NodeSet> neighbor_sets(const DirectedDelayGraph& g) {
  std::vector<NodeSet> out(g.size());
  for (int i = 0; i < g.size(); ++i) {
    out[i] = g.in_neighbors(i);
    out[i].push_back(i);
    std::sort(out[i].begin(), out[i].end());
  }
  return out;
}

Matrix mask_to_neighbors(const Matrix& m, const std::vector<NodeSet>& neighbors,
                         const BlockLayout& row_layout, const BlockLayout& col_layout) {
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (int i = 0; i < row_layout.blocks(); ++i) {
    for (int j : neighbors[i]) {
      out.block(row_layout.offset(i), col_layout.offset(j), row_layout.dim(i), col_layout.dim(j)) =
          m.block(row_layout.offset(i), col_layout.offset(j), row_layout.dim(i), col_layout.dim(j));
    }
  }
  return out;
}

bool respects_sparsity(const SystemModel& model, const DirectedDelayGraph& g) {
  const auto neighbors = neighbor_sets(g);
  const auto& part = model.partition;
  return (mask_to_neighbors(model.A, neighbors, part.state, part.state) - model.A).norm() == 0.0 &&
         (mask_to_neighbors(model.B, neighbors, part.state, part.input) - model.B).norm() == 0.0;
}

Network::Network(DirectedDelayGraph g) : graph(std::move(g)) {
  reject_zero_delay_cycles(graph);
  delays = compute_delay_matrix(graph);
  info = InfoGraph::build(delays);
  neighbors = neighbor_sets(graph);
  d_max = max_delay(delays);
}

namespace {

using CMatrix = Eigen::MatrixXcd;

int numerical_rank(const CMatrix& m, double tol) {
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& sv = svd.singularValues();
  const double scale = std::max(1.0, sv.size() ? sv(0) : 0.0);
  int rank = 0;
  for (int k = 0; k < sv.size(); ++k) {
    if (sv(k) > tol * scale) ++rank;
  }
  return rank;
}

}  // namespace

bool is_stabilizable(const Matrix& a, const Matrix& b, double tol) {
  const int n = static_cast<int>(a.rows());
  Eigen::ComplexEigenSolver<CMatrix> es(a.cast<std::complex<double>>());
  for (int k = 0; k < n; ++k) {
    const auto lambda = es.eigenvalues()(k);
    if (std::abs(lambda) < 1.0 - tol) continue;
    CMatrix pbh(n, n + b.cols());
    pbh << lambda * CMatrix::Identity(n, n) - a.cast<std::complex<double>>(), b.cast<std::complex<double>>();
    if (numerical_rank(pbh, tol) < n) return false;
  }
  return true;
}

bool is_detectable(const Matrix& a, const Matrix& c, double tol) {
  const int n = static_cast<int>(a.rows());
  Eigen::ComplexEigenSolver<CMatrix> es(a.cast<std::complex<double>>());
  for (int k = 0; k < n; ++k) {
    const auto lambda = es.eigenvalues()(k);
    if (std::abs(lambda) < 1.0 - tol) continue;
    CMatrix pbh(n + c.rows(), n);
    pbh << lambda * CMatrix::Identity(n, n) - a.cast<std::complex<double>>(), c.cast<std::complex<double>>();
    if (numerical_rank(pbh, tol) < n) return false;
  }
  return true;
}

Matrix symmetric_factor(const Matrix& q) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(q));
  Vector root = es.eigenvalues().unaryExpr([](double v) { return v < 1e-12 ? 0.0 : std::sqrt(v); });
  return root.asDiagonal() * es.eigenvectors().transpose();
}

AssumptionReport validate_assumptions(const SystemModel& model, const Network& net) {
  model.check_shapes();
  const auto& part = model.partition;
  AssumptionReport report;

  report.a1_ok = true;
  for (int i = 0; i < part.p(); ++i) {
    for (int j = 0; j < part.p(); ++j) {
      const double a_norm = model.A.block(part.state.offset(i), part.state.offset(j), part.state.dim(i),
                                          part.state.dim(j)).norm();
      const double b_norm = model.B.block(part.state.offset(i), part.input.offset(j), part.state.dim(i),
                                          part.input.dim(j)).norm();
      if ((a_norm > 0.0 || b_norm > 0.0) && !(net.delays.reachable(i, j) && net.delays(i, j) <= 1)) {
        report.a1_ok = false;
      }
    }
  }

  report.a2_ok = true;
  for (int s : net.info.roots()) {
    const NodeSet& set = net.info.node(s);
    const Matrix a_ss = submatrix(model.A, set, set, part.state, part.state);
    const Matrix b_ss = submatrix(model.B, set, set, part.state, part.input);
    const Matrix c_ss = symmetric_factor(submatrix(model.Q, set, set, part.state, part.state));
    if (!is_stabilizable(a_ss, b_ss) || !is_detectable(a_ss, c_ss)) {
      report.a2_ok = false;
      report.a2_failed_roots.push_back(s);
    }
  }

  report.a3.rho = spectral_radius(model.A);
  if (report.a3.rho < 1.0) {
    const auto cert = decay_certificate(model.A);
    report.a3.ok = true;
    report.a3.gamma0 = cert.gamma;
    report.a3.kappa0 = cert.kappa;
    report.a3.horizon = cert.horizon;
  }

  report.a4_ok = min_singular_value(model.R) >= 1.0 - 1e-12 && min_singular_value(model.Q) >= 1.0 - 1e-12;
  return report;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Matrix gaussian_matrix(int rows, int cols, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) out(r, c) = sigma * normal(rng);
  }
  return out;
}

Trajectory simulate_with_noise(const SystemModel& model, const Policy& policy, const Matrix& noise) {
  const int n = model.partition.n();
  const int m = model.partition.m();
  const int horizon = static_cast<int>(noise.cols());
  if (horizon < 1) throw ValidationError("simulate: horizon must be at least 1");
  if (noise.rows() != n) throw ShapeMismatch("simulate: noise has wrong row count");

  Trajectory traj;
  traj.x = Matrix::Zero(n, horizon + 1);
  traj.u = Matrix::Zero(m, horizon);
  traj.w = Matrix::Zero(n, horizon);
  for (int t = 0; t < horizon; ++t) {
    Vector u = policy(t, traj);
    if (u.size() != m) {
      throw ShapeMismatch("policy returned an input of size " + std::to_string(u.size()) + ", expected " +
                          std::to_string(m));
    }
    traj.u.col(t) = u;
    traj.w.col(t) = noise.col(t);
    traj.x.col(t + 1) = model.A * traj.x.col(t) + model.B * u + noise.col(t);
  }
  return traj;
}

Trajectory simulate(const SystemModel& model, const Policy& policy, int horizon, std::uint64_t seed) {
  if (horizon < 1) throw ValidationError("simulate: horizon must be at least 1");
  return simulate_with_noise(model, policy, gaussian_matrix(model.partition.n(), horizon, model.sigma_w, seed));
}

double empirical_cost(const Trajectory& traj, const Matrix& q, const Matrix& r) {
  const int horizon = traj.horizon();
  if (horizon < 1) throw ValidationError("empirical_cost: empty trajectory");
  double total = 0.0;
  for (int t = 0; t < horizon; ++t) {
    total += traj.x.col(t).dot(q * traj.x.col(t)) + traj.u.col(t).dot(r * traj.u.col(t));
  }
  return total / horizon;
}

SystemModel generate_random_system(const Network& net, const Partition& partition,
                                   const GeneratorOptions& options, std::uint64_t seed) {
  if (partition.p() != net.graph.size()) throw ShapeMismatch("partition does not match the graph");
  SystemModel model;
  model.partition = partition;
  const int n = partition.n();
  const int m = partition.m();
  const Matrix dense_a = gaussian_matrix(n, n, 1.0, derive_seed(seed, 1));
  const Matrix dense_b = gaussian_matrix(n, m, 1.0, derive_seed(seed, 2));
  model.A = mask_to_neighbors(dense_a, net.neighbors, partition.state, partition.state);
  model.B = mask_to_neighbors(dense_b, net.neighbors, partition.state, partition.input);
  const double rho = spectral_radius(model.A);
  if (rho > options.rho_target && rho > 0.0) model.A *= options.rho_target / rho;
  model.Q = options.q_scale * Matrix::Identity(n, n);
  model.R = options.r_scale * Matrix::Identity(m, m);
  model.sigma_w = options.sigma_w;
  return model;
}

}  // namespace declqr
