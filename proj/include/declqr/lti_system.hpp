#pragma once

// Block-partitioned LTI plant x(t+1) = A x(t) + B u(t) + w(t) with sparsity
// tied to the interconnection graph.

#include <cstdint>
#include <functional>
#include <vector>

#include "declqr/linalg.hpp"
#include "declqr/topology.hpp"

namespace declqr {

// Per-subsystem block sizes with derived offsets.
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(std::vector<int> dims);

  int blocks() const { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_[i]; }
  int offset(int i) const { return offsets_[i]; }
  int total() const { return offsets_.back(); }
  const std::vector<int>& dims() const { return dims_; }

  // Sum of dims over the blocks in s.
  int dim(const NodeSet& s) const;
  // Position of block i's first coordinate inside the stacked vector for s.
  int offset_within(const NodeSet& s, int i) const;

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_{0};
};

struct Partition {
  BlockLayout state;
  BlockLayout input;

  Partition() = default;
  // Throws ValidationError unless n_i >= m_i >= 1.
  Partition(std::vector<int> state_dims, std::vector<int> input_dims);

  int p() const { return state.blocks(); }
  int n() const { return state.total(); }
  int m() const { return input.total(); }
};

// Blocks M_ij for i in rows, j in cols (both ascending), concatenated.
Matrix submatrix(const Matrix& m, const NodeSet& rows, const NodeSet& cols,
                 const BlockLayout& row_layout, const BlockLayout& col_layout);

// Identity selector I_{rows, cols} over a single layout.
Matrix selector(const BlockLayout& layout, const NodeSet& rows, const NodeSet& cols);

// Stacks the blocks of v listed in s.
Vector gather(const Vector& v, const NodeSet& s, const BlockLayout& layout);
// v[s-blocks] += part.
void scatter_add(Vector& v, const Vector& part, const NodeSet& s, const BlockLayout& layout);

struct SystemModel {
  Partition partition;
  Matrix A;
  Matrix B;
  Matrix Q;
  Matrix R;
  double sigma_w = 1.0;

  // Checks dimensions against the partition; throws ShapeMismatch.
  void check_shapes() const;
};

// N_i = {i} plus the in-neighbours of i.
std::vector<NodeSet> neighbor_sets(const DirectedDelayGraph& g);

// True when A_ij = 0 and B_ij = 0 for every j outside N_i.
bool respects_sparsity(const SystemModel& model, const DirectedDelayGraph& g);

// Zeroes every block (i, j) with j outside N_i.
Matrix mask_to_neighbors(const Matrix& m, const std::vector<NodeSet>& neighbors,
                         const BlockLayout& row_layout, const BlockLayout& col_layout);

// Everything derived from a graph once: delays, information graph, N_i.
struct Network {
  DirectedDelayGraph graph;
  DelayMatrix delays;
  InfoGraph info;
  std::vector<NodeSet> neighbors;
  int d_max = 0;

  // Rejects zero-delay cycles.
  explicit Network(DirectedDelayGraph g);
  Network() = default;
};

struct StabilityReport {
  bool ok = false;
  double rho = 0.0;
  double kappa0 = 0.0;
  double gamma0 = 0.0;
  int horizon = 0;
};

struct AssumptionReport {
  bool a1_ok = false;
  bool a2_ok = false;
  StabilityReport a3;
  bool a4_ok = false;
  std::vector<int> a2_failed_roots;

  bool all_ok() const { return a1_ok && a2_ok && a3.ok && a4_ok; }
};

// PBH tests on the eigenvalues with |lambda| >= 1.
bool is_stabilizable(const Matrix& a, const Matrix& b, double tol = 1e-9);
bool is_detectable(const Matrix& a, const Matrix& c, double tol = 1e-9);
// Symmetric factor C with Q = C^T C, negative eigenvalues clamped at zero.
Matrix symmetric_factor(const Matrix& q);

AssumptionReport validate_assumptions(const SystemModel& model, const Network& net);

struct Trajectory {
  Matrix x;  // n x (T + 1)
  Matrix u;  // m x T
  Matrix w;  // n x T

  int horizon() const { return static_cast<int>(u.cols()); }
};

// Deterministic i.i.d. N(0, sigma^2) draws, dims x count, from a seed.
Matrix gaussian_matrix(int rows, int cols, double sigma, std::uint64_t seed);

// Derives independent stream seeds from one base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Called with t and the trajectory filled up to x(t), u(t-1), w(t-1).
using Policy = std::function<Vector(int t, const Trajectory& so_far)>;

// x(0) = 0, w(t) ~ N(0, sigma_w^2 I) from the seed. Throws ShapeMismatch when
// the policy returns an input of the wrong dimension.
Trajectory simulate(const SystemModel& model, const Policy& policy, int horizon, std::uint64_t seed);

// Same, with an explicit noise sequence (n x T).
Trajectory simulate_with_noise(const SystemModel& model, const Policy& policy, const Matrix& noise);

// (1/T) sum_{t<T} x^T Q x + u^T R u.
double empirical_cost(const Trajectory& traj, const Matrix& q, const Matrix& r);

struct GeneratorOptions {
  double rho_target = 0.8;
  double q_scale = 2.0;
  double r_scale = 5.0;
  double sigma_w = 1.0;
};

// Nonzero blocks (j in N_i) drawn i.i.d. N(0,1); A rescaled so that
// rho(A) <= rho_target.
SystemModel generate_random_system(const Network& net, const Partition& partition,
                                   const GeneratorOptions& options, std::uint64_t seed);

}  // namespace declqr
