#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jap/graph.hpp"
#include "jap/matrix.hpp"

namespace jap {

// Q-network over job allocation graphs: K stacked context-aware embedding
// (CAE) modules followed by an inner-product head.
//
// Each CAE module runs one single-head graph-attention layer over the
// bipartite selection subgraph (people and jobs, messages both ways) and one
// over the conflict subgraph (jobs only), then merges the two job streams
// symmetrically:
//
//   nu = (f(nu0, nu1) + f(nu1, nu0)) / 2,   f(x, y) = 1 + lambda * FC([x || y])
//
// People only live in the selection subgraph and bypass the merger. Every
// module but the last is followed by layer normalisation and GELU on both
// embedding sets. Q({p, j}) = <mu_p, nu_j> on the final embeddings.

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kLeakySlope = 0.2;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Which conflict arcs feed a job's attention neighbourhood.
enum class ConflictMessageDirection {
  kIncoming,  // job v aggregates from {u : (u, v) in C}
  kOutgoing,  // job v aggregates from {w : (v, w) in C}
};

const char* to_string(ConflictMessageDirection dir);
ConflictMessageDirection parse_conflict_direction(const std::string& name);

struct AttentionLayerParams {
  Matrix weight;             // d_in x d_out, shared linear map
  std::vector<double> attn;  // 2 * d_out: destination half, then source half
  double leaky_slope = kLeakySlope;
};

struct MergerParams {
  Matrix fc_weight;  // 2 * d_out x d_out; rows [0, d_out) act on the first argument
  std::vector<double> fc_bias;
  double lambda = 0.0;
};

struct CaeModuleParams {
  AttentionLayerParams selection;
  AttentionLayerParams conflict;
  MergerParams merger;
  bool normalize = true;  // false on the last module
  std::vector<double> norm_scale;
  std::vector<double> norm_shift;

  std::size_t d_in() const { return selection.weight.rows(); }
  std::size_t d_out() const { return selection.weight.cols(); }
};

struct QNetworkParams {
  std::vector<CaeModuleParams> modules;
  ConflictMessageDirection conflict_direction = ConflictMessageDirection::kIncoming;
  std::uint64_t init_seed = 0;

  /// d_0, d_1, ..., d_K.
  std::vector<std::size_t> dims() const;
};

struct QNetConfig {
  std::vector<std::size_t> dims{2, 16, 16, 8};
  ConflictMessageDirection conflict_direction = ConflictMessageDirection::kIncoming;
};

/// Glorot-uniform weights and attention vectors; zero biases, lambda = 0,
/// unit norm scale, zero norm shift. Deterministic in `seed`.
QNetworkParams init_params(std::uint64_t seed, const QNetConfig& config = {});

/// Same shapes, every learnable value zero.
QNetworkParams zeros_like(const QNetworkParams& params);

// Learnable blocks in a fixed order; names look like "m0.selection.weight".
std::vector<std::string> block_names(const QNetworkParams& params);
std::vector<std::span<double>> blocks(QNetworkParams& params);
std::vector<std::span<const double>> blocks(const QNetworkParams& params);
std::size_t parameter_count(const QNetworkParams& params);

// -- Layers -------------------------------------------------------------------

struct AttentionCache {
  Matrix input;
  Matrix z;                   // input * weight
  std::vector<double> s_dst;  // <attn_dst, z_v>
  std::vector<double> s_src;  // <attn_src, z_u>
  std::vector<double> alpha;  // per destination: self slot, then neighbours
};

/// H'_v = sum over u in {v} + in_neighbors(v) of alpha_vu * W h_u, with alpha a
/// softmax of leaky_relu(<a_dst, W h_v> + <a_src, W h_u>) over that set.
Matrix attention_forward(const Adjacency& in_neighbors, const Matrix& h,
                         const AttentionLayerParams& p, AttentionCache* cache = nullptr);

/// Accumulates parameter gradients into `grad` and returns dL/dH.
Matrix attention_backward(const Adjacency& in_neighbors, const AttentionLayerParams& p,
                          const AttentionCache& cache, const Matrix& d_out,
                          AttentionLayerParams& grad);

/// Symmetric merger of the two job streams (see the header comment).
Matrix merge_job_streams(const Matrix& x, const Matrix& y, const MergerParams& m);

struct CaeOutput {
  Matrix person;  // mu'
  Matrix job;     // nu' (merged)
  Matrix job_selection_stream;  // nu'_0
  Matrix job_conflict_stream;   // nu'_1
};

/// One module without the trailing normalisation/activation.
CaeOutput cae_forward(const JobAllocationGraph& g, const Matrix& mu, const Matrix& nu,
                      const CaeModuleParams& m,
                      ConflictMessageDirection dir = ConflictMessageDirection::kIncoming);

// -- Whole network ------------------------------------------------------------

struct ModuleTape {
  AttentionCache selection;
  AttentionCache conflict;
  Matrix merger_sum;  // nu0 + nu1
  Matrix merger_fc;   // FC([x||y]) + FC([y||x])
  // Layer norm + GELU, person rows then job rows.
  Matrix norm_xhat;
  std::vector<double> norm_inv_std;
  Matrix norm_out;  // pre-GELU
};

/// Forward pass result; `q` is aligned with g.selection().
struct QForward {
  std::vector<double> q;
  Matrix person_embedding;
  Matrix job_embedding;
  std::vector<ModuleTape> tape;
  Adjacency selection_neighbors;
  Adjacency conflict_neighbors;
};

QForward q_forward(const JobAllocationGraph& g, const QNetworkParams& theta);
std::vector<double> q_values(const JobAllocationGraph& g, const QNetworkParams& theta);

/// Adds d(sum_e cotangent[e] * q[e]) / d(theta) into `grad`.
void q_backward(const JobAllocationGraph& g, const QNetworkParams& theta, const QForward& fwd,
                std::span<const double> cotangent, QNetworkParams& grad);
QNetworkParams q_backward(const JobAllocationGraph& g, const QNetworkParams& theta,
                          const QForward& fwd, std::span<const double> cotangent);

/// Stacked selection-subgraph neighbourhoods: people are nodes [0, P), jobs
/// are nodes [P, P + J).
Adjacency selection_neighbors(const JobAllocationGraph& g);
Adjacency conflict_neighbors(const JobAllocationGraph& g, ConflictMessageDirection dir);

double gelu(double x);
double gelu_derivative(double x);

}  // namespace jap
