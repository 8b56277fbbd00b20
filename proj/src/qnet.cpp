#include "jap/qnet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "jap/rng.hpp"

namespace jap {

const char* to_string(ConflictMessageDirection dir) {
  return dir == ConflictMessageDirection::kIncoming ? "in" : "out";
}

ConflictMessageDirection parse_conflict_direction(const std::string& name) {
  if (name == "in" || name == "incoming") return ConflictMessageDirection::kIncoming;
  if (name == "out" || name == "outgoing") return ConflictMessageDirection::kOutgoing;
  throw std::invalid_argument("unknown conflict message direction '" + name + "'");
}

std::vector<std::size_t> QNetworkParams::dims() const {
  std::vector<std::size_t> d;
  if (modules.empty()) return d;
  d.push_back(modules.front().d_in());
  for (const auto& m : modules) d.push_back(m.d_out());
  return d;
}

namespace {

void glorot_fill(std::span<double> values, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : values) v = (2.0 * rng.uniform() - 1.0) * limit;
}

AttentionLayerParams make_attention(std::size_t d_in, std::size_t d_out, Rng& rng) {
  AttentionLayerParams p;
  p.weight = Matrix(d_in, d_out);
  glorot_fill(p.weight.values(), d_in, d_out, rng);
  p.attn.assign(2 * d_out, 0.0);
  glorot_fill(p.attn, 2 * d_out, 1, rng);
  return p;
}

template <typename Params, typename Span>
std::vector<Span> collect_blocks(Params& params) {
  std::vector<Span> out;
  for (auto& m : params.modules) {
    out.emplace_back(m.selection.weight.values());
    out.emplace_back(m.selection.attn);
    out.emplace_back(m.conflict.weight.values());
    out.emplace_back(m.conflict.attn);
    out.emplace_back(m.merger.fc_weight.values());
    out.emplace_back(m.merger.fc_bias);
    out.emplace_back(&m.merger.lambda, 1);
    if (m.normalize) {
      out.emplace_back(m.norm_scale);
      out.emplace_back(m.norm_shift);
    }
  }
  return out;
}

}  // namespace

QNetworkParams init_params(std::uint64_t seed, const QNetConfig& config) {
  if (config.dims.size() < 2) throw DimensionMismatch("need at least one module");
  Rng rng(seed);
  QNetworkParams params;
  params.init_seed = seed;
  params.conflict_direction = config.conflict_direction;
  const std::size_t k = config.dims.size() - 1;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t d_in = config.dims[i];
    const std::size_t d_out = config.dims[i + 1];
    CaeModuleParams m;
    m.selection = make_attention(d_in, d_out, rng);
    m.conflict = make_attention(d_in, d_out, rng);
    m.merger.fc_weight = Matrix(2 * d_out, d_out);
    glorot_fill(m.merger.fc_weight.values(), 2 * d_out, d_out, rng);
    m.merger.fc_bias.assign(d_out, 0.0);
    m.merger.lambda = 0.0;
    m.normalize = i + 1 < k;
    if (m.normalize) {
      m.norm_scale.assign(d_out, 1.0);
      m.norm_shift.assign(d_out, 0.0);
    }
    params.modules.push_back(std::move(m));
  }
  return params;
}

QNetworkParams zeros_like(const QNetworkParams& params) {
  QNetworkParams z = params;
  for (auto block : blocks(z)) std::fill(block.begin(), block.end(), 0.0);
  return z;
}

std::vector<std::string> block_names(const QNetworkParams& params) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < params.modules.size(); ++i) {
    const std::string prefix = "m" + std::to_string(i) + ".";
    for (const char* n : {"selection.weight", "selection.attn", "conflict.weight", "conflict.attn",
                          "merger.fc_weight", "merger.fc_bias", "merger.lambda"})
      names.push_back(prefix + n);
    if (params.modules[i].normalize) {
      names.push_back(prefix + "norm_scale");
      names.push_back(prefix + "norm_shift");
    }
  }
  return names;
}

std::vector<std::span<double>> blocks(QNetworkParams& params) {
  return collect_blocks<QNetworkParams, std::span<double>>(params);
}

std::vector<std::span<const double>> blocks(const QNetworkParams& params) {
  return collect_blocks<const QNetworkParams, std::span<const double>>(params);
}

std::size_t parameter_count(const QNetworkParams& params) {
  std::size_t n = 0;
  for (auto b : blocks(params)) n += b.size();
  return n;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// -- Dense helpers ------------------------------------------------------------

namespace {

// out = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  out = Matrix(n, m);
  for (std::size_t r = 0; r < n; ++r) {
    double* o = out.row(r).data();
    const double* ar = a.row(r).data();
    for (std::size_t i = 0; i < k; ++i) {
      const double av = ar[i];
      const double* br = b.row(i).data();
      for (std::size_t c = 0; c < m; ++c) o[c] += av * br[c];
    }
  }
}

// acc += a^T * b
void matmul_at_b_acc(const Matrix& a, const Matrix& b, Matrix& acc) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const double* ar = a.row(r).data();
    const double* br = b.row(r).data();
    for (std::size_t i = 0; i < k; ++i) {
      const double av = ar[i];
      if (av == 0.0) continue;
      double* o = acc.row(i).data();
      for (std::size_t c = 0; c < m; ++c) o[c] += av * br[c];
    }
  }
}

// out = a * b^T, via an explicit transpose so the inner loop runs over
// contiguous memory.
void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out) {
  Matrix bt(b.cols(), b.rows());
  for (std::size_t r = 0; r < b.rows(); ++r)
    for (std::size_t c = 0; c < b.cols(); ++c) bt(c, r) = b(r, c);
  matmul(a, bt, out);
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  if (top.rows() > 0 && bottom.rows() > 0 && top.cols() != bottom.cols())
    throw DimensionMismatch("cannot stack matrices with different widths");
  const std::size_t cols = top.rows() > 0 ? top.cols() : bottom.cols();
  Matrix out(top.rows() + bottom.rows(), cols);
  std::copy(top.values().begin(), top.values().end(), out.values().begin());
  std::copy(bottom.values().begin(), bottom.values().end(),
            out.values().begin() + static_cast<std::ptrdiff_t>(top.size()));
  return out;
}

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t count) {
  Matrix out(count, m.cols());
  std::copy_n(m.values().begin() + static_cast<std::ptrdiff_t>(begin * m.cols()), count * m.cols(),
              out.values().begin());
  return out;
}

}  // namespace

// -- Attention ----------------------------------------------------------------

Matrix attention_forward(const Adjacency& in_neighbors, const Matrix& h,
                         const AttentionLayerParams& p, AttentionCache* cache) {
  const std::size_t n = h.rows();
  const std::size_t d_out = p.weight.cols();
  if (in_neighbors.vertex_count() != n)
    throw DimensionMismatch("neighbour structure and embedding rows disagree");
  if (n > 0 && h.cols() != p.weight.rows())
    throw DimensionMismatch("embedding width does not match attention weight");
  if (p.attn.size() != 2 * d_out) throw DimensionMismatch("attention vector must have 2*d_out entries");

  AttentionCache local;
  AttentionCache& c = cache ? *cache : local;
  c.input = h;
  matmul(h, p.weight, c.z);
  if (n == 0) c.z = Matrix(0, d_out);
  const double* a_dst = p.attn.data();
  const double* a_src = p.attn.data() + d_out;
  c.s_dst.resize(n);
  c.s_src.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    c.s_dst[v] = dot(a_dst, c.z.row(v).data(), d_out);
    c.s_src[v] = dot(a_src, c.z.row(v).data(), d_out);
  }

  c.alpha.assign(in_neighbors.values.size() + n, 0.0);
  Matrix out(n, d_out);
  auto leaky = [&](double x) { return x > 0.0 ? x : p.leaky_slope * x; };
  for (std::size_t v = 0; v < n; ++v) {
    const auto nbrs = in_neighbors[v];
    double* alpha = c.alpha.data() + in_neighbors.offsets[v] + v;
    alpha[0] = leaky(c.s_dst[v] + c.s_src[v]);
    double top = alpha[0];
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      alpha[k + 1] = leaky(c.s_dst[v] + c.s_src[nbrs[k]]);
      top = std::max(top, alpha[k + 1]);
    }
    double total = 0.0;
    for (std::size_t k = 0; k <= nbrs.size(); ++k) {
      alpha[k] = std::exp(alpha[k] - top);
      total += alpha[k];
    }
    double* o = out.row(v).data();
    for (std::size_t k = 0; k <= nbrs.size(); ++k) {
      alpha[k] /= total;
      const std::size_t u = k == 0 ? v : static_cast<std::size_t>(nbrs[k - 1]);
      const double* zu = c.z.row(u).data();
      for (std::size_t col = 0; col < d_out; ++col) o[col] += alpha[k] * zu[col];
    }
  }
  return out;
}

Matrix attention_backward(const Adjacency& in_neighbors, const AttentionLayerParams& p,
                          const AttentionCache& c, const Matrix& d_out,
                          AttentionLayerParams& grad) {
  const std::size_t n = c.z.rows();
  const std::size_t d = p.weight.cols();
  if (d_out.rows() != n || (n > 0 && d_out.cols() != d))
    throw DimensionMismatch("attention cotangent has the wrong shape");

  Matrix dz(n, d);
  std::vector<double> ds_dst(n, 0.0), ds_src(n, 0.0);
  std::vector<double> d_alpha;
  for (std::size_t v = 0; v < n; ++v) {
    const auto nbrs = in_neighbors[v];
    const double* alpha = c.alpha.data() + in_neighbors.offsets[v] + v;
    const double* gv = d_out.row(v).data();
    d_alpha.resize(nbrs.size() + 1);
    double weighted = 0.0;
    for (std::size_t k = 0; k <= nbrs.size(); ++k) {
      const std::size_t u = k == 0 ? v : static_cast<std::size_t>(nbrs[k - 1]);
      double* dzu = dz.row(u).data();
      for (std::size_t col = 0; col < d; ++col) dzu[col] += alpha[k] * gv[col];
      d_alpha[k] = dot(gv, c.z.row(u).data(), d);
      weighted += alpha[k] * d_alpha[k];
    }
    for (std::size_t k = 0; k <= nbrs.size(); ++k) {
      const std::size_t u = k == 0 ? v : static_cast<std::size_t>(nbrs[k - 1]);
      const double d_score = alpha[k] * (d_alpha[k] - weighted);
      const double pre = c.s_dst[v] + c.s_src[u];
      const double d_pre = pre > 0.0 ? d_score : p.leaky_slope * d_score;
      ds_dst[v] += d_pre;
      ds_src[u] += d_pre;
    }
  }

  const double* a_dst = p.attn.data();
  const double* a_src = p.attn.data() + d;
  double* ga_dst = grad.attn.data();
  double* ga_src = grad.attn.data() + d;
  for (std::size_t v = 0; v < n; ++v) {
    const double* zv = c.z.row(v).data();
    double* dzv = dz.row(v).data();
    for (std::size_t col = 0; col < d; ++col) {
      ga_dst[col] += ds_dst[v] * zv[col];
      ga_src[col] += ds_src[v] * zv[col];
      dzv[col] += ds_dst[v] * a_dst[col] + ds_src[v] * a_src[col];
    }
  }

  matmul_at_b_acc(c.input, dz, grad.weight);
  Matrix dh;
  matmul_a_bt(dz, p.weight, dh);
  if (n == 0) dh = Matrix(0, p.weight.rows());
  return dh;
}

// -- Merger -------------------------------------------------------------------

namespace {

// FC([x||y]) + FC([y||x]) = (x + y)(W_top + W_bottom) + 2b, so only the sum of
// the streams and of the two weight halves matter.
void merger_forward(const Matrix& x, const Matrix& y, const MergerParams& m, Matrix& sum,
                    Matrix& fc, Matrix& out) {
  const std::size_t rows = x.rows();
  const std::size_t d = m.fc_weight.cols();
  if (y.rows() != rows || (rows > 0 && (x.cols() != d || y.cols() != d)))
    throw DimensionMismatch("merger inputs must both be |J| x d_out");
  if (m.fc_weight.rows() != 2 * d || m.fc_bias.size() != d)
    throw DimensionMismatch("merger FC must map 2*d_out to d_out");

  sum = Matrix(rows, d);
  for (std::size_t i = 0; i < sum.size(); ++i) sum.values()[i] = x.values()[i] + y.values()[i];
  Matrix w_sum(d, d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t col = 0; col < d; ++col)
      w_sum(r, col) = m.fc_weight(r, col) + m.fc_weight(d + r, col);
  matmul(sum, w_sum, fc);
  if (rows == 0) fc = Matrix(0, d);
  out = Matrix(rows, d);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t col = 0; col < d; ++col) {
      fc(r, col) += 2.0 * m.fc_bias[col];
      out(r, col) = 1.0 + 0.5 * m.lambda * fc(r, col);
    }
}

// Returns the cotangent shared by both streams.
Matrix merger_backward(const MergerParams& m, const Matrix& sum, const Matrix& fc,
                       const Matrix& d_out, MergerParams& grad) {
  const std::size_t rows = sum.rows();
  const std::size_t d = m.fc_weight.cols();
  Matrix d_fc(rows, d);
  double d_lambda = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t col = 0; col < d; ++col) {
      d_lambda += 0.5 * d_out(r, col) * fc(r, col);
      d_fc(r, col) = 0.5 * m.lambda * d_out(r, col);
      grad.fc_bias[col] += 2.0 * d_fc(r, col);
    }
  grad.lambda += d_lambda;

  Matrix d_wsum(d, d);
  matmul_at_b_acc(sum, d_fc, d_wsum);
  Matrix w_sum(d, d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t col = 0; col < d; ++col) {
      grad.fc_weight(r, col) += d_wsum(r, col);
      grad.fc_weight(d + r, col) += d_wsum(r, col);
      w_sum(r, col) = m.fc_weight(r, col) + m.fc_weight(d + r, col);
    }
  Matrix d_sum;
  matmul_a_bt(d_fc, w_sum, d_sum);
  if (rows == 0) d_sum = Matrix(0, d);
  return d_sum;
}

// Row-wise layer norm with shared scale/shift followed by GELU, in place.
void norm_gelu_forward(Matrix& x, const CaeModuleParams& m, ModuleTape* tape) {
  const std::size_t rows = x.rows(), d = x.cols();
  Matrix xhat(rows, d), normed(rows, d);
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = x.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t col = 0; col < d; ++col) {
      xhat(r, col) = (row[col] - mean) * inv_std[r];
      normed(r, col) = m.norm_scale[col] * xhat(r, col) + m.norm_shift[col];
      row[col] = gelu(normed(r, col));
    }
  }
  if (tape) {
    tape->norm_xhat = std::move(xhat);
    tape->norm_inv_std = std::move(inv_std);
    tape->norm_out = std::move(normed);
  }
}

void norm_gelu_backward(const CaeModuleParams& m, const ModuleTape& tape, Matrix& d,
                        CaeModuleParams& grad) {
  const std::size_t rows = d.rows(), width = d.cols();
  std::vector<double> dxhat(width);
  for (std::size_t r = 0; r < rows; ++r) {
    auto drow = d.row(r);
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t col = 0; col < width; ++col) {
      const double dy = drow[col] * gelu_derivative(tape.norm_out(r, col));
      grad.norm_scale[col] += dy * tape.norm_xhat(r, col);
      grad.norm_shift[col] += dy;
      dxhat[col] = dy * m.norm_scale[col];
      mean_dxhat += dxhat[col];
      mean_dxhat_xhat += dxhat[col] * tape.norm_xhat(r, col);
    }
    mean_dxhat /= static_cast<double>(width);
    mean_dxhat_xhat /= static_cast<double>(width);
    for (std::size_t col = 0; col < width; ++col)
      drow[col] = tape.norm_inv_std[r] *
                  (dxhat[col] - mean_dxhat - tape.norm_xhat(r, col) * mean_dxhat_xhat);
  }
}

}  // namespace

Matrix merge_job_streams(const Matrix& x, const Matrix& y, const MergerParams& m) {
  Matrix sum, fc, out;
  merger_forward(x, y, m, sum, fc, out);
  return out;
}

// -- Graph structure ----------------------------------------------------------

Adjacency selection_neighbors(const JobAllocationGraph& g) {
  const std::size_t people = g.n_people();
  const std::size_t jobs = g.n_jobs();
  Adjacency adj;
  adj.offsets.assign(people + jobs + 1, 0);
  adj.values.reserve(2 * g.selection().size());
  for (std::size_t p = 0; p < people; ++p) {
    for (JobIndex j : g.jobs_of(static_cast<PersonIndex>(p)))
      adj.values.push_back(static_cast<std::int32_t>(people) + j);
    adj.offsets[p + 1] = static_cast<std::uint32_t>(adj.values.size());
  }
  for (std::size_t j = 0; j < jobs; ++j) {
    for (PersonIndex p : g.people_of(static_cast<JobIndex>(j))) adj.values.push_back(p);
    adj.offsets[people + j + 1] = static_cast<std::uint32_t>(adj.values.size());
  }
  return adj;
}

Adjacency conflict_neighbors(const JobAllocationGraph& g, ConflictMessageDirection dir) {
  Adjacency adj;
  adj.offsets.assign(static_cast<std::size_t>(g.n_jobs()) + 1, 0);
  adj.values.reserve(g.conflicts().size());
  for (JobIndex j = 0; j < g.n_jobs(); ++j) {
    const auto nbrs = dir == ConflictMessageDirection::kIncoming ? g.conflict_in(j) : g.conflict_out(j);
    adj.values.insert(adj.values.end(), nbrs.begin(), nbrs.end());
    adj.offsets[j + 1] = static_cast<std::uint32_t>(adj.values.size());
  }
  return adj;
}

namespace {

void check_module_input(const JobAllocationGraph& g, const Matrix& mu, const Matrix& nu,
                        const CaeModuleParams& m) {
  if (mu.rows() != static_cast<std::size_t>(g.n_people()) ||
      nu.rows() != static_cast<std::size_t>(g.n_jobs()))
    throw DimensionMismatch("embedding rows must match |P| and |J|");
  if ((mu.rows() > 0 && mu.cols() != m.d_in()) || (nu.rows() > 0 && nu.cols() != m.d_in()))
    throw DimensionMismatch("embedding width must equal the module's d_in");
  if (m.conflict.weight.rows() != m.d_in() || m.conflict.weight.cols() != m.d_out())
    throw DimensionMismatch("attention layers of a module must share d_in and d_out");
}

CaeOutput cae_forward_impl(const JobAllocationGraph& g, const Adjacency& sel_adj,
                           const Adjacency& conf_adj, const Matrix& mu, const Matrix& nu,
                           const CaeModuleParams& m, ModuleTape* tape) {
  check_module_input(g, mu, nu, m);
  const std::size_t people = g.n_people();
  const std::size_t jobs = g.n_jobs();
  const Matrix stacked = stack_rows(mu, nu);
  const Matrix sel = attention_forward(sel_adj, stacked, m.selection, tape ? &tape->selection : nullptr);
  CaeOutput out;
  out.person = slice_rows(sel, 0, people);
  out.job_selection_stream = slice_rows(sel, people, jobs);
  out.job_conflict_stream = attention_forward(conf_adj, nu, m.conflict, tape ? &tape->conflict : nullptr);
  Matrix sum, fc;
  merger_forward(out.job_selection_stream, out.job_conflict_stream, m.merger, sum, fc, out.job);
  if (tape) {
    tape->merger_sum = std::move(sum);
    tape->merger_fc = std::move(fc);
  }
  return out;
}

}  // namespace

CaeOutput cae_forward(const JobAllocationGraph& g, const Matrix& mu, const Matrix& nu,
                      const CaeModuleParams& m, ConflictMessageDirection dir) {
  return cae_forward_impl(g, selection_neighbors(g), conflict_neighbors(g, dir), mu, nu, m, nullptr);
}

namespace {

// With record = false no tape is kept; the Q-values are identical.
QForward forward(const JobAllocationGraph& g, const QNetworkParams& theta, bool record) {
  QForward fwd;
  fwd.selection_neighbors = selection_neighbors(g);
  fwd.conflict_neighbors = conflict_neighbors(g, theta.conflict_direction);
  auto features = degree_features(g);
  Matrix mu = std::move(features.person);
  Matrix nu = std::move(features.job);
  if (record) fwd.tape.resize(theta.modules.size());
  for (std::size_t i = 0; i < theta.modules.size(); ++i) {
    const auto& m = theta.modules[i];
    ModuleTape* tape = record ? &fwd.tape[i] : nullptr;
    auto out = cae_forward_impl(g, fwd.selection_neighbors, fwd.conflict_neighbors, mu, nu, m, tape);
    mu = std::move(out.person);
    nu = std::move(out.job);
    if (m.normalize) {
      Matrix both = stack_rows(mu, nu);
      norm_gelu_forward(both, m, tape);
      mu = slice_rows(both, 0, mu.rows());
      nu = slice_rows(both, mu.rows(), nu.rows());
    }
  }
  const auto sel = g.selection();
  fwd.q.resize(sel.size());
  const std::size_t d = mu.cols();
  for (std::size_t e = 0; e < sel.size(); ++e)
    fwd.q[e] = dot(mu.row(sel[e].person).data(), nu.row(sel[e].job).data(), d);
  fwd.person_embedding = std::move(mu);
  fwd.job_embedding = std::move(nu);
  return fwd;
}

}  // namespace

QForward q_forward(const JobAllocationGraph& g, const QNetworkParams& theta) {
  return forward(g, theta, true);
}

std::vector<double> q_values(const JobAllocationGraph& g, const QNetworkParams& theta) {
  return forward(g, theta, false).q;
}

void q_backward(const JobAllocationGraph& g, const QNetworkParams& theta, const QForward& fwd,
                std::span<const double> cotangent, QNetworkParams& grad) {
  const auto sel = g.selection();
  if (cotangent.size() != sel.size() || fwd.q.size() != sel.size())
    throw DimensionMismatch("ShapeMismatch: cotangent must have one entry per selection edge");
  if (fwd.tape.size() != theta.modules.size())
    throw DimensionMismatch("ShapeMismatch: forward pass was not recorded for these parameters");
  if (grad.modules.size() != theta.modules.size())
    throw DimensionMismatch("ShapeMismatch: gradient and parameters differ in module count");

  const std::size_t people = g.n_people();
  const std::size_t jobs = g.n_jobs();
  const std::size_t d = fwd.person_embedding.cols();
  Matrix d_mu(people, d), d_nu(jobs, d);
  for (std::size_t e = 0; e < sel.size(); ++e) {
    const double c = cotangent[e];
    if (c == 0.0) continue;
    const double* mu = fwd.person_embedding.row(sel[e].person).data();
    const double* nu = fwd.job_embedding.row(sel[e].job).data();
    double* dmu = d_mu.row(sel[e].person).data();
    double* dnu = d_nu.row(sel[e].job).data();
    for (std::size_t k = 0; k < d; ++k) {
      dmu[k] += c * nu[k];
      dnu[k] += c * mu[k];
    }
  }

  for (std::size_t i = theta.modules.size(); i-- > 0;) {
    const auto& m = theta.modules[i];
    const auto& tape = fwd.tape[i];
    auto& gm = grad.modules[i];
    if (m.normalize) {
      Matrix both = stack_rows(d_mu, d_nu);
      norm_gelu_backward(m, tape, both, gm);
      d_mu = slice_rows(both, 0, people);
      d_nu = slice_rows(both, people, jobs);
    }
    const Matrix d_stream = merger_backward(m.merger, tape.merger_sum, tape.merger_fc, d_nu, gm.merger);
    Matrix d_nu_in = attention_backward(fwd.conflict_neighbors, m.conflict, tape.conflict, d_stream,
                                        gm.conflict);
    const Matrix d_sel = attention_backward(fwd.selection_neighbors, m.selection, tape.selection,
                                            stack_rows(d_mu, d_stream), gm.selection);
    d_mu = slice_rows(d_sel, 0, people);
    for (std::size_t j = 0; j < jobs; ++j)
      for (std::size_t k = 0; k < d_nu_in.cols(); ++k) d_nu_in(j, k) += d_sel(people + j, k);
    d_nu = std::move(d_nu_in);
  }
}

QNetworkParams q_backward(const JobAllocationGraph& g, const QNetworkParams& theta,
                          const QForward& fwd, std::span<const double> cotangent) {
  QNetworkParams grad = zeros_like(theta);
  q_backward(g, theta, fwd, cotangent, grad);
  return grad;
}

}  // namespace jap
