#include "jap/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "jap/text.hpp"

namespace jap {

const char* to_string(Exploration e) { return e == Exploration::kSoftmax ? "softmax" : "eps"; }

Exploration parse_exploration(const std::string& name) {
  if (name == "softmax") return Exploration::kSoftmax;
  if (name == "eps" || name == "eps-greedy") return Exploration::kEpsGreedy;
  throw std::invalid_argument("unknown exploration '" + name + "'");
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (cfg.weight_decay < 0.0) throw std::invalid_argument("weight decay must be non-negative");
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0))
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (!(cfg.temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (cfg.replay_capacity < 1) throw std::invalid_argument("replay capacity must be >= 1");
}

// -- Behaviour policy ---------------------------------------------------------

std::vector<double> softmax_probabilities(std::span<const double> q, double temperature) {
  if (q.empty()) throw EmptyActionSet();
  const double top = *std::max_element(q.begin(), q.end());
  std::vector<double> p(q.size());
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) total += p[i] = std::exp((q[i] - top) / temperature);
  for (double& x : p) x /= total;
  return p;
}

std::size_t sample_softmax(std::span<const double> q, double temperature, Rng& rng) {
  const auto p = softmax_probabilities(q, temperature);
  double u = rng.uniform();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (u < p[i]) return i;
    u -= p[i];
  }
  // Rounding left u just above the accumulated mass; take the last positive entry.
  for (std::size_t i = p.size(); i-- > 0;)
    if (p[i] > 0.0) return i;
  return p.size() - 1;
}

std::size_t argmax_index(std::span<const double> q) {
  if (q.empty()) throw EmptyActionSet();
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = i;
  return best;
}

std::size_t sample_eps_greedy(std::span<const double> q, double epsilon, Rng& rng) {
  if (q.empty()) throw EmptyActionSet();
  if (rng.uniform() < epsilon) return rng.index(q.size());
  return argmax_index(q);
}

Assignment select_action_softmax(const JobAllocationGraph& g, std::span<const double> q,
                                 double temperature, Rng& rng) {
  if (q.size() != g.selection().size()) throw DimensionMismatch("q must cover the selection set");
  return g.selection()[sample_softmax(q, temperature, rng)];
}

Assignment select_action_eps_greedy(const JobAllocationGraph& g, std::span<const double> q,
                                    double epsilon, Rng& rng) {
  if (q.size() != g.selection().size()) throw DimensionMismatch("q must cover the selection set");
  return g.selection()[sample_eps_greedy(q, epsilon, rng)];
}

// -- Learning targets ---------------------------------------------------------

namespace {

std::size_t action_position(const TransitionSample& t) {
  const auto& sel = t.s->selection();
  if (t.action_index < sel.size() && sel[t.action_index] == t.a) return t.action_index;
  const auto idx = t.s->selection_index(t.a);
  if (!idx) throw ActionNotAvailable(t.a);
  return *idx;
}

}  // namespace

double td_error(const TransitionSample& t, const QFunction& online, const QFunction& target,
                double gamma) {
  const double q_sa = online(*t.s).at(action_position(t));
  if (t.done) return t.r - q_sa;
  const auto q_next = online(*t.s_next);
  const std::size_t best = argmax_index(q_next);
  const double bootstrap = target(*t.s_next).at(best);
  return t.r + gamma * bootstrap - q_sa;
}

double td_error(const TransitionSample& t, const QNetworkParams& online,
                const QNetworkParams& target, double gamma) {
  return td_error(
      t, [&](const JobAllocationGraph& g) { return q_values(g, online); },
      [&](const JobAllocationGraph& g) { return q_values(g, target); }, gamma);
}

void soft_update(QNetworkParams& target, const QNetworkParams& online, double tau) {
  auto dst = blocks(target);
  const auto src = blocks(online);
  if (dst.size() != src.size()) throw DimensionMismatch("soft update between different shapes");
  for (std::size_t b = 0; b < dst.size(); ++b) {
    if (dst[b].size() != src[b].size()) throw DimensionMismatch("soft update between different shapes");
    for (std::size_t i = 0; i < dst[b].size(); ++i)
      dst[b][i] = tau * src[b][i] + (1.0 - tau) * dst[b][i];
  }
}

AdamWState make_adamw_state(const QNetworkParams& params) {
  AdamWState s;
  for (auto b : blocks(params)) {
    s.m.emplace_back(b.size(), 0.0);
    s.v.emplace_back(b.size(), 0.0);
  }
  return s;
}

void optimizer_step(QNetworkParams& theta, const QNetworkParams& grad, AdamWState& state,
                    double learning_rate, double weight_decay) {
  auto params = blocks(theta);
  const auto grads = blocks(grad);
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw DimensionMismatch("optimizer state does not match parameter shapes");
  ++state.step;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      params[b][i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.eps);
      params[b][i] -= learning_rate * weight_decay * params[b][i];
    }
  }
}

// -- Training loop ------------------------------------------------------------

InstanceSource generator_source(GeneratorConfig base) {
  validate(base);
  return [base](Rng& rng) {
    GeneratorConfig c = base;
    c.seed = rng.next_u64();
    return generate(c);
  };
}

InstanceSource dataset_source(std::vector<JobAllocationGraph> graphs) {
  if (graphs.empty()) throw std::invalid_argument("EmptyDataset: no training graphs");
  return [graphs = std::move(graphs)](Rng& rng) { return graphs[rng.index(graphs.size())]; };
}

namespace {

bool all_finite(const QNetworkParams& p) {
  for (auto b : blocks(p))
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

TrainResult train(const InstanceSource& source, const TrainConfig& cfg,
                  const std::function<void(const TrainLogRow&)>& on_update) {
  validate(cfg);
  TrainResult result;
  result.params = init_params(Rng::derive_seed(cfg.seed, "init"), cfg.net);
  result.target = result.params;
  if (cfg.episodes == 0) return result;

  QNetworkParams& theta = result.params;
  QNetworkParams& target = result.target;
  Rng instance_rng(Rng::derive_seed(cfg.seed, "instances"));
  Rng policy_rng(Rng::derive_seed(cfg.seed, "policy"));
  Rng replay_rng(Rng::derive_seed(cfg.seed, "replay"));
  ReplayBuffer buffer(cfg.replay_capacity, cfg.alpha, cfg.beta, cfg.per_epsilon);
  AdamWState adam = make_adamw_state(theta);
  QNetworkParams grad = zeros_like(theta);
  std::size_t update_idx = 0;

  // Parameters are fixed while a batch is evaluated, so Q-values of a graph
  // are computed once per network per batch. Consecutive slots usually chain
  // (s' of slot i is s of slot i + 1), so walking the batch from the highest
  // slot down finds the online values of s' already cached. Repeated draws of
  // a transition contribute identically and are folded into a multiplicity.
  std::unordered_map<const JobAllocationGraph*, std::vector<double>> online_q, target_q;
  struct Draw {
    std::size_t index;
    std::size_t count;
    double weight_sum;
  };
  std::vector<Draw> unique;
  std::vector<double> cotangent;

  for (std::size_t episode = 0; episode < cfg.episodes; ++episode) {
    auto s = std::make_shared<const JobAllocationGraph>(source(instance_rng));
    double episode_return = 0.0;
    while (!s->terminal()) {
      const auto q = q_values(*s, theta);
      const std::size_t action_index = cfg.exploration == Exploration::kSoftmax
                                           ? sample_softmax(q, cfg.temperature, policy_rng)
                                           : sample_eps_greedy(q, cfg.epsilon, policy_rng);
      const Assignment a = s->selection()[action_index];
      auto s_next = std::make_shared<const JobAllocationGraph>(apply_assignment(*s, a, cfg.removal_mode));
      const double reward = 1.0;
      episode_return += reward;
      buffer.insert({s, a, action_index, reward, s_next, s_next->terminal()});

      const auto batch = buffer.sample(cfg.batch_size, replay_rng);
      unique.clear();
      {
        std::vector<std::pair<std::size_t, double>> draws;
        draws.reserve(batch.indices.size());
        for (std::size_t k = 0; k < batch.indices.size(); ++k)
          draws.emplace_back(batch.indices[k], batch.weights[k]);
        std::sort(draws.begin(), draws.end());
        for (const auto& [i, w] : draws) {
          if (!unique.empty() && unique.back().index == i) {
            ++unique.back().count;
            unique.back().weight_sum += w;
          } else {
            unique.push_back({i, 1, w});
          }
        }
      }

      online_q.clear();
      target_q.clear();
      for (auto b : blocks(grad)) std::fill(b.begin(), b.end(), 0.0);
      double loss_sum = 0.0;
      double abs_q_sum = 0.0;
      for (auto it = unique.rbegin(); it != unique.rend(); ++it) {
        const auto& [i, count, weight_sum] = *it;
        const TransitionSample& t = buffer.at(i);
        const QForward fwd = q_forward(*t.s, theta);
        const std::size_t pos = action_position(t);
        const double q_sa = fwd.q[pos];
        online_q.try_emplace(t.s.get(), fwd.q);

        double y = t.r;
        if (!t.done) {
          auto on = online_q.find(t.s_next.get());
          if (on == online_q.end())
            on = online_q.emplace(t.s_next.get(), q_values(*t.s_next, theta)).first;
          const std::size_t best = argmax_index(on->second);
          auto tg = target_q.find(t.s_next.get());
          if (tg == target_q.end())
            tg = target_q.emplace(t.s_next.get(), q_values(*t.s_next, target)).first;
          y += cfg.gamma * tg->second[best];
        }
        const double delta = y - q_sa;
        // A non-finite error ends the run below; keep the buffer valid until then.
        if (std::isfinite(delta)) buffer.update_priority(i, delta);

        loss_sum += weight_sum * delta * delta;
        abs_q_sum += static_cast<double>(count) * std::abs(q_sa);
        cotangent.assign(t.s->selection().size(), 0.0);
        // Descent direction on 1/2 w delta^2 with the target held fixed.
        cotangent[pos] = -weight_sum * delta;
        q_backward(*t.s, theta, fwd, cotangent, grad);
      }

      const double b = static_cast<double>(cfg.batch_size);
      if (!cfg.sum_gradients)
        for (auto blk : blocks(grad))
          for (double& v : blk) v /= b;

      TrainLogRow row;
      row.update_idx = update_idx++;
      row.episode = episode;
      row.loss = loss_sum / b;
      row.mean_abs_q = abs_q_sum / b;
      row.episode_return = episode_return;
      result.log.rows.push_back(row);
      if (on_update) on_update(row);

      if (!std::isfinite(row.loss) || !all_finite(grad)) {
        result.status = TrainStatus::kDiverged;
        result.message = "non-finite loss at update " + std::to_string(row.update_idx) +
                         " (episode " + std::to_string(episode) + ")";
        return result;
      }
      optimizer_step(theta, grad, adam, cfg.learning_rate, cfg.weight_decay);
      soft_update(target, theta, cfg.tau);
      if (!all_finite(theta)) {
        result.status = TrainStatus::kDiverged;
        result.message = "non-finite parameters after update " + std::to_string(row.update_idx);
        return result;
      }
      s = std::move(s_next);
    }
    result.log.episode_returns.push_back(episode_return);
  }
  return result;
}

void write_training_log_csv(std::ostream& os, const TrainingLog& log) {
  os << "update_idx,episode,loss,mean_abs_q,episode_return\n";
  for (const auto& r : log.rows)
    os << r.update_idx << ',' << r.episode << ',' << format_number(r.loss) << ','
       << format_number(r.mean_abs_q) << ',' << format_number(r.episode_return) << '\n';
}

TrainingLog read_training_log_csv(std::istream& is) {
  TrainingLog log;
  std::string line;
  if (!std::getline(is, line) || line != "update_idx,episode,loss,mean_abs_q,episode_return")
    throw std::runtime_error("training log: unexpected header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 5) throw std::runtime_error("training log: expected 5 columns: " + line);
    TrainLogRow r;
    r.update_idx = static_cast<std::size_t>(std::stoull(f[0]));
    r.episode = static_cast<std::size_t>(std::stoull(f[1]));
    r.loss = parse_double(f[2]);
    r.mean_abs_q = parse_double(f[3]);
    r.episode_return = parse_double(f[4]);
    log.rows.push_back(r);
  }
  return log;
}

}  // namespace jap
