#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jap/environment.hpp"
#include "jap/generator.hpp"
#include "jap/qnet.hpp"
#include "jap/replay.hpp"
#include "jap/rng.hpp"

namespace jap {

class EmptyActionSet : public std::invalid_argument {
 public:
  EmptyActionSet() : std::invalid_argument("EmptyActionSet: no assignment available") {}
};

enum class Exploration { kSoftmax, kEpsGreedy };

const char* to_string(Exploration e);
Exploration parse_exploration(const std::string& name);

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 2048;
  std::size_t episodes = 200;
  double gamma = 1.0;
  double tau = 0.025;
  Exploration exploration = Exploration::kSoftmax;
  double epsilon = 0.10;      // eps-greedy exploration rate
  double temperature = 1.0;   // softmax exploration temperature
  double weight_decay = 0.01;
  double alpha = 0.6;
  double beta = 0.4;
  double per_epsilon = 1e-6;
  std::size_t replay_capacity = 1'000'000;
  /// Use the summed gradient instead of its batch mean.
  bool sum_gradients = false;
  ConflictRemovalMode removal_mode = ConflictRemovalMode::kBidirectional;
  QNetConfig net;
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const TrainConfig& cfg);

// -- Behaviour policy ---------------------------------------------------------

std::vector<double> softmax_probabilities(std::span<const double> q, double temperature = 1.0);

/// Index into q drawn from softmax(q / temperature). Throws EmptyActionSet.
std::size_t sample_softmax(std::span<const double> q, double temperature, Rng& rng);

/// Largest q, lowest index on ties. Throws EmptyActionSet.
std::size_t argmax_index(std::span<const double> q);

/// Uniform index with probability epsilon, otherwise argmax_index.
std::size_t sample_eps_greedy(std::span<const double> q, double epsilon, Rng& rng);

Assignment select_action_softmax(const JobAllocationGraph& g, std::span<const double> q,
                                 double temperature, Rng& rng);
Assignment select_action_eps_greedy(const JobAllocationGraph& g, std::span<const double> q,
                                    double epsilon, Rng& rng);

// -- Learning targets ---------------------------------------------------------

/// Q-values for every selection edge of a graph, aligned with g.selection().
using QFunction = std::function<std::vector<double>(const JobAllocationGraph&)>;

/// Double-DQN error: delta = r + gamma * Q_target(s', argmax_a' Q_online(s', a'))
/// - Q_online(s, a), with the bootstrap term dropped when `done`.
double td_error(const TransitionSample& t, const QFunction& online, const QFunction& target,
                double gamma);
double td_error(const TransitionSample& t, const QNetworkParams& online,
                const QNetworkParams& target, double gamma);

/// target <- tau * online + (1 - tau) * target, block by block.
void soft_update(QNetworkParams& target, const QNetworkParams& online, double tau);

/// Adam with decoupled weight decay.
struct AdamWState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

AdamWState make_adamw_state(const QNetworkParams& params);

/// One descent step along `grad`, then theta <- theta - lr * weight_decay * theta.
void optimizer_step(QNetworkParams& theta, const QNetworkParams& grad, AdamWState& state,
                    double learning_rate, double weight_decay);

// -- Training loop ------------------------------------------------------------

/// Draws the initial graph of each episode.
using InstanceSource = std::function<JobAllocationGraph(Rng&)>;

/// Fresh generator instance per episode; the seed comes from the rng.
InstanceSource generator_source(GeneratorConfig base);
/// Uniform draw from a fixed list of graphs.
InstanceSource dataset_source(std::vector<JobAllocationGraph> graphs);

struct TrainLogRow {
  std::size_t update_idx = 0;
  std::size_t episode = 0;
  double loss = 0.0;        // batch mean of w * delta^2
  double mean_abs_q = 0.0;  // batch mean of |Q_online(s, a)|
  double episode_return = 0.0;  // reward collected so far in the episode
};

struct TrainingLog {
  std::vector<TrainLogRow> rows;
  std::vector<double> episode_returns;
};

enum class TrainStatus { kCompleted, kDiverged };

struct TrainResult {
  QNetworkParams params;
  QNetworkParams target;
  TrainingLog log;
  TrainStatus status = TrainStatus::kCompleted;
  std::string message;
};

/// Double DQN with prioritized replay: one prioritized mini-batch update and
/// one soft target update per environment step. Stops early with
/// TrainStatus::kDiverged if the loss or any parameter becomes non-finite.
TrainResult train(const InstanceSource& source, const TrainConfig& cfg,
                  const std::function<void(const TrainLogRow&)>& on_update = {});

/// Columns: update_idx,episode,loss,mean_abs_q,episode_return.
void write_training_log_csv(std::ostream& os, const TrainingLog& log);
TrainingLog read_training_log_csv(std::istream& is);

}  // namespace jap
