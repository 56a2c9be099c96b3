#include "dqp/learn/qlearn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "dqp/learn/encode.hpp"
#include "dqp/learn/replay.hpp"
#include "dqp/rng.hpp"

namespace dqp::learn {

using nn::Matrix;

TrainerConfig TrainerConfig::dql() {
  TrainerConfig c;
  c.gamma = 0.99;
  c.lr = 5e-6;
  return c;
}

void TrainerConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("trainer config: ") + what);
  };
  require(gamma >= 0 && gamma <= 1, "gamma must lie in [0, 1]");
  require(tau >= 1, "tau must be at least 1");
  require(batch >= 1, "batch must be at least 1");
  require(iterations >= 0, "iterations must be nonnegative");
  require(lr > 0, "learning rate must be positive");
  require(per_alpha >= 0, "per_alpha must be nonnegative");
  require(per_eps > 0, "per_eps must be positive");
  require(argmin_refresh >= 1, "argmin_refresh must be at least 1");
  require(log_every >= 1, "log_every must be at least 1");
}

nn::ArchSpec subgoal_arch(nn::ArchSpec base) {
  base.side = 0;
  return base;
}

nn::ArchSpec action_arch(nn::ArchSpec base) {
  base.side = kActionSide;
  return base;
}

std::size_t argmin_index(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("argmin of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

std::size_t argmax_index(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

std::vector<double> subgoal_values(const nn::Network& net, const grid::GameState& s,
                                   const std::vector<grid::Subgoal>& goals) {
  std::vector<Codes> codes;
  codes.reserve(goals.size());
  for (const grid::Subgoal& g : goals) codes.push_back(encode_codes(s, g));
  std::vector<const Codes*> batch;
  for (const Codes& c : codes) batch.push_back(&c);
  const Matrix q = net.infer(to_sparse(batch));
  return {q.data(), q.data() + q.size()};
}

std::vector<double> action_values(const nn::Network& net, const grid::GameState& s) {
  const Codes codes = encode_codes(s, std::nullopt);
  std::vector<const Codes*> batch(5, &codes);
  Matrix side(5, kActionSide);
  for (int a = 0; a < 5; ++a) {
    const auto v = action_side(s.orientation, grid::kAllActions[a]);
    for (int j = 0; j < kActionSide; ++j) side(a, j) = v[static_cast<std::size_t>(j)];
  }
  const Matrix q = net.infer(to_sparse(batch), side);
  return {q.data(), q.data() + q.size()};
}

std::vector<grid::Subgoal> goals_of(const grid::GameState& s) { return formulate_goals(s).subgoals; }

}  // namespace

std::vector<std::pair<grid::Subgoal, double>> q_values_g(const nn::Network& net, const grid::GameState& s,
                                                         const grid::CompoundSubgoal& g_s) {
  const std::vector<double> q = subgoal_values(net, s, g_s.subgoals);
  std::vector<std::pair<grid::Subgoal, double>> out;
  for (std::size_t i = 0; i < q.size(); ++i) out.emplace_back(g_s.subgoals[i], q[i]);
  return out;
}

std::vector<grid::Subgoal> rank_subgoals(const nn::Network& net, const grid::GameState& s) {
  auto values = q_values_g(net, s, formulate_goals(s));
  std::stable_sort(values.begin(), values.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  std::vector<grid::Subgoal> out;
  for (const auto& v : values) out.push_back(v.first);
  return out;
}

grid::Subgoal select_subgoal(const nn::Network& net, const grid::GameState& s) {
  const auto goals = goals_of(s);
  return goals[argmin_index(subgoal_values(net, s, goals))];
}

std::array<double, 5> q_values_a(const nn::Network& net, const grid::GameState& s) {
  const auto q = action_values(net, s);
  std::array<double, 5> out{};
  std::copy(q.begin(), q.end(), out.begin());
  return out;
}

double q_target_g(const TransitionG& t, const nn::Network& online, const nn::Network& target,
                  const TrainerConfig& cfg) {
  if (!t.next) return t.r;
  const auto goals = goals_of(*t.next);
  const std::vector<double> tq = subgoal_values(target, *t.next, goals);
  double bootstrap = 0;
  if (cfg.double_q) {
    bootstrap = tq[argmin_index(subgoal_values(online, *t.next, goals))];
  } else {
    bootstrap = *std::min_element(tq.begin(), tq.end());
  }
  return t.r + cfg.gamma * bootstrap;
}

double q_target_a(const TransitionA& t, const nn::Network& online, const nn::Network& target,
                  const TrainerConfig& cfg) {
  if (!t.next) return t.r;
  const std::vector<double> tq = action_values(target, *t.next);
  double bootstrap = 0;
  if (cfg.double_q) {
    bootstrap = tq[argmax_index(action_values(online, *t.next))];
  } else {
    bootstrap = *std::max_element(tq.begin(), tq.end());
  }
  return t.r + cfg.gamma * bootstrap;
}

namespace {

// Both sample kinds reduced to encoded inputs, rewards, and for every
// distinct next state the encoded inputs of its choices (subgoals or actions).
struct TrainSet {
  int side = 0;
  bool minimize = true;
  std::vector<Codes> inputs;
  Matrix input_side;
  std::vector<double> reward;
  std::vector<int> next;  // group index or -1
  std::vector<Codes> options;
  Matrix option_side;
  std::vector<std::size_t> group_begin;  // size groups + 1
};

constexpr std::size_t kEvalChunk = 256;

// Network value of every option, in order.
std::vector<double> eval_options(const nn::Network& net, const TrainSet& set) {
  std::vector<double> out(set.options.size());
  for (std::size_t begin = 0; begin < set.options.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(set.options.size(), begin + kEvalChunk);
    std::vector<const Codes*> batch;
    for (std::size_t i = begin; i < end; ++i) batch.push_back(&set.options[i]);
    Matrix side;
    if (set.side > 0) side = set.option_side.middleRows(static_cast<Eigen::Index>(begin),
                                                        static_cast<Eigen::Index>(end - begin));
    const Matrix q = net.infer(to_sparse(batch), side);
    std::copy(q.data(), q.data() + q.size(), out.begin() + static_cast<std::ptrdiff_t>(begin));
  }
  return out;
}

std::size_t best_in(const std::vector<double>& v, std::size_t begin, std::size_t end, bool minimize) {
  std::size_t best = begin;
  for (std::size_t i = begin + 1; i < end; ++i) {
    if (minimize ? v[i] < v[best] : v[i] > v[best]) best = i;
  }
  return best;
}

TrainResult train_core(const TrainSet& set, const nn::ArchSpec& arch, const TrainerConfig& cfg,
                       std::uint64_t seed, const TrainHooks& hooks) {
  cfg.validate();
  if (set.inputs.empty()) throw std::invalid_argument("training dataset is empty");
  if (arch.side != set.side) throw nn::ShapeError("architecture side features do not match the dataset");

  TrainResult result;
  result.net = nn::Network(arch, seed);
  nn::Network target = result.net;
  nn::Adam& adam = result.adam;
  adam.lr = cfg.lr;

  std::mt19937_64 rng(derive_seed(seed, 1));
  PrioritizedReplay replay(set.inputs.size(), cfg.per_alpha, cfg.per_eps);

  // Fixed batches covering the dataset in a shuffled order, for refreshing
  // the batch norm statistics.
  std::vector<nn::SparseInput> bn_batches;
  std::vector<Matrix> bn_sides;
  if (cfg.precise_bn) {
    std::vector<std::size_t> order(set.inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(derive_seed(seed, 2));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_below(shuffle_rng, i)]);
    const std::size_t b = static_cast<std::size_t>(cfg.batch);
    for (std::size_t begin = 0; begin + b <= order.size() || begin == 0; begin += b) {
      const std::size_t end = std::min(order.size(), begin + b);
      std::vector<const Codes*> chunk;
      Matrix side;
      if (set.side > 0) side.resize(static_cast<Eigen::Index>(end - begin), set.side);
      for (std::size_t k = begin; k < end; ++k) {
        chunk.push_back(&set.inputs[order[k]]);
        if (set.side > 0) side.row(static_cast<Eigen::Index>(k - begin)) = set.input_side.row(static_cast<Eigen::Index>(order[k]));
      }
      bn_batches.push_back(to_sparse(chunk));
      if (set.side > 0) bn_sides.push_back(std::move(side));
    }
  }
  auto refresh_bn = [&] {
    if (cfg.precise_bn) result.net.refresh_running_stats(bn_batches, bn_sides);
  };

  const std::size_t groups = set.group_begin.size() - 1;
  std::vector<double> target_values;
  std::vector<double> bootstrap(groups, 0.0);
  auto refresh = [&](bool synced) {
    if (synced) target_values = eval_options(target, set);
    const bool need_online = cfg.double_q && !synced;
    const std::vector<double> online_values = need_online ? eval_options(result.net, set) : std::vector<double>();
    // Right after a sync the online and target networks coincide.
    const std::vector<double>& chooser = need_online ? online_values : target_values;
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t best = best_in(chooser, set.group_begin[g], set.group_begin[g + 1], set.minimize);
      bootstrap[g] = target_values[best];
    }
  };
  refresh(true);
  result.syncs.push_back(0);

  const int batch = cfg.batch;
  std::vector<std::size_t> idx(static_cast<std::size_t>(batch));
  std::vector<const Codes*> codes(static_cast<std::size_t>(batch));
  Matrix side;
  Matrix upstream(batch, 1);
  std::vector<double> y(static_cast<std::size_t>(batch)), w(static_cast<std::size_t>(batch));
  nn::Cache cache;
  double loss_sum = 0, td_sum = 0;
  std::int64_t window = 0;

  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    const double beta =
        cfg.iterations > 1
            ? cfg.per_beta_start + (cfg.per_beta_end - cfg.per_beta_start) * static_cast<double>(it) /
                                       static_cast<double>(cfg.iterations - 1)
            : cfg.per_beta_end;
    double max_w = 0;
    for (int b = 0; b < batch; ++b) {
      const std::size_t i = replay.sample(rng);
      idx[static_cast<std::size_t>(b)] = i;
      codes[static_cast<std::size_t>(b)] = &set.inputs[i];
      const int n = set.next[i];
      y[static_cast<std::size_t>(b)] = n < 0 ? set.reward[i] : set.reward[i] + cfg.gamma * bootstrap[static_cast<std::size_t>(n)];
      const double wi = cfg.importance_weights ? replay.weight(i, beta) : 1.0;
      w[static_cast<std::size_t>(b)] = wi;
      max_w = std::max(max_w, wi);
    }
    if (set.side > 0) {
      side.resize(batch, set.side);
      for (int b = 0; b < batch; ++b) side.row(b) = set.input_side.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(b)]));
    }
    const Matrix q = result.net.forward(to_sparse(codes), side, nn::Mode::kTrain, &cache);
    double loss = 0, td_abs = 0;
    for (int b = 0; b < batch; ++b) {
      const auto bi = static_cast<std::size_t>(b);
      const double td = q(b, 0) - y[bi];
      const double wn = w[bi] / max_w;
      loss += wn * td * td;
      td_abs += std::abs(td);
      upstream(b, 0) = 2.0 * wn * td / batch;
    }
    loss /= batch;
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "non-finite training loss at iteration " << it << " (first target " << y[0] << ", first output "
          << q(0, 0) << ")";
      throw nn::NumericError(msg.str());
    }
    const nn::Gradients grads = result.net.backward(cache, upstream, false);
    adam.step(result.net, grads);
    for (int b = 0; b < batch; ++b) {
      const auto bi = static_cast<std::size_t>(b);
      replay.update(idx[bi], q(b, 0) - y[bi]);
    }

    loss_sum += loss;
    td_sum += td_abs / batch;
    ++window;
    const std::int64_t done = it + 1;
    if (done % cfg.log_every == 0 || done == cfg.iterations) {
      result.log.push_back({done, loss_sum / static_cast<double>(window), td_sum / static_cast<double>(window)});
      loss_sum = td_sum = 0;
      window = 0;
    }
    if (done % cfg.tau == 0) {
      refresh_bn();
      target.copy_from(result.net);
      result.syncs.push_back(done);
      if (done < cfg.iterations) refresh(true);
    } else if (cfg.double_q && done % cfg.argmin_refresh == 0 && done < cfg.iterations) {
      refresh_bn();
      refresh(false);
    } else if (done == cfg.iterations) {
      refresh_bn();
    }
    if (hooks.after_step) hooks.after_step(done, result.net, target);
  }
  return result;
}

void fill_side(Matrix& m, Eigen::Index row, const std::vector<double>& v) {
  for (std::size_t j = 0; j < v.size(); ++j) m(row, static_cast<Eigen::Index>(j)) = v[j];
}

}  // namespace

TrainResult train_g(const std::vector<TransitionG>& data, const nn::ArchSpec& arch, const TrainerConfig& cfg,
                    std::uint64_t seed, const TrainHooks& hooks) {
  TrainSet set;
  set.side = 0;
  set.minimize = true;
  std::unordered_map<grid::GameState, int> group_of;
  set.group_begin.push_back(0);
  for (const TransitionG& t : data) {
    set.inputs.push_back(encode_codes(t.s, t.g));
    set.reward.push_back(t.r);
    if (!t.next) {
      set.next.push_back(-1);
      continue;
    }
    auto [pos, fresh] = group_of.try_emplace(*t.next, static_cast<int>(group_of.size()));
    if (fresh) {
      for (const grid::Subgoal& g : goals_of(*t.next)) set.options.push_back(encode_codes(*t.next, g));
      set.group_begin.push_back(set.options.size());
    }
    set.next.push_back(pos->second);
  }
  return train_core(set, arch, cfg, seed, hooks);
}

TrainResult train_a(const std::vector<TransitionA>& data, const nn::ArchSpec& arch, const TrainerConfig& cfg,
                    std::uint64_t seed, const TrainHooks& hooks) {
  TrainSet set;
  set.side = kActionSide;
  set.minimize = false;
  set.input_side.resize(static_cast<Eigen::Index>(data.size()), kActionSide);
  std::unordered_map<grid::GameState, int> group_of;
  std::vector<std::vector<double>> option_side;
  set.group_begin.push_back(0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const TransitionA& t = data[i];
    set.inputs.push_back(encode_codes(t.s, std::nullopt));
    fill_side(set.input_side, static_cast<Eigen::Index>(i), action_side(t.s.orientation, t.a));
    set.reward.push_back(t.r);
    if (!t.next) {
      set.next.push_back(-1);
      continue;
    }
    auto [pos, fresh] = group_of.try_emplace(*t.next, static_cast<int>(group_of.size()));
    if (fresh) {
      const Codes c = encode_codes(*t.next, std::nullopt);
      for (grid::Action a : grid::kAllActions) {
        set.options.push_back(c);
        option_side.push_back(action_side(t.next->orientation, a));
      }
      set.group_begin.push_back(set.options.size());
    }
    set.next.push_back(pos->second);
  }
  set.option_side.resize(static_cast<Eigen::Index>(option_side.size()), kActionSide);
  for (std::size_t i = 0; i < option_side.size(); ++i) fill_side(set.option_side, static_cast<Eigen::Index>(i), option_side[i]);
  return train_core(set, arch, cfg, seed, hooks);
}

}  // namespace dqp::learn
