#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dqp/grid.hpp"
#include "dqp/nn/network.hpp"

namespace dqp::learn {

inline constexpr int kSide = 30;
inline constexpr int kChannels = 7;
inline constexpr int kInputSize = kSide * kSide * kChannels;

enum Channel : int { kPlayer = 0, kExitCh = 1, kBoulder = 2, kGem = 3, kWall = 4, kDirt = 5, kSubgoal = 6 };

// Orientation one-hot followed by action one-hot, appended to the flattened
// conv output of the action-level network.
inline constexpr int kActionSide = 4 + 5;

// Nonzero positions of one encoded sample, each ((x * 30 + y) * 7 + channel).
// Every nonzero value is 1, so positions are all there is to store.
using Codes = std::vector<std::uint16_t>;

// One-hot encoding of a state and an optional subgoal (none for the
// action-level baseline). The player hides the exit when standing on it.
// Throws grid::LevelError for levels larger than 30x30. Sorted ascending.
Codes encode_codes(const grid::GameState& s, const std::optional<grid::Subgoal>& g);

// Dense (30,30,7) tensor.
nn::Tensor encode_pair(const grid::GameState& s, const std::optional<grid::Subgoal>& g);

std::vector<double> action_side(grid::Orientation o, grid::Action a);

// Batch of encoded samples in the network's sparse input layout.
nn::SparseInput to_sparse(const std::vector<const Codes*>& batch);

}  // namespace dqp::learn
