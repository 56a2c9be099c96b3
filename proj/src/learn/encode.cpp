#include "dqp/learn/encode.hpp"

#include <algorithm>
#include <string>

namespace dqp::learn {

namespace {

std::uint16_t code(grid::Cell c, int channel) {
  return static_cast<std::uint16_t>((c.x * kSide + c.y) * kChannels + channel);
}

}  // namespace

Codes encode_codes(const grid::GameState& s, const std::optional<grid::Subgoal>& g) {
  if (s.width > kSide || s.height > kSide) {
    throw grid::LevelError("level " + std::to_string(s.width) + "x" + std::to_string(s.height) +
                           " exceeds the 30x30 input");
  }
  Codes out;
  out.reserve(static_cast<std::size_t>(s.width * s.height) + 2);
  for (int x = 0; x < s.width; ++x) {
    for (int y = 0; y < s.height; ++y) {
      const grid::Cell c{x, y};
      if (c == s.player) {
        out.push_back(code(c, kPlayer));
      } else if (c == s.exit) {
        out.push_back(code(c, kExitCh));
      } else {
        switch (s.at(c)) {
          case grid::Terrain::kEmpty: break;
          case grid::Terrain::kBoulder: out.push_back(code(c, kBoulder)); break;
          case grid::Terrain::kGem: out.push_back(code(c, kGem)); break;
          case grid::Terrain::kWall: out.push_back(code(c, kWall)); break;
          case grid::Terrain::kDirt: out.push_back(code(c, kDirt)); break;
        }
      }
      if (g && g->target == c) out.push_back(code(c, kSubgoal));
    }
  }
  return out;
}

nn::Tensor encode_pair(const grid::GameState& s, const std::optional<grid::Subgoal>& g) {
  nn::Tensor t = nn::Tensor::zeros({kSide, kSide, kChannels});
  for (std::uint16_t c : encode_codes(s, g)) t.values[c] = 1.0;
  return t;
}

std::vector<double> action_side(grid::Orientation o, grid::Action a) {
  std::vector<double> side(kActionSide, 0.0);
  side[static_cast<std::size_t>(o)] = 1.0;
  side[4 + static_cast<std::size_t>(a)] = 1.0;
  return side;
}

nn::SparseInput to_sparse(const std::vector<const Codes*>& batch) {
  nn::SparseInput in;
  in.batch = static_cast<int>(batch.size());
  std::size_t total = 0;
  for (const Codes* c : batch) total += c->size();
  in.entries.reserve(total);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int base = static_cast<int>(b) * kSide * kSide;
    for (std::uint16_t c : *batch[b]) in.entries.push_back({base + c / kChannels, c % kChannels, 1.0});
  }
  return in;
}

}  // namespace dqp::learn
