#pragma once

#include "wav/gridworld.hpp"

namespace wav::test {

// Places the agent at (col,row) facing dir, with optional front object.
inline grid::GridState agent_facing(int col, int row, int dir, std::optional<grid::GridObject> front = std::nullopt,
                                    std::optional<grid::GridObject> carried = std::nullopt) {
  grid::GridState s;
  s.cells.assign(static_cast<std::size_t>(s.shape.interior_count()), std::nullopt);
  s.agent.pos = {col, row};
  s.agent.dir = dir;
  s.agent.carried = carried;
  if (front) {
    const auto f = grid::front_index(s);
    if (f) s.cells[static_cast<std::size_t>(*f)] = front;
  }
  return s;
}

inline grid::GridObject key(grid::Color c) { return {grid::ObjectKind::Key, c, std::nullopt}; }
inline grid::GridObject ball(grid::Color c) { return {grid::ObjectKind::Ball, c, std::nullopt}; }
inline grid::GridObject box(grid::Color c, std::optional<grid::Contents> in = std::nullopt) {
  return {grid::ObjectKind::Box, c, in};
}

}  // namespace wav::test
