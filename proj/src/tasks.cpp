#include "wav/tasks.hpp"

#include <algorithm>
#include <deque>

namespace wav::grid {

std::string_view task_name(Task t) {
  switch (t) {
    case Task::KeyDelivery: return "key_delivery";
    case Task::BallDelivery: return "ball_delivery";
    case Task::ObjectMatching: return "object_matching";
  }
  return "?";
}

std::optional<Task> parse_task(std::string_view name) {
  for (int i = 0; i < kNumTasks; ++i) {
    if (task_name(static_cast<Task>(i)) == name) return static_cast<Task>(i);
  }
  return std::nullopt;
}

GridState generate_task_layout(const GridShape& shape, int n_objects, int n_noisy_floors, Rng& rng) {
  if (n_objects < 3) throw ConfigError("task layouts need at least 3 objects");
  GridState s = generate_layout(shape, n_objects, n_noisy_floors, rng);
  // Overwrite the first three placed objects (in cell order) with one of each kind.
  int assigned = 0;
  for (auto& cell : s.cells) {
    if (!cell) continue;
    cell->kind = static_cast<ObjectKind>(assigned);
    if (++assigned == 3) break;
  }
  return s;
}

std::optional<Action> navigate(const GridState& s, const std::function<bool(int, int)>& goal, bool& reachable) {
  const GridShape& shape = s.shape;
  const int n = shape.interior_count();
  const int start = shape.cell_index(s.agent.pos) * 4 + s.agent.dir;
  reachable = true;
  if (goal(start / 4, start % 4)) return std::nullopt;

  std::vector<int> first(static_cast<std::size_t>(n * 4), -1);
  std::deque<int> queue;
  auto expand = [&](int node, int via) {
    if (first[static_cast<std::size_t>(node)] != -1 || node == start) return false;
    first[static_cast<std::size_t>(node)] = via;
    queue.push_back(node);
    return goal(node / 4, node % 4);
  };
  auto successors = [&](int node, auto&& visit) {
    const int pos = node / 4;
    const int dir = node % 4;
    if (visit(pos * 4 + (dir + 3) % 4, action_index(Action::TurnLeft))) return true;
    if (visit(pos * 4 + (dir + 1) % 4, action_index(Action::TurnRight))) return true;
    AgentState probe;
    probe.pos = shape.cell_at(pos);
    probe.dir = dir;
    const Cell f = front_of(probe);
    if (shape.interior(f) && !s.cells[static_cast<std::size_t>(shape.cell_index(f))]) {
      if (visit(shape.cell_index(f) * 4 + dir, action_index(Action::Forward))) return true;
    }
    return false;
  };

  bool found = successors(start, [&](int node, int act) { return expand(node, act); });
  while (!found && !queue.empty()) {
    const int node = queue.front();
    queue.pop_front();
    const int via = first[static_cast<std::size_t>(node)];
    found = successors(node, [&](int next, int) { return expand(next, via); });
  }
  if (!found) {
    reachable = false;
    return std::nullopt;
  }
  return static_cast<Action>(first[static_cast<std::size_t>(queue.back())]);
}

namespace {

using CellPred = std::function<bool(const GridState&, int)>;
using StatePred = std::function<bool(const GridState&)>;

struct Stage {
  StatePred done;
  CellPred target;  // predicate on the faced cell
  Action act;
  int goal_cell = -1;  // >= 0: navigate onto this cell instead of facing a target
};

bool is_kind(const std::optional<GridObject>& o, ObjectKind k) { return o && o->kind == k; }
bool is_kind_color(const std::optional<GridObject>& o, ObjectKind k, Color c) {
  return o && o->kind == k && o->color == c;
}

bool any_cell(const GridState& s, const std::function<bool(const std::optional<GridObject>&)>& pred) {
  return std::any_of(s.cells.begin(), s.cells.end(), pred);
}

bool is_free_drop_cell(const GridState& s, int cell) {
  return !s.cells[static_cast<std::size_t>(cell)] && !s.floor_at(cell);
}

bool next_to_box(const GridState& s, int cell) {
  const Cell c = s.shape.cell_at(cell);
  const Cell nb[4] = {{c.col + 1, c.row}, {c.col - 1, c.row}, {c.col, c.row + 1}, {c.col, c.row - 1}};
  for (const Cell& x : nb) {
    if (s.shape.interior(x) && is_kind(s.cells[static_cast<std::size_t>(s.shape.cell_index(x))], ObjectKind::Box)) {
      return true;
    }
  }
  return false;
}

Stage drop_stage(StatePred done, CellPred where) {
  return {std::move(done), std::move(where), Action::Drop};
}

Stage recolor_stage(ObjectKind kind, Color target) {
  return {[=](const GridState& s) {
            return any_cell(s, [&](const auto& o) { return is_kind_color(o, kind, target); }) ||
                   !any_cell(s, [&](const auto& o) { return is_kind(o, kind); });
          },
          [=](const GridState& s, int c) {
            const auto& o = s.cells[static_cast<std::size_t>(c)];
            return is_kind(o, kind) && o->color != target;
          },
          Action::Toggle};
}

Stage pickup_stage(ObjectKind kind, Color color) {
  return {[=](const GridState& s) { return s.agent.carried.has_value(); },
          [=](const GridState& s, int c) { return is_kind_color(s.cells[static_cast<std::size_t>(c)], kind, color); },
          Action::Pickup};
}

std::vector<Stage> build_stages(const GridState& start, Task task) {
  Color box_color = Color::Red;
  for (const auto& c : start.cells) {
    if (is_kind(c, ObjectKind::Box)) {
      box_color = c->color;
      break;
    }
  }
  const int goal = start.shape.interior_count() - 1;
  const Color b = box_color;
  auto hands_empty = [](const GridState& s) { return !s.agent.carried.has_value(); };
  auto anywhere = [](const GridState& s, int c) { return is_free_drop_cell(s, c); };

  std::vector<Stage> stages;
  stages.push_back(drop_stage(hands_empty, anywhere));

  if (task == Task::ObjectMatching) {
    stages.push_back(recolor_stage(ObjectKind::Key, b));
    stages.push_back(recolor_stage(ObjectKind::Ball, b));
    for (ObjectKind k : {ObjectKind::Key, ObjectKind::Ball}) {
      stages.push_back(pickup_stage(k, b));
      stages.push_back(drop_stage(hands_empty, [](const GridState& s, int c) {
        return is_free_drop_cell(s, c) && next_to_box(s, c);
      }));
    }
  } else {
    const ObjectKind first = task == Task::KeyDelivery ? ObjectKind::Key : ObjectKind::Ball;
    const ObjectKind second = task == Task::KeyDelivery ? ObjectKind::Ball : ObjectKind::Key;
    stages.push_back(recolor_stage(first, b));
    stages.push_back(pickup_stage(first, b));
    // Put the carried item into a box.
    stages.push_back({[=](const GridState& s) { return !is_kind(s.agent.carried, first); },
                      [](const GridState& s, int c) { return is_kind(s.cells[static_cast<std::size_t>(c)], ObjectKind::Box); },
                      Action::Toggle});
    stages.push_back(drop_stage(hands_empty, anywhere));
    // Carry the filled box and exchange it for the second object.
    stages.push_back({[](const GridState& s) { return s.agent.carried.has_value(); },
                      [=](const GridState& s, int c) {
                        const auto& o = s.cells[static_cast<std::size_t>(c)];
                        return is_kind(o, ObjectKind::Box) && o->contents && o->contents->kind == first;
                      },
                      Action::Pickup});
    stages.push_back({[=](const GridState& s) { return !is_kind(s.agent.carried, ObjectKind::Box); },
                      [=](const GridState& s, int c) { return is_kind(s.cells[static_cast<std::size_t>(c)], second); },
                      Action::Swap});
    stages.push_back(drop_stage([=](const GridState& s) { return !is_kind(s.agent.carried, second); }, anywhere));
    stages.push_back(recolor_stage(second, b));
  }
  stages.push_back({[=](const GridState& s) { return s.shape.cell_index(s.agent.pos) == goal; }, nullptr,
                    Action::Forward, goal});
  return stages;
}

}  // namespace

std::vector<GridTransition> scripted_episode(const GridState& start, Task task, int max_steps, double epsilon,
                                             Rng& rng) {
  std::vector<GridTransition> out;
  std::vector<Stage> stages = build_stages(start, task);
  std::size_t stage = 0;
  GridState s = start;

  for (int t = 0; t < max_steps; ++t) {
    std::optional<Action> chosen;
    if (rng.bernoulli(epsilon)) {
      chosen = kAllActions[rng.index(kNumActions)];
    } else {
      while (stage < stages.size() && !chosen) {
        const Stage& st = stages[stage];
        if (st.done(s)) {
          ++stage;
          continue;
        }
        bool reachable = true;
        std::optional<Action> nav;
        if (st.goal_cell >= 0) {
          const int goal = st.goal_cell;
          nav = navigate(s, [goal](int pos, int) { return pos == goal; }, reachable);
          if (!nav) ++stage;  // at goal or unreachable
          chosen = nav;
          continue;
        }
        const CellPred& target = st.target;
        const GridShape& shape = s.shape;
        nav = navigate(
            s,
            [&](int pos, int dir) {
              AgentState probe;
              probe.pos = shape.cell_at(pos);
              probe.dir = dir;
              const Cell f = front_of(probe);
              return shape.interior(f) && target(s, shape.cell_index(f));
            },
            reachable);
        if (!reachable) {
          ++stage;
        } else if (nav) {
          chosen = nav;
        } else {
          chosen = st.act;
          ++stage;
        }
      }
      if (!chosen) break;  // script finished
    }
    GridState next = step(s, *chosen, rng);
    out.push_back({s, *chosen, next});
    s = std::move(next);
  }
  return out;
}

}  // namespace wav::grid
