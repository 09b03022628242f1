#include "wav/gridworld.hpp"

#include <algorithm>
#include <numeric>

namespace wav::grid {

std::string_view color_name(Color c) { return c == Color::Red ? "red" : "blue"; }

std::string_view kind_name(ObjectKind k) {
  switch (k) {
    case ObjectKind::Key: return "key";
    case ObjectKind::Ball: return "ball";
    case ObjectKind::Box: return "box";
  }
  return "?";
}

namespace {

int contents_code(const std::optional<Contents>& c) {
  if (!c) return 0;
  return 1 + static_cast<int>(c->kind) * 2 + static_cast<int>(c->color);
}

}  // namespace

int object_code(const GridObject& obj) {
  const int color = static_cast<int>(obj.color);
  switch (obj.kind) {
    case ObjectKind::Key: return 1 + color;
    case ObjectKind::Ball: return 3 + color;
    case ObjectKind::Box: return 5 + color * 5 + contents_code(obj.contents);
  }
  return 0;
}

GridObject object_from_code(int code) {
  if (code < 1 || code > kObjectCodes) throw PreconditionError("object code out of range");
  if (code <= 2) return {ObjectKind::Key, static_cast<Color>(code - 1), std::nullopt};
  if (code <= 4) return {ObjectKind::Ball, static_cast<Color>(code - 3), std::nullopt};
  const int rel = code - 5;
  GridObject box{ObjectKind::Box, static_cast<Color>(rel / 5), std::nullopt};
  if (const int inner = rel % 5; inner > 0) {
    box.contents = Contents{static_cast<ObjectKind>((inner - 1) / 2), static_cast<Color>((inner - 1) % 2)};
  }
  return box;
}

std::string object_name(const GridObject& obj) {
  std::string name = std::string(color_name(obj.color)) + "_" + std::string(kind_name(obj.kind));
  if (obj.contents) {
    name += "[" + std::string(color_name(obj.contents->color)) + "_" +
            std::string(kind_name(obj.contents->kind)) + "]";
  }
  return name;
}

namespace {
constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "turn_left", "turn_right", "forward", "pickup", "drop", "toggle", "swap"};
}

std::string_view action_name(Action a) { return kActionNames[static_cast<std::size_t>(a)]; }

std::optional<Action> parse_action(std::string_view name) {
  for (int i = 0; i < kNumActions; ++i) {
    if (kActionNames[static_cast<std::size_t>(i)] == name) return static_cast<Action>(i);
  }
  return std::nullopt;
}

void GridShape::validate() const {
  if (width < 3 || height < 3) throw ConfigError("grid must be at least 3x3 including walls");
  if (floor_palette < 1 || floor_palette > 64) throw ConfigError("floor_palette must be in [1, 64]");
}

std::optional<int> GridState::floor_at(int cell) const {
  for (const auto& f : noisy_floors) {
    if (f.cell == cell) return f.color;
  }
  return std::nullopt;
}

Cell front_of(const AgentState& agent) {
  static constexpr int dc[4] = {1, 0, -1, 0};
  static constexpr int dr[4] = {0, 1, 0, -1};
  return {agent.pos.col + dc[agent.dir], agent.pos.row + dr[agent.dir]};
}

std::optional<int> front_index(const GridState& s) {
  const Cell f = front_of(s.agent);
  if (!s.shape.interior(f)) return std::nullopt;
  return s.shape.cell_index(f);
}

void validate(const GridState& s) {
  const int n = s.shape.interior_count();
  if (static_cast<int>(s.cells.size()) != n) throw PreconditionError("cell vector size mismatch");
  if (!s.shape.interior(s.agent.pos)) throw PreconditionError("agent outside interior");
  if (s.agent.dir < 0 || s.agent.dir > 3) throw PreconditionError("agent dir out of range");
  const int agent_cell = s.shape.cell_index(s.agent.pos);
  if (s.cells[static_cast<std::size_t>(agent_cell)]) throw PreconditionError("agent cell holds an object");
  auto check_object = [](const GridObject& o) {
    if (o.contents && o.kind != ObjectKind::Box) throw PreconditionError("only boxes have contents");
    if (o.contents && o.contents->kind == ObjectKind::Box) throw PreconditionError("box inside box");
  };
  for (const auto& c : s.cells) {
    if (c) check_object(*c);
  }
  if (s.agent.carried) check_object(*s.agent.carried);
  int prev = -1;
  for (const auto& f : s.noisy_floors) {
    if (f.cell <= prev || f.cell >= n) throw PreconditionError("noisy floors unsorted or out of range");
    if (f.color < 0 || f.color >= s.shape.floor_palette) throw PreconditionError("floor colour out of palette");
    if (s.cells[static_cast<std::size_t>(f.cell)]) throw PreconditionError("object on noisy floor");
    prev = f.cell;
  }
}

std::vector<std::pair<ObjectKind, Color>> object_multiset(const GridState& s) {
  std::vector<std::pair<ObjectKind, Color>> out;
  auto add = [&out](const GridObject& o) {
    out.emplace_back(o.kind, o.color);
    if (o.contents) out.emplace_back(o.contents->kind, o.contents->color);
  };
  for (const auto& c : s.cells) {
    if (c) add(*c);
  }
  if (s.agent.carried) add(*s.agent.carried);
  std::sort(out.begin(), out.end());
  return out;
}

GridState step(const GridState& s, Action a, Rng& rng) {
  GridState next = s;
  AgentState& agent = next.agent;
  const std::optional<int> front = front_index(s);
  auto front_obj = [&]() -> std::optional<GridObject>& {
    return next.cells[static_cast<std::size_t>(*front)];
  };

  switch (a) {
    case Action::TurnLeft:
      agent.dir = (agent.dir + 3) % 4;
      break;
    case Action::TurnRight:
      agent.dir = (agent.dir + 1) % 4;
      break;
    case Action::Forward:
      if (front && !front_obj()) agent.pos = front_of(s.agent);
      break;
    case Action::Pickup:
      if (front && front_obj() && !agent.carried) {
        agent.carried = front_obj();
        front_obj().reset();
      }
      break;
    case Action::Drop:
      if (front && agent.carried && !front_obj() && !s.floor_at(*front)) {
        front_obj() = agent.carried;
        agent.carried.reset();
      }
      break;
    case Action::Toggle:
      if (front && front_obj()) {
        GridObject& obj = *front_obj();
        if (obj.kind != ObjectKind::Box) {
          obj.color = toggled(obj.color);
        } else if (!(agent.carried && agent.carried->kind == ObjectKind::Box) &&
                   (agent.carried || obj.contents)) {
          std::optional<Contents> stored;
          if (agent.carried) stored = Contents{agent.carried->kind, agent.carried->color};
          std::optional<GridObject> taken;
          if (obj.contents) taken = GridObject{obj.contents->kind, obj.contents->color, std::nullopt};
          obj.contents = stored;
          agent.carried = taken;
        }
      }
      break;
    case Action::Swap:
      if (front && front_obj() && agent.carried) std::swap(*front_obj(), *agent.carried);
      break;
  }

  for (auto& f : next.noisy_floors) {
    f.color = static_cast<int>(rng.index(static_cast<std::size_t>(s.shape.floor_palette)));
  }
  return next;
}

GridState generate_layout(const GridShape& shape, int n_objects, int n_noisy_floors, Rng& rng) {
  shape.validate();
  const int n = shape.interior_count();
  if (n_objects < 0 || n_noisy_floors < 0) throw ConfigError("object and floor counts must be non-negative");
  if (n_objects + n_noisy_floors + 1 > n) {
    throw ConfigError("layout needs " + std::to_string(n_objects + n_noisy_floors + 1) +
                      " cells but the interior has " + std::to_string(n));
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const int needed = n_objects + n_noisy_floors + 1;
  for (int i = 0; i < needed; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.index(static_cast<std::size_t>(n - i));
    std::swap(order[static_cast<std::size_t>(i)], order[j]);
  }

  GridState s;
  s.shape = shape;
  s.cells.assign(static_cast<std::size_t>(n), std::nullopt);
  for (int i = 0; i < n_objects; ++i) {
    const auto kind = static_cast<ObjectKind>(rng.index(3));
    const auto color = static_cast<Color>(rng.index(2));
    s.cells[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = GridObject{kind, color, std::nullopt};
  }
  for (int i = 0; i < n_noisy_floors; ++i) {
    const int cell = order[static_cast<std::size_t>(n_objects + i)];
    s.noisy_floors.push_back({cell, static_cast<int>(rng.index(static_cast<std::size_t>(shape.floor_palette)))});
  }
  std::sort(s.noisy_floors.begin(), s.noisy_floors.end(),
            [](const NoisyFloor& x, const NoisyFloor& y) { return x.cell < y.cell; });
  s.agent.pos = shape.cell_at(order[static_cast<std::size_t>(n_objects + n_noisy_floors)]);
  s.agent.dir = static_cast<int>(rng.index(4));
  return s;
}

std::vector<GridTransition> random_policy_rollout(const GridState& start, int horizon, Rng& rng) {
  std::vector<GridTransition> out;
  out.reserve(static_cast<std::size_t>(std::max(horizon, 0)));
  GridState s = start;
  for (int t = 0; t < horizon; ++t) {
    const Action a = kAllActions[rng.index(kNumActions)];
    GridState next = step(s, a, rng);
    out.push_back({s, a, next});
    s = std::move(next);
  }
  return out;
}

bool differs_outside_floors(const GridState& s, const GridState& s2) {
  return s.cells != s2.cells || s.agent != s2.agent;
}

// ---------------------------------------------------------------------------

FeatureLayout::FeatureLayout(GridShape shape) : shape_(shape), cells_(shape.interior_count()) {
  shape_.validate();
  offsets_.resize(static_cast<std::size_t>(group_count()) + 1);
  int acc = 0;
  for (int g = 0; g < group_count(); ++g) {
    offsets_[static_cast<std::size_t>(g)] = acc;
    acc += group_size(g);
  }
  offsets_.back() = acc;
  total_ = acc;
}

int FeatureLayout::group_size(int g) const {
  if (g < cells_) return cell_classes();
  if (g == pos_group()) return cells_;
  if (g == dir_group()) return 4;
  return 1 + kObjectCodes;
}

FeatureVector encode(const FeatureLayout& layout, const GridState& s) {
  if (!(layout.shape() == s.shape)) throw PreconditionError("encode: layout shape differs from state shape");
  FeatureVector f;
  f.classes.assign(static_cast<std::size_t>(layout.group_count()), 0);
  for (int c = 0; c < layout.cell_count(); ++c) {
    const auto& obj = s.cells[static_cast<std::size_t>(c)];
    if (obj) f.classes[static_cast<std::size_t>(c)] = static_cast<std::uint16_t>(object_code(*obj));
  }
  for (const auto& fl : s.noisy_floors) {
    f.classes[static_cast<std::size_t>(fl.cell)] = static_cast<std::uint16_t>(layout.floor_class(fl.color));
  }
  f.classes[static_cast<std::size_t>(layout.pos_group())] =
      static_cast<std::uint16_t>(s.shape.cell_index(s.agent.pos));
  f.classes[static_cast<std::size_t>(layout.dir_group())] = static_cast<std::uint16_t>(s.agent.dir);
  f.classes[static_cast<std::size_t>(layout.carried_group())] =
      static_cast<std::uint16_t>(s.agent.carried ? object_code(*s.agent.carried) : 0);
  return f;
}

GridState decode(const FeatureLayout& layout, const FeatureVector& f) {
  if (static_cast<int>(f.classes.size()) != layout.group_count()) {
    throw PreconditionError("decode: feature vector has wrong group count");
  }
  for (int g = 0; g < layout.group_count(); ++g) {
    if (f.classes[static_cast<std::size_t>(g)] >= layout.group_size(g)) {
      throw PreconditionError("decode: class out of range in group " + std::to_string(g));
    }
  }
  GridState s;
  s.shape = layout.shape();
  s.cells.assign(static_cast<std::size_t>(layout.cell_count()), std::nullopt);
  for (int c = 0; c < layout.cell_count(); ++c) {
    const int cls = f.classes[static_cast<std::size_t>(c)];
    if (cls == 0) continue;
    if (layout.is_floor_class(cls)) {
      s.noisy_floors.push_back({c, cls - layout.floor_class(0)});
    } else {
      s.cells[static_cast<std::size_t>(c)] = object_from_code(cls);
    }
  }
  s.agent.pos = s.shape.cell_at(f.classes[static_cast<std::size_t>(layout.pos_group())]);
  s.agent.dir = f.classes[static_cast<std::size_t>(layout.dir_group())];
  if (const int carried = f.classes[static_cast<std::size_t>(layout.carried_group())]; carried > 0) {
    s.agent.carried = object_from_code(carried);
  }
  return s;
}

std::vector<std::uint32_t> active_indices(const FeatureLayout& layout, const FeatureVector& f) {
  std::vector<std::uint32_t> out(f.classes.size());
  for (std::size_t g = 0; g < f.classes.size(); ++g) {
    out[g] = static_cast<std::uint32_t>(layout.offset(static_cast<int>(g)) + f.classes[g]);
  }
  return out;
}

FeatureVector from_active_indices(const FeatureLayout& layout, const std::vector<std::uint32_t>& idx) {
  if (static_cast<int>(idx.size()) != layout.group_count()) {
    throw PreconditionError("expected " + std::to_string(layout.group_count()) + " active features, got " +
                            std::to_string(idx.size()));
  }
  FeatureVector f;
  f.classes.resize(idx.size());
  for (std::size_t g = 0; g < idx.size(); ++g) {
    const int lo = layout.offset(static_cast<int>(g));
    const int hi = lo + layout.group_size(static_cast<int>(g));
    const auto v = static_cast<int>(idx[g]);
    if (v < lo || v >= hi) {
      throw PreconditionError("active feature " + std::to_string(v) + " does not belong to group " +
                              std::to_string(g));
    }
    f.classes[g] = static_cast<std::uint16_t>(v - lo);
  }
  return f;
}

std::vector<std::uint8_t> to_dense(const FeatureLayout& layout, const FeatureVector& f) {
  std::vector<std::uint8_t> dense(static_cast<std::size_t>(layout.total_size()), 0);
  for (auto i : active_indices(layout, f)) dense[i] = 1;
  return dense;
}

int front_cell_of(const FeatureLayout& layout, const FeatureVector& f) {
  const GridShape& shape = layout.shape();
  AgentState agent;
  agent.pos = shape.cell_at(f.classes[static_cast<std::size_t>(layout.pos_group())]);
  agent.dir = f.classes[static_cast<std::size_t>(layout.dir_group())];
  const Cell front = front_of(agent);
  return shape.interior(front) ? shape.cell_index(front) : -1;
}

std::vector<ElementId> changed_elements(const GridState& s, const GridState& s2) {
  if (!(s.shape == s2.shape)) throw PreconditionError("changed_elements: grid shapes differ");
  const FeatureLayout layout(s.shape);
  return changed_groups(encode(layout, s), encode(layout, s2));
}

std::vector<ElementId> changed_groups(const FeatureVector& a, const FeatureVector& b) {
  if (a.classes.size() != b.classes.size()) throw PreconditionError("changed_groups: size mismatch");
  std::vector<ElementId> out;
  for (std::size_t g = 0; g < a.classes.size(); ++g) {
    if (a.classes[g] != b.classes[g]) out.push_back(static_cast<ElementId>(g));
  }
  return out;
}

std::string element_name(const FeatureLayout& layout, ElementId id) {
  if (layout.is_cell_group(id)) {
    const Cell c = layout.shape().cell_at(id);
    return "cell(" + std::to_string(c.col) + "," + std::to_string(c.row) + ")";
  }
  if (id == layout.pos_group()) return "agent.pos";
  if (id == layout.dir_group()) return "agent.dir";
  return "agent.carried";
}

}  // namespace wav::grid
