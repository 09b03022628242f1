#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wav/common.hpp"

namespace wav::grid {

enum class Color : std::uint8_t { Red = 0, Blue = 1 };
enum class ObjectKind : std::uint8_t { Key = 0, Ball = 1, Box = 2 };

constexpr Color toggled(Color c) { return c == Color::Red ? Color::Blue : Color::Red; }
std::string_view color_name(Color c);
std::string_view kind_name(ObjectKind k);

/// Item stored inside a box. Never a box itself.
struct Contents {
  ObjectKind kind;
  Color color;
  bool operator==(const Contents&) const = default;
};

struct GridObject {
  ObjectKind kind;
  Color color;
  std::optional<Contents> contents;  // Box only
  bool operator==(const GridObject&) const = default;
};

/// Dense object code: 1..14 (0 is reserved for "nothing").
/// 1-2 key red/blue, 3-4 ball red/blue, 5-14 box(color) x contents{none, 4 items}.
inline constexpr int kObjectCodes = 14;
int object_code(const GridObject& obj);
GridObject object_from_code(int code);
std::string object_name(const GridObject& obj);

enum class Action : std::uint8_t { TurnLeft = 0, TurnRight, Forward, Pickup, Drop, Toggle, Swap };
inline constexpr int kNumActions = 7;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::TurnLeft, Action::TurnRight, Action::Forward, Action::Pickup,
    Action::Drop,     Action::Toggle,    Action::Swap};

std::string_view action_name(Action a);
std::optional<Action> parse_action(std::string_view name);
constexpr int action_index(Action a) { return static_cast<int>(a); }
constexpr bool is_interaction(Action a) { return action_index(a) >= action_index(Action::Pickup); }

struct Cell {
  int col;
  int row;
  bool operator==(const Cell&) const = default;
};

/// Grid dimensions include the one-cell wall border.
struct GridShape {
  int width = 8;
  int height = 8;
  int floor_palette = 4;

  int interior_cols() const { return width - 2; }
  int interior_rows() const { return height - 2; }
  int interior_count() const { return interior_cols() * interior_rows(); }
  bool interior(Cell c) const {
    return c.col >= 1 && c.col <= width - 2 && c.row >= 1 && c.row <= height - 2;
  }
  int cell_index(Cell c) const { return (c.row - 1) * interior_cols() + (c.col - 1); }
  Cell cell_at(int index) const {
    return {index % interior_cols() + 1, index / interior_cols() + 1};
  }
  void validate() const;
  bool operator==(const GridShape&) const = default;
};

struct NoisyFloor {
  int cell;   // interior index
  int color;  // palette index
  bool operator==(const NoisyFloor&) const = default;
};

/// Directions: 0 east, 1 south, 2 west, 3 north.
struct AgentState {
  Cell pos{1, 1};
  int dir = 0;
  std::optional<GridObject> carried;
  bool operator==(const AgentState&) const = default;
};

struct GridState {
  GridShape shape;
  std::vector<std::optional<GridObject>> cells;  // interior, row-major
  std::vector<NoisyFloor> noisy_floors;          // sorted by cell
  AgentState agent;

  std::optional<int> floor_at(int cell) const;
  bool operator==(const GridState&) const = default;
};

Cell front_of(const AgentState& agent);
/// Interior index of the cell the agent faces, or nullopt when it faces the wall.
std::optional<int> front_index(const GridState& s);

/// Throws PreconditionError naming the first violated invariant.
void validate(const GridState& s);

/// Sorted (kind, color) multiset over cells, carried item and box contents.
std::vector<std::pair<ObjectKind, Color>> object_multiset(const GridState& s);

/// Successor state. Actions whose preconditions fail leave everything but
/// the noisy floors unchanged; floors are resampled on every step.
GridState step(const GridState& s, Action a, Rng& rng);

/// Random layout: objects, noisy floors and the agent on distinct interior cells.
GridState generate_layout(const GridShape& shape, int n_objects, int n_noisy_floors, Rng& rng);

struct GridTransition {
  GridState s;
  Action a;
  GridState s_next;
};

std::vector<GridTransition> random_policy_rollout(const GridState& start, int horizon, Rng& rng);

/// True if s and s2 differ anywhere except noisy-floor colours.
bool differs_outside_floors(const GridState& s, const GridState& s2);

// ---------------------------------------------------------------------------
// Factored one-hot encoding.
//
// Groups, in order: one per interior cell (empty | object code | floor colour),
// agent position, agent direction, carried item (none | object code).

class FeatureLayout {
 public:
  explicit FeatureLayout(GridShape shape = {});

  const GridShape& shape() const { return shape_; }
  int cell_count() const { return cells_; }
  int cell_classes() const { return 1 + kObjectCodes + shape_.floor_palette; }
  int floor_class(int color) const { return 1 + kObjectCodes + color; }
  bool is_floor_class(int cls) const { return cls > kObjectCodes; }

  int group_count() const { return cells_ + 3; }
  int pos_group() const { return cells_; }
  int dir_group() const { return cells_ + 1; }
  int carried_group() const { return cells_ + 2; }
  bool is_cell_group(int g) const { return g < cells_; }

  int group_size(int g) const;
  int offset(int g) const { return offsets_[static_cast<std::size_t>(g)]; }
  int total_size() const { return total_; }

  bool operator==(const FeatureLayout& o) const { return shape_ == o.shape_; }

 private:
  GridShape shape_;
  int cells_;
  std::vector<int> offsets_;
  int total_;
};

/// One active class per group; the flat binary vector is implied by the layout.
struct FeatureVector {
  std::vector<std::uint16_t> classes;
  bool operator==(const FeatureVector&) const = default;
};

FeatureVector encode(const FeatureLayout& layout, const GridState& s);
GridState decode(const FeatureLayout& layout, const FeatureVector& f);

std::vector<std::uint32_t> active_indices(const FeatureLayout& layout, const FeatureVector& f);
/// Inverse of active_indices; throws PreconditionError unless every group has exactly one index.
FeatureVector from_active_indices(const FeatureLayout& layout, const std::vector<std::uint32_t>& idx);
std::vector<std::uint8_t> to_dense(const FeatureLayout& layout, const FeatureVector& f);

/// Cell index faced by the agent encoded in f, or -1 for the wall.
int front_cell_of(const FeatureLayout& layout, const FeatureVector& f);

// Element ids coincide with feature group ids: cells first, then pos, dir, carried.
using ElementId = int;
std::vector<ElementId> changed_elements(const GridState& s, const GridState& s2);
std::vector<ElementId> changed_groups(const FeatureVector& a, const FeatureVector& b);
std::string element_name(const FeatureLayout& layout, ElementId id);

}  // namespace wav::grid
