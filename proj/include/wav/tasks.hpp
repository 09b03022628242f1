#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "wav/gridworld.hpp"

namespace wav::grid {

/// Scripted data-collection behaviours for the three delivery/matching tasks.
/// They only generate interaction sequences; no reward is computed.
enum class Task { KeyDelivery = 0, BallDelivery, ObjectMatching };
inline constexpr int kNumTasks = 3;

std::string_view task_name(Task t);
std::optional<Task> parse_task(std::string_view name);

/// Random layout guaranteed to contain at least one key, one ball and one box.
GridState generate_task_layout(const GridShape& shape, int n_objects, int n_noisy_floors, Rng& rng);

/// Shortest-path first action that brings the agent to a pose satisfying
/// `goal(pos_index, dir)`. Returns nullopt if already there or unreachable;
/// `reachable` distinguishes the two.
std::optional<Action> navigate(const GridState& s, const std::function<bool(int, int)>& goal, bool& reachable);

/// Runs a task script for up to max_steps. With probability epsilon each
/// step is replaced by a uniformly random action.
std::vector<GridTransition> scripted_episode(const GridState& start, Task task, int max_steps, double epsilon,
                                             Rng& rng);

}  // namespace wav::grid
