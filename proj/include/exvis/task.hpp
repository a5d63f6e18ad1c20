// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace exvis {

enum class TaskKind : std::uint8_t {
    Edge,
    Depth,
    SurfaceNormal,
    Segmentation,
    Detection,
    Derain,
    Dehaze,
    Desnow,
    LowLight,
    Blur,
    CompositionalEdit,
};

inline constexpr std::array<TaskKind, 11> kAllTasks{
    TaskKind::Edge,      TaskKind::Depth,  TaskKind::SurfaceNormal, TaskKind::Segmentation,
    TaskKind::Detection, TaskKind::Derain, TaskKind::Dehaze,        TaskKind::Desnow,
    TaskKind::LowLight,  TaskKind::Blur,   TaskKind::CompositionalEdit,
};

enum class Direction : std::uint8_t { Forward, Inverse };

/// Stable serialized name, e.g. "segmentation".
std::string_view to_string(TaskKind task);
/// Throws ConfigError naming the offending string.
TaskKind task_from_string(std::string_view name);

/// "fwd" / "inv".
std::string_view to_string(Direction dir);
Direction direction_from_string(std::string_view name);

/// A (task, direction) pair; serializes as "<task>:fwd" or "<task>:inv".
struct TaskDirection {
    TaskKind task{};
    Direction direction{};

    auto operator<=>(const TaskDirection&) const = default;
};

std::string to_string(const TaskDirection& td);
TaskDirection task_direction_from_string(std::string_view text);

/// True for the image-degradation tasks whose forward direction is restoration.
bool is_restoration(TaskKind task);

}  // namespace exvis
