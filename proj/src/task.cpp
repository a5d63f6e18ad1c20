// SPDX-License-Identifier: Apache-2.0
#include "exvis/task.hpp"

#include "exvis/errors.hpp"

namespace exvis {

std::string_view to_string(TaskKind task) {
    switch (task) {
        case TaskKind::Edge: return "edge";
        case TaskKind::Depth: return "depth";
        case TaskKind::SurfaceNormal: return "normal";
        case TaskKind::Segmentation: return "segmentation";
        case TaskKind::Detection: return "detection";
        case TaskKind::Derain: return "derain";
        case TaskKind::Dehaze: return "dehaze";
        case TaskKind::Desnow: return "desnow";
        case TaskKind::LowLight: return "lowlight";
        case TaskKind::Blur: return "blur";
        case TaskKind::CompositionalEdit: return "compositional_edit";
    }
    return "unknown";
}

TaskKind task_from_string(std::string_view name) {
    for (auto t : kAllTasks) {
        if (to_string(t) == name) {
            return t;
        }
    }
    throw ConfigError("unknown task name '" + std::string(name) + "'");
}

std::string_view to_string(Direction dir) {
    return dir == Direction::Forward ? "fwd" : "inv";
}

Direction direction_from_string(std::string_view name) {
    if (name == "fwd") {
        return Direction::Forward;
    }
    if (name == "inv") {
        return Direction::Inverse;
    }
    throw ConfigError("unknown direction '" + std::string(name) + "' (expected fwd or inv)");
}

std::string to_string(const TaskDirection& td) {
    return std::string(to_string(td.task)) + ":" + std::string(to_string(td.direction));
}

TaskDirection task_direction_from_string(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) {
        throw ConfigError("task direction '" + std::string(text) + "' lacks a :fwd/:inv suffix");
    }
    return {task_from_string(text.substr(0, colon)), direction_from_string(text.substr(colon + 1))};
}

bool is_restoration(TaskKind task) {
    switch (task) {
        case TaskKind::Derain:
        case TaskKind::Dehaze:
        case TaskKind::Desnow:
        case TaskKind::LowLight:
        case TaskKind::Blur:
            return true;
        default:
            return false;
    }
}

}  // namespace exvis
