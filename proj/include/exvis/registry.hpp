// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string_view>

namespace exvis {

/// Object categories a synthetic scene may contain.
std::span<const std::string_view> category_registry();

/// CSS color names used for scene objects.
std::span<const std::string_view> object_palette();

/// CSS color names used for segmentation/detection overlays and recolor edits.
std::span<const std::string_view> overlay_palette();

/// CSS color names used for scene backgrounds.
std::span<const std::string_view> background_palette();

bool is_registered_category(std::string_view name);

}  // namespace exvis
