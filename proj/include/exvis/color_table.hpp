// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "exvis/image.hpp"

namespace exvis {

struct NamedColor {
    std::string_view name;
    Rgb rgb;
};

/// The CSS Color Module Level 4 named colors (lowercase, alphabetical).
std::span<const NamedColor> css_named_colors();

std::optional<Rgb> find_css_color(std::string_view name);

/// Throws UnknownColorError.
Rgb css_color(std::string_view name);

}  // namespace exvis
