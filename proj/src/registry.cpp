// SPDX-License-Identifier: Apache-2.0
#include "exvis/registry.hpp"

#include <algorithm>
#include <array>

namespace exvis {

namespace {

constexpr std::array<std::string_view, 16> kCategories{
    "car",  "tree",  "house", "person", "dog",  "cat",  "clock", "streetlight",
    "boat", "bird",  "chair", "table",  "ball", "kite", "apron", "sign",
};

constexpr std::array<std::string_view, 16> kObjectColors{
    "navy",      "teal",     "olive",     "maroon",    "purple",     "sienna",
    "seagreen",  "steelblue", "chocolate", "slategray", "darkorange", "orchid",
    "tomato",    "khaki",    "peru",      "indigo",
};

constexpr std::array<std::string_view, 12> kOverlayColors{
    "dodgerblue", "floralwhite", "crimson", "gold", "limegreen", "orange",
    "magenta",    "cyan",        "yellow",  "red",  "blue",      "white",
};

constexpr std::array<std::string_view, 6> kBackgrounds{
    "lightgray", "beige", "lavender", "honeydew", "lightblue", "wheat",
};

}  // namespace

std::span<const std::string_view> category_registry() { return kCategories; }
std::span<const std::string_view> object_palette() { return kObjectColors; }
std::span<const std::string_view> overlay_palette() { return kOverlayColors; }
std::span<const std::string_view> background_palette() { return kBackgrounds; }

bool is_registered_category(std::string_view name) {
    return std::find(kCategories.begin(), kCategories.end(), name) != kCategories.end();
}

}  // namespace exvis
