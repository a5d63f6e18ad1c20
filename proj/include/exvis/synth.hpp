// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "exvis/grammar.hpp"
#include "exvis/grammar_library.hpp"
#include "exvis/image.hpp"
#include "exvis/task.hpp"

namespace exvis {

enum class Shape : std::uint8_t { Circle, Rect };

/// Inclusive-exclusive integer rectangle [x0, x0+w) x [y0, y0+h).
struct Box {
    int x0{0};
    int y0{0};
    int w{0};
    int h{0};

    bool operator==(const Box&) const = default;
};

struct SceneObject {
    Shape shape{Shape::Rect};
    std::string category;
    std::string color_name;  ///< CSS name; `color` is its RGB
    Rgb color;
    double depth_m{0.0};
    /// Circles are discs inscribed in a square box.
    Box bbox;

    bool covers(int x, int y) const noexcept;
    bool operator==(const SceneObject&) const = default;
};

/// Labeled synthetic scene. Objects are painted in list order.
struct Scene {
    int width{0};
    int height{0};
    std::vector<SceneObject> objects;
    Rgb background;
    std::string background_name;
    std::uint64_t seed{0};

    bool operator==(const Scene&) const = default;
};

inline constexpr double kMaxDepthMeters = 10.0;

/// Random scene with 1..16 objects. Objects are ordered far to near so painter's
/// order agrees with depth; every category shares one color within a scene.
/// Throws DimensionError for width/height < 8 or n_objects outside [1, 16].
Scene synth_scene(int width, int height, int n_objects, std::uint64_t seed);

Image render(const Scene& scene);

/// Binary map (0 or 255, gray) of luminance Sobel magnitude > threshold.
/// Borders replicate. Throws DimensionError below 3x3.
Image edge_map(const Image& img, double threshold = 96.0);

/// Nearer is lighter: v = round(255 (1 - d / 10)), background at 10 m.
Image depth_map(const Scene& scene);

/// Inverse of the depth convention, in meters. Throws DataError for non-gray pixels.
std::vector<double> decode_depth(const Image& img);

/// Circles as camera-facing hemispheres, rects and background as flat planes;
/// unit normal (x right, y up, z toward camera) encoded as round(127.5 (n + 1)).
Image normal_map(const Scene& scene);

/// Index of the object visible at (x, y), or -1 for background.
int visible_object(const Scene& scene, int x, int y);

/// Recolors pixels whose visible object has a mapped category. Values are CSS
/// color names; throws UnknownColorError for unknown names.
Image segmentation_overlay(const Image& img, const Scene& scene,
                           const std::map<std::string, std::string>& color_by_category);

/// Draws bbox borders of the given thickness for every object with a mapped
/// category; borders are clipped to the canvas.
Image detection_overlay(const Image& img, const Scene& scene,
                        const std::map<std::string, std::string>& color_by_category,
                        int thickness = 1);

enum class Degradation : std::uint8_t { Derain, Dehaze, Desnow, LowLight, Blur };

std::string_view to_string(Degradation kind);
Degradation degradation_for(TaskKind task);

/// Seeded image degradation; intensity in [0, 1] (RangeError otherwise).
Image degrade(const Image& img, Degradation kind, double intensity, std::uint64_t seed);

// ---- compositional edits ----------------------------------------------------

struct RecolorOp {
    std::string category;
    std::string color_name;
};
struct WeatherOp {
    Degradation kind{Degradation::Derain};  ///< Derain, Desnow or Dehaze
    double intensity{0.5};
};
struct RelightOp {
    double intensity{0.5};
};
using EditOp = std::variant<RecolorOp, WeatherOp, RelightOp>;

/// Structured description of one applied edit, consumed by the grammars.
struct EditToken {
    std::string tag;         ///< "recolor", "weather" or "relight"
    SlotBindings forward;    ///< bindings for the forward (A->B) phrase
    SlotBindings inverse;    ///< bindings for the inverse (B->A) phrase
};

struct EditResult {
    Image source;
    Image target;
    std::vector<EditToken> description;
};

/// Applies 1..3 ops: recolors edit the scene, then weather/relight degrade the
/// rendering in listed order. Throws UnknownCategoryError for a recolor of a
/// category not present in the scene, DimensionError for an empty or too long op list.
EditResult compositional_edit(const Scene& scene, const std::vector<EditOp>& ops,
                              std::uint64_t seed);

// ---- triplets ----------------------------------------------------------------

struct Triplet {
    Image source;
    std::string instruction;
    Image target;
    TaskKind task{};
    Direction direction{};
    std::uint64_t scene_seed{0};
    /// Slot values the instruction was drawn with (empty for unbound tasks).
    SlotBindings bindings;

    TaskDirection task_direction() const { return {task, direction}; }
};

/// Builds the pair (A -> B, B -> A) for `task`, where B = transform(A).
/// For restoration tasks A is the degraded image and B the clean rendering.
/// The inverse triplet carries the same images swapped.
std::pair<Triplet, Triplet> make_bidirectional_triplets(const Scene& scene, TaskKind task,
                                                        GrammarFamily family, std::uint64_t seed);

/// Draws an instruction for an already-built triplet from another family, keeping
/// its bindings (used for unseen-phrasing evaluation).
std::string resample_instruction(const Triplet& t, GrammarFamily family, std::uint64_t seed);

}  // namespace exvis
