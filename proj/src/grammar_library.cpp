// SPDX-License-Identifier: Apache-2.0
#include "exvis/grammar_library.hpp"

#include <array>
#include <map>
#include <memory>
#include <mutex>

#include "exvis/registry.hpp"

namespace exvis {

namespace {

// Grammar sources. `$CATEGORIES`, `$OVERLAY` and `$OBJECT_COLORS` expand to the
// registry lists so that bound slots enumerate the values the synthesizer uses.

// Task-neutral openers and closers shared by the family A grammars below.
constexpr std::string_view kLead =
    "Here is a picture. | Look carefully at this image. | This is a small scene. | Take the image below. | "
    "Please help with this one. | Work on this picture. | The input is a tiny image. | One more image to process.";
constexpr std::string_view kTail =
    "Keep the same size. | Do it carefully. | Nothing else is needed. | Thanks. | Output the result only.";

// ---- edge -----------------------------------------------------------------

constexpr std::string_view kEdgeFwdA = R"(
direction = forward
slot verb = Trace | Extract | Detect | Mark | Find | Keep | Show
slot lverb = trace | extract | detect | mark | find | keep | show
slot what = every edge | all the edges | the strong edges | each visible edge | the outlines of every shape | the contour edges
slot style = as thin white lines on a black background | in white over pure black | as white strokes on black | as a white line sketch on black
slot drop = Remove all color and texture. | Discard colors and flat regions. | Drop every color. | Leave nothing but the edges.
slot lead = $LEAD
slot tail = $TAIL
skeleton = "{verb} {what} in the scene {style}."
skeleton = "{drop} {verb} {what} {style}."
skeleton = "Please {lverb} {what} in this picture {style}."
skeleton = "I need {what} of this picture {style}."
skeleton = "{drop} The result should show {what} {style}."
skeleton = "{lead} {verb} {what} {style}."
skeleton = "{verb} {what} in this picture {style}. {tail}"
)";

constexpr std::string_view kEdgeInvA = R"(
direction = inverse
slot verb = Fill in | Paint | Render | Restore | Color | Recover | Reconstruct
slot lverb = fill in | paint | render | restore | color | recover | reconstruct
slot obj = the shapes outlined by the white edges | the regions between the edges | each outlined object | the objects inside the contour edges
slot look = with flat solid colors | as solid colored shapes | with their original colors | with filled regions
slot bg = over a plain colored background | on a uniform backdrop | against a flat background
slot lead = $LEAD
slot tail = $TAIL
skeleton = "{verb} {obj} {look} {bg}."
skeleton = "Turn the edge drawing into a colored scene and {lverb} {obj} {look}."
skeleton = "Using the edges as a guide, {lverb} {obj} {look}."
skeleton = "Please {lverb} {obj} {look} {bg}."
skeleton = "I need a picture where you {lverb} {obj} {look}."
skeleton = "{lead} {verb} {obj} {look}."
skeleton = "{verb} {obj} {look} {bg}. {tail}"
)";

constexpr std::string_view kEdgeFwdB = R"(
direction = forward
slot keep = Keep only | Show only | Leave only
slot lkeep = keep only | show only | find only
slot lines = the edges | the outlines | the contour edges of each shape | the strong edges between regions
slot render = as white lines on black | in white on a black background | as a white sketch over black | as white lines over a black background
skeleton = "{keep} {lines} of the scene, {render}."
skeleton = "Take the scene and {lkeep} {lines}, {render}."
)";

constexpr std::string_view kEdgeInvB = R"(
direction = inverse
slot start = Using the white contour edges, | Take the edge drawing and | Read the edges and
slot make = recover | reconstruct | paint
slot what = the full colored scene | the solid objects | the original colored picture
slot finish = with flat colors | with filled regions | on a plain background
skeleton = "{start} {make} {what} {finish}."
skeleton = "Restore {what} inside the edges {finish}."
)";

// ---- depth ----------------------------------------------------------------

constexpr std::string_view kDepthFwdA = R"(
direction = forward
slot verb = Convert | Turn | Transform | Map
slot lverb = convert | turn | transform | map
slot target = a grayscale depth map | a depth image | a gray depth map | shades of gray that show depth
slot rule = where nearer objects appear lighter and farther ones darker | with brightness showing how close each surface is | with near surfaces bright and the far background black | so that close things look bright and distant things look dark
slot extra = Remove all color. | Ignore textures and colors. | Keep only distance information. | Estimate the distance of every object.
slot lead = $LEAD
slot tail = $TAIL
skeleton = "{verb} the scene into {target} {rule}."
skeleton = "{extra} Then {lverb} the scene into {target} {rule}."
skeleton = "Please {lverb} this picture into {target} {rule}."
skeleton = "I need {target} of this picture {rule}."
skeleton = "{extra} The result should be {target} {rule}."
skeleton = "{lead} {verb} it into {target} {rule}."
skeleton = "{verb} this picture into {target} {rule}. {tail}"
)";

constexpr std::string_view kDepthInvA = R"(
direction = inverse
slot verb = Colorize | Render | Paint | Recreate
slot lverb = colorize | render | paint | recreate
slot what = the objects in this depth map | the shapes shown by the gray depth levels | each region of the depth image | the scene described by these distances
slot how = with solid natural colors | as a flat colored scene | using plain vivid colors | as a full color picture
slot lead = $LEAD
slot tail = $TAIL
skeleton = "{verb} {what} {how}."
skeleton = "Use the depth as a guide and {lverb} {what} {how}."
skeleton = "Using the depth levels, {lverb} {what} {how}."
skeleton = "Please {lverb} {what} {how}."
skeleton = "I need a picture where you {lverb} {what} {how}."
skeleton = "{lead} {verb} {what} {how}."
skeleton = "{verb} {what} {how}. {tail}"
)";

constexpr std::string_view kDepthFwdB = R"(
direction = forward
slot open = Show how far each object is | Estimate the depth of every surface | Map the distance of each region | Show the depth of the scene
slot as = in shades of gray | as a grayscale map | as gray depth levels
slot rule = with nearer surfaces lighter | so that the far background is black | with brightness showing distance | where close things look bright
skeleton = "{open} {as}, {rule}."
skeleton = "{open}, {rule}, {as}."
)";

constexpr std::string_view kDepthInvB = R"(
direction = inverse
slot start = Using this depth map as a guide, | Read the gray depth levels and | Take the depth image and
slot make = paint | recreate | render
slot cmake = Paint | Recreate | Render
slot what = a full color picture | the original colored scene | a plain colored picture
slot finish = of the same shapes | with the same outlines | in flat colors
skeleton = "{start} {make} {what} {finish}."
skeleton = "{cmake} {what} {finish}, using this depth map as a guide."
)";

// ---- surface normal -------------------------------------------------------

constexpr std::string_view kNormalFwdA = R"(
direction = forward
slot verb = Convert | Turn | Transform | Map
slot lverb = convert | turn | transform | map
slot target = a surface normal map | a normal map | a map of surface orientations | normal colors
slot enc = encoding each surface direction as a color | where flat surfaces facing the camera turn light blue | with curved surfaces shaded by their orientation | with round objects shaded like domes
slot pre = Ignore the original colors. | Discard textures. | Focus only on surface geometry. | Estimate the orientation of each surface.
slot lead = $LEAD
slot tail = $TAIL
skeleton = "{verb} the scene into {target} {enc}."
skeleton = "{pre} Then {lverb} the scene into {target} {enc}."
skeleton = "Please {lverb} this picture into {target} {enc}."
skeleton = "I need {target} of this picture {enc}."
skeleton = "{pre} The result should be {target} {enc}."
skeleton = "{lead} {verb} it into {target} {enc}."
skeleton = "{verb} this picture into {target} {enc}. {tail}"
)";

constexpr std::string_view kNormalInvA = R"(
direction = inverse
slot verb = Colorize | Render | Paint | Recreate
slot lverb = colorize | render | paint | recreate
slot what = the surfaces described by this normal map | the shapes encoded by the orientation colors | each object in the surface normal image | the geometry shown by these normal colors
slot how = with solid natural colors | as a flat colored scene | using plain vivid colors | as a full color picture
slot lead = $LEAD
slot tail = $TAIL
skeleton = "{verb} {what} {how}."
skeleton = "Read the surface orientations and {lverb} {what} {how}."
skeleton = "Using the surface orientations, {lverb} {what} {how}."
skeleton = "Please {lverb} {what} {how}."
skeleton = "I need a picture where you {lverb} {what} {how}."
skeleton = "{lead} {verb} {what} {how}."
skeleton = "{verb} {what} {how}. {tail}"
)";

constexpr std::string_view kNormalFwdB = R"(
direction = forward
slot open = Show the direction each surface is facing | Estimate the surface direction of every object | Map the orientation of each visible surface | Show the surface geometry of the scene
slot as = as a normal map | in normal colors | as surface normal colors
slot rule = so that flat surfaces turn light blue | with curved surfaces shaded like domes | where surfaces facing the camera look light blue | with each surface direction shown as a color
skeleton = "{open} {as}, {rule}."
skeleton = "{open}, {rule}, {as}."
)";

constexpr std::string_view kNormalInvB = R"(
direction = inverse
slot start = Using these normal colors as a guide, | Take the normal map and | Look at the surface orientations and
slot make = paint | recreate | render
slot cmake = Paint | Recreate | Render
slot what = a full color picture | the original colored scene | a plain colored picture
slot finish = of the same shapes | with the same outlines | in flat colors
skeleton = "{start} {make} {what} {finish}."
skeleton = "{cmake} {what} {finish}, using these normal colors as a guide."
)";

// ---- segmentation ---------------------------------------------------------

constexpr std::string_view kSegFwdA = R"(
direction = forward
slot category = $CATEGORIES
slot color = $OVERLAY
slot verb = Paint over | Cover | Fill | Color in | Recolor | Mask
slot lverb = paint over | cover | fill | mask
slot every = every | each | every single | each and every
slot obj = object | region | instance | area
slot finish = covering them entirely | completely | so that nothing of them remains visible | and keep everything else unchanged
slot use = Use | Apply | Take
slot shade = flat | solid | opaque
slot pix = pixels | regions | shapes
slot rest = only | and leave the rest as it is | while the background stays untouched
skeleton = "{verb} {every} {category} {obj} with {color} {finish}."
skeleton = "{use} {shade} {color} to {lverb} the {category} {pix} {rest}."
)";

constexpr std::string_view kSegInvA = R"(
direction = inverse
slot category = $CATEGORIES
slot color = $OVERLAY
slot verb = Remove | Erase | Strip away | Wash off
slot objs = objects | regions | areas
slot restore = and restore their natural appearance | to reveal their original colors | so the original scene shows again
skeleton = "{verb} the {color} fill covering the {category} {objs} {restore}."
skeleton = "Bring back the original look of the {category} {objs} that were painted {color}."
)";

constexpr std::string_view kSegFwdB = R"(
direction = forward
slot category = $CATEGORIES
slot color = $OVERLAY
slot act = Highlight | Segment | Mark out
skeleton = "{act} the {category} by flooding its pixels with solid {color}, leaving the rest untouched."
skeleton = "Every pixel that belongs to a {category} should become pure {color}."
)";

constexpr std::string_view kSegInvB = R"(
direction = inverse
slot category = $CATEGORIES
slot color = $OVERLAY
slot undo = Undo | Lift | Peel off
skeleton = "{undo} the {color} segmentation mask on the {category} and show its real surface."
skeleton = "Replace the solid {color} shape of the {category} with its genuine colors."
)";

// ---- detection ------------------------------------------------------------

constexpr std::string_view kDetFwdA = R"(
direction = forward
slot category = $CATEGORIES
slot color = $OVERLAY
slot verb = Draw | Place | Put | Add
slot box = bounding box | rectangular box | box outline | frame
slot around = around | enclosing | surrounding
slot objs = objects | instances | items
skeleton = "{verb} a {color} {box} {around} all {category} {objs}."
skeleton = "Locate every {category} and outline it with a thin {color} rectangle."
)";

constexpr std::string_view kDetInvA = R"(
direction = inverse
slot category = $CATEGORIES
slot color = $OVERLAY
slot verb = Remove | Erase | Delete | Take away
slot box = bounding box | rectangular box | box outline | frame
slot objs = objects | instances | items
skeleton = "{verb} the {color} {box} drawn around the {category} {objs}."
skeleton = "Clear away the {color} rectangles so the {category} {objs} look untouched."
)";

constexpr std::string_view kDetFwdB = R"(
direction = forward
slot category = $CATEGORIES
slot color = $OVERLAY
skeleton = "Find the {category} and frame it with a {color} border line."
skeleton = "Mark the position of each {category} using a hollow {color} rectangle."
)";

constexpr std::string_view kDetInvB = R"(
direction = inverse
slot category = $CATEGORIES
slot color = $OVERLAY
skeleton = "Get rid of the hollow {color} frame marking the {category}."
skeleton = "Hide the {color} rectangle lines that mark where the {category} is."
)";

// ---- restoration tasks ------------------------------------------------------
// Forward: degraded -> clean. Inverse: clean -> degraded.

constexpr std::string_view kDerainFwdA = R"(
direction = forward
slot verb = Remove | Clear away | Wipe out | Eliminate
slot lverb = remove | clear away | wipe out | eliminate
slot rain = the rain streaks | the falling rain | all rain lines | the diagonal rain
slot rest = and restore a clean, dry scene | to reveal the clear image underneath | while keeping every object intact
skeleton = "{verb} {rain} {rest}."
skeleton = "Make the weather dry: {lverb} {rain}."
)";

constexpr std::string_view kDerainInvA = R"(
direction = inverse
slot verb = Add | Overlay | Draw | Sprinkle
slot amount = light | heavy | diagonal | thin bright
slot over = across the scene | over the whole picture | on top of everything
skeleton = "{verb} {amount} rain streaks {over}."
skeleton = "Make it look like a rainy day with {amount} streaks {over}."
)";

constexpr std::string_view kDerainFwdB = R"(
direction = forward
slot pref = This photo is rainy. | The view is covered by rain.
slot a = The rain should disappear | Get rid of the rain | Take all the rain out | Stop the rain | Let the sky dry up
slot b = so the picture looks dry and clear | leaving sharp clean shapes | without changing anything else | and show the calm scene beneath | so no streak is left
skeleton = "{a}, {b}."
skeleton = "{pref} {a}, {b}."
)";

constexpr std::string_view kDerainInvB = R"(
direction = inverse
slot pref = Change the weather. | The sky opens up.
slot a = Let it pour | Start a rain shower | Cover the view with rain | Bring a storm | Make rain fall
slot b = with streaks slanting across the frame | so thin lines of water cross the picture | until the scene looks wet | with visible falling drops | all over the picture
skeleton = "{a}, {b}."
skeleton = "{pref} {a}, {b}."
)";

constexpr std::string_view kDehazeFwdA = R"(
direction = forward
slot verb = Remove | Clear away | Lift | Eliminate
slot lverb = remove | clear away | lift | eliminate
slot haze = the haze | the fog | the milky haze | the foggy veil
slot rest = and restore full contrast | to reveal vivid colors underneath | while keeping every object intact
skeleton = "{verb} {haze} {rest}."
skeleton = "Make the air clear: {lverb} {haze}."
)";

constexpr std::string_view kDehazeInvA = R"(
direction = inverse
slot verb = Add | Overlay | Spread | Introduce
slot amount = light | thick | pale | dense white
slot over = across the scene | over the whole picture | on top of everything
skeleton = "{verb} {amount} haze {over}."
skeleton = "Make it look like a foggy morning with {amount} mist {over}."
)";

constexpr std::string_view kDehazeFwdB = R"(
direction = forward
slot pref = This photo is foggy. | The view is washed out by mist.
slot a = The mist should disappear | Get rid of the fog | Take the whiteness out | Sharpen the washed out view | Let the air become transparent
slot b = so colors look deep and saturated | leaving crisp contrast | without changing anything else | and show the clear scene beneath | so no veil is left
skeleton = "{a}, {b}."
skeleton = "{pref} {a}, {b}."
)";

constexpr std::string_view kDehazeInvB = R"(
direction = inverse
slot pref = Change the weather. | The air thickens.
slot a = Let fog roll in | Wash the view out with mist | Cover everything in a pale veil | Bring a hazy atmosphere | Fade the colors toward white
slot b = so contrast drops everywhere | until distant shapes look faint | with a milky glow over the frame | so all colors become pale | all over the picture
skeleton = "{a}, {b}."
skeleton = "{pref} {a}, {b}."
)";

constexpr std::string_view kDesnowFwdA = R"(
direction = forward
slot verb = Remove | Clear away | Wipe out | Eliminate
slot lverb = remove | clear away | wipe out | eliminate
slot snow = the snowflakes | the falling snow | all snow specks | the white snow dots
slot rest = and restore a clean scene | to reveal the clear image underneath | while keeping every object intact
skeleton = "{verb} {snow} {rest}."
skeleton = "Stop the snowfall: {lverb} {snow}."
)";

constexpr std::string_view kDesnowInvA = R"(
direction = inverse
slot verb = Add | Overlay | Scatter | Sprinkle
slot amount = light | heavy | fine | bright white
slot over = across the scene | over the whole picture | on top of everything
skeleton = "{verb} {amount} snowflakes {over}."
skeleton = "Make it look like a snowy day with {amount} flakes {over}."
)";

constexpr std::string_view kDesnowFwdB = R"(
direction = forward
slot pref = This photo is snowy. | The view is dotted with flakes.
slot a = The flakes should disappear | Get rid of the snow | Take every white speck out | Clean off the snowfall | Let the snowing end
slot b = so the picture looks clear | leaving smooth clean surfaces | without changing anything else | and show the calm scene beneath | so no flake is left
skeleton = "{a}, {b}."
skeleton = "{pref} {a}, {b}."
)";

constexpr std::string_view kDesnowInvB = R"(
direction = inverse
slot pref = Change the weather. | Winter arrives.
slot a = Let it snow | Start a snow shower | Cover the view with flakes | Bring a blizzard | Make snow fall
slot b = with white specks across the frame | so small flakes dot the picture | until the scene looks wintry | with visible drifting flakes | all over the picture
skeleton = "{a}, {b}."
skeleton = "{pref} {a}, {b}."
)";

constexpr std::string_view kLowLightFwdA = R"(
direction = forward
slot verb = Brighten | Lighten | Illuminate | Light up
slot lverb = brighten | lighten | illuminate | light up
slot what = the dark scene | the underexposed picture | the dim image | every shadowed region
slot rest = and restore natural exposure | to reveal the colors hidden in the dark | while keeping every object intact
skeleton = "{verb} {what} {rest}."
skeleton = "Fix the exposure: {lverb} {what}."
)";

constexpr std::string_view kLowLightInvA = R"(
direction = inverse
slot verb = Darken | Dim | Underexpose | Shade
slot amount = slightly | strongly | heavily | evenly
slot over = across the scene | over the whole picture | everywhere
skeleton = "{verb} the image {amount} {over}."
skeleton = "Make it look like dusk by lowering the brightness {amount} {over}."
)";

constexpr std::string_view kLowLightFwdB = R"(
direction = forward
slot pref = This photo is too dark. | The view was shot at night.
slot a = Turn the lights on | Raise the brightness | Lift the shadows | Boost the exposure | Let daylight in
slot b = so colors become visible | leaving a well lit scene | without changing anything else | and show the bright scene beneath | so no region stays gloomy
skeleton = "{a}, {b}."
skeleton = "{pref} {a}, {b}."
)";

constexpr std::string_view kLowLightInvB = R"(
direction = inverse
slot pref = Change the lighting. | Night falls.
slot a = Turn the lights off | Lower the exposure | Deepen the shadows | Let darkness settle | Cut the illumination
slot b = so colors become muted | until the scene looks gloomy | with everything sinking into shadow | so all shapes dim | all over the picture
skeleton = "{a}, {b}."
skeleton = "{pref} {a}, {b}."
)";

constexpr std::string_view kBlurFwdA = R"(
direction = forward
slot verb = Sharpen | Deblur | Refocus | Clarify
slot lverb = sharpen | deblur | refocus | clarify
slot what = the blurry scene | the soft picture | the out of focus image | every smeared edge
slot rest = and restore crisp edges | to reveal fine boundaries | while keeping every object intact
skeleton = "{verb} {what} {rest}."
skeleton = "Fix the focus: {lverb} {what}."
)";

constexpr std::string_view kBlurInvA = R"(
direction = inverse
slot verb = Blur | Soften | Smear | Defocus
slot amount = slightly | strongly | heavily | evenly
slot over = across the scene | over the whole picture | everywhere
skeleton = "{verb} the image {amount} {over}."
skeleton = "Make it look out of focus by smoothing edges {amount} {over}."
)";

constexpr std::string_view kBlurFwdB = R"(
direction = forward
slot pref = This photo is blurry. | The lens missed focus.
slot a = Bring everything into focus | Make the edges crisp | Remove the softness | Tighten every boundary | Undo the smearing
slot b = so shapes look sharp | leaving clean outlines | without changing anything else | and show the detailed scene beneath | so no edge stays fuzzy
skeleton = "{a}, {b}."
skeleton = "{pref} {a}, {b}."
)";

constexpr std::string_view kBlurInvB = R"(
direction = inverse
slot pref = Change the focus. | The lens slips.
slot a = Throw the picture out of focus | Smooth away the details | Make the edges fuzzy | Let the shapes bleed together | Soften every boundary
slot b = so outlines fade | until the scene looks dreamy | with colors mixing at the borders | so fine details vanish | all over the picture
skeleton = "{a}, {b}."
skeleton = "{pref} {a}, {b}."
)";

// ---- compositional edits ----------------------------------------------------
// Tagged skeletons describe one edit operation each; multi-operation
// instructions concatenate one draw per operation.

constexpr std::string_view kEditFwdA = R"(
direction = forward
slot category = $CATEGORIES
slot color = $OVERLAY
slot weather = rain | snow | haze
slot rverb = Change | Recolor | Turn | Paint
slot wverb = Add | Introduce | Bring in
slot light = Darken the whole scene. | Dim the lighting everywhere. | Lower the overall brightness.
skeleton:recolor = "{rverb} the {category} to {color}."
skeleton:recolor = "Give the {category} a {color} finish."
skeleton:weather = "{wverb} {weather} to the scene."
skeleton:weather = "Let some {weather} cover the picture."
skeleton:relight = "{light}"
)";

constexpr std::string_view kEditInvA = R"(
direction = inverse
slot category = $CATEGORIES
slot color = $OBJECT_COLORS
slot weather = rain | snow | haze
slot rverb = Change | Recolor | Turn | Paint
slot wverb = Remove | Clear away | Take out
slot light = Brighten the whole scene. | Restore the normal lighting. | Raise the overall brightness.
skeleton:recolor = "{rverb} the {category} back to {color}."
skeleton:recolor = "Return the {category} to its original {color}."
skeleton:weather = "{wverb} the {weather} from the scene."
skeleton:weather = "Clear the picture of {weather}."
skeleton:relight = "{light}"
)";

constexpr std::string_view kEditFwdB = R"(
direction = forward
slot category = $CATEGORIES
slot color = $OVERLAY
slot weather = rain | snow | haze
skeleton:recolor = "The {category} should now be {color}."
skeleton:recolor = "Swap the color of the {category} for {color}."
skeleton:weather = "Put the scene under {weather}."
skeleton:weather = "Weather change: {weather} everywhere."
skeleton:relight = "Turn the lights down."
skeleton:relight = "Let evening shade fall over the view."
)";

constexpr std::string_view kEditInvB = R"(
direction = inverse
slot category = $CATEGORIES
slot color = $OBJECT_COLORS
slot weather = rain | snow | haze
skeleton:recolor = "The {category} should go back to being {color}."
skeleton:recolor = "Undo the repaint so the {category} is {color} again."
skeleton:weather = "Take the scene out of the {weather}."
skeleton:weather = "Weather change: no more {weather}."
skeleton:relight = "Turn the lights back up."
skeleton:relight = "Let daylight return to the view."
)";

struct Entry {
    TaskKind task;
    Direction dir;
    GrammarFamily family;
    std::string_view text;
};

constexpr auto F = Direction::Forward;
constexpr auto I = Direction::Inverse;
constexpr auto A = GrammarFamily::A;
constexpr auto B = GrammarFamily::B;

constexpr std::array<Entry, 44> kEntries{{
    {TaskKind::Edge, F, A, kEdgeFwdA},
    {TaskKind::Edge, I, A, kEdgeInvA},
    {TaskKind::Edge, F, B, kEdgeFwdB},
    {TaskKind::Edge, I, B, kEdgeInvB},
    {TaskKind::Depth, F, A, kDepthFwdA},
    {TaskKind::Depth, I, A, kDepthInvA},
    {TaskKind::Depth, F, B, kDepthFwdB},
    {TaskKind::Depth, I, B, kDepthInvB},
    {TaskKind::SurfaceNormal, F, A, kNormalFwdA},
    {TaskKind::SurfaceNormal, I, A, kNormalInvA},
    {TaskKind::SurfaceNormal, F, B, kNormalFwdB},
    {TaskKind::SurfaceNormal, I, B, kNormalInvB},
    {TaskKind::Segmentation, F, A, kSegFwdA},
    {TaskKind::Segmentation, I, A, kSegInvA},
    {TaskKind::Segmentation, F, B, kSegFwdB},
    {TaskKind::Segmentation, I, B, kSegInvB},
    {TaskKind::Detection, F, A, kDetFwdA},
    {TaskKind::Detection, I, A, kDetInvA},
    {TaskKind::Detection, F, B, kDetFwdB},
    {TaskKind::Detection, I, B, kDetInvB},
    {TaskKind::Derain, F, A, kDerainFwdA},
    {TaskKind::Derain, I, A, kDerainInvA},
    {TaskKind::Derain, F, B, kDerainFwdB},
    {TaskKind::Derain, I, B, kDerainInvB},
    {TaskKind::Dehaze, F, A, kDehazeFwdA},
    {TaskKind::Dehaze, I, A, kDehazeInvA},
    {TaskKind::Dehaze, F, B, kDehazeFwdB},
    {TaskKind::Dehaze, I, B, kDehazeInvB},
    {TaskKind::Desnow, F, A, kDesnowFwdA},
    {TaskKind::Desnow, I, A, kDesnowInvA},
    {TaskKind::Desnow, F, B, kDesnowFwdB},
    {TaskKind::Desnow, I, B, kDesnowInvB},
    {TaskKind::LowLight, F, A, kLowLightFwdA},
    {TaskKind::LowLight, I, A, kLowLightInvA},
    {TaskKind::LowLight, F, B, kLowLightFwdB},
    {TaskKind::LowLight, I, B, kLowLightInvB},
    {TaskKind::Blur, F, A, kBlurFwdA},
    {TaskKind::Blur, I, A, kBlurInvA},
    {TaskKind::Blur, F, B, kBlurFwdB},
    {TaskKind::Blur, I, B, kBlurInvB},
    {TaskKind::CompositionalEdit, F, A, kEditFwdA},
    {TaskKind::CompositionalEdit, I, A, kEditInvA},
    {TaskKind::CompositionalEdit, F, B, kEditFwdB},
    {TaskKind::CompositionalEdit, I, B, kEditInvB},
}};

std::string join(std::span<const std::string_view> items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += items[i];
        if (i + 1 < items.size()) {
            out += " | ";
        }
    }
    return out;
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

}  // namespace

std::string_view to_string(GrammarFamily family) { return family == GrammarFamily::A ? "A" : "B"; }

GrammarFamily grammar_family_from_string(std::string_view name) {
    if (name == "A" || name == "a") {
        return GrammarFamily::A;
    }
    if (name == "B" || name == "b") {
        return GrammarFamily::B;
    }
    throw ConfigError("unknown grammar family '" + std::string(name) + "' (expected A or B)");
}

std::string grammar_source(TaskKind task, Direction dir, GrammarFamily family) {
    for (const auto& e : kEntries) {
        if (e.task == task && e.dir == dir && e.family == family) {
            std::string text(e.text);
            replace_all(text, "$CATEGORIES", join(category_registry()));
            replace_all(text, "$OVERLAY", join(overlay_palette()));
            replace_all(text, "$OBJECT_COLORS", join(object_palette()));
            replace_all(text, "$LEAD", std::string(kLead));
            replace_all(text, "$TAIL", std::string(kTail));
            return text;
        }
    }
    throw Error("no grammar registered for " + to_string(TaskDirection{task, dir}));
}

const TemplateGrammar& shipped_grammar(TaskKind task, Direction dir, GrammarFamily family) {
    static std::once_flag once;
    static std::map<std::tuple<TaskKind, Direction, GrammarFamily>, TemplateGrammar> compiled;
    std::call_once(once, [] {
        for (const auto& e : kEntries) {
            compiled.emplace(std::tuple{e.task, e.dir, e.family},
                             compile_grammar(e.task, grammar_source(e.task, e.dir, e.family)));
        }
    });
    return compiled.at({task, dir, family});
}

}  // namespace exvis
