// SPDX-License-Identifier: Apache-2.0
#include "exvis/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "exvis/color_table.hpp"
#include "exvis/registry.hpp"
#include "exvis/rng.hpp"

namespace exvis {

bool SceneObject::covers(int x, int y) const noexcept {
    if (x < bbox.x0 || y < bbox.y0 || x >= bbox.x0 + bbox.w || y >= bbox.y0 + bbox.h) {
        return false;
    }
    if (shape == Shape::Rect) {
        return true;
    }
    const double r = bbox.w / 2.0;
    const double dx = x + 0.5 - (bbox.x0 + r);
    const double dy = y + 0.5 - (bbox.y0 + r);
    return dx * dx + dy * dy <= r * r;
}

Scene synth_scene(int width, int height, int n_objects, std::uint64_t seed) {
    if (width < 8 || height < 8) {
        throw DimensionError("scene must be at least 8x8, got " + std::to_string(width) + "x" +
                             std::to_string(height));
    }
    if (n_objects < 1 || n_objects > 16) {
        throw DimensionError("scene object count must be in [1, 16], got " +
                             std::to_string(n_objects));
    }
    Rng rng(seed);
    Scene scene;
    scene.width = width;
    scene.height = height;
    scene.seed = seed;

    const auto backgrounds = background_palette();
    scene.background_name = std::string(backgrounds[rng.below(backgrounds.size())]);
    scene.background = css_color(scene.background_name);

    const auto categories = category_registry();
    const auto palette = object_palette();
    std::map<std::string, std::string> category_color;

    const int small = std::min(width, height);
    for (int i = 0; i < n_objects; ++i) {
        SceneObject obj;
        obj.shape = rng.below(2) == 0 ? Shape::Circle : Shape::Rect;
        obj.category = std::string(categories[rng.below(categories.size())]);
        auto [it, inserted] = category_color.try_emplace(obj.category);
        if (inserted) {
            it->second = std::string(palette[rng.below(palette.size())]);
        }
        obj.color_name = it->second;
        obj.color = css_color(obj.color_name);
        obj.depth_m = std::round(rng.uniform(0.5, 9.5) * 100.0) / 100.0;
        if (obj.shape == Shape::Circle) {
            // odd diameters keep a pixel exactly at the disc center
            const int max_d = std::max(3, (small / 2) | 1);
            int d = rng.uniform_int(1, (max_d - 1) / 2) * 2 + 1;
            obj.bbox.w = d;
            obj.bbox.h = d;
        } else {
            const int max_side = std::max(2, small / 2);
            obj.bbox.w = rng.uniform_int(2, max_side);
            obj.bbox.h = rng.uniform_int(2, max_side);
        }
        obj.bbox.x0 = rng.uniform_int(0, width - obj.bbox.w);
        obj.bbox.y0 = rng.uniform_int(0, height - obj.bbox.h);
        scene.objects.push_back(std::move(obj));
    }
    std::stable_sort(scene.objects.begin(), scene.objects.end(),
                     [](const SceneObject& a, const SceneObject& b) { return a.depth_m > b.depth_m; });
    return scene;
}

Image render(const Scene& scene) {
    Image img(scene.width, scene.height, scene.background);
    for (const auto& obj : scene.objects) {
        const int x1 = std::min(scene.width, obj.bbox.x0 + obj.bbox.w);
        const int y1 = std::min(scene.height, obj.bbox.y0 + obj.bbox.h);
        for (int y = std::max(0, obj.bbox.y0); y < y1; ++y) {
            for (int x = std::max(0, obj.bbox.x0); x < x1; ++x) {
                if (obj.covers(x, y)) {
                    img.set(x, y, obj.color);
                }
            }
        }
    }
    return img;
}

int visible_object(const Scene& scene, int x, int y) {
    for (int i = static_cast<int>(scene.objects.size()) - 1; i >= 0; --i) {
        if (scene.objects[static_cast<std::size_t>(i)].covers(x, y)) {
            return i;
        }
    }
    return -1;
}

Image edge_map(const Image& img, double threshold) {
    const int w = img.width();
    const int h = img.height();
    if (w < 3 || h < 3) {
        throw DimensionError("edge map needs at least a 3x3 image");
    }
    std::vector<double> lum(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            lum[static_cast<std::size_t>(y * w + x)] = luminance(img.at(x, y));
        }
    }
    auto L = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return lum[static_cast<std::size_t>(y * w + x)];
    };
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = (L(x + 1, y - 1) + 2.0 * L(x + 1, y) + L(x + 1, y + 1)) -
                              (L(x - 1, y - 1) + 2.0 * L(x - 1, y) + L(x - 1, y + 1));
            const double gy = (L(x - 1, y + 1) + 2.0 * L(x, y + 1) + L(x + 1, y + 1)) -
                              (L(x - 1, y - 1) + 2.0 * L(x, y - 1) + L(x + 1, y - 1));
            if (std::sqrt(gx * gx + gy * gy) > threshold) {
                out.set(x, y, {255, 255, 255});
            }
        }
    }
    return out;
}

Image depth_map(const Scene& scene) {
    Image out(scene.width, scene.height);
    for (int y = 0; y < scene.height; ++y) {
        for (int x = 0; x < scene.width; ++x) {
            double d = kMaxDepthMeters;
            for (const auto& obj : scene.objects) {
                if (obj.covers(x, y)) {
                    d = std::min(d, obj.depth_m);
                }
            }
            const auto v = clamp_round_u8(255.0 * (1.0 - d / kMaxDepthMeters));
            out.set(x, y, {v, v, v});
        }
    }
    return out;
}

std::vector<double> decode_depth(const Image& img) {
    std::vector<double> meters;
    meters.reserve(static_cast<std::size_t>(img.width()) * static_cast<std::size_t>(img.height()));
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const auto c = img.at(x, y);
            if (c.r != c.g || c.g != c.b) {
                throw DataError("depth image is not grayscale at (" + std::to_string(x) + ", " +
                                std::to_string(y) + ")");
            }
            meters.push_back(kMaxDepthMeters * (1.0 - c.r / 255.0));
        }
    }
    return meters;
}

Image normal_map(const Scene& scene) {
    auto encode = [](double n) { return clamp_round_u8(127.5 * (n + 1.0)); };
    const Rgb flat{encode(0.0), encode(0.0), encode(1.0)};
    Image out(scene.width, scene.height, flat);
    for (int y = 0; y < scene.height; ++y) {
        for (int x = 0; x < scene.width; ++x) {
            const int idx = visible_object(scene, x, y);
            if (idx < 0) {
                continue;
            }
            const auto& obj = scene.objects[static_cast<std::size_t>(idx)];
            if (obj.shape == Shape::Rect) {
                continue;
            }
            const double r = obj.bbox.w / 2.0;
            const double dx = (x + 0.5 - (obj.bbox.x0 + r)) / r;
            const double dy = (y + 0.5 - (obj.bbox.y0 + r)) / r;
            const double nz = std::sqrt(std::max(0.0, 1.0 - dx * dx - dy * dy));
            const double norm = std::sqrt(dx * dx + dy * dy + nz * nz);
            out.set(x, y, {encode(dx / norm), encode(-dy / norm), encode(nz / norm)});
        }
    }
    return out;
}

namespace {

std::map<std::string, Rgb> resolve_colors(const std::map<std::string, std::string>& by_category) {
    std::map<std::string, Rgb> out;
    for (const auto& [category, name] : by_category) {
        out.emplace(category, css_color(name));
    }
    return out;
}

}  // namespace

Image segmentation_overlay(const Image& img, const Scene& scene,
                           const std::map<std::string, std::string>& color_by_category) {
    const auto colors = resolve_colors(color_by_category);
    if (img.width() != scene.width || img.height() != scene.height) {
        throw DimensionError("overlay image and scene differ in size");
    }
    Image out = img;
    if (colors.empty()) {
        return out;
    }
    for (int y = 0; y < scene.height; ++y) {
        for (int x = 0; x < scene.width; ++x) {
            const int idx = visible_object(scene, x, y);
            if (idx < 0) {
                continue;
            }
            const auto it = colors.find(scene.objects[static_cast<std::size_t>(idx)].category);
            if (it != colors.end()) {
                out.set(x, y, it->second);
            }
        }
    }
    return out;
}

Image detection_overlay(const Image& img, const Scene& scene,
                        const std::map<std::string, std::string>& color_by_category,
                        int thickness) {
    if (thickness < 1) {
        throw DimensionError("box thickness must be >= 1");
    }
    const auto colors = resolve_colors(color_by_category);
    Image out = img;
    for (const auto& obj : scene.objects) {
        const auto it = colors.find(obj.category);
        if (it == colors.end()) {
            continue;
        }
        const Box& b = obj.bbox;
        for (int y = b.y0; y < b.y0 + b.h; ++y) {
            for (int x = b.x0; x < b.x0 + b.w; ++x) {
                const bool border = x - b.x0 < thickness || b.x0 + b.w - 1 - x < thickness ||
                                    y - b.y0 < thickness || b.y0 + b.h - 1 - y < thickness;
                if (border && out.contains(x, y)) {
                    out.set(x, y, it->second);
                }
            }
        }
    }
    return out;
}

std::string_view to_string(Degradation kind) {
    switch (kind) {
        case Degradation::Derain: return "rain";
        case Degradation::Dehaze: return "haze";
        case Degradation::Desnow: return "snow";
        case Degradation::LowLight: return "lowlight";
        case Degradation::Blur: return "blur";
    }
    return "unknown";
}

Degradation degradation_for(TaskKind task) {
    switch (task) {
        case TaskKind::Derain: return Degradation::Derain;
        case TaskKind::Dehaze: return Degradation::Dehaze;
        case TaskKind::Desnow: return Degradation::Desnow;
        case TaskKind::LowLight: return Degradation::LowLight;
        case TaskKind::Blur: return Degradation::Blur;
        default:
            throw Error("task " + std::string(to_string(task)) + " is not a degradation");
    }
}

namespace {

Image map_channels(const Image& img, auto&& fn) {
    Image out = img;
    for (auto& byte : out.bytes()) {
        byte = clamp_round_u8(fn(static_cast<double>(byte)));
    }
    return out;
}

Image box_blur(const Image& img, int radius) {
    if (radius <= 0) {
        return img;
    }
    const int w = img.width();
    const int h = img.height();
    Image out(w, h);
    const double n = static_cast<double>((2 * radius + 1) * (2 * radius + 1));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double r = 0.0;
            double g = 0.0;
            double b = 0.0;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    const auto c = img.at(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1));
                    r += c.r;
                    g += c.g;
                    b += c.b;
                }
            }
            out.set(x, y, {clamp_round_u8(r / n), clamp_round_u8(g / n), clamp_round_u8(b / n)});
        }
    }
    return out;
}

Image add_rain(const Image& img, double intensity, Rng& rng) {
    Image out = img;
    const int w = img.width();
    const int h = img.height();
    const auto streaks = static_cast<int>(std::lround(intensity * w * h / 12.0));
    const int length = std::max(2, h / 3);
    constexpr Rgb kRain{220, 220, 230};
    for (int s = 0; s < streaks; ++s) {
        int x = rng.uniform_int(0, w - 1);
        int y = rng.uniform_int(0, h - 1);
        for (int k = 0; k < length && out.contains(x, y); ++k) {
            const auto c = out.at(x, y);
            out.set(x, y, {clamp_round_u8(0.3 * c.r + 0.7 * kRain.r),
                           clamp_round_u8(0.3 * c.g + 0.7 * kRain.g),
                           clamp_round_u8(0.3 * c.b + 0.7 * kRain.b)});
            ++y;
            if (k % 2 == 1) {
                ++x;
            }
        }
    }
    return out;
}

Image add_snow(const Image& img, double intensity, Rng& rng) {
    Image out = img;
    const int w = img.width();
    const int h = img.height();
    const auto flakes = static_cast<int>(std::lround(intensity * w * h / 10.0));
    for (int s = 0; s < flakes; ++s) {
        out.set(rng.uniform_int(0, w - 1), rng.uniform_int(0, h - 1), {255, 255, 255});
    }
    return out;
}

}  // namespace

Image degrade(const Image& img, Degradation kind, double intensity, std::uint64_t seed) {
    if (!(intensity >= 0.0 && intensity <= 1.0)) {
        throw RangeError("degradation intensity must be in [0, 1]");
    }
    Rng rng(seed);
    switch (kind) {
        case Degradation::Dehaze: {
            const double a = 0.6 * intensity;
            return map_channels(img, [a](double c) { return (1.0 - a) * c + a * 255.0; });
        }
        case Degradation::LowLight: {
            const double s = 1.0 - 0.8 * intensity;
            return map_channels(img, [s](double c) { return c * s; });
        }
        case Degradation::Blur:
            return box_blur(img, static_cast<int>(std::ceil(3.0 * intensity)));
        case Degradation::Derain:
            return add_rain(img, intensity, rng);
        case Degradation::Desnow:
            return add_snow(img, intensity, rng);
    }
    return img;
}

// ---- compositional edits ----------------------------------------------------

EditResult compositional_edit(const Scene& scene, const std::vector<EditOp>& ops,
                              std::uint64_t seed) {
    if (ops.empty() || ops.size() > 3) {
        throw DimensionError("compositional edit takes 1 to 3 operations");
    }
    EditResult result;
    result.source = render(scene);
    Scene edited = scene;
    for (const auto& op : ops) {
        if (const auto* rc = std::get_if<RecolorOp>(&op)) {
            const Rgb to = css_color(rc->color_name);
            std::string old_name;
            for (auto& obj : edited.objects) {
                if (obj.category == rc->category) {
                    old_name = obj.color_name;
                    obj.color = to;
                    obj.color_name = rc->color_name;
                }
            }
            if (old_name.empty()) {
                throw UnknownCategoryError("scene has no object of category '" + rc->category + "'");
            }
            result.description.push_back(
                {"recolor",
                 {{"category", rc->category}, {"color", rc->color_name}},
                 {{"category", rc->category}, {"color", old_name}}});
        } else if (const auto* w = std::get_if<WeatherOp>(&op)) {
            if (w->kind != Degradation::Derain && w->kind != Degradation::Desnow &&
                w->kind != Degradation::Dehaze) {
                throw RangeError("weather edit must be rain, snow or haze");
            }
            const std::string weather(to_string(w->kind));
            result.description.push_back({"weather", {{"weather", weather}}, {{"weather", weather}}});
        } else {
            result.description.push_back({"relight", {}, {}});
        }
    }
    Image target = render(edited);
    const Rng root(seed);
    for (std::size_t i = 0; i < ops.size(); ++i) {
        if (const auto* w = std::get_if<WeatherOp>(&ops[i])) {
            target = degrade(target, w->kind, w->intensity, root.split(i).seed());
        } else if (const auto* r = std::get_if<RelightOp>(&ops[i])) {
            target = degrade(target, Degradation::LowLight, r->intensity, root.split(i).seed());
        }
    }
    result.target = std::move(target);
    return result;
}

// ---- triplets ----------------------------------------------------------------

namespace {

/// Distinct categories of visible objects, in first-visible raster order.
std::vector<std::string> visible_categories(const Scene& scene) {
    std::vector<std::string> out;
    for (int y = 0; y < scene.height; ++y) {
        for (int x = 0; x < scene.width; ++x) {
            const int idx = visible_object(scene, x, y);
            if (idx < 0) {
                continue;
            }
            const auto& cat = scene.objects[static_cast<std::size_t>(idx)].category;
            if (std::find(out.begin(), out.end(), cat) == out.end()) {
                out.push_back(cat);
            }
        }
    }
    return out;
}

std::string pick(std::span<const std::string_view> items, Rng& rng) {
    return std::string(items[rng.below(items.size())]);
}

std::string op_key(std::size_t i, std::string_view field) {
    return "op" + std::to_string(i) + "." + std::string(field);
}

SlotBindings flatten(const std::vector<EditToken>& tokens, Direction dir) {
    SlotBindings out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        out[op_key(i, "tag")] = tokens[i].tag;
        const auto& b = dir == Direction::Forward ? tokens[i].forward : tokens[i].inverse;
        for (const auto& [k, v] : b) {
            out[op_key(i, k)] = v;
        }
    }
    return out;
}

/// Forward phrases follow op order; inverse phrases undo the last op first.
std::string describe_edits(const SlotBindings& flat, const TemplateGrammar& g, Rng& rng) {
    std::vector<std::pair<std::string, SlotBindings>> ops;
    for (std::size_t i = 0;; ++i) {
        const auto tag = flat.find(op_key(i, "tag"));
        if (tag == flat.end()) {
            break;
        }
        SlotBindings b;
        const std::string prefix = op_key(i, "");
        for (const auto& [k, v] : flat) {
            if (k.starts_with(prefix) && k != tag->first) {
                b[k.substr(prefix.size())] = v;
            }
        }
        ops.emplace_back(tag->second, std::move(b));
    }
    if (g.direction() == Direction::Inverse) {
        std::reverse(ops.begin(), ops.end());
    }
    std::string text;
    for (const auto& [tag, b] : ops) {
        if (!text.empty()) {
            text += ' ';
        }
        text += g.sample(rng, b, tag);
    }
    return text;
}

}  // namespace

std::pair<Triplet, Triplet> make_bidirectional_triplets(const Scene& scene, TaskKind task,
                                                        GrammarFamily family, std::uint64_t seed) {
    const Rng root(seed);
    Rng rng = root.split(0);
    Image a;
    Image b;
    SlotBindings bindings;
    SlotBindings inverse_bindings;
    bool compositional = false;

    switch (task) {
        case TaskKind::Edge:
            a = render(scene);
            b = edge_map(a);
            break;
        case TaskKind::Depth:
            a = render(scene);
            b = depth_map(scene);
            break;
        case TaskKind::SurfaceNormal:
            a = render(scene);
            b = normal_map(scene);
            break;
        case TaskKind::Segmentation:
        case TaskKind::Detection: {
            a = render(scene);
            auto cats = visible_categories(scene);
            rng.shuffle(cats.begin(), cats.end());
            const std::size_t take =
                task == TaskKind::Segmentation ? std::min<std::size_t>(cats.size(), 1 + rng.below(2)) : 1;
            const std::string color = pick(overlay_palette(), rng);
            std::map<std::string, std::string> mapping;
            std::string names;
            for (std::size_t i = 0; i < take && i < cats.size(); ++i) {
                mapping[cats[i]] = color;
                names += (i == 0 ? "" : " and ") + cats[i];
            }
            b = task == TaskKind::Segmentation ? segmentation_overlay(a, scene, mapping)
                                               : detection_overlay(a, scene, mapping, 1);
            bindings = {{"category", names}, {"color", color}};
            break;
        }
        case TaskKind::Derain:
        case TaskKind::Dehaze:
        case TaskKind::Desnow:
        case TaskKind::LowLight:
        case TaskKind::Blur: {
            b = render(scene);
            const double intensity = 0.4 + 0.6 * rng.uniform();
            a = degrade(b, degradation_for(task), intensity, root.split(1).seed());
            break;
        }
        case TaskKind::CompositionalEdit: {
            compositional = true;
            auto cats = visible_categories(scene);
            if (cats.empty()) {
                cats.push_back(scene.objects.front().category);
            }
            rng.shuffle(cats.begin(), cats.end());
            std::vector<EditOp> ops;
            const auto n_ops = 1 + rng.below(3);
            ops.push_back(RecolorOp{cats[0], pick(overlay_palette(), rng)});
            std::set<std::size_t> used_kinds;
            for (std::size_t i = 1; i < n_ops; ++i) {
                const auto kind = rng.below(3);
                if (kind == 0 && cats.size() > i && !used_kinds.contains(0)) {
                    ops.push_back(RecolorOp{cats[i], pick(overlay_palette(), rng)});
                } else if (kind == 1 && !used_kinds.contains(1)) {
                    constexpr std::array<Degradation, 3> kWeather{Degradation::Derain,
                                                                  Degradation::Desnow,
                                                                  Degradation::Dehaze};
                    ops.push_back(WeatherOp{kWeather[rng.below(3)], 0.4 + 0.4 * rng.uniform()});
                } else if (!used_kinds.contains(2)) {
                    ops.push_back(RelightOp{0.3 + 0.4 * rng.uniform()});
                    used_kinds.insert(2);
                    continue;
                } else {
                    continue;
                }
                used_kinds.insert(kind);
            }
            auto edit = compositional_edit(scene, ops, root.split(1).seed());
            a = std::move(edit.source);
            b = std::move(edit.target);
            bindings = flatten(edit.description, Direction::Forward);
            inverse_bindings = flatten(edit.description, Direction::Inverse);
            break;
        }
    }

    std::string forward_text;
    std::string inverse_text;
    const auto& gf = shipped_grammar(task, Direction::Forward, family);
    const auto& gi = shipped_grammar(task, Direction::Inverse, family);
    if (compositional) {
        Rng fr = root.split(2);
        Rng ir = root.split(3);
        forward_text = describe_edits(bindings, gf, fr);
        inverse_text = describe_edits(inverse_bindings, gi, ir);
    } else {
        auto pair = sample_instruction_pair(gf, gi, root.split(2).seed(), bindings);
        forward_text = std::move(pair.forward_text);
        inverse_text = std::move(pair.inverse_text);
        inverse_bindings = bindings;
    }

    Triplet fwd{a, std::move(forward_text), b, task, Direction::Forward, scene.seed, bindings};
    Triplet inv{std::move(b), std::move(inverse_text), std::move(a), task, Direction::Inverse,
                scene.seed, std::move(inverse_bindings)};
    return {std::move(fwd), std::move(inv)};
}

std::string resample_instruction(const Triplet& t, GrammarFamily family, std::uint64_t seed) {
    const auto& g = shipped_grammar(t.task, t.direction, family);
    Rng rng(seed);
    if (t.task == TaskKind::CompositionalEdit) {
        return describe_edits(t.bindings, g, rng);
    }
    return g.sample(rng, t.bindings);
}

}  // namespace exvis
