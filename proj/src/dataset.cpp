// SPDX-License-Identifier: Apache-2.0
#include "exvis/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "exvis/rng.hpp"
#include "json.hpp"

namespace exvis {

void DatasetSpec::validate() const {
    if (scenes < 1) {
        throw ConfigError("scenes must be >= 1");
    }
    if (tasks.empty()) {
        throw ConfigError("at least one task is required");
    }
    if (width < 8 || height < 8) {
        throw ConfigError("width and height must be >= 8");
    }
    if (min_objects < 1 || max_objects > 16 || min_objects > max_objects) {
        throw ConfigError("object counts must satisfy 1 <= min_objects <= max_objects <= 16");
    }
    if (instructions_per_pair < 1) {
        throw ConfigError("instructions_per_pair must be >= 1");
    }
}

std::vector<Triplet> generate_triplets(const DatasetSpec& spec) {
    spec.validate();
    std::vector<Triplet> out;
    out.reserve(spec.scenes * spec.tasks.size() * 2 * spec.instructions_per_pair);
    const Rng root(spec.seed);
    for (std::size_t s = 0; s < spec.scenes; ++s) {
        Rng scene_rng = root.split(s);
        const int n = scene_rng.uniform_int(spec.min_objects, spec.max_objects);
        const auto scene_seed = scene_rng.next_u64();
        const Scene scene = synth_scene(spec.width, spec.height, n, scene_seed);
        for (const auto task : spec.tasks) {
            const auto task_seed = derive_seed(scene_seed, static_cast<std::uint64_t>(task) + 1);
            auto [fwd, inv] = make_bidirectional_triplets(scene, task, spec.family, task_seed);
            out.push_back(fwd);
            out.push_back(inv);
            for (std::size_t c = 1; c < spec.instructions_per_pair; ++c) {
                const auto copy_seed = derive_seed(task_seed, 2 * c);
                fwd.instruction = resample_instruction(fwd, spec.family, copy_seed);
                inv.instruction = resample_instruction(inv, spec.family, derive_seed(copy_seed, 1));
                out.push_back(fwd);
                out.push_back(inv);
            }
        }
    }
    return out;
}

namespace {

nlohmann::ordered_json bindings_json(const SlotBindings& b) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : b) {
        j[k] = v;
    }
    return j;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw DataError("cannot write " + tmp.string());
        }
        f << text;
        if (!f) {
            throw DataError("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot read " + path.string());
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Triplet>& triplets) {
    if (triplets.size() % 2 != 0) {
        throw DataError("dataset must consist of bidirectional pairs");
    }
    std::filesystem::create_directories(dir / "images");
    std::string lines;
    for (std::size_t i = 0; i < triplets.size(); i += 2) {
        const auto& f = triplets[i];
        const auto& b = triplets[i + 1];
        if (f.direction != Direction::Forward || b.direction != Direction::Inverse ||
            f.task != b.task || !(f.source == b.target) || !(f.target == b.source)) {
            throw DataError("triplets " + std::to_string(i) + "/" + std::to_string(i + 1) +
                            " violate the swap law");
        }
        char stem[64];
        std::snprintf(stem, sizeof(stem), "images/%06zu_%s", i / 2, std::string(to_string(f.task)).c_str());
        const std::string a_path = std::string(stem) + "_a.png";
        const std::string b_path = std::string(stem) + "_b.png";
        write_png(f.source, dir / a_path);
        write_png(f.target, dir / b_path);
        for (const auto* t : {&f, &b}) {
            nlohmann::ordered_json j;
            const bool forward = t->direction == Direction::Forward;
            j["src"] = forward ? a_path : b_path;
            j["dst"] = forward ? b_path : a_path;
            j["instruction"] = t->instruction;
            j["task"] = to_string(t->task);
            j["direction"] = to_string(t->direction);
            j["scene_seed"] = t->scene_seed;
            j["bindings"] = bindings_json(t->bindings);
            lines += j.dump();
            lines += '\n';
        }
    }
    write_file_atomic(dir / "triplets.jsonl", lines);
}

std::vector<Triplet> read_dataset(const std::filesystem::path& dir) {
    const auto path = dir / "triplets.jsonl";
    if (!std::filesystem::exists(path)) {
        throw DataError("dataset not found: " + path.string());
    }
    std::istringstream in(read_file(path));
    std::map<std::string, Image> cache;
    auto image = [&](const std::string& rel) -> const Image& {
        auto it = cache.find(rel);
        if (it == cache.end()) {
            const auto p = dir / rel;
            if (!std::filesystem::exists(p)) {
                throw DataError("missing image " + p.string());
            }
            it = cache.emplace(rel, read_png(p)).first;
        }
        return it->second;
    };
    std::vector<Triplet> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            Triplet t;
            t.source = image(j.at("src").get<std::string>());
            t.target = image(j.at("dst").get<std::string>());
            t.instruction = j.at("instruction").get<std::string>();
            t.task = task_from_string(j.at("task").get<std::string>());
            t.direction = direction_from_string(j.at("direction").get<std::string>());
            t.scene_seed = j.at("scene_seed").get<std::uint64_t>();
            if (j.contains("bindings")) {
                for (const auto& [k, v] : j["bindings"].items()) {
                    t.bindings[k] = v.get<std::string>();
                }
            }
            out.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const ConfigError& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace exvis
