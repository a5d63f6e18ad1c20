// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "exvis/grammar_library.hpp"
#include "exvis/synth.hpp"

namespace exvis {

struct DatasetSpec {
    std::size_t scenes{16};
    std::vector<TaskKind> tasks{TaskKind::Edge};
    int width{8};
    int height{8};
    int min_objects{1};
    int max_objects{3};
    GrammarFamily family{GrammarFamily::A};
    std::uint64_t seed{0};
    /// Each image pair is emitted this many times, every copy after the first
    /// with freshly sampled instructions.
    std::size_t instructions_per_pair{1};

    /// Throws ConfigError on invalid values.
    void validate() const;
};

/// Bidirectional triplets ordered by (scene, task, copy, direction).
std::vector<Triplet> generate_triplets(const DatasetSpec& spec);

/// Writes triplets.jsonl and images/ under dir. Consecutive (forward, inverse)
/// pairs share their two PNG files. Throws DataError when a pair breaks the
/// swap law.
void write_dataset(const std::filesystem::path& dir, const std::vector<Triplet>& triplets);

/// Reads triplets.jsonl and its PNGs. Throws DataError for missing files or
/// malformed lines.
std::vector<Triplet> read_dataset(const std::filesystem::path& dir);

/// Writes `text` to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

}  // namespace exvis
