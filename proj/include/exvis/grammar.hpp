// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "exvis/errors.hpp"
#include "exvis/rng.hpp"
#include "exvis/task.hpp"

namespace exvis {

/// Compile-time failure of a grammar definition, located by line and column (1-based).
class GrammarError : public Error {
public:
    enum class Kind { Parse, EmptyAlternative, UndefinedSlot, NoSkeleton };

    GrammarError(Kind kind, int line, int column, const std::string& what)
        : Error("grammar:" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
          kind_(kind), line_(line), column_(column) {}

    Kind kind() const noexcept { return kind_; }
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    Kind kind_;
    int line_;
    int column_;
};

/// One template: literal text interleaved with slot holes.
struct Skeleton {
    struct Piece {
        bool is_slot{false};
        std::string text;  ///< literal text, or the slot name for holes
    };
    std::string tag;  ///< optional sub-family label ("" when untagged)
    std::vector<Piece> pieces;
    std::vector<std::size_t> slot_refs;  ///< distinct slot indices, in first-use order
};

/// Values pinned by the caller instead of sampled, keyed by slot name.
using SlotBindings = std::map<std::string, std::string, std::less<>>;

/// A compiled, validated instruction grammar for one task and direction.
///
/// Immutable after compilation. Every form is one skeleton with one
/// alternative chosen per referenced slot; a slot used twice in a skeleton
/// takes the same value at both holes.
class TemplateGrammar {
public:
    TaskKind task() const noexcept { return task_; }
    Direction direction() const noexcept { return direction_; }

    const std::vector<std::pair<std::string, std::vector<std::string>>>& slots() const noexcept {
        return slots_;
    }
    const std::vector<Skeleton>& skeletons() const noexcept { return skeletons_; }

    /// Σ over skeletons of Π over referenced slots of |alternatives|.
    std::uint64_t form_count() const noexcept { return form_count_; }

    bool has_slot(std::string_view name) const noexcept;
    bool has_tag(std::string_view tag) const noexcept;

    /// Samples one form: uniform skeleton (restricted to `tag` when non-empty),
    /// then independent uniform choice per unbound slot.
    std::string sample(Rng& rng, const SlotBindings& bindings = {}, std::string_view tag = {}) const;

    /// Renders the form at (skeleton, per-slot alternative indices).
    std::string render(std::size_t skeleton, const std::vector<std::size_t>& choice) const;

private:
    friend TemplateGrammar compile_grammar(TaskKind task, std::string_view source);

    TaskKind task_{};
    Direction direction_{Direction::Forward};
    std::vector<std::pair<std::string, std::vector<std::string>>> slots_;
    std::vector<Skeleton> skeletons_;
    std::uint64_t form_count_{0};
};

/// Compiles grammar-definition text.
///
/// One directive per line; blank lines and lines starting with '#' are ignored:
///
///     direction = forward | inverse
///     slot <name> = alt1 | alt2 | ...
///     skeleton = "text with {name} holes"
///     skeleton:<tag> = "..."
///
/// Throws GrammarError on parse errors, empty alternatives, holes naming an
/// undefined slot, or a grammar without skeletons.
TemplateGrammar compile_grammar(TaskKind task, std::string_view source);

struct InstructionPair {
    std::string forward_text;
    std::string inverse_text;
    TaskKind task{};
};

/// Draws a forward and an inverse instruction for the same task. The two draws
/// use independent sub-streams of `seed`; bindings apply to both grammars.
/// Throws TaskMismatchError when the grammars disagree on task or direction roles.
InstructionPair sample_instruction_pair(const TemplateGrammar& forward,
                                        const TemplateGrammar& inverse, std::uint64_t seed,
                                        const SlotBindings& bindings = {});

/// First min(limit, form_count) distinct forms, ordered by skeleton index and then
/// by slot assignment indices (last referenced slot varies fastest).
std::vector<std::string> enumerate_forms(const TemplateGrammar& g, std::size_t limit);

// ---------------------------------------------------------------------------
// Annotation prompt payloads for an external captioning/description model.

struct AnnotationPrompt {
    std::string system_text;
    std::string user_text;
    std::vector<std::string> required_json_keys;
    std::vector<std::string> constraints;
};

inline constexpr std::string_view kKeyAtoB = "Task_Descriptions_from_A_to_B";
inline constexpr std::string_view kKeyBtoA = "Task_Descriptions_from_B_to_A";
inline constexpr std::string_view kKeyCaptionA = "Image_A_Caption";
inline constexpr std::string_view kKeyCaptionB = "Image_B_Caption";

AnnotationPrompt build_annotation_prompt(TaskKind pair_kind, bool include_captions,
                                         bool include_domain_hint);

/// {"system", "user", "required_keys", "constraints"} as a JSON document.
std::string to_json(const AnnotationPrompt& prompt);

}  // namespace exvis
