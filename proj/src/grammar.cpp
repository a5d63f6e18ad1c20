// SPDX-License-Identifier: Apache-2.0
#include "exvis/grammar.hpp"

#include <algorithm>
#include <optional>
#include <unordered_set>

#include "json.hpp"

namespace exvis {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

/// Cursor over one line with 1-based column reporting.
struct LineCursor {
    std::string_view line;
    std::size_t pos{0};
    int line_no{0};

    void skip_space() {
        while (pos < line.size() && is_space(line[pos])) {
            ++pos;
        }
    }
    bool done() const { return pos >= line.size(); }
    int column() const { return static_cast<int>(pos) + 1; }

    [[noreturn]] void fail(const std::string& what) const {
        throw GrammarError(GrammarError::Kind::Parse, line_no, column(), what);
    }

    std::string ident() {
        if (done() || !is_ident_start(line[pos])) {
            fail("expected identifier");
        }
        const auto start = pos;
        while (pos < line.size() && is_ident_char(line[pos])) {
            ++pos;
        }
        return std::string(line.substr(start, pos - start));
    }

    void expect(char c) {
        skip_space();
        if (done() || line[pos] != c) {
            fail(std::string("expected '") + c + "'");
        }
        ++pos;
    }
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

struct PendingHole {
    std::size_t skeleton;
    std::string name;
    int line;
    int column;
};

}  // namespace

bool TemplateGrammar::has_slot(std::string_view name) const noexcept {
    return std::any_of(slots_.begin(), slots_.end(), [&](const auto& s) { return s.first == name; });
}

bool TemplateGrammar::has_tag(std::string_view tag) const noexcept {
    return std::any_of(skeletons_.begin(), skeletons_.end(),
                       [&](const Skeleton& s) { return s.tag == tag; });
}

TemplateGrammar compile_grammar(TaskKind task, std::string_view source) {
    TemplateGrammar g;
    g.task_ = task;

    std::vector<PendingHole> holes;
    std::unordered_set<std::string> skeleton_texts;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= source.size()) {
        auto end = source.find('\n', start);
        if (end == std::string_view::npos) {
            end = source.size();
        }
        ++line_no;
        LineCursor cur{source.substr(start, end - start), 0, line_no};
        start = end + 1;

        cur.skip_space();
        if (cur.done() || cur.line[cur.pos] == '#') {
            continue;
        }
        const std::string keyword = cur.ident();
        if (keyword == "direction") {
            cur.expect('=');
            cur.skip_space();
            const std::string value = cur.ident();
            if (value == "forward") {
                g.direction_ = Direction::Forward;
            } else if (value == "inverse") {
                g.direction_ = Direction::Inverse;
            } else {
                cur.fail("direction must be 'forward' or 'inverse'");
            }
            cur.skip_space();
            if (!cur.done()) {
                cur.fail("trailing characters after direction");
            }
        } else if (keyword == "slot") {
            cur.skip_space();
            const int name_col = cur.column();
            std::string name = cur.ident();
            if (g.has_slot(name)) {
                throw GrammarError(GrammarError::Kind::Parse, line_no, name_col,
                                   "slot '" + name + "' defined twice");
            }
            cur.expect('=');
            std::vector<std::string> alts;
            std::size_t alt_start = cur.pos;
            for (;;) {
                auto bar = cur.line.find('|', alt_start);
                const auto alt_end = bar == std::string_view::npos ? cur.line.size() : bar;
                const auto raw = cur.line.substr(alt_start, alt_end - alt_start);
                const auto alt = trim(raw);
                if (alt.empty()) {
                    throw GrammarError(GrammarError::Kind::EmptyAlternative, line_no,
                                       static_cast<int>(alt_start) + 1,
                                       "empty alternative in slot '" + name + "'");
                }
                if (std::find(alts.begin(), alts.end(), alt) != alts.end()) {
                    throw GrammarError(GrammarError::Kind::Parse, line_no,
                                       static_cast<int>(alt_start) + 1,
                                       "duplicate alternative '" + std::string(alt) + "'");
                }
                alts.emplace_back(alt);
                if (bar == std::string_view::npos) {
                    break;
                }
                alt_start = bar + 1;
            }
            g.slots_.emplace_back(std::move(name), std::move(alts));
        } else if (keyword == "skeleton") {
            Skeleton sk;
            if (!cur.done() && cur.line[cur.pos] == ':') {
                ++cur.pos;
                sk.tag = cur.ident();
            }
            cur.expect('=');
            cur.expect('"');
            std::string literal;
            bool closed = false;
            while (!cur.done()) {
                const char c = cur.line[cur.pos];
                if (c == '"') {
                    closed = true;
                    ++cur.pos;
                    break;
                }
                if (c == '}') {
                    cur.fail("unmatched '}'");
                }
                if (c == '{') {
                    const int hole_col = cur.column();
                    ++cur.pos;
                    const std::string name = cur.ident();
                    if (cur.done() || cur.line[cur.pos] != '}') {
                        cur.fail("expected '}' closing slot hole");
                    }
                    ++cur.pos;
                    if (!literal.empty()) {
                        sk.pieces.push_back({false, std::move(literal)});
                        literal.clear();
                    }
                    sk.pieces.push_back({true, name});
                    holes.push_back({g.skeletons_.size(), name, line_no, hole_col});
                    continue;
                }
                literal.push_back(c);
                ++cur.pos;
            }
            if (!closed) {
                cur.fail("unterminated skeleton string");
            }
            cur.skip_space();
            if (!cur.done()) {
                cur.fail("trailing characters after skeleton");
            }
            if (!literal.empty()) {
                sk.pieces.push_back({false, std::move(literal)});
            }
            if (sk.pieces.empty()) {
                cur.fail("empty skeleton");
            }
            std::string key = sk.tag + '\x1f';
            for (const auto& p : sk.pieces) {
                key += (p.is_slot ? "{" + p.text + "}" : p.text);
            }
            if (!skeleton_texts.insert(key).second) {
                cur.fail("duplicate skeleton");
            }
            g.skeletons_.push_back(std::move(sk));
        } else {
            throw GrammarError(GrammarError::Kind::Parse, line_no, 1,
                               "unknown directive '" + keyword + "'");
        }
    }

    for (const auto& h : holes) {
        auto it = std::find_if(g.slots_.begin(), g.slots_.end(),
                               [&](const auto& s) { return s.first == h.name; });
        if (it == g.slots_.end()) {
            throw GrammarError(GrammarError::Kind::UndefinedSlot, h.line, h.column,
                               "undefined slot '" + h.name + "'");
        }
        auto& refs = g.skeletons_[h.skeleton].slot_refs;
        const auto idx = static_cast<std::size_t>(it - g.slots_.begin());
        if (std::find(refs.begin(), refs.end(), idx) == refs.end()) {
            refs.push_back(idx);
        }
    }
    if (g.skeletons_.empty()) {
        throw GrammarError(GrammarError::Kind::NoSkeleton, line_no, 1, "grammar has no skeleton");
    }

    g.form_count_ = 0;
    for (const auto& sk : g.skeletons_) {
        std::uint64_t n = 1;
        for (auto idx : sk.slot_refs) {
            n *= g.slots_[idx].second.size();
        }
        g.form_count_ += n;
    }
    return g;
}

std::string TemplateGrammar::render(std::size_t skeleton,
                                    const std::vector<std::size_t>& choice) const {
    const auto& sk = skeletons_.at(skeleton);
    std::string out;
    for (const auto& piece : sk.pieces) {
        if (!piece.is_slot) {
            out += piece.text;
            continue;
        }
        for (std::size_t r = 0; r < sk.slot_refs.size(); ++r) {
            const auto& slot = slots_[sk.slot_refs[r]];
            if (slot.first == piece.text) {
                out += slot.second.at(choice.at(r));
                break;
            }
        }
    }
    return out;
}

std::string TemplateGrammar::sample(Rng& rng, const SlotBindings& bindings,
                                    std::string_view tag) const {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < skeletons_.size(); ++i) {
        if (tag.empty() || skeletons_[i].tag == tag) {
            candidates.push_back(i);
        }
    }
    if (candidates.empty()) {
        throw Error("grammar has no skeleton tagged '" + std::string(tag) + "'");
    }
    const auto& sk = skeletons_[candidates[rng.below(candidates.size())]];

    std::vector<const std::string*> values(slots_.size(), nullptr);
    for (auto idx : sk.slot_refs) {
        const auto& [name, alts] = slots_[idx];
        if (auto it = bindings.find(name); it != bindings.end()) {
            values[idx] = &it->second;
        } else {
            values[idx] = &alts[rng.below(alts.size())];
        }
    }
    std::string out;
    for (const auto& piece : sk.pieces) {
        if (!piece.is_slot) {
            out += piece.text;
            continue;
        }
        for (auto idx : sk.slot_refs) {
            if (slots_[idx].first == piece.text) {
                out += *values[idx];
                break;
            }
        }
    }
    return out;
}

InstructionPair sample_instruction_pair(const TemplateGrammar& forward,
                                        const TemplateGrammar& inverse, std::uint64_t seed,
                                        const SlotBindings& bindings) {
    if (forward.task() != inverse.task()) {
        throw TaskMismatchError("instruction grammars belong to different tasks: " +
                                std::string(to_string(forward.task())) + " vs " +
                                std::string(to_string(inverse.task())));
    }
    if (forward.direction() != Direction::Forward || inverse.direction() != Direction::Inverse) {
        throw TaskMismatchError("expected a forward grammar and an inverse grammar");
    }
    const Rng root(seed);
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        Rng fwd_rng = root.split(2 * attempt);
        Rng inv_rng = root.split(2 * attempt + 1);
        InstructionPair pair{forward.sample(fwd_rng, bindings), inverse.sample(inv_rng, bindings),
                             forward.task()};
        if (!pair.forward_text.empty() && !pair.inverse_text.empty() &&
            pair.forward_text != pair.inverse_text) {
            return pair;
        }
    }
    throw Error("forward and inverse grammars keep producing identical instructions");
}

std::vector<std::string> enumerate_forms(const TemplateGrammar& g, std::size_t limit) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (std::size_t s = 0; s < g.skeletons().size() && out.size() < limit; ++s) {
        const auto& refs = g.skeletons()[s].slot_refs;
        std::vector<std::size_t> choice(refs.size(), 0);
        for (;;) {
            auto form = g.render(s, choice);
            if (seen.insert(form).second) {
                out.push_back(std::move(form));
                if (out.size() >= limit) {
                    break;
                }
            }
            // odometer, last slot fastest
            bool carry = true;
            for (std::size_t k = refs.size(); carry && k > 0; --k) {
                if (++choice[k - 1] < g.slots()[refs[k - 1]].second.size()) {
                    carry = false;
                } else {
                    choice[k - 1] = 0;
                }
            }
            if (carry) {
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kSystemText =
    "You are an expert in computer vision and describe vison tasks, with exceptional attention to "
    "detail. Your task is to provide detailed descriptions of the transformations between the "
    "images, explaining how elements appear, disappear, or change. Your analysis is thorough, "
    "accurate, and insightful.";

constexpr std::string_view kNoToolsConstraint =
    "The task descriptions should not use any additional tools or references, such as image "
    "editing tools.";

constexpr std::string_view kNoImageNamesConstraint =
    "Do not use terms like 'image A', 'image B', 'to transform * into *', or similar phrases.";

std::string_view domain_phrase(TaskKind task) {
    switch (task) {
        case TaskKind::Edge: return "edge boundary detection and edge-to-image generation";
        case TaskKind::Depth: return "monocular depth estimation and depth-to-image generation";
        case TaskKind::SurfaceNormal:
            return "surface normal estimation and normal-to-image generation";
        case TaskKind::Segmentation: return "semantic segmentation and segmentation-to-image generation";
        case TaskKind::Detection: return "object detection and box-to-image generation";
        case TaskKind::Derain: return "deraining";
        case TaskKind::Dehaze: return "dehazing";
        case TaskKind::Desnow: return "desnowing";
        case TaskKind::LowLight: return "low-light enhancement";
        case TaskKind::Blur: return "deblurring";
        case TaskKind::CompositionalEdit: return "instruction-based image editing";
    }
    return "image transformation";
}

}  // namespace

AnnotationPrompt build_annotation_prompt(TaskKind pair_kind, bool include_captions,
                                         bool include_domain_hint) {
    AnnotationPrompt p;
    p.system_text = std::string(kSystemText);
    if (include_captions) {
        p.required_json_keys = {std::string(kKeyCaptionA), std::string(kKeyCaptionB)};
    }
    p.required_json_keys.emplace_back(kKeyAtoB);
    p.required_json_keys.emplace_back(kKeyBtoA);
    p.constraints = {std::string(kNoToolsConstraint), std::string(kNoImageNamesConstraint)};

    std::string user;
    if (include_domain_hint) {
        user += "We are currently working on tasks related to ";
        user += domain_phrase(pair_kind);
        user += ". ";
    }
    user += "Define the first image as A, the second image as B. Task: ";
    user += include_captions ? "1) Describe these images. 2) " : "";
    user +=
        "Describe 2 scenarios: how to transform image A into image B, image B into image A "
        "without referencing the contents of the other image directly. Output format: JSON format "
        "with keys only contain ";
    for (std::size_t i = 0; i < p.required_json_keys.size(); ++i) {
        user += p.required_json_keys[i];
        user += i + 1 < p.required_json_keys.size() ? ", " : " ";
    }
    user +=
        "without any nested JSON structures. The descriptions of transformations should be as "
        "diverse as possible, either as a single paragraph or as a step-by-step description. "
        "Constraints: ";
    for (std::size_t i = 0; i < p.constraints.size(); ++i) {
        user += std::to_string(i + 1) + ") " + p.constraints[i];
        if (i + 1 < p.constraints.size()) {
            user += ' ';
        }
    }
    p.user_text = std::move(user);
    return p;
}

std::string to_json(const AnnotationPrompt& prompt) {
    nlohmann::ordered_json j;
    j["system"] = prompt.system_text;
    j["user"] = prompt.user_text;
    j["required_keys"] = prompt.required_json_keys;
    j["constraints"] = prompt.constraints;
    return j.dump(2);
}

}  // namespace exvis
