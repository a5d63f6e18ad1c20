// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include "exvis/grammar.hpp"

namespace exvis {

/// Two disjoint phrasing families per (task, direction). Family A is the
/// training family; family B only ever appears at evaluation time.
enum class GrammarFamily { A, B };

std::string_view to_string(GrammarFamily family);
GrammarFamily grammar_family_from_string(std::string_view name);

/// Grammar definition text as shipped (registry slots expanded).
std::string grammar_source(TaskKind task, Direction dir, GrammarFamily family);

/// Compiled shipped grammar. Compiled once, then shared read-only.
const TemplateGrammar& shipped_grammar(TaskKind task, Direction dir,
                                       GrammarFamily family = GrammarFamily::A);

}  // namespace exvis
