#pragma once

#include <string>
#include <string_view>

#include "dqp/pddl/ast.hpp"

namespace dqp::pddl {

// Supported subset: :typing, :negative-preconditions,
// :existential-preconditions (single variable), :conditional-effects.
// Identifiers are case-insensitive and normalised to lower case.
DomainDef parse_domain(std::string_view text);
ProblemDef parse_problem(std::string_view text, const DomainDef& domain);

std::string render_domain(const DomainDef& domain);
std::string render_problem(const ProblemDef& problem);
std::string render_formula(const Formula& f);

std::string read_text_file(const std::string& path);

}  // namespace dqp::pddl
