#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "pdp/model.hpp"

namespace pdp {

/// Parses and validates a problem document (JSON). Expression errors name
/// the field and carry line/column within the expression text.
ProblemData parse_problem_spec(std::string_view text);
ProblemData problem_from_json(const nlohmann::json& doc);

/// Canonical form: sorted keys, canonical expression text. Parsing the
/// canonical form yields the same canonical form.
nlohmann::json problem_to_json(const ProblemData& data);
std::string canonical_text(const ProblemData& data);

std::uint64_t fnv1a64(std::string_view bytes);
/// 16 hex digits of the FNV-1a hash of the canonical text.
std::string problem_hash(const ProblemData& data);

/// `builtin:<name>` or a path to a problem file.
ProblemData load_problem(std::string_view reference);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace pdp
