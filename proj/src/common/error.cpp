#include "parkcast/common/error.hpp"

namespace parkcast {

namespace {

std::string join_violations(const std::vector<Violation>& violations) {
  std::string out = "validation failed:";
  for (const auto& v : violations) {
    out += "\n  - [" + v.rule + "] " + v.field + ": " + v.message;
  }
  return out;
}

std::string join_ids(const std::string& what, const std::vector<int>& ids) {
  std::string out = what + " (ids:";
  for (int id : ids) out += " " + std::to_string(id);
  return out + ")";
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : InputError(join_violations(violations)), violations_(std::move(violations)) {}

AmbiguityError::AmbiguityError(const std::string& what, std::vector<int> ids)
    : Error(join_ids(what, ids)), ids_(std::move(ids)) {}

}  // namespace parkcast
