#include "resset/interaction.hpp"

#include <stdexcept>
#include <vector>

namespace resset {

InteractionMode parse_interaction(const std::string& name) {
  if (name == "subtractive") return InteractionMode::subtractive;
  if (name == "additive") return InteractionMode::additive;
  if (name == "multiplicative") return InteractionMode::multiplicative;
  if (name == "implicit") return InteractionMode::implicit;
  throw std::invalid_argument("unknown interaction mode: " + name);
}

std::string to_string(InteractionMode mode) {
  switch (mode) {
    case InteractionMode::subtractive: return "subtractive";
    case InteractionMode::additive: return "additive";
    case InteractionMode::multiplicative: return "multiplicative";
    case InteractionMode::implicit: return "implicit";
  }
  throw std::invalid_argument("unknown interaction mode");
}

Value interact(InteractionMode mode, Value table, std::span<const int> disease_rows,
               std::span<const int> treatment_rows, const SetFnConfig& cfg) {
  if (mode == InteractionMode::implicit) {
    std::vector<int> all(disease_rows.begin(), disease_rows.end());
    all.insert(all.end(), treatment_rows.begin(), treatment_rows.end());
    return square_shift(encode_id_set(table, all, cfg));
  }
  Value d = encode_id_set(table, disease_rows, cfg);
  Value p = encode_id_set(table, treatment_rows, cfg);
  switch (mode) {
    case InteractionMode::subtractive: return square_shift(sub(d, p));
    case InteractionMode::additive: return square_shift(add(d, p));
    case InteractionMode::multiplicative: return square_shift(mul(d, p));
    default: throw std::invalid_argument("unknown interaction mode");
  }
}

}  // namespace resset
