#pragma once

#include <span>
#include <string>

#include "resset/setfn.hpp"

namespace resset {

/// How the disease encoding d and treatment encoding p combine into the
/// visit vector. All modes share the fixed nonlinearity (1 + delta)^2.
enum class InteractionMode {
  subtractive,     // delta = d - p
  additive,        // delta = d + p
  multiplicative,  // delta = d * p (elementwise)
  implicit,        // delta = encoding of the union bag
};

InteractionMode parse_interaction(const std::string& name);
std::string to_string(InteractionMode mode);

/// Visit-level interaction over global embedding-row ids. Disease and
/// treatment ids never collide (treatments are offset in the shared table),
/// so the implicit mode's union is a plain concatenation of the two id bags.
Value interact(InteractionMode mode, Value table, std::span<const int> disease_rows,
               std::span<const int> treatment_rows, const SetFnConfig& cfg);

}  // namespace resset
