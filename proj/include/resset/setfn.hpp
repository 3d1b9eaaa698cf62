#pragma once

#include <span>

#include "resset/graph.hpp"

namespace resset {

struct SetFnConfig {
  double epsilon = 1e-6;  // smoothing factor; keeps the near-empty case finite

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("SetFnConfig: epsilon must be > 0");
  }
};

/// Normalized set encoding: relu of the element sum, divided by
/// (epsilon + norm of that sum). The empty set maps to the zero vector.
/// Elements are summed left to right in the order given; callers that need
/// bit-exact permutation invariance pass a canonical order (see
/// encode_id_set).
Value set_encode(Tape& tape, std::span<const Value> elements, const SetFnConfig& cfg, Index dim);

/// Set encoding of embedding rows selected by id. Ids are deduplicated and
/// summed in ascending order, so any permutation of the same id bag produces
/// bit-identical output.
Value encode_id_set(Value table, std::span<const int> ids, const SetFnConfig& cfg);

}  // namespace resset
