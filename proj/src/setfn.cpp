#include "resset/setfn.hpp"

#include <algorithm>
#include <vector>

#include "resset/codespace.hpp"

namespace resset {

Value set_encode(Tape& tape, std::span<const Value> elements, const SetFnConfig& cfg,
                 Index dim) {
  cfg.validate();
  if (elements.empty()) return tape.zeros(dim);
  for (const Value& e : elements) {
    if (!e.tensor().is_vector() || e.rows() != dim)
      throw std::invalid_argument("set_encode: mixed element dimensions");
  }
  Value rectified = relu(add_chain(elements));
  Value denom = add(l2norm(rectified), tape.constant(Tensor::scalar(cfg.epsilon)));
  return scalar_div(rectified, denom);
}

Value encode_id_set(Value table, std::span<const int> ids, const SetFnConfig& cfg) {
  std::vector<int> canonical(ids.begin(), ids.end());
  std::sort(canonical.begin(), canonical.end());
  canonical.erase(std::unique(canonical.begin(), canonical.end()), canonical.end());
  std::vector<Value> rows = lookup(table, canonical);
  return set_encode(*table.tape, rows, cfg, table.tensor().cols());
}

}  // namespace resset
