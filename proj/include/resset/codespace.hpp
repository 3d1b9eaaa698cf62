#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "resset/graph.hpp"
#include "resset/tensor.hpp"

namespace resset {

enum class CodeKind { disease, treatment };

/// Ordered vocabulary of opaque code strings; id i is the i-th code.
class CodeVocab {
 public:
  CodeVocab() = default;
  CodeVocab(CodeKind kind, std::vector<std::string> codes);

  static CodeVocab load(const std::string& path, CodeKind kind);
  void save(const std::string& path) const;

  CodeKind kind() const { return kind_; }
  Index size() const { return static_cast<Index>(codes_.size()); }
  const std::string& code(Index id) const { return codes_.at(static_cast<size_t>(id)); }
  std::optional<Index> id(const std::string& code) const;

  /// FNV-1a over the code list; model files refuse to load against a
  /// vocabulary with a different hash.
  uint64_t content_hash() const;

 private:
  CodeKind kind_ = CodeKind::disease;
  std::vector<std::string> codes_;
  std::unordered_map<std::string, Index> index_;
};

/// One matrix holding both code kinds in a common space: disease rows first,
/// treatment rows offset by the disease count. The shared space is what makes
/// the implicit (union) interaction a single set encoding.
struct EmbeddingTable {
  Tensor weights;  // (n_disease + n_treatment) x dim
  Index n_disease = 0;
  Index n_treatment = 0;

  Index dim() const { return weights.cols(); }
  Index rows() const { return weights.rows(); }
  Index disease_row(Index disease_id) const { return disease_id; }
  Index treatment_row(Index treatment_id) const { return n_disease + treatment_id; }
};

/// Rows i.i.d. uniform on [-0.1, 0.1]; deterministic in the seed.
EmbeddingTable init_embeddings(Index n_disease, Index n_treatment, Index dim, uint64_t seed);

/// Differentiable views of the requested rows of an on-tape table leaf.
/// Backward touches only the looked-up rows.
std::vector<Value> lookup(Value table, std::span<const int> rows);

/// CSV export (`code,kind,v0..v{n-1}`) at full double precision.
void export_embeddings(const EmbeddingTable& table, const CodeVocab& diseases,
                       const CodeVocab& treatments, const std::string& path);

}  // namespace resset
