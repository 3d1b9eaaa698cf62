#include "resset/codespace.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "resset/rng.hpp"

namespace resset {

CodeVocab::CodeVocab(CodeKind kind, std::vector<std::string> codes)
    : kind_(kind), codes_(std::move(codes)) {
  index_.reserve(codes_.size());
  for (size_t i = 0; i < codes_.size(); ++i) {
    if (codes_[i].empty()) throw std::invalid_argument("CodeVocab: empty code string");
    auto [_, inserted] = index_.emplace(codes_[i], static_cast<Index>(i));
    if (!inserted) throw std::invalid_argument("CodeVocab: duplicate code " + codes_[i]);
  }
}

CodeVocab CodeVocab::load(const std::string& path, CodeKind kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("CodeVocab: cannot open " + path);
  std::vector<std::string> codes;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) codes.push_back(line);
  }
  return CodeVocab(kind, std::move(codes));
}

void CodeVocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("CodeVocab: cannot write " + path);
  for (const auto& c : codes_) out << c << '\n';
}

std::optional<Index> CodeVocab::id(const std::string& code) const {
  auto it = index_.find(code);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

uint64_t CodeVocab::content_hash() const {
  uint64_t h = 0xCBF29CE484222325ULL;
  auto eat = [&h](char c) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  };
  for (const auto& c : codes_) {
    for (char ch : c) eat(ch);
    eat('\n');
  }
  return h;
}

EmbeddingTable init_embeddings(Index n_disease, Index n_treatment, Index dim, uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("init_embeddings: dim must be >= 1");
  Rng rng(Rng::mix(seed, 0x9E37));
  Mat w(n_disease + n_treatment, dim);
  for (Index r = 0; r < w.rows(); ++r)
    for (Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-0.1, 0.1);
  return EmbeddingTable{Tensor(std::move(w)), n_disease, n_treatment};
}

std::vector<Value> lookup(Value table, std::span<const int> rows) {
  std::vector<Value> out;
  out.reserve(rows.size());
  for (int r : rows) {
    if (r < 0 || r >= table.tensor().rows())
      throw std::out_of_range("lookup: code id out of range");
    out.push_back(row(table, r));
  }
  return out;
}

void export_embeddings(const EmbeddingTable& table, const CodeVocab& diseases,
                       const CodeVocab& treatments, const std::string& path) {
  if (diseases.size() != table.n_disease || treatments.size() != table.n_treatment)
    throw std::invalid_argument("export_embeddings: vocab/table size mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_embeddings: cannot write " + path);

  out << "code,kind";
  for (Index c = 0; c < table.dim(); ++c) out << ",v" << c;
  out << '\n';

  char buf[32];
  auto emit_row = [&](const std::string& code, const char* kind, Index r) {
    out << code << ',' << kind;
    for (Index c = 0; c < table.dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", table.weights(r, c));
      out << ',' << buf;
    }
    out << '\n';
  };
  for (Index i = 0; i < diseases.size(); ++i)
    emit_row(diseases.code(i), "disease", table.disease_row(i));
  for (Index i = 0; i < treatments.size(); ++i)
    emit_row(treatments.code(i), "treatment", table.treatment_row(i));
  if (!out) throw std::runtime_error("export_embeddings: write failed for " + path);
}

}  // namespace resset
