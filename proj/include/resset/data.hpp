#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "resset/codespace.hpp"

namespace resset {

/// One admission: the disease codes recorded and the treatments given,
/// as vocabulary ids, each bag sorted ascending and duplicate-free.
struct Visit {
  std::vector<int32_t> dx;
  std::vector<int32_t> tx;
};

/// One patient's record. readmit is -1 when the label is absent
/// (prediction inputs); consumers that need labels must check.
struct Trajectory {
  std::string id;
  std::vector<Visit> visits;
  int readmit = -1;
};

using Dataset = std::vector<Trajectory>;

struct LoadStats {
  size_t patients = 0;
  size_t unknown_codes = 0;  // dropped code strings (lenient mode only)
};

/// Reads one patient per line: {"id": "...", "visits": [{"dx": [...], "tx":
/// [...]}], "readmit": 0|1}. Code strings are mapped through the vocabs and
/// each bag is sorted and deduplicated. Unknown codes are an error unless
/// allow_unknown, in which case they are dropped and counted.
Dataset load_jsonl(const std::string& path, const CodeVocab& diseases,
                   const CodeVocab& treatments, bool allow_unknown = false,
                   LoadStats* stats = nullptr);

/// Inverse of load_jsonl; lines are emitted in dataset order with sorted keys,
/// so equal datasets serialize to identical bytes.
void save_jsonl(const std::string& path, const Dataset& data, const CodeVocab& diseases,
                const CodeVocab& treatments);

/// The last max_visits visits (the whole record when shorter).
Trajectory truncate_to_recent(const Trajectory& t, size_t max_visits);

}  // namespace resset
