#include "resset/data.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace resset {

namespace {

using nlohmann::json;

std::vector<int32_t> parse_bag(const json& arr, const CodeVocab& vocab, bool allow_unknown,
                               LoadStats* stats, const std::string& where) {
  std::vector<int32_t> ids;
  ids.reserve(arr.size());
  for (const auto& entry : arr) {
    if (!entry.is_string()) throw std::invalid_argument(where + ": code must be a string");
    auto id = vocab.id(entry.get<std::string>());
    if (!id) {
      if (!allow_unknown) {
        throw std::invalid_argument(where + ": unknown code " + entry.get<std::string>());
      }
      if (stats) ++stats->unknown_codes;
      continue;
    }
    ids.push_back(static_cast<int32_t>(*id));
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace

Dataset load_jsonl(const std::string& path, const CodeVocab& diseases,
                   const CodeVocab& treatments, bool allow_unknown, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_jsonl: cannot open " + path);
  Dataset data;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw std::invalid_argument(where + ": malformed patient record");
    }
    Trajectory t;
    if (!j.contains("id") || !j["id"].is_string()) {
      throw std::invalid_argument(where + ": missing id");
    }
    t.id = j["id"].get<std::string>();
    if (!j.contains("visits") || !j["visits"].is_array() || j["visits"].empty()) {
      throw std::invalid_argument(where + ": missing visits");
    }
    for (const auto& v : j["visits"]) {
      Visit visit;
      if (v.contains("dx")) visit.dx = parse_bag(v["dx"], diseases, allow_unknown, stats, where);
      if (v.contains("tx")) visit.tx = parse_bag(v["tx"], treatments, allow_unknown, stats, where);
      t.visits.push_back(std::move(visit));
    }
    if (j.contains("readmit")) {
      if (!j["readmit"].is_number_integer()) {
        throw std::invalid_argument(where + ": readmit must be 0 or 1");
      }
      int y = j["readmit"].get<int>();
      if (y != 0 && y != 1) throw std::invalid_argument(where + ": readmit must be 0 or 1");
      t.readmit = y;
    }
    data.push_back(std::move(t));
    if (stats) ++stats->patients;
  }
  return data;
}

void save_jsonl(const std::string& path, const Dataset& data, const CodeVocab& diseases,
                const CodeVocab& treatments) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_jsonl: cannot open " + path);
  for (const Trajectory& t : data) {
    json visits = json::array();
    for (const Visit& v : t.visits) {
      json dx = json::array();
      for (int32_t id : v.dx) dx.push_back(diseases.code(id));
      json tx = json::array();
      for (int32_t id : v.tx) tx.push_back(treatments.code(id));
      visits.push_back(json{{"dx", std::move(dx)}, {"tx", std::move(tx)}});
    }
    json j{{"id", t.id}, {"visits", std::move(visits)}};
    if (t.readmit >= 0) j["readmit"] = t.readmit;
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("save_jsonl: write failed for " + path);
}

Trajectory truncate_to_recent(const Trajectory& t, size_t max_visits) {
  if (max_visits == 0) throw std::invalid_argument("truncate_to_recent: max_visits must be >= 1");
  if (t.visits.size() <= max_visits) return t;
  Trajectory out;
  out.id = t.id;
  out.readmit = t.readmit;
  out.visits.assign(t.visits.end() - static_cast<ptrdiff_t>(max_visits), t.visits.end());
  return out;
}

}  // namespace resset
