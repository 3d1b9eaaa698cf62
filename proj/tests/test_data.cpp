#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "resset/data.hpp"

using namespace resset;

namespace {

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "resset_test_data";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  auto path = scratch_dir() / name;
  std::ofstream out(path, std::ios::trunc);
  out << text;
  out.close();
  return path.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CodeVocab dx_vocab() { return CodeVocab(CodeKind::disease, {"D0", "D1", "D2"}); }
CodeVocab tx_vocab() { return CodeVocab(CodeKind::treatment, {"T0", "T1"}); }

}  // namespace

TEST_SUITE("data") {

TEST_CASE("loads one patient per line, bags sorted and deduplicated") {
  std::string path = write_file(
      "ok.jsonl",
      R"({"id": "p0", "visits": [{"dx": ["D2", "D0", "D2"], "tx": ["T1"]}], "readmit": 1})"
      "\n"
      R"({"id": "p1", "visits": [{"dx": ["D1"]}, {"tx": ["T0", "T1"]}]})"
      "\n");
  Dataset data = load_jsonl(path, dx_vocab(), tx_vocab());
  REQUIRE(data.size() == 2);
  CHECK(data[0].id == "p0");
  CHECK(data[0].readmit == 1);
  CHECK(data[0].visits[0].dx == std::vector<int32_t>{0, 2});
  CHECK(data[0].visits[0].tx == std::vector<int32_t>{1});
  CHECK(data[1].readmit == -1);
  CHECK(data[1].visits[0].tx.empty());
  CHECK(data[1].visits[1].dx.empty());
  CHECK(data[1].visits[1].tx == std::vector<int32_t>{0, 1});
}

TEST_CASE("unknown codes: strict mode errors, lenient mode drops and counts") {
  std::string path = write_file(
      "unk.jsonl", R"({"id": "p0", "visits": [{"dx": ["D0", "D9"], "tx": []}], "readmit": 0})"
                   "\n");
  const std::string want = path + ":1: unknown code D9";
  CHECK_THROWS_WITH_AS(load_jsonl(path, dx_vocab(), tx_vocab()), want.c_str(),
                       std::invalid_argument);
  LoadStats stats;
  Dataset data = load_jsonl(path, dx_vocab(), tx_vocab(), /*allow_unknown=*/true, &stats);
  CHECK(stats.patients == 1);
  CHECK(stats.unknown_codes == 1);
  CHECK(data[0].visits[0].dx == std::vector<int32_t>{0});
}

TEST_CASE("malformed lines name the file and line number") {
  std::string path = write_file("bad.jsonl",
                                R"({"id": "p0", "visits": [{"dx": []}]})"
                                "\nnot json at all\n");
  const std::string want = path + ":2: malformed patient record";
  CHECK_THROWS_WITH_AS(load_jsonl(path, dx_vocab(), tx_vocab()), want.c_str(),
                       std::invalid_argument);
}

TEST_CASE("records without id or visits are rejected") {
  std::string no_id = write_file("noid.jsonl", R"({"visits": [{"dx": []}]})"
                                               "\n");
  CHECK_THROWS_AS(load_jsonl(no_id, dx_vocab(), tx_vocab()), std::invalid_argument);
  std::string no_visits = write_file("novisits.jsonl", R"({"id": "p0", "visits": []})"
                                                       "\n");
  CHECK_THROWS_AS(load_jsonl(no_visits, dx_vocab(), tx_vocab()), std::invalid_argument);
}

TEST_CASE("readmit outside {0,1} is rejected") {
  std::string path = write_file("label.jsonl",
                                R"({"id": "p0", "visits": [{"dx": ["D0"]}], "readmit": 2})"
                                "\n");
  CHECK_THROWS_AS(load_jsonl(path, dx_vocab(), tx_vocab()), std::invalid_argument);
  std::string frac = write_file("labelf.jsonl",
                                R"({"id": "p0", "visits": [{"dx": ["D0"]}], "readmit": 0.5})"
                                "\n");
  CHECK_THROWS_AS(load_jsonl(frac, dx_vocab(), tx_vocab()), std::invalid_argument);
}

TEST_CASE("save then load round-trips; save is byte-stable") {
  Dataset data;
  data.push_back({"p0", {{{0, 2}, {1}}, {{1}, {}}}, 1});
  data.push_back({"p1", {{{}, {0}}}, -1});
  auto path = (scratch_dir() / "roundtrip.jsonl").string();
  save_jsonl(path, data, dx_vocab(), tx_vocab());
  Dataset back = load_jsonl(path, dx_vocab(), tx_vocab());
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "p0");
  CHECK(back[0].readmit == 1);
  CHECK(back[0].visits[0].dx == data[0].visits[0].dx);
  CHECK(back[1].readmit == -1);

  std::string first = read_file(path);
  save_jsonl(path, back, dx_vocab(), tx_vocab());
  CHECK(read_file(path) == first);
  CHECK(first.find("\"readmit\"") != std::string::npos);
  CHECK(first.find("readmit") == first.rfind("readmit"));  // only the labeled patient has one
}

TEST_CASE("truncate keeps the most recent visits") {
  Trajectory t{"p", {{{0}, {}}, {{1}, {}}, {{2}, {}}}, 0};
  Trajectory cut = truncate_to_recent(t, 2);
  REQUIRE(cut.visits.size() == 2);
  CHECK(cut.visits[0].dx == std::vector<int32_t>{1});
  CHECK(cut.visits[1].dx == std::vector<int32_t>{2});
  CHECK(cut.readmit == 0);
  CHECK(truncate_to_recent(t, 5).visits.size() == 3);
  CHECK_THROWS_AS(truncate_to_recent(t, 0), std::invalid_argument);
}

TEST_CASE("missing file is an error") {
  CHECK_THROWS_AS(load_jsonl("/nonexistent.jsonl", dx_vocab(), tx_vocab()), std::runtime_error);
}

}  // TEST_SUITE
