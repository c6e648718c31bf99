#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "gamenet/data.hpp"
#include "gamenet/errors.hpp"
#include "test_util.hpp"

using namespace gamenet;

namespace {

Vocabularies small_vocab() {
  Vocabularies v;
  for (const char* c : {"d1", "d2", "d3"}) v.diagnosis.add(c);
  for (const char* c : {"p1", "p2"}) v.procedure.add(c);
  for (const char* c : {"m1", "m2", "m3", "m4"}) v.medication.add(c);
  return v;
}

const char* kTwoPatients =
    R"({"patient_id": "a", "visits": [{"dx": ["d1"], "px": ["p1"], "rx": ["m1", "m2"]}, {"dx": ["d2", "d3"], "px": [], "rx": ["m3"]}]})"
    "\n"
    R"({"patient_id": "b", "visits": [{"dx": ["d3"], "px": ["p2"], "rx": ["m4"]}, {"dx": ["d1"], "px": ["p1"], "rx": ["m1"]}, {"dx": [], "px": [], "rx": ["m2"]}]})"
    "\n";

}  // namespace

TEST_CASE("vocabulary is a bijection and round-trips through a file") {
  CodeVocabulary v(CodeKind::medication);
  CHECK(v.add("x") == 0);
  CHECK(v.add("y") == 1);
  CHECK(v.add("x") == 0);
  CHECK(v.size() == 2);
  CHECK(v.find("y") == 1);
  CHECK_FALSE(v.find("z").has_value());
  CHECK(v.code(1) == "y");

  test_util::TempDir dir("vocab");
  v.save(dir / "m.txt");
  CHECK(CodeVocabulary::load(dir / "m.txt", CodeKind::medication) == v);

  CHECK_THROWS_AS(CodeVocabulary(CodeKind::diagnosis, {"a", "b", "a"}), DataError);
  {
    std::ofstream(dir / "dup.txt") << "a\nb\na\n";
  }
  CHECK_THROWS_AS(CodeVocabulary::load(dir / "dup.txt", CodeKind::diagnosis), DataError);
  CHECK_THROWS_AS(CodeVocabulary::load(dir / "missing.txt", CodeKind::diagnosis), DataError);

  const auto all = small_vocab();
  all.save(dir.path());
  const auto loaded = Vocabularies::load(dir.path());
  CHECK(loaded.diagnosis == all.diagnosis);
  CHECK(loaded.procedure == all.procedure);
  CHECK(loaded.medication == all.medication);
}

TEST_CASE("code sets and multi-hot vectors") {
  CHECK(make_code_set({3, 1, 3, 0}) == CodeSet{0, 1, 3});
  const auto v = multi_hot({0, 2}, 4);
  CHECK(v.size() == 4);
  CHECK(v(0) == 1.0);
  CHECK(v(1) == 0.0);
  CHECK(v(2) == 1.0);
  CHECK_THROWS_AS(multi_hot({4}, 4), DimensionError);
}

TEST_CASE("well-formed two-patient file loads") {
  const auto vocab = small_vocab();
  const auto r = parse_records(kTwoPatients, vocab);
  REQUIRE(r.records.size() == 2);
  CHECK(r.dropped_short_patients == 0);
  CHECK(r.records[0].patient_id == "a");
  CHECK(r.records[0].visits[0].medications == CodeSet{0, 1});
  CHECK(r.records[0].visits[1].diagnoses == CodeSet{1, 2});
  CHECK(r.records[0].visits[1].procedures.empty());
  CHECK(r.records[1].visits.size() == 3);
}

TEST_CASE("single-visit patients are dropped with a warning") {
  const auto vocab = small_vocab();
  const std::string text =
      std::string(kTwoPatients) + R"({"patient_id": "c", "visits": [{"dx": ["d1"], "px": [], "rx": ["m1"]}]})" + "\n";
  const auto r = parse_records(text, vocab);
  CHECK(r.records.size() == 2);
  CHECK(r.dropped_short_patients == 1);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("dropped 1") != std::string::npos);

  const auto lenient = parse_records(text, vocab, LoadOptions{1, true});
  CHECK(lenient.records.size() == 3);
}

TEST_CASE("unknown codes and malformed lines are hard errors naming the line") {
  const auto vocab = small_vocab();
  const std::string unknown = std::string(kTwoPatients) +
                              R"({"patient_id": "c", "visits": [{"dx": [], "px": [], "rx": ["m9"]}, {"rx": ["m1"]}]})";
  try {
    parse_records(unknown, vocab);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("medication") != std::string::npos);
    CHECK(msg.find("m9") != std::string::npos);
  }
  try {
    parse_records("{\"patient_id\": \"x\", \"visits\": [\n", vocab);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_records(R"({"visits": []})", vocab), DataError);
  CHECK_THROWS_AS(parse_records(R"({"patient_id": "x", "visits": [{"dx": ["d1"], "rx": []}, {"rx": ["m1"]}]})", vocab),
                  DataError);
  CHECK(parse_records(R"({"patient_id": "x", "visits": [{"dx": ["d1"], "rx": []}, {"rx": ["m1"]}]})", vocab,
                      LoadOptions{2, false})
            .records.size() == 1);
  CHECK_THROWS_AS(load_records("/nonexistent/records.jsonl", vocab), DataError);
}

TEST_CASE("records round-trip through the file format") {
  const auto vocab = small_vocab();
  test_util::TempDir dir("records");
  const auto original = parse_records(kTwoPatients, vocab).records;
  save_records(dir / "r.jsonl", original, vocab);
  const auto again = load_records(dir / "r.jsonl", vocab).records;
  CHECK(again == original);

  std::mt19937_64 rng(4);
  Vocabularies big;
  for (int i = 0; i < 20; ++i) big.diagnosis.add("D" + std::to_string(i));
  for (int i = 0; i < 10; ++i) big.procedure.add("P" + std::to_string(i));
  for (int i = 0; i < 15; ++i) big.medication.add("M" + std::to_string(i));
  std::vector<PatientRecord> random;
  for (int p = 0; p < 30; ++p) {
    auto rec = test_util::random_patient("p" + std::to_string(p), 2 + p % 3, 20, 10, 15, rng);
    for (auto& v : rec.visits) {
      if (v.medications.empty()) v.medications = {0};
    }
    random.push_back(rec);
  }
  save_records(dir / "big.jsonl", random, big);
  CHECK(load_records(dir / "big.jsonl", big).records == random);
}

TEST_CASE("split sizes and partition") {
  auto cohort = [](std::size_t n) {
    std::vector<PatientRecord> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({std::to_string(i), {}});
    return out;
  };
  const auto six = split_dataset(cohort(6), 1);
  CHECK(six.train.size() == 4);
  CHECK(six.validation.size() == 1);
  CHECK(six.test.size() == 1);

  const auto big = split_dataset(cohort(6350), 1);
  CHECK(big.train.size() == 4233);
  CHECK(big.validation.size() == 1058);
  CHECK(big.test.size() == 1059);

  std::set<std::string> ids;
  for (const auto* part : {&big.train, &big.validation, &big.test}) {
    for (const auto& p : *part) CHECK(ids.insert(p.patient_id).second);
  }
  CHECK(ids.size() == 6350);

  const auto again = split_dataset(cohort(6350), 1);
  CHECK(again.test == big.test);
  CHECK_FALSE(split_dataset(cohort(6350), 2).test == big.test);
  CHECK_THROWS_AS(split_dataset(cohort(5), 1), std::invalid_argument);

  for (std::size_t n = 6; n < 200; ++n) {
    const auto s = split_dataset(cohort(n), n);
    const double third = static_cast<double>(n) / 6.0;
    CHECK(std::abs(static_cast<double>(s.train.size()) - 4 * third) <= 1.0);
    CHECK(std::abs(static_cast<double>(s.validation.size()) - third) <= 1.0);
    CHECK(std::abs(static_cast<double>(s.test.size()) - third) <= 1.0);
  }
}
