#include <doctest.h>

#include <map>
#include <set>

#include "periocular/common.hpp"
#include "periocular/dataset.hpp"

using namespace periocular;

namespace {

std::vector<SampleRecord> synthetic_records(int females, int males, int images_per_subject) {
  std::vector<SampleRecord> out;
  for (int s = 0; s < females + males; ++s) {
    for (int i = 0; i < images_per_subject; ++i) {
      SampleRecord r;
      r.subject_id = "s" + std::to_string(s);
      r.image_path = r.subject_id + "_" + std::to_string(i) + ".pgm";
      r.gender = s < females ? Gender::female : Gender::male;
      r.eye = i % 2 ? Eye::right : Eye::left;
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("load_manifest parses rows in order") {
  const auto recs = load_manifest(
      "path,subject_id,gender,eye,session,cx,cy,r\r\n"
      "a.pgm,s1,F,left,2019,,,\r\n"
      "b.pgm,s2,male,R,,60,80,20\r\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].image_path == "a.pgm");
  CHECK(recs[0].gender == Gender::female);
  CHECK(recs[0].eye == Eye::left);
  CHECK(recs[0].session == "2019");
  CHECK_FALSE(recs[0].occlusion.has_value());
  CHECK(recs[1].gender == Gender::male);
  CHECK(recs[1].eye == Eye::right);
  CHECK_FALSE(recs[1].session.has_value());
  CHECK(recs[1].occlusion == OcclusionCircle{60, 80, 20});
}

TEST_CASE("load_manifest errors carry the row number") {
  const std::string header = "path,subject_id,gender,eye,session,cx,cy,r\n";
  try {
    load_manifest(header + "a.pgm,s1,X,left,,,,\n");
    FAIL("expected error");
  } catch (const LoadError& e) {
    CHECK(e.row() == 2);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_manifest(header + "a.pgm,s1,f,left,,,,\na.pgm,s2,m,left,,,,\n"), LoadError);
  CHECK_THROWS_AS(load_manifest(header + ",s1,f,left,,,,\n"), LoadError);
  CHECK_THROWS_AS(load_manifest(header + "a.pgm,s1,f,left,,1,2,\n"), LoadError);
  CHECK_THROWS_AS(load_manifest("file,subject\n"), LoadError);
}

TEST_CASE("manifest write/load round trip") {
  auto recs = synthetic_records(3, 2, 2);
  recs[1].occlusion = OcclusionCircle{60.5, 80.25, 21};
  recs[2].session = "s,1";
  CHECK(load_manifest(write_manifest(recs)) == recs);
}

TEST_CASE("make_split on 5F/5M with k=3") {
  const auto recs = synthetic_records(5, 5, 3);
  const auto plan = make_split(recs, 0.6, 3, 42);
  CHECK(plan.train_subjects.size() == 6);
  CHECK(plan.test_subjects.size() == 4);
  REQUIRE(plan.folds.size() == 3);
  std::set<std::string> covered;
  for (const auto& f : plan.folds) covered.insert(f.validation.begin(), f.validation.end());
  CHECK(covered == std::set<std::string>(plan.train_subjects.begin(), plan.train_subjects.end()));
  int train_f = 0;
  for (const auto& s : plan.train_subjects) train_f += std::stoi(s.substr(1)) < 5;
  CHECK(train_f == 3);
  CHECK(make_split(recs, 0.6, 3, 42) == plan);
}

TEST_CASE("make_split argument errors") {
  const auto recs = synthetic_records(5, 5, 1);
  CHECK_THROWS_AS(make_split(recs, 0.6, 5, 1), ArgumentError);
  CHECK_THROWS_AS(make_split(recs, 1.0, 2, 1), ArgumentError);
  CHECK_THROWS_AS(make_split(recs, 0.6, 1, 1), ArgumentError);
}

TEST_CASE("200-subject split puts every image entirely on one side") {
  const auto recs = synthetic_records(100, 100, 4);
  const auto plan = make_split(recs, 0.6, 5, 2024);
  const std::set<std::string> train(plan.train_subjects.begin(), plan.train_subjects.end());
  const std::set<std::string> test(plan.test_subjects.begin(), plan.test_subjects.end());
  std::map<std::string, std::set<int>> sides;
  for (const auto& r : recs) {
    const int side = train.count(r.subject_id) ? 0 : (test.count(r.subject_id) ? 1 : 2);
    sides[r.subject_id].insert(side);
  }
  for (const auto& [subject, s] : sides) {
    CHECK(s.size() == 1);
    CHECK(*s.begin() != 2);
  }
  CHECK(train.size() == 120);
}

TEST_CASE("split properties over random manifests") {
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const int females = 8 + static_cast<int>(rng.index(40));
    const int males = 8 + static_cast<int>(rng.index(40));
    auto recs = synthetic_records(females, males, 1 + static_cast<int>(rng.index(3)));
    rng.shuffle(recs);
    const int k = 2 + static_cast<int>(rng.index(2));
    const double fraction = rng.uniform(0.5, 0.8);
    const std::uint64_t seed = rng.next();
    const auto plan = make_split(recs, fraction, k, seed);
    CHECK_NOTHROW(audit_split(plan));
    for (const auto& f : plan.folds) {
      std::set<std::string> a(f.train.begin(), f.train.end());
      for (const auto& v : f.validation) CHECK_FALSE(a.count(v));
      CHECK(f.train.size() + f.validation.size() == plan.train_subjects.size());
    }
    // Gender balance within one subject's worth.
    int train_f = 0;
    for (const auto& s : plan.train_subjects) train_f += std::stoi(s.substr(1)) < females;
    const double n_train = static_cast<double>(plan.train_subjects.size());
    const double global = static_cast<double>(females) / (females + males);
    CHECK(std::abs(train_f / n_train - global) <= 1.0 / n_train + 1e-12);
    CHECK(make_split(recs, fraction, k, seed) == plan);
  }
}

TEST_CASE("split plan JSON round trip") {
  const auto plan = make_split(synthetic_records(8, 9, 2), 0.6, 3, 17);
  const auto text = split_to_json(plan);
  CHECK(text.find("\"version\": 1") != std::string::npos);
  CHECK(split_from_json(text) == plan);
  CHECK_THROWS_AS(split_from_json("{\"version\": 2}"), DataError);
}

TEST_CASE("subjects with conflicting genders are rejected") {
  auto recs = synthetic_records(3, 3, 1);
  recs.push_back(recs[0]);
  recs.back().image_path = "other.pgm";
  recs.back().gender = Gender::male;
  CHECK_THROWS_AS(make_split(recs, 0.6, 2, 1), DataError);
}
