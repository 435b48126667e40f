#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>
#include <set>

#include "iol/trajectory.hpp"

using namespace iol;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<TrajectoryRecord> random_corpus(int n, int d, std::uint64_t seed, int t_max = 8) {
  Rng rng(seed);
  std::vector<TrajectoryRecord> out;
  for (int i = 0; i < n; ++i) {
    TrajectoryRecord rec;
    rec.id = "r" + std::to_string(i);
    const int T = 1 + static_cast<int>(rng.below(t_max));
    for (int t = 0; t < T; ++t) {
      StepRecord s;
      for (int k = 0; k < d; ++k) s.x.push_back(rng.normal() * 3.0);
      s.a = rng.bernoulli(0.4) ? 1 : 0;
      s.y = rng.normal() - 0.5;
      rec.steps.push_back(std::move(s));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

bool structurally_equal(const std::vector<TrajectoryRecord>& a,
                        const std::vector<TrajectoryRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].id != b[i].id || a[i].steps.size() != b[i].steps.size()) return false;
    for (std::size_t t = 0; t < a[i].steps.size(); ++t) {
      if (a[i].steps[t].a != b[i].steps[t].a) return false;
      if (a[i].steps[t].y != b[i].steps[t].y) return false;
      if (a[i].steps[t].x != b[i].steps[t].x) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("load_jsonl parses a zero record") {
  const std::string path = temp_path("iol_zero.jsonl");
  write_text_file(path, "{\"id\":\"t0\",\"steps\":[{\"x\":[0.0,0.0],\"a\":0,\"y\":0.0}]}\n");
  auto recs = load_jsonl(path);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].id == "t0");
  CHECK(recs[0].length() == 1);
  CHECK(recs[0].context_dim() == 2);
}

TEST_CASE("load_jsonl rejects out-of-domain actions with line numbers") {
  const std::string path = temp_path("iol_bad_action.jsonl");
  write_text_file(path,
                  "{\"id\":\"ok\",\"steps\":[{\"x\":[1.0],\"a\":1,\"y\":0.5}]}\n"
                  "{\"id\":\"bad\",\"steps\":[{\"x\":[1.0],\"a\":2,\"y\":0.5}]}\n");
  CHECK_THROWS_AS(load_jsonl(path), ValidationError);
  CHECK_THROWS_WITH(load_jsonl(path), Catch::Contains("bad"));
}

TEST_CASE("load_jsonl rejects parse errors, non-finite values and dim mismatches") {
  const std::string path = temp_path("iol_bad.jsonl");
  write_text_file(path, "{not json\n");
  CHECK_THROWS_WITH(load_jsonl(path), Catch::Contains(":1"));

  write_text_file(path, "{\"id\":\"t\",\"steps\":[{\"x\":[1.0],\"a\":0,\"y\":null}]}\n");
  CHECK_THROWS_AS(load_jsonl(path), ValidationError);

  write_text_file(path,
                  "{\"id\":\"a\",\"steps\":[{\"x\":[1.0,2.0],\"a\":0,\"y\":0.0}]}\n"
                  "{\"id\":\"b\",\"steps\":[{\"x\":[1.0],\"a\":0,\"y\":0.0}]}\n");
  CHECK_THROWS_WITH(load_jsonl(path), Catch::Contains("b"));

  CHECK_THROWS_AS(load_jsonl(temp_path("iol_missing_file.jsonl")), IoError);
}

TEST_CASE("save_jsonl canonical form") {
  const std::string path = temp_path("iol_canon.jsonl");
  SECTION("empty list gives an empty file") {
    save_jsonl({}, path);
    CHECK(read_text_file(path).empty());
  }
  SECTION("single zero trajectory gives exactly one line") {
    TrajectoryRecord rec{"z", {StepRecord{{0.0, 0.0}, 0, 0.0}}};
    save_jsonl({rec}, path);
    const std::string text = read_text_file(path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    CHECK(text.back() == '\n');
  }
}

TEST_CASE("jsonl round-trip is the identity and re-serialization is byte-identical") {
  const std::string p1 = temp_path("iol_rt1.jsonl");
  const std::string p2 = temp_path("iol_rt2.jsonl");
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    auto corpus = random_corpus(100, 3, seed);
    save_jsonl(corpus, p1);
    auto loaded = load_jsonl(p1);
    REQUIRE(structurally_equal(corpus, loaded));
    save_jsonl(loaded, p2);
    CHECK(read_text_file(p1) == read_text_file(p2));
  }
}

TEST_CASE("csv round-trip matches the jsonl data") {
  const std::string path = temp_path("iol_rt.csv");
  auto corpus = random_corpus(20, 4, 9);
  save_csv(corpus, path);
  auto loaded = load_csv(path);
  CHECK(structurally_equal(corpus, loaded));
}

TEST_CASE("standardize fits moments on the fit set") {
  auto corpus = random_corpus(60, 3, 17);
  auto fit_on = corpus;
  standardize(corpus, fit_on);

  // direct moment computation over the transformed fit set
  const int d = 3;
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  double ymean = 0.0, yvar = 0.0;
  std::size_t n = 0;
  for (const auto& rec : corpus)
    for (const auto& s : rec.steps) {
      for (int i = 0; i < d; ++i) mean[i] += s.x[i];
      ymean += s.y;
      ++n;
    }
  for (auto& m : mean) m /= n;
  ymean /= n;
  for (const auto& rec : corpus)
    for (const auto& s : rec.steps) {
      for (int i = 0; i < d; ++i) var[i] += (s.x[i] - mean[i]) * (s.x[i] - mean[i]);
      yvar += (s.y - ymean) * (s.y - ymean);
    }
  for (int i = 0; i < d; ++i) {
    CHECK(std::abs(mean[i]) < 1e-9);
    CHECK(std::abs(var[i] / n - 1.0) < 1e-9);
  }
  CHECK(std::abs(ymean) < 1e-9);
  CHECK(std::abs(yvar / n - 1.0) < 1e-9);
}

TEST_CASE("standardize leaves constant features untouched") {
  std::vector<TrajectoryRecord> corpus;
  for (int i = 0; i < 5; ++i) {
    TrajectoryRecord rec{"c" + std::to_string(i), {}};
    for (int t = 0; t < 3; ++t)
      rec.steps.push_back(StepRecord{{7.5, static_cast<double>(i + t)}, 0, 1.0 * t});
    corpus.push_back(rec);
  }
  auto fit_on = corpus;
  auto params = standardize(corpus, fit_on);
  CHECK(params.x_std[0] == 1.0);
  CHECK(params.x_mean[0] == 0.0);
  for (const auto& rec : corpus)
    for (const auto& s : rec.steps) CHECK(s.x[0] == 7.5);
}

TEST_CASE("standardize is idempotent on the fit set") {
  auto corpus = random_corpus(40, 2, 31);
  auto fit = corpus;
  standardize(corpus, fit);
  auto again = corpus;
  auto params = standardize(again, corpus);
  for (double m : params.x_mean) CHECK(std::abs(m) < 1e-12);
  CHECK(std::abs(params.y_mean) < 1e-12);
}

TEST_CASE("standardize detects binary outcomes and leaves them alone") {
  auto corpus = random_corpus(30, 2, 5);
  for (auto& rec : corpus)
    for (auto& s : rec.steps) s.y = s.y > 0 ? 1.0 : 0.0;
  auto fit = corpus;
  auto params = standardize(corpus, fit);
  CHECK(params.y_binary);
  for (const auto& rec : corpus)
    for (const auto& s : rec.steps) CHECK((s.y == 0.0 || s.y == 1.0));
}

TEST_CASE("standardization round-trips through the inverse transform") {
  auto corpus = random_corpus(30, 3, 23);
  auto original = corpus;
  auto fit = corpus;
  auto params = standardize(corpus, fit);
  unstandardize(corpus, params);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    for (std::size_t t = 0; t < corpus[i].steps.size(); ++t) {
      for (int k = 0; k < 3; ++k)
        CHECK(corpus[i].steps[t].x[k] ==
              Approx(original[i].steps[t].x[k]).epsilon(1e-9).margin(1e-12));
      CHECK(corpus[i].steps[t].y == Approx(original[i].steps[t].y).epsilon(1e-9).margin(1e-12));
    }
}

TEST_CASE("split produces exact sizes and is deterministic") {
  auto corpus = random_corpus(10, 2, 3);
  auto s1 = split(corpus, 0.8, 0.1, 0.1, 7);
  CHECK(s1.train.size() == 8);
  CHECK(s1.validation.size() == 1);
  CHECK(s1.test.size() == 1);
  auto s2 = split(corpus, 0.8, 0.1, 0.1, 7);
  CHECK(s1.train[3].id == s2.train[3].id);
  CHECK(s1.test[0].id == s2.test[0].id);
}

TEST_CASE("split partitions the corpus by id for any seed") {
  auto corpus = random_corpus(37, 2, 5);
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    auto s = split(corpus, 0.5, 0.25, 0.25, seed);
    std::set<std::string> ids;
    for (const auto* part : {&s.train, &s.validation, &s.test})
      for (const auto& r : *part) CHECK(ids.insert(r.id).second);
    CHECK(ids.size() == corpus.size());
  }
}

TEST_CASE("split validates fractions") {
  auto corpus = random_corpus(5, 2, 3);
  CHECK_THROWS_AS(split(corpus, 0.5, 0.2, 0.2, 1), ValidationError);
  CHECK_THROWS_AS(split(corpus, 0.0, 0.5, 0.5, 1), ValidationError);
}
