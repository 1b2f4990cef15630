#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "logcl/dataset.hpp"

using namespace logcl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("logcl_ds_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

std::vector<Quadruple> sorted_copy(std::vector<Quadruple> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("load_dataset normalizes raw times by inferred granularity") {
  TempDir dir;
  write_file(dir.path / "stat.txt", "10 4\n");
  write_file(dir.path / "train.txt",
             "0 1 2 0\n"
             "1 2 3 24\n"
             "2 0 4 24\n"
             "3 3 5 48\n"
             "4 1 6 48\n");
  write_file(dir.path / "valid.txt", "");
  write_file(dir.path / "test.txt", "");

  TemporalKG kg = load_dataset(dir.path);
  CHECK(kg.granularity == 24);
  CHECK(kg.num_entities == 10);
  CHECK(kg.num_relations_base == 4);
  REQUIRE(kg.train.size() == 5);
  CHECK(kg.train[0].time == 0);
  CHECK(kg.train[1].time == 1);
  CHECK(kg.train[3].time == 2);
  CHECK(kg.num_times() == 3);
}

TEST_CASE("load_dataset accepts empty train but requires stat") {
  TempDir dir;
  write_file(dir.path / "train.txt", "");
  write_file(dir.path / "valid.txt", "0 0 1 0\n");
  write_file(dir.path / "test.txt", "0 0 1 1\n");

  CHECK_THROWS_AS(load_dataset(dir.path), DatasetError);  // stat.txt absent

  write_file(dir.path / "stat.txt", "2 1\n");
  TemporalKG kg = load_dataset(dir.path);
  CHECK(kg.train.empty());
  CHECK(kg.valid.size() == 1);
}

TEST_CASE("load_dataset ignores extra trailing columns") {
  TempDir dir;
  write_file(dir.path / "stat.txt", "5 2\n");
  write_file(dir.path / "train.txt", "0 1 2 0 99\n1 0 3 1 98 97\n");
  write_file(dir.path / "valid.txt", "");
  write_file(dir.path / "test.txt", "");
  TemporalKG kg = load_dataset(dir.path);
  REQUIRE(kg.train.size() == 2);
  CHECK(kg.train[1] == Quadruple{1, 0, 3, 1});
}

TEST_CASE("load_dataset reports file and line for bad tokens and ids") {
  TempDir dir;
  write_file(dir.path / "stat.txt", "5 2\n");
  write_file(dir.path / "valid.txt", "");
  write_file(dir.path / "test.txt", "");

  SUBCASE("non-integer token") {
    write_file(dir.path / "train.txt", "0 1 2 0\n0 x 2 0\n");
    try {
      load_dataset(dir.path);
      FAIL("expected DatasetError");
    } catch (const DatasetError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("train.txt") != std::string::npos);
    }
  }
  SUBCASE("entity id beyond vocabulary") {
    write_file(dir.path / "train.txt", "0 1 7 0\n");
    CHECK_THROWS_AS(load_dataset(dir.path), DatasetError);
  }
  SUBCASE("relation id beyond vocabulary") {
    write_file(dir.path / "train.txt", "0 3 1 0\n");
    CHECK_THROWS_AS(load_dataset(dir.path), DatasetError);
  }
}

TEST_CASE("load_dataset materializes empty intermediate snapshots") {
  TempDir dir;
  write_file(dir.path / "stat.txt", "4 2\n");
  write_file(dir.path / "train.txt", "0 0 1 0\n");
  write_file(dir.path / "valid.txt", "1 1 2 3\n");
  write_file(dir.path / "test.txt", "");
  TemporalKG kg = load_dataset(dir.path, /*granularity_override=*/1);
  CHECK(kg.num_times() == 4);
  CHECK(kg.snapshots[1].facts.empty());
  CHECK(kg.snapshots[2].facts.empty());
  CHECK(kg.snapshots[3].facts.size() == 1);
}

TEST_CASE("dataset round-trips through save_dataset") {
  TempDir dir;
  write_file(dir.path / "stat.txt", "6 3\n");
  write_file(dir.path / "train.txt", "0 1 2 0\n0 1 2 0\n3 2 4 24\n");
  write_file(dir.path / "valid.txt", "1 0 5 48\n");
  write_file(dir.path / "test.txt", "2 2 0 72\n");
  TemporalKG kg = load_dataset(dir.path);

  TempDir out;
  save_dataset(kg, out.path);
  TemporalKG kg2 = load_dataset(out.path);
  CHECK(sorted_copy(kg.train) == sorted_copy(kg2.train));
  CHECK(sorted_copy(kg.valid) == sorted_copy(kg2.valid));
  CHECK(sorted_copy(kg.test) == sorted_copy(kg2.test));
  CHECK(kg.num_entities == kg2.num_entities);
  CHECK(kg.num_relations_base == kg2.num_relations_base);
}

TEST_CASE("add_inverse appends mirrored quadruples after the originals") {
  std::vector<Quadruple> in{{0, 1, 2, 5}};
  auto out = add_inverse(in, 230);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == Quadruple{0, 1, 2, 5});
  CHECK(out[1] == Quadruple{2, 231, 0, 5});

  CHECK(add_inverse({}, 10).empty());
  CHECK_THROWS_AS(add_inverse(out, 230), std::invalid_argument);  // double augmentation
}

TEST_CASE("add_inverse is an involution on fact content") {
  std::mt19937 rng(7);
  std::vector<Quadruple> quads;
  for (int i = 0; i < 40; ++i)
    quads.push_back(Quadruple{static_cast<EntityId>(rng() % 12),
                              static_cast<RelationId>(rng() % 5),
                              static_cast<EntityId>(rng() % 12),
                              static_cast<TimeIndex>(rng() % 6)});
  auto aug = add_inverse(quads, 5);
  REQUIRE(aug.size() == 2 * quads.size());
  // Applying the inverse map to the appended half returns the original facts.
  std::vector<Quadruple> back;
  for (std::size_t i = quads.size(); i < aug.size(); ++i) {
    const Quadruple& q = aug[i];
    back.push_back(Quadruple{q.object, static_cast<RelationId>(q.relation - 5), q.subject, q.time});
  }
  CHECK(sorted_copy(back) == sorted_copy(quads));
}

TEST_CASE("build_snapshots dedups and orders by time") {
  SUBCASE("duplicate facts collapse") {
    auto snaps = build_snapshots({{0, 1, 2, 0}, {0, 1, 2, 0}});
    REQUIRE(snaps.size() == 1);
    CHECK(snaps[0].facts.size() == 1);
  }
  SUBCASE("distinct times ascending") {
    auto snaps = build_snapshots({{0, 0, 1, 3}, {1, 0, 2, 1}, {1, 0, 2, 1}});
    REQUIRE(snaps.size() == 2);
    CHECK(snaps[0].time == 1);
    CHECK(snaps[1].time == 3);
  }
  SUBCASE("empty input") { CHECK(build_snapshots({}).empty()); }
}

TEST_CASE("snapshot union cardinality equals deduplicated quadruple count") {
  std::mt19937 rng(11);
  std::vector<Quadruple> quads;
  for (int i = 0; i < 120; ++i)
    quads.push_back(Quadruple{static_cast<EntityId>(rng() % 6), static_cast<RelationId>(rng() % 3),
                              static_cast<EntityId>(rng() % 6),
                              static_cast<TimeIndex>(rng() % 8)});
  auto snaps = build_snapshots(quads);
  std::size_t total = 0;
  for (const auto& s : snaps) total += s.facts.size();
  auto dedup = quads;
  std::sort(dedup.begin(), dedup.end());
  dedup.erase(std::unique(dedup.begin(), dedup.end()), dedup.end());
  CHECK(total == dedup.size());
}

TEST_CASE("snapshot_window slices the trailing history") {
  TemporalKG kg;
  kg.snapshots.resize(12);
  for (std::size_t i = 0; i < kg.snapshots.size(); ++i)
    kg.snapshots[i].time = static_cast<TimeIndex>(i);

  SUBCASE("interior window") {
    auto w = snapshot_window(kg, 10, 7);
    REQUIRE(w.size() == 7);
    CHECK(w.front().time == 3);
    CHECK(w.back().time == 9);
  }
  SUBCASE("truncated at history start") {
    auto w = snapshot_window(kg, 3, 7);
    REQUIRE(w.size() == 3);
    CHECK(w.front().time == 0);
    CHECK(w.back().time == 2);
  }
  SUBCASE("minimal") {
    auto w = snapshot_window(kg, 1, 1);
    REQUIRE(w.size() == 1);
    CHECK(w[0].time == 0);
  }
  SUBCASE("t_q = 0 signals no history") {
    CHECK_THROWS_AS(snapshot_window(kg, 0, 3), std::invalid_argument);
  }
  SUBCASE("never includes times at or after t_q") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      TimeIndex t_q = 1 + static_cast<TimeIndex>(rng() % 11);
      std::int64_t m = 1 + static_cast<std::int64_t>(rng() % 9);
      for (const Snapshot& s : snapshot_window(kg, t_q, m)) CHECK(s.time < t_q);
    }
  }
}
