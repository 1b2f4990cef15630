#include "logcl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

namespace logcl {
namespace {

struct RawQuad {
  std::int64_t s, r, o, t;
};

bool parse_int(std::string_view tok, std::int64_t& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc{} && ptr == tok.data() + tok.size();
}

// Splits a line on blanks/tabs; returns false for blank lines.
bool tokenize(const std::string& line, std::vector<std::string_view>& toks) {
  toks.clear();
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) toks.push_back(std::string_view(line).substr(i, j - i));
    i = j;
  }
  return !toks.empty();
}

std::vector<RawQuad> read_quad_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(path.string(), 0, "missing file");
  std::vector<RawQuad> quads;
  std::string line;
  std::vector<std::string_view> toks;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!tokenize(line, toks)) continue;
    if (toks.size() < 4)
      throw DatasetError(path.string(), lineno, "expected at least 4 columns, got " +
                                                    std::to_string(toks.size()));
    RawQuad q{};
    std::int64_t* fields[4] = {&q.s, &q.r, &q.o, &q.t};
    for (int k = 0; k < 4; ++k) {
      if (!parse_int(toks[k], *fields[k]))
        throw DatasetError(path.string(), lineno,
                           "non-integer token '" + std::string(toks[k]) + "'");
    }
    if (q.s < 0 || q.r < 0 || q.o < 0 || q.t < 0)
      throw DatasetError(path.string(), lineno, "negative field");
    quads.push_back(q);
  }
  return quads;
}

void validate_ids(const std::vector<RawQuad>& quads, const std::filesystem::path& path,
                  std::int64_t num_entities, std::int64_t num_relations) {
  for (std::size_t i = 0; i < quads.size(); ++i) {
    const RawQuad& q = quads[i];
    // Line numbers here refer to data rows; blank lines are rare in practice
    // and the row index is still actionable.
    if (q.s >= num_entities || q.o >= num_entities)
      throw DatasetError(path.string(), static_cast<std::int64_t>(i + 1),
                         "entity id >= declared vocabulary size " + std::to_string(num_entities));
    if (q.r >= num_relations)
      throw DatasetError(path.string(), static_cast<std::int64_t>(i + 1),
                         "relation id >= declared vocabulary size " +
                             std::to_string(num_relations));
  }
}

std::vector<Quadruple> normalize(const std::vector<RawQuad>& raw, std::int64_t granularity) {
  std::vector<Quadruple> out;
  out.reserve(raw.size());
  for (const RawQuad& q : raw) {
    out.push_back(Quadruple{static_cast<EntityId>(q.s), static_cast<RelationId>(q.r),
                            static_cast<EntityId>(q.o), q.t / granularity});
  }
  return out;
}

}  // namespace

DatasetStats TemporalKG::stats() const {
  DatasetStats s;
  s.num_entities = num_entities;
  s.num_relations = num_relations_base;
  s.train_count = static_cast<std::int64_t>(train.size());
  s.valid_count = static_cast<std::int64_t>(valid.size());
  s.test_count = static_cast<std::int64_t>(test.size());
  s.granularity = granularity;
  s.num_snapshots = num_times();
  return s;
}

TemporalKG load_dataset(const std::filesystem::path& root, std::int64_t granularity_override) {
  const auto stat_path = root / "stat.txt";
  std::ifstream stat(stat_path);
  if (!stat) throw DatasetError(stat_path.string(), 0, "missing file");
  std::string line;
  std::vector<std::string_view> toks;
  if (!std::getline(stat, line) || !tokenize(line, toks) || toks.size() < 2)
    throw DatasetError(stat_path.string(), 1, "expected `|E| |R|`");
  std::int64_t num_entities = 0, num_relations = 0;
  if (!parse_int(toks[0], num_entities) || !parse_int(toks[1], num_relations))
    throw DatasetError(stat_path.string(), 1, "non-integer vocabulary size");
  if (num_entities <= 0 || num_relations <= 0)
    throw DatasetError(stat_path.string(), 1, "vocabulary sizes must be positive");

  const auto train_raw = read_quad_file(root / "train.txt");
  const auto valid_raw = read_quad_file(root / "valid.txt");
  const auto test_raw = read_quad_file(root / "test.txt");
  validate_ids(train_raw, root / "train.txt", num_entities, num_relations);
  validate_ids(valid_raw, root / "valid.txt", num_entities, num_relations);
  validate_ids(test_raw, root / "test.txt", num_entities, num_relations);

  std::int64_t granularity = granularity_override;
  if (granularity <= 0) {
    granularity = 0;
    for (const auto* split : {&train_raw, &valid_raw, &test_raw})
      for (const RawQuad& q : *split)
        if (q.t > 0) granularity = std::gcd(granularity, q.t);
    if (granularity == 0) granularity = 1;
  }

  TemporalKG kg;
  kg.num_entities = num_entities;
  kg.num_relations_base = num_relations;
  kg.granularity = granularity;
  kg.train = normalize(train_raw, granularity);
  kg.valid = normalize(valid_raw, granularity);
  kg.test = normalize(test_raw, granularity);

  // Union snapshots over every index 0..max_t so intermediate empty
  // timestamps exist as empty fact sets.
  TimeIndex max_t = -1;
  for (const auto* split : {&kg.train, &kg.valid, &kg.test})
    for (const Quadruple& q : *split) max_t = std::max(max_t, q.time);
  if (max_t >= 0) {
    kg.snapshots.resize(static_cast<std::size_t>(max_t + 1));
    for (std::size_t i = 0; i < kg.snapshots.size(); ++i)
      kg.snapshots[i].time = static_cast<TimeIndex>(i);
    for (const auto* split : {&kg.train, &kg.valid, &kg.test})
      for (const Quadruple& q : *split)
        kg.snapshots[static_cast<std::size_t>(q.time)].facts.push_back(
            Triple{q.subject, q.relation, q.object});
    for (Snapshot& snap : kg.snapshots) {
      std::sort(snap.facts.begin(), snap.facts.end());
      snap.facts.erase(std::unique(snap.facts.begin(), snap.facts.end()), snap.facts.end());
    }
  }
  return kg;
}

void save_dataset(const TemporalKG& kg, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  {
    std::ofstream out(root / "stat.txt");
    out << kg.num_entities << " " << kg.num_relations_base << "\n";
  }
  const std::pair<const char*, const std::vector<Quadruple>*> splits[] = {
      {"train.txt", &kg.train}, {"valid.txt", &kg.valid}, {"test.txt", &kg.test}};
  for (const auto& [name, quads] : splits) {
    std::ofstream out(root / name);
    for (const Quadruple& q : *quads)
      out << q.subject << "\t" << q.relation << "\t" << q.object << "\t" << q.time << "\n";
  }
}

std::vector<Quadruple> add_inverse(const std::vector<Quadruple>& quads,
                                   std::int64_t num_relations_base) {
  std::vector<Quadruple> out;
  out.reserve(quads.size() * 2);
  for (const Quadruple& q : quads) {
    if (q.relation >= num_relations_base)
      throw std::invalid_argument("add_inverse: relation id " + std::to_string(q.relation) +
                                  " already >= base count " + std::to_string(num_relations_base) +
                                  " (double augmentation)");
    out.push_back(q);
  }
  for (const Quadruple& q : quads)
    out.push_back(Quadruple{q.object,
                            static_cast<RelationId>(q.relation + num_relations_base), q.subject,
                            q.time});
  return out;
}

std::vector<Snapshot> build_snapshots(const std::vector<Quadruple>& quads) {
  std::vector<Quadruple> sorted = quads;
  std::sort(sorted.begin(), sorted.end(),
            [](const Quadruple& a, const Quadruple& b) { return a.time < b.time; });
  std::vector<Snapshot> out;
  for (const Quadruple& q : sorted) {
    if (out.empty() || out.back().time != q.time) {
      out.push_back(Snapshot{q.time, {}});
    }
    out.back().facts.push_back(Triple{q.subject, q.relation, q.object});
  }
  for (Snapshot& snap : out) {
    std::sort(snap.facts.begin(), snap.facts.end());
    snap.facts.erase(std::unique(snap.facts.begin(), snap.facts.end()), snap.facts.end());
  }
  return out;
}

std::span<const Snapshot> snapshot_window(std::span<const Snapshot> snapshots, TimeIndex t_q,
                                          std::int64_t m) {
  if (t_q < 1) throw std::invalid_argument("snapshot_window: t_q must be >= 1 (no history at 0)");
  if (m < 1) throw std::invalid_argument("snapshot_window: window length must be >= 1");
  const TimeIndex hi = std::min<TimeIndex>(t_q, static_cast<TimeIndex>(snapshots.size()));
  const TimeIndex lo = std::max<TimeIndex>(0, t_q - m);
  if (lo >= hi) return {};
  return snapshots.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo));
}

std::span<const Snapshot> snapshot_window(const TemporalKG& kg, TimeIndex t_q, std::int64_t m) {
  return snapshot_window(std::span<const Snapshot>(kg.snapshots), t_q, m);
}

}  // namespace logcl
