#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "logcl/types.hpp"

namespace logcl {

// Parse/validation failure, carrying the offending file and line when known.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(std::string file, std::int64_t line, const std::string& what)
      : std::runtime_error(file + (line > 0 ? ":" + std::to_string(line) : "") + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const { return file_; }
  std::int64_t line() const { return line_; }

 private:
  std::string file_;
  std::int64_t line_;
};

struct DatasetStats {
  std::int64_t num_entities = 0;
  std::int64_t num_relations = 0;
  std::int64_t train_count = 0;
  std::int64_t valid_count = 0;
  std::int64_t test_count = 0;
  std::int64_t granularity = 1;
  std::int64_t num_snapshots = 0;
};

// An integer-coded quadruple store: split lists plus time-indexed snapshots of
// the union. Snapshot indices are consecutive; timestamps with no facts are
// materialized as empty snapshots so window arithmetic stays uniform.
// Immutable after construction; safe for concurrent readers.
struct TemporalKG {
  std::vector<Snapshot> snapshots;  // one per TimeIndex 0..num_times()-1, original orientation
  std::int64_t num_entities = 0;
  std::int64_t num_relations_base = 0;
  std::int64_t granularity = 1;
  std::vector<Quadruple> train;
  std::vector<Quadruple> valid;
  std::vector<Quadruple> test;

  std::int64_t num_times() const { return static_cast<std::int64_t>(snapshots.size()); }
  DatasetStats stats() const;
};

// Reads train.txt/valid.txt/test.txt (rows `s r o t`, extra trailing columns
// ignored) and stat.txt (`|E| |R|`) from `root`. Raw timestamps are divided by
// the time granularity; when `granularity_override` is 0 the granularity is
// inferred as the gcd of the positive raw timestamps across all splits.
TemporalKG load_dataset(const std::filesystem::path& root, std::int64_t granularity_override = 0);

// Writes a TemporalKG back in the same file format (used by `prepare` to cache
// normalized datasets; re-loading yields identical split multisets).
void save_dataset(const TemporalKG& kg, const std::filesystem::path& root);

// Appends (o, r + num_relations_base, s, t) for every (s, r, o, t). Original
// order is preserved ahead of the appended inverses. Throws std::invalid_argument
// if any relation id is already >= num_relations_base.
std::vector<Quadruple> add_inverse(const std::vector<Quadruple>& quads,
                                   std::int64_t num_relations_base);

// Groups quadruples into one snapshot per distinct time, ascending, with
// duplicate facts removed.
std::vector<Snapshot> build_snapshots(const std::vector<Quadruple>& quads);

// Snapshots at indices max(0, t_q - m) .. t_q - 1, ascending (length <= m).
// Throws std::invalid_argument when t_q < 1: a query at time 0 has no history
// and the caller decides the fallback.
std::span<const Snapshot> snapshot_window(const TemporalKG& kg, TimeIndex t_q, std::int64_t m);
std::span<const Snapshot> snapshot_window(std::span<const Snapshot> snapshots, TimeIndex t_q,
                                          std::int64_t m);

}  // namespace logcl
