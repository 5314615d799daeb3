#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace umc {

struct FieldSpec {
  std::string name;
  std::size_t vocabulary_size = 1;

  friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

/// Ordered categorical fields. Id 0 of every field is reserved for
/// "unknown": values at or beyond the vocabulary map there on load.
class FieldSchema {
 public:
  FieldSchema() = default;
  explicit FieldSchema(std::vector<FieldSpec> fields, std::optional<std::string> group_field = {});

  std::size_t size() const { return fields_.size(); }
  const std::vector<FieldSpec>& fields() const { return fields_; }
  const FieldSpec& field(std::size_t i) const { return fields_.at(i); }
  std::optional<std::size_t> index_of(std::string_view name) const;

  /// Column whose values group samples for GAUC. Unset means the dedicated
  /// `group` column is used when the file has one.
  const std::optional<std::string>& group_field() const { return group_field_; }

  friend bool operator==(const FieldSchema&, const FieldSchema&) = default;

 private:
  std::vector<FieldSpec> fields_;
  std::optional<std::string> group_field_;
};

/// Reads a schema file: one `field <name> <vocabulary_size>` per line plus an
/// optional `group <name>` line. `#` starts a comment.
FieldSchema load_schema(const std::filesystem::path& path);
void save_schema(const FieldSchema& schema, const std::filesystem::path& path);

struct Sample {
  std::vector<std::int32_t> features;
  int label = 0;
  double score = 0.5;
  std::optional<std::uint32_t> group;  ///< index into Dataset::group_tokens()
  std::optional<double> true_p;
  std::size_t timestamp_index = 0;
};

/// Immutable-after-load prediction log. Samples keep source row order.
class Dataset {
 public:
  Dataset() = default;
  Dataset(FieldSchema schema, std::vector<Sample> samples, std::vector<std::string> group_tokens = {});

  const FieldSchema& schema() const { return schema_; }
  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::vector<std::string>& group_tokens() const { return group_tokens_; }

  bool has_groups() const;
  bool has_true_p() const;

  std::vector<double> scores() const;
  std::vector<double> labels() const;
  std::vector<std::int32_t> field_column(std::size_t field) const;
  /// Group index per row; throws SchemaError if any row has none.
  std::vector<std::uint32_t> group_column() const;
  /// Throws SchemaError if any row lacks true_p.
  std::vector<double> true_p_column() const;

  /// Rows [begin, end) as a new dataset sharing schema and group tokens.
  Dataset slice(std::size_t begin, std::size_t end) const;

 private:
  FieldSchema schema_;
  std::vector<Sample> samples_;
  std::vector<std::string> group_tokens_;
};

struct LoadOptions {
  double clamp_eps = 1e-6;
  /// Columns skipped when the schema is inferred (e.g. an appended
  /// calibrated-score column).
  std::vector<std::string> ignore_columns;
};

/// Loads a delimiter-separated log (comma or tab, detected from the header).
/// Header: label,score,<one column per schema field>[,group][,true_p].
Dataset load_dataset(const std::filesystem::path& path, const FieldSchema& schema,
                     LoadOptions options = {});

/// As above, inferring the schema from the header: every column other than
/// label/score/group/true_p is a field with vocabulary max(id)+1.
Dataset load_dataset(const std::filesystem::path& path, LoadOptions options = {});

/// Values of one numeric column, in row order (blank lines skipped).
std::vector<double> load_column(const std::filesystem::path& path, std::string_view column);

/// Copies `in` to `out` with one extra column holding `values` (one per
/// non-blank data row). Throws SchemaError if the column already exists.
void append_column(const std::filesystem::path& in, const std::filesystem::path& out, std::string_view column,
                   std::span<const double> values);

/// Writes the dataset in the same format (scores with round-trip precision).
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Contiguous splits with sizes floor(n * cumulative_ratio), remainder to the
/// last split. Every ratio must be positive.
std::vector<Dataset> split_by_ratios(const Dataset& dataset, std::span<const double> ratios);

struct ChronologicalSplit {
  Dataset first;
  Dataset second;
  Dataset third;
};

ChronologicalSplit chronological_split(const Dataset& dataset, double r1, double r2, double r3);

/// Dense copy of selected rows.
struct Batch {
  std::vector<std::size_t> indices;
  std::size_t num_fields = 0;
  std::vector<std::int32_t> features;  ///< rows() x num_fields
  std::vector<double> labels;
  std::vector<double> scores;

  std::size_t rows() const { return indices.size(); }
  std::span<const std::int32_t> features_of(std::size_t row) const {
    return {features.data() + row * num_fields, num_fields};
  }
};

Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices);
Batch make_batch(const Dataset& dataset, std::size_t begin, std::size_t end);

/// Seeded permutation of all rows cut into consecutive batches of
/// `batch_size` (last one may be short). Empty dataset -> empty sequence.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                     std::uint64_t shuffle_seed);
std::vector<Batch> iterate_batches(const Dataset& dataset, std::size_t batch_size,
                                   std::uint64_t shuffle_seed);

/// Unbiased integer in [0, bound) from a 64-bit engine, independent of the
/// standard library's distribution implementation.
template <class Engine>
std::uint64_t uniform_below(Engine& rng, std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

/// Uniform double in [0, 1) with 53 random bits.
template <class Engine>
double uniform_unit(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace umc
