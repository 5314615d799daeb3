#include "umc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "text_util.hpp"
#include "umc/error.hpp"

namespace umc {

FieldSchema::FieldSchema(std::vector<FieldSpec> fields, std::optional<std::string> group_field)
    : fields_(std::move(fields)), group_field_(std::move(group_field)) {
  std::unordered_set<std::string> seen;
  for (const auto& f : fields_) {
    if (f.name.empty()) throw SchemaError("field name must not be empty");
    if (f.vocabulary_size < 1)
      throw SchemaError("field '" + f.name + "' must have vocabulary_size >= 1");
    if (!seen.insert(f.name).second) throw SchemaError("duplicate field name '" + f.name + "'");
  }
}

std::optional<std::size_t> FieldSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i)
    if (fields_[i].name == name) return i;
  return std::nullopt;
}

FieldSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file " + path.string());
  std::vector<FieldSpec> fields;
  std::optional<std::string> group;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = text::trim(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = text::trim(view.substr(0, hash));
    if (view.empty()) continue;
    std::istringstream ls{std::string(view)};
    std::string kind, name;
    ls >> kind >> name;
    if (kind == "field") {
      long long vocab = 0;
      if (!(ls >> vocab) || vocab < 1)
        throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": bad vocabulary size");
      fields.push_back({name, static_cast<std::size_t>(vocab)});
    } else if (kind == "group" && !name.empty()) {
      group = name;
    } else {
      throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": unrecognized line");
    }
  }
  return FieldSchema(std::move(fields), std::move(group));
}

void save_schema(const FieldSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write schema file " + path.string());
  for (const auto& f : schema.fields()) out << "field " << f.name << ' ' << f.vocabulary_size << '\n';
  if (schema.group_field()) out << "group " << *schema.group_field() << '\n';
}

Dataset::Dataset(FieldSchema schema, std::vector<Sample> samples, std::vector<std::string> group_tokens)
    : schema_(std::move(schema)), samples_(std::move(samples)), group_tokens_(std::move(group_tokens)) {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Sample& s = samples_[i];
    if (s.features.size() != schema_.size())
      throw SchemaError("sample " + std::to_string(i) + " has " + std::to_string(s.features.size()) +
                        " features, schema has " + std::to_string(schema_.size()));
    for (std::size_t f = 0; f < s.features.size(); ++f)
      if (s.features[f] < 0 || static_cast<std::size_t>(s.features[f]) >= schema_.field(f).vocabulary_size)
        throw SchemaError("sample " + std::to_string(i) + " field '" + schema_.field(f).name +
                          "' id out of vocabulary");
    if (s.label != 0 && s.label != 1) throw SchemaError("sample " + std::to_string(i) + " label not binary");
    if (s.group && *s.group >= group_tokens_.size())
      throw SchemaError("sample " + std::to_string(i) + " group index out of range");
  }
}

bool Dataset::has_groups() const {
  return !samples_.empty() &&
         std::all_of(samples_.begin(), samples_.end(), [](const Sample& s) { return s.group.has_value(); });
}

bool Dataset::has_true_p() const {
  return !samples_.empty() &&
         std::all_of(samples_.begin(), samples_.end(), [](const Sample& s) { return s.true_p.has_value(); });
}

std::vector<double> Dataset::scores() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.score);
  return out;
}

std::vector<double> Dataset::labels() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(static_cast<double>(s.label));
  return out;
}

std::vector<std::int32_t> Dataset::field_column(std::size_t field) const {
  if (field >= schema_.size()) throw SchemaError("field index out of range");
  std::vector<std::int32_t> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.features[field]);
  return out;
}

std::vector<std::uint32_t> Dataset::group_column() const {
  std::vector<std::uint32_t> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) {
    if (!s.group) throw SchemaError("dataset has rows without a group id");
    out.push_back(*s.group);
  }
  return out;
}

std::vector<double> Dataset::true_p_column() const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) {
    if (!s.true_p) throw SchemaError("dataset has rows without true_p");
    out.push_back(*s.true_p);
  }
  return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > samples_.size()) throw ShapeError("slice out of range");
  Dataset out;
  out.schema_ = schema_;
  out.group_tokens_ = group_tokens_;
  out.samples_.assign(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                      samples_.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

namespace {

constexpr std::string_view kLabel = "label";
constexpr std::string_view kScore = "score";
constexpr std::string_view kGroup = "group";
constexpr std::string_view kTrueP = "true_p";

struct RawTable {
  char delimiter = ',';
  std::vector<std::string> header;
  std::vector<std::string> lines;  // data lines, blank lines dropped
};

RawTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file " + path.string());
  RawTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header row");
  table.delimiter = line.find('\t') != std::string::npos ? '\t' : ',';
  for (auto col : text::split(line, table.delimiter)) table.header.emplace_back(col);
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    table.lines.push_back(std::move(line));
  }
  return table;
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::size_t require_column(const std::vector<std::string>& header, std::string_view name,
                           const std::filesystem::path& path) {
  if (auto i = find_column(header, name)) return *i;
  throw SchemaError(path.string() + ": missing column '" + std::string(name) + "'");
}

Dataset parse_table(const RawTable& table, const FieldSchema& schema, const std::filesystem::path& path,
                    LoadOptions options) {
  if (!(options.clamp_eps > 0.0 && options.clamp_eps < 0.5))
    throw ConfigError("clamp_eps must lie in (0, 0.5)");
  const auto& header = table.header;
  const std::size_t label_col = require_column(header, kLabel, path);
  const std::size_t score_col = require_column(header, kScore, path);
  std::vector<std::size_t> field_cols;
  for (const auto& f : schema.fields()) field_cols.push_back(require_column(header, f.name, path));
  std::optional<std::size_t> group_col;
  if (schema.group_field())
    group_col = require_column(header, *schema.group_field(), path);
  else
    group_col = find_column(header, kGroup);
  const auto true_p_col = find_column(header, kTrueP);

  const double lo = options.clamp_eps;
  const double hi = 1.0 - options.clamp_eps;

  std::vector<Sample> samples;
  samples.reserve(table.lines.size());
  std::vector<std::string> tokens;
  std::unordered_map<std::string, std::uint32_t> token_index;

  for (std::size_t r = 0; r < table.lines.size(); ++r) {
    const std::size_t row_no = r + 1;
    auto row_error = [&](const std::string& what) {
      return ParseError(path.string() + ": row " + std::to_string(row_no) + ": " + what);
    };
    const auto cells = text::split(table.lines[r], table.delimiter);
    if (cells.size() != header.size())
      throw row_error("expected " + std::to_string(header.size()) + " columns, found " +
                      std::to_string(cells.size()));

    Sample s;
    s.timestamp_index = r;
    const auto label = text::parse_double(cells[label_col]);
    if (!label || (*label != 0.0 && *label != 1.0))
      throw row_error("label '" + std::string(cells[label_col]) + "' is not 0 or 1");
    s.label = *label == 1.0 ? 1 : 0;

    const auto score = text::parse_double(cells[score_col]);
    if (!score || !(*score >= 0.0 && *score <= 1.0))
      throw row_error("score '" + std::string(cells[score_col]) + "' is not in [0,1]");
    s.score = std::clamp(*score, lo, hi);

    s.features.resize(field_cols.size());
    for (std::size_t f = 0; f < field_cols.size(); ++f) {
      const auto id = text::parse_int(cells[field_cols[f]]);
      if (!id || *id < 0)
        throw row_error("field '" + schema.field(f).name + "' value '" + std::string(cells[field_cols[f]]) +
                        "' is not a non-negative integer");
      s.features[f] = static_cast<std::size_t>(*id) < schema.field(f).vocabulary_size
                          ? static_cast<std::int32_t>(*id)
                          : 0;
    }
    if (group_col) {
      std::string token(cells[*group_col]);
      auto [it, inserted] = token_index.try_emplace(token, static_cast<std::uint32_t>(tokens.size()));
      if (inserted) tokens.push_back(std::move(token));
      s.group = it->second;
    }
    if (true_p_col) {
      const auto p = text::parse_double(cells[*true_p_col]);
      if (!p || !(*p >= 0.0 && *p <= 1.0))
        throw row_error("true_p '" + std::string(cells[*true_p_col]) + "' is not in [0,1]");
      s.true_p = *p;
    }
    samples.push_back(std::move(s));
  }
  return Dataset(schema, std::move(samples), std::move(tokens));
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, const FieldSchema& schema, LoadOptions options) {
  return parse_table(read_table(path), schema, path, options);
}

Dataset load_dataset(const std::filesystem::path& path, LoadOptions options) {
  const RawTable table = read_table(path);
  std::vector<FieldSpec> fields;
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const auto& name = table.header[c];
    if (name == kLabel || name == kScore || name == kGroup || name == kTrueP) continue;
    if (std::find(options.ignore_columns.begin(), options.ignore_columns.end(), name) != options.ignore_columns.end())
      continue;
    fields.push_back({name, 1});
    cols.push_back(c);
  }
  for (std::size_t r = 0; r < table.lines.size(); ++r) {
    const auto cells = text::split(table.lines[r], table.delimiter);
    if (cells.size() != table.header.size()) continue;  // reported by parse_table
    for (std::size_t f = 0; f < cols.size(); ++f) {
      const auto id = text::parse_int(cells[cols[f]]);
      if (id && *id >= 0)
        fields[f].vocabulary_size = std::max(fields[f].vocabulary_size, static_cast<std::size_t>(*id) + 1);
    }
  }
  return parse_table(table, FieldSchema(std::move(fields)), path, options);
}

std::vector<double> load_column(const std::filesystem::path& path, std::string_view column) {
  const RawTable table = read_table(path);
  const std::size_t col = require_column(table.header, column, path);
  std::vector<double> values;
  values.reserve(table.lines.size());
  for (std::size_t r = 0; r < table.lines.size(); ++r) {
    const auto cells = text::split(table.lines[r], table.delimiter);
    const auto v = cells.size() == table.header.size() ? text::parse_double(cells[col]) : std::nullopt;
    if (!v)
      throw ParseError(path.string() + ": row " + std::to_string(r + 1) + ": column '" + std::string(column) +
                       "' is not numeric");
    values.push_back(*v);
  }
  return values;
}

void append_column(const std::filesystem::path& in, const std::filesystem::path& out, std::string_view column,
                   std::span<const double> values) {
  const RawTable table = read_table(in);
  if (find_column(table.header, column))
    throw SchemaError(in.string() + ": column '" + std::string(column) + "' already exists");
  if (table.lines.size() != values.size())
    throw ShapeError(in.string() + ": " + std::to_string(table.lines.size()) + " rows but " +
                     std::to_string(values.size()) + " values");
  std::ofstream os(out);
  if (!os) throw IoError("cannot write data file " + out.string());
  for (std::size_t c = 0; c < table.header.size(); ++c) os << (c ? std::string(1, table.delimiter) : "") << table.header[c];
  os << table.delimiter << column << '\n';
  for (std::size_t r = 0; r < table.lines.size(); ++r) {
    std::string_view line = table.lines[r];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    os << line << table.delimiter << text::format_double(values[r]) << '\n';
  }
  if (!os) throw IoError("write failed for " + out.string());
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write data file " + path.string());
  const auto& schema = dataset.schema();
  const bool groups = dataset.has_groups() &&
                      !(schema.group_field() && schema.index_of(*schema.group_field()));
  const std::string group_name = schema.group_field().value_or(std::string(kGroup));
  const bool true_p = dataset.has_true_p();

  out << kLabel << ',' << kScore;
  for (const auto& f : schema.fields()) out << ',' << f.name;
  if (groups) out << ',' << group_name;
  if (true_p) out << ',' << kTrueP;
  out << '\n';
  for (const auto& s : dataset.samples()) {
    out << s.label << ',' << text::format_double(s.score);
    for (auto id : s.features) out << ',' << id;
    if (groups) out << ',' << dataset.group_tokens()[*s.group];
    if (true_p) out << ',' << text::format_double(*s.true_p);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Dataset> split_by_ratios(const Dataset& dataset, std::span<const double> ratios) {
  if (ratios.empty()) throw ConfigError("at least one split ratio is required");
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("split ratios must be positive and finite");
    total += r;
  }
  const std::size_t n = dataset.size();
  std::vector<Dataset> out;
  std::size_t begin = 0;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    std::size_t end = n;
    if (i + 1 < ratios.size()) {
      cumulative += ratios[i];
      end = std::min(n, static_cast<std::size_t>(std::floor(static_cast<double>(n) * cumulative / total)));
      end = std::max(end, begin);
    }
    out.push_back(dataset.slice(begin, end));
    begin = end;
  }
  return out;
}

ChronologicalSplit chronological_split(const Dataset& dataset, double r1, double r2, double r3) {
  if (dataset.empty()) throw ConfigError("cannot split an empty dataset");
  const double ratios[] = {r1, r2, r3};
  auto parts = split_by_ratios(dataset, ratios);
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  Batch b;
  b.num_fields = dataset.schema().size();
  b.indices.assign(indices.begin(), indices.end());
  b.features.reserve(indices.size() * b.num_fields);
  b.labels.reserve(indices.size());
  b.scores.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= dataset.size()) throw ShapeError("batch index out of range");
    const Sample& s = dataset[idx];
    b.features.insert(b.features.end(), s.features.begin(), s.features.end());
    b.labels.push_back(static_cast<double>(s.label));
    b.scores.push_back(s.score);
  }
  return b;
}

Batch make_batch(const Dataset& dataset, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return make_batch(dataset, idx);
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                     std::uint64_t shuffle_seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(shuffle_seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_below(rng, i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size)
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return out;
}

std::vector<Batch> iterate_batches(const Dataset& dataset, std::size_t batch_size, std::uint64_t shuffle_seed) {
  std::vector<Batch> out;
  for (const auto& idx : batch_indices(dataset.size(), batch_size, shuffle_seed))
    out.push_back(make_batch(dataset, idx));
  return out;
}

}  // namespace umc
