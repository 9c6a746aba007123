#include "imia/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace imia {

void Dataset::validate() const {
  if (labels.empty()) throw DomainError("dataset is empty");
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw ShapeError("feature rows (" + std::to_string(features.rows()) +
                     ") differ from label count (" + std::to_string(labels.size()) + ")");
  if (num_classes < 1) throw DomainError("num_classes must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw DomainError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                        " outside [0, " + std::to_string(num_classes) + ")");
  }
}

Dataset subset(const Dataset& parent, std::span<const Index> rows) {
  Dataset out;
  out.num_classes = parent.num_classes;
  out.features.resize(static_cast<Index>(rows.size()), parent.features.cols());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    if (r < 0 || static_cast<std::size_t>(r) >= parent.size())
      throw DomainError("row index " + std::to_string(r) + " out of range");
    out.features.row(static_cast<Index>(i)) = parent.features.row(r);
    out.labels[i] = parent.labels[static_cast<std::size_t>(r)];
  }
  return out;
}

std::vector<Index> ExperimentSplit::auxiliary_pool() const {
  std::vector<Index> pool = aux_train;
  pool.insert(pool.end(), aux_val.begin(), aux_val.end());
  return pool;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view cell, double& value) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  return ec == std::errc() && ptr == end && !cell.empty() && std::isfinite(value);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw FormatError(path.string() + ": empty file");
  // Skip a UTF-8 byte-order mark if present.
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);

  const auto header = split_commas(line);
  std::ptrdiff_t label_idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (trim(header[i]) == label_column) label_idx = static_cast<std::ptrdiff_t>(i);
  if (label_idx < 0) throw FormatError(path.string() + ": no column named '" + label_column + "'");

  const std::size_t width = header.size();
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t row = 1;  // file line number; the header is line 1
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != width)
      throw ParseError(path.string() + ": line " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " + std::to_string(width));
    for (std::size_t col = 0; col < width; ++col) {
      double v = 0.0;
      if (!parse_double(cells[col], v))
        throw ParseError(path.string() + ": non-numeric cell at line " + std::to_string(row) +
                         ", column " + std::to_string(col + 1) + " ('" +
                         std::string(trim(header[col])) + "')");
      if (static_cast<std::ptrdiff_t>(col) == label_idx) {
        if (v < 0 || v != std::floor(v) || v > 1e9)
          throw ParseError(path.string() + ": label at line " + std::to_string(row) +
                           " is not a non-negative integer");
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
  }
  if (labels.empty()) throw FormatError(path.string() + ": no data rows");

  Dataset ds;
  const auto dim = static_cast<Index>(width - 1);
  ds.features = Eigen::Map<Matrix>(values.data(), static_cast<Index>(labels.size()), dim);
  ds.labels = std::move(labels);
  ds.num_classes = 1 + *std::max_element(ds.labels.begin(), ds.labels.end());

  std::vector<std::size_t> counts(static_cast<std::size_t>(ds.num_classes), 0);
  for (int y : ds.labels) ++counts[static_cast<std::size_t>(y)];
  for (std::size_t k = 0; k < counts.size(); ++k)
    if (counts[k] == 0)
      log_warning(path.string() + ": class " + std::to_string(k) + " has no samples");
  return ds;
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path,
               const std::string& label_column) {
  dataset.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (Index j = 0; j < dataset.dim(); ++j) out << 'f' << j << ',';
  out << label_column << '\n';
  char buf[64];
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (Index j = 0; j < dataset.dim(); ++j) {
      auto res = std::to_chars(buf, buf + sizeof buf, dataset.features(static_cast<Index>(i), j));
      out.write(buf, res.ptr - buf);
      out << ',';
    }
    out << dataset.labels[i] << '\n';
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

Dataset gen_synthetic(std::size_t n, int dim, int num_classes, double cluster_spread,
                      std::uint64_t seed) {
  if (dim < 2) throw DomainError("synthetic data needs dim >= 2");
  if (num_classes < 2) throw DomainError("synthetic data needs at least 2 classes");
  if (n < static_cast<std::size_t>(num_classes))
    throw DomainError("synthetic data needs n >= number of classes");
  if (!(cluster_spread >= 0.0) || !std::isfinite(cluster_spread))
    throw DomainError("cluster spread must be a finite non-negative number");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix centroids(num_classes, dim);
  for (Index k = 0; k < num_classes; ++k) {
    for (Index j = 0; j < dim; ++j) centroids(k, j) = normal(rng);
    centroids.row(k).normalize();
  }

  Dataset ds;
  ds.num_classes = num_classes;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(i % static_cast<std::size_t>(num_classes));
  std::shuffle(ds.labels.begin(), ds.labels.end(), rng);

  ds.features.resize(static_cast<Index>(n), dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Index>(i);
    ds.features.row(r) = centroids.row(ds.labels[i]);
    if (cluster_spread > 0.0)
      for (Index j = 0; j < dim; ++j) ds.features(r, j) += cluster_spread * normal(rng);
  }
  return ds;
}

ExperimentSplit make_split(const Dataset& dataset, const SplitFractions& fractions,
                           std::uint64_t seed) {
  dataset.validate();
  const auto f = fractions.as_array();
  double total = 0.0;
  for (double x : f) {
    if (!(x >= 0.0)) throw DomainError("split fractions must be non-negative");
    total += x;
  }
  if (total > 1.0 + 1e-12) throw DomainError("split fractions sum to more than 1");

  constexpr std::size_t kSets = 5;
  const auto num_classes = static_cast<std::size_t>(dataset.num_classes);
  const double n = static_cast<double>(dataset.size());

  std::vector<std::vector<Index>> by_class(num_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(static_cast<Index>(i));

  // Per-class floors of the ideal share, then hand out the remaining rows one
  // per (class, set) cell. Every cell stays within one row of its ideal.
  std::vector<std::array<std::size_t, kSets>> alloc(num_classes);
  std::vector<std::array<double, kSets>> remainder(num_classes);
  std::vector<std::size_t> slack(num_classes);
  std::array<std::size_t, kSets> deficit{};
  for (std::size_t s = 0; s < kSets; ++s)
    deficit[s] = static_cast<std::size_t>(std::floor(f[s] * n + 1e-9));
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double nk = static_cast<double>(by_class[k].size());
    std::size_t used = 0;
    for (std::size_t s = 0; s < kSets; ++s) {
      const double ideal = f[s] * nk;
      alloc[k][s] = static_cast<std::size_t>(std::floor(ideal + 1e-9));
      remainder[k][s] = ideal - static_cast<double>(alloc[k][s]);
      used += alloc[k][s];
      deficit[s] -= std::min(deficit[s], alloc[k][s]);
    }
    slack[k] = by_class[k].size() - std::min(used, by_class[k].size());
  }
  for (std::size_t s = 0; s < kSets; ++s) {
    std::vector<std::size_t> order(num_classes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (slack[a] != slack[b]) return slack[a] > slack[b];
      return remainder[a][s] > remainder[b][s];
    });
    for (std::size_t k : order) {
      if (deficit[s] == 0) break;
      if (slack[k] == 0) continue;
      ++alloc[k][s];
      --slack[k];
      --deficit[s];
    }
    if (deficit[s] != 0) throw InternalError("stratified split could not meet its set sizes");
  }

  std::mt19937_64 rng(seed);
  std::array<std::vector<Index>, kSets> sets;
  for (std::size_t k = 0; k < num_classes; ++k) {
    auto rows = by_class[k];
    std::shuffle(rows.begin(), rows.end(), rng);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < kSets; ++s)
      for (std::size_t t = 0; t < alloc[k][s]; ++t) sets[s].push_back(rows[pos++]);
  }
  for (auto& s : sets) std::sort(s.begin(), s.end());

  return ExperimentSplit{std::move(sets[0]), std::move(sets[1]), std::move(sets[2]),
                         std::move(sets[3]), std::move(sets[4])};
}

}  // namespace imia
