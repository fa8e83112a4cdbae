#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spbm/errors.hpp"
#include "spbm/matrix.hpp"

namespace spbm::data {

/// Tabular data with a binary/real label and a group id per row.
struct Dataset {
  Matrix features;  // N x d
  std::vector<double> labels;
  std::vector<std::size_t> groups;
  std::vector<std::string> group_names;
  std::vector<std::string> feature_names;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t num_features() const noexcept { return features.cols; }
  std::size_t num_groups() const noexcept { return group_names.size(); }

  void validate() const {
    const std::size_t n = labels.size();
    if (features.rows != n || groups.size() != n) {
      throw ConfigError("dataset: features, labels and groups disagree on row count");
    }
    std::vector<std::size_t> counts(group_names.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (groups[i] >= group_names.size()) {
        throw ConfigError("dataset: row " + std::to_string(i) + " has group id " +
                          std::to_string(groups[i]) + " >= " +
                          std::to_string(group_names.size()));
      }
      ++counts[groups[i]];
    }
    for (std::size_t g = 0; g < counts.size(); ++g) {
      if (counts[g] == 0) throw ConfigError("dataset: group '" + group_names[g] + "' is empty");
    }
  }
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Seeded shuffle then a 60/20/20 partition. Validation and test get
/// floor(N/5) rows each; the remainder goes to train.
inline Split split_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 5) throw ConfigError("split_dataset: need at least 5 rows, got " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t fifth = n / 5;
  Split s;
  s.validation.assign(idx.begin(), idx.begin() + fifth);
  s.test.assign(idx.begin() + fifth, idx.begin() + 2 * fifth);
  s.train.assign(idx.begin() + 2 * fifth, idx.end());
  return s;
}

inline Split split_dataset(const Dataset& ds, std::uint64_t seed) {
  return split_dataset(ds.size(), seed);
}

struct Standardized {
  Matrix features;
  std::vector<double> mean;
  std::vector<double> std;
};

/// Zero-mean/unit-variance scaling fitted on the train rows only. Constant
/// columns are centered and left unscaled.
inline Standardized standardize(const Dataset& ds, const Split& split) {
  const std::size_t d = ds.num_features();
  Standardized out{ds.features, std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  if (split.train.empty()) return out;
  const double n = static_cast<double>(split.train.size());
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t r : split.train) mean += ds.features(r, j);
    mean /= n;
    double var = 0.0;
    for (std::size_t r : split.train) {
      const double c = ds.features(r, j) - mean;
      var += c * c;
    }
    var /= n;
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    out.mean[j] = mean;
    out.std[j] = sd;
    for (std::size_t r = 0; r < ds.size(); ++r) {
      out.features(r, j) = (ds.features(r, j) - mean) / sd;
    }
  }
  return out;
}

/// Equal-per-group mini-batches, sampled with replacement within groups.
class StratifiedSampler {
 public:
  /// `pools[g]` lists the row indices of group g that may be drawn.
  StratifiedSampler(std::vector<std::vector<std::size_t>> pools, std::size_t batch_size,
                    std::uint64_t seed)
      : pools_(std::move(pools)), batch_size_(batch_size), rng_(seed) {
    if (pools_.empty()) throw ConfigError("stratified sampler: no groups");
    if (batch_size_ == 0 || batch_size_ % pools_.size() != 0) {
      throw ConfigError("stratified sampler: batch size " + std::to_string(batch_size_) +
                        " is not divisible by the number of groups (" +
                        std::to_string(pools_.size()) + ")");
    }
    for (std::size_t g = 0; g < pools_.size(); ++g) {
      if (pools_[g].empty()) {
        throw ConfigError("stratified sampler: group " + std::to_string(g) + " has no rows");
      }
    }
  }

  /// Groups pools from `rows` of `ds`.
  static StratifiedSampler over(const Dataset& ds, std::span<const std::size_t> rows,
                                std::size_t batch_size, std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> pools(ds.num_groups());
    for (std::size_t r : rows) pools[ds.groups[r]].push_back(r);
    for (std::size_t g = 0; g < pools.size(); ++g) {
      if (pools[g].empty()) {
        throw ConfigError("stratified sampler: group '" + ds.group_names[g] +
                          "' has no rows in this partition");
      }
    }
    return StratifiedSampler(std::move(pools), batch_size, seed);
  }

  std::size_t batch_size() const noexcept { return batch_size_; }
  std::size_t num_groups() const noexcept { return pools_.size(); }

  /// B indices, B/|R| per group, grouped in group order.
  std::vector<std::size_t> next() {
    const std::size_t per = batch_size_ / pools_.size();
    std::vector<std::size_t> out;
    out.reserve(batch_size_);
    for (const auto& pool : pools_) {
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (std::size_t k = 0; k < per; ++k) out.push_back(pool[pick(rng_)]);
    }
    return out;
  }

 private:
  std::vector<std::vector<std::size_t>> pools_;
  std::size_t batch_size_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Synthetic census-like generator

struct GroupRecipe {
  std::string name;
  double fraction = 0.5;
  /// Feature-cluster shift along the label direction.
  double shift = 0.0;
};

struct CensusRecipe {
  std::vector<GroupRecipe> groups{{"A", 0.5, 0.35}, {"B", 0.5, -0.35}};
  std::size_t num_features = 6;
  /// Logit scale of the label model.
  double sharpness = 2.0;
};

/// Gaussian features x = z + shift_g * (w + v), labels
/// y ~ Bernoulli(sigmoid(a * w.x)) with fixed orthonormal directions w, v.
/// The shift along w biases each group's base rate; the shift along v makes
/// group membership visible outside the label direction, as sensitive
/// attributes are in census data. Group sizes are round(N * fraction) with
/// the rounding remainder absorbed by the last group.
inline Dataset synth_census(std::uint64_t seed, std::size_t n, const CensusRecipe& recipe = {}) {
  if (recipe.groups.empty()) throw ConfigError("synth_census: no groups");
  double total = 0.0;
  for (const auto& g : recipe.groups) {
    if (!(g.fraction > 0.0)) throw ConfigError("synth_census: group fractions must be > 0");
    total += g.fraction;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("synth_census: group fractions sum to " + std::to_string(total) + ", not 1");
  }
  const std::size_t d = recipe.num_features;
  if (d == 0) throw ConfigError("synth_census: need at least one feature");

  std::vector<std::size_t> counts;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g + 1 < recipe.groups.size(); ++g) {
    counts.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(n) * recipe.groups[g].fraction)));
    assigned += counts.back();
  }
  if (assigned >= n) throw ConfigError("synth_census: N too small for the group fractions");
  counts.push_back(n - assigned);

  std::vector<double> w(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) w[j] = (j % 2 == 0 ? 1.0 : -0.5) / static_cast<double>(j + 1);
  double wn = 0.0;
  for (double v : w) wn += v * v;
  wn = std::sqrt(wn);
  for (double& v : w) v /= wn;
  // v: e_1 with its w component removed (zero when d == 1).
  std::vector<double> v(d, 0.0);
  if (d > 1) {
    v[1] = 1.0;
    double vn = 0.0;
    for (std::size_t j = 0; j < d; ++j) v[j] -= w[1] * w[j];
    for (double a : v) vn += a * a;
    for (double& a : v) a /= std::sqrt(vn);
  }

  Dataset ds;
  ds.features = Matrix(n, d);
  ds.labels.resize(n);
  ds.groups.resize(n);
  for (const auto& g : recipe.groups) ds.group_names.push_back(g.name);
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // Interleave groups so the row order carries no group structure.
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t g = 0; g < counts.size(); ++g) order.insert(order.end(), counts[g], g);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = order[i];
    double score = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double x = normal(rng) + recipe.groups[g].shift * (w[j] + v[j]);
      ds.features(i, j) = x;
      score += w[j] * x;
    }
    const double prob = 1.0 / (1.0 + std::exp(-recipe.sharpness * score));
    ds.labels[i] = unif(rng) < prob ? 1.0 : 0.0;
    ds.groups[i] = g;
  }
  return ds;
}

/// Per-group mean label.
inline std::vector<double> group_base_rates(const Dataset& ds) {
  std::vector<double> sum(ds.num_groups(), 0.0), cnt(ds.num_groups(), 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    sum[ds.groups[i]] += ds.labels[i];
    cnt[ds.groups[i]] += 1.0;
  }
  for (std::size_t g = 0; g < sum.size(); ++g) sum[g] = cnt[g] > 0 ? sum[g] / cnt[g] : 0.0;
  return sum;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size();
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Orders distinct values numerically when all parse as numbers, else lexically.
inline std::vector<std::string> sorted_levels(const std::set<std::string>& values) {
  std::vector<std::string> out(values.begin(), values.end());
  bool numeric = true;
  double tmp;
  for (const auto& v : out) numeric = numeric && parse_double(v, tmp);
  if (numeric) {
    std::stable_sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
      return std::strtod(a.c_str(), nullptr) < std::strtod(b.c_str(), nullptr);
    });
  }
  return out;
}

}  // namespace detail

struct CsvSpec {
  std::string label_column;
  /// Group id is the cartesian product of these columns' values.
  std::vector<std::string> group_columns;
  /// One-hot encoded feature columns.
  std::vector<std::string> categorical_columns;
};

/// Reads a comma-separated file with a header row. Every column other than
/// the label and group columns becomes a feature.
inline Dataset load_csv(const std::string& path, const CsvSpec& spec) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("load_csv: '" + path + "' is empty");
  const std::vector<std::string> header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("load_csv: missing column '" + name + "' in " + path);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label_col = column(spec.label_column);
  std::vector<std::size_t> group_cols;
  for (const auto& g : spec.group_columns) group_cols.push_back(column(g));
  std::set<std::size_t> cat_cols;
  for (const auto& c : spec.categorical_columns) cat_cols.insert(column(c));

  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ConfigError("load_csv: row at line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields, header has " +
                        std::to_string(header.size()));
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw ConfigError("load_csv: '" + path + "' has no data rows");

  // Categorical levels, feature layout.
  std::map<std::size_t, std::vector<std::string>> levels;
  for (std::size_t c : cat_cols) {
    std::set<std::string> vals;
    for (const auto& r : rows) vals.insert(r[c]);
    levels[c] = detail::sorted_levels(vals);
  }
  std::set<std::size_t> skip(group_cols.begin(), group_cols.end());
  skip.insert(label_col);

  Dataset ds;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (skip.count(c)) continue;
    feature_cols.push_back(c);
    if (cat_cols.count(c)) {
      for (const auto& lv : levels[c]) ds.feature_names.push_back(header[c] + "=" + lv);
    } else {
      ds.feature_names.push_back(header[c]);
    }
  }

  // Group ids over the product of group-column levels present in the data.
  std::vector<std::vector<std::string>> group_levels;
  for (std::size_t c : group_cols) {
    std::set<std::string> vals;
    for (const auto& r : rows) vals.insert(r[c]);
    group_levels.push_back(detail::sorted_levels(vals));
  }
  auto level_index = [](const std::vector<std::string>& lv, const std::string& v) {
    return static_cast<std::size_t>(std::find(lv.begin(), lv.end(), v) - lv.begin());
  };
  std::map<std::vector<std::size_t>, std::size_t> combo_ids;
  std::vector<std::vector<std::size_t>> row_combo(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < group_cols.size(); ++k) {
      row_combo[i].push_back(level_index(group_levels[k], rows[i][group_cols[k]]));
    }
    combo_ids.emplace(row_combo[i], 0);
  }
  std::size_t next_id = 0;
  for (auto& [combo, id] : combo_ids) {
    id = next_id++;
    std::string name;
    for (std::size_t k = 0; k < combo.size(); ++k) {
      if (k) name += "|";
      name += group_levels.size() == 1 ? group_levels[k][combo[k]]
                                       : spec.group_columns[k] + "=" + group_levels[k][combo[k]];
    }
    ds.group_names.push_back(name.empty() ? "all" : name);
  }

  ds.features = Matrix(rows.size(), ds.feature_names.size());
  ds.labels.resize(rows.size());
  ds.groups.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = " at line " + std::to_string(i + 2);
    if (!detail::parse_double(rows[i][label_col], ds.labels[i])) {
      throw ConfigError("load_csv: non-numeric label '" + rows[i][label_col] + "'" + where);
    }
    std::size_t j = 0;
    for (std::size_t c : feature_cols) {
      if (cat_cols.count(c)) {
        const auto& lv = levels[c];
        for (const auto& l : lv) ds.features(i, j++) = rows[i][c] == l ? 1.0 : 0.0;
      } else {
        double v;
        if (!detail::parse_double(rows[i][c], v)) {
          throw ConfigError("load_csv: non-numeric value '" + rows[i][c] + "' in column '" +
                            header[c] + "'" + where);
        }
        ds.features(i, j++) = v;
      }
    }
    ds.groups[i] = combo_ids.at(row_combo[i]);
  }
  ds.validate();
  return ds;
}

/// Writes features, then `label`, then `group` (by name). Values use 17
/// significant digits so load_csv restores them exactly.
inline void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("write_csv: cannot open '" + path + "'");
  for (std::size_t j = 0; j < ds.num_features(); ++j) {
    out << (j < ds.feature_names.size() ? ds.feature_names[j] : "x" + std::to_string(j)) << ',';
  }
  out << "label,group\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.num_features(); ++j) {
      out << detail::format_double(ds.features(i, j)) << ',';
    }
    out << detail::format_double(ds.labels[i]) << ',' << ds.group_names[ds.groups[i]] << '\n';
  }
}

}  // namespace spbm::data
