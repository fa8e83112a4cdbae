#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "spbm/data.hpp"
#include "spbm/harness/runner.hpp"

namespace spbm::harness {

/// "0.41 ± 0.01" with `precision` digits after the point.
inline std::string format_pm(double mean, double sd, int precision = 3) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", precision, mean, precision, sd);
  return buf;
}

inline std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ConfigError("'" + path.string() + "' does not have the metrics header");
  }
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = data::detail::split_csv_line(line);
    if (f.size() != 11) {
      throw ConfigError(path.string() + " line " + std::to_string(lineno) + ": expected 11 fields");
    }
    double v[11];
    for (std::size_t i = 0; i < 11; ++i) {
      if (!data::detail::parse_double(f[i], v[i])) {
        throw ConfigError(path.string() + " line " + std::to_string(lineno) + ": bad number '" +
                          f[i] + "'");
      }
    }
    rows.push_back({static_cast<std::uint64_t>(v[0]), static_cast<std::size_t>(v[1]), v[2], v[3],
                    v[4], v[5], v[6], v[7], v[8], v[9], v[10]});
  }
  if (rows.empty()) throw ConfigError("'" + path.string() + "' has no rows");
  return rows;
}

/// Per-seed metric rows of one method directory.
struct MethodRuns {
  std::string label;
  std::size_t iterations_per_epoch = 1;
  std::vector<std::vector<MetricsRow>> seeds;
};

/// Every method directory (one holding run.json) directly under `dir`, or
/// `dir` itself, sorted by label.
inline std::vector<MethodRuns> load_runs(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("report: '" + dir.string() + "' is not a directory");
  std::vector<fs::path> method_dirs;
  if (fs::exists(dir / "run.json")) method_dirs.push_back(dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "run.json")) method_dirs.push_back(e.path());
  }
  std::sort(method_dirs.begin(), method_dirs.end());
  std::vector<MethodRuns> out;
  for (const auto& md : method_dirs) {
    MethodRuns r;
    const json run = read_json_file((md / "run.json").string());
    r.label = run.value("label", md.filename().string());
    r.iterations_per_epoch = std::max<std::size_t>(1, run.value("iterations_per_epoch", 1));
    std::vector<fs::path> csvs;
    for (const auto& e : fs::directory_iterator(md)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("seed_", 0) == 0 && e.path().extension() == ".csv") csvs.push_back(e.path());
    }
    std::sort(csvs.begin(), csvs.end());
    for (const auto& c : csvs) r.seeds.push_back(read_metrics_csv(c));
    if (!r.seeds.empty()) out.push_back(std::move(r));
  }
  if (out.empty()) throw ConfigError("report: no completed runs under '" + dir.string() + "'");
  return out;
}

/// One table row: best test loss over the logged iterations, per seed, with
/// the epoch and constraint values at that point, then mean and std.
struct SummaryRow {
  std::string label;
  std::size_t seeds = 0;
  double best_loss_mean = 0, best_loss_std = 0;
  double epoch_mean = 0, epoch_std = 0;
  double mean_constraint_mean = 0, mean_constraint_std = 0;
  double max_constraint_mean = 0, max_constraint_std = 0;
};

inline SummaryRow summarize(const MethodRuns& runs) {
  std::vector<double> loss, epoch, meanc, maxc;
  for (const auto& rows : runs.seeds) {
    const auto best = std::min_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return a.test_loss < b.test_loss;
    });
    loss.push_back(best->test_loss);
    epoch.push_back(static_cast<double>(best->iter) / static_cast<double>(runs.iterations_per_epoch));
    meanc.push_back(best->mean_constraint);
    maxc.push_back(best->max_constraint);
  }
  return {runs.label,         runs.seeds.size(), sample_mean(loss),  sample_std(loss),
          sample_mean(epoch), sample_std(epoch), sample_mean(meanc), sample_std(meanc),
          sample_mean(maxc),  sample_std(maxc)};
}

/// Writes summary.csv, summary.txt and curves_<label>.csv into `out_dir`.
inline std::vector<SummaryRow> report(const std::filesystem::path& results_dir,
                                      const std::filesystem::path& out_dir, int precision = 3) {
  namespace fs = std::filesystem;
  const auto runs = load_runs(results_dir);
  fs::create_directories(out_dir);
  std::vector<SummaryRow> table;

  std::ofstream csv(out_dir / "summary.csv", std::ios::binary);
  csv << "method,seeds,best_loss_mean,best_loss_std,epoch_mean,epoch_std,mean_constraint_mean,"
         "mean_constraint_std,max_constraint_mean,max_constraint_std\n";
  for (const auto& r : runs) {
    const SummaryRow s = summarize(r);
    csv << s.label << ',' << s.seeds;
    for (double v : {s.best_loss_mean, s.best_loss_std, s.epoch_mean, s.epoch_std,
                     s.mean_constraint_mean, s.mean_constraint_std, s.max_constraint_mean,
                     s.max_constraint_std}) {
      csv << ',' << format_g(v);
    }
    csv << '\n';
    table.push_back(s);
  }

  const std::vector<std::string> head{"Method", "Best loss", "Epoch", "Mean constraint",
                                      "Max constraint"};
  std::vector<std::vector<std::string>> cells{head};
  for (const auto& s : table) {
    cells.push_back({s.label, format_pm(s.best_loss_mean, s.best_loss_std, precision),
                     format_pm(s.epoch_mean, s.epoch_std, 1),
                     format_pm(s.mean_constraint_mean, s.mean_constraint_std, precision),
                     format_pm(s.max_constraint_mean, s.max_constraint_std, precision)});
  }
  // Column widths in code points; "±" is two bytes.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(head.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));
  }
  std::ofstream txt(out_dir / "summary.txt", std::ios::binary);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      txt << row[c] << std::string(widths[c] - width(row[c]) + (c + 1 < row.size() ? 2 : 0), ' ');
    }
    txt << '\n';
  }

  for (const auto& r : runs) {
    std::ofstream cv(out_dir / ("curves_" + r.label + ".csv"), std::ios::binary);
    cv << "iter,epoch,train_loss_mean,train_loss_std,test_loss_mean,test_loss_std,"
          "mean_constraint_mean,mean_constraint_std,max_constraint_mean,max_constraint_std\n";
    std::size_t n = r.seeds.front().size();
    for (const auto& s : r.seeds) n = std::min(n, s.size());
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t iter = r.seeds.front()[i].iter;
      std::vector<double> col[4];
      for (const auto& s : r.seeds) {
        if (s[i].iter != iter) throw ConfigError("report: seeds of '" + r.label + "' log different iterations");
        col[0].push_back(s[i].train_loss);
        col[1].push_back(s[i].test_loss);
        col[2].push_back(s[i].mean_constraint);
        col[3].push_back(s[i].max_constraint);
      }
      cv << iter << ',' << format_g(static_cast<double>(iter) / static_cast<double>(r.iterations_per_epoch));
      for (const auto& c : col) cv << ',' << format_g(sample_mean(c)) << ',' << format_g(sample_std(c));
      cv << '\n';
    }
  }
  return table;
}

}  // namespace spbm::harness
