#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace alix {

/// One metrics.csv row. Unset values are written as empty fields.
struct MetricsRow {
  std::uint64_t step = 0;
  std::optional<double> td_loss;
  std::optional<double> td_loss_zero_reward;
  std::optional<double> td_loss_nonzero_reward;
  std::optional<double> q_mean;
  std::optional<double> pearson_target;
  std::optional<double> pearson_mc;
  std::optional<double> nd_instant;
  std::optional<double> nd_robust;
  std::optional<double> nd_accumulated;
  std::optional<double> S;
  std::optional<double> episode_return;
  std::optional<double> policy_loss;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline constexpr const char* kMetricsSchema = "alix-metrics/1.0";

/// Column names in file order ("step" first).
const std::vector<std::string>& metrics_columns();
/// Value of a named column; throws UsageError for unknown names.
std::optional<double> column_value(const MetricsRow& row, const std::string& column);

std::string metrics_header();
std::string format_row(const MetricsRow& row);

/// Appends rows as they are produced; the header is written on open unless
/// appending to an existing file.
class MetricsWriter {
 public:
  MetricsWriter() = default;
  explicit MetricsWriter(const std::string& path, bool append = false);
  void write(const MetricsRow& row);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

void write_metrics(const std::string& path, const std::vector<MetricsRow>& rows);
/// Throws IncompatibleVersion for a schema with another major version and
/// UsageError for malformed content.
std::vector<MetricsRow> read_metrics(const std::string& path);
std::vector<MetricsRow> parse_metrics(const std::string& text);

/// SVG line chart with axes, a legend and one polyline per column.
std::string render_plot(const std::vector<MetricsRow>& rows, const std::vector<std::string>& columns,
                        const std::string& title = "");

}  // namespace alix
