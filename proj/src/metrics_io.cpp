#include "alix/metrics_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "alix/errors.hpp"

namespace alix {

namespace {

using Field = std::optional<double> MetricsRow::*;

struct Column {
  const char* name;
  Field field;
};

const std::vector<Column>& columns() {
  static const std::vector<Column> c{
      {"td_loss", &MetricsRow::td_loss},
      {"td_loss_zero_reward", &MetricsRow::td_loss_zero_reward},
      {"td_loss_nonzero_reward", &MetricsRow::td_loss_nonzero_reward},
      {"q_mean", &MetricsRow::q_mean},
      {"pearson_target", &MetricsRow::pearson_target},
      {"pearson_mc", &MetricsRow::pearson_mc},
      {"nd_instant", &MetricsRow::nd_instant},
      {"nd_robust", &MetricsRow::nd_robust},
      {"nd_accumulated", &MetricsRow::nd_accumulated},
      {"S", &MetricsRow::S},
      {"episode_return", &MetricsRow::episode_return},
      {"policy_loss", &MetricsRow::policy_loss},
  };
  return c;
}

std::string format_double(double v) {
  char buf[32];
  // Shortest representation that parses back to the same double.
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("cannot format metric value");
  return std::string(buf, ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string escape_xml(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

}  // namespace

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n{"step"};
    for (const auto& c : columns()) n.push_back(c.name);
    return n;
  }();
  return names;
}

std::optional<double> column_value(const MetricsRow& row, const std::string& column) {
  if (column == "step") return static_cast<double>(row.step);
  for (const auto& c : columns())
    if (column == c.name) return row.*(c.field);
  throw UsageError("unknown metrics column '" + column + "'");
}

std::string metrics_header() {
  std::string h;
  for (const auto& n : metrics_columns()) h += (h.empty() ? "" : ",") + n;
  return h;
}

std::string format_row(const MetricsRow& row) {
  std::string line = std::to_string(row.step);
  for (const auto& c : columns()) {
    line += ',';
    const auto& v = row.*(c.field);
    if (v) {
      if (!std::isfinite(*v)) throw NumericError(std::string("non-finite value in metrics column ") + c.name);
      line += format_double(*v);
    }
  }
  return line;
}

MetricsWriter::MetricsWriter(const std::string& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw UsageError("cannot open metrics file " + path);
  if (!append) out_ << "#schema=" << kMetricsSchema << '\n' << metrics_header() << '\n';
}

void MetricsWriter::write(const MetricsRow& row) { out_ << format_row(row) << '\n'; }

void write_metrics(const std::string& path, const std::vector<MetricsRow>& rows) {
  MetricsWriter w(path);
  for (const auto& r : rows) w.write(r);
}

std::vector<MetricsRow> parse_metrics(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("#schema=", 0) != 0) throw UsageError("metrics: missing schema line");
  const std::string schema = line.substr(8);
  const std::string family = "alix-metrics/";
  if (schema.rfind(family, 0) != 0) throw UsageError("metrics: unknown schema '" + schema + "'");
  const std::string version = schema.substr(family.size());
  const std::string own(kMetricsSchema);
  const std::string own_major = own.substr(family.size(), own.find('.', family.size()) - family.size());
  if (version.substr(0, version.find('.')) != own_major)
    throw IncompatibleVersion("metrics schema " + schema + " is not readable by " + own);
  if (!std::getline(in, line)) throw UsageError("metrics: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != metrics_header()) throw UsageError("metrics: unexpected header '" + line + "'");

  std::vector<MetricsRow> rows;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != columns().size() + 1)
      throw UsageError("metrics line " + std::to_string(lineno) + ": expected " +
                       std::to_string(columns().size() + 1) + " fields");
    MetricsRow r;
    auto parse = [&](const std::string& s, auto& out) {
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec != std::errc() || ptr != s.data() + s.size())
        throw UsageError("metrics line " + std::to_string(lineno) + ": bad number '" + s + "'");
    };
    parse(fields[0], r.step);
    for (std::size_t k = 0; k < columns().size(); ++k) {
      if (fields[k + 1].empty()) continue;
      double v = 0.0;
      parse(fields[k + 1], v);
      r.*(columns()[k].field) = v;
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open metrics file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_metrics(ss.str());
}

std::string render_plot(const std::vector<MetricsRow>& rows, const std::vector<std::string>& cols,
                        const std::string& title) {
  if (cols.empty()) throw UsageError("plot: no columns requested");
  for (const auto& c : cols) column_value(MetricsRow{}, c);  // rejects unknown names

  const double W = 720, H = 420, left = 70, right = 180, top = 40, bottom = 50;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& r : rows)
    for (const auto& c : cols)
      if (auto v = column_value(r, c)) {
        const double x = static_cast<double>(r.step);
        if (!any) xmin = xmax = x, ymin = ymax = *v, any = true;
        xmin = std::min(xmin, x), xmax = std::max(xmax, x);
        ymin = std::min(ymin, *v), ymax = std::max(ymax, *v);
      }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pw = W - left - right, ph = H - top - bottom;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return top + ph - (y - ymin) / (ymax - ymin) * ph; };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

  std::ostringstream s;
  s.precision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    s << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << escape_xml(title)
      << "</text>\n";
  s << "<g stroke=\"black\" stroke-width=\"1\">\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
    << "\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n";
  s << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 4.0, yv = ymin + (ymax - ymin) * k / 4.0;
    s << "<text x=\"" << sx(xv) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << xv << "</text>\n";
    s << "<text x=\"" << left - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">" << yv << "</text>\n";
  }
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">step</text>\n</g>\n";
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const char* color = palette[i % std::size(palette)];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& r : rows)
      if (auto v = column_value(r, cols[i])) {
        s << (first ? "" : " ") << sx(static_cast<double>(r.step)) << ',' << sy(*v);
        first = false;
      }
    s << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(i);
    s << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 32 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << escape_xml(cols[i]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace alix
