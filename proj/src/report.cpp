#include "floodforensics/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "floodforensics/errors.hpp"

namespace floodforensics {

namespace fs = std::filesystem;

ReportFormat parse_report_format(std::string_view name) {
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  if (name == "csv") return ReportFormat::csv;
  throw InvalidConfig("unknown report format '" + std::string(name) + "'");
}

namespace {

struct MetricColumn {
  const char* label;
  std::optional<double> EvalReport::*field;
};

constexpr std::array<MetricColumn, 5> kMetrics{{
    {"TNR", &EvalReport::tnr},
    {"TPR", &EvalReport::tpr},
    {"AUC", &EvalReport::auc},
    {"bPA", &EvalReport::bpa},
    {"IoU", &EvalReport::iou},
}};

std::string attack_key(const EvalReport& r) {
  if (!r.attack) return "none";
  std::string key = r.attack->name;
  if (!r.attack->params.empty()) key += " " + r.attack->params.dump();
  return key;
}

template <typename T>
void push_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

bool same_metrics(const EvalReport& a, const EvalReport& b) {
  for (const auto& m : kMetrics)
    if (a.*m.field != b.*m.field) return false;
  return true;
}

struct Table {
  std::string attack;
  std::vector<std::string> models;
  std::vector<std::string> datasets;
  std::map<std::string, std::vector<const MetricColumn*>> columns;  // per dataset
  std::map<std::pair<std::string, std::string>, const EvalReport*> cells;
};

std::vector<Table> build_tables(const std::vector<EvalReport>& reports) {
  std::vector<Table> tables;
  for (const auto& r : reports) {
    const std::string attack = attack_key(r);
    auto it = std::find_if(tables.begin(), tables.end(), [&](const Table& t) { return t.attack == attack; });
    if (it == tables.end()) {
      tables.push_back({attack, {}, {}, {}, {}});
      it = std::prev(tables.end());
    }
    push_unique(it->models, r.model_tag);
    push_unique(it->datasets, r.dataset_tag);
    it->cells[{r.model_tag, r.dataset_tag}] = &r;
  }
  for (auto& t : tables)
    for (const auto& d : t.datasets) {
      auto& cols = t.columns[d];
      for (const auto& m : kMetrics)
        for (const auto& [key, rep] : t.cells)
          if (key.second == d && (rep->*m.field).has_value()) {
            push_unique(cols, &m);
            break;
          }
    }
  return tables;
}

std::string cell_text(const Table& t, const std::string& model, const std::string& dataset, const MetricColumn& m) {
  const auto it = t.cells.find({model, dataset});
  if (it == t.cells.end() || !(it->second->*m.field)) return "-";
  return format_percent(*(it->second->*m.field));
}

}  // namespace

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", fraction * 100.0);
  return buf;
}

std::vector<EvalReport> deduplicate_reports(const std::vector<EvalReport>& reports) {
  std::vector<EvalReport> out;
  for (const auto& r : reports) {
    const auto dup = std::find_if(out.begin(), out.end(), [&](const EvalReport& o) {
      return o.model_tag == r.model_tag && o.dataset_tag == r.dataset_tag && attack_key(o) == attack_key(r);
    });
    if (dup == out.end()) {
      out.push_back(r);
    } else if (!same_metrics(*dup, r)) {
      throw InvalidConfig("conflicting reports for model '" + r.model_tag + "', dataset '" + r.dataset_tag +
                          "', attack '" + attack_key(r) + "'");
    }
  }
  return out;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string render_table(const std::vector<EvalReport>& input, ReportFormat format) {
  if (input.empty()) throw InvalidConfig("no reports to render");
  const auto reports = deduplicate_reports(input);
  const auto tables = build_tables(reports);
  std::ostringstream os;

  if (format == ReportFormat::csv) {
    // One header for all attacks: the union of dataset/metric columns.
    std::vector<std::pair<std::string, const MetricColumn*>> header;
    for (const auto& t : tables)
      for (const auto& d : t.datasets)
        for (const auto* m : t.columns.at(d)) push_unique(header, std::pair{d, m});
    os << "model,attack";
    for (const auto& [d, m] : header) os << ',' << csv_escape(d + " " + m->label);
    os << "\r\n";
    for (const auto& t : tables)
      for (const auto& model : t.models) {
        os << csv_escape(model) << ',' << csv_escape(t.attack);
        for (const auto& [d, m] : header) os << ',' << csv_escape(cell_text(t, model, d, *m));
        os << "\r\n";
      }
    return os.str();
  }

  const bool headings = tables.size() > 1 || tables.front().attack != "none";
  for (std::size_t ti = 0; ti < tables.size(); ++ti) {
    const Table& t = tables[ti];
    if (ti) os << '\n';
    if (headings) os << "### Attack: " << t.attack << "\n\n";
    std::vector<std::pair<std::string, const MetricColumn*>> cols;
    for (const auto& d : t.datasets)
      for (const auto* m : t.columns.at(d)) cols.emplace_back(d, m);
    os << "| Method |";
    for (const auto& [d, m] : cols) os << ' ' << d << ' ' << m->label << "% |";
    os << "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) os << "---:|";
    os << '\n';
    for (const auto& model : t.models) {
      os << "| " << model << " |";
      for (const auto& [d, m] : cols) os << ' ' << cell_text(t, model, d, *m) << " |";
      os << '\n';
    }
  }
  return os.str();
}

std::vector<fs::path> render_bar_charts(const std::vector<EvalReport>& input, const fs::path& out_dir) {
  const auto reports = deduplicate_reports(input);
  const auto tables = build_tables(reports);
  fs::create_directories(out_dir);
  std::vector<fs::path> written;

  const std::array<cv::Scalar, 8> palette{cv::Scalar(180, 119, 31), cv::Scalar(14, 127, 255), cv::Scalar(44, 160, 44),
                                          cv::Scalar(40, 39, 214),  cv::Scalar(189, 103, 148), cv::Scalar(75, 86, 140),
                                          cv::Scalar(194, 119, 227), cv::Scalar(127, 127, 127)};
  for (const auto& t : tables) {
    // Groups mirror the robustness figure: TNR on real sets, TPR and AUC on fake sets.
    std::vector<std::pair<std::string, const MetricColumn*>> groups;
    for (const auto& d : t.datasets)
      for (const auto* m : t.columns.at(d))
        if (std::string_view(m->label) == "TNR" || std::string_view(m->label) == "TPR" ||
            std::string_view(m->label) == "AUC")
          groups.emplace_back(d, m);
    if (groups.empty()) continue;

    const int bar_w = 14, gap = 18, left = 50, top = 30, plot_h = 240, legend_h = 18 * static_cast<int>(t.models.size());
    const int group_w = bar_w * static_cast<int>(t.models.size()) + gap;
    const int width = left + group_w * static_cast<int>(groups.size()) + 20;
    const int height = top + plot_h + 60 + legend_h;
    cv::Mat img(height, std::max(width, 320), CV_8UC3, cv::Scalar(255, 255, 255));
    const int base_y = top + plot_h;
    cv::line(img, {left - 5, base_y}, {img.cols - 10, base_y}, cv::Scalar(0, 0, 0));
    for (int pct = 0; pct <= 100; pct += 25) {
      const int y = base_y - pct * plot_h / 100;
      cv::line(img, {left - 5, y}, {left, y}, cv::Scalar(0, 0, 0));
      cv::putText(img, std::to_string(pct), {5, y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.35, cv::Scalar(0, 0, 0));
    }
    cv::putText(img, "attack: " + t.attack, {left, 18}, cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0));
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const int x0 = left + static_cast<int>(g) * group_w;
      for (std::size_t mi = 0; mi < t.models.size(); ++mi) {
        const auto it = t.cells.find({t.models[mi], groups[g].first});
        if (it == t.cells.end() || !(it->second->*groups[g].second->field)) continue;
        const double v = std::clamp(*(it->second->*groups[g].second->field), 0.0, 1.0);
        const int h = static_cast<int>(std::lround(v * plot_h));
        const int x = x0 + static_cast<int>(mi) * bar_w;
        cv::rectangle(img, {x, base_y - h}, {x + bar_w - 2, base_y}, palette[mi % palette.size()], cv::FILLED);
      }
      cv::putText(img, groups[g].first, {x0, base_y + 14}, cv::FONT_HERSHEY_SIMPLEX, 0.3, cv::Scalar(0, 0, 0));
      cv::putText(img, groups[g].second->label, {x0, base_y + 28}, cv::FONT_HERSHEY_SIMPLEX, 0.3, cv::Scalar(0, 0, 0));
    }
    for (std::size_t mi = 0; mi < t.models.size(); ++mi) {
      const int y = base_y + 46 + static_cast<int>(mi) * 18;
      cv::rectangle(img, {left, y - 10}, {left + 12, y}, palette[mi % palette.size()], cv::FILLED);
      cv::putText(img, t.models[mi], {left + 18, y}, cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
    }
    std::string stem = "robustness_" + t.attack.substr(0, t.attack.find(' '));
    for (int k = 2; std::any_of(written.begin(), written.end(), [&](const fs::path& p) { return p.stem() == stem; }); ++k)
      stem = "robustness_" + t.attack.substr(0, t.attack.find(' ')) + "_" + std::to_string(k);
    const fs::path path = out_dir / (stem + ".png");
    if (!cv::imwrite(path.string(), img)) throw Error("failed to write " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace floodforensics
