#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "floodforensics/metrics.hpp"

namespace floodforensics {

enum class ReportFormat { markdown, csv };

ReportFormat parse_report_format(std::string_view name);

/// Drops exact duplicates; throws InvalidConfig when two reports share
/// (model, dataset, attack) but disagree on any metric.
std::vector<EvalReport> deduplicate_reports(const std::vector<EvalReport>& reports);

/// Rows are model tags, column groups are datasets, values are percentages
/// with one decimal. One table per attack; markdown output carries a heading
/// per attack, CSV output an `attack` column.
std::string render_table(const std::vector<EvalReport>& reports, ReportFormat format);

/// Percent rendering used by the tables ("98.6").
std::string format_percent(double fraction);

/// RFC 4180 field quoting and a matching parser.
std::string csv_escape(std::string_view field);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Grouped bar charts (one PNG per attack): TNR for real datasets, TPR and
/// AUC for fake datasets, one bar per model. Returns the written files.
std::vector<std::filesystem::path> render_bar_charts(const std::vector<EvalReport>& reports,
                                                     const std::filesystem::path& out_dir);

}  // namespace floodforensics
