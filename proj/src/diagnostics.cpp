#include "cardmatch/diagnostics.hpp"

#include <cmath>
#include <limits>

#include "cardmatch/csv.hpp"
#include "cardmatch/errors.hpp"
#include "nlohmann/json.hpp"

namespace cardmatch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::string cell(double v) { return std::isnan(v) ? "NA" : format_double(v); }

nlohmann::json json_num(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

double smd(const std::vector<double>& treated,
           const std::vector<double>& controls, double pooled_sd) {
  return (mean_of(treated) - mean_of(controls)) / pooled_sd;
}

BalanceReport balance_report(const Dataset& dataset,
                             const MatchSolution& solution,
                             const TargetProfile& target,
                             const StudySpec& spec) {
  const std::size_t k = dataset.schema.size();
  BalanceReport report;
  report.n_pairs = solution.n;
  report.total_treated = dataset.n_treated();
  report.total_controls = dataset.n_controls();
  report.has_target = target.source != TargetSource::None;

  std::vector<char> picked(dataset.units.size(), 0);
  for (const auto& id : solution.treated_ids)
    picked[static_cast<std::size_t>(dataset.unit_index(id))] = 1;
  for (const auto& id : solution.control_ids)
    picked[static_cast<std::size_t>(dataset.unit_index(id))] = 1;

  const bool empty = solution.n == 0;
  for (std::size_t j = 0; j < k; ++j) {
    CovariateBalance cb;
    cb.name = dataset.schema.balance_names[j];
    const double pooled = dataset.schema.standardization[j].pooled_sd;

    double sum_tb = 0.0, sum_cb = 0.0, sum_ta = 0.0, sum_ca = 0.0;
    std::size_t n_ta = 0, n_ca = 0;
    for (std::size_t u = 0; u < dataset.units.size(); ++u) {
      const Unit& unit = dataset.units[u];
      (unit.exposed ? sum_tb : sum_cb) += unit.raw[j];
      if (picked[u]) {
        (unit.exposed ? sum_ta : sum_ca) += unit.raw[j];
        ++(unit.exposed ? n_ta : n_ca);
      }
    }
    cb.mean_t_before = sum_tb / static_cast<double>(report.total_treated);
    cb.mean_c_before = sum_cb / static_cast<double>(report.total_controls);
    cb.smd_before = (cb.mean_t_before - cb.mean_c_before) / pooled;
    cb.mean_t_after = empty ? kNaN : sum_ta / static_cast<double>(n_ta);
    cb.mean_c_after = empty ? kNaN : sum_ca / static_cast<double>(n_ca);
    cb.smd_after =
        empty ? kNaN : (cb.mean_t_after - cb.mean_c_after) / pooled;

    cb.target_mean = report.has_target ? target.raw[j] : kNaN;
    cb.dev_t = report.has_target && !empty
                   ? std::abs(cb.mean_t_after - cb.target_mean) / pooled
                   : kNaN;
    cb.dev_c = report.has_target && !empty
                   ? std::abs(cb.mean_c_after - cb.target_mean) / pooled
                   : kNaN;

    if (!empty) {
      // Feasibility echo: verify_solution already enforced these, so any
      // breach here points at an internal inconsistency.
      if (spec.group_balance &&
          std::abs(cb.smd_after) > spec.group_delta(cb.name) + 1e-9) {
        report.breaches.push_back("group balance breach on '" + cb.name +
                                  "': |" + format_double(cb.smd_after) +
                                  "| > " +
                                  format_double(spec.group_delta(cb.name)));
      }
      if (report.has_target) {
        const double eps = spec.target_eps(cb.name);
        if (cb.dev_t > eps + 1e-9)
          report.breaches.push_back("target deviation breach on '" + cb.name +
                                    "' (treated): " + format_double(cb.dev_t) +
                                    " > " + format_double(eps));
        if (cb.dev_c > eps + 1e-9)
          report.breaches.push_back("target deviation breach on '" + cb.name +
                                    "' (control): " + format_double(cb.dev_c) +
                                    " > " + format_double(eps));
      }
    }
    report.covariates.push_back(std::move(cb));
  }
  report.feasible = report.breaches.empty();
  return report;
}

std::string balance_to_csv(const BalanceReport& report) {
  std::string out =
      "covariate,phase,mean_treated,mean_control,target_mean,smd,"
      "dev_treated,dev_control\n";
  for (const auto& cb : report.covariates) {
    out += csv_escape(cb.name) + ",before," + cell(cb.mean_t_before) + ',' +
           cell(cb.mean_c_before) + ',' + cell(cb.target_mean) + ',' +
           cell(cb.smd_before) + ",NA,NA\n";
    out += csv_escape(cb.name) + ",after," + cell(cb.mean_t_after) + ',' +
           cell(cb.mean_c_after) + ',' + cell(cb.target_mean) + ',' +
           cell(cb.smd_after) + ',' + cell(cb.dev_t) + ',' + cell(cb.dev_c) +
           '\n';
  }
  return out;
}

std::string balance_to_json(const BalanceReport& report) {
  nlohmann::json j;
  j["n_pairs"] = report.n_pairs;
  j["retention"] = {
      {"treated_total", report.total_treated},
      {"treated_kept", report.n_pairs},
      {"control_total", report.total_controls},
      {"control_kept", report.n_pairs},
  };
  j["feasible"] = report.feasible;
  j["breaches"] = report.breaches;
  j["covariates"] = nlohmann::json::array();
  for (const auto& cb : report.covariates) {
    j["covariates"].push_back({
        {"name", cb.name},
        {"mean_treated_before", json_num(cb.mean_t_before)},
        {"mean_control_before", json_num(cb.mean_c_before)},
        {"mean_treated_after", json_num(cb.mean_t_after)},
        {"mean_control_after", json_num(cb.mean_c_after)},
        {"target_mean", json_num(cb.target_mean)},
        {"smd_before", json_num(cb.smd_before)},
        {"smd_after", json_num(cb.smd_after)},
        {"dev_treated", json_num(cb.dev_t)},
        {"dev_control", json_num(cb.dev_c)},
    });
  }
  return j.dump(2) + "\n";
}

namespace {

// Plot geometry. Fixed pixel constants keep the output a pure function of
// the report.
constexpr double kLeft = 150.0;
constexpr double kRight = 30.0;
constexpr double kTop = 48.0;
constexpr double kBottom = 34.0;
constexpr double kRowH = 26.0;
constexpr double kPlotW = 480.0;

std::string svg_line(double x1, double y1, double x2, double y2,
                     const std::string& cls) {
  return "<line class=\"" + cls + "\" x1=\"" + format_double(x1) + "\" y1=\"" +
         format_double(y1) + "\" x2=\"" + format_double(x2) + "\" y2=\"" +
         format_double(y2) + "\"/>\n";
}

std::string svg_text(double x, double y, const std::string& cls,
                     const std::string& body) {
  return "<text class=\"" + cls + "\" x=\"" + format_double(x) + "\" y=\"" +
         format_double(y) + "\">" + body + "</text>\n";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

}  // namespace

std::string render_love_plot(const BalanceReport& report) {
  const std::size_t k = report.covariates.size();
  double max_abs = 0.3;
  for (const auto& cb : report.covariates) {
    max_abs = std::max(max_abs, std::abs(cb.smd_before));
    if (!std::isnan(cb.smd_after))
      max_abs = std::max(max_abs, std::abs(cb.smd_after));
  }
  const double xmax = max_abs * 1.08;
  const double width = kLeft + kPlotW + kRight;
  const double height = kTop + kRowH * static_cast<double>(k) + kBottom;
  const auto sx = [&](double v) { return kLeft + v / xmax * kPlotW; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         format_double(width) + "\" height=\"" + format_double(height) +
         "\" viewBox=\"0 0 " + format_double(width) + " " +
         format_double(height) + "\">\n";
  svg += "<style>\n"
         "text { font: 12px sans-serif; fill: #333; }\n"
         ".title { font-weight: bold; }\n"
         ".grid { stroke: #e0e0e0; }\n"
         ".axis { stroke: #333; }\n"
         ".ref { stroke: #b05050; stroke-dasharray: 4 3; }\n"
         ".before, .dot-before { fill: none; stroke: #707070; stroke-width: 1.5; }\n"
         ".after, .dot-after { fill: #1a6fb0; }\n"
         "</style>\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += svg_text(kLeft, 20.0, "title", "Absolute standardized mean difference");

  // Legend.
  svg += "<circle class=\"before\" cx=\"" + format_double(kLeft + kPlotW - 140) +
         "\" cy=\"16\" r=\"4.5\"/>\n";
  svg += svg_text(kLeft + kPlotW - 130, 20.0, "", "before");
  svg += "<circle class=\"after\" cx=\"" + format_double(kLeft + kPlotW - 60) +
         "\" cy=\"16\" r=\"4.5\"/>\n";
  svg += svg_text(kLeft + kPlotW - 50, 20.0, "", "after");

  const double y0 = kTop;
  const double y1 = kTop + kRowH * static_cast<double>(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double y = kTop + kRowH * (static_cast<double>(i) + 0.5);
    svg += svg_line(kLeft, y, kLeft + kPlotW, y, "grid");
    svg += svg_text(kLeft - 8.0, y + 4.0, "",
                    "<tspan text-anchor=\"end\" x=\"" +
                        format_double(kLeft - 8.0) + "\">" +
                        xml_escape(report.covariates[i].name) + "</tspan>");
  }

  // Reference lines at 0.1 and 0.25, then the axis.
  svg += svg_line(sx(0.1), y0, sx(0.1), y1, "ref");
  svg += svg_line(sx(0.25), y0, sx(0.25), y1, "ref");
  svg += svg_line(kLeft, y1, kLeft + kPlotW, y1, "axis");
  for (double tick : {0.0, 0.1, 0.25}) {
    svg += svg_line(sx(tick), y1, sx(tick), y1 + 4.0, "axis");
    svg += svg_text(sx(tick) - 8.0, y1 + 18.0, "", format_double(tick));
  }

  for (std::size_t i = 0; i < k; ++i) {
    const CovariateBalance& cb = report.covariates[i];
    const double y = kTop + kRowH * (static_cast<double>(i) + 0.5);
    svg += "<circle class=\"dot-before\" cx=\"" +
           format_double(sx(std::abs(cb.smd_before))) + "\" cy=\"" +
           format_double(y) + "\" r=\"4.5\"/>\n";
    if (!std::isnan(cb.smd_after)) {
      svg += "<circle class=\"dot-after\" cx=\"" +
             format_double(sx(std::abs(cb.smd_after))) + "\" cy=\"" +
             format_double(y) + "\" r=\"4.5\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

void export_love_plot(const BalanceReport& report, const std::string& path) {
  write_text_file(path, render_love_plot(report));
}

}  // namespace cardmatch
