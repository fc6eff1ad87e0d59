#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "unitele/core/grid.hpp"
#include "unitele/harness/batch.hpp"

namespace unitele::tools {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RecordView {
  int condition = 0;
  std::uint64_t seed = 0;
  double mae_x = 0.0, mae_y = 0.0, nav = 0.0, manip = 0.0;
  json map;
  std::vector<std::pair<double, double>> plan;
  std::vector<std::pair<double, double>> trace;
  std::pair<double, double> object{0.0, 0.0};
};

const char* color(int condition) {
  switch (condition) {
    case 1: return "#1b6ca8";
    case 2: return "#d1495b";
    default: return "#e09f3e";
  }
}

std::string label(int condition) {
  switch (condition) {
    case 1: return "1: guidance";
    case 2: return "2: no guidance";
    case 3: return "3: guidance, distracted";
  }
  return std::to_string(condition);
}

std::string fmt(double v, int prec = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::vector<std::pair<double, double>> read_trace(const fs::path& file) {
  std::vector<std::pair<double, double>> out;
  std::ifstream f(file);
  std::string line;
  std::getline(f, line);
  while (std::getline(f, line)) {
    double x = 0, y = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf", &x, &y) == 2) out.emplace_back(x, y);
  }
  return out;
}

std::vector<RecordView> load_views(const fs::path& root) {
  std::vector<RecordView> out;
  std::vector<fs::path> dirs;
  if (fs::exists(root / "summary.json")) dirs.push_back(root);
  if (fs::is_directory(root))
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory() && fs::exists(e.path() / "summary.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    std::ifstream f(d / "summary.json");
    const json j = json::parse(f);
    RecordView v;
    v.condition = j.at("condition").get<int>();
    v.seed = j.at("seed").get<std::uint64_t>();
    v.mae_x = j.at("mae_x_m").get<double>();
    v.mae_y = j.at("mae_y_m").get<double>();
    v.nav = j.at("nav_time_s").get<double>();
    v.manip = j.at("manip_time_s").get<double>();
    v.map = j.at("scenario").at("map");
    v.object = {j.at("scenario").at("object").at("x_m").get<double>(),
                j.at("scenario").at("object").at("y_m").get<double>()};
    const auto& plans = j.at("plans");
    if (!plans.empty())
      for (const auto& w : plans.front().at("waypoints")) v.plan.emplace_back(w[0].get<double>(), w[1].get<double>());
    v.trace = read_trace(d / "trace.csv");
    out.push_back(std::move(v));
  }
  return out;
}

class Svg {
 public:
  Svg(double w, double h) : w_(w), h_(h) {}
  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& extra = {}) {
    os_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w) << "\" height=\"" << fmt(h)
        << "\" fill=\"" << fill << "\" " << extra << "/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0) {
    os_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2) << "\" y2=\"" << fmt(y2)
        << "\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt(width) << "\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width,
                const std::string& extra = {}) {
    os_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt(width) << "\" " << extra
        << " points=\"";
    for (const auto& [x, y] : pts) os_ << fmt(x) << ',' << fmt(y) << ' ';
    os_ << "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill) {
    os_ << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"" << fmt(r) << "\" fill=\"" << fill
        << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, const std::string& anchor = "start", int size = 12,
            const std::string& extra = {}) {
    os_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << size
        << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\" " << extra << ">" << s << "</text>\n";
  }
  void save(const fs::path& file) const {
    std::ofstream f(file);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w_, 0) << "\" height=\"" << fmt(h_, 0)
      << "\" viewBox=\"0 0 " << fmt(w_, 0) << ' ' << fmt(h_, 0) << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << os_.str() << "</svg>\n";
    if (!f) throw std::runtime_error("cannot write " + file.string());
  }

 private:
  double w_, h_;
  std::ostringstream os_;
};

struct Series {
  std::string name;
  std::vector<harness::MeanSem> values;  // one per condition
  std::string shade;
};

// Grouped bars with SEM whiskers, one group per condition.
void bar_chart(const fs::path& file, const std::string& title, const std::string& ylabel,
               const std::vector<int>& conditions, const std::vector<Series>& series) {
  const double W = 640, H = 400, left = 70, right = 20, top = 40, bottom = 60;
  double ymax = 0.0;
  for (const auto& s : series)
    for (const auto& v : s.values) ymax = std::max(ymax, v.mean + v.sem);
  if (ymax <= 0.0) ymax = 1.0;
  const double step = std::pow(10.0, std::floor(std::log10(ymax / 4.0)));
  double tick = step;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (ymax / (m * step) <= 6.0) {
      tick = m * step;
      break;
    }
  ymax = std::ceil(ymax / tick) * tick;

  Svg svg(W, H);
  const double pw = W - left - right, ph = H - top - bottom;
  auto Y = [&](double v) { return top + ph * (1.0 - v / ymax); };
  svg.text(W / 2, 22, title, "middle", 15);
  for (double v = 0.0; v <= ymax + 1e-12; v += tick) {
    svg.line(left, Y(v), left + pw, Y(v), "#dddddd");
    svg.text(left - 6, Y(v) + 4, fmt(v, tick < 0.1 ? 3 : (tick < 1 ? 2 : 0)), "end", 11);
  }
  svg.line(left, top, left, top + ph, "#333333");
  svg.line(left, top + ph, left + pw, top + ph, "#333333");
  svg.text(20, top + ph / 2, ylabel, "middle", 12, "transform=\"rotate(-90 20 " + fmt(top + ph / 2) + ")\"");

  const double gw = pw / static_cast<double>(conditions.size());
  const double bw = gw * 0.7 / static_cast<double>(series.size());
  for (std::size_t g = 0; g < conditions.size(); ++g) {
    const double gx = left + gw * static_cast<double>(g) + gw * 0.15;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const auto& v = series[s].values[g];
      const double x = gx + bw * static_cast<double>(s);
      const std::string fill = series.size() == 1 ? color(conditions[g]) : series[s].shade;
      svg.rect(x, Y(v.mean), bw * 0.9, Y(0) - Y(v.mean), fill);
      const double cx = x + bw * 0.45;
      svg.line(cx, Y(v.mean - v.sem), cx, Y(v.mean + v.sem), "#222222", 1.5);
      svg.line(cx - 5, Y(v.mean + v.sem), cx + 5, Y(v.mean + v.sem), "#222222", 1.5);
      svg.line(cx - 5, Y(v.mean - v.sem), cx + 5, Y(v.mean - v.sem), "#222222", 1.5);
    }
    svg.text(left + gw * (static_cast<double>(g) + 0.5), top + ph + 20, label(conditions[g]), "middle", 12);
  }
  if (series.size() > 1)
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double x = left + 10 + 120 * static_cast<double>(s);
      svg.rect(x, H - 22, 12, 12, series[s].shade);
      svg.text(x + 18, H - 12, series[s].name, "start", 12);
    }
  svg.save(file);
}

void trajectory_plot(const fs::path& file, const std::vector<RecordView>& views, const fs::path& records) {
  std::map<int, const RecordView*> pick;  // lowest seed per condition
  for (const auto& v : views) {
    auto it = pick.find(v.condition);
    if (it == pick.end() || v.seed < it->second->seed) pick[v.condition] = &v;
  }
  const RecordView& ref = *pick.begin()->second;
  fs::path map_path = ref.map.at("path").get<std::string>();
  if (map_path.is_relative()) map_path = records / map_path;
  const Pose2D origin{ref.map.at("origin_x_m").get<double>(), ref.map.at("origin_y_m").get<double>(), 0.0};
  const OccupancyGrid grid = OccupancyGrid::load(map_path, ref.map.at("resolution_m").get<double>(), origin);

  const double res = grid.resolution();
  const double wx = grid.width() * res, wy = grid.height() * res;
  const double scale = std::min(900.0 / wx, 600.0 / wy);
  const double margin = 20, legend = 70;
  Svg svg(wx * scale + 2 * margin, wy * scale + 2 * margin + legend);
  auto X = [&](double x) { return margin + (x - origin.x) * scale; };
  auto Y = [&](double y) { return margin + (wy - (y - origin.y)) * scale; };

  svg.rect(margin, margin, wx * scale, wy * scale, "#fafafa", "stroke=\"#999999\"");
  for (int row = 0; row < grid.height(); ++row) {
    for (int col = 0; col < grid.width();) {
      const CellClass c = grid.cell_class(CellIndex{col, row});
      int end = col + 1;
      while (end < grid.width() && grid.cell_class(CellIndex{end, row}) == c) ++end;
      if (c != CellClass::Free) {
        const char* fill = c == CellClass::Known ? "#555555" : (c == CellClass::SemiKnown ? "#999999" : "#c8b7a6");
        const double x0 = origin.x + col * res, y1 = origin.y + (row + 1) * res;
        svg.rect(X(x0), Y(y1), (end - col) * res * scale, res * scale, fill, "shape-rendering=\"crispEdges\"");
      }
      col = end;
    }
  }

  auto to_px = [&](const std::vector<std::pair<double, double>>& pts) {
    std::vector<std::pair<double, double>> out;
    out.reserve(pts.size());
    for (const auto& [x, y] : pts) out.emplace_back(X(x), Y(y));
    return out;
  };
  svg.polyline(to_px(ref.plan), "#222222", 1.5, "stroke-dasharray=\"6 4\"");
  for (const auto& [c, v] : pick) svg.polyline(to_px(v->trace), color(c), 2.0, "stroke-opacity=\"0.85\"");
  svg.circle(X(ref.object.first), Y(ref.object.second), 5, "#2a9d8f");

  double lx = margin;
  const double ly = wy * scale + 2 * margin + 20;
  svg.line(lx, ly, lx + 24, ly, "#222222", 1.5);
  svg.text(lx + 30, ly + 4, "initial plan");
  lx += 120;
  for (const auto& [c, v] : pick) {
    svg.line(lx, ly, lx + 24, ly, color(c), 2.0);
    svg.text(lx + 30, ly + 4, label(c) + " (seed " + std::to_string(v->seed) + ")");
    lx += 230;
  }
  svg.circle(margin + 6, ly + 26, 5, "#2a9d8f");
  svg.text(margin + 16, ly + 30, "object");
  svg.rect(margin + 80, ly + 20, 12, 12, "#555555");
  svg.text(margin + 98, ly + 30, "known");
  svg.rect(margin + 160, ly + 20, 12, 12, "#999999");
  svg.text(margin + 178, ly + 30, "semi-known");
  svg.rect(margin + 270, ly + 20, 12, 12, "#c8b7a6");
  svg.text(margin + 288, ly + 30, "unknown");
  svg.save(file);
}

}  // namespace

std::vector<fs::path> plot_records(const fs::path& records, const fs::path& out) {
  const auto views = load_views(records);
  if (views.empty()) throw std::runtime_error("no trial records under " + records.string());
  fs::create_directories(out);

  std::vector<int> conds;
  for (const auto& v : views)
    if (std::find(conds.begin(), conds.end(), v.condition) == conds.end()) conds.push_back(v.condition);
  std::sort(conds.begin(), conds.end());
  auto stat = [&](int c, double RecordView::*field) {
    std::vector<double> xs;
    for (const auto& v : views)
      if (v.condition == c) xs.push_back(v.*field);
    return harness::mean_sem(xs);
  };

  Series mae_y{"MAE y", {}, ""};
  Series nav{"navigation", {}, "#5b8e7d"}, manip{"manipulation", {}, "#bc4b51"};
  for (int c : conds) {
    mae_y.values.push_back(stat(c, &RecordView::mae_y));
    nav.values.push_back(stat(c, &RecordView::nav));
    manip.values.push_back(stat(c, &RecordView::manip));
  }
  std::vector<fs::path> files{out / "deviation.svg", out / "time.svg", out / "trajectory.svg"};
  bar_chart(files[0], "Lateral deviation from the global plan (mean, SEM)", "MAE y [m]", conds, {mae_y});
  bar_chart(files[1], "Task time per mode (mean, SEM)", "time [s]", conds, {nav, manip});
  trajectory_plot(files[2], views, records);
  return files;
}

}  // namespace unitele::tools
