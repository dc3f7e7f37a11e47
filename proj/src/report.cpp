#include "icon/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "icon/error.hpp"

namespace icon {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  out.precision(10);
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfigError, path.string() + ": " + e.what());
  }
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

struct Series {
  std::string name;
  std::vector<double> x, y;
};

// Minimal line chart with axes, ticks and a legend.
class Chart {
 public:
  Chart(std::string title, std::string xlabel, std::string ylabel) :
      title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void add(Series s) { series_.push_back(std::move(s)); }
  void log_x() { log_x_ = true; }

  std::string svg() const {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const Series& s : series_) {
      for (double x : s.x) {
        const double v = tx(x);
        x0 = std::min(x0, v);
        x1 = std::max(x1, v);
      }
      for (double y : s.y) {
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
    if (x1 <= x0) x1 = x0 + 1.0;
    if (y1 <= y0) y1 = y0 + 1.0;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    const double L = 70, R = 560, T = 40, B = 330;
    auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (R - L); };
    auto py = [&](double y) { return B - (y - y0) / (y1 - y0) * (B - T); };
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"680\" height=\"380\" font-family=\"sans-serif\" "
         "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"315\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title_ << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << B << "\" x2=\"" << R << "\" y2=\"" << B << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double yv = y0 + (y1 - y0) * k / 4.0;
      o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
      const double xv = x0 + (x1 - x0) * k / 4.0;
      const double xlab = log_x_ ? std::pow(10.0, xv) : xv;
      o << "<text x=\"" << L + (xv - x0) / (x1 - x0) * (R - L) << "\" y=\"" << B + 16
        << "\" text-anchor=\"middle\">" << fmt(xlab) << "</text>\n";
    }
    o << "<text x=\"315\" y=\"365\" text-anchor=\"middle\">" << xlabel_ << "</text>\n";
    o << "<text x=\"16\" y=\"185\" text-anchor=\"middle\" transform=\"rotate(-90 16 185)\">" << ylabel_
      << "</text>\n";
    for (std::size_t s = 0; s < series_.size(); ++s) {
      const char* color = kPalette[s % 6];
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < series_[s].x.size(); ++i) o << px(series_[s].x[i]) << ',' << py(series_[s].y[i]) << ' ';
      o << "\"/>\n";
      o << "<rect x=\"" << R + 12 << "\" y=\"" << T + 18 * s << "\" width=\"10\" height=\"10\" fill=\"" << color
        << "\"/><text x=\"" << R + 26 << "\" y=\"" << T + 18 * s + 9 << "\">" << series_[s].name << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
  }

 private:
  double tx(double x) const { return log_x_ ? std::log10(x) : x; }
  static std::string fmt(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
  }

  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
  bool log_x_ = false;
};

// Overlaid histograms of positive and hardest-negative similarities.
std::string gap_panel(const SimilaritySnapshot& s, double x_offset, const std::string& label) {
  const int bins = 20;
  std::vector<int> pos(bins, 0), neg(bins, 0);
  auto bin = [&](double v) { return std::clamp(static_cast<int>((v + 1.0) / 2.0 * bins), 0, bins - 1); };
  for (double v : s.positive) ++pos[static_cast<std::size_t>(bin(v))];
  for (double v : s.hardest_negative) ++neg[static_cast<std::size_t>(bin(v))];
  const int peak = std::max(1, std::max(*std::max_element(pos.begin(), pos.end()),
                                        *std::max_element(neg.begin(), neg.end())));
  std::ostringstream o;
  const double L = x_offset + 40, W = 280, T = 50, H = 240;
  o << "<text x=\"" << L + W / 2 << "\" y=\"" << T - 14 << "\" text-anchor=\"middle\">" << label
    << " (median gap " << std::round(s.median_gap * 1000.0) / 1000.0 << ")</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T + H << "\" x2=\"" << L + W << "\" y2=\"" << T + H
    << "\" stroke=\"black\"/>\n";
  for (int b = 0; b < bins; ++b) {
    const double bw = W / bins;
    const double hp = H * pos[static_cast<std::size_t>(b)] / peak, hn = H * neg[static_cast<std::size_t>(b)] / peak;
    o << "<rect x=\"" << L + b * bw << "\" y=\"" << T + H - hp << "\" width=\"" << bw << "\" height=\"" << hp
      << "\" fill=\"#2ca02c\" fill-opacity=\"0.5\"/>\n";
    o << "<rect x=\"" << L + b * bw << "\" y=\"" << T + H - hn << "\" width=\"" << bw << "\" height=\"" << hn
      << "\" fill=\"#d62728\" fill-opacity=\"0.5\"/>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    o << "<text x=\"" << L + W * k / 4.0 << "\" y=\"" << T + H + 16 << "\" text-anchor=\"middle\">"
      << -1.0 + 0.5 * k << "</text>\n";
  }
  return o.str();
}

}  // namespace

void write_metrics_files(const MetricsReport& r, const fs::path& dir) {
  open_out(dir / "metrics.json") << to_json(r).dump(1) << '\n';
  json summary = json::array();
  for (const SuiteMetrics& s : r.suites) {
    summary.push_back({{"suite", s.suite},
                       {"mAP", s.metrics.map},
                       {"top1", s.metrics.top1},
                       {"top5", s.metrics.top5},
                       {"top10", s.metrics.top10},
                       {"config_hash", r.config_hash},
                       {"seed", r.seed}});
  }
  open_out(dir / "summary.json") << summary.dump(1) << '\n';
  std::ofstream csv = open_out(dir / "per_query.csv");
  csv << "suite,query_id,AP,first_hit_rank,config_hash,seed\n";
  for (const SuiteMetrics& s : r.suites)
    for (const QueryResult& q : s.metrics.per_query)
      csv << s.suite << ',' << q.query_id << ',' << q.ap << ',' << q.first_hit << ',' << r.config_hash << ','
          << r.seed << '\n';
}

ReportInputs load_report_inputs(const fs::path& dir) {
  ReportInputs in;
  if (fs::exists(dir / "metrics.json")) in.metrics = metrics_report_from_json(read_json(dir / "metrics.json"));
  if (fs::exists(dir / "ablation.json")) in.ablation = ablation_rows_from_json(read_json(dir / "ablation.json"));
  if (fs::exists(dir / "sweep.json")) {
    for (const json& r : read_json(dir / "sweep.json")) {
      in.sweep.push_back({r.at("size").get<int>(), r.at("mAP").get<double>(), r.at("top1").get<double>()});
      in.sweep_hash = r.value("config_hash", std::string());
      in.sweep_seed = r.value("seed", std::uint64_t{0});
    }
  }
  return in;
}

ReportOutput write_report(const ReportInputs& in, const fs::path& dir) {
  ReportOutput out;
  fs::create_directories(dir);
  auto emit = [&](const std::string& name, const std::string& body) {
    open_out(dir / name) << body;
    out.written.push_back(dir / name);
  };

  if (in.metrics) {
    const MetricsReport& m = *in.metrics;
    {
      std::ostringstream t;
      t << "suite,mAP,top1,top5,top10,median_gap,config_hash,seed\n";
      for (const SuiteMetrics& s : m.suites)
        t << s.suite << ',' << s.metrics.map << ',' << s.metrics.top1 << ',' << s.metrics.top5 << ','
          << s.metrics.top10 << ',' << s.metrics.median_similarity_gap() << ',' << m.config_hash << ',' << m.seed
          << '\n';
      emit("suite_metrics.csv", t.str());
    }
    if (m.after.positive.empty()) {
      out.notices.push_back("similarity gap plot skipped: no per-query similarities");
    } else {
      std::ostringstream g;
      g << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"680\" height=\"340\" font-family=\"sans-serif\" "
           "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
      if (!m.before.positive.empty()) g << gap_panel(m.before, 0, "before training");
      g << gap_panel(m.after, 340, "after training");
      g << "<text x=\"40\" y=\"330\" fill=\"#2ca02c\">positive</text>"
           "<text x=\"120\" y=\"330\" fill=\"#d62728\">hardest negative</text>\n</svg>\n";
      emit("similarity_gap.svg", g.str());
      std::ostringstream t;
      t << "phase,median_positive_minus_hardest_negative,config_hash,seed\n";
      if (!m.before.positive.empty()) t << "before," << m.before.median_gap << ',' << m.config_hash << ',' << m.seed << '\n';
      t << "after," << m.after.median_gap << ',' << m.config_hash << ',' << m.seed << '\n';
      emit("similarity_gap.csv", t.str());
    }
    if (m.suites.size() < 2) {
      out.notices.push_back("robustness plot skipped: no perturbation results");
    } else {
      Chart c("mAP per suite", "suite index (0 = clean)", "mAP");
      Series s{"mAP", {}, {}};
      for (std::size_t k = 0; k < m.suites.size(); ++k) {
        s.x.push_back(static_cast<double>(k));
        s.y.push_back(m.suites[k].metrics.map);
      }
      c.add(s);
      emit("robustness.svg", c.svg());
    }
    if (m.loss_curve.empty()) {
      out.notices.push_back("loss curve plot skipped: no loss log");
    } else {
      Chart c("training losses", "step", "loss");
      Series sdm{"L_sdm", {}, {}}, oim{"L_oim", {}, {}}, reg{"L_reg", {}, {}}, cf{"L_cf", {}, {}}, tot{"total", {}, {}};
      std::ostringstream t;
      t << "step,L_sdm,L_oim,L_reg,L_cf,total,config_hash,seed\n";
      // Window-averaged for readability; the CSV keeps every step.
      const std::size_t window = std::max<std::size_t>(1, m.loss_curve.size() / 100);
      for (std::size_t k = 0; k < m.loss_curve.size(); k += window) {
        const std::size_t end = std::min(m.loss_curve.size(), k + window);
        double a = 0, b = 0, r = 0, f = 0, total = 0;
        for (std::size_t i = k; i < end; ++i) {
          a += m.loss_curve[i].sdm;
          b += m.loss_curve[i].oim;
          r += m.loss_curve[i].reg;
          f += m.loss_curve[i].cf;
          total += m.loss_curve[i].total;
        }
        const double n = static_cast<double>(end - k), x = static_cast<double>(m.loss_curve[k].step);
        sdm.x.push_back(x), sdm.y.push_back(a / n);
        oim.x.push_back(x), oim.y.push_back(b / n);
        reg.x.push_back(x), reg.y.push_back(r / n);
        cf.x.push_back(x), cf.y.push_back(f / n);
        tot.x.push_back(x), tot.y.push_back(total / n);
      }
      for (const LossRow& l : m.loss_curve)
        t << l.step << ',' << l.sdm << ',' << l.oim << ',' << l.reg << ',' << l.cf << ',' << l.total << ','
          << m.config_hash << ',' << m.seed << '\n';
      for (Series* s : {&tot, &sdm, &oim, &reg, &cf}) c.add(*s);
      emit("loss_curves.svg", c.svg());
      emit("loss_curves.csv", t.str());
    }
  } else {
    out.notices.push_back("metrics plots skipped: no metrics.json");
  }

  if (in.sweep.empty()) {
    out.notices.push_back("gallery sweep plot skipped: no sweep results");
  } else {
    Chart c("gallery size sweep", "gallery size (scenes)", "score");
    c.log_x();
    Series map{"mAP", {}, {}}, top1{"top-1", {}, {}};
    std::ostringstream t;
    t << "size,mAP,top1,config_hash,seed\n";
    for (const SweepRow& r : in.sweep) {
      map.x.push_back(r.size), map.y.push_back(r.map);
      top1.x.push_back(r.size), top1.y.push_back(r.top1);
      t << r.size << ',' << r.map << ',' << r.top1 << ',' << in.sweep_hash << ',' << in.sweep_seed << '\n';
    }
    c.add(map);
    c.add(top1);
    emit("gallery_sweep.svg", c.svg());
    emit("gallery_sweep.csv", t.str());
  }

  if (in.ablation.empty()) {
    out.notices.push_back("ablation table skipped: no ablation results");
  } else {
    std::ostringstream t, md;
    t << "variant,seed,clean_mAP,clean_top1,perturbed_mAP,config_hash\n";
    std::map<std::string, std::pair<double, int>> mean_clean, mean_pert;
    std::vector<std::string> order;
    for (const AblationRow& r : in.ablation) {
      t << r.variant << ',' << r.seed << ',' << r.clean_map << ',' << r.clean_top1 << ',' << r.perturbed_map << ','
        << r.config_hash << '\n';
      if (!mean_clean.count(r.variant)) order.push_back(r.variant);
      mean_clean[r.variant].first += r.clean_map;
      mean_clean[r.variant].second += 1;
      mean_pert[r.variant].first += r.perturbed_map;
      mean_pert[r.variant].second += 1;
    }
    md << "| variant | clean mAP | perturbed mAP | seeds |\n|---|---|---|---|\n";
    for (const std::string& v : order) {
      const auto [c, n] = mean_clean[v];
      md << "| " << v << " | " << 100.0 * c / n << " | " << 100.0 * mean_pert[v].first / n << " | " << n << " |\n";
    }
    emit("ablation.csv", t.str());
    emit("ablation.md", md.str());
  }
  return out;
}

}  // namespace icon
