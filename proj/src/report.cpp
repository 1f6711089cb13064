#include "dpmc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dpmc {

const char* const kCsvHeader =
    "seed,method,task,T,K,eta,xi,xi_exponent,nfe,sliced_w2,mean_error,cov_frobenius_error,"
    "residual_mean,tv_grid,runtime_ms";

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_line(const ResultRow& r) {
  std::ostringstream s;
  s << r.seed << ',' << r.method << ',' << r.task << ',' << r.T << ',' << r.K << ','
    << format_double(r.eta) << ',' << format_double(r.xi) << ',' << format_double(r.xi_exponent)
    << ',' << r.nfe << ',' << format_double(r.sliced_w2) << ',' << format_double(r.mean_error)
    << ',' << format_double(r.cov_frobenius_error) << ',' << format_double(r.residual_mean) << ','
    << (r.tv_grid ? format_double(*r.tv_grid) : "") << ',' << format_double(r.runtime_ms);
  return s.str();
}

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) out << csv_line(r) << '\n';
}

void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(out, rows);
}

void write_trend_csv(const std::filesystem::path& path, const std::string& axis,
                     const std::vector<TrendPoint>& trend) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << axis << ",median_sliced_w2,mad_sliced_w2,n\n";
  for (const auto& p : trend) {
    out << format_double(p.value) << ',' << format_double(p.median) << ',' << format_double(p.mad)
        << ',' << p.n << '\n';
  }
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& loss) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < loss.size(); ++i) out << i + 1 << ',' << format_double(loss[i]) << '\n';
}

namespace {

struct Box {
  double lo = 0.0;
  double hi = 1.0;
};

Box range_of(const std::vector<Vector>& a, const std::vector<Vector>& b, int axis) {
  Box r{INFINITY, -INFINITY};
  for (const auto* set : {&a, &b}) {
    for (const auto& x : *set) {
      r.lo = std::min(r.lo, x[axis]);
      r.hi = std::max(r.hi, x[axis]);
    }
  }
  if (!(r.hi > r.lo)) r = {r.lo - 1.0, r.lo + 1.0};
  const double pad = 0.05 * (r.hi - r.lo);
  return {r.lo - pad, r.hi + pad};
}

}  // namespace

std::string svg_overlay(const std::vector<Vector>& samples, const std::vector<Vector>& reference,
                        const std::string& title) {
  const int W = 480, H = 480, M = 30;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << M << "\" y=\"18\" font-size=\"13\">" << title
    << " (blue: sampler, orange: oracle)</text>\n";
  if (samples.empty()) return s.str() + "</svg>\n";

  const int dim = static_cast<int>(samples.front().size());
  const Box bx = range_of(samples, reference, 0);
  auto px = [&](double v) { return M + (v - bx.lo) / (bx.hi - bx.lo) * (W - 2 * M); };

  if (dim >= 2) {
    const Box by = range_of(samples, reference, 1);
    auto py = [&](double v) { return H - M - (v - by.lo) / (by.hi - by.lo) * (H - 2 * M); };
    auto dots = [&](const std::vector<Vector>& xs, const char* color) {
      const std::size_t stride = std::max<std::size_t>(1, xs.size() / 2000);
      for (std::size_t i = 0; i < xs.size(); i += stride) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"1.5\" fill=\"%s\" fill-opacity=\"0.4\"/>\n",
                      px(xs[i][0]), py(xs[i][1]), color);
        s << buf;
      }
    };
    dots(reference, "#e08020");
    dots(samples, "#2060c0");
  } else {
    const int bins = 50;
    auto hist = [&](const std::vector<Vector>& xs) {
      std::vector<double> h(bins, 0.0);
      for (const auto& x : xs) {
        const int b = std::clamp(static_cast<int>((x[0] - bx.lo) / (bx.hi - bx.lo) * bins), 0, bins - 1);
        h[static_cast<std::size_t>(b)] += 1.0 / static_cast<double>(xs.size());
      }
      return h;
    };
    const auto hs = hist(samples);
    const auto hr = reference.empty() ? std::vector<double>(bins, 0.0) : hist(reference);
    const double top = std::max(*std::max_element(hs.begin(), hs.end()), *std::max_element(hr.begin(), hr.end()));
    const double bw = (W - 2.0 * M) / bins;
    for (int b = 0; b < bins; ++b) {
      for (const auto& [h, color] : {std::pair{&hr, "#e08020"}, std::pair{&hs, "#2060c0"}}) {
        const double hh = (*h)[static_cast<std::size_t>(b)] / top * (H - 2 * M);
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"%s\" fill-opacity=\"0.5\"/>\n",
                      M + b * bw, H - M - hh, bw, hh, color);
        s << buf;
      }
    }
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace dpmc
