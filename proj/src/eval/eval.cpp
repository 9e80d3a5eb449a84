#include "glyphner/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include "glyphner/errors.hpp"

namespace glyphner::eval {
namespace {

void finish(Prf& p) {
  p.precision = p.tp + p.fp == 0 ? 0.0 : static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp);
  p.recall = p.tp + p.fn == 0 ? 0.0 : static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fn);
  p.f1 = p.precision + p.recall == 0.0 ? 0.0 : 2.0 * p.precision * p.recall / (p.precision + p.recall);
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sample_variance(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

std::string fixed(double v, int decimals) {
  char b[64];
  std::snprintf(b, sizeof b, "%.*f", decimals, v);
  return b;
}

}  // namespace

F1Report score_spans(const std::vector<std::vector<Span>>& gold, const std::vector<std::vector<Span>>& pred) {
  if (gold.size() != pred.size()) {
    throw ShapeError("scoring " + std::to_string(pred.size()) + " predicted sentences against " +
                     std::to_string(gold.size()) + " gold sentences");
  }
  F1Report r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::set<Span> g(gold[i].begin(), gold[i].end());
    const std::set<Span> p(pred[i].begin(), pred[i].end());
    for (const auto& s : p) {
      auto& t = r.per_type[s.type];
      if (g.contains(s)) {
        ++r.micro.tp;
        ++t.tp;
      } else {
        ++r.micro.fp;
        ++t.fp;
      }
    }
    for (const auto& s : g) {
      if (!p.contains(s)) {
        ++r.micro.fn;
        ++r.per_type[s.type].fn;
      }
    }
  }
  finish(r.micro);
  for (auto& [type, prf] : r.per_type) finish(prf);
  return r;
}

F1Report score_f1(const std::vector<std::vector<std::string>>& gold, const std::vector<std::vector<std::string>>& pred,
                  Scheme scheme) {
  if (gold.size() != pred.size()) {
    throw ShapeError("scoring " + std::to_string(pred.size()) + " predicted sentences against " +
                     std::to_string(gold.size()) + " gold sentences");
  }
  std::vector<std::vector<Span>> gs, ps;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) {
      throw ShapeError("sentence " + std::to_string(i) + ": " + std::to_string(pred[i].size()) +
                       " predicted tags for " + std::to_string(gold[i].size()) + " tokens");
    }
    gs.push_back(corpus::extract_spans(gold[i], scheme));
    ps.push_back(corpus::extract_spans(pred[i], scheme));
  }
  return score_spans(gs, ps);
}

TrialSummary summarize(std::span<const double> scores) {
  if (scores.empty()) throw ConfigError("cannot summarize an empty score list");
  TrialSummary s;
  s.scores.assign(scores.begin(), scores.end());
  s.avg = mean_of(scores);
  s.max = *std::ranges::max_element(scores);
  if (scores.size() >= 2) s.std = std::sqrt(sample_variance(scores, s.avg));
  return s;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("incomplete beta needs x in [0,1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The continued fraction converges quickly only on one side of the mean.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw ConfigError("t distribution needs df > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b, bool pooled) {
  if (a.size() < 2 || b.size() < 2) throw ConfigError("t-test needs at least two scores per sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = sample_variance(a, ma), vb = sample_variance(b, mb);
  TTestResult r;
  double se2 = 0.0;
  if (pooled) {
    r.df = na + nb - 2.0;
    se2 = ((na - 1.0) * va + (nb - 1.0) * vb) / r.df * (1.0 / na + 1.0 / nb);
  } else {
    const double qa = va / na, qb = vb / nb;
    se2 = qa + qb;
    r.df = se2 > 0.0 ? se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0)) : na + nb - 2.0;
  }
  const double diff = ma - mb;
  if (se2 == 0.0) {
    // Degenerate samples: equal means are indistinguishable, unequal means are certain.
    r.t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.p = diff == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = diff / std::sqrt(se2);
  r.p = std::clamp(regularized_incomplete_beta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t)), 0.0, 1.0);
  return r;
}

std::string format_table(const std::vector<TableRow>& rows) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.model.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s  %8s  %8s\n", static_cast<int>(width), "Model", "Avg", "Std dev", "Max",
                "p-value");
  out += buf;
  for (const auto& r : rows) {
    const std::string sd = r.summary.std ? fixed(*r.summary.std * 100.0, 2) : "-";
    const std::string pv = r.p_value ? fixed(*r.p_value, 4) : "-";
    std::snprintf(buf, sizeof buf, "%-*s  %8.2f  %8s  %8.2f  %8s\n", static_cast<int>(width), r.model.c_str(),
                  r.summary.avg * 100.0, sd.c_str(), r.summary.max * 100.0, pv.c_str());
    out += buf;
  }
  return out;
}

}  // namespace glyphner::eval
