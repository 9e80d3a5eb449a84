#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glyphner/corpus.hpp"

namespace glyphner::eval {

using corpus::Scheme;
using corpus::Span;

struct Prf {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct F1Report {
  Prf micro;
  std::map<std::string, Prf> per_type;
};

// Micro-averaged exact-match scoring over (start, end, type). Throws
// ShapeError when the sentence counts or lengths differ.
F1Report score_spans(const std::vector<std::vector<Span>>& gold, const std::vector<std::vector<Span>>& pred);
F1Report score_f1(const std::vector<std::vector<std::string>>& gold, const std::vector<std::vector<std::string>>& pred,
                  Scheme scheme);

struct TrialSummary {
  std::vector<double> scores;
  double avg = 0.0;
  std::optional<double> std;  // sample standard deviation; absent for n = 1
  double max = 0.0;
};

// Throws ConfigError for an empty list.
TrialSummary summarize(std::span<const double> scores);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
double regularized_incomplete_beta(double a, double b, double x);
// CDF of Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);

// Two-sided test of equal means; Welch by default, pooled-variance Student
// when `pooled`. Needs at least two scores per sample (ConfigError).
TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b, bool pooled = false);

inline constexpr double kSignificance = 0.05;

struct TableRow {
  std::string model;
  TrialSummary summary;
  std::optional<double> p_value;  // against the baseline; absent on the baseline row
};

// Plain-text table: Model / Avg / Std dev / Max / p-value, scores shown as
// percentages with two decimals.
std::string format_table(const std::vector<TableRow>& rows);

}  // namespace glyphner::eval
