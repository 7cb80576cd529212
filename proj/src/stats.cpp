#include "cardmatch/stats.hpp"

#include <cmath>

#include "cardmatch/errors.hpp"
#include "json.hpp"

namespace cardmatch {

namespace {

constexpr double kInvSqrtPi = 0.56418958354775628695;  // 1 / sqrt(pi)

// erf by Taylor series; converges to machine precision within ~40 terms for
// |x| <= 2.
double erf_series(double x) {
  const double x2 = x * x;
  double term = x;
  double sum = x;
  for (int n = 1; n < 80; ++n) {
    term *= -x2 / static_cast<double>(n);
    const double add = term / static_cast<double>(2 * n + 1);
    sum += add;
    if (std::abs(add) < 1e-18 * std::abs(sum)) break;
  }
  return 2.0 * kInvSqrtPi * sum;
}

// erfc by the Laplace continued fraction, valid for x > 0 and sharp for
// x >= 2: erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(...))))
double erfc_cf(double x) {
  // Modified Lentz evaluation with b_n = x, a_n = n/2.
  const double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int n = 1; n < 300; ++n) {
    const double a = 0.5 * static_cast<double>(n);
    // b = x for every level; a_n = n/2.
    d = x + a * d;
    if (std::abs(d) < tiny) d = tiny;
    c = x + a / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-17) break;
  }
  return std::exp(-x * x) * kInvSqrtPi / f;
}

}  // namespace

double erfc_own(double x) {
  if (x < 0.0) return 2.0 - erfc_own(-x);
  if (x < 2.0) return 1.0 - erf_series(x);
  if (x > 27.0) return 0.0;  // below the smallest normal double
  return erfc_cf(x);
}

double normal_cdf(double x) {
  return 0.5 * erfc_own(-x / std::sqrt(2.0));
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // Use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) to keep the continued
  // fraction in its fast-converging region.
  if (x > (a + 1.0) / (a + b + 2.0))
    return 1.0 - incomplete_beta(b, a, 1.0 - x);

  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  // Lentz continued fraction for the standard beta CF.
  const double tiny = 1e-300;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double f = d;
  for (int m = 1; m < 400; ++m) {
    const double dm = static_cast<double>(m);
    double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    f *= c * d;

    num = -(a + dm) * (a + b + dm) * x /
          ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(ln_front) * f / a;
}

double students_t_cdf(double t, double df) {
  const double x = df / (df + t * t);
  const double half_tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

double binomial_half_cdf(std::size_t n, std::size_t k) {
  if (k >= n) return 1.0;
  const double scale = std::ldexp(1.0, -static_cast<int>(n));  // 2^-n
  double coeff = 1.0;  // C(n, 0)
  double sum = coeff;
  for (std::size_t i = 1; i <= k; ++i) {
    coeff *= static_cast<double>(n - i + 1) / static_cast<double>(i);
    sum += coeff;
  }
  return sum * scale;
}

OutcomeReport two_proportion_ztest(std::size_t events_t, std::size_t events_c,
                                   std::size_t n,
                                   bool continuity_correction) {
  if (n == 0 || events_t > n || events_c > n)
    throw Error("two_proportion_ztest: events must lie in [0, n], n >= 1");
  OutcomeReport r;
  r.test = "two_proportion_z";
  r.n = n;
  r.events_t = events_t;
  r.events_c = events_c;
  const double dn = static_cast<double>(n);
  r.prop_t = static_cast<double>(events_t) / dn;
  r.prop_c = static_cast<double>(events_c) / dn;
  r.estimate = r.prop_t - r.prop_c;

  const double pooled =
      static_cast<double>(events_t + events_c) / (2.0 * dn);
  if (pooled <= 0.0 || pooled >= 1.0) {
    r.degenerate = true;
    r.note = "pooled proportion is degenerate; no variation to test";
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  const double se = std::sqrt(2.0 * pooled * (1.0 - pooled) / dn);
  double num = std::abs(r.estimate);
  if (continuity_correction) num = std::max(0.0, num - 1.0 / dn);
  const double z = num / se;
  r.statistic = r.estimate >= 0.0 ? z : -z;
  r.p_value = erfc_own(z / std::sqrt(2.0));  // = 2 * (1 - Phi(z))
  return r;
}

OutcomeReport mcnemar_test(std::size_t discordant_tc,
                           std::size_t discordant_ct,
                           bool continuity_correction) {
  OutcomeReport r;
  const std::size_t total = discordant_tc + discordant_ct;
  if (total == 0) {
    r.test = "mcnemar_exact";
    r.degenerate = true;
    r.note = "no discordant pairs";
    r.p_value = 1.0;
    return r;
  }
  const double b = static_cast<double>(discordant_tc);
  const double c = static_cast<double>(discordant_ct);
  if (total <= 25) {
    r.test = "mcnemar_exact";
    r.statistic = (b - c) * (b - c) / (b + c);
    const std::size_t k = std::min(discordant_tc, discordant_ct);
    r.p_value = std::min(1.0, 2.0 * binomial_half_cdf(total, k));
  } else {
    r.test = "mcnemar_chi2";
    double num = std::abs(b - c);
    if (continuity_correction) num = std::max(0.0, num - 1.0);
    r.statistic = num * num / (b + c);
    // Chi-square(1) upper tail equals the two-sided normal tail of sqrt.
    r.p_value = erfc_own(std::sqrt(r.statistic) / std::sqrt(2.0));
  }
  return r;
}

OutcomeReport paired_mean_difference(const std::vector<double>& diffs) {
  const std::size_t n = diffs.size();
  if (n < 2) throw Error("paired t-test needs at least 2 pairs");
  OutcomeReport r;
  r.test = "paired_t";
  r.n = n;
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  r.estimate = mean;

  if (sd == 0.0) {
    r.degenerate = true;
    if (mean == 0.0) {
      r.note = "all differences are zero";
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      // Constant nonzero difference: the statistic diverges, so the p-value
      // underflows to 0 rather than being reported as a tiny bogus number.
      r.note = "differences have zero variance around a nonzero mean";
      r.statistic = mean > 0.0 ? HUGE_VAL : -HUGE_VAL;
      r.p_value = 0.0;
    }
    return r;
  }
  const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.statistic = t;
  const double df = static_cast<double>(n - 1);
  r.p_value = 2.0 * (1.0 - students_t_cdf(std::abs(t), df));
  return r;
}

OutcomeReport analyze_outcomes(const std::vector<double>& treated,
                               const std::vector<double>& controls,
                               const OutcomeSpec& spec) {
  if (treated.size() != controls.size() || treated.empty())
    throw Error("outcome vectors must be pair-aligned and nonempty");
  bool binary = true;
  for (const auto* v : {&treated, &controls}) {
    for (double x : *v)
      if (x != 0.0 && x != 1.0) binary = false;
  }
  OutcomeTest test = spec.test;
  if (test == OutcomeTest::Auto)
    test = binary ? OutcomeTest::McNemar : OutcomeTest::PairedT;
  if (test == OutcomeTest::McNemar && !binary)
    throw Error("mcnemar test requires a binary outcome column");

  const std::size_t n = treated.size();
  if (test == OutcomeTest::McNemar) {
    std::size_t b = 0, c = 0, et = 0, ec = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (treated[i] == 1.0) ++et;
      if (controls[i] == 1.0) ++ec;
      if (treated[i] == 1.0 && controls[i] == 0.0) ++b;
      if (treated[i] == 0.0 && controls[i] == 1.0) ++c;
    }
    OutcomeReport r = mcnemar_test(b, c, spec.continuity_correction);
    r.n = n;
    r.events_t = et;
    r.events_c = ec;
    r.prop_t = static_cast<double>(et) / static_cast<double>(n);
    r.prop_c = static_cast<double>(ec) / static_cast<double>(n);
    r.estimate = r.prop_t - r.prop_c;
    return r;
  }
  std::vector<double> diffs(n);
  for (std::size_t i = 0; i < n; ++i) diffs[i] = treated[i] - controls[i];
  return paired_mean_difference(diffs);
}

std::string outcome_to_json(const OutcomeReport& report) {
  auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  nlohmann::json doc{{"test", report.test},
                     {"n", report.n},
                     {"estimate", num(report.estimate)},
                     {"statistic", num(report.statistic)},
                     {"p_value", num(report.p_value)},
                     {"degenerate", report.degenerate},
                     {"note", report.note}};
  if (report.test != "paired_t") {
    doc["events_treated"] = report.events_t;
    doc["events_control"] = report.events_c;
    doc["prop_treated"] = num(report.prop_t);
    doc["prop_control"] = num(report.prop_c);
  }
  return doc.dump(2) + "\n";
}

}  // namespace cardmatch
