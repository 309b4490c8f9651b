#include "stressnp/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <sstream>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_spline.h>

#include "stressnp/dsp.hpp"
#include "stressnp/errors.hpp"
#include "text_util.hpp"

namespace stressnp {

namespace {

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

void require_len(std::span<const double> x, std::size_t n, const char* what) {
  if (x.size() < n)
    throw ParameterError(std::string(what) + " needs at least " +
                         std::to_string(n) + " values, got " +
                         std::to_string(x.size()));
}

struct SplineDeleter {
  void operator()(gsl_spline* s) const { gsl_spline_free(s); }
};
struct AccelDeleter {
  void operator()(gsl_interp_accel* a) const { gsl_interp_accel_free(a); }
};

// Natural cubic spline through (t, v), sampled at t0, t0 + 1/fs, ...
std::vector<double> resample_cubic(const std::vector<double>& t,
                                   const std::vector<double>& v, double fs) {
  std::unique_ptr<gsl_spline, SplineDeleter> spline(
      gsl_spline_alloc(gsl_interp_cspline, t.size()));
  std::unique_ptr<gsl_interp_accel, AccelDeleter> acc(gsl_interp_accel_alloc());
  if (gsl_spline_init(spline.get(), t.data(), v.data(), t.size()) != GSL_SUCCESS)
    throw ParameterError("tachogram spline initialisation failed");
  std::vector<double> out;
  const double span = t.back() - t.front();
  const auto count = static_cast<std::size_t>(std::floor(span * fs + 1e-9)) + 1;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    double tk = std::min(t.front() + static_cast<double>(k) / fs, t.back());
    out.push_back(gsl_spline_eval(spline.get(), tk, acc.get()));
  }
  return out;
}

struct GslQuiet {
  GslQuiet() { previous = gsl_set_error_handler_off(); }
  ~GslQuiet() { gsl_set_error_handler(previous); }
  gsl_error_handler_t* previous;
};

}  // namespace

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

HrFeatures hr_features(std::span<const double> rr_ms) {
  require_len(rr_ms, 1, "hr_features");
  double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double rr : rr_ms) {
    const double hr = 60000.0 / rr;
    sum += hr;
    lo = std::min(lo, hr);
    hi = std::max(hi, hr);
  }
  return {sum / static_cast<double>(rr_ms.size()), hi - lo};
}

HrvTime hrv_time(std::span<const double> rr_ms) {
  require_len(rr_ms, 2, "hrv_time");
  double ss = 0.0;
  for (std::size_t i = 0; i + 1 < rr_ms.size(); ++i) {
    const double d = rr_ms[i + 1] - rr_ms[i];
    ss += d * d;
  }
  return {sample_sd(rr_ms), std::sqrt(ss / static_cast<double>(rr_ms.size() - 1))};
}

Flagged csi(std::span<const double> rr_ms) {
  require_len(rr_ms, 3, "csi");
  std::vector<double> diff, sum;
  for (std::size_t i = 0; i + 1 < rr_ms.size(); ++i) {
    diff.push_back(rr_ms[i + 1] - rr_ms[i]);
    sum.push_back(rr_ms[i + 1] + rr_ms[i]);
  }
  // SD1 = SD(diff)/sqrt2, SD2 = SD(sum)/sqrt2; the sqrt2 cancels in the ratio.
  const double sd1 = sample_sd(diff);
  const double sd2 = sample_sd(sum);
  if (sd1 == 0.0) return {0.0, true};
  return {sd2 / sd1, false};
}

Flagged sample_entropy(std::span<const double> rr_ms, int m, double r_factor) {
  if (m < 1) throw ParameterError("sample entropy needs m >= 1");
  const auto mm = static_cast<std::size_t>(m);
  require_len(rr_ms, mm + 2, "sample_entropy");
  const double sd = sample_sd(rr_ms);
  const double r = r_factor * sd;
  const std::size_t templates = rr_ms.size() - mm;

  std::size_t a = 0, b = 0;
  for (std::size_t i = 0; i + 1 < templates; ++i) {
    for (std::size_t j = i + 1; j < templates; ++j) {
      bool match = true;
      for (std::size_t k = 0; k < mm && match; ++k)
        match = std::abs(rr_ms[i + k] - rr_ms[j + k]) <= r;
      if (!match) continue;
      ++b;
      if (std::abs(rr_ms[i + mm] - rr_ms[j + mm]) <= r) ++a;
    }
  }
  if (a == 0 || b == 0) return {0.0, true};
  return {-std::log(static_cast<double>(a) / static_cast<double>(b)), sd == 0.0};
}

RqaResult rqa(std::span<const double> rr_ms, double eps_factor) {
  require_len(rr_ms, 4, "rqa");
  const double eps = eps_factor * sample_sd(rr_ms);
  const std::size_t n = rr_ms.size();

  std::size_t recurrent = 0, on_lines = 0;
  std::map<std::size_t, std::size_t> hist;
  // Upper triangle only; the matrix is symmetric so ratios are unchanged.
  for (std::size_t k = 1; k < n; ++k) {
    std::size_t run = 0;
    for (std::size_t i = 0; i + k <= n; ++i) {
      const bool rec = i + k < n && std::abs(rr_ms[i] - rr_ms[i + k]) <= eps;
      if (rec) {
        ++run;
        ++recurrent;
        continue;
      }
      if (run >= 2) {
        on_lines += run;
        ++hist[run];
      }
      run = 0;
    }
  }
  RqaResult out;
  if (recurrent == 0) {
    out.degenerate = true;
    return out;
  }
  out.det = static_cast<double>(on_lines) / static_cast<double>(recurrent);
  std::size_t lines = 0;
  for (const auto& [len, count] : hist) lines += count;
  for (const auto& [len, count] : hist) {
    const double p = static_cast<double>(count) / static_cast<double>(lines);
    out.len_entropy -= p * std::log(p);
  }
  return out;
}

HrvFrequency hrv_freq(std::span<const double> rr_ms, double window_len_s) {
  require_len(rr_ms, 4, "hrv_freq");
  HrvFrequency out;
  if (sample_sd(rr_ms) == 0.0) {
    out.degenerate = true;
    return out;
  }

  std::vector<double> t, v(rr_ms.begin(), rr_ms.end());
  double acc = 0.0;
  for (double rr : rr_ms) {
    acc += rr / 1000.0;
    t.push_back(acc);
  }
  GslQuiet quiet;
  auto x = resample_cubic(t, v, kTachogramHz);
  const std::size_t m = x.size();
  const double mu = mean(x);
  for (double& s : x) s -= mu;

  std::vector<double> w(m);
  for (std::size_t k = 0; k < m; ++k)
    w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                static_cast<double>(m));
  double wss = 0.0;
  for (double wk : w) wss += wk * wk;

  const auto nfft = std::max(
      m, static_cast<std::size_t>(std::lround(window_len_s * kTachogramHz)));
  const double df = kTachogramHz / static_cast<double>(nfft);

  double lf = 0.0, hf = 0.0, lf_max = -1.0, hf_max = -1.0;
  for (std::size_t j = 1; j <= nfft / 2; ++j) {
    const double f = static_cast<double>(j) * df;
    const bool in_lf = f >= kLfLowHz && f < kLfHighHz;
    const bool in_hf = f >= kLfHighHz && f < kHfHighHz;
    if (!in_lf && !in_hf) continue;
    std::complex<double> sum = 0.0;
    for (std::size_t k = 0; k < m; ++k)
      sum += x[k] * w[k] *
             std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j * k) /
                                 static_cast<double>(nfft));
    double psd = std::norm(sum) / (kTachogramHz * wss);
    if (2 * j != nfft) psd *= 2.0;  // one-sided
    if (in_lf) {
      lf += psd * df;
      if (psd > lf_max) { lf_max = psd; out.lf_peak = f; }
    } else {
      hf += psd * df;
      if (psd > hf_max) { hf_max = psd; out.hf_peak = f; }
    }
  }
  out.lf_abs = lf;
  out.hf_abs = hf;
  if (lf <= 0.0) out.lf_peak = 0.0;
  if (hf <= 0.0) out.hf_peak = 0.0;
  const double total = lf + hf;
  if (total > 0.0) {
    out.lf_rel = lf / total;
    out.hf_rel = hf / total;
  } else {
    out.degenerate = true;
  }
  if (lf > 0.0)
    out.hf_lf_ratio = hf / lf;
  else
    out.degenerate = true;
  return out;
}

TonicFeatures gsr_tonic_features(std::span<const double> tonic, double fs) {
  require_len(tonic, 2, "gsr_tonic_features");
  std::vector<double> d1;
  d1.reserve(tonic.size() - 1);
  for (std::size_t i = 0; i + 1 < tonic.size(); ++i)
    d1.push_back((tonic[i + 1] - tonic[i]) * fs);
  return {mean(tonic), sample_sd(tonic), mean(d1), sample_sd(d1)};
}

PhasicFeatures gsr_phasic_features(std::span<const double> phasic) {
  require_len(phasic, 2, "gsr_phasic_features");
  double mav = 0.0;
  for (double v : phasic) mav += std::abs(v);
  return {sample_sd(phasic), mav / static_cast<double>(phasic.size())};
}

std::vector<std::string> FeatureMatrix::participants() const {
  std::vector<std::string> ids;
  for (const auto& r : rows)
    if (std::find(ids.begin(), ids.end(), r.participant_id) == ids.end())
      ids.push_back(r.participant_id);
  return ids;
}

FeatureMatrix FeatureMatrix::for_participant(const std::string& id) const {
  FeatureMatrix out;
  for (const auto& r : rows)
    if (r.participant_id == id) out.rows.push_back(r);
  return out;
}

FeatureMatrix FeatureMatrix::excluding_participant(const std::string& id) const {
  FeatureMatrix out;
  for (const auto& r : rows)
    if (r.participant_id != id) out.rows.push_back(r);
  return out;
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.rows.reserve(indices.size());
  for (auto i : indices) out.rows.push_back(rows.at(i));
  return out;
}

RowMatrix FeatureMatrix::X() const {
  RowMatrix x(static_cast<Eigen::Index>(rows.size()), kNumFeatures);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < kNumFeatures; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i].features.values[j];
  return x;
}

Eigen::VectorXd FeatureMatrix::y() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    y(static_cast<Eigen::Index>(i)) = rows[i].label;
  return y;
}

ExtractionStats& ExtractionStats::operator+=(const ExtractionStats& o) {
  windows += o.windows;
  emitted += o.emitted;
  dropped_rr += o.dropped_rr;
  dropped_nonfinite += o.dropped_nonfinite;
  flagged += o.flagged;
  return *this;
}

namespace {

std::span<const double> slice(const std::vector<double>& x, double fs,
                              double start_s, double end_s) {
  auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil(start_s * fs - 1e-9)));
  auto hi = static_cast<std::size_t>(std::max(0.0, std::ceil(end_s * fs - 1e-9)));
  lo = std::min(lo, x.size());
  hi = std::min(hi, x.size());
  return {x.data() + lo, hi - lo};
}

}  // namespace

Extraction extract_features(const Recording& rec, const WindowSpec& spec,
                            const BinaryLabelMap& map) {
  validate_recording(rec);
  const auto& ecg = rec.ecg();
  const auto& gsr = rec.gsr();

  const auto peaks = detect_r_peaks(ecg.samples, ecg.sample_rate_hz);
  const auto gsr_parts = decompose_gsr(gsr.samples, gsr.sample_rate_hz);

  Extraction out;
  const auto windows = make_windows(rec, spec, map);
  out.stats.windows = windows.size();
  for (const auto& w : windows) {
    RPeakSeries local;
    for (double t : peaks.peak_times_s)
      if (t >= w.start_s && t < w.end_s) local.peak_times_s.push_back(t);
    const auto rr = rr_intervals(local);
    if (rr.size() < 2) {
      ++out.stats.dropped_rr;
      continue;
    }

    FeatureVector fv;
    bool flagged = false;
    const auto hr = hr_features(rr);
    fv[Feature::hr_range] = hr.hr_range;
    fv[Feature::hr_mean] = hr.hr_mean;
    const auto td = hrv_time(rr);
    fv[Feature::sdnn] = td.sdnn;
    fv[Feature::rmssd] = td.rmssd;
    if (rr.size() >= 3) {
      auto c = csi(rr);
      fv[Feature::csi] = c.value;
      flagged |= c.degenerate;
    } else {
      flagged = true;
    }
    if (rr.size() >= 4) {
      auto se = sample_entropy(rr);
      fv[Feature::sampen] = se.value;
      auto rq = rqa(rr);
      fv[Feature::rqa_det] = rq.det;
      fv[Feature::rqa_len_entropy] = rq.len_entropy;
      auto fq = hrv_freq(rr, spec.length_s);
      fv[Feature::lf_abs] = fq.lf_abs;
      fv[Feature::lf_rel] = fq.lf_rel;
      fv[Feature::lf_peak] = fq.lf_peak;
      fv[Feature::hf_abs] = fq.hf_abs;
      fv[Feature::hf_rel] = fq.hf_rel;
      fv[Feature::hf_peak] = fq.hf_peak;
      fv[Feature::hf_lf_ratio] = fq.hf_lf_ratio;
      flagged |= se.degenerate || rq.degenerate || fq.degenerate;
    } else {
      flagged = true;
    }

    auto tonic = slice(gsr_parts.tonic, gsr.sample_rate_hz, w.start_s, w.end_s);
    auto phasic = slice(gsr_parts.phasic, gsr.sample_rate_hz, w.start_s, w.end_s);
    if (tonic.size() < 2) {
      ++out.stats.dropped_nonfinite;
      continue;
    }
    auto tf = gsr_tonic_features(tonic, gsr.sample_rate_hz);
    fv[Feature::tonic_mean] = tf.mean;
    fv[Feature::tonic_sd] = tf.sd;
    fv[Feature::tonic_d1_mean] = tf.d1_mean;
    fv[Feature::tonic_d1_sd] = tf.d1_sd;
    auto pf = gsr_phasic_features(phasic);
    fv[Feature::phasic_sd] = pf.sd;
    fv[Feature::phasic_mav] = pf.mav;

    if (!std::all_of(fv.values.begin(), fv.values.end(),
                     [](double v) { return std::isfinite(v); })) {
      ++out.stats.dropped_nonfinite;
      continue;
    }
    if (flagged) ++out.stats.flagged;
    out.matrix.rows.push_back(
        {rec.participant_id, w.start_s, w.end_s, w.source_label, w.label, fv});
  }
  out.stats.emitted = out.matrix.rows.size();
  return out;
}

void write_feature_csv(const FeatureMatrix& fm, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string(), "cannot write feature file");
  out << "participant_id,window_start_s,window_end_s,source_label,label";
  for (auto name : kFeatureNames) out << ',' << name;
  out << '\n';
  for (const auto& r : fm.rows) {
    out << r.participant_id << ',' << detail::format_double(r.window_start_s)
        << ',' << detail::format_double(r.window_end_s) << ','
        << to_string(r.source_label) << ',' << r.label;
    for (double v : r.features.values) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

FeatureMatrix read_feature_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError(file.string(), "cannot open feature file");
  std::string line;
  std::getline(in, line);
  auto header = detail::split(detail::trim(line), ',');
  if (header.size() != 5 + kNumFeatures || header[0] != "participant_id")
    throw ValidationError("header", file.string() + ": unexpected feature header");
  for (std::size_t j = 0; j < kNumFeatures; ++j)
    if (header[5 + j] != kFeatureNames[j])
      throw ValidationError("header", "column " + std::to_string(5 + j) +
                                          " should be " + std::string(kFeatureNames[j]));
  FeatureMatrix fm;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = detail::trim(line);
    if (t.empty()) continue;
    auto cols = detail::split(t, ',');
    const std::string where = "line " + std::to_string(lineno);
    if (cols.size() != header.size())
      throw ValidationError(where, "expected " + std::to_string(header.size()) + " columns");
    FeatureWindow w;
    w.participant_id = cols[0];
    auto start = detail::parse_double(cols[1]);
    auto end = detail::parse_double(cols[2]);
    auto src = parse_task_label(cols[3]);
    if (!start || !end || !src || (cols[4] != "0" && cols[4] != "1"))
      throw ValidationError(where, "malformed window metadata");
    w.window_start_s = *start;
    w.window_end_s = *end;
    w.source_label = *src;
    w.label = cols[4] == "1" ? 1 : 0;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      auto v = detail::parse_double(cols[5 + j]);
      if (!v || !std::isfinite(*v))
        throw ValidationError(where + "." + std::string(kFeatureNames[j]),
                              "not a finite number");
      w.features.values[j] = *v;
    }
    fm.rows.push_back(std::move(w));
  }
  return fm;
}

void sort_rows(FeatureMatrix& fm) {
  std::stable_sort(fm.rows.begin(), fm.rows.end(), [](const auto& a, const auto& b) {
    if (a.participant_id != b.participant_id) return a.participant_id < b.participant_id;
    return a.window_start_s < b.window_start_s;
  });
}

}  // namespace stressnp
