#include "stressnp/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>
#include <numbers>
#include <numeric>
#include <string>

#include "stressnp/errors.hpp"

namespace stressnp {

namespace {

using cplx = std::complex<double>;

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

double prewarp(double f_hz, double fs) {
  return 2.0 * fs * std::tan(std::numbers::pi * f_hz / fs);
}

// Transfer function of one section evaluated at z.
cplx section_response(const Biquad& s, cplx z) {
  cplx zi = 1.0 / z;
  cplx num = s.b0 + s.b1 * zi + s.b2 * zi * zi;
  cplx den = 1.0 + s.a1 * zi + s.a2 * zi * zi;
  return num / den;
}

double section_dc_gain(const Biquad& s) {
  return (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
}

// Groups digital poles into real-coefficient denominators.
std::vector<Biquad> pair_poles(std::vector<cplx> poles) {
  std::vector<Biquad> sections;
  std::vector<double> real;
  for (const auto& p : poles) {
    double tol = 1e-10 * std::max(1.0, std::abs(p));
    if (std::abs(p.imag()) <= tol) {
      real.push_back(p.real());
    } else if (p.imag() > 0.0) {
      Biquad b;
      b.a1 = -2.0 * p.real();
      b.a2 = std::norm(p);
      sections.push_back(b);
    }
  }
  std::sort(real.begin(), real.end());
  for (std::size_t i = 0; i + 1 < real.size(); i += 2) {
    Biquad b;
    b.a1 = -(real[i] + real[i + 1]);
    b.a2 = real[i] * real[i + 1];
    sections.push_back(b);
  }
  if (real.size() % 2 == 1) {
    Biquad b;
    b.a1 = -real.back();
    b.a2 = 0.0;
    sections.push_back(b);
  }
  return sections;
}

}  // namespace

void check_filter_spec(const FilterSpec& spec) {
  const double fs = spec.sample_rate_hz;
  if (!(fs > 0.0) || !std::isfinite(fs))
    throw ParameterError("sample rate must be positive");
  if (spec.order < 1) throw ParameterError("filter order must be >= 1");
  const double nyq = fs / 2.0;
  if (!(spec.low_hz > 0.0) || !(spec.low_hz < nyq))
    throw ParameterError("cutoff " + std::to_string(spec.low_hz) +
                         " Hz must lie in (0, " + std::to_string(nyq) + ")");
  if (spec.kind == FilterKind::bandpass) {
    if (!(spec.high_hz < nyq))
      throw ParameterError("upper cutoff " + std::to_string(spec.high_hz) +
                           " Hz must be below Nyquist " + std::to_string(nyq));
    if (!(spec.low_hz < spec.high_hz))
      throw ParameterError("bandpass requires low < high");
  }
}

std::vector<Biquad> design_butterworth(const FilterSpec& spec) {
  check_filter_spec(spec);
  const int n = spec.order;
  const double fs = spec.sample_rate_hz;

  std::vector<cplx> proto;
  for (int k = 0; k < n; ++k)
    proto.push_back(std::polar(1.0, std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n)));

  std::vector<cplx> poles;
  cplx z_ref;
  if (spec.kind == FilterKind::lowpass) {
    const double wc = prewarp(spec.low_hz, fs);
    for (const auto& p : proto) poles.push_back(bilinear(wc * p, fs));
    z_ref = 1.0;
  } else {
    const double w1 = prewarp(spec.low_hz, fs);
    const double w2 = prewarp(spec.high_hz, fs);
    const double bw = w2 - w1;
    const double w0sq = w1 * w2;
    for (const auto& p : proto) {
      cplx a = p * bw / 2.0;
      cplx root = std::sqrt(a * a - w0sq);
      poles.push_back(bilinear(a + root, fs));
      poles.push_back(bilinear(a - root, fs));
    }
    const double omega0 = 2.0 * std::atan(std::sqrt(w0sq) / (2.0 * fs));
    z_ref = std::polar(1.0, omega0);
  }

  auto sos = pair_poles(std::move(poles));
  for (auto& s : sos) {
    if (spec.kind == FilterKind::bandpass) {
      s.b0 = 1.0; s.b1 = 0.0; s.b2 = -1.0;  // zeros at z = +1 and z = -1
    } else if (s.a2 == 0.0) {
      s.b0 = 1.0; s.b1 = 1.0; s.b2 = 0.0;
    } else {
      s.b0 = 1.0; s.b1 = 2.0; s.b2 = 1.0;
    }
  }
  cplx h = 1.0;
  for (const auto& s : sos) h *= section_response(s, z_ref);
  const double g = 1.0 / std::abs(h);
  sos.front().b0 *= g;
  sos.front().b1 *= g;
  sos.front().b2 *= g;
  return sos;
}

double sos_magnitude(std::span<const Biquad> sos, double freq_hz, double fs) {
  cplx z = std::polar(1.0, 2.0 * std::numbers::pi * freq_hz / fs);
  cplx h = 1.0;
  for (const auto& s : sos) h *= section_response(s, z);
  return std::abs(h);
}

std::vector<double> sos_filter(std::span<const Biquad> sos,
                               std::span<const double> x, bool steady_start) {
  std::vector<double> y(x.begin(), x.end());
  double level = x.empty() ? 0.0 : x.front();
  for (const auto& s : sos) {
    double z1 = 0.0, z2 = 0.0;
    if (steady_start) {
      const double g = section_dc_gain(s);
      z1 = (g - s.b0) * level;
      z2 = (s.b2 - s.a2 * g) * level;
      level *= g;
    }
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> butterworth_filter(std::span<const double> x,
                                       const FilterSpec& spec) {
  auto sos = design_butterworth(spec);
  const std::size_t n = x.size();
  if (n < static_cast<std::size_t>(3 * spec.order) || n < 2)
    throw ParameterError("signal of " + std::to_string(n) +
                         " samples is shorter than 3 * order");
  const std::size_t pad =
      std::min<std::size_t>(static_cast<std::size_t>(3 * spec.poles()), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i)
    ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  auto fwd = sos_filter(sos, ext, true);
  std::reverse(fwd.begin(), fwd.end());
  auto bwd = sos_filter(sos, fwd, true);
  std::reverse(bwd.begin(), bwd.end());
  return {bwd.begin() + static_cast<std::ptrdiff_t>(pad),
          bwd.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

GsrComponents decompose_gsr(std::span<const double> gsr, double fs) {
  if (!(fs > 4.0)) throw ParameterError("GSR sample rate must exceed 4 Hz");
  return {butterworth_filter(gsr, FilterSpec::lowpass(kTonicCutoffHz, fs)),
          butterworth_filter(gsr, FilterSpec::bandpass(kPhasicLowHz,
                                                       kPhasicHighHz, fs))};
}

namespace {

struct Candidate {
  std::size_t index;
  double value;
};

double mean_of(const std::deque<double>& d) {
  return d.empty() ? 0.0 : std::accumulate(d.begin(), d.end(), 0.0) /
                               static_cast<double>(d.size());
}

void push_bounded(std::deque<double>& d, double v, int cap) {
  d.push_back(v);
  while (static_cast<int>(d.size()) > cap) d.pop_front();
}

}  // namespace

RPeakSeries detect_r_peaks(std::span<const double> ecg, double fs,
                           const QrsParams& params) {
  if (!(fs >= 100.0)) throw ParameterError("ECG sample rate must be >= 100 Hz");
  const std::size_t n = ecg.size();
  if (static_cast<double>(n) / fs < 5.0)
    throw ParameterError("ECG must be at least 5 s long");

  // Bandpass, derivative, rectification, moving-window integration. All
  // stages are centred so the integrated signal is aligned with the ECG.
  auto band = butterworth_filter(
      ecg, FilterSpec::bandpass(params.band_low_hz, params.band_high_hz, fs, 2));
  std::vector<double> rect(n, 0.0);
  for (std::size_t i = 2; i + 2 < n; ++i)
    rect[i] = std::abs((2.0 * band[i + 2] + band[i + 1] - band[i - 1] -
                        2.0 * band[i - 2]) * fs / 8.0);

  const auto half_int = static_cast<std::size_t>(
      std::max(1.0, std::round(params.integration_s * fs / 2.0)));
  std::vector<double> csum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) csum[i + 1] = csum[i] + rect[i];
  std::vector<double> mwi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo = i >= half_int ? i - half_int : 0;
    std::size_t hi = std::min(n, i + half_int + 1);
    mwi[i] = (csum[hi] - csum[lo]) / static_cast<double>(hi - lo);
  }

  // Candidate peaks: local maxima that dominate +-half a refractory period.
  const auto half_ref = static_cast<std::size_t>(params.refractory_s * fs / 2.0);
  std::vector<Candidate> cands;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1] && mwi[i] > 0.0)) continue;
    std::size_t lo = i >= half_ref ? i - half_ref : 0;
    std::size_t hi = std::min(n - 1, i + half_ref);
    bool dominant = true;
    for (std::size_t j = lo; j <= hi && dominant; ++j)
      if (mwi[j] > mwi[i] || (mwi[j] == mwi[i] && j < i)) dominant = false;
    if (dominant) cands.push_back({i, mwi[i]});
  }

  std::deque<double> qrs_est, noise_est, rr_est;
  // Learning phase: one maximum per second over the first 8 seconds.
  const auto sec = static_cast<std::size_t>(fs);
  for (std::size_t s = 0; s < 8 && (s + 1) * sec <= n; ++s)
    push_bounded(qrs_est,
                 *std::max_element(mwi.begin() + static_cast<std::ptrdiff_t>(s * sec),
                                   mwi.begin() + static_cast<std::ptrdiff_t>((s + 1) * sec)),
                 params.estimate_history);

  const auto refractory = static_cast<std::size_t>(params.refractory_s * fs);
  std::vector<Candidate> detected;
  std::vector<Candidate> pending;  // sub-threshold peaks since the last beat

  auto threshold = [&] {
    const double noise = mean_of(noise_est);
    return noise + params.threshold_coeff * (mean_of(qrs_est) - noise);
  };
  auto accept = [&](const Candidate& c) {
    if (!detected.empty())
      push_bounded(rr_est, static_cast<double>(c.index - detected.back().index),
                   params.estimate_history);
    push_bounded(qrs_est, c.value, params.estimate_history);
    detected.push_back(c);
    pending.clear();
  };
  auto search_back = [&](std::size_t now) {
    while (!detected.empty() && !rr_est.empty() &&
           static_cast<double>(now - detected.back().index) >
               params.searchback_factor * mean_of(rr_est)) {
      const Candidate* best = nullptr;
      for (const auto& p : pending)
        if (p.index > detected.back().index + refractory && p.index < now &&
            (!best || p.value > best->value))
          best = &p;
      if (!best || best->value <= 0.5 * threshold()) break;
      Candidate found = *best;
      std::erase_if(pending, [&](const Candidate& p) { return p.index <= found.index; });
      auto keep = pending;
      accept(found);
      pending = std::move(keep);
    }
  };

  if (mean_of(qrs_est) > 0.0) {
    for (const auto& c : cands) {
      search_back(c.index);
      if (!detected.empty() && c.index - detected.back().index < refractory) continue;
      if (c.value > threshold()) {
        accept(c);
      } else {
        push_bounded(noise_est, c.value, params.estimate_history);
        pending.push_back(c);
      }
    }
    search_back(n);
  }

  // Refine each detection to the local ECG maximum.
  const auto half_refine = static_cast<std::size_t>(std::round(params.refine_halfwidth_s * fs));
  RPeakSeries out;
  std::size_t last = 0;
  double last_value = 0.0;
  for (const auto& d : detected) {
    std::size_t lo = d.index >= half_refine ? d.index - half_refine : 0;
    std::size_t hi = std::min(n - 1, d.index + half_refine);
    std::size_t best = lo;
    for (std::size_t j = lo; j <= hi; ++j)
      if (ecg[j] > ecg[best]) best = j;
    if (!out.peak_times_s.empty() && best - last < refractory) {
      if (d.value <= last_value) continue;
      out.peak_times_s.pop_back();
    }
    out.peak_times_s.push_back(static_cast<double>(best) / fs);
    last = best;
    last_value = d.value;
  }
  return out;
}

std::vector<double> rr_intervals(const RPeakSeries& peaks) {
  std::vector<double> rr;
  const auto& t = peaks.peak_times_s;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    double ms = (t[i + 1] - t[i]) * 1000.0;
    if (ms >= kMinRrMs && ms <= kMaxRrMs) rr.push_back(ms);
  }
  return rr;
}

}  // namespace stressnp
