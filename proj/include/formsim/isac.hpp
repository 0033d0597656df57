#pragma once

// DM-RS channel-matrix synthesis for a given true range / radial velocity,
// 2D-FFT range/velocity estimation, and the per-link delay/Doppler and
// range/velocity Cramer-Rao lower bounds.
//
// Simulation starts at the post-demodulation channel matrix: entry (m, n) is
//   xi * exp(-j 2 pi q_n df tau) * exp(+j 2 pi w_m Ts fd) + noise,
// with tau = 2 r / c and fd = 2 rdot fc / c. Radial velocity is range rate
// (positive = receding).

#include <algorithm>
#include <map>

#include "formsim/numerics.hpp"

namespace formsim {

struct DmrsPattern {
  int n_total = 0;             // N, subcarriers in the full grid
  int m_total = 0;             // M, OFDM symbols in the full grid
  std::vector<int> q_indices;  // |N| DM-RS subcarrier indices, strictly increasing
  std::vector<int> w_indices;  // |M| DM-RS symbol indices, strictly increasing
  double delta_f = 0.0;        // subcarrier spacing, Hz
  double symbol_time = 0.0;    // Ts, s
  double carrier_freq = 0.0;   // fc, Hz

  void validate() const {
    if (delta_f <= 0.0 || symbol_time <= 0.0 || carrier_freq <= 0.0)
      throw ConfigError("dmrs: delta_f, symbol_time, carrier_freq must be positive");
    if (q_indices.empty() || w_indices.empty())
      throw ConfigError("dmrs: index sets must be non-empty");
    auto check = [](const std::vector<int>& v, int total, const char* what) {
      int prev = -1;
      for (int x : v) {
        if (x <= prev) throw ConfigError(std::string("dmrs: ") + what + " not strictly increasing");
        if (x < 0 || x >= total) throw ConfigError(std::string("dmrs: ") + what + " out of bounds");
        prev = x;
      }
    };
    check(q_indices, n_total, "q_indices");
    check(w_indices, m_total, "w_indices");
  }

  // Table-1 default: N = 256, M = 140, 128 comb-2 subcarriers (q_n = 2n) and
  // 40 symbols evenly spread over 0..139 (w_m = floor(m M / M_J)).
  static DmrsPattern table1() {
    DmrsPattern p;
    p.n_total = 256;
    p.m_total = 140;
    p.q_indices.resize(128);
    for (int n = 0; n < 128; ++n) p.q_indices[n] = 2 * n;
    p.w_indices.resize(40);
    for (int m = 0; m < 40; ++m) p.w_indices[m] = (m * 140) / 40;
    p.delta_f = 120e3;
    p.symbol_time = 8.92e-6;
    p.carrier_freq = 24e9;
    p.validate();
    return p;
  }

  // Effective index slope of q_n versus n (comb factor generalized to
  // non-uniform sets): sum n q_n / sum n^2.
  double q_slope() const {
    double num = 0.0, den = 0.0;
    for (size_t n = 0; n < q_indices.size(); ++n) {
      num += double(n) * q_indices[n];
      den += double(n) * double(n);
    }
    if (num == 0.0) throw ConfigError("dmrs: degenerate q index set");
    return num / den;
  }

  double w_slope() const {
    double num = 0.0, den = 0.0;
    for (size_t m = 0; m < w_indices.size(); ++m) {
      num += double(m) * w_indices[m];
      den += double(m) * double(m);
    }
    if (num == 0.0) throw ConfigError("dmrs: degenerate w index set");
    return num / den;
  }

  // Corrected range bin (peak index L = 1), m.
  double range_bin() const {
    return kSpeedOfLight / (2.0 * double(q_indices.size()) * delta_f * q_slope());
  }

  // Corrected velocity bin (peak index L = 1), m/s.
  double velocity_bin() const {
    return kSpeedOfLight /
           (2.0 * double(w_indices.size()) * symbol_time * carrier_freq * w_slope());
  }

  // One-period unambiguous span of the range estimator, m.
  double unambiguous_range() const { return range_bin() * double(q_indices.size()); }

  // Signed unambiguous radial velocity, m/s (half a period either way).
  double unambiguous_velocity() const {
    return 0.5 * velocity_bin() * double(w_indices.size());
  }
};

struct ChannelGrid {
  DmrsPattern pattern;
  std::vector<cplx> entries;  // |M| x |N|, row-major (rows = DM-RS symbols)
  double attenuation = 1.0;   // xi
  double snr = 1.0;           // per-sample linear power ratio xi^2 / sigma^2

  cplx& at(int m, int n) { return entries[size_t(m) * pattern.q_indices.size() + n]; }
  const cplx& at(int m, int n) const {
    return entries[size_t(m) * pattern.q_indices.size() + n];
  }
};

inline ChannelGrid synthesize_channel(const DmrsPattern& pattern, double range,
                                      double range_rate, double attenuation, double snr,
                                      Rng* rng = nullptr) {
  pattern.validate();
  if (snr <= 0.0) throw InvalidArgumentError("synthesize_channel: snr must be positive");
  if (attenuation <= 0.0) throw InvalidArgumentError("synthesize_channel: attenuation must be positive");
  if (range < 0.0 || range >= kSpeedOfLight / (2.0 * pattern.delta_f))
    throw AmbiguityError("synthesize_channel: range outside the unambiguous delay region");
  if (std::abs(range_rate) >= kSpeedOfLight / (2.0 * pattern.carrier_freq * pattern.symbol_time))
    throw AmbiguityError("synthesize_channel: radial velocity outside the unambiguous Doppler region");

  const double tau = 2.0 * range / kSpeedOfLight;
  const double fd = 2.0 * range_rate * pattern.carrier_freq / kSpeedOfLight;
  const size_t mm = pattern.w_indices.size();
  const size_t nn = pattern.q_indices.size();
  ChannelGrid g;
  g.pattern = pattern;
  g.attenuation = attenuation;
  g.snr = snr;
  g.entries.resize(mm * nn);
  const double noise_sd = rng ? attenuation / std::sqrt(2.0 * snr) : 0.0;
  for (size_t m = 0; m < mm; ++m) {
    const double symbol_phase = 2.0 * kPi * pattern.w_indices[m] * pattern.symbol_time * fd;
    for (size_t n = 0; n < nn; ++n) {
      const double carrier_phase = -2.0 * kPi * pattern.q_indices[n] * pattern.delta_f * tau;
      const double phase = carrier_phase + symbol_phase;
      cplx v = attenuation * cplx(std::cos(phase), std::sin(phase));
      if (rng) v += cplx(rng->gauss(0.0, noise_sd), rng->gauss(0.0, noise_sd));
      g.entries[m * nn + n] = v;
    }
  }
  return g;
}

struct RangeVelocityEstimate {
  double range = 0.0;     // m
  double velocity = 0.0;  // m/s, range rate
};

namespace detail {

// argmax of |x| over the transform output.
inline int peak_index(const std::vector<cplx>& x) {
  int best = 0;
  double best_mag = std::norm(x[0]);
  for (size_t i = 1; i < x.size(); ++i) {
    double m = std::norm(x[i]);
    if (m > best_mag) {
      best_mag = m;
      best = int(i);
    }
  }
  return best;
}

// Modal value, ties broken toward the smaller index.
inline int modal_index(const std::vector<int>& peaks) {
  std::map<int, int> counts;
  for (int p : peaks) ++counts[p];
  int best = peaks.front(), best_count = 0;
  for (const auto& [idx, cnt] : counts) {
    if (cnt > best_count) {
      best = idx;
      best_count = cnt;
    }
  }
  return best;
}

}  // namespace detail

// Per-symbol-row |N|-point IFFT peaks and per-subcarrier-column |M|-point FFT
// peaks, aggregated by modal bin; the peak indices are converted through the
// corrected bin formulas. Peak indices above half length are read as negative
// (aliased) bins.
inline RangeVelocityEstimate estimate_range_velocity(const ChannelGrid& grid) {
  const int mm = int(grid.pattern.w_indices.size());
  const int nn = int(grid.pattern.q_indices.size());
  double total = 0.0;
  for (const cplx& v : grid.entries) total += std::norm(v);
  if (total == 0.0) throw NoPeakError("estimate_range_velocity: all-zero grid");

  std::vector<int> row_peaks(mm);
  std::vector<cplx> buf;
  for (int m = 0; m < mm; ++m) {
    buf.assign(grid.entries.begin() + size_t(m) * nn, grid.entries.begin() + size_t(m + 1) * nn);
    row_peaks[m] = detail::peak_index(dft(buf, /*inverse=*/true));
  }
  std::vector<int> col_peaks(nn);
  for (int n = 0; n < nn; ++n) {
    buf.resize(mm);
    for (int m = 0; m < mm; ++m) buf[m] = grid.at(m, n);
    col_peaks[n] = detail::peak_index(dft(buf, /*inverse=*/false));
  }

  // Range bins are one-sided [0, |N|); velocity bins above half length are
  // negative (aliased) Doppler.
  int l_range = detail::modal_index(row_peaks);
  int l_vel = detail::modal_index(col_peaks);
  if (l_vel > mm / 2) l_vel -= mm;

  return {double(l_range) * grid.pattern.range_bin(),
          double(l_vel) * grid.pattern.velocity_bin()};
}

struct LinkCrlb {
  double range_var = 0.0;     // m^2
  double velocity_var = 0.0;  // (m/s)^2
  double delay_var = 0.0;     // s^2
  double doppler_var = 0.0;   // Hz^2
};

struct LinkFim {
  double j_tt = 0.0;  // delay-delay
  double j_tf = 0.0;  // delay-Doppler cross term
  double j_ff = 0.0;  // Doppler-Doppler
};

// Analytic 2x2 Fisher information over (tau, fd) for the coherent channel
// model. snr is the received per-sample power ratio xi^2 / sigma^2, under
// which the attenuation factor cancels out of the information matrix.
inline LinkFim fim_link(const DmrsPattern& pattern, double attenuation, double snr) {
  pattern.validate();
  if (snr <= 0.0) throw InvalidArgumentError("fim_link: snr must be positive");
  (void)attenuation;  // enters only through snr = xi^2 / sigma^2

  const double mm = double(pattern.w_indices.size());
  const double nn = double(pattern.q_indices.size());
  double sq1 = 0.0, sq2 = 0.0;
  for (int q : pattern.q_indices) {
    sq1 += q;
    sq2 += double(q) * q;
  }
  double sw1 = 0.0, sw2 = 0.0;
  for (int w : pattern.w_indices) {
    sw1 += w;
    sw2 += double(w) * w;
  }

  const double common = 8.0 * kPi * kPi * snr;
  LinkFim f;
  f.j_tt = common * pattern.delta_f * pattern.delta_f * mm * sq2;
  f.j_ff = common * pattern.symbol_time * pattern.symbol_time * nn * sw2;
  f.j_tf = -common * pattern.delta_f * pattern.symbol_time * sq1 * sw1;
  return f;
}

inline LinkCrlb crlb_link(const DmrsPattern& pattern, double attenuation, double snr) {
  const LinkFim f = fim_link(pattern, attenuation, snr);
  const double det = f.j_tt * f.j_ff - f.j_tf * f.j_tf;
  if (!(det > 1e-12 * std::abs(f.j_tt * f.j_ff)))
    throw UnobservableError("crlb_link: singular Fisher information");
  LinkCrlb c;
  c.delay_var = f.j_ff / det;
  c.doppler_var = f.j_tt / det;
  c.range_var = kSpeedOfLight * kSpeedOfLight / 4.0 * c.delay_var;
  c.velocity_var = kSpeedOfLight * kSpeedOfLight /
                   (4.0 * pattern.carrier_freq * pattern.carrier_freq) * c.doppler_var;
  return c;
}

}  // namespace formsim
