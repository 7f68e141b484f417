// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "avt/common.hpp"
#include "avt/encoders.hpp"

#include <json.hpp>

namespace avt::audioseg {

using encoders::SpectrogramInput;

/// Detected audio-activity boundaries over the spectrogram time axis.
/// Boundaries are strictly increasing indices in (0, time_frames); the derived
/// segments [start, end) partition [0, time_frames) exactly.
struct SegmentMap {
  std::size_t time_frames = 0;
  std::vector<std::size_t> boundaries;

  std::size_t segment_count() const { return boundaries.size() + 1; }

  std::vector<std::pair<std::size_t, std::size_t>> segments() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(segment_count());
    std::size_t start = 0;
    for (std::size_t b : boundaries) {
      out.emplace_back(start, b);
      start = b;
    }
    out.emplace_back(start, time_frames);
    return out;
  }

  void validate() const {
    std::size_t prev = 0;
    for (std::size_t b : boundaries) {
      if (b <= prev || b >= time_frames) {
        throw ContractError("SegmentMap: boundary " + std::to_string(b) +
                            " violates strict ordering in (0, " + std::to_string(time_frames) + ")");
      }
      prev = b;
    }
  }
};

struct SegmentationConfig {
  std::size_t sg_window = 5;
  std::size_t sg_order = 2;
};

namespace detail {

// Solves the square system G x = rhs by Gaussian elimination with partial
// pivoting. Systems here are tiny ((order+1)^2).
inline std::vector<double> solve_linear(std::vector<double> g, std::vector<double> rhs,
                                        std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(g[r * n + col]) > std::abs(g[piv * n + col])) piv = r;
    }
    if (g[piv * n + col] == 0.0) throw ContractError("singular normal equations");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(g[col * n + c], g[piv * n + c]);
      std::swap(rhs[col], rhs[piv]);
    }
    const double d = g[col * n + col];
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = g[r * n + col] / d;
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) g[r * n + c] -= f * g[col * n + c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = rhs[i] / g[i * n + i];
  return x;
}

}  // namespace detail

/// Least-squares polynomial smoother. Each point is replaced by the value of
/// the polynomial fit over its window; near the edges the fit over the first
/// (or last) full window is evaluated at the off-center offset, so polynomials
/// up to `order` are reproduced exactly everywhere.
class SavitzkyGolay {
 public:
  SavitzkyGolay(std::size_t window, std::size_t order) : window_(window), order_(order) {
    if (window % 2 == 0 || window <= order) {
      throw ConfigError("savitzky_golay: window must be odd and larger than the order (got window " +
                        std::to_string(window) + ", order " + std::to_string(order) + ")");
    }
    // fit matrix X = (A^T A)^{-1} A^T, offsets t in [-half, half]
    const std::size_t terms = order + 1;
    const long half = static_cast<long>(window / 2);
    std::vector<double> a(window * terms);
    for (std::size_t i = 0; i < window; ++i) {
      const double t = static_cast<double>(static_cast<long>(i) - half);
      double p = 1.0;
      for (std::size_t j = 0; j < terms; ++j) {
        a[i * terms + j] = p;
        p *= t;
      }
    }
    std::vector<double> gram(terms * terms, 0.0);
    for (std::size_t i = 0; i < window; ++i)
      for (std::size_t j = 0; j < terms; ++j)
        for (std::size_t k = 0; k < terms; ++k)
          gram[j * terms + k] += a[i * terms + j] * a[i * terms + k];
    fit_.assign(terms * window, 0.0);
    for (std::size_t col = 0; col < window; ++col) {
      std::vector<double> rhs(terms);
      for (std::size_t j = 0; j < terms; ++j) rhs[j] = a[col * terms + j];
      const std::vector<double> x = detail::solve_linear(gram, rhs, terms);
      for (std::size_t j = 0; j < terms; ++j) fit_[j * window + col] = x[j];
    }
  }

  std::size_t window() const { return window_; }

  /// Coefficients evaluating the fitted polynomial at offset t from the window
  /// center; t = 0 gives the classic center smoothing coefficients.
  std::vector<double> coefficients(double t = 0.0) const {
    std::vector<double> w(window_, 0.0);
    double p = 1.0;
    for (std::size_t j = 0; j <= order_; ++j) {
      for (std::size_t i = 0; i < window_; ++i) w[i] += p * fit_[j * window_ + i];
      p *= t;
    }
    return w;
  }

  std::vector<double> smooth(const std::vector<double>& signal) const {
    const std::size_t n = signal.size();
    if (n < window_) {
      throw ConfigError("savitzky_golay: signal length " + std::to_string(n) +
                        " shorter than window " + std::to_string(window_));
    }
    const std::size_t half = window_ / 2;
    const std::vector<double> center = coefficients(0.0);
    std::vector<double> out(n);
    for (std::size_t i = half; i + half < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < window_; ++k) acc += center[k] * signal[i - half + k];
      out[i] = acc;
    }
    for (std::size_t i = 0; i < half; ++i) {
      const std::vector<double> w = coefficients(static_cast<double>(i) - static_cast<double>(half));
      double acc = 0.0;
      for (std::size_t k = 0; k < window_; ++k) acc += w[k] * signal[k];
      out[i] = acc;
      const std::vector<double> wr = coefficients(static_cast<double>(half) - static_cast<double>(i));
      acc = 0.0;
      for (std::size_t k = 0; k < window_; ++k) acc += wr[k] * signal[n - window_ + k];
      out[n - 1 - i] = acc;
    }
    return out;
  }

 private:
  std::size_t window_;
  std::size_t order_;
  std::vector<double> fit_;  // (order+1) x window
};

inline std::vector<double> savitzky_golay(const std::vector<double>& signal, std::size_t window,
                                          std::size_t order) {
  return SavitzkyGolay(window, order).smooth(signal);
}

/// Smooths each frequency bin of a (time x freq) spectrogram along time.
inline SpectrogramInput savitzky_golay_time(const SpectrogramInput& spec, std::size_t window,
                                            std::size_t order) {
  SavitzkyGolay sg(window, order);
  SpectrogramInput out = spec;
  std::vector<double> column(spec.time_frames);
  for (std::size_t f = 0; f < spec.freq_bins; ++f) {
    for (std::size_t t = 0; t < spec.time_frames; ++t) column[t] = spec.at(t, f);
    const std::vector<double> smoothed = sg.smooth(column);
    for (std::size_t t = 0; t < spec.time_frames; ++t) out.at(t, f) = smoothed[t];
  }
  return out;
}

/// Per-frame activity-change scores: smooth each frequency bin along time,
/// take the temporal gradient (central differences, one-sided at the edges),
/// average absolute gradients over the frequency axis, then smooth the score
/// once more and clamp at zero.
inline std::vector<double> change_scores(const SpectrogramInput& spec,
                                         const SegmentationConfig& cfg = {}) {
  if (spec.time_frames < cfg.sg_window) {
    throw ConfigError("change_scores: " + std::to_string(spec.time_frames) +
                      " frames is shorter than the smoothing window " +
                      std::to_string(cfg.sg_window));
  }
  const SpectrogramInput smoothed = savitzky_golay_time(spec, cfg.sg_window, cfg.sg_order);
  const std::size_t t_frames = spec.time_frames, bins = spec.freq_bins;
  std::vector<double> scores(t_frames, 0.0);
  for (std::size_t f = 0; f < bins; ++f) {
    for (std::size_t t = 0; t < t_frames; ++t) {
      double g;
      if (t == 0) {
        g = smoothed.at(1, f) - smoothed.at(0, f);
      } else if (t + 1 == t_frames) {
        g = smoothed.at(t, f) - smoothed.at(t - 1, f);
      } else {
        g = 0.5 * (smoothed.at(t + 1, f) - smoothed.at(t - 1, f));
      }
      scores[t] += std::abs(g);
    }
  }
  const double inv_bins = 1.0 / static_cast<double>(bins);
  for (double& s : scores) s *= inv_bins;
  std::vector<double> out = SavitzkyGolay(cfg.sg_window, cfg.sg_order).smooth(scores);
  for (double& s : out) s = std::max(s, 0.0);
  return out;
}

/// Splits the time axis into `num_segments` intervals at the highest-scoring
/// change points. Selection is greedy by descending score with earliest-index
/// tie-breaking and at least one frame between chosen boundaries; frames whose
/// score does not exceed 1e-12 are ineligible, and any shortfall is filled
/// from a uniform partition (so constant input yields uniform segments).
inline SegmentMap detect_segments(const SpectrogramInput& spec, std::size_t num_segments,
                                  const SegmentationConfig& cfg = {}) {
  if (num_segments < 1 || num_segments > spec.time_frames) {
    throw ConfigError("detect_segments: num_segments " + std::to_string(num_segments) +
                      " out of range [1, " + std::to_string(spec.time_frames) + "]");
  }
  const std::size_t t_frames = spec.time_frames;
  SegmentMap map;
  map.time_frames = t_frames;
  if (num_segments == 1) return map;

  const std::vector<double> scores = change_scores(spec, cfg);
  const std::size_t need = num_segments - 1;

  std::vector<std::size_t> order(t_frames > 1 ? t_frames - 1 : 0);
  std::iota(order.begin(), order.end(), 1);  // candidate boundaries in (0, T)
  std::stable_sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  std::vector<bool> chosen(t_frames, false);
  std::vector<std::size_t> picked;
  picked.reserve(need);
  const auto too_close = [&](std::size_t cand) {
    for (std::size_t b : picked) {
      const std::size_t d = cand > b ? cand - b : b - cand;
      if (d < 2) return true;
    }
    return false;
  };
  for (std::size_t cand : order) {
    if (picked.size() == need) break;
    if (scores[cand] <= 1e-12 || too_close(cand)) continue;
    picked.push_back(cand);
    chosen[cand] = true;
  }
  // uniform-partition fill for whatever the scores did not provide
  for (std::size_t i = 1; i < num_segments && picked.size() < need; ++i) {
    const auto u = static_cast<std::size_t>(std::llround(
        static_cast<double>(i) * static_cast<double>(t_frames) / static_cast<double>(num_segments)));
    const std::size_t b = std::min(std::max<std::size_t>(u, 1), t_frames - 1);
    if (!chosen[b]) {
      picked.push_back(b);
      chosen[b] = true;
    }
  }
  for (std::size_t b = 1; b < t_frames && picked.size() < need; ++b) {
    if (!chosen[b]) {
      picked.push_back(b);
      chosen[b] = true;
    }
  }

  std::sort(picked.begin(), picked.end());
  map.boundaries = std::move(picked);
  map.validate();
  return map;
}

// ---------------------------------------------------------------------------
// spectrogram matrix file format + segment JSON (CLI surface)
// ---------------------------------------------------------------------------

/// Text matrix format: optional '#' comment lines, then a header line
/// "time_frames freq_bins", then time_frames rows of freq_bins values
/// (whitespace or comma separated).
inline SpectrogramInput read_spectrogram(std::istream& in) {
  std::string line;
  SpectrogramInput spec;
  bool have_header = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    for (char& ch : line) {
      if (ch == ',') ch = ' ';
    }
    const std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    if (!have_header) {
      if (!(ls >> spec.time_frames >> spec.freq_bins) || spec.time_frames == 0 ||
          spec.freq_bins == 0) {
        throw ConfigError("spectrogram file: bad header line (expected 'time_frames freq_bins')");
      }
      spec.values.assign(spec.time_frames * spec.freq_bins, 0.0);
      have_header = true;
      continue;
    }
    if (row >= spec.time_frames) throw ConfigError("spectrogram file: more rows than the header declares");
    for (std::size_t f = 0; f < spec.freq_bins; ++f) {
      if (!(ls >> spec.values[row * spec.freq_bins + f])) {
        throw ConfigError("spectrogram file: row " + std::to_string(row) + " has fewer than " +
                          std::to_string(spec.freq_bins) + " values");
      }
    }
    ++row;
  }
  if (!have_header || row != spec.time_frames) {
    throw ConfigError("spectrogram file: expected " +
                      std::to_string(have_header ? spec.time_frames : 0) + " rows, got " +
                      std::to_string(row));
  }
  return spec;
}

inline SpectrogramInput read_spectrogram_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spectrogram file: " + path);
  return read_spectrogram(in);
}

inline nlohmann::json segment_map_to_json(const SegmentMap& map) {
  nlohmann::json out;
  out["boundaries"] = map.boundaries;
  auto segs = nlohmann::json::array();
  for (const auto& [start, end] : map.segments()) {
    segs.push_back(nlohmann::json::array({start, end}));
  }
  out["segments"] = segs;
  return out;
}

}  // namespace avt::audioseg
