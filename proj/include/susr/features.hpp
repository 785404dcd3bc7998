// susr/features.hpp

// Copyright 2026 The susr Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SUSR_FEATURES_HPP
#define SUSR_FEATURES_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "susr/common.hpp"

namespace susr {

using FloatMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PcmUtterance {
  std::string utt_id;
  std::vector<float> samples;  // amplitude, nominally in [-1, 1)
  double sample_rate = 16000.0;
};

// Per-utterance feature matrix; one row per 10 ms-hop frame.
struct FeatureMatrix {
  std::string utt_id;
  FloatMatrix frames;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int dim() const { return static_cast<int>(frames.cols()); }
};

struct MfccConfig {
  double frame_len_ms = 25.0;
  double frame_shift_ms = 10.0;
  int num_static = 20;  // includes C0
  int mel_filters = 30;
  int fft_size = 512;
  double preemphasis = 0.97;
  bool use_deltas = true;
  bool cepstral_mean_norm = false;
  // A frame is voiced iff its log energy is within vad_offset_db of the
  // utterance maximum and its energy exceeds vad_energy_floor.
  double vad_offset_db = 30.0;
  double vad_energy_floor = 1e-8;

  void validate() const {
    if (frame_len_ms < frame_shift_ms)
      throw UsageError("frame_len_ms must be >= frame_shift_ms");
    if (num_static < 1) throw UsageError("num_static must be >= 1");
    if (mel_filters < num_static)
      throw UsageError("mel_filters must be >= num_static");
  }

  int frame_samples(double sample_rate) const {
    return static_cast<int>(std::lround(frame_len_ms * sample_rate / 1000.0));
  }
  int shift_samples(double sample_rate) const {
    return static_cast<int>(std::lround(frame_shift_ms * sample_rate / 1000.0));
  }
};

namespace detail {

constexpr double kMelLogFloor = 1e-10;
constexpr double kEnergyLogGuard = 1e-20;

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// In-place iterative radix-2 FFT; n must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>> &a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; i++) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; k++) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Triangular mel filterbank, rows = filters, cols = FFT bins [0, nfft/2].
inline Eigen::MatrixXd mel_filterbank(int num_filters, int nfft, double sample_rate) {
  const int num_bins = nfft / 2 + 1;
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(num_filters + 2);
  for (int m = 0; m < num_filters + 2; m++)
    edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (num_filters + 1));
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(num_filters, num_bins);
  for (int m = 0; m < num_filters; m++) {
    double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < num_bins; k++) {
      double f = k * sample_rate / nfft;
      double w = 0.0;
      if (f >= left && f <= center && center > left)
        w = (f - left) / (center - left);
      else if (f > center && f <= right && right > center)
        w = (right - f) / (right - center);
      if (w > 0.0) fb(m, k) = w;
    }
  }
  return fb;
}

// Orthonormal DCT-II, rows = kept coefficients, cols = mel channels.
inline Eigen::MatrixXd dct_matrix(int num_coeffs, int num_channels) {
  Eigen::MatrixXd dct(num_coeffs, num_channels);
  const double norm0 = std::sqrt(1.0 / num_channels);
  const double norm = std::sqrt(2.0 / num_channels);
  for (int i = 0; i < num_coeffs; i++)
    for (int j = 0; j < num_channels; j++)
      dct(i, j) = (i == 0 ? norm0 : norm) *
                  std::cos(std::numbers::pi * i * (2 * j + 1) / (2.0 * num_channels));
  return dct;
}

inline int count_frames(std::size_t num_samples, int frame, int shift) {
  if (num_samples < static_cast<std::size_t>(frame)) return 0;
  return static_cast<int>((num_samples - frame) / shift) + 1;
}

}  // namespace detail

// Static MFCCs (T x num_static): pre-emphasis, Hamming window, power
// spectrum, mel filterbank, log, DCT-II.
inline FeatureMatrix compute_mfcc(const PcmUtterance &pcm, const MfccConfig &cfg) {
  cfg.validate();
  if (pcm.sample_rate <= 0) throw DataError("sample_rate must be positive");
  const int frame = cfg.frame_samples(pcm.sample_rate);
  const int shift = cfg.shift_samples(pcm.sample_rate);
  if (pcm.samples.size() < static_cast<std::size_t>(frame))
    throw DataError("utterance '" + pcm.utt_id + "' shorter than one frame (" +
                    std::to_string(pcm.samples.size()) + " < " +
                    std::to_string(frame) + " samples)");
  const int num_frames = detail::count_frames(pcm.samples.size(), frame, shift);
  const int nfft = detail::next_pow2(std::max(cfg.fft_size, frame));
  const int num_bins = nfft / 2 + 1;

  std::vector<double> emphasized(pcm.samples.size());
  emphasized[0] = pcm.samples[0] * (1.0 - cfg.preemphasis);
  for (std::size_t i = 1; i < pcm.samples.size(); i++)
    emphasized[i] = pcm.samples[i] - cfg.preemphasis * pcm.samples[i - 1];

  std::vector<double> window(frame);
  for (int i = 0; i < frame; i++)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (frame - 1));

  const Eigen::MatrixXd fb = detail::mel_filterbank(cfg.mel_filters, nfft, pcm.sample_rate);
  const Eigen::MatrixXd dct = detail::dct_matrix(cfg.num_static, cfg.mel_filters);

  FeatureMatrix out;
  out.utt_id = pcm.utt_id;
  out.frames.resize(num_frames, cfg.num_static);
  std::vector<std::complex<double>> buf(nfft);
  Eigen::VectorXd power(num_bins), mel(cfg.mel_filters);
  for (int t = 0; t < num_frames; t++) {
    const int off = t * shift;
    for (int i = 0; i < frame; i++)
      buf[i] = std::complex<double>(emphasized[off + i] * window[i], 0.0);
    for (int i = frame; i < nfft; i++) buf[i] = 0.0;
    detail::fft_radix2(buf);
    for (int k = 0; k < num_bins; k++) power(k) = std::norm(buf[k]);
    mel = fb * power;
    for (int m = 0; m < cfg.mel_filters; m++)
      mel(m) = std::log(std::max(mel(m), detail::kMelLogFloor));
    Eigen::VectorXd coeffs = dct * mel;
    for (int i = 0; i < cfg.num_static; i++)
      out.frames(t, i) = static_cast<float>(coeffs(i));
  }
  if (!out.frames.allFinite())
    throw NumericalError("non-finite MFCC output for utterance '" + pcm.utt_id + "'");
  return out;
}

// Appends delta and delta-delta coefficients computed with the +-2 frame
// regression window, replicating edge frames: d_t = sum_n n*(c_{t+n}-c_{t-n}) / (2*sum_n n^2).
inline FeatureMatrix append_deltas(const FeatureMatrix &statics) {
  const int T = statics.num_frames();
  const int D = statics.dim();
  if (T < 1) throw DataError("append_deltas: empty feature matrix");
  constexpr int kWindow = 2;
  constexpr double kDenom = 10.0;  // 2 * (1^2 + 2^2)

  auto regress = [&](const FloatMatrix &src, FloatMatrix *dst) {
    dst->resize(T, D);
    for (int t = 0; t < T; t++) {
      for (int d = 0; d < D; d++) {
        double acc = 0.0;
        for (int n = 1; n <= kWindow; n++) {
          int hi = std::min(t + n, T - 1);
          int lo = std::max(t - n, 0);
          acc += n * (static_cast<double>(src(hi, d)) - src(lo, d));
        }
        (*dst)(t, d) = static_cast<float>(acc / kDenom);
      }
    }
  };

  FloatMatrix delta, delta2;
  regress(statics.frames, &delta);
  FeatureMatrix tmp{statics.utt_id, delta};
  regress(tmp.frames, &delta2);

  FeatureMatrix out;
  out.utt_id = statics.utt_id;
  out.frames.resize(T, 3 * D);
  out.frames.leftCols(D) = statics.frames;
  out.frames.middleCols(D, D) = delta;
  out.frames.rightCols(D) = delta2;
  return out;
}

// Frame mask from raw-sample energies; the threshold is relative to the
// utterance maximum so the mask is gain-invariant above the absolute floor.
inline std::vector<bool> energy_vad(const PcmUtterance &pcm, const MfccConfig &cfg) {
  cfg.validate();
  const int frame = cfg.frame_samples(pcm.sample_rate);
  const int shift = cfg.shift_samples(pcm.sample_rate);
  const int num_frames = detail::count_frames(pcm.samples.size(), frame, shift);
  if (num_frames == 0)
    throw DataError("utterance '" + pcm.utt_id + "' shorter than one frame");

  std::vector<double> log_energy(num_frames);
  double max_log_energy = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < num_frames; t++) {
    double e = 0.0;
    for (int i = 0; i < frame; i++) {
      double s = pcm.samples[t * shift + i];
      e += s * s;
    }
    log_energy[t] = std::log(std::max(e, detail::kEnergyLogGuard));
    max_log_energy = std::max(max_log_energy, log_energy[t]);
  }
  const double rel_threshold =
      max_log_energy - cfg.vad_offset_db * std::numbers::ln10 / 10.0;
  const double abs_threshold = std::log(cfg.vad_energy_floor);
  std::vector<bool> mask(num_frames);
  int kept = 0;
  for (int t = 0; t < num_frames; t++) {
    mask[t] = log_energy[t] > rel_threshold && log_energy[t] > abs_threshold;
    if (mask[t]) kept++;
  }
  if (kept == 0)
    throw DataError("utterance '" + pcm.utt_id + "' is empty after VAD");
  return mask;
}

inline FeatureMatrix select_frames(const FeatureMatrix &feats, const std::vector<bool> &mask) {
  if (mask.size() != static_cast<std::size_t>(feats.num_frames()))
    throw DataError("VAD mask length does not match frame count");
  int kept = static_cast<int>(std::count(mask.begin(), mask.end(), true));
  FeatureMatrix out;
  out.utt_id = feats.utt_id;
  out.frames.resize(kept, feats.dim());
  int r = 0;
  for (int t = 0; t < feats.num_frames(); t++)
    if (mask[t]) out.frames.row(r++) = feats.frames.row(t);
  return out;
}

// Full front end: static MFCC -> VAD frame selection -> optional cepstral
// mean normalization -> optional deltas.
inline FeatureMatrix extract_features(const PcmUtterance &pcm, const MfccConfig &cfg) {
  FeatureMatrix statics = compute_mfcc(pcm, cfg);
  std::vector<bool> mask = energy_vad(pcm, cfg);
  FeatureMatrix voiced = select_frames(statics, mask);
  if (cfg.cepstral_mean_norm) {
    Eigen::RowVectorXf mean = voiced.frames.colwise().mean();
    voiced.frames.rowwise() -= mean;
  }
  return cfg.use_deltas ? append_deltas(voiced) : voiced;
}

// ---------------------------------------------------------------------------
// Audio input. WAV reader handles mono 16-bit PCM RIFF files only.

inline PcmUtterance read_wav(const std::string &path, const std::string &utt_id) {
  std::ifstream is = open_input(path);
  char riff[4], wave[4];
  read_exact(is, riff, 4);
  if (std::memcmp(riff, "RIFF", 4) != 0) throw DataError(path + ": not a RIFF file");
  read_u32(is);  // chunk size, unused
  read_exact(is, wave, 4);
  if (std::memcmp(wave, "WAVE", 4) != 0) throw DataError(path + ": not a WAVE file");

  PcmUtterance pcm;
  pcm.utt_id = utt_id;
  bool have_fmt = false, have_data = false;
  while (!have_data && stream_has_more(is)) {
    char id[4];
    read_exact(is, id, 4);
    std::uint32_t size = read_u32(is);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) throw DataError(path + ": malformed fmt chunk");
      std::uint16_t format = read_u16(is);
      std::uint16_t channels = read_u16(is);
      std::uint32_t rate = read_u32(is);
      read_u32(is);  // byte rate
      read_u16(is);  // block align
      std::uint16_t bits = read_u16(is);
      if (format != 1) throw DataError(path + ": only PCM WAV is supported");
      if (channels != 1) throw DataError(path + ": only mono WAV is supported");
      if (bits != 16) throw DataError(path + ": only 16-bit WAV is supported");
      pcm.sample_rate = rate;
      for (std::uint32_t skip = 16; skip < size; skip++) is.get();
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw DataError(path + ": data chunk before fmt chunk");
      std::uint32_t n = size / 2;
      pcm.samples.resize(n);
      for (std::uint32_t i = 0; i < n; i++) {
        std::int16_t v = static_cast<std::int16_t>(read_u16(is));
        pcm.samples[i] = static_cast<float>(v) / 32768.0f;
      }
      have_data = true;
    } else {
      for (std::uint32_t skip = 0; skip < size; skip++) is.get();
    }
    if (size % 2 == 1 && !have_data) is.get();  // chunk padding
  }
  if (!have_data) throw DataError(path + ": no data chunk found");
  if (pcm.samples.empty()) throw DataError(path + ": empty audio");
  return pcm;
}

inline PcmUtterance read_pcm16(const std::string &path, double sample_rate,
                               const std::string &utt_id) {
  if (sample_rate <= 0) throw UsageError("sample rate must be positive");
  std::ifstream is = open_input(path);
  PcmUtterance pcm;
  pcm.utt_id = utt_id;
  pcm.sample_rate = sample_rate;
  while (stream_has_more(is)) {
    std::int16_t v = static_cast<std::int16_t>(read_u16(is));
    pcm.samples.push_back(static_cast<float>(v) / 32768.0f);
  }
  if (pcm.samples.empty()) throw DataError(path + ": empty audio");
  return pcm;
}

// ---------------------------------------------------------------------------
// FEAT binary format: magic "SUSRFEAT", u32 version=1, utt_id, u32 T, u32 D,
// then T*D little-endian f32 row-major. Files may concatenate records.

inline constexpr char kFeatMagic[9] = "SUSRFEAT";

inline void write_feat_record(std::ostream &os, const FeatureMatrix &feats) {
  if (!feats.frames.allFinite())
    throw DataError("refusing to write non-finite features for '" + feats.utt_id + "'");
  check_identifier(feats.utt_id, "utt_id");
  write_magic(os, kFeatMagic);
  write_u32(os, 1);
  write_string(os, feats.utt_id);
  write_u32(os, static_cast<std::uint32_t>(feats.num_frames()));
  write_u32(os, static_cast<std::uint32_t>(feats.dim()));
  for (int t = 0; t < feats.num_frames(); t++)
    for (int d = 0; d < feats.dim(); d++) write_f32(os, feats.frames(t, d));
}

inline FeatureMatrix read_feat_record(std::istream &is) {
  expect_magic(is, kFeatMagic);
  std::uint32_t version = read_u32(is);
  if (version != 1) throw DataError("unsupported FEAT version " + std::to_string(version));
  FeatureMatrix feats;
  feats.utt_id = read_string(is);
  std::uint32_t T = read_u32(is);
  std::uint32_t D = read_u32(is);
  feats.frames.resize(T, D);
  for (std::uint32_t t = 0; t < T; t++)
    for (std::uint32_t d = 0; d < D; d++) feats.frames(t, d) = read_f32(is);
  if (!feats.frames.allFinite())
    throw DataError("non-finite features in FEAT record '" + feats.utt_id + "'");
  return feats;
}

inline void write_feat_file(const std::string &path, const std::vector<FeatureMatrix> &feats) {
  std::ofstream os = open_output(path);
  for (const auto &f : feats) write_feat_record(os, f);
}

inline std::vector<FeatureMatrix> read_feat_file(const std::string &path) {
  std::ifstream is = open_input(path);
  std::vector<FeatureMatrix> out;
  while (stream_has_more(is)) out.push_back(read_feat_record(is));
  if (out.empty()) throw DataError(path + ": no FEAT records");
  return out;
}

}  // namespace susr

#endif  // SUSR_FEATURES_HPP
