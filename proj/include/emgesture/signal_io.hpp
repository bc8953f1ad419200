#pragma once

// IQ recordings: two-channel wav I/O, trimming and fixed-length segmentation.
//
// Channel convention: channel 0 carries the in-phase component, channel 1 the
// quadrature component. `swap_iq` flips that mapping on load.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emgesture/error.hpp"

namespace emg {

static_assert(std::endian::native == std::endian::little, "wav I/O assumes a little-endian host");

using cplx = std::complex<double>;

enum class Origin { file, synthetic };

class IQRecording {
 public:
  IQRecording(std::vector<cplx> samples, double sample_rate_hz, Origin origin = Origin::file)
      : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz), origin_(origin) {
    require(std::isfinite(sample_rate_hz_) && sample_rate_hz_ > 0, ErrorKind::data, "sample_rate",
            "sample rate must be positive");
    require(!samples_.empty(), ErrorKind::data, "empty_audio", "recording has no samples");
  }

  const std::vector<cplx>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  Origin origin() const noexcept { return origin_; }
  double duration_s() const noexcept { return static_cast<double>(samples_.size()) / sample_rate_hz_; }

 private:
  std::vector<cplx> samples_;
  double sample_rate_hz_;
  Origin origin_;
};

struct Segment {
  std::vector<cplx> samples;
  double sample_rate_hz = 0.0;
  std::size_t index = 0;
  std::optional<std::string> label;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

enum class WavEncoding { pcm16, pcm32, float32 };

namespace detail {

template <class T>
T read_le(const unsigned char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

template <class T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline std::size_t seconds_to_samples(double seconds, double fs) {
  return static_cast<std::size_t>(std::llround(seconds * fs));
}

}  // namespace detail

inline IQRecording load_iq_wav(const std::filesystem::path& path, bool swap_iq = false) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::data, "missing_file", "cannot open wav file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  auto malformed = [&](const std::string& why) {
    fail(ErrorKind::data, "malformed_wav", path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    malformed("not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    auto size = static_cast<std::size_t>(detail::read_le<std::uint32_t>(chunk + 4));
    std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Some writers leave a bogus size on the last data chunk; clamp it.
      if (std::memcmp(chunk, "data", 4) != 0) malformed("truncated chunk");
      size = bytes.size() - body;
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) malformed("short fmt chunk");
      format = detail::read_le<std::uint16_t>(bytes.data() + body);
      channels = detail::read_le<std::uint16_t>(bytes.data() + body + 2);
      rate = detail::read_le<std::uint32_t>(bytes.data() + body + 4);
      bits = detail::read_le<std::uint16_t>(bytes.data() + body + 14);
      // WAVE_FORMAT_EXTENSIBLE: the real tag is the first two bytes of the subformat GUID.
      if (format == 0xFFFE && size >= 26) format = detail::read_le<std::uint16_t>(bytes.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1U);
  }
  if (!have_fmt) malformed("missing fmt chunk");
  if (data == nullptr) malformed("missing data chunk");
  if (channels != 2)
    fail(ErrorKind::data, "channel_count",
         path.string() + ": expected 2 channels (I/Q), found " + std::to_string(channels));
  if (rate == 0) fail(ErrorKind::data, "sample_rate", path.string() + ": sample rate is zero");

  const bool is_float = format == 3 && bits == 32;
  const bool is_pcm = format == 1 && (bits == 16 || bits == 32);
  if (!is_float && !is_pcm)
    fail(ErrorKind::data, "unsupported_encoding",
         path.string() + ": unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
             " bits)");

  const std::size_t frame = 2U * bits / 8U;
  const std::size_t n = data_size / frame;
  if (n == 0) fail(ErrorKind::data, "empty_audio", path.string() + ": no audio frames");

  auto sample_at = [&](const unsigned char* p) -> double {
    if (is_float) return static_cast<double>(detail::read_le<float>(p));
    if (bits == 16) return detail::read_le<std::int16_t>(p) / 32768.0;
    return detail::read_le<std::int32_t>(p) / 2147483648.0;
  };

  const std::size_t width = bits / 8U;
  std::vector<cplx> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* p = data + i * frame;
    double re = sample_at(p);
    double im = sample_at(p + width);
    if (swap_iq) std::swap(re, im);
    samples[i] = {re, im};
  }
  return IQRecording(std::move(samples), static_cast<double>(rate), Origin::file);
}

/// Writes I to channel 0 and Q to channel 1. PCM encodings clip to [-1, 1).
inline void write_iq_wav(const std::filesystem::path& path, const IQRecording& rec,
                         WavEncoding encoding = WavEncoding::float32) {
  const double rounded_rate = std::round(rec.sample_rate_hz());
  require(rounded_rate == rec.sample_rate_hz() && rounded_rate <= 4294967295.0, ErrorKind::data, "sample_rate",
          "wav requires an integral sample rate");

  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t format = encoding == WavEncoding::float32 ? 3 : 1;
  const std::uint16_t block_align = 2U * bits / 8U;
  const std::uint64_t data_bytes = static_cast<std::uint64_t>(rec.size()) * block_align;
  require(data_bytes + 36 <= 0xFFFFFFFFULL, ErrorKind::data, "too_large", "recording too large for a wav file");

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::data, "io", "cannot write wav file: " + path.string());

  out.write("RIFF", 4);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(36 + data_bytes));
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::write_le<std::uint32_t>(out, 16);
  detail::write_le<std::uint16_t>(out, format);
  detail::write_le<std::uint16_t>(out, 2);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rounded_rate));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rounded_rate) * block_align);
  detail::write_le<std::uint16_t>(out, block_align);
  detail::write_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data_bytes));

  std::vector<char> buffer(static_cast<std::size_t>(data_bytes));
  char* p = buffer.data();
  auto put = [&](double v) {
    switch (encoding) {
      case WavEncoding::float32: {
        auto f = static_cast<float>(v);
        std::memcpy(p, &f, 4);
        p += 4;
        break;
      }
      case WavEncoding::pcm16: {
        auto q = static_cast<std::int16_t>(std::clamp(std::lround(v * 32768.0), -32768L, 32767L));
        std::memcpy(p, &q, 2);
        p += 2;
        break;
      }
      case WavEncoding::pcm32: {
        auto q = static_cast<std::int32_t>(std::clamp(std::llround(v * 2147483648.0), -2147483648LL, 2147483647LL));
        std::memcpy(p, &q, 4);
        p += 4;
        break;
      }
    }
  };
  for (const cplx& s : rec.samples()) {
    put(s.real());
    put(s.imag());
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) fail(ErrorKind::data, "io", "failed writing wav file: " + path.string());
}

/// Samples in [start_s * fs, end_s * fs). The input is left untouched.
inline IQRecording trim(const IQRecording& rec, double start_s, double end_s) {
  require(start_s < end_s, ErrorKind::data, "inverted_bounds", "trim: start must precede end");
  require(start_s >= 0, ErrorKind::data, "bounds", "trim: start is negative");
  const std::size_t first = detail::seconds_to_samples(start_s, rec.sample_rate_hz());
  const std::size_t last = detail::seconds_to_samples(end_s, rec.sample_rate_hz());
  require(last <= rec.size(), ErrorKind::data, "bounds", "trim: end lies beyond the recording");
  require(first < last, ErrorKind::data, "bounds", "trim: empty range");
  std::vector<cplx> out(rec.samples().begin() + static_cast<std::ptrdiff_t>(first),
                        rec.samples().begin() + static_cast<std::ptrdiff_t>(last));
  return IQRecording(std::move(out), rec.sample_rate_hz(), rec.origin());
}

/// Non-overlapping windows in temporal order; a trailing partial window is dropped.
inline std::vector<Segment> segment(const IQRecording& rec, double segment_len_s,
                                    std::optional<std::string> label = std::nullopt) {
  require(segment_len_s > 0, ErrorKind::data, "bounds", "segment length must be positive");
  const std::size_t len = detail::seconds_to_samples(segment_len_s, rec.sample_rate_hz());
  require(len > 0, ErrorKind::data, "bounds", "segment shorter than one sample");
  require(len <= rec.size(), ErrorKind::data, "segment_too_long", "segment longer than recording");

  const std::size_t count = rec.size() / len;
  std::vector<Segment> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto begin = rec.samples().begin() + static_cast<std::ptrdiff_t>(i * len);
    out.push_back(Segment{std::vector<cplx>(begin, begin + static_cast<std::ptrdiff_t>(len)), rec.sample_rate_hz(), i,
                          label});
  }
  return out;
}

/// Whole recording as a single segment.
inline Segment as_segment(const IQRecording& rec, std::optional<std::string> label = std::nullopt) {
  return Segment{rec.samples(), rec.sample_rate_hz(), 0, std::move(label)};
}

}  // namespace emg
