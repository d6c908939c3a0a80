#include "bpr/harness/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace bpr::harness {

namespace {

struct Reader {
  std::ifstream in;
  explicit Reader(const std::string& path) : in(path, std::ios::binary) {}

  bool read(void* dst, std::size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount()) == n;
  }

  std::uint32_t u32() {
    std::uint8_t b[4];
    if (!read(b, 4)) throw IoError(IoCode::malformed, "wav: truncated file");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
  }

  std::uint16_t u16() {
    std::uint8_t b[2];
    if (!read(b, 2)) throw IoError(IoCode::malformed, "wav: truncated file");
    return std::uint16_t(b[0] | (b[1] << 8));
  }

  void tag(char out[4]) {
    if (!read(out, 4)) throw IoError(IoCode::malformed, "wav: truncated file");
  }
};

void put_u32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                     char((v >> 24) & 0xff)};
  out.write(b, 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  const char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace

TimeSignal load_wav(const std::string& path) {
  Reader r(path);
  if (!r.in) throw IoError(IoCode::open_failed, "wav: cannot open " + path);

  char id[4];
  r.tag(id);
  if (std::memcmp(id, "RIFF", 4) != 0) throw IoError(IoCode::malformed, "wav: missing RIFF tag");
  r.u32();  // riff size
  r.tag(id);
  if (std::memcmp(id, "WAVE", 4) != 0) throw IoError(IoCode::malformed, "wav: missing WAVE tag");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<char> data;

  while (true) {
    if (!r.read(id, 4)) break;
    const std::uint32_t size = r.u32();
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) throw IoError(IoCode::malformed, "wav: fmt chunk too small");
      format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      bits = r.u16();
      r.in.seekg(size - 16 + (size & 1), std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data.resize(size);
      if (!r.read(data.data(), size)) throw IoError(IoCode::malformed, "wav: truncated data");
      if (size & 1) r.in.seekg(1, std::ios::cur);
    } else {
      r.in.seekg(size + (size & 1), std::ios::cur);
      if (!r.in) throw IoError(IoCode::malformed, "wav: truncated chunk");
    }
  }
  if (!have_fmt || data.empty()) throw IoError(IoCode::malformed, "wav: missing fmt or data chunk");
  if (channels == 0 || rate == 0) throw IoError(IoCode::malformed, "wav: bad fmt fields");

  const bool pcm16 = (format == 1 && bits == 16);
  const bool f32 = (format == 3 && bits == 32);
  if (!pcm16 && !f32)
    throw IoError(IoCode::unsupported_codec,
                  "wav: only PCM16 and IEEE float32 are supported (format " +
                      std::to_string(format) + ", " + std::to_string(bits) + " bit)");

  const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) throw IoError(IoCode::malformed, "wav: empty data chunk");

  TimeSignal out;
  out.sample_rate = static_cast<int>(rate);
  out.samples.resize(static_cast<Index>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    Real acc = 0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const char* p = data.data() + f * frame_bytes + c * bytes_per_sample;
      if (pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        acc += static_cast<Real>(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        acc += static_cast<Real>(v);
      }
    }
    out.samples[static_cast<Index>(f)] = acc / channels;
  }
  if (!out.samples.allFinite()) throw IoError(IoCode::malformed, "wav: non-finite sample");
  return out;
}

void expect_rate(const TimeSignal& x, int sample_rate, const std::string& context) {
  if (x.sample_rate != sample_rate)
    throw IoError(IoCode::rate_mismatch,
                  context + ": sample rate " + std::to_string(x.sample_rate) +
                      " Hz does not match the configured " + std::to_string(sample_rate) +
                      " Hz; resample the file externally or change --sample-rate");
}

void write_wav(const std::string& path, const TimeSignal& x) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoCode::write_failed, "wav: cannot write " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(x.size());
  const std::uint32_t data_bytes = n * 4;
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 16);
  put_u16(out, 3);  // IEEE float
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(x.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(x.sample_rate) * 4);
  put_u16(out, 4);
  put_u16(out, 32);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (Index i = 0; i < x.size(); ++i) {
    const float v = static_cast<float>(x.samples[i]);
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  if (!out) throw IoError(IoCode::write_failed, "wav: write failed for " + path);
}

}  // namespace bpr::harness
