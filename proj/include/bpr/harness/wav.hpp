#pragma once

#include "bpr/common.hpp"

#include <string>

namespace bpr::harness {

enum class IoCode { open_failed, malformed, unsupported_codec, rate_mismatch, write_failed };

struct IoError : Error {
  IoError(IoCode c, const std::string& msg) : Error(msg), code(c) {}
  IoCode code;
};

/// Reads a RIFF/WAVE file. PCM16 and IEEE float32 are supported; multi-channel
/// content is downmixed by averaging. PCM16 samples are scaled to [-1, 1).
/// No resampling is performed; check the returned sample_rate yourself or use
/// expect_rate.
TimeSignal load_wav(const std::string& path);

/// Errors with a rate_mismatch IoError telling the user to resample
/// externally when the file's rate differs from the configured one.
void expect_rate(const TimeSignal& x, int sample_rate, const std::string& context);

/// Writes a mono IEEE float32 WAV.
void write_wav(const std::string& path, const TimeSignal& x);

}  // namespace bpr::harness
