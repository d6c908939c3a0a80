#pragma once

#include "bpr/common.hpp"

#include <string>

namespace bpr::harness {

enum class SynthKind { multisine, chirp, noise_burst };

SynthKind parse_synth_kind(const std::string& name);
const char* to_string(SynthKind kind);

/// Deterministic seeded test signals with unit peak amplitude. Stand-ins for
/// speech/music excerpts in desk-scale benchmarks:
///   multisine   - harmonic tone stack with random phases and slow tremolo
///   chirp       - exponential frequency sweep
///   noise-burst - lowpassed noise shaped into bursts (energy in nearly
///                 every analysis frame)
TimeSignal synth_signal(SynthKind kind, Real duration_s, int sample_rate, std::uint64_t seed);

}  // namespace bpr::harness
