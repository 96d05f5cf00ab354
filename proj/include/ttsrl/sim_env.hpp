#ifndef TTSRL_SIM_ENV_HPP_
#define TTSRL_SIM_ENV_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "ttsrl/core_types.hpp"

namespace ttsrl {

// Deterministic stand-in for the audio stack: maps a token sequence to a
// transcript, per-token durations, silence segments, and a speaker vector.
// Every quantity downstream rewards need is exactly computable from it.

// Seconds of audio contributed by one non-pause token.
constexpr double kTokenDuration = 0.1;

// Seconds of silence for pause levels #1..#4.
constexpr std::array<double, kNumPauseLevels> kPauseDurations = {0.1, 0.2, 0.4, 0.6};

constexpr int kSpeakerDim = 64;

// Seed constant for the fixed random projection behind speaker vectors.
constexpr uint64_t kSpeakerProjectionSeed = 0xC0DEC;

struct SilenceSegment {
  int position = 0;      // inter-word index: graphemes emitted before the pause
  double duration = 0.0; // seconds, > 0
};

struct SynthesisResult {
  Text transcript;
  double total_duration = 0.0;  // seconds
  std::vector<SilenceSegment> silence_segments;
  std::array<double, kSpeakerDim> speaker_vec{};  // unit L2 norm
};

struct ReferencePair {
  Text ref_text;
  std::array<double, kSpeakerDim> ref_speaker_vec{};
  double ref_rate = 0.0;  // symbols per second, > 0
};

// Pure function of (actions, vocab):
//  - grapheme tokens append their symbol to the transcript; every non-pause
//    token contributes kTokenDuration seconds,
//  - pause tokens contribute a silence segment of their level's duration
//    (adjacent pause tokens merge into one segment),
//  - speaker_vec is the L2-normalized fixed random projection of the token
//    unigram+bigram histogram (projection seeded by kSpeakerProjectionSeed).
// Throws SynthesisError on an empty action sequence.
SynthesisResult synthesize(const std::vector<int>& actions, const Vocab& vocab);

// ref_rate = |ref_text| / total synthesized duration of ref_actions.
// Throws ValidationError on zero duration or empty reference text.
ReferencePair make_reference(const Text& ref_text, const std::vector<int>& ref_actions,
                             const Vocab& vocab);

}  // namespace ttsrl

#endif  // TTSRL_SIM_ENV_HPP_
