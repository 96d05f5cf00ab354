#include "ttsrl/sim_env.hpp"

#include <cmath>

#include "ttsrl/errors.hpp"
#include "ttsrl/rng.hpp"

namespace ttsrl {

namespace {

// Fixed pseudo-random direction for one histogram feature (a unigram token
// or a bigram pair), derived from the documented projection seed.
void accumulate_feature(std::array<double, kSpeakerDim>& acc, uint64_t key, double count) {
  Rng rng = Rng::stream(kSpeakerProjectionSeed, {rng_tag::kSpeakerProj, key});
  for (int d = 0; d < kSpeakerDim; ++d) {
    acc[d] += count * (2.0 * rng.next_double() - 1.0);
  }
}

uint64_t unigram_key(int token) { return 0x10000ull + static_cast<uint64_t>(token); }

uint64_t bigram_key(int a, int b) {
  return 0x20000000ull + (static_cast<uint64_t>(a) << 20) + static_cast<uint64_t>(b);
}

}  // namespace

SynthesisResult synthesize(const std::vector<int>& actions, const Vocab& vocab) {
  if (actions.empty()) throw SynthesisError("cannot synthesize an empty action sequence");

  SynthesisResult out;
  int graphemes_emitted = 0;
  for (int token : actions) {
    if (token < 0 || token >= vocab.size)
      throw SynthesisError("action token out of vocab range");
    if (vocab.is_pause(token)) {
      const double dur = kPauseDurations[vocab.pause_level(token) - 1];
      if (!out.silence_segments.empty() &&
          out.silence_segments.back().position == graphemes_emitted) {
        out.silence_segments.back().duration += dur;  // merge adjacent pauses
      } else {
        out.silence_segments.push_back({graphemes_emitted, dur});
      }
      out.total_duration += dur;
    } else {
      if (vocab.is_grapheme(token)) {
        out.transcript.symbols.push_back(vocab.grapheme_symbol(token));
        ++graphemes_emitted;
      }
      // Special tokens produce no grapheme but still occupy one frame.
      out.total_duration += kTokenDuration;
    }
  }

  // Speaker vector: projected unigram + bigram histogram.
  std::array<double, kSpeakerDim> acc{};
  for (size_t i = 0; i < actions.size(); ++i) {
    accumulate_feature(acc, unigram_key(actions[i]), 1.0);
    if (i + 1 < actions.size()) {
      accumulate_feature(acc, bigram_key(actions[i], actions[i + 1]), 1.0);
    }
  }
  double norm = 0.0;
  for (double x : acc) norm += x * x;
  norm = std::sqrt(norm);
  if (norm <= 0.0) {
    // A single-token sequence still has one unigram feature, so the
    // projection is zero only with probability ~0; keep a fixed fallback.
    acc[0] = 1.0;
    norm = 1.0;
  }
  for (int d = 0; d < kSpeakerDim; ++d) out.speaker_vec[d] = acc[d] / norm;

  return out;
}

ReferencePair make_reference(const Text& ref_text, const std::vector<int>& ref_actions,
                             const Vocab& vocab) {
  if (ref_text.length() == 0) throw ValidationError("reference text is empty");
  SynthesisResult synth = synthesize(ref_actions, vocab);
  if (!(synth.total_duration > 0.0))
    throw ValidationError("reference synthesis produced zero duration");
  ReferencePair ref;
  ref.ref_text = ref_text;
  ref.ref_speaker_vec = synth.speaker_vec;
  ref.ref_rate = static_cast<double>(ref_text.length()) / synth.total_duration;
  return ref;
}

}  // namespace ttsrl
