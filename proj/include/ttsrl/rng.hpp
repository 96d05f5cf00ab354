#ifndef TTSRL_RNG_HPP_
#define TTSRL_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace ttsrl {

// Portable counter-seeded generator (splitmix64). Every random draw in the
// project comes from a stream derived as
//
//   Rng::stream(master_seed, {purpose_tag, id0, id1, ...})
//
// so reruns and resumed runs reproduce bit-identical sequences on any
// platform: streams are a pure function of the seed and the id tuple, never
// of how many draws another stream consumed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t z = a ^ (b + kGolden + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Derived stream for a (purpose, ids...) tuple.
  static Rng stream(uint64_t seed, std::initializer_list<uint64_t> ids) {
    uint64_t s = seed;
    for (uint64_t id : ids) s = mix(s, id);
    return Rng(s);
  }

  uint64_t next_u64() {
    state_ += kGolden;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (spare cached).
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) {
    return n == 0 ? 0 : next_u64() % n;
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Purpose tags for stream derivation (documented here, used project-wide).
namespace rng_tag {
constexpr uint64_t kInit = 1;        // parameter initialization
constexpr uint64_t kRollout = 2;     // (step, batch index, group member)
constexpr uint64_t kTaskGen = 3;     // (record index)
constexpr uint64_t kEval = 4;        // (record id, repeat)
constexpr uint64_t kAnnotate = 5;    // (text index, candidate)
constexpr uint64_t kSpeakerProj = 6; // (feature key) -- synthesis embedding
constexpr uint64_t kCalibration = 7; // (record id, repeat) -- entropy target
}  // namespace rng_tag

}  // namespace ttsrl

#endif  // TTSRL_RNG_HPP_
