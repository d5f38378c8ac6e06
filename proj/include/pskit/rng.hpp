#pragma once

#include <array>
#include <cstdint>

// Counter-based RNG (Philox-4x32-10). A draw is a pure function of
// (seed, replication, t, component, block), which is what lets counterfactual
// branches replay exactly the noise of the realized path (common random
// numbers) and lets replications run on any number of workers bit-stably.

namespace pskit::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

Counter philox4x32(Counter ctr, Key key);

// One logical stream per (seed, replication, t, component). Successive calls
// advance an internal block index; reconstructing the stream replays it.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t replication, std::int64_t t,
         std::uint32_t component);

  // uniform on (0,1), endpoints excluded
  double uniform();
  // standard normal (Box-Muller; draws are consumed in pairs)
  double normal();

 private:
  Counter next_block();
  Key key_;
  std::uint32_t hi_id_;
  std::uint32_t lo_id_;
  std::uint32_t block_ = 0;
  // Box-Muller carry
  bool have_spare_ = false;
  double spare_ = 0.0;
  // uniforms buffered from the current block
  int avail_ = 0;
  double buf_[2];
};

}  // namespace pskit::rng
