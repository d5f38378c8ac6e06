#include "pskit/rng.hpp"

#include <cmath>
#include <numbers>

namespace pskit::rng {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(Counter& c, const Key& k) {
  std::uint64_t p0 = std::uint64_t(kPhiloxM0) * c[0];
  std::uint64_t p1 = std::uint64_t(kPhiloxM1) * c[2];
  Counter out;
  out[0] = std::uint32_t(p1 >> 32) ^ c[1] ^ k[0];
  out[1] = std::uint32_t(p1);
  out[2] = std::uint32_t(p0 >> 32) ^ c[3] ^ k[1];
  out[3] = std::uint32_t(p0);
  c = out;
}

}  // namespace

Counter philox4x32(Counter ctr, Key key) {
  for (int r = 0; r < 10; ++r) {
    round_once(ctr, key);
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

Stream::Stream(std::uint64_t seed, std::uint64_t replication, std::int64_t t,
               std::uint32_t component) {
  key_ = {std::uint32_t(seed), std::uint32_t(seed >> 32)};
  // replication folded with the component tag; t kept on its own word so the
  // per-time streams are distinct counters under one key
  std::uint64_t rid = replication * 0x100u + component;
  hi_id_ = std::uint32_t(rid ^ (rid >> 32) * 0x85EBCA6Bu);
  lo_id_ = std::uint32_t(std::uint64_t(t) & 0xFFFFFFFFu) ^
           (std::uint32_t(std::uint64_t(t) >> 32) * 0xC2B2AE35u);
}

Counter Stream::next_block() {
  Counter c = {block_++, lo_id_, hi_id_, 0u};
  return philox4x32(c, key_);
}

double Stream::uniform() {
  if (avail_ == 0) {
    Counter c = next_block();
    // 53-bit mantissas from pairs of 32-bit words, shifted into (0,1)
    std::uint64_t w0 = (std::uint64_t(c[0]) << 32) | c[1];
    std::uint64_t w1 = (std::uint64_t(c[2]) << 32) | c[3];
    buf_[0] = (double(w0 >> 11) + 0.5) * 0x1.0p-53;
    buf_[1] = (double(w1 >> 11) + 0.5) * 0x1.0p-53;
    avail_ = 2;
  }
  return buf_[--avail_];
}

double Stream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace pskit::rng
