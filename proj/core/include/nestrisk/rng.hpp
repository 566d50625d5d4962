#pragma once

#include <array>
#include <cstdint>

namespace nestrisk {

/// Inverse of the standard normal CDF (Wichura's AS241 rational
/// approximation, accurate to full double precision). p must be in (0,1).
double inverse_normal_cdf(double p);

/// Standard normal CDF.
double norm_cdf(double x);

/// Seedable random stream with value semantics.
///
/// Copying a handle replays the exact same draw sequence; derive() spawns a
/// statistically independent child stream keyed by up to three integer ids;
/// flipped() is a view whose normal() draws are the exact negation of the
/// original's (uniform() draws are unaffected).  This is the contract the
/// antithetic constructions rely on: the minus leg of a pair is produced by
/// replaying a flipped copy of the plus leg's handle.
class NoiseHandle {
public:
  NoiseHandle() : NoiseHandle(0) {}
  explicit NoiseHandle(std::uint64_t seed);

  NoiseHandle derive(std::uint64_t a, std::uint64_t b = 0,
                     std::uint64_t c = 0) const;

  double uniform();  // in (0, 1), exclusive on both ends
  double normal();

  NoiseHandle flipped() const;
  bool is_flipped() const { return sign_ < 0.0; }

private:
  std::uint64_t next_word();

  std::array<std::uint64_t, 4> state_;
  std::uint64_t key_;
  double sign_ = 1.0;
};

}  // namespace nestrisk
