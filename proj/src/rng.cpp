#include "bdsde/rng.hpp"

#include <cmath>

#include "bdsde/errors.hpp"

namespace bdsde {

namespace {

constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline std::uint64_t mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi) {
  const unsigned __int128 prod =
      static_cast<unsigned __int128>(a) * static_cast<unsigned __int128>(b);
  hi = static_cast<std::uint64_t>(prod >> 64);
  return static_cast<std::uint64_t>(prod);
}

inline void philox_round(std::array<std::uint64_t, 4>& c,
                         const std::array<std::uint64_t, 2>& k) {
  std::uint64_t hi0, hi1;
  const std::uint64_t lo0 = mulhilo(kPhiloxM0, c[0], hi0);
  const std::uint64_t lo1 = mulhilo(kPhiloxM1, c[2], hi1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

std::array<std::uint64_t, 4> Philox4x64::block(const std::array<std::uint64_t, 2>& key,
                                               const std::array<std::uint64_t, 4>& counter) {
  std::array<std::uint64_t, 4> c = counter;
  std::array<std::uint64_t, 2> k = key;
  for (int round = 0; round < 9; ++round) {
    philox_round(c, k);
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  philox_round(c, k);
  return c;
}

double u64_to_unit(std::uint64_t x) {
  // Offset 2^-52 grid: both endpoints are excluded even after rounding,
  // so downstream quantile transforms never see 0 or 1.
  return (static_cast<double>(x >> 12) + 0.5) * 0x1.0p-52;
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw_error(ErrorCode::invalid_argument, "inverse_normal_cdf: p outside (0,1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
              6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
            1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
          1.3314166789178437745e2) * r + 3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
    return q * num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    val = num / den;
  }
  return q < 0.0 ? -val : val;
}

std::uint64_t raw_word(const StreamKey& key, std::uint64_t c0, std::uint64_t c1,
                       std::uint64_t c2, std::uint64_t c3) {
  return Philox4x64::block({key.seed, key.purpose}, {c0, c1, c2, c3})[0];
}

double uniform_draw(const StreamKey& key, std::uint64_t c0, std::uint64_t c1,
                    std::uint64_t c2, std::uint64_t c3) {
  return u64_to_unit(raw_word(key, c0, c1, c2, c3));
}

double normal_draw(const StreamKey& key, std::uint64_t c0, std::uint64_t c1,
                   std::uint64_t c2, std::uint64_t c3) {
  return inverse_normal_cdf(uniform_draw(key, c0, c1, c2, c3));
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t branch) {
  return Philox4x64::block({parent, 0x736565646465720aULL}, {branch, 0, 0, 0})[0];
}

}  // namespace bdsde
