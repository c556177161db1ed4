#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <cstdint>
#include <string_view>

namespace pdyn {

// Named, decorrelated seed streams: every source of randomness (weights,
// inputs, initial macro state, ...) derives its own stream from a base seed
// and a label, so e.g. micro runs with different input noise can still share
// one weight draw.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream) {
  // FNV-1a over the label, then splitmix64 finalization.
  std::uint64_t h = 14695981039346656037ull ^ base;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 1099511628211ull;
  }
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                                 std::uint64_t index) {
  return derive_seed(base + 0x632be59bd9b4e019ull * (index + 1), stream);
}

// xoshiro256++ (Blackman & Vigna), state seeded through splitmix64.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : s_) {
      x += 0x9e3779b97f4a7c15ull;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      word = z ^ (z >> 31);
    }
  }

  std::uint64_t operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in (0, 1]
  double uniform() {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Marsaglia-Tsang ziggurat for the standard normal, 256 layers, double
// precision. One 64-bit draw per sample on the fast path (~98% of calls);
// layer index, sign and 52-bit magnitude use disjoint bits. Roughly twice
// as fast as the library ziggurats, which matters in the microscopic
// simulator (one fresh N-dimensional Gaussian input per SGD step).
class ZigguratTables {
 public:
  static const ZigguratTables& instance();

  template <typename Engine>
  double sample(Engine& rng) const {
    for (;;) {
      const std::uint64_t u = rng();
      const int layer = static_cast<int>(u & 255);
      const std::uint64_t sign_bit = (u & 0x100) << 55;  // bit 8 -> bit 63
      const std::uint64_t rabs = u >> 12;  // 52 bits, < 2^63 so the signed
                                           // conversion below is exact
      const Layer& lay = layers_[layer];
      const double x = static_cast<double>(static_cast<std::int64_t>(rabs)) *
                       lay.scale;
      if (rabs < lay.threshold) return flip(x, sign_bit);
      if (layer == 0) {
        // tail beyond r: Marsaglia's exponential-rejection scheme
        double xt, yt;
        do {
          xt = -std::log(uniform(rng)) * inv_r_;
          yt = -std::log(uniform(rng));
        } while (yt + yt < xt * xt);
        return flip(r_ + xt, sign_bit);
      }
      if (f_[layer] + uniform(rng) * (f_[layer - 1] - f_[layer]) <
          std::exp(-0.5 * x * x))
        return flip(x, sign_bit);
    }
  }

 private:
  struct Layer {
    double scale;             // layer width / 2^52
    std::uint64_t threshold;  // accept immediately below this magnitude
  };

  ZigguratTables();

  static double flip(double x, std::uint64_t sign_bit) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    bits ^= sign_bit;
    std::memcpy(&x, &bits, sizeof(x));
    return x;
  }

  template <typename Engine>
  static double uniform(Engine& rng) {
    return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
  }

  Layer layers_[256];
  double f_[256];
  double r_, inv_r_;
};

// Standard-normal sampler, deterministic per seed.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed)
      : engine_(seed), tables_(&ZigguratTables::instance()) {}

  double operator()() { return tables_->sample(engine_); }

  template <typename Derived>
  void fill(Eigen::DenseBase<Derived>& out) {
    for (Eigen::Index i = 0; i < out.size(); ++i)
      out.derived().data()[i] = tables_->sample(engine_);
  }

 private:
  Xoshiro256pp engine_;
  const ZigguratTables* tables_;
};

}  // namespace pdyn
