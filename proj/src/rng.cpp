#include "pdyn/rng.hpp"

#include <numbers>

namespace pdyn {

const ZigguratTables& ZigguratTables::instance() {
  static const ZigguratTables tables;
  return tables;
}

ZigguratTables::ZigguratTables() {
  // 256-layer setup constants; the common layer area v is recomputed from r
  // instead of hardcoding digits: v = r f(r) + integral of f beyond r.
  constexpr double r = 3.6541528853610087963519472518;
  const double f_r = std::exp(-0.5 * r * r);
  const double tail =
      std::sqrt(std::numbers::pi / 2.0) * std::erfc(r / std::numbers::sqrt2);
  const double v = r * f_r + tail;
  constexpr double m = 0x1.0p52;

  r_ = r;
  inv_r_ = 1.0 / r;
  double dn = r, tn = r;
  const double q = v / f_r;
  layers_[0] = {q / m, static_cast<std::uint64_t>((dn / q) * m)};
  layers_[1].threshold = 0;
  layers_[255] = {dn / m, 0};
  f_[0] = 1.0;
  f_[255] = f_r;
  for (int i = 254; i >= 1; --i) {
    dn = std::sqrt(-2.0 * std::log(v / dn + std::exp(-0.5 * dn * dn)));
    layers_[i + 1].threshold = static_cast<std::uint64_t>((dn / tn) * m);
    tn = dn;
    f_[i] = std::exp(-0.5 * dn * dn);
    layers_[i].scale = dn / m;
  }
}

}  // namespace pdyn
