#include "wgarray/params.hpp"

#include <cmath>

#include "wgarray/errors.hpp"

namespace wgarray {

std::string_view to_string(MomentSystem system) {
  return system == MomentSystem::Degenerate ? "degenerate" : "general";
}

MomentSystem parse_moment_system(std::string_view text) {
  if (text == "degenerate") return MomentSystem::Degenerate;
  if (text == "general") return MomentSystem::General;
  throw InvalidParameter("unknown moment system '" + std::string(text) +
                         "' (expected degenerate or general)");
}

void SimParams::validate() const {
  if (n_sites < 3 || n_sites % 2 == 0) {
    throw InvalidParameter("n_sites must be odd and >= 3, got " + std::to_string(n_sites));
  }
  if (!(c_s >= 0.0) || !std::isfinite(c_s)) {
    throw InvalidParameter("c_s must be finite and >= 0");
  }
  if (!(g >= 0.0) || !std::isfinite(g)) {
    throw InvalidParameter("g must be finite and >= 0");
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw InvalidParameter("gamma must be finite and >= 0");
  }
  if (!(dz > 0.0) || !std::isfinite(dz)) {
    throw InvalidParameter("dz must be finite and > 0");
  }
  if (dz * c_s > kMaxStepTimesCoupling * (1.0 + 1e-12)) {
    throw InvalidParameter("dz * c_s must not exceed 0.05, got " + std::to_string(dz * c_s));
  }
}

}  // namespace wgarray
