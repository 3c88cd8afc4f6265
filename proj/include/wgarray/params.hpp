#pragma once

#include <string>
#include <string_view>

namespace wgarray {

/// Which averaged moment system is integrated.
///  - Degenerate: zero sideband, a single signal mode per guide.
///  - General: signal (+w) and idler (-w) modes per guide.
enum class MomentSystem { Degenerate, General };

std::string_view to_string(MomentSystem system);
MomentSystem parse_moment_system(std::string_view text);

/// Lattice and pump parameters. Lengths are in units of 1/c_s when c_s = 1.
///
/// Sites run from -M to M with n_sites = 2M + 1; the pumped guide is site 0.
struct SimParams {
  int n_sites = 257;
  double c_s = 1.0;    ///< nearest-neighbour coupling; 0 decouples the guides
  double g = 0.0;      ///< parametric gain, product of pump amplitude and nonlinearity
  double gamma = 0.0;  ///< pump phase-diffusion rate (linewidth over group velocity)
  double dz = 1e-3;    ///< fixed RK4 step
  MomentSystem system = MomentSystem::Degenerate;

  /// Upper bound on dz * c_s accepted by validate().
  static constexpr double kMaxStepTimesCoupling = 0.05;

  int half_width() const { return n_sites / 2; }
  /// Row/column of site `site` in the dense N x N storage.
  int index_of(int site) const { return site + half_width(); }
  bool contains(int site) const { return site >= -half_width() && site <= half_width(); }

  /// Throws InvalidParameter when any field is outside its documented range.
  void validate() const;
};

}  // namespace wgarray
