#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace beamlab {

/// Number of transmit beams in the codebook. The angle-to-beam mapping below
/// is specific to this codebook (15 degree sectors, 24 of them), so it is a
/// constant rather than a free parameter.
inline constexpr int kNumBeams = 24;
inline constexpr int kSectorWidthDeg = 15;

/// Label of the beam whose sector contains a receiver. 1-based, in [1, 24].
struct BeamLabel {
  int index = 0;

  friend bool operator==(BeamLabel, BeamLabel) = default;
};

/// Square cell around the transmitter at the origin. Receivers are drawn
/// uniformly over the square, excluding a small disk around the transmitter
/// so the path-loss reference distance is always respected.
struct SceneConfig {
  std::size_t receiver_count = 0;
  double half_side_m = 25.0;
  double exclusion_radius_m = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Receiver {
  double x_m = 0.0;
  double y_m = 0.0;
  double distance_m = 0.0;  ///< Euclidean distance from the transmitter.
  int azimuth_int = 0;      ///< floor of the azimuth, integer degrees in [0, 359]
};

/// Integer azimuth of (x, y) seen from the origin: the counterclockwise angle
/// from the +x axis, mapped into [0, 360) and floored. Throws
/// std::invalid_argument for the origin, where the angle is undefined.
int azimuth_int_deg(double x, double y);

/// Maps an integer azimuth to its beam label. Beam i covers the 15 degree
/// sector centered near 15*(i-1); concretely, index = ceil((a + 8) / 15) with
/// values above 24 wrapping to beam 1 (an angle of -a degrees is the same
/// direction as 360 - a degrees). Only the 24-beam codebook is supported;
/// other n_beams values are rejected.
BeamLabel true_beam(int azimuth_int, int n_beams = kNumBeams);

/// Draws receiver_count receivers, uniform over the square with rejection of
/// the exclusion disk. Each receiver uses its own seeded substream, so the
/// result is a pure function of the config regardless of evaluation order.
std::vector<Receiver> sample_receivers(const SceneConfig& cfg);

/// Columnar text serialization: one header line, then one receiver per row
/// (x, y, distance, azimuth_int, label). Round-trips exactly.
void save_scene(const std::filesystem::path& path,
                const std::vector<Receiver>& receivers);
std::vector<Receiver> load_scene(const std::filesystem::path& path);

}  // namespace beamlab
