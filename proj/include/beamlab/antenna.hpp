#pragma once

#include <filesystem>
#include <vector>

namespace beamlab {

/// Uniform 10x10 planar transmit array, evaluated as its azimuth cut.
///
/// The aperture axis (broadside, element_spacing_wl) sets the azimuth
/// beamwidth; the depth axis is steered end-fire toward the boresight and
/// uses quarter-wave spacing (endfire_spacing_wl) so the cut has a genuine
/// null behind the array instead of the full-magnitude rear image a
/// half-wave depth axis would produce. Rear-image ambiguity would otherwise
/// make front and back directions indistinguishable to an RSS comparison
/// even after the backlobe penalty.
struct ArrayConfig {
  int elements_x = 10;  ///< depth axis (end-fire steered)
  int elements_y = 10;  ///< aperture axis (broadside)
  double element_spacing_wl = 0.5;
  double endfire_spacing_wl = 0.25;
  double boresight_elevation_deg = 90.0;  ///< polar angle of the cut
  double backlobe_penalty_db = 10.0;
  /// Offsets within this many degrees of the boresight are never penalized,
  /// keeping the main lobe symmetric. 8 degrees is the sector mapping's own
  /// reach below a boresight: penalizing inside it would hand every beam's
  /// left sector half to its neighbor under an RSS argmax.
  double mainlobe_clear_deg = 8.0;
  double table_resolution_deg = 0.01;

  void validate() const;
};

/// Normalized azimuth-cut array factor in dB: 0 dB at offset 0, any real
/// offset accepted (reduced mod 360). Singular points of the
/// sin(n*psi/2) / (n*sin(psi/2)) ratio take their limit value. This is the
/// unmodified pattern; the backlobe penalty lives in PatternTable.
double array_factor_db(double offset_deg, const ArrayConfig& cfg = {});

class PatternTable;

/// One beam's view of the shared pattern table: the single modified pattern
/// rotated to the beam's boresight at 15*(index-1) degrees.
struct BeamPattern {
  const PatternTable* table = nullptr;
  int index = 0;

  double boresight_deg() const;
  double gain_db(double azimuth_deg) const;
};

/// Precomputed directional gain lookup shared by all beams.
///
/// The front half [0, 180] holds the array factor; offsets strictly inside
/// (180, 360) hold the mirrored front value, minus the backlobe penalty
/// everywhere except within mainlobe_clear_deg of the boresight. The 180
/// sample belongs to the front half, where the end-fire depth axis already
/// places a deep null. Lookups snap to the nearest sample; at the default
/// 0.01 degree resolution that is below any angular scale the simulation
/// resolves.
class PatternTable {
 public:
  explicit PatternTable(const ArrayConfig& cfg = {});

  /// Modified (penalized) gain at a beam-relative offset, nearest sample.
  double gain_db(double offset_deg) const;

  /// Gain of beam beam_index (1..24) toward an absolute azimuth.
  double beam_gain_db(int beam_index, double azimuth_deg) const;

  BeamPattern beam(int beam_index) const;

  static double beam_boresight_deg(int beam_index);

  const ArrayConfig& config() const { return cfg_; }
  const std::vector<double>& samples() const { return gain_db_; }
  double resolution_deg() const { return resolution_; }

  /// Two-column text export (offset_deg, gain_db) for plotting.
  void export_text(const std::filesystem::path& path) const;

 private:
  ArrayConfig cfg_;
  double resolution_ = 0.01;
  std::vector<double> gain_db_;
};

}  // namespace beamlab
