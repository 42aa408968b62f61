#include "beamlab/antenna.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "beamlab/scene.hpp"

namespace beamlab {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
// Keeps dB values finite through pattern nulls; -600 dB is beyond any
// dynamic range the link budget can observe.
constexpr double kLinearFloor = 1e-30;

double wrap360(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  if (r >= 360.0) r -= 360.0;
  return r;
}

// Uniform-array factor ratio sin(n*psi/2) / (n*sin(psi/2)); the removable
// singularities at psi = 2*pi*k have limit magnitude 1.
double factor_magnitude(double psi, int count) {
  const double denom = static_cast<double>(count) * std::sin(psi / 2.0);
  if (std::abs(denom) < 1e-9 * count) {
    return 1.0;
  }
  return std::abs(std::sin(count * psi / 2.0) / denom);
}

}  // namespace

void ArrayConfig::validate() const {
  if (elements_x < 1 || elements_y < 1) {
    throw std::invalid_argument("antenna: element counts must be >= 1");
  }
  if (!(element_spacing_wl > 0.0) || !(endfire_spacing_wl > 0.0)) {
    throw std::invalid_argument("antenna: element spacing must be positive");
  }
  if (!(backlobe_penalty_db >= 0.0)) {
    throw std::invalid_argument("antenna: backlobe penalty must be >= 0 dB");
  }
  if (!(mainlobe_clear_deg >= 0.0) || mainlobe_clear_deg >= 90.0) {
    throw std::invalid_argument(
        "antenna: main-lobe clearance must be in [0, 90)");
  }
  if (!(table_resolution_deg > 0.0)) {
    throw std::invalid_argument("antenna: table resolution must be positive");
  }
  const double n = 180.0 / table_resolution_deg;
  if (std::abs(n - std::round(n)) > 1e-6) {
    throw std::invalid_argument(
        "antenna: table resolution must divide 180 degrees");
  }
}

double array_factor_db(double offset_deg, const ArrayConfig& cfg) {
  cfg.validate();
  const double o = wrap360(offset_deg) * kDegToRad;
  const double sin_elev = std::sin(cfg.boresight_elevation_deg * kDegToRad);
  const double two_pi = 2.0 * std::numbers::pi;
  // Aperture axis: broadside, peak where sin(offset) = 0.
  const double psi_a = two_pi * cfg.element_spacing_wl * sin_elev * std::sin(o);
  // Depth axis: phase-steered end-fire, peak where cos(offset) = 1. At
  // quarter-wave spacing psi stays within (-pi, 0], so the rear direction
  // falls on the factor's null rather than on a grating lobe.
  const double psi_d =
      two_pi * cfg.endfire_spacing_wl * sin_elev * (std::cos(o) - 1.0);
  const double magnitude = factor_magnitude(psi_a, cfg.elements_y) *
                           factor_magnitude(psi_d, cfg.elements_x);
  return 20.0 * std::log10(std::max(magnitude, kLinearFloor));
}

PatternTable::PatternTable(const ArrayConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  resolution_ = cfg.table_resolution_deg;
  const auto count = static_cast<std::size_t>(std::llround(360.0 / resolution_));
  const std::size_t half = count / 2;
  gain_db_.resize(count);
  for (std::size_t i = 0; i <= half; ++i) {
    gain_db_[i] = array_factor_db(static_cast<double>(i) * resolution_, cfg_);
  }
  // Offsets strictly inside (180, 360): mirrored front value minus the
  // penalty, exact by construction. The slice of the rear that falls inside
  // the beam's own sector, (360 - mainlobe_clear_deg, 360), mirrors without
  // the penalty so the main lobe stays symmetric.
  for (std::size_t i = half + 1; i < count; ++i) {
    const double offset = static_cast<double>(i) * resolution_;
    const bool penalized = offset <= 360.0 - cfg_.mainlobe_clear_deg;
    gain_db_[i] = gain_db_[count - i] -
                  (penalized ? cfg_.backlobe_penalty_db : 0.0);
  }
}

double PatternTable::gain_db(double offset_deg) const {
  const double reduced = wrap360(offset_deg);
  auto idx = static_cast<std::size_t>(std::llround(reduced / resolution_));
  if (idx >= gain_db_.size()) idx = 0;
  return gain_db_[idx];
}

double PatternTable::beam_boresight_deg(int beam_index) {
  if (beam_index < 1 || beam_index > kNumBeams) {
    throw std::out_of_range("antenna: beam index outside [1, 24]");
  }
  return static_cast<double>(kSectorWidthDeg) * (beam_index - 1);
}

double PatternTable::beam_gain_db(int beam_index, double azimuth_deg) const {
  return gain_db(azimuth_deg - beam_boresight_deg(beam_index));
}

BeamPattern PatternTable::beam(int beam_index) const {
  beam_boresight_deg(beam_index);  // validates
  return BeamPattern{this, beam_index};
}

double BeamPattern::boresight_deg() const {
  return PatternTable::beam_boresight_deg(index);
}

double BeamPattern::gain_db(double azimuth_deg) const {
  return table->beam_gain_db(index, azimuth_deg);
}

void PatternTable::export_text(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("antenna: cannot open " + path.string());
  }
  out << "# offset_deg gain_db\n";
  char line[64];
  for (std::size_t i = 0; i < gain_db_.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.2f %.6f\n",
                  static_cast<double>(i) * resolution_, gain_db_[i]);
    out << line;
  }
  if (!out) {
    throw std::runtime_error("antenna: write failed for " + path.string());
  }
}

}  // namespace beamlab
