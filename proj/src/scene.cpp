#include "beamlab/scene.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "beamlab/rng.hpp"

namespace beamlab {

void SceneConfig::validate() const {
  if (receiver_count < 1) {
    throw std::invalid_argument("scene: receiver_count must be >= 1");
  }
  if (!(half_side_m > 0.0) || !std::isfinite(half_side_m)) {
    throw std::invalid_argument("scene: half_side_m must be positive");
  }
  if (!(exclusion_radius_m >= 0.0) || exclusion_radius_m >= half_side_m) {
    throw std::invalid_argument(
        "scene: exclusion_radius_m must be in [0, half_side_m)");
  }
}

int azimuth_int_deg(double x, double y) {
  if (x == 0.0 && y == 0.0) {
    throw std::invalid_argument("azimuth undefined at the origin");
  }
  double deg = std::atan2(y, x) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  // A tiny negative angle can round to exactly 360 after the shift; both 359
  // and 0 describe the same direction there, and % keeps the contract [0,359].
  return static_cast<int>(std::floor(deg)) % 360;
}

BeamLabel true_beam(int azimuth_int, int n_beams) {
  if (n_beams != kNumBeams) {
    throw std::invalid_argument(
        "true_beam: only the 24-beam codebook is defined");
  }
  if (azimuth_int < 0 || azimuth_int > 359) {
    throw std::out_of_range("true_beam: azimuth_int outside [0, 359]");
  }
  // ceil((a + 8) / 15) in integer arithmetic; a in [353, 359] yields 25,
  // which is the sector straddling 0 and wraps to beam 1.
  int index = (azimuth_int + 8 + kSectorWidthDeg - 1) / kSectorWidthDeg;
  if (index > kNumBeams) index = 1;
  return BeamLabel{index};
}

std::vector<Receiver> sample_receivers(const SceneConfig& cfg) {
  cfg.validate();
  std::vector<Receiver> receivers(cfg.receiver_count);
  for (std::size_t k = 0; k < cfg.receiver_count; ++k) {
    auto stream = rng::substream(cfg.seed, "scene", k);
    Receiver r;
    // Rejection sampling: the exclusion disk covers ~0.13% of the square,
    // so retries are rare.
    do {
      r.x_m = stream.next_uniform(-cfg.half_side_m, cfg.half_side_m);
      r.y_m = stream.next_uniform(-cfg.half_side_m, cfg.half_side_m);
      r.distance_m = std::hypot(r.x_m, r.y_m);
    } while (r.distance_m < cfg.exclusion_radius_m);
    r.azimuth_int = azimuth_int_deg(r.x_m, r.y_m);
    receivers[k] = r;
  }
  return receivers;
}

void save_scene(const std::filesystem::path& path,
                const std::vector<Receiver>& receivers) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("scene: cannot open " + path.string());
  }
  out << "# x_m y_m distance_m azimuth_int_deg beam_label\n";
  char line[128];
  for (const Receiver& r : receivers) {
    // %.17g round-trips doubles exactly.
    std::snprintf(line, sizeof(line), "%.17g %.17g %.17g %d %d\n", r.x_m,
                  r.y_m, r.distance_m, r.azimuth_int,
                  true_beam(r.azimuth_int).index);
    out << line;
  }
  if (!out) {
    throw std::runtime_error("scene: write failed for " + path.string());
  }
}

std::vector<Receiver> load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("scene: cannot open " + path.string());
  }
  std::vector<Receiver> receivers;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    Receiver r;
    int label = 0;
    if (!(row >> r.x_m >> r.y_m >> r.distance_m >> r.azimuth_int >> label)) {
      throw std::runtime_error("scene: malformed row in " + path.string());
    }
    if (label != true_beam(r.azimuth_int).index) {
      throw std::runtime_error("scene: label/azimuth mismatch in " +
                               path.string());
    }
    receivers.push_back(r);
  }
  return receivers;
}

}  // namespace beamlab
