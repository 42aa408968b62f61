#include "beamlab/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace beamlab {

std::string to_string(Condition c) {
  return c == Condition::Los ? "LoS" : "NLoS";
}

Condition condition_from_string(const std::string& name) {
  if (name == "LoS" || name == "los" || name == "LOS") return Condition::Los;
  if (name == "NLoS" || name == "nlos" || name == "NLOS") {
    return Condition::Nlos;
  }
  throw std::invalid_argument("unknown channel condition: " + name);
}

ChannelParams ChannelParams::los() {
  return ChannelParams{Condition::Los, 1.9, 1.1, 28e9, 1.0};
}

ChannelParams ChannelParams::nlos() {
  return ChannelParams{Condition::Nlos, 4.5, 10.0, 28e9, 1.0};
}

void ChannelParams::validate() const {
  if (!(ple > 0.0)) {
    throw std::invalid_argument("channel: path-loss exponent must be > 0");
  }
  if (!(shadow_sigma_db >= 0.0)) {
    throw std::invalid_argument("channel: shadow sigma must be >= 0");
  }
  if (!(carrier_hz > 0.0)) {
    throw std::invalid_argument("channel: carrier frequency must be > 0");
  }
  if (!(ref_distance_m > 0.0)) {
    throw std::invalid_argument("channel: reference distance must be > 0");
  }
}

double reference_path_loss_db(const ChannelParams& params) {
  params.validate();
  const double wavelength_m = kSpeedOfLightMps / params.carrier_hz;
  return 20.0 *
         std::log10(4.0 * std::numbers::pi * params.ref_distance_m /
                    wavelength_m);
}

double path_loss_db(double distance_m, const ChannelParams& params,
                    double shadow_db) {
  if (distance_m < params.ref_distance_m) {
    throw std::domain_error(
        "channel: distance below the close-in reference distance");
  }
  return reference_path_loss_db(params) +
         10.0 * params.ple * std::log10(distance_m / params.ref_distance_m) +
         shadow_db;
}

double rss_dbm(const PatternTable& pattern, const Receiver& receiver,
               int beam_index, const ChannelParams& params,
               const LinkBudget& budget, double shadow_db) {
  return budget.tx_power_dbm +
         pattern.beam_gain_db(beam_index, receiver.azimuth_int) +
         budget.rx_gain_dbi -
         path_loss_db(receiver.distance_m, params, shadow_db);
}

}  // namespace beamlab
