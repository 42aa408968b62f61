#pragma once

#include <cmath>
#include <string>

#include "beamlab/antenna.hpp"
#include "beamlab/scene.hpp"

namespace beamlab {

inline constexpr double kSpeedOfLightMps = 299792458.0;

enum class Condition { Los, Nlos };

std::string to_string(Condition c);
Condition condition_from_string(const std::string& name);

/// Close-in path-loss parameters. The LoS/NLoS presets carry the 28 GHz
/// exponents and shadow deviations used throughout; anything else can be set
/// explicitly for what-if runs.
struct ChannelParams {
  Condition condition = Condition::Los;
  double ple = 1.9;              ///< path-loss exponent n
  double shadow_sigma_db = 1.1;  ///< std dev of the lognormal shadow factor
  double carrier_hz = 28e9;
  double ref_distance_m = 1.0;

  static ChannelParams los();
  static ChannelParams nlos();

  void validate() const;
};

struct LinkBudget {
  double tx_power_dbm = 20.0;
  double rx_gain_dbi = 0.0;  ///< omnidirectional receiver
};

/// Free-space loss at the reference distance: 20*log10(4*pi*d0 / lambda).
double reference_path_loss_db(const ChannelParams& params);

/// PL(d) = PL(d0) + 10*n*log10(d/d0) + X. The shadow term is passed in, not
/// drawn here, so the deterministic part can be tested in isolation.
/// Throws std::domain_error for d < d0.
double path_loss_db(double distance_m, const ChannelParams& params,
                    double shadow_db);

/// Received signal strength for one (receiver, beam) measurement. The beam
/// gain is evaluated at the receiver's integer azimuth — the same angle that
/// defines its label — so with shadowing disabled the labeled beam is always
/// the strongest one.
double rss_dbm(const PatternTable& pattern, const Receiver& receiver,
               int beam_index, const ChannelParams& params,
               const LinkBudget& budget, double shadow_db);

inline double dbm_to_linear_mw(double dbm) {
  return std::pow(10.0, dbm / 10.0);
}

inline double linear_mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

}  // namespace beamlab
