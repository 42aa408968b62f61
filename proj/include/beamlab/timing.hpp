#pragma once

#include <ostream>

namespace beamlab {

/// Time-budget constants for the analytic IA timing model. The slot duration
/// comes from the 5 ms / 64 beam sweep allocation; the DNN latency and FPGA
/// power are cited reference values for an embedded deployment of this
/// architecture, not measurements made by this code.
struct TimingConfig {
  double slot_per_beam_ms = 5.0 / 64.0;
  int comparator_count = 1;
  double comparator_period_us = 0.01;
  double dnn_latency_us = 6.9;
  double fpga_power_w = 1.03;
};

/// Sweeping m beams: m * slot_per_beam_ms. Exactly linear in m.
double sweep_time_ms(int m, const TimingConfig& cfg = {});

/// Serial-max time on m RSS values: m*T for one comparator,
/// (ceil(m/2) + 1)*T for two. Other comparator counts are rejected.
double cbs_prediction_time_us(int m, const TimingConfig& cfg = {});

/// 1 / Doppler spread = c / (fc * v), in milliseconds.
double coherence_time_ms(double carrier_hz, double speed_mps);

/// Structured timing table for the standard subset sizes.
void write_timing_report(std::ostream& out, const TimingConfig& cfg = {},
                         double carrier_hz = 28e9);

}  // namespace beamlab
