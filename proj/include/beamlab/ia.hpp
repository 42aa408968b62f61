#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "beamlab/dataset.hpp"
#include "beamlab/nn.hpp"
#include "beamlab/scene.hpp"

namespace beamlab {

enum class Method { Cbs, DeepIa };

std::string to_string(Method m);

struct PredictionRecord {
  std::size_t receiver = 0;
  int predicted = 0;
  int true_beam = 0;
  Method method = Method::Cbs;
  int m = 0;
};

/// Conventional beam sweeping restricted to the swept subset: the subset
/// member with the highest RSS wins, ties to the lowest beam index. By
/// construction it can only ever return a member of the subset.
BeamLabel cbs_predict(std::span<const double> rss_row,
                      const BeamSubset& subset);

/// Runs the trained classifier on the swept subset's normalized features.
/// Unlike CBS it may return any of the 24 beams, swept or not. The model
/// must have been trained for exactly this subset.
BeamLabel deepia_predict(const Model<double>& model,
                         std::span<const double> features,
                         const BeamSubset& subset);

/// 100 * matches / total. Throws on an empty record list.
double accuracy(std::span<const PredictionRecord> records);

void write_predictions_csv(const std::filesystem::path& path,
                           std::span<const PredictionRecord> records);

}  // namespace beamlab
