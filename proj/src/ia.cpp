#include "beamlab/ia.hpp"

#include <fstream>
#include <stdexcept>

namespace beamlab {

std::string to_string(Method m) {
  return m == Method::Cbs ? "CBS" : "DeepIA";
}

BeamLabel cbs_predict(std::span<const double> rss_row,
                      const BeamSubset& subset) {
  if (rss_row.size() != subset.indices.size()) {
    throw std::invalid_argument(
        "cbs: RSS row length does not match the subset");
  }
  std::size_t best = 0;
  for (std::size_t j = 1; j < rss_row.size(); ++j) {
    if (rss_row[j] > rss_row[best]) best = j;
  }
  return BeamLabel{subset.indices[best]};
}

BeamLabel deepia_predict(const Model<double>& model,
                         std::span<const double> features,
                         const BeamSubset& subset) {
  if (model.subset_indices != subset.indices) {
    throw std::invalid_argument(
        "deepia: model was trained for a different beam subset");
  }
  return predict(model, features);
}

double accuracy(std::span<const PredictionRecord> records) {
  if (records.empty()) {
    throw std::invalid_argument("accuracy: no prediction records");
  }
  std::size_t matches = 0;
  for (const PredictionRecord& r : records) {
    if (r.predicted == r.true_beam) ++matches;
  }
  return 100.0 * static_cast<double>(matches) /
         static_cast<double>(records.size());
}

void write_predictions_csv(const std::filesystem::path& path,
                           std::span<const PredictionRecord> records) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("ia: cannot open " + path.string());
  }
  out << "receiver,method,m,predicted_beam,true_beam\n";
  for (const PredictionRecord& r : records) {
    out << r.receiver << ',' << to_string(r.method) << ',' << r.m << ','
        << r.predicted << ',' << r.true_beam << '\n';
  }
}

}  // namespace beamlab
