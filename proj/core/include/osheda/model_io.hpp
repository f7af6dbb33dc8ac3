#ifndef OSHEDA_MODEL_IO_HPP
#define OSHEDA_MODEL_IO_HPP

#include <string>

#include "osheda/trainer.hpp"

namespace osheda {

/// Versioned JSON parameter dump (layer specs + flat weight arrays).
/// Round-trips bit-exactly: load_model(save) reproduces every double.
std::string model_to_json(const TrainedModel& model, const std::string& manifest_hash = "");
void save_model(const TrainedModel& model, const std::string& path,
                const std::string& manifest_hash = "");
TrainedModel load_model(const std::string& path);
TrainedModel model_from_json(const std::string& json_text);

std::string loss_history_to_json(const std::vector<LossBreakdown>& history,
                                 const std::string& manifest_hash = "");

} // namespace osheda

#endif
