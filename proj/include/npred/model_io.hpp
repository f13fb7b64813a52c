#pragma once

#include <string>
#include <vector>

#include "npred/lls.hpp"
#include "npred/trainer.hpp"

namespace npred {

inline constexpr int kModelFormatVersion = 1;

struct ModelFile {
  LiftedModel model;
  std::string config_hash;
  std::string data_hash;
};

/// Versioned JSON; matrices are stored row-major as flat arrays.
std::string model_to_json(const ModelFile& file);
/// Throws SchemaError on a missing field, a wrong version or inconsistent shapes.
ModelFile model_from_json(const std::string& text);

void save_model(const std::string& path, const ModelFile& file);
ModelFile load_model(const std::string& path);

/// "epoch,L,L_fwd,L_bwd,L_rec" rows.
void write_loss_curve(const std::string& path, const std::vector<EpochRecord>& curve);

}  // namespace npred
