#pragma once

// Self-contained model file: architecture, hyperparameters, fitted
// preprocessing and parameters.
//
// Layout (little-endian):
//   "HFCKPT\0\0"  u32 version  u32 section_count
//   section_count x { u32 name_len, name, u64 payload_len, payload }
//   u64 FNV-1a checksum of every preceding byte
// Tensors are stored as { u32 name_len, name, u32 rank, u64 dims..., f32 values }.

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "headline_forge/features.hpp"
#include "headline_forge/models.hpp"

namespace hf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainedModel {
  std::shared_ptr<const Model> model;
  std::shared_ptr<const FeaturePipeline> features;
  // Free-form provenance: training seed, loss, data fingerprint.
  nlohmann::json info = nlohmann::json::object();

  // Throws ErrorCode::model_mismatch if the preprocessing cannot feed the model.
  void validate() const;
};

std::string serialize_checkpoint(const TrainedModel& trained);
// Every failure is an hf::Error with one of the checkpoint_* codes; nothing is
// returned unless the whole file validated.
TrainedModel parse_checkpoint(std::string_view bytes);

// Written to a temporary file and renamed into place.
void save_checkpoint(const TrainedModel& trained, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace hf
