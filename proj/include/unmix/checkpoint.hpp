#pragma once

#include <filesystem>

#include "unmix/sscu.hpp"

namespace unmix {

// Checkpoint directory: model.json (shapes, config, seed, epoch) plus one raw
// float32-LE blob per parameter group under params/.
void save_checkpoint(const SscuModel& model, int epoch, const std::filesystem::path& dir);
SscuModel load_checkpoint(const std::filesystem::path& dir, int* epoch = nullptr);

}  // namespace unmix
