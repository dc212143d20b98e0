#pragma once

#include "dualref/encoder.hpp"
#include "dualref/memory_bank.hpp"

#include "json.hpp"

#include <filesystem>

namespace dualref::ckpt {

/// Encoder checkpoint at `prefix`: `prefix.drft` holds three rows (parameters,
/// Adam first and second moments) flattened in Params order; `prefix.json`
/// records shapes, activation, step counters and caller-supplied `extra`.
void save_encoder(const std::filesystem::path& prefix, const nn::EncoderState& state,
                  const nlohmann::json& extra = nlohmann::json::object());

struct LoadedEncoder {
    nn::EncoderState state;
    nlohmann::json extra;
};

LoadedEncoder load_encoder(const std::filesystem::path& prefix);

/// `prefix.drft` with the entries, `prefix.json` with mode, momentum and k_pos.
void save_bank(const std::filesystem::path& prefix, const bank::MemoryBank& bank);
bank::MemoryBank load_bank(const std::filesystem::path& prefix);

}  // namespace dualref::ckpt
