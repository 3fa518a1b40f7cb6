#pragma once

#include "swapgt/trainer.hpp"

#include <string>
#include <vector>

namespace swapgt {

/// Parses a key=value config file ('#' starts a comment). Unknown keys are
/// rejected. `overrides` are key=value strings applied after the file.
TrainConfig parse_config_file(const std::string& path,
                              const std::vector<std::string>& overrides = {});

/// Parses config text (same syntax) without touching the filesystem.
TrainConfig parse_config_text(const std::string& text,
                              const std::vector<std::string>& overrides = {});

/// Canonical key=value rendering of every effective setting; embedding this
/// in every output file makes each result reproducible from its own record.
std::string render_config(const TrainConfig& cfg);

/// Stable 64-bit digest of the tokenizer-relevant settings, used by the
/// prepared-data cache header.
std::uint64_t tokenizer_digest(const TrainConfig& cfg);

} // namespace swapgt
