#pragma once

#include "swapgt/autodiff.hpp"
#include "swapgt/trainer.hpp"

#include <string>

namespace swapgt {

/// Header of the prepared-data cache. Little-endian, 64-bit lengths.
struct CacheHeader {
    char magic[4] = {'S', 'W', 'G', 'T'};
    std::uint32_t version = 1;
    std::uint64_t n = 0, d = 0, k = 0, s = 0;
    std::uint64_t seed = 0;
    std::uint64_t digest = 0; // tokenizer_digest of the generating config

    bool operator==(const CacheHeader&) const = default;
};

CacheHeader make_cache_header(const Graph& g, const TrainConfig& cfg, std::uint64_t seed);

/// Token tables and sequence batches for both views, behind the header.
void save_prepared(const std::string& path, const CacheHeader& header, const PreparedData& data);

/// Loads the cache if the stored header equals `expected`. Returns true on a
/// hit; false (and leaves `data` untouched) when the file is absent or the
/// header differs.
bool load_prepared(const std::string& path, const CacheHeader& expected, PreparedData& data);

/// Model checkpoint: effective config text, the seeds of the run that
/// produced the snapshot, and every named parameter tensor.
void save_checkpoint(const std::string& path, const std::string& config_text,
                     std::uint64_t split_seed, std::uint64_t init_seed,
                     const ParamStore& params);

struct Checkpoint {
    std::string config_text;
    std::uint64_t split_seed = 0;
    std::uint64_t init_seed = 0;
    std::vector<std::pair<std::string, Tensor>> params;
};

Checkpoint load_checkpoint(const std::string& path);

} // namespace swapgt
