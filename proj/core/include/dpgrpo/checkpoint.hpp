#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "dpgrpo/policy.hpp"

namespace dpgrpo {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
    std::uint64_t rng_seed = 0;
};

// Layout: one JSON header line
//   {"format":"dpgrpo-checkpoint","version":1,"kind":...,"order":...,
//    "rows":...,"cols":...,"max_context":...,"rng_seed":...,"vocab":[...]}
// followed by rows*cols float64 values, one per line, row-major, in
// shortest round-trip decimal form.
void write_checkpoint(std::ostream& os, const Policy& policy, const CheckpointMeta& meta = {});
Policy read_checkpoint(std::istream& is, CheckpointMeta* meta = nullptr);

void save_checkpoint(const std::filesystem::path& path, const Policy& policy,
                     const CheckpointMeta& meta = {});
Policy load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace dpgrpo
