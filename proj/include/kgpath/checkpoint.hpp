#pragma once

// Structural-reasoner checkpoints.
//
// Layout: the 8-byte magic "KGPCKPT1", a little-endian uint64 giving the size
// of a JSON metadata block, the JSON itself, then every tensor as raw
// little-endian float32 in column-major order. The metadata lists each
// tensor's name, shape and element offset into the data section.

#include <cstdint>
#include <string>
#include <vector>

#include "kgpath/structural_reasoner.hpp"

namespace kgpath {

struct CheckpointMeta {
  structural::TrainConfig train;
  std::uint64_t entity_vocab_hash = 0;
  std::uint64_t relation_vocab_hash = 0;
};

// FNV-1a over the names, each terminated by a zero byte.
std::uint64_t vocabulary_hash(const std::vector<std::string>& names);

void save_checkpoint(const std::string& path, const structural::ReasonerParams& params,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  structural::ReasonerParams params;
  CheckpointMeta meta;
};

// Throws Error on a bad magic, truncated data or missing tensors.
LoadedCheckpoint load_checkpoint(const std::string& path);

// Throws Error when the checkpoint was trained on a different vocabulary.
void check_compatible(const CheckpointMeta& meta, const KnowledgeGraph& kg);

}  // namespace kgpath
