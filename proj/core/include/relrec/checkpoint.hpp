#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "relrec/config.hpp"
#include "relrec/dataset.hpp"
#include "relrec/graph.hpp"
#include "relrec/params.hpp"

namespace relrec {

inline constexpr int kCheckpointVersion = 1;

/// Everything needed to predict and rationalize without the training inputs.
struct Checkpoint {
    ModelDims dims;
    ModelParams params;
    AdamState adam;
    Vocab vocab;
    RelationSchema schema;
    RelationId target = 0;
    TrainConfig config;
    TripleSet kb;  // forward training triples, used by closed-world rationales
    std::size_t best_epoch = 0;
    double best_dev_f1 = 0;
};

/// Layout: one line of JSON (format tag, version, dims, config, vocabulary and its hash,
/// relation names, kb triples, tensor table, payload size and checksum) followed by raw
/// little-endian IEEE-754 doubles: every parameter tensor, then the Adam moments.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws VersionError for an unknown version and CheckpointError for anything malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace relrec
