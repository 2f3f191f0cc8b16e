#pragma once

#include <json.hpp>

#include "graphvec/align.hpp"
#include "graphvec/embed.hpp"
#include "graphvec/encoder.hpp"
#include "graphvec/reference.hpp"
#include "graphvec/train.hpp"

// JSON bindings for every configuration struct.  Missing keys fall back to
// the struct defaults so configs only need to name what they change; unknown
// keys are ignored.  The same bindings serve run configs and the checkpoint
// fingerprint, so a checkpoint always records the exact settings that built it.

namespace graphvec {

NLOHMANN_JSON_SERIALIZE_ENUM(TrainMode, {
                                            {TrainMode::Supervised, "supervised"},
                                            {TrainMode::Unsupervised, "unsupervised"},
                                        })

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScaleConfig, lambdas, embed_dim,
                                                block_size, nystrom_landmarks, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AlignConfig, gamma, eta, max_sweeps, tol)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EncoderConfig, scales, embed_dim,
                                                gin_layers, gin_hidden, gt_blocks, heads,
                                                head_dim, ffn_hidden, epsilon, ln_eps)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ReferenceConfig, num_refs, ref_rows)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, lr_main, lr_gamma,
                                                weight_decay, epochs, batch_size,
                                                temperature, mode, seed, views,
                                                augment_ratio)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PipelineConfig, scale, align, encoder,
                                                reference, train)

}  // namespace graphvec
