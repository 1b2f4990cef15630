#pragma once

#include <optional>
#include <random>
#include <span>

#include "logcl/autodiff.hpp"
#include "logcl/contrast.hpp"
#include "logcl/decoder.hpp"
#include "logcl/global_encoder.hpp"
#include "logcl/local_encoder.hpp"
#include "logcl/param.hpp"
#include "logcl/sampler.hpp"

namespace logcl {

struct ModelConfig {
  std::int64_t dim = 200;
  std::int64_t proj_dim = 0;  // 0 means dim
  std::int64_t num_kernels = 50;
  double dropout = 0.2;
  double lambda = 0.9;
  double tau = 0.03;
  bool use_local = true;
  bool use_global = true;
  bool use_eatt = true;
  bool use_cl = true;
  bool use_batchnorm = true;
  bool gate_against_initial = false;     // beta compares against H0 instead of the evolved state
  bool fuse_candidates = true;           // candidate matrix is the lambda-fused matrix
  bool cross_view_label_positives = true;
  bool contrast_windowed = false;        // contrast every window step instead of the last
  bool sigmoid_bce = false;              // binary cross-entropy reading of the prediction loss

  std::int64_t projection_dim() const { return proj_dim > 0 ? proj_dim : dim; }
};

// All learnable tensors of the model plus the forward wiring between the
// encoder, contrast and decoder blocks. Parameters live in the store; each
// forward pass mounts them as leaves on its own graph.
class Model {
 public:
  Model(const ModelConfig& cfg, std::int64_t num_entities, std::int64_t num_relations_base,
        std::mt19937_64& rng);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  std::int64_t num_entities() const { return num_entities_; }
  std::int64_t num_relations_total() const { return 2 * num_relations_base_; }

  struct Mounted {
    ad::Var H0, R0;
    LocalEncoderVars local;
    GlobalEncoderVars global;
    MlpVars proj_local, proj_global;
    ScorerVars scorer;
  };
  // Mounts every parameter once on the graph. `H0_override` substitutes a
  // perturbed entity matrix (noise-robustness protocol).
  Mounted mount(ad::Graph& g, const Mat* H0_override = nullptr);

  // Query-independent window evolution, shared by both phases at a timestamp.
  std::optional<LocalTrace> evolve_window(ad::Graph& g, const Mounted& m,
                                          std::span<const SnapshotEdges> window,
                                          std::span<const TimeIndex> times, TimeIndex t_q) const;

  struct PhaseOutput {
    ad::Var logits;  // n x |E|
    ad::Var loss;    // per-query-normalized prediction loss plus contrastive loss
    ad::Var l_tkg;   // prediction part of `loss`
    ad::Var l_cl;    // contrastive part of `loss`
  };
  // Scores one orientation's query batch and, when `compute_loss`, builds its
  // training objective. `trace` comes from evolve_window (absent when the
  // local encoder is off); `subgraph` from the phase's own query sampling.
  PhaseOutput forward_phase(ad::Graph& g, const Mounted& m, const std::optional<LocalTrace>& trace,
                            const QueryBatch& batch, const SnapshotEdges& subgraph,
                            bool compute_loss) const;

 private:
  ModelConfig cfg_;
  std::int64_t num_entities_;
  std::int64_t num_relations_base_;
  ParamStore store_;
};

}  // namespace logcl
