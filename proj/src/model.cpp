#include "logcl/model.hpp"

#include <stdexcept>

namespace logcl {

using ad::Var;

Model::Model(const ModelConfig& cfg, std::int64_t num_entities, std::int64_t num_relations_base,
             std::mt19937_64& rng)
    : cfg_(cfg), num_entities_(num_entities), num_relations_base_(num_relations_base) {
  if (!cfg.use_local && !cfg.use_global)
    throw std::invalid_argument("model: at least one of the encoders must be enabled");
  const auto d = cfg.dim;
  const auto p = cfg.projection_dim();
  const auto R2 = 2 * num_relations_base;
  const auto K = cfg.num_kernels;

  store_.create("embed.H0", num_entities, d, Init::XavierUniform, rng);
  store_.create("embed.R0", R2, d, Init::XavierUniform, rng);

  store_.create("local.time.w_t", 1, d, Init::XavierUniform, rng);
  store_.create("local.time.b_t", 1, d, Init::Zero, rng);
  store_.create("local.dyn.W0", 2 * d, d, Init::XavierUniform, rng);
  for (const char* layer : {"local.rgcn.l0", "local.rgcn.l1", "global.rgcn.l0", "global.rgcn.l1"}) {
    store_.create(std::string(layer) + ".W1", d, d, Init::XavierUniform, rng);
    store_.create(std::string(layer) + ".W2", d, d, Init::XavierUniform, rng);
  }
  for (const char* gate : {"z", "r", "n"}) {
    store_.create(std::string("local.gru.Wx") + gate, d, d, Init::XavierUniform, rng);
    store_.create(std::string("local.gru.Wh") + gate, d, d, Init::XavierUniform, rng);
    store_.create(std::string("local.gru.b") + gate, 1, d, Init::Zero, rng);
  }
  store_.create("local.relgate.W3", d, d, Init::XavierUniform, rng);
  store_.create("local.relgate.b3", 1, d, Init::Zero, rng);
  store_.create("local.attn.W4", 2 * d, d, Init::XavierUniform, rng);
  store_.create("local.attn.w5", d, 1, Init::XavierUniform, rng);
  store_.create("global.attn.w6", d, 1, Init::XavierUniform, rng);

  for (const char* side : {"contrast.local", "contrast.global"}) {
    store_.create(std::string(side) + ".W1", 2 * d, p, Init::XavierUniform, rng);
    store_.create(std::string(side) + ".b1", 1, p, Init::Zero, rng);
    store_.create(std::string(side) + ".W2", p, p, Init::XavierUniform, rng);
    store_.create(std::string(side) + ".b2", 1, p, Init::Zero, rng);
  }

  store_.create("decoder.conv.kernels", K, 6, Init::XavierUniform, rng);
  store_.create("decoder.conv.bias", 1, K, Init::Zero, rng);
  store_.create("decoder.fc.W", K * d, d, Init::XavierUniform, rng);
  store_.create("decoder.fc.b", 1, d, Init::Zero, rng);
  if (cfg.use_batchnorm) {
    const Eigen::Index widths[3] = {2, K, d};
    for (int i = 0; i < 3; ++i) {
      const std::string base = "decoder.bn" + std::to_string(i);
      store_.create(base + ".gamma", 1, widths[i], Init::One, rng);
      store_.create(base + ".beta", 1, widths[i], Init::Zero, rng);
      store_.buffer(base + ".running_mean", 1, widths[i], 0.0);
      store_.buffer(base + ".running_var", 1, widths[i], 1.0);
    }
  }
}

Model::Mounted Model::mount(ad::Graph& g, const Mat* H0_override) {
  Mounted m;
  if (H0_override) {
    Parameter& h0 = store_.at("embed.H0");
    if (H0_override->rows() != h0.value.rows() || H0_override->cols() != h0.value.cols())
      throw std::invalid_argument("mount: H0 override shape mismatch");
    // The override is a perturbed view of H0: gradients still flow to H0.
    m.H0 = ad::add(g.leaf(h0), g.constant(*H0_override - h0.value));
  } else {
    m.H0 = g.leaf(store_.at("embed.H0"));
  }
  m.R0 = g.leaf(store_.at("embed.R0"));

  m.local.w_t = g.leaf(store_.at("local.time.w_t"));
  m.local.b_t = g.leaf(store_.at("local.time.b_t"));
  m.local.W0 = g.leaf(store_.at("local.dyn.W0"));
  auto mount_rgcn = [&](const std::string& base) {
    RgcnLayerVars l;
    l.W1 = g.leaf(store_.at(base + ".W1"));
    l.W2 = g.leaf(store_.at(base + ".W2"));
    l.activation = Activation::RRelu;
    l.dropout = cfg_.dropout;
    return l;
  };
  m.local.layer0 = mount_rgcn("local.rgcn.l0");
  m.local.layer1 = mount_rgcn("local.rgcn.l1");
  m.global.layer0 = mount_rgcn("global.rgcn.l0");
  m.global.layer1 = mount_rgcn("global.rgcn.l1");
  m.local.gru = GruVars{g.leaf(store_.at("local.gru.Wxz")), g.leaf(store_.at("local.gru.Whz")),
                        g.leaf(store_.at("local.gru.bz")),  g.leaf(store_.at("local.gru.Wxr")),
                        g.leaf(store_.at("local.gru.Whr")), g.leaf(store_.at("local.gru.br")),
                        g.leaf(store_.at("local.gru.Wxn")), g.leaf(store_.at("local.gru.Whn")),
                        g.leaf(store_.at("local.gru.bn"))};
  m.local.gate = RelGateVars{g.leaf(store_.at("local.relgate.W3")),
                             g.leaf(store_.at("local.relgate.b3"))};
  m.local.W4 = g.leaf(store_.at("local.attn.W4"));
  m.local.w5 = g.leaf(store_.at("local.attn.w5"));
  m.global.w6 = g.leaf(store_.at("global.attn.w6"));

  auto mount_mlp = [&](const std::string& base) {
    MlpVars v;
    v.W1 = g.leaf(store_.at(base + ".W1"));
    v.b1 = g.leaf(store_.at(base + ".b1"));
    v.W2 = g.leaf(store_.at(base + ".W2"));
    v.b2 = g.leaf(store_.at(base + ".b2"));
    v.activation = MlpVars::Activation::Tanh;
    return v;
  };
  m.proj_local = mount_mlp("contrast.local");
  m.proj_global = mount_mlp("contrast.global");

  m.scorer.kernels = g.leaf(store_.at("decoder.conv.kernels"));
  m.scorer.kbias = g.leaf(store_.at("decoder.conv.bias"));
  m.scorer.Wfc = g.leaf(store_.at("decoder.fc.W"));
  m.scorer.bfc = g.leaf(store_.at("decoder.fc.b"));
  m.scorer.dropout = cfg_.dropout;
  m.scorer.use_batchnorm = cfg_.use_batchnorm;
  if (cfg_.use_batchnorm) {
    m.scorer.bn0_gamma = g.leaf(store_.at("decoder.bn0.gamma"));
    m.scorer.bn0_beta = g.leaf(store_.at("decoder.bn0.beta"));
    m.scorer.bn1_gamma = g.leaf(store_.at("decoder.bn1.gamma"));
    m.scorer.bn1_beta = g.leaf(store_.at("decoder.bn1.beta"));
    m.scorer.bn2_gamma = g.leaf(store_.at("decoder.bn2.gamma"));
    m.scorer.bn2_beta = g.leaf(store_.at("decoder.bn2.beta"));
    m.scorer.bn0_mean = &store_.at("decoder.bn0.running_mean");
    m.scorer.bn0_var = &store_.at("decoder.bn0.running_var");
    m.scorer.bn1_mean = &store_.at("decoder.bn1.running_mean");
    m.scorer.bn1_var = &store_.at("decoder.bn1.running_var");
    m.scorer.bn2_mean = &store_.at("decoder.bn2.running_mean");
    m.scorer.bn2_var = &store_.at("decoder.bn2.running_var");
  }
  return m;
}

std::optional<LocalTrace> Model::evolve_window(ad::Graph& g, const Mounted& m,
                                               std::span<const SnapshotEdges> window,
                                               std::span<const TimeIndex> times,
                                               TimeIndex t_q) const {
  (void)g;
  if (!cfg_.use_local) return std::nullopt;
  return run_local_window(window, times, t_q, m.H0, m.R0, m.local);
}

Model::PhaseOutput Model::forward_phase(ad::Graph& g, const Mounted& m,
                                        const std::optional<LocalTrace>& trace,
                                        const QueryBatch& batch, const SnapshotEdges& subgraph,
                                        bool compute_loss) const {
  if (batch.size() == 0) throw std::invalid_argument("forward_phase: empty query batch");
  if (cfg_.use_local && !trace.has_value())
    throw std::invalid_argument("forward_phase: local encoder enabled but no window trace");

  auto subj_idx =
      ad::make_idx(std::vector<std::int32_t>(batch.subjects.begin(), batch.subjects.end()));
  auto rel_idx =
      ad::make_idx(std::vector<std::int32_t>(batch.relations.begin(), batch.relations.end()));

  // Local query representations (entity-aware attention over window steps).
  Var h_local_q;
  if (cfg_.use_local) {
    if (cfg_.use_eatt) {
      Var qv = local_query_vector(*trace, batch, m.local.W4);
      h_local_q = entity_aware_attention_local(*trace, qv, batch, m.local.w5);
    } else {
      h_local_q = ad::gather_rows(trace->H_final, subj_idx);
    }
  }

  // Global query representations over the phase's historical query subgraph.
  Var H_g_agg, h_global_q, beta_all;
  if (cfg_.use_global) {
    H_g_agg = rgcn_global(subgraph, m.H0, m.R0, m.global);
    Var H_ref = (cfg_.use_local && !cfg_.gate_against_initial) ? trace->H_final : m.H0;
    h_global_q = entity_aware_attention_global(H_g_agg, H_ref, batch, m.global.w6, cfg_.use_eatt);
    if (cfg_.use_eatt) beta_all = entity_gate(H_g_agg, H_ref, m.global.w6);
  }

  // Fused query vector, its relation vector and the candidate matrix.
  Var h_q, r_rows, H_cand;
  if (cfg_.use_local && cfg_.use_global) {
    h_q = fuse(h_local_q, h_global_q, cfg_.lambda);
    r_rows = ad::gather_rows(trace->R_final, rel_idx);
    if (cfg_.fuse_candidates) {
      Var global_side = cfg_.use_eatt ? ad::rowwise_scale(H_g_agg, beta_all) : H_g_agg;
      H_cand = fuse(trace->H_final, global_side, cfg_.lambda);
    } else {
      H_cand = trace->H_final;
    }
  } else if (cfg_.use_local) {
    h_q = h_local_q;
    r_rows = ad::gather_rows(trace->R_final, rel_idx);
    H_cand = trace->H_final;
  } else {
    h_q = h_global_q;
    r_rows = ad::gather_rows(m.R0, rel_idx);
    H_cand = cfg_.use_eatt ? ad::rowwise_scale(H_g_agg, beta_all) : H_g_agg;
  }

  PhaseOutput out;
  out.logits = convtranse_logits(h_q, r_rows, H_cand, m.scorer);
  if (!compute_loss) return out;

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  if (cfg_.sigmoid_bce) {
    auto truth_idx =
        ad::make_idx(std::vector<std::int32_t>(batch.objects.begin(), batch.objects.end()));
    out.l_tkg = ad::scale(ad::bce_with_logits_onehot(out.logits, truth_idx), inv_n);
  } else {
    out.l_tkg = ad::scale(tkg_nll_from_logits(out.logits, batch.objects), inv_n);
  }

  if (cfg_.use_cl && cfg_.use_local && cfg_.use_global) {
    std::vector<std::int32_t> labels(batch.objects.begin(), batch.objects.end());
    Var z_g = project(
        ad::concat_cols(ad::gather_rows(H_g_agg, subj_idx), ad::gather_rows(m.R0, rel_idx)),
        m.proj_global);
    auto local_proj = [&](const Var& h_agg_step) {
      return project(ad::concat_cols(ad::gather_rows(h_agg_step, subj_idx),
                                     ad::gather_rows(trace->R_final, rel_idx)),
                     m.proj_local);
    };
    if (cfg_.contrast_windowed) {
      Var acc;
      for (std::size_t i = 0; i < trace->h_agg.size(); ++i) {
        Var li = contrastive_total(local_proj(trace->h_agg[i]), z_g, labels, cfg_.tau,
                                   cfg_.cross_view_label_positives);
        acc = (i == 0) ? li : ad::add(acc, li);
      }
      out.l_cl = ad::scale(acc, 1.0 / static_cast<double>(trace->h_agg.size()));
    } else {
      out.l_cl = contrastive_total(local_proj(trace->h_agg.back()), z_g, labels, cfg_.tau,
                                   cfg_.cross_view_label_positives);
    }
  } else {
    out.l_cl = g.constant(Mat::Zero(1, 1));
  }
  out.loss = total_loss(out.l_tkg, out.l_cl);
  return out;
}

}  // namespace logcl
