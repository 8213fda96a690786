#include "ditra/model.hpp"

#include <cstring>

#include "ditra/error.hpp"

namespace ditra {

Model::Model(const RunConfig& cfg, const SynthTask& task) : cfg_(cfg) {
  encoders_ = std::make_unique<VisionEncoders>(task.config(), cfg_.encoders);
  backbone_ = std::make_unique<Backbone>(cfg_.backbone);
  Rng rng(cfg_.model_seed);
  fusion_ = std::make_unique<Fusion>(cfg_.fusion, rng);
  adapters_ = std::make_unique<AdapterStack>(cfg_.adapter, rng);
  // zero start: every image-text pair scores 0 until trained
  itm_ = Tensor({cfg_.backbone.d_llm, cfg_.backbone.d_llm})
             .set_requires_grad(true);
}

Tensor Model::fuse(const Image& img) const {
  return fusion_->forward(encoders_->encode_semantic(img),
                          encoders_->encode_detail(img));
}

AdapterHook Model::hook(const Tensor& fused, Rng* gate_rng) const {
  return adapters_->make_hook(fused, gate_rng);
}

std::vector<int> Model::translate(const Image& img, Rng* gate_rng) const {
  Tensor fused = fuse(img);
  AdapterHook h = hook(fused, gate_rng);
  std::vector<int> raw = backbone_->generate(
      fused, cfg_.task.l_max + 2, h ? &h : nullptr);
  std::vector<int> out;
  for (int t : raw)
    if (backbone_->config().vocab.is_task_token(t)) out.push_back(t);
  return out;
}

Tensor Model::match_score(const Tensor& fused,
                          const std::vector<int>& text) const {
  Tensor v = row_mean(fused);                                   // 1 x d
  Tensor t = row_mean(embedding_lookup(backbone_->embeddings(), text));
  return matmul(matmul(v, itm_), transpose(t));                 // 1 x 1
}

std::vector<Tensor> Model::trainable_params() const {
  std::vector<Tensor> out;
  for (auto& [n, t] : named_trainable()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> Model::named_trainable() const {
  std::vector<std::pair<std::string, Tensor>> out = fusion_->named_params();
  for (auto& p : adapters_->named_params()) out.push_back(p);
  out.emplace_back("scorer.bilinear", itm_);
  return out;
}

ParamReport Model::param_report() const {
  ParamReport r;
  r.backbone = backbone_->param_count();
  r.slot_codes = backbone_->slot_codes().size();
  for (const Tensor& t : encoders_->all_params()) r.encoders += t.size();
  r.fusion = fusion_->param_count();
  r.adapters = adapters_->param_count();
  r.scorer = itm_.size();
  return r;
}

Checkpoint Model::to_checkpoint(const std::string& config_text) const {
  Checkpoint ck;
  for (auto& p : backbone_->named_params()) ck.tensors.push_back(p);
  for (auto& p : named_trainable()) ck.tensors.push_back(p);
  ck.config_text = config_text;
  ck.frozen_hashes.emplace_back("backbone", backbone_->content_hash());
  ck.frozen_hashes.emplace_back("encoders", encoders_->content_hash());
  return ck;
}

namespace {
void copy_into(const Checkpoint& ck, const std::string& name, Tensor dst) {
  const Tensor* src = ck.find(name);
  if (!src)
    throw CheckpointError(CheckpointError::Kind::malformed,
                          "checkpoint lacks tensor '" + name + "'");
  if (src->shape() != dst.shape())
    throw CheckpointError(CheckpointError::Kind::malformed,
                          "tensor '" + name + "' has shape " +
                              shape_str(*src) + ", expected " +
                              shape_str(dst));
  dst.values() = src->values();
}
}  // namespace

void Model::load_from(const Checkpoint& ck) {
  for (auto& [name, t] : backbone_->named_params()) copy_into(ck, name, t);
  for (auto& [name, t] : named_trainable()) copy_into(ck, name, t);
  verify_frozen_hash(ck, "backbone", backbone_->content_hash());
  verify_frozen_hash(ck, "encoders", encoders_->content_hash());
  backbone_->freeze();
}

void load_backbone(Backbone& bb, const Checkpoint& ck) {
  for (auto& [name, t] : bb.named_params()) copy_into(ck, name, t);
  verify_frozen_hash(ck, "backbone", bb.content_hash());
  bb.freeze();
}

Checkpoint backbone_checkpoint(const Backbone& bb,
                               const std::string& config_text) {
  Checkpoint ck;
  for (auto& p : bb.named_params()) ck.tensors.push_back(p);
  ck.config_text = config_text;
  ck.frozen_hashes.emplace_back("backbone", bb.content_hash());
  return ck;
}

}  // namespace ditra
