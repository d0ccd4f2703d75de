#include "cardiostrain/regularize.hpp"

#include <algorithm>

namespace cardiostrain {

namespace {

constexpr Eigen::Index kInferenceBatch = 512;

DisplacementField4D predict_and_merge(const MlpModel& model, const std::vector<const PatchSet*>& views,
                                      const DisplacementField4D& fallback) {
  const PatchSet& first = *views.front();
  if (first.size() == 0) throw DimensionError("no patches to regularize (mask empty or grid too small)");
  const Eigen::MatrixXd inputs = stack_views(views);
  if (inputs.rows() != model.input_dim()) throw DimensionError("patch length does not match model input");

  PatchSet out = first;
  const Eigen::Index n = inputs.cols();
  for (Eigen::Index b = 0; b < n; b += kInferenceBatch) {
    const Eigen::Index len = std::min(kInferenceBatch, n - b);
    out.patches.middleCols(b, len) = forward_batch(model, inputs.middleCols(b, len)).output;
  }
  DisplacementField4D merged = merge_patches(out, fallback);
  std::fill(merged.frame(0).begin(), merged.frame(0).end(), 0.0);
  return merged;
}

}  // namespace

Eigen::MatrixXd stack_views(const std::vector<const PatchSet*>& views) {
  if (views.empty()) throw DimensionError("no views");
  const auto d = views.front()->patches.rows();
  const auto n = views.front()->patches.cols();
  Eigen::MatrixXd in(d * static_cast<Eigen::Index>(views.size()), n);
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (views[v]->patches.rows() != d || views[v]->patches.cols() != n)
      throw DimensionError("views have different patch layouts");
    in.middleRows(static_cast<Eigen::Index>(v) * d, d) = views[v]->patches;
  }
  return in;
}

DisplacementField4D regularize_field(const MlpModel& model, const DisplacementField4D& field,
                                     const Index3& stride, const VoxelMask* mask) {
  model.validate();
  if (model.views != 1) throw DimensionError("regularize_field needs a single-view model");
  const PatchSet ps = extract_patches(field, model.patch_dims, stride, mask);
  return predict_and_merge(model, {&ps}, field);
}

DisplacementField4D fuse_multiview(const MlpModel& model, const DisplacementField4D& field_a,
                                   const DisplacementField4D& field_b, const Index3& stride,
                                   const VoxelMask* mask) {
  model.validate();
  field_a.require_same_shape(field_b, "fuse_multiview");
  if (model.views != 2) throw DimensionError("fuse_multiview needs a two-view model");
  const PatchSet a = extract_patches(field_a, model.patch_dims, stride, mask);
  const PatchSet b = extract_patches_at(field_b, a);
  return predict_and_merge(model, {&a, &b}, field_a);
}

DomainActivations export_hidden_activations(const MlpModel& model,
                                            const std::vector<Eigen::MatrixXd>& inputs,
                                            const std::vector<std::string>& labels,
                                            int layer_index) {
  if (inputs.size() != labels.size()) throw DimensionError("one label per input group required");
  DomainActivations out;
  Eigen::Index rows = 0;
  for (const auto& m : inputs) rows += m.cols();
  const int width = layer_index >= 0 && layer_index < model.hidden_layers() ? model.layer_sizes[layer_index + 1] : 0;
  out.activations.resize(rows, width);
  Eigen::Index r = 0;
  for (std::size_t g = 0; g < inputs.size(); ++g) {
    const Eigen::MatrixXd act = hidden_activations(model, inputs[g], layer_index);
    out.activations.middleRows(r, act.rows()) = act;
    r += act.rows();
    out.domain.insert(out.domain.end(), static_cast<std::size_t>(act.rows()), labels[g]);
  }
  if (inputs.empty()) hidden_activations(model, Eigen::MatrixXd(model.input_dim(), 0), layer_index);
  return out;
}

}  // namespace cardiostrain
