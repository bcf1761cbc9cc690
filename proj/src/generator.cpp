#include "fh/generator.hpp"

#include <stdexcept>
#include <string>

#include "fh/data_pipeline.hpp"

namespace fh {
namespace {

constexpr double kLeakySlope = 0.2;

void check_stage(int stage, int active) {
  if (stage < 1 || stage > active) {
    throw std::out_of_range("stage " + std::to_string(stage) + " requested but the active stage is " +
                            std::to_string(active));
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  if (n_a != kNumAttributes) throw std::invalid_argument("n_a must be " + std::to_string(kNumAttributes));
  if (base_channels < 8) throw std::invalid_argument("base_channels must be at least 8");
  if (encoder_depth < 1 || encoder_depth > 4) throw std::invalid_argument("encoder_depth must be in 1..4");
  if (residual_blocks_per_stage < 1) throw std::invalid_argument("residual_blocks_per_stage must be at least 1");
  if (stage_resolutions != std::array<int, 3>{32, 64, 128}) {
    throw std::invalid_argument("stage_resolutions must be 32, 64, 128");
  }
}

const Var& StageOutputs::image(int stage) const {
  check_stage(stage, active_stage);
  return merged[static_cast<std::size_t>(stage - 1)];
}

const Var& StageOutputs::intermediate_rgb(int stage) const {
  check_stage(stage, active_stage);
  return rgb[static_cast<std::size_t>(stage - 1)];
}

Generator::Generator(const GeneratorConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int base = config_.base_channels;
  const int depth = config_.encoder_depth;

  int in = 3;
  for (int j = 0; j < depth; ++j) {
    const int out = base << j;
    const std::string name = "enc" + std::to_string(j + 1);
    encoder_.push_back({make_conv(store_, name, in, out, 4, {2, 1}, false, kLeakySlope, rng),
                        make_batch_norm(store_, name + ".bn", out)});
    in = out;
  }

  // 1x1 fusion of bottleneck features with the broadcast attribute planes.
  fuse_ = {make_conv(store_, "fuse", in + config_.n_a, in, 1, {1, 0}, false, 0.0, rng),
           make_batch_norm(store_, "fuse.bn", in)};

  for (int j = 1; j <= depth; ++j) {
    const int out = base << std::max(depth - j - 1, 0);
    const std::string name = "dec" + std::to_string(j);
    decoder_.push_back({make_conv_transpose(store_, name, in, out, rng), make_batch_norm(store_, name + ".bn", out)});
    in = out;
  }

  for (int s = 1; s <= 3; ++s) {
    Stage st;
    const int c_in = config_.stage_channels(s - 1);
    const int c_out = config_.stage_channels(s);
    const std::string prefix = "stage" + std::to_string(s);
    for (int r = 0; r < config_.residual_blocks_per_stage; ++r) {
      const std::string rn = prefix + ".res" + std::to_string(r + 1);
      ResidualBlock rb;
      rb.a = {make_conv(store_, rn + ".conv1", c_in, c_in, 3, {1, 1}, false, 0.0, rng),
              make_batch_norm(store_, rn + ".bn1", c_in)};
      rb.b = {make_conv(store_, rn + ".conv2", c_in, c_in, 3, {1, 1}, false, 0.0, rng),
              make_batch_norm(store_, rn + ".bn2", c_in)};
      st.residual.push_back(std::move(rb));
    }
    st.up = {make_conv_transpose(store_, prefix + ".up", c_in, c_out, rng),
             make_batch_norm(store_, prefix + ".up.bn", c_out)};
    st.to_rgb = make_conv(store_, prefix + ".rgb", c_out, 3, 5, {1, 2}, true, 1.0, rng);
    stages_.push_back(std::move(st));
  }
}

StageOutputs Generator::forward(const Var& lr, const Var& attrs, int active_stage, const ForwardOptions& opt) const {
  const Shape ls = lr.shape();
  if (ls.c != 3 || ls.h != kLrSize || ls.w != kLrSize) {
    throw std::invalid_argument("generator input must be [N,3,16,16], got " + ls.str());
  }
  if (attrs.shape() != Shape{ls.n, config_.n_a, 1, 1}) {
    throw std::invalid_argument("attribute tensor must be [N,12,1,1], got " + attrs.shape().str());
  }
  if (active_stage < 1 || active_stage > 3) throw std::invalid_argument("active_stage must be in 1..3");

  Var h = lr;
  for (const auto& e : encoder_) h = leaky_relu(e.bn.forward(e.conv.forward(h), opt), kLeakySlope);
  const Shape hs = h.shape();
  h = concat_channels(h, expand(attrs, Shape{hs.n, config_.n_a, hs.h, hs.w}));
  h = relu(fuse_.bn.forward(fuse_.conv.forward(h), opt));
  for (const auto& d : decoder_) h = relu(d.bn.forward(d.conv.forward(h), opt));

  StageOutputs out;
  out.active_stage = active_stage;
  out.upsampled_lr = resize_bilinear(lr, config_.stage_resolutions[0], config_.stage_resolutions[0]);
  Var previous = out.upsampled_lr;
  for (int s = 1; s <= active_stage; ++s) {
    const Stage& st = stages_[static_cast<std::size_t>(s - 1)];
    for (const auto& rb : st.residual) {
      Var r = relu(rb.a.bn.forward(rb.a.conv.forward(h), opt));
      r = rb.b.bn.forward(rb.b.conv.forward(r), opt);
      h = relu(add(h, r));
    }
    h = relu(st.up.bn.forward(st.up.conv.forward(h), opt));
    Var rgb = st.to_rgb.forward(h);
    const int res = config_.stage_resolutions[static_cast<std::size_t>(s - 1)];
    Var skip = s == 1 ? previous : resize_bilinear(previous, res, res);
    Var merged = add(rgb, skip);
    out.rgb.push_back(rgb);
    out.merged.push_back(merged);
    previous = merged;
  }
  return out;
}

std::vector<Image> Generator::generate(const Image& lr, const AttributeVector& attrs, int active_stage) const {
  attrs.validate();
  NoGradGuard no_grad;
  const AttributeVector one[] = {attrs};
  StageOutputs o = forward(constant(lr.to_tensor()), constant(attributes_to_tensor(one)), active_stage,
                           ForwardOptions::eval());
  std::vector<Image> images;
  for (const auto& m : o.merged) images.push_back(Image::from_tensor(m.value()));
  return images;
}

}  // namespace fh
