#include "hgo/heads.hpp"

#include <algorithm>
#include <cmath>

namespace hgo {

HeadLayer head_layer_from_string(const std::string& s) {
  if (s == "conv") return HeadLayer::Conv;
  if (s == "pconv") return HeadLayer::PConv;
  throw Error("unknown head layer kind '" + s + "' (expected conv|pconv)");
}

std::string to_string(HeadLayer k) { return k == HeadLayer::Conv ? "conv" : "pconv"; }

void HeadConfig::validate() const {
  HGO_CHECK(!channels.empty(), "head needs at least one scale");
  HGO_CHECK(channels.size() == strides.size(),
            "head channels/strides size mismatch: " << channels.size() << " vs "
                                                    << strides.size());
  for (int c : channels) HGO_CHECK(c >= 1, "head scale width " << c << " must be >= 1");
  for (int s : strides) HGO_CHECK(s >= 1, "head stride " << s << " must be >= 1");
  HGO_CHECK(nc >= 1, "nc " << nc << " must be >= 1");
  HGO_CHECK(reg_max >= 2, "reg_max " << reg_max << " must be >= 2");
}

float Head::cls_prior_bias(int stride) const {
  const double cells = static_cast<double>(kRefImg / stride) * (kRefImg / stride);
  return static_cast<float>(std::log(5.0 / cfg_.nc / cells));
}

void Head::ramp_reg_bias(const Tensor& bias) const {
  // decaying ramp over each side's bins: the softmax expectation starts near
  // 2.3 strides instead of the uniform midpoint, so day-one decoded boxes sit
  // at object scale and the iou-ranked assigner sees usable candidates
  for (std::size_t i = 0; i < bias->data.size(); ++i)
    bias->data[i] = 1.0f - 0.35f * static_cast<float>(i % static_cast<std::size_t>(cfg_.reg_max));
}

// ------------------------------------------------------------ DecoupledHead

DecoupledHead::DecoupledHead(HeadConfig cfg) : Head(std::move(cfg)) {
  c2_ = std::max({16, cfg_.channels[0] / 4, 4 * cfg_.reg_max});
  c3_ = std::max(cfg_.channels[0], std::min(cfg_.nc, 100));
  for (std::size_t i = 0; i < cfg_.channels.size(); ++i) {
    const int ch = cfg_.channels[i];
    const std::string p = "head.s" + std::to_string(i);
    scales_.push_back(ScaleBranch{
        ConvBNAct(p + ".reg0", ConvSpec{ch, c2_, 3, 1, 1, 1, false}, Act::Silu),
        ConvBNAct(p + ".reg1", ConvSpec{c2_, c2_, 3, 1, 1, 1, false}, Act::Silu),
        ConvBNAct(p + ".reg2", ConvSpec{c2_, 4 * cfg_.reg_max, 1, 1, 0, 1, true}, Act::None,
                  false),
        ConvBNAct(p + ".cls0", ConvSpec{ch, c3_, 3, 1, 1, 1, false}, Act::Silu),
        ConvBNAct(p + ".cls1", ConvSpec{c3_, c3_, 3, 1, 1, 1, false}, Act::Silu),
        ConvBNAct(p + ".cls2", ConvSpec{c3_, cfg_.nc, 1, 1, 0, 1, true}, Act::None, false)});
  }
}

std::vector<Tensor> DecoupledHead::forward(const std::vector<Tensor>& feats, bool training) {
  HGO_CHECK(feats.size() == scales_.size(),
            "head expected " << scales_.size() << " feature maps, got " << feats.size());
  std::vector<Tensor> outs;
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    auto& s = scales_[i];
    Tensor r = s.reg2.forward(s.reg1.forward(s.reg0.forward(feats[i], training), training),
                              training);
    Tensor c = s.cls2.forward(s.cls1.forward(s.cls0.forward(feats[i], training), training),
                              training);
    outs.push_back(ops::concat_channels<float>({r, c}));
  }
  return outs;
}

void DecoupledHead::collect_params(std::vector<NamedParam>& out) {
  for (auto& s : scales_) {
    s.reg0.collect_params(out);
    s.reg1.collect_params(out);
    s.reg2.collect_params(out);
    s.cls0.collect_params(out);
    s.cls1.collect_params(out);
    s.cls2.collect_params(out);
  }
}

void DecoupledHead::describe(const std::vector<FeatShape>& ins,
                             std::vector<PrimOp>& prims) const {
  HGO_CHECK(ins.size() == scales_.size(), "describe scale count mismatch");
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    const auto& s = scales_[i];
    s.reg2.describe(s.reg1.describe(s.reg0.describe(ins[i], prims), prims), prims);
    s.cls2.describe(s.cls1.describe(s.cls0.describe(ins[i], prims), prims), prims);
    PrimOp cat;
    cat.kind = PrimOp::Kind::Concat;
    cat.name = "head.s" + std::to_string(i) + "/concat";
    cat.in = ins[i];
    cat.out = {out_channels(), ins[i].h, ins[i].w};
    prims.push_back(cat);
  }
}

void DecoupledHead::init(std::uint64_t seed) {
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    auto& s = scales_[i];
    s.reg0.init(seed);
    s.reg1.init(seed);
    s.reg2.init(seed);
    s.cls0.init(seed);
    s.cls1.init(seed);
    s.cls2.init(seed);
    ramp_reg_bias(s.reg2.bias());
    const float prior = cls_prior_bias(cfg_.strides[i]);
    for (auto& v : s.cls2.bias()->data) v = prior;
  }
}

// --------------------------------------------------------------- SharedHead

namespace {

// flips count_params off for prims emitted by a repeat invocation of shared
// weights
void mark_shared(std::vector<PrimOp>& prims, std::size_t from, bool count) {
  if (count) return;
  for (std::size_t i = from; i < prims.size(); ++i) prims[i].count_params = false;
}

}  // namespace

Tensor SharedHead::StackLayer::forward(const Tensor& x, bool training) {
  if (kind == HeadLayer::Conv) return conv->forward(x, training);
  Tensor y = pconv->forward(x, training);
  if (training) {
    y = ops::batchnorm_train(y, gamma, beta, rmean->data, rvar->data, ConvBNAct::kBnMomentum,
                             ConvBNAct::kBnEps);
  } else {
    const int C = y->c();
    auto scale = make_tensor<float>({C});
    auto shift = make_tensor<float>({C});
    for (int c = 0; c < C; ++c) {
      const std::size_t i = static_cast<std::size_t>(c);
      const float s = gamma->data[i] / std::sqrt(rvar->data[i] + ConvBNAct::kBnEps);
      scale->data[i] = s;
      shift->data[i] = beta->data[i] - rmean->data[i] * s;
    }
    y = ops::channel_affine(y, scale, shift);
  }
  return ops::silu(y);
}

void SharedHead::StackLayer::collect(std::vector<NamedParam>& out) {
  if (kind == HeadLayer::Conv) {
    conv->collect_params(out);
    return;
  }
  pconv->collect_params(out);
  out.push_back({name + ".bn.gamma", gamma, true});
  out.push_back({name + ".bn.beta", beta, true});
  out.push_back({name + ".bn.rmean", rmean, false});
  out.push_back({name + ".bn.rvar", rvar, false});
}

FeatShape SharedHead::StackLayer::describe(FeatShape in, std::vector<PrimOp>& prims,
                                           bool count_params) const {
  const std::size_t from = prims.size();
  FeatShape out;
  if (kind == HeadLayer::Conv) {
    out = conv->describe(in, prims);
  } else {
    out = pconv->describe(in, prims);
    PrimOp norm;
    norm.kind = PrimOp::Kind::Norm;
    norm.name = name + ".bn";
    norm.act = Act::Silu;
    norm.in = out;
    norm.out = out;
    prims.push_back(norm);
  }
  mark_shared(prims, from, count_params);
  return out;
}

void SharedHead::StackLayer::init(std::uint64_t seed) {
  if (kind == HeadLayer::Conv) {
    conv->init(seed);
    return;
  }
  pconv->init(seed);
  for (auto& v : gamma->data) v = 1.0f;
  for (auto& v : beta->data) v = 0.0f;
  for (auto& v : rmean->data) v = 0.0f;
  for (auto& v : rvar->data) v = 1.0f;
}

SharedHead::SharedHead(HeadConfig cfg, SharedHeadOptions opt)
    : Head(std::move(cfg)),
      opt_(opt),
      reg_("head.shared.reg", ConvSpec{opt.hidden > 0 ? opt.hidden : cfg_.channels[0],
                                       4 * cfg_.reg_max, 1, 1, 0, 1, true},
           Act::None, false),
      cls_("head.shared.cls", ConvSpec{opt.hidden > 0 ? opt.hidden : cfg_.channels[0], cfg_.nc,
                                       1, 1, 0, 1, true},
           Act::None, false) {
  if (opt_.hidden <= 0) opt_.hidden = cfg_.channels[0];
  const int h = opt_.hidden;
  for (std::size_t i = 0; i < cfg_.channels.size(); ++i) {
    proj_.emplace_back("head.proj" + std::to_string(i),
                       ConvSpec{cfg_.channels[i], h, 1, 1, 0, 1, false}, Act::Silu);
  }
  auto build = [&](StackLayer& l, HeadLayer kind, const std::string& name) {
    l.kind = kind;
    l.name = name;
    if (kind == HeadLayer::Conv) {
      l.conv = std::make_unique<ConvBNAct>(name, ConvSpec{h, h, 1, 1, 0, 1, false}, Act::Silu);
    } else {
      l.pconv = std::make_unique<PConv>(name, h, opt_.partial_ratio, 3);
      l.gamma = make_tensor<float>({h}, true);
      l.beta = make_tensor<float>({h}, true);
      l.rmean = make_tensor<float>({h}, false);
      l.rvar = make_tensor<float>({h}, false);
    }
  };
  build(l1_, opt_.layer1, "head.shared.l1");
  build(l2_, opt_.layer2, "head.shared.l2");
}

std::vector<Tensor> SharedHead::forward(const std::vector<Tensor>& feats, bool training) {
  HGO_CHECK(feats.size() == proj_.size(),
            "head expected " << proj_.size() << " feature maps, got " << feats.size());
  std::vector<Tensor> outs;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    Tensor x = proj_[i].forward(feats[i], training);
    x = l2_.forward(l1_.forward(x, training), training);
    outs.push_back(
        ops::concat_channels<float>({reg_.forward(x, training), cls_.forward(x, training)}));
  }
  return outs;
}

void SharedHead::collect_params(std::vector<NamedParam>& out) {
  for (auto& p : proj_) p.collect_params(out);
  l1_.collect(out);
  l2_.collect(out);
  reg_.collect_params(out);
  cls_.collect_params(out);
}

void SharedHead::describe(const std::vector<FeatShape>& ins, std::vector<PrimOp>& prims) const {
  HGO_CHECK(ins.size() == proj_.size(), "describe scale count mismatch");
  for (std::size_t i = 0; i < ins.size(); ++i) {
    const bool first = i == 0;
    FeatShape x = proj_[i].describe(ins[i], prims);
    x = l2_.describe(l1_.describe(x, prims, first), prims, first);
    std::size_t from = prims.size();
    reg_.describe(x, prims);
    cls_.describe(x, prims);
    mark_shared(prims, from, first);
    PrimOp cat;
    cat.kind = PrimOp::Kind::Concat;
    cat.name = "head.shared/concat" + std::to_string(i);
    cat.in = x;
    cat.out = {out_channels(), x.h, x.w};
    prims.push_back(cat);
  }
}

void SharedHead::init(std::uint64_t seed) {
  for (auto& p : proj_) p.init(seed);
  l1_.init(seed);
  l2_.init(seed);
  reg_.init(seed);
  cls_.init(seed);
  ramp_reg_bias(reg_.bias());
  const float prior = cls_prior_bias(cfg_.strides[cfg_.strides.size() / 2]);
  for (auto& v : cls_.bias()->data) v = prior;
}

// ------------------------------------------------------------------ anchors

Anchors make_anchors(const std::vector<FeatShape>& feats, const std::vector<int>& strides) {
  HGO_CHECK(feats.size() == strides.size(), "anchor scale count mismatch");
  Anchors a;
  for (std::size_t s = 0; s < feats.size(); ++s) {
    const float st = static_cast<float>(strides[s]);
    for (int y = 0; y < feats[s].h; ++y) {
      for (int x = 0; x < feats[s].w; ++x) {
        a.cx.push_back((static_cast<float>(x) + 0.5f) * st);
        a.cy.push_back((static_cast<float>(y) + 0.5f) * st);
        a.stride.push_back(st);
      }
    }
  }
  return a;
}

std::vector<float> decode_boxes(const TensorT<float>& map, int reg_max, int stride, int batch) {
  const int H = map.shape[2], W = map.shape[3];
  HGO_CHECK(map.shape[1] >= 4 * reg_max, "map too narrow for reg_max " << reg_max);
  HGO_CHECK(batch >= 0 && batch < map.shape[0], "batch index " << batch << " out of range");
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(H) * W * 4);
  std::vector<double> probs(static_cast<std::size_t>(reg_max));
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      float d[4];
      for (int side = 0; side < 4; ++side) {
        double mx = -1e30;
        for (int b = 0; b < reg_max; ++b)
          mx = std::max(mx, static_cast<double>(map.at(batch, side * reg_max + b, y, x)));
        double denom = 0.0, expect = 0.0;
        for (int b = 0; b < reg_max; ++b) {
          const double e =
              std::exp(static_cast<double>(map.at(batch, side * reg_max + b, y, x)) - mx);
          probs[static_cast<std::size_t>(b)] = e;
          denom += e;
        }
        for (int b = 0; b < reg_max; ++b)
          expect += b * probs[static_cast<std::size_t>(b)] / denom;
        d[side] = static_cast<float>(expect) * static_cast<float>(stride);
      }
      const float cx = (static_cast<float>(x) + 0.5f) * static_cast<float>(stride);
      const float cy = (static_cast<float>(y) + 0.5f) * static_cast<float>(stride);
      out.push_back(cx - d[0]);
      out.push_back(cy - d[1]);
      out.push_back(cx + d[2]);
      out.push_back(cy + d[3]);
    }
  }
  return out;
}

std::vector<float> decode_scores(const TensorT<float>& map, int reg_max, int nc) {
  const int H = map.shape[2], W = map.shape[3];
  HGO_CHECK(map.shape[1] == 4 * reg_max + nc,
            "map channels " << map.shape[1] << " != 4*reg_max+nc");
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(H) * W * nc);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < nc; ++c) {
        const float z = map.at(0, 4 * reg_max + c, y, x);
        out.push_back(1.0f / (1.0f + std::exp(-z)));
      }
  return out;
}

}  // namespace hgo
