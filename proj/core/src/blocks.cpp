#include "hgo/blocks.hpp"

#include <cmath>

namespace hgo {

namespace {

Tensor apply_act(const Tensor& x, Act act) {
  switch (act) {
    case Act::Relu:
      return ops::relu(x);
    case Act::Silu:
      return ops::silu(x);
    case Act::None:
      return x;
  }
  return x;
}

FeatShape conv_out_shape(const ConvSpec& spec, FeatShape in) {
  return {spec.out_channels, spec.out_extent(in.h), spec.out_extent(in.w)};
}

}  // namespace

// ---------------------------------------------------------------- ConvBNAct

ConvBNAct::ConvBNAct(std::string name, ConvSpec spec, Act act, bool with_bn)
    : name_(std::move(name)), spec_(spec), act_(act), with_bn_(with_bn) {
  spec_.validate();
  w_ = make_tensor<float>({spec_.out_channels, spec_.in_channels / spec_.groups, spec_.kernel,
                           spec_.kernel},
                          true);
  if (spec_.bias) b_ = make_tensor<float>({spec_.out_channels}, true);
  if (with_bn_) {
    gamma_ = make_tensor<float>({spec_.out_channels}, true);
    beta_ = make_tensor<float>({spec_.out_channels}, true);
    rmean_ = make_tensor<float>({spec_.out_channels}, false);
    rvar_ = make_tensor<float>({spec_.out_channels}, false);
  }
}

void ConvBNAct::init(std::uint64_t seed) {
  Rng rng(seed ^ fnv1a(name_));
  const int fan_in = (spec_.in_channels / spec_.groups) * spec_.kernel * spec_.kernel;
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : w_->data) v = static_cast<float>(rng.uniform(-a, a));
  if (b_)
    for (auto& v : b_->data) v = 0.0f;
  if (with_bn_) {
    for (auto& v : gamma_->data) v = 1.0f;
    for (auto& v : beta_->data) v = 0.0f;
    for (auto& v : rmean_->data) v = 0.0f;
    for (auto& v : rvar_->data) v = 1.0f;
  }
}

Tensor ConvBNAct::forward(const Tensor& x, bool training) {
  Tensor y = ops::conv2d(x, spec_, w_, b_);
  if (with_bn_) {
    if (training) {
      y = ops::batchnorm_train(y, gamma_, beta_, rmean_->data, rvar_->data, kBnMomentum, kBnEps);
    } else {
      // folded scale/shift from running stats; constants, so no tape entries
      const int C = spec_.out_channels;
      auto scale = make_tensor<float>({C});
      auto shift = make_tensor<float>({C});
      for (int c = 0; c < C; ++c) {
        const std::size_t i = static_cast<std::size_t>(c);
        const float s = gamma_->data[i] / std::sqrt(rvar_->data[i] + kBnEps);
        scale->data[i] = s;
        shift->data[i] = beta_->data[i] - rmean_->data[i] * s;
      }
      y = ops::channel_affine(y, scale, shift);
    }
  }
  return apply_act(y, act_);
}

void ConvBNAct::collect_params(std::vector<NamedParam>& out) {
  out.push_back({name_ + ".w", w_, true});
  if (b_) out.push_back({name_ + ".b", b_, true});
  if (with_bn_) {
    out.push_back({name_ + ".bn.gamma", gamma_, true});
    out.push_back({name_ + ".bn.beta", beta_, true});
    out.push_back({name_ + ".bn.rmean", rmean_, false});
    out.push_back({name_ + ".bn.rvar", rvar_, false});
  }
}

FeatShape ConvBNAct::describe(FeatShape in, std::vector<PrimOp>& prims) const {
  PrimOp p;
  p.kind = PrimOp::Kind::Conv;
  p.name = name_;
  p.conv = spec_;
  p.has_bn = with_bn_;
  p.act = act_;
  p.in = in;
  p.out = conv_out_shape(spec_, in);
  prims.push_back(p);
  return p.out;
}

// ---------------------------------------------------------------- GhostConv

void GhostSpec::validate() const {
  HGO_CHECK(in_channels >= 1, "ghost in_channels " << in_channels << " must be >= 1");
  HGO_CHECK(ratio >= 2, "ghost ratio " << ratio << " must be >= 2");
  HGO_CHECK(out_channels >= ratio && out_channels % ratio == 0,
            "ghost out_channels " << out_channels << " not divisible by ratio " << ratio);
  HGO_CHECK(cheap_kernel >= 1 && cheap_kernel % 2 == 1,
            "ghost cheap_kernel " << cheap_kernel << " must be odd");
  HGO_CHECK(primary_kernel >= 1 && primary_kernel % 2 == 1,
            "ghost primary_kernel " << primary_kernel << " must be odd");
}

GhostConv::GhostConv(std::string name, GhostSpec spec, Act act)
    : spec_(spec),
      primary_(name + ".primary",
               ConvSpec{spec.in_channels, spec.condensed(), spec.primary_kernel, 1,
                        spec.primary_kernel / 2, 1, false},
               act),
      cheap_(name + ".cheap",
             ConvSpec{spec.condensed(), (spec.ratio - 1) * spec.condensed(), spec.cheap_kernel, 1,
                      spec.cheap_kernel / 2, spec.condensed(), false},
             act) {
  spec_.validate();
}

void GhostConv::init(std::uint64_t seed) {
  primary_.init(seed);
  cheap_.init(seed);
}

Tensor GhostConv::forward(const Tensor& x, bool training) {
  Tensor condensed = primary_.forward(x, training);
  Tensor cheap = cheap_.forward(condensed, training);
  return ops::concat_channels<float>({condensed, cheap});
}

void GhostConv::collect_params(std::vector<NamedParam>& out) {
  primary_.collect_params(out);
  cheap_.collect_params(out);
}

FeatShape GhostConv::describe(FeatShape in, std::vector<PrimOp>& prims) const {
  FeatShape cond = primary_.describe(in, prims);
  FeatShape cheap = cheap_.describe(cond, prims);
  PrimOp cat;
  cat.kind = PrimOp::Kind::Concat;
  cat.name = primary_.name() + "/concat";
  cat.in = cond;
  cat.out = {cond.c + cheap.c, cond.h, cond.w};
  prims.push_back(cat);
  return cat.out;
}

// -------------------------------------------------------------------- PConv

PConv::PConv(std::string name, int channels, double partial_ratio, int kernel)
    : name_(std::move(name)),
      channels_(channels),
      cp_([&] {
        HGO_CHECK(partial_ratio > 0.0 && partial_ratio <= 1.0,
                  "pconv partial_ratio " << partial_ratio << " must be in (0,1]");
        const int cp = static_cast<int>(channels * partial_ratio);
        HGO_CHECK(cp >= 1, "pconv floor(c*r) = " << cp << " must be >= 1 (c=" << channels
                                                 << ", r=" << partial_ratio << ")");
        return cp;
      }()),
      kernel_(kernel),
      conv_(name_ + ".conv", ConvSpec{cp_, cp_, kernel, 1, kernel / 2, 1, false}, Act::None,
            /*with_bn=*/false) {}

void PConv::init(std::uint64_t seed) { conv_.init(seed); }

Tensor PConv::forward(const Tensor& x, bool training) {
  HGO_CHECK(x->c() == channels_,
            "pconv input channels " << x->c() << " != configured " << channels_);
  if (cp_ == channels_) return conv_.forward(x, training);
  auto parts = ops::split_channels(x, {cp_, channels_ - cp_});
  Tensor y = conv_.forward(parts[0], training);
  return ops::concat_channels<float>({y, parts[1]});
}

void PConv::collect_params(std::vector<NamedParam>& out) { conv_.collect_params(out); }

FeatShape PConv::describe(FeatShape in, std::vector<PrimOp>& prims) const {
  conv_.describe({cp_, in.h, in.w}, prims);
  if (cp_ != channels_) {
    PrimOp cat;
    cat.kind = PrimOp::Kind::Concat;
    cat.name = name_ + "/concat";
    cat.in = in;
    cat.out = in;
    prims.push_back(cat);
  }
  return in;
}

// ------------------------------------------------------------------ HGBlock

void HGBlockSpec::validate() const {
  HGO_CHECK(in_channels >= 1 && mid_channels >= 1 && out_channels >= 1,
            "hg_block channels must be >= 1");
  HGO_CHECK(out_channels % 2 == 0, "hg_block out_channels " << out_channels << " must be even");
  HGO_CHECK(layer_num >= 1, "hg_block layer_num " << layer_num << " must be >= 1");
  HGO_CHECK(kernel >= 1 && kernel % 2 == 1, "hg_block kernel " << kernel << " must be odd");
  HGO_CHECK(!shortcut || in_channels == out_channels,
            "hg_block shortcut requires in_channels == out_channels, got "
                << in_channels << " vs " << out_channels);
}

HGBlock::HGBlock(std::string name, HGBlockSpec spec)
    : spec_(spec),
      squeeze_(name + ".sc",
               ConvSpec{spec.layer_num * spec.mid_channels, spec.out_channels / 2, 1, 1, 0, 1,
                        false},
               Act::Relu),
      excite_(name + ".ec", ConvSpec{spec.out_channels / 2, spec.out_channels, 1, 1, 0, 1, false},
              Act::Relu) {
  spec_.validate();
  int cin = spec_.in_channels;
  for (int i = 0; i < spec_.layer_num; ++i) {
    const std::string lname = name + ".m" + std::to_string(i);
    if (spec_.use_ghost) {
      layers_.push_back(std::make_unique<GhostConv>(
          lname, GhostSpec{cin, spec_.mid_channels, 2, 3, 1}, Act::Relu));
    } else {
      layers_.push_back(std::make_unique<ConvBNAct>(
          lname, ConvSpec{cin, spec_.mid_channels, spec_.kernel, 1, spec_.kernel / 2, 1, false},
          Act::Relu));
    }
    cin = spec_.mid_channels;
  }
}

void HGBlock::init(std::uint64_t seed) {
  for (auto& l : layers_) l->init(seed);
  squeeze_.init(seed);
  excite_.init(seed);
}

Tensor HGBlock::forward(const Tensor& x, bool training) {
  HGO_CHECK(x->c() == spec_.in_channels,
            "hg_block input channels " << x->c() << " != spec " << spec_.in_channels);
  std::vector<Tensor> ys;
  Tensor y = x;
  for (auto& l : layers_) {
    y = l->forward(y, training);
    ys.push_back(y);  // Eq-1 concat: the Y_i only, input excluded
  }
  Tensor z = ops::concat_channels(ys);
  z = squeeze_.forward(z, training);
  z = excite_.forward(z, training);
  if (spec_.shortcut) z = ops::add(z, x);
  return z;
}

void HGBlock::collect_params(std::vector<NamedParam>& out) {
  for (auto& l : layers_) l->collect_params(out);
  squeeze_.collect_params(out);
  excite_.collect_params(out);
}

FeatShape HGBlock::describe(FeatShape in, std::vector<PrimOp>& prims) const {
  FeatShape cur = in;
  for (const auto& l : layers_) cur = l->describe(cur, prims);
  PrimOp cat;
  cat.kind = PrimOp::Kind::Concat;
  cat.name = squeeze_.name() + "/concat";
  cat.in = cur;
  cat.out = {spec_.layer_num * spec_.mid_channels, cur.h, cur.w};
  prims.push_back(cat);
  FeatShape s = squeeze_.describe(cat.out, prims);
  FeatShape e = excite_.describe(s, prims);
  if (spec_.shortcut) {
    PrimOp addp;
    addp.kind = PrimOp::Kind::Eltwise;
    addp.name = excite_.name() + "/residual";
    addp.in = e;
    addp.out = e;
    prims.push_back(addp);
  }
  return e;
}

// ------------------------------------------------------------------- HGStem

HGStem::HGStem(std::string name, int in_channels, int mid_channels, int out_channels)
    : name_(std::move(name)),
      mid_(mid_channels),
      stem1_(name_ + ".stem1", ConvSpec{in_channels, mid_channels, 3, 2, 1, 1, false}, Act::Relu),
      stem2_(name_ + ".stem2", ConvSpec{mid_channels, mid_channels, 2, 1, 0, 1, false}, Act::Relu),
      stem3_(name_ + ".stem3", ConvSpec{2 * mid_channels, mid_channels, 3, 2, 1, 1, false},
             Act::Relu),
      stem4_(name_ + ".stem4", ConvSpec{mid_channels, out_channels, 1, 1, 0, 1, false},
             Act::Relu) {}

void HGStem::init(std::uint64_t seed) {
  stem1_.init(seed);
  stem2_.init(seed);
  stem3_.init(seed);
  stem4_.init(seed);
}

Tensor HGStem::forward(const Tensor& x, bool training) {
  HGO_CHECK(x->h() % 4 == 0 && x->w() % 4 == 0,
            "hg_stem input " << x->h() << "x" << x->w() << " not divisible by 4");
  Tensor y = stem1_.forward(x, training);
  // bottom/right zero pad keeps both branches at the stem1 resolution; safe
  // under ReLU because padded zeros can never win the max
  Tensor padded = ops::pad2d(y, 0, 1, 0, 1);
  Tensor pooled = ops::maxpool2d(padded, 2, 1, 0);
  Tensor conved = stem2_.forward(padded, training);
  Tensor cat = ops::concat_channels<float>({pooled, conved});
  return stem4_.forward(stem3_.forward(cat, training), training);
}

void HGStem::collect_params(std::vector<NamedParam>& out) {
  stem1_.collect_params(out);
  stem2_.collect_params(out);
  stem3_.collect_params(out);
  stem4_.collect_params(out);
}

FeatShape HGStem::describe(FeatShape in, std::vector<PrimOp>& prims) const {
  FeatShape s1 = stem1_.describe(in, prims);
  PrimOp pad;
  pad.kind = PrimOp::Kind::Pad;
  pad.name = name_ + "/pad";
  pad.in = s1;
  pad.out = {s1.c, s1.h + 1, s1.w + 1};
  prims.push_back(pad);

  PrimOp pool;
  pool.kind = PrimOp::Kind::Pool;
  pool.name = name_ + "/pool";
  pool.pool_kernel = 2;
  pool.pool_stride = 1;
  pool.in = pad.out;
  pool.out = s1;
  prims.push_back(pool);

  FeatShape s2 = stem2_.describe(pad.out, prims);

  PrimOp cat;
  cat.kind = PrimOp::Kind::Concat;
  cat.name = name_ + "/concat";
  cat.in = s1;
  cat.out = {s1.c + s2.c, s1.h, s1.w};
  prims.push_back(cat);

  return stem4_.describe(stem3_.describe(cat.out, prims), prims);
}

// --------------------------------------------------------------------- SPPF

SPPF::SPPF(std::string name, int channels, int pool_kernel)
    : name_(std::move(name)),
      channels_([&] {
        HGO_CHECK(channels >= 2 && channels % 2 == 0,
                  "sppf channels " << channels << " must be even");
        return channels;
      }()),
      pool_k_(pool_kernel),
      cv1_(name_ + ".cv1", ConvSpec{channels_, channels_ / 2, 1, 1, 0, 1, false}, Act::Silu),
      cv2_(name_ + ".cv2", ConvSpec{2 * channels_, channels_, 1, 1, 0, 1, false}, Act::Silu) {}

void SPPF::init(std::uint64_t seed) {
  cv1_.init(seed);
  cv2_.init(seed);
}

Tensor SPPF::forward(const Tensor& x, bool training) {
  Tensor a = cv1_.forward(x, training);
  Tensor p1 = ops::maxpool2d(a, pool_k_, 1, pool_k_ / 2);
  Tensor p2 = ops::maxpool2d(p1, pool_k_, 1, pool_k_ / 2);
  Tensor p3 = ops::maxpool2d(p2, pool_k_, 1, pool_k_ / 2);
  return cv2_.forward(ops::concat_channels<float>({a, p1, p2, p3}), training);
}

void SPPF::collect_params(std::vector<NamedParam>& out) {
  cv1_.collect_params(out);
  cv2_.collect_params(out);
}

FeatShape SPPF::describe(FeatShape in, std::vector<PrimOp>& prims) const {
  FeatShape a = cv1_.describe(in, prims);
  for (int i = 0; i < 3; ++i) {
    PrimOp pool;
    pool.kind = PrimOp::Kind::Pool;
    pool.name = name_ + "/pool" + std::to_string(i + 1);
    pool.pool_kernel = pool_k_;
    pool.pool_stride = 1;
    pool.pool_padding = pool_k_ / 2;
    pool.in = a;
    pool.out = a;
    prims.push_back(pool);
  }
  PrimOp cat;
  cat.kind = PrimOp::Kind::Concat;
  cat.name = name_ + "/concat";
  cat.in = a;
  cat.out = {4 * a.c, a.h, a.w};
  prims.push_back(cat);
  return cv2_.describe(cat.out, prims);
}

// ---------------------------------------------------------------------- C2f

C2f::C2f(std::string name, int in_channels, int out_channels, int n_bottlenecks, bool shortcut)
    : name_(std::move(name)),
      in_(in_channels),
      out_([&] {
        HGO_CHECK(out_channels >= 2 && out_channels % 2 == 0,
                  "c2f out_channels " << out_channels << " must be even");
        HGO_CHECK(n_bottlenecks >= 1, "c2f n_bottlenecks " << n_bottlenecks << " must be >= 1");
        return out_channels;
      }()),
      half_(out_ / 2),
      shortcut_(shortcut),
      cv1_(name_ + ".cv1", ConvSpec{in_, out_, 1, 1, 0, 1, false}, Act::Silu),
      cv2_(name_ + ".cv2", ConvSpec{(2 + n_bottlenecks) * half_, out_, 1, 1, 0, 1, false},
           Act::Silu) {
  for (int i = 0; i < n_bottlenecks; ++i) {
    const std::string bn = name_ + ".m" + std::to_string(i);
    m_.push_back(Bottleneck{
        ConvBNAct(bn + ".cv1", ConvSpec{half_, half_, 3, 1, 1, 1, false}, Act::Silu),
        ConvBNAct(bn + ".cv2", ConvSpec{half_, half_, 3, 1, 1, 1, false}, Act::Silu), shortcut});
  }
}

void C2f::init(std::uint64_t seed) {
  cv1_.init(seed);
  cv2_.init(seed);
  for (auto& b : m_) {
    b.cv1.init(seed);
    b.cv2.init(seed);
  }
}

Tensor C2f::forward(const Tensor& x, bool training) {
  Tensor y = cv1_.forward(x, training);
  auto parts = ops::split_channels(y, {half_, half_});
  std::vector<Tensor> ys = {parts[0], parts[1]};
  Tensor cur = parts[1];
  for (auto& b : m_) {
    Tensor t = b.cv2.forward(b.cv1.forward(cur, training), training);
    cur = b.add ? ops::add(t, cur) : t;
    ys.push_back(cur);
  }
  return cv2_.forward(ops::concat_channels(ys), training);
}

void C2f::collect_params(std::vector<NamedParam>& out) {
  cv1_.collect_params(out);
  for (auto& b : m_) {
    b.cv1.collect_params(out);
    b.cv2.collect_params(out);
  }
  cv2_.collect_params(out);
}

FeatShape C2f::describe(FeatShape in, std::vector<PrimOp>& prims) const {
  FeatShape y = cv1_.describe(in, prims);
  FeatShape h{half_, y.h, y.w};
  for (const auto& b : m_) {
    FeatShape t = b.cv2.describe(b.cv1.describe(h, prims), prims);
    if (b.add) {
      PrimOp addp;
      addp.kind = PrimOp::Kind::Eltwise;
      addp.name = b.cv2.name() + "/residual";
      addp.in = t;
      addp.out = t;
      prims.push_back(addp);
    }
  }
  PrimOp cat;
  cat.kind = PrimOp::Kind::Concat;
  cat.name = name_ + "/concat";
  cat.in = h;
  cat.out = {(2 + static_cast<int>(m_.size())) * half_, y.h, y.w};
  prims.push_back(cat);
  return cv2_.describe(cat.out, prims);
}

}  // namespace hgo
