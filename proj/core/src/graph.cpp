#include "hgo/graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "hgo/half.hpp"

namespace hgo {

ScaleSpec scale_spec(const std::string& scale) {
  if (scale == "n") return {0.33, 0.25, 1024};
  if (scale == "s") return {0.33, 0.50, 1024};
  if (scale == "m") return {0.67, 0.75, 768};
  if (scale == "l") return {1.00, 1.00, 512};
  if (scale == "x") return {1.00, 1.25, 512};
  throw Error("unknown scale '" + scale + "' (expected n|s|m|l|x)");
}

int hgo_max_channels(const std::string& scale) {
  if (scale == "n") return 2048;
  if (scale == "s") return 1536;
  if (scale == "m") return 768;
  if (scale == "l" || scale == "x") return 512;
  throw Error("unknown scale '" + scale + "' (expected n|s|m|l|x)");
}

void ModelConfig::validate() const {
  scale_spec(scale);
  HGO_CHECK(backbone == "hgnetv2" || backbone == "c2f-baseline",
            "unknown backbone '" << backbone << "' (expected hgnetv2|c2f-baseline)");
  HGO_CHECK(head == "auto" || head == "shared" || head == "decoupled",
            "unknown head '" << head << "' (expected auto|shared|decoupled)");
  HGO_CHECK(num_classes >= 1, "num_classes " << num_classes << " must be >= 1");
  HGO_CHECK(input_size >= 32 && input_size % 32 == 0,
            "input_size " << input_size << " must be a positive multiple of 32");
  HGO_CHECK(reg_max >= 2, "reg_max " << reg_max << " must be >= 2");
  HGO_CHECK(ghost_stages.size() == 4, "ghost_stages must list 4 stages");
  HGO_CHECK(head_partial_ratio > 0.0 && head_partial_ratio <= 1.0,
            "head_partial_ratio " << head_partial_ratio << " must be in (0,1]");
}

bool ModelConfig::shared_head() const {
  if (head == "shared") return true;
  if (head == "decoupled") return false;
  return backbone == "hgnetv2";
}

namespace {

int rep(int base, double depth) {
  return std::max(1, static_cast<int>(std::lround(base * depth)));
}

ConvSpec cba(int cin, int cout, int k, int s, int groups = 1) {
  return ConvSpec{cin, cout, k, s, k / 2, groups, false};
}

}  // namespace

ModelGraph build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const ScaleSpec sc = scale_spec(cfg.scale);
  const int S = cfg.input_size;

  ModelGraph g;
  g.cfg_ = cfg;
  auto& nodes = g.nodes_;

  auto add_input = [&](FeatShape s) {
    ModelGraph::Node n;
    n.kind = ModelGraph::NodeKind::Input;
    n.name = "input";
    n.out = s;
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  };
  auto add_block = [&](std::string name, std::unique_ptr<Block> block, int input) {
    ModelGraph::Node n;
    n.kind = ModelGraph::NodeKind::Block;
    n.name = std::move(name);
    n.inputs = {input};
    try {
      n.out = block->out_shape(nodes[static_cast<std::size_t>(input)].out);
    } catch (const Error& e) {
      throw Error("edge " + nodes[static_cast<std::size_t>(input)].name + " -> " + n.name +
                  ": " + e.what());
    }
    n.block = std::move(block);
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  };
  auto add_upsample = [&](std::string name, int input) {
    ModelGraph::Node n;
    n.kind = ModelGraph::NodeKind::Upsample;
    n.name = std::move(name);
    n.inputs = {input};
    const FeatShape in = nodes[static_cast<std::size_t>(input)].out;
    n.out = {in.c, in.h * 2, in.w * 2};
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  };
  auto add_concat = [&](std::string name, std::vector<int> inputs) {
    ModelGraph::Node n;
    n.kind = ModelGraph::NodeKind::Concat;
    n.name = std::move(name);
    const FeatShape first = nodes[static_cast<std::size_t>(inputs[0])].out;
    FeatShape out{0, first.h, first.w};
    for (int i : inputs) {
      const auto& src = nodes[static_cast<std::size_t>(i)];
      HGO_CHECK(src.out.h == first.h && src.out.w == first.w,
                "edge " << src.name << " -> " << n.name << ": spatial mismatch " << src.out.h
                        << "x" << src.out.w << " vs " << first.h << "x" << first.w);
      out.c += src.out.c;
    }
    n.inputs = std::move(inputs);
    n.out = out;
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  };

  const int in = add_input({3, S, S});

  int p3 = -1, p4 = -1, p5 = -1;
  int c3 = 0, c4 = 0, c5 = 0;

  if (cfg.backbone == "c2f-baseline") {
    std::vector<int> ch;
    for (int base : {64, 128, 256, 512, 1024})
      ch.push_back(make_divisible(std::min(base, sc.max_channels) * sc.width));
    int x = add_block("bb.conv0", std::make_unique<ConvBNAct>("bb.conv0", cba(3, ch[0], 3, 2)),
                      in);
    x = add_block("bb.conv1", std::make_unique<ConvBNAct>("bb.conv1", cba(ch[0], ch[1], 3, 2)),
                  x);
    x = add_block("bb.c2f2",
                  std::make_unique<C2f>("bb.c2f2", ch[1], ch[1], rep(3, sc.depth), true), x);
    x = add_block("bb.conv3", std::make_unique<ConvBNAct>("bb.conv3", cba(ch[1], ch[2], 3, 2)),
                  x);
    p3 = add_block("bb.c2f4",
                   std::make_unique<C2f>("bb.c2f4", ch[2], ch[2], rep(6, sc.depth), true), x);
    x = add_block("bb.conv5", std::make_unique<ConvBNAct>("bb.conv5", cba(ch[2], ch[3], 3, 2)),
                  p3);
    p4 = add_block("bb.c2f6",
                   std::make_unique<C2f>("bb.c2f6", ch[3], ch[3], rep(6, sc.depth), true), x);
    x = add_block("bb.conv7", std::make_unique<ConvBNAct>("bb.conv7", cba(ch[3], ch[4], 3, 2)),
                  p4);
    x = add_block("bb.c2f8",
                  std::make_unique<C2f>("bb.c2f8", ch[4], ch[4], rep(3, sc.depth), true), x);
    p5 = add_block("bb.sppf", std::make_unique<SPPF>("bb.sppf", ch[4]), x);
    c3 = ch[2];
    c4 = ch[3];
    c5 = ch[4];
  } else {
    const int hmax = hgo_max_channels(cfg.scale);
    auto div = [&](int base, int cap) {
      return make_divisible(std::min(base, cap) * sc.width);
    };
    std::vector<int> ch;  // stem out + stage outs 1..3
    for (int base : {64, 128, 256, 512}) ch.push_back(div(base, hmax));
    const int c4out = div(2048, hmax);
    const int neck5 = div(1024, sc.max_channels);
    std::vector<int> cm;
    for (int base : {32, 64, 128, 512}) cm.push_back(div(base, hmax));
    const int stem_cm = div(32, hmax);
    const int reps_base[4] = {1, 1, 9, 3};
    const int outs[4] = {ch[1], ch[2], ch[3], c4out};

    int x = add_block("bb.stem", std::make_unique<HGStem>("bb.stem", 3, stem_cm, ch[0]), in);
    int chain = ch[0];
    for (int st = 0; st < 4; ++st) {
      if (st > 0) {
        const std::string dn = "bb.down" + std::to_string(st);
        x = add_block(dn,
                      std::make_unique<ConvBNAct>(dn, cba(chain, chain, 3, 2, chain), Act::None),
                      x);
      }
      const int n_blocks = rep(reps_base[st], sc.depth);
      for (int r = 0; r < n_blocks; ++r) {
        const int bin = r == 0 ? chain : outs[st];
        HGBlockSpec spec{bin,
                         cm[static_cast<std::size_t>(st)],
                         outs[st],
                         6,
                         3,
                         cfg.ghost_stages[static_cast<std::size_t>(st)],
                         bin == outs[st]};
        const std::string bn =
            "bb.stage" + std::to_string(st + 1) + ".b" + std::to_string(r);
        x = add_block(bn, std::make_unique<HGBlock>(bn, spec), x);
      }
      chain = outs[st];
      if (st == 1) p3 = x;
      if (st == 2) p4 = x;
    }
    x = add_block("bb.sppf", std::make_unique<SPPF>("bb.sppf", c4out), x);
    p5 = add_block("bb.proj5", std::make_unique<ConvBNAct>("bb.proj5", cba(c4out, neck5, 1, 1)),
                   x);
    c3 = ch[2];
    c4 = ch[3];
    c5 = neck5;
  }

  // v8-style PAN-FPN over (p3, p4, p5)
  const int nreps = rep(3, sc.depth);
  const int u1 = add_upsample("neck.up1", p5);
  const int cat1 = add_concat("neck.cat1", {u1, p4});
  const int td1 = add_block(
      "neck.td1", std::make_unique<C2f>("neck.td1", c4 + c5, c4, nreps, false), cat1);
  const int u2 = add_upsample("neck.up2", td1);
  const int cat2 = add_concat("neck.cat2", {u2, p3});
  const int td2 = add_block(
      "neck.td2", std::make_unique<C2f>("neck.td2", c3 + c4, c3, nreps, false), cat2);
  const int d1 = add_block("neck.down1",
                           std::make_unique<ConvBNAct>("neck.down1", cba(c3, c3, 3, 2)), td2);
  const int cat3 = add_concat("neck.cat3", {d1, td1});
  const int bu1 = add_block(
      "neck.bu1", std::make_unique<C2f>("neck.bu1", c3 + c4, c4, nreps, false), cat3);
  const int d2 = add_block("neck.down2",
                           std::make_unique<ConvBNAct>("neck.down2", cba(c4, c4, 3, 2)), bu1);
  const int cat4 = add_concat("neck.cat4", {d2, p5});
  const int bu2 = add_block(
      "neck.bu2", std::make_unique<C2f>("neck.bu2", c4 + c5, c5, nreps, false), cat4);
  g.feats_ = {td2, bu1, bu2};

  HeadConfig hc;
  hc.channels = {c3, c4, c5};
  hc.strides = {8, 16, 32};
  hc.nc = cfg.num_classes;
  hc.reg_max = cfg.reg_max;
  if (cfg.shared_head()) {
    SharedHeadOptions opt;
    opt.layer1 = cfg.head_layer1;
    opt.layer2 = cfg.head_layer2;
    opt.partial_ratio = cfg.head_partial_ratio;
    g.head_ = std::make_unique<SharedHead>(hc, opt);
  } else {
    g.head_ = std::make_unique<DecoupledHead>(hc);
  }

  for (auto& n : nodes)
    if (n.block) n.block->init(seed);
  g.head_->init(seed);
  return g;
}

std::vector<Tensor> ModelGraph::forward(const Tensor& image, bool training) {
  HGO_CHECK(image && image->rank() == 4, "input must be a rank-4 NCHW tensor");
  HGO_CHECK(image->c() == 3 && image->h() == cfg_.input_size && image->w() == cfg_.input_size,
            "input shape " << shape_str(image->shape) << " does not match configured (N,3,"
                           << cfg_.input_size << "," << cfg_.input_size
                           << "); no implicit resize");
  std::vector<Tensor> acts(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    auto& n = nodes_[i];
    switch (n.kind) {
      case NodeKind::Input:
        acts[i] = image;
        break;
      case NodeKind::Block:
        acts[i] = n.block->forward(acts[static_cast<std::size_t>(n.inputs[0])], training);
        break;
      case NodeKind::Upsample:
        acts[i] = ops::upsample_nearest2(acts[static_cast<std::size_t>(n.inputs[0])]);
        break;
      case NodeKind::Concat: {
        std::vector<Tensor> xs;
        for (int j : n.inputs) xs.push_back(acts[static_cast<std::size_t>(j)]);
        acts[i] = ops::concat_channels(xs);
        break;
      }
    }
  }
  std::vector<Tensor> feats;
  for (int f : feats_) feats.push_back(acts[static_cast<std::size_t>(f)]);
  return head_->forward(feats, training);
}

std::vector<NamedParam> ModelGraph::params() {
  std::vector<NamedParam> out;
  for (auto& n : nodes_)
    if (n.block) n.block->collect_params(out);
  head_->collect_params(out);
  return out;
}

std::vector<PrimOp> ModelGraph::prims() const {
  std::vector<PrimOp> prims;
  for (const auto& n : nodes_) {
    switch (n.kind) {
      case NodeKind::Input:
        break;
      case NodeKind::Block:
        n.block->describe(nodes_[static_cast<std::size_t>(n.inputs[0])].out, prims);
        break;
      case NodeKind::Upsample: {
        PrimOp p;
        p.kind = PrimOp::Kind::Upsample;
        p.name = n.name;
        p.in = nodes_[static_cast<std::size_t>(n.inputs[0])].out;
        p.out = n.out;
        prims.push_back(p);
        break;
      }
      case NodeKind::Concat: {
        PrimOp p;
        p.kind = PrimOp::Kind::Concat;
        p.name = n.name;
        p.in = nodes_[static_cast<std::size_t>(n.inputs[0])].out;
        p.out = n.out;
        prims.push_back(p);
        break;
      }
    }
  }
  head_->describe(scale_shapes(), prims);
  return prims;
}

CostReport ModelGraph::cost() const { return cost_of_prims(prims()); }

std::vector<FeatShape> ModelGraph::scale_shapes() const {
  std::vector<FeatShape> out;
  for (int f : feats_) out.push_back(nodes_[static_cast<std::size_t>(f)].out);
  return out;
}

std::vector<ModelGraph::LayerRow> ModelGraph::layers() const {
  std::vector<LayerRow> rows;
  for (const auto& n : nodes_) {
    const char* kind = "";
    switch (n.kind) {
      case NodeKind::Input:
        kind = "input";
        break;
      case NodeKind::Block:
        kind = "block";
        break;
      case NodeKind::Upsample:
        kind = "upsample";
        break;
      case NodeKind::Concat:
        kind = "concat";
        break;
    }
    rows.push_back({n.name, kind, n.out});
  }
  return rows;
}

// -------------------------------------------------------------- serialization

namespace {

static_assert(std::endian::native == std::endian::little,
              "weight files are little-endian; big-endian hosts unsupported");

constexpr char kMagic[4] = {'H', 'G', 'O', 'W'};
constexpr std::uint16_t kVersion = 1;

void write_u16(std::ostream& f, std::uint16_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u32(std::ostream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

}  // namespace

void save_weights(ModelGraph& graph, const std::string& path, bool f16) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  HGO_CHECK(f, "cannot open '" << path << "' for writing");
  f.write(kMagic, 4);
  write_u16(f, kVersion);
  for (const auto& p : graph.params()) {
    write_u32(f, static_cast<std::uint32_t>(p.name.size()));
    f.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const std::uint8_t dtype = f16 ? 1 : 0;
    f.put(static_cast<char>(dtype));
    f.put(static_cast<char>(p.tensor->rank()));
    for (int d : p.tensor->shape) write_u32(f, static_cast<std::uint32_t>(d));
    if (f16) {
      std::vector<std::uint16_t> buf(p.tensor->data.size());
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = float_to_half(p.tensor->data[i]);
      f.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * 2));
    } else {
      f.write(reinterpret_cast<const char*>(p.tensor->data.data()),
              static_cast<std::streamsize>(p.tensor->data.size() * 4));
    }
  }
  HGO_CHECK(f.good(), "write failed for '" << path << "'");
}

void load_weights(ModelGraph& graph, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  HGO_CHECK(f, "cannot open '" << path << "' for reading");
  char magic[4];
  f.read(magic, 4);
  HGO_CHECK(f.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0,
            "'" << path << "' is not a weights file (bad magic)");
  std::uint16_t version = 0;
  f.read(reinterpret_cast<char*>(&version), 2);
  HGO_CHECK(f.gcount() == 2 && version == kVersion,
            "unsupported weights version " << version << " in '" << path << "'");

  auto slots = graph.params();
  std::map<std::string, Tensor> by_name;
  for (auto& p : slots) {
    const bool fresh = by_name.emplace(p.name, p.tensor).second;
    HGO_CHECK(fresh, "duplicate slot name '" << p.name << "' in graph");
  }
  std::set<std::string> filled;

  while (true) {
    std::uint32_t name_len = 0;
    f.read(reinterpret_cast<char*>(&name_len), 4);
    if (f.gcount() == 0 && f.eof()) break;
    HGO_CHECK(f.gcount() == 4, "truncated entry header in '" << path << "'");
    HGO_CHECK(name_len > 0 && name_len < 4096, "implausible name length " << name_len);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    HGO_CHECK(static_cast<std::uint32_t>(f.gcount()) == name_len, "truncated name");
    const int dtype = f.get();
    const int rank = f.get();
    HGO_CHECK(dtype == 0 || dtype == 1, "unknown dtype code " << dtype << " for '" << name
                                                              << "'");
    HGO_CHECK(rank >= 0 && rank <= 8, "implausible rank " << rank << " for '" << name << "'");
    Shape shape(static_cast<std::size_t>(rank));
    std::int64_t numel = 1;
    for (auto& d : shape) {
      std::uint32_t v = 0;
      f.read(reinterpret_cast<char*>(&v), 4);
      HGO_CHECK(f.gcount() == 4, "truncated dims for '" << name << "'");
      d = static_cast<int>(v);
      numel *= d;
    }
    auto it = by_name.find(name);
    HGO_CHECK(it != by_name.end(), "slot '" << name << "' not present in the graph");
    HGO_CHECK(it->second->shape == shape, "shape mismatch for '"
                                              << name << "': file " << shape_str(shape)
                                              << " vs graph " << shape_str(it->second->shape));
    if (dtype == 0) {
      f.read(reinterpret_cast<char*>(it->second->data.data()),
             static_cast<std::streamsize>(numel * 4));
      HGO_CHECK(f.gcount() == numel * 4, "truncated data for '" << name << "'");
    } else {
      std::vector<std::uint16_t> buf(static_cast<std::size_t>(numel));
      f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(numel * 2));
      HGO_CHECK(f.gcount() == numel * 2, "truncated data for '" << name << "'");
      for (std::size_t i = 0; i < buf.size(); ++i) it->second->data[i] = half_to_float(buf[i]);
    }
    filled.insert(std::move(name));
  }
  for (const auto& [name, t] : by_name)
    HGO_CHECK(filled.count(name), "slot '" << name << "' missing from '" << path << "'");
}

}  // namespace hgo
