#include "hgo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace hgo {

std::int64_t numel_of(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    HGO_CHECK(d >= 0, "negative extent " << d << " in shape " << shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

int make_divisible(double v, int divisor) {
  int m = static_cast<int>(std::ceil(v / divisor)) * divisor;
  return std::max(divisor, m);
}

namespace {

template <typename T>
void topo_visit(TensorT<T>* node, std::unordered_set<TensorT<T>*>& seen,
                std::vector<TensorT<T>*>& order) {
  // Iterative post-order DFS; model graphs go a few hundred nodes deep and
  // per-anchor loss graphs can chain further, so recursion is off the table.
  struct Frame {
    TensorT<T>* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack{{node, 0}};
  seen.insert(node);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorT<T>* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
}

}  // namespace

template <typename T>
void backward(const TensorPtr<T>& out) {
  HGO_CHECK(out != nullptr, "backward on null tensor");
  HGO_CHECK(out->numel() == 1, "backward requires a scalar output, got " << shape_str(out->shape));
  HGO_CHECK(out->requires_grad, "backward on untaped value (requires_grad is false)");

  std::unordered_set<TensorT<T>*> seen;
  std::vector<TensorT<T>*> order;
  topo_visit(out.get(), seen, order);

  for (TensorT<T>* node : order) node->ensure_grad();
  out->grad[0] = T(1);

  // order is post-order (children after parents-of-traversal), so reversed it
  // yields outputs before the nodes that produced their inputs
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn();
  }
}

template struct TensorT<float>;
template struct TensorT<double>;
template void backward<float>(const TensorPtr<float>&);
template void backward<double>(const TensorPtr<double>&);

}  // namespace hgo
