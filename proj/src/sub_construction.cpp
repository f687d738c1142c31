#include <algorithm>

#include "udc/conquer.hpp"

namespace udc {

bool supports_two_sided(ProblemKind kind) {
  return kind == ProblemKind::kTsp || kind == ProblemKind::kOp || kind == ProblemKind::kPctsp;
}

int default_inference_beta(ProblemKind kind) { return supports_two_sided(kind) ? 2 : 1; }

SubConstruction::SubConstruction(const SubProblem& sp, bool reversed)
    : sp_(&sp), reversed_(reversed), m_(sp.size()) {
  if (reversed && !supports_two_sided(sp.kind)) {
    throw Error("unsupported", to_string(sp.kind) + " sub-problems are not reversible");
  }
  visited_.assign(m_, 0);
  if (is_routing(sp.kind)) {
    if (sp.path_len < 2) throw Error("invalid_argument", "window path needs two endpoints");
    start_ = reversed ? sp.path_len - 1 : 0;
    end_ = reversed ? 0 : sp.path_len - 1;
    interior_total_ = sp.path_len - 2;
    cur_ = start_;
    visited_[start_] = 1;
    seq_.push_back(start_);
    if (sp.kind == ProblemKind::kCvrp) {
      load_ = sp.load_before + sp.demand[start_];
      flags_.push_back(0);
    }
    return;
  }
  if (sp.kind == ProblemKind::kMis) blocked_.assign(m_, 0);
  bool any = false;
  for (int a = 0; a < m_ && !any; ++a) any = allowed(a);
  done_ = !any;
}

int SubConstruction::num_actions() const { return sp_->kind == ProblemKind::kCvrp ? 2 * m_ : m_; }

double SubConstruction::d(int a, int b) const { return distance(sp_->coords[a], sp_->coords[b]); }

bool SubConstruction::interior_left() const { return interior_seen_ < interior_total_; }

bool SubConstruction::allowed(int a) const {
  if (done_ || a < 0 || a >= num_actions()) return false;
  const SubProblem& sp = *sp_;
  switch (sp.kind) {
    case ProblemKind::kTsp:
      if (visited_[a]) return false;
      return a == end_ ? !interior_left() : true;
    case ProblemKind::kCvrp: {
      const int j = a % m_;
      const bool via = a >= m_;
      if (visited_[j]) return false;
      double need = sp.demand[j];
      if (j == end_) {
        if (interior_left()) return false;
        need += sp.load_after;
      }
      return (via ? 0.0 : load_) + need <= sp.capacity + kSubTol;
    }
    case ProblemKind::kOp: {
      if (visited_[a]) return false;
      const bool depot_pending = sp.depot_local >= 0 && !visited_[sp.depot_local];
      if (a == end_) return !depot_pending && length_ + d(cur_, a) <= sp.budget + kSubTol;
      const double tail = depot_pending && a != sp.depot_local
                              ? d(a, sp.depot_local) + d(sp.depot_local, end_)
                              : d(a, end_);
      return length_ + d(cur_, a) + tail <= sp.budget + kSubTol;
    }
    case ProblemKind::kPctsp: {
      if (visited_[a]) return false;
      if (a != end_) return true;
      const bool depot_pending = sp.depot_local >= 0 && !visited_[sp.depot_local];
      return !depot_pending && collected_ >= sp.required_prize - kSubTol;
    }
    case ProblemKind::kKp:
      return !visited_[a] && load_ + sp.weight[a] <= sp.capacity + kSubTol;
    case ProblemKind::kMis:
      return !visited_[a] && !blocked_[a] && !sp.forbidden[a];
  }
  return false;
}

std::vector<std::uint8_t> SubConstruction::mask() const {
  std::vector<std::uint8_t> out(num_actions(), 0);
  for (int a = 0; a < num_actions(); ++a) out[a] = allowed(a) ? 1 : 0;
  return out;
}

void SubConstruction::apply(int a) {
  if (!allowed(a)) throw Error("illegal_action", "sub-action " + std::to_string(a) + " is masked");
  const SubProblem& sp = *sp_;
  switch (sp.kind) {
    case ProblemKind::kTsp:
      length_ += d(cur_, a);
      visited_[a] = 1;
      seq_.push_back(a);
      cur_ = a;
      if (a == end_) {
        done_ = true;
      } else {
        ++interior_seen_;
      }
      return;
    case ProblemKind::kCvrp: {
      const int j = a % m_;
      if (a >= m_) {
        flags_.back() = 1;
        load_ = 0;
        length_ += d(cur_, sp.depot_index()) + d(sp.depot_index(), j);
      } else {
        length_ += d(cur_, j);
      }
      load_ += sp.demand[j];
      visited_[j] = 1;
      seq_.push_back(j);
      flags_.push_back(0);
      cur_ = j;
      if (j == end_) {
        flags_.back() = sp.last_flag;
        done_ = true;
      } else {
        ++interior_seen_;
      }
      return;
    }
    case ProblemKind::kOp:
    case ProblemKind::kPctsp:
      length_ += d(cur_, a);
      visited_[a] = 1;
      seq_.push_back(a);
      cur_ = a;
      if (a == end_) {
        done_ = true;
      } else {
        collected_ += sp.prize[a];
      }
      return;
    case ProblemKind::kKp:
    case ProblemKind::kMis: {
      visited_[a] = 1;
      seq_.push_back(a);
      cur_ = a;
      if (sp.kind == ProblemKind::kKp) {
        load_ += sp.weight[a];
        collected_ += sp.value[a];
      } else {
        for (int u : sp.adj[a]) blocked_[u] = 1;
      }
      bool any = false;
      for (int b = 0; b < m_ && !any; ++b) any = allowed(b);
      done_ = !any;
      return;
    }
  }
}

SubSolution SubConstruction::finish() const {
  if (!done_) throw Error("incomplete", "sub-construction not finished");
  SubSolution out;
  out.seq = seq_;
  out.flags = flags_;
  if (reversed_) std::reverse(out.seq.begin(), out.seq.end());
  if (!is_routing(sp_->kind)) std::sort(out.seq.begin(), out.seq.end());
  out.cost = sub_cost(*sp_, out);
  return out;
}

nn::Matrix SubConstruction::node_features() const {
  const SubProblem& sp = *sp_;
  nn::Matrix f(m_, kConquerNodeFeatures);
  auto max_of = [](const std::vector<double>& v) {
    double mx = 0;
    for (double x : v) mx = std::max(mx, x);
    return mx > 0 ? mx : 1.0;
  };
  switch (sp.kind) {
    case ProblemKind::kTsp:
    case ProblemKind::kCvrp:
    case ProblemKind::kOp:
    case ProblemKind::kPctsp: {
      const double pmax = sp.prize.empty() ? 1.0 : max_of(sp.prize);
      const double qmax = sp.penalty.empty() ? 1.0 : max_of(sp.penalty);
      for (int i = 0; i < m_; ++i) {
        f(i, 0) = sp.coords[i].x;
        f(i, 1) = sp.coords[i].y;
        if (sp.kind == ProblemKind::kCvrp) {
          f(i, 2) = sp.demand[i] / sp.capacity;
        } else if (sp.kind == ProblemKind::kOp) {
          f(i, 2) = sp.prize[i] / pmax;
          f(i, 3) = i == sp.depot_local ? 1.0 : 0.0;
        } else if (sp.kind == ProblemKind::kPctsp) {
          f(i, 2) = sp.prize[i] / pmax;
          f(i, 3) = sp.penalty[i] / qmax;
        }
        f(i, 4) = i == start_ ? 1.0 : 0.0;
        f(i, 5) = i == end_ ? 1.0 : 0.0;
      }
      break;
    }
    case ProblemKind::kKp: {
      const double cap = sp.capacity > 0 ? sp.capacity : 1.0;
      double rmax = 0;
      for (int i = 0; i < m_; ++i) rmax = std::max(rmax, sp.value[i] / sp.weight[i]);
      for (int i = 0; i < m_; ++i) {
        f(i, 0) = sp.value[i];
        f(i, 1) = std::min(2.0, sp.weight[i] / cap);
        f(i, 2) = sp.value[i] / sp.weight[i] / rmax;
      }
      break;
    }
    case ProblemKind::kMis: {
      std::size_t dmax = 1;
      for (const auto& a : sp.adj) dmax = std::max(dmax, a.size());
      for (int i = 0; i < m_; ++i) {
        f(i, 0) = static_cast<double>(sp.adj[i].size()) / static_cast<double>(dmax);
        f(i, 1) = sp.forbidden[i];
      }
      break;
    }
  }
  return f;
}

std::vector<double> SubConstruction::context() const {
  const SubProblem& sp = *sp_;
  const double frac = static_cast<double>(seq_.size()) / m_;
  switch (sp.kind) {
    case ProblemKind::kTsp:
      return {frac, d(cur_, end_), 0, 0};
    case ProblemKind::kCvrp:
      return {(sp.capacity - load_) / sp.capacity, sp.residual_first, sp.residual_last, frac};
    case ProblemKind::kOp:
      return {sp.budget > 0 ? (sp.budget - length_) / sp.budget : 0.0, frac, 0, 0};
    case ProblemKind::kPctsp:
      return {sp.required_prize > 0 ? std::min(2.0, collected_ / sp.required_prize) : 1.0, frac, 0, 0};
    case ProblemKind::kKp:
      return {sp.capacity > 0 ? (sp.capacity - load_) / sp.capacity : 0.0, frac, 0, 0};
    case ProblemKind::kMis:
      return {frac, 0, 0, 0};
  }
  return {0, 0, 0, 0};
}

std::vector<double> SubConstruction::phi(int a) const {
  const SubProblem& sp = *sp_;
  if (!is_routing(sp.kind)) return {0, 0, 0};
  const int j = a % m_;
  if (sp.kind == ProblemKind::kCvrp && a >= m_) {
    return {d(cur_, sp.depot_index()) + d(sp.depot_index(), j), 1, 0};
  }
  const bool term = (sp.kind == ProblemKind::kOp || sp.kind == ProblemKind::kPctsp) && j == end_;
  return {d(cur_, j), 0, term ? 1.0 : 0.0};
}

}  // namespace udc
