#pragma once

// Two-copy distillable non-locality
//
//   D(P1 x P2) = max over wiring pairs (w_A, w_B) of C(W[P1 x P2]),
//
// searched exhaustively over the deduplicated tensor catalog.
//
// For a CHSH placement s, S_s of a wired box is bilinear in the 0/1 forms of
// the two tensors: S_s = sum over active coordinates (r, c) of K_s[r][c].
// Both tensors split into one part per external input, so K_s contracts to
// G_s[x][y][alpha][beta] (part alpha of Alice on input x, part beta of Bob on
// input y) and
//
//   S_s(alpha0 alpha1, beta0 beta1) = sum_y ( G_s[0][y][alpha0][beta_y] + G_s[1][y][alpha1][beta_y] ).
//
// For a fixed Alice tensor, Bob's best response therefore decomposes per y,
// which makes an exact sweep over all ordered pairs cost one pass over
// Alice tensors.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nlbox/box.hpp"
#include "nlbox/box_io.hpp"
#include "nlbox/epr2.hpp"
#include "nlbox/wiring.hpp"

namespace nlbox {

using ChshKernel = std::array<double, StrategyTensor::kCoordinates * StrategyTensor::kCoordinates>;

/// K_s[r][c] for r = (x, a1, a2 | x1, x2, a) and c = (y, b1, b2 | y1, y2, b).
inline ChshKernel fast_eval_kernel(const BehaviorBox& p1, const BehaviorBox& p2,
                                   std::size_t placement) {
  require_binary(p1);
  require_binary(p2);
  if (placement >= 8) throw InvalidInput("CHSH placement must be in 0..7");
  ChshKernel k{};
  for (unsigned ra = 0; ra < 64; ++ra) {
    const unsigned x = ra >> 5, a1 = (ra >> 4) & 1u, a2 = (ra >> 3) & 1u;
    const unsigned x1 = (ra >> 2) & 1u, x2 = (ra >> 1) & 1u, a = ra & 1u;
    for (unsigned cb = 0; cb < 64; ++cb) {
      const unsigned y = cb >> 5, b1 = (cb >> 4) & 1u, b2 = (cb >> 3) & 1u;
      const unsigned y1 = (cb >> 2) & 1u, y2 = (cb >> 1) & 1u, b = cb & 1u;
      const double sign = chsh_sign(placement, x, y) * detail::parity_sign(a ^ b);
      k[ra * 64 + cb] = sign * p1(x1, y1, a1, b1) * p2(x2, y2, a2, b2);
    }
  }
  return k;
}

inline std::array<ChshKernel, 8> fast_eval_kernels(const BehaviorBox& p1, const BehaviorBox& p2) {
  std::array<ChshKernel, 8> out;
  for (std::size_t s = 0; s < 8; ++s) out[s] = fast_eval_kernel(p1, p2, s);
  return out;
}

inline double kernel_value(const ChshKernel& k, StrategyTensor alice, StrategyTensor bob) {
  double v = 0.0;
  for (unsigned ra = 0; ra < 8; ++ra) {
    const std::size_t r = alice.coordinate(ra >> 2, (ra >> 1) & 1u, ra & 1u);
    for (unsigned rb = 0; rb < 8; ++rb)
      v += k[r * 64 + bob.coordinate(rb >> 2, (rb >> 1) & 1u, rb & 1u)];
  }
  return v;
}

/// Cost of the wired box evaluated through the kernels.
inline double kernel_cost(const std::array<ChshKernel, 8>& kernels, StrategyTensor alice,
                          StrategyTensor bob) {
  double s = -INFINITY;
  for (const ChshKernel& k : kernels) s = std::max(s, kernel_value(k, alice, bob));
  return std::max(0.0, (s - 2.0) / 2.0);
}

// ---------------------------------------------------------------------------
// Search.

struct SearchOptions {
  unsigned workers = 1;
  double tie_tol = 1e-12;
  std::size_t max_ties = 64;
  std::ostream* progress = nullptr;  // one JSON line per completed block
  std::string checkpoint;            // resumable block log; empty = none
};

struct SearchResult {
  double d_value = 0.0;  // max(0, (s_value - 2) / 2)
  double s_value = 0.0;  // largest CHSH value over all wiring pairs
  // Pair ids (alice_id * catalog size + bob_id) within tie_tol of s_value,
  // ascending; each Alice tensor contributes its smallest-id best response.
  std::vector<std::uint64_t> argmax_ids;
  std::size_t tie_count = 0;  // ids qualifying before truncation to max_ties
  std::uint64_t evaluated_pairs = 0;
  std::size_t resumed_blocks = 0;
  std::chrono::duration<double> elapsed{0};
};

namespace detail {

struct TieEntry {
  std::uint64_t id;
  double s;
};

struct BlockResult {
  bool done = false;
  double best = -INFINITY;
  std::vector<TieEntry> ties;
};

inline void absorb(BlockResult& acc, std::uint64_t id, double s, double tol) {
  if (s > acc.best) {
    acc.best = s;
    std::erase_if(acc.ties, [&](const TieEntry& t) { return t.s < acc.best - tol; });
  }
  if (s >= acc.best - tol) acc.ties.push_back({id, s});
}

/// G tables: [placement][x][y][alpha][beta], flattened.
class PartTables {
 public:
  PartTables(const BehaviorBox& p1, const BehaviorBox& p2)
      : parts_(WiringCatalog::instance().parts()), n_(parts_.size()) {
    data_.assign(8 * 4 * n_ * n_, 0.0);
    std::vector<std::array<std::size_t, 4>> coords[2];
    for (unsigned x = 0; x < 2; ++x)
      for (std::uint32_t part : parts_) {
        std::array<std::size_t, 4> c{};
        for (unsigned i = 0; i < 4; ++i) {
          const unsigned code = (part >> (3 * (3 - i))) & 7u;
          c[i] = (4 * x + i) * 8 + code;
        }
        coords[x].push_back(c);
      }
    for (std::size_t s = 0; s < 8; ++s) {
      const ChshKernel k = fast_eval_kernel(p1, p2, s);
      for (unsigned x = 0; x < 2; ++x)
        for (unsigned y = 0; y < 2; ++y) {
          // Partial sums over Alice's four coordinates, then over Bob's.
          std::vector<double> half(n_ * 64, 0.0);
          for (std::size_t al = 0; al < n_; ++al)
            for (std::size_t r : coords[x][al])
              for (std::size_t c = 0; c < 64; ++c) half[al * 64 + c] += k[r * 64 + c];
          double* g = table(s, x, y);
          for (std::size_t al = 0; al < n_; ++al)
            for (std::size_t be = 0; be < n_; ++be) {
              double v = 0.0;
              for (std::size_t c : coords[y][be]) v += half[al * 64 + c];
              g[al * n_ + be] = v;
            }
        }
    }
  }

  std::size_t parts() const { return n_; }
  const double* row(std::size_t s, unsigned x, unsigned y, std::size_t alpha) const {
    return &data_[((s * 2 + x) * 2 + y) * n_ * n_ + alpha * n_];
  }

 private:
  double* table(std::size_t s, unsigned x, unsigned y) {
    return &data_[((s * 2 + x) * 2 + y) * n_ * n_];
  }

  const std::vector<std::uint32_t>& parts_;
  std::size_t n_;
  std::vector<double> data_;
};

/// Block = all Alice tensors whose input-0 part is `alpha0`.
inline BlockResult sweep_block(const PartTables& g, std::size_t alpha0, double tol) {
  const std::size_t n = g.parts();
  BlockResult out;
  for (std::size_t alpha1 = 0; alpha1 < n; ++alpha1) {
    double best = -INFINITY;
    std::size_t best_bob = 0;
    for (std::size_t s = 0; s < 8; ++s) {
      double total = 0.0;
      std::size_t beta[2] = {0, 0};
      for (unsigned y = 0; y < 2; ++y) {
        const double* r0 = g.row(s, 0, y, alpha0);
        const double* r1 = g.row(s, 1, y, alpha1);
        double m = -INFINITY;
        for (std::size_t be = 0; be < n; ++be) {
          const double v = r0[be] + r1[be];
          if (v > m) {
            m = v;
            beta[y] = be;
          }
        }
        total += m;
      }
      const std::size_t bob = beta[0] * n + beta[1];
      if (total > best + tol || (total >= best - tol && bob < best_bob)) {
        if (total > best) best = total;
        best_bob = bob;
      }
    }
    const std::size_t alice = alpha0 * n + alpha1;
    absorb(out, static_cast<std::uint64_t>(alice) * (n * n) + best_bob, best, tol);
  }
  out.done = true;
  return out;
}

inline std::string box_fingerprint(const BehaviorBox& p1, const BehaviorBox& p2) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const BehaviorBox* b : {&p1, &p2})
    for (double v : b->values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 1099511628211ULL;
      }
    }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string hex_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

// Checkpoint format: header line "nlbox-distill-checkpoint 1 <fingerprint>",
// then one line per finished block:
//   block <id> <best> <count> <pair id> <s> ...   (doubles in %a notation)
inline void load_checkpoint(const std::string& path, const std::string& fingerprint,
                            std::vector<BlockResult>& blocks) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  if (!std::getline(in, line)) return;
  if (line != "nlbox-distill-checkpoint 1 " + fingerprint)
    throw InvalidInput("checkpoint '" + path + "' belongs to a different box pair");
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag, best;
    std::size_t id = 0, count = 0;
    if (!(ls >> tag >> id >> best >> count) || tag != "block" || id >= blocks.size()) continue;
    BlockResult b;
    b.best = std::strtod(best.c_str(), nullptr);
    bool ok = true;
    for (std::size_t i = 0; i < count; ++i) {
      std::string s;
      TieEntry t{};
      if (!(ls >> t.id >> s)) {
        ok = false;
        break;
      }
      t.s = std::strtod(s.c_str(), nullptr);
      b.ties.push_back(t);
    }
    if (!ok) continue;  // torn final line
    b.done = true;
    blocks[id] = std::move(b);
  }
}

}  // namespace detail

inline SearchResult distillable_2copy(const BehaviorBox& p1, const BehaviorBox& p2,
                                      const SearchOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  require_binary(p1);
  require_binary(p2);
  require_valid(p1);
  require_valid(p2);
  const WiringCatalog& catalog = WiringCatalog::instance();
  const detail::PartTables tables(p1, p2);
  const std::size_t n_blocks = tables.parts();

  std::vector<detail::BlockResult> blocks(n_blocks);
  SearchResult result;
  const std::string fingerprint = detail::box_fingerprint(p1, p2);
  std::ofstream checkpoint;
  if (!opts.checkpoint.empty()) {
    detail::load_checkpoint(opts.checkpoint, fingerprint, blocks);
    for (const auto& b : blocks) result.resumed_blocks += b.done ? 1 : 0;
    const bool fresh = result.resumed_blocks == 0;
    checkpoint.open(opts.checkpoint, fresh ? std::ios::trunc : std::ios::app);
    if (!checkpoint) throw InvalidInput("cannot write checkpoint '" + opts.checkpoint + "'");
    if (fresh) checkpoint << "nlbox-distill-checkpoint 1 " << fingerprint << "\n" << std::flush;
  }

  std::mutex io;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      if (blocks[b].done) continue;
      detail::BlockResult r = detail::sweep_block(tables, b, opts.tie_tol);
      std::lock_guard<std::mutex> lock(io);
      if (checkpoint.is_open()) {
        checkpoint << "block " << b << ' ' << detail::hex_double(r.best) << ' ' << r.ties.size();
        for (const auto& t : r.ties) checkpoint << ' ' << t.id << ' ' << detail::hex_double(t.s);
        checkpoint << "\n" << std::flush;
      }
      if (opts.progress)
        *opts.progress << "{\"event\":\"block\",\"block\":" << b
                       << ",\"partial_max\":" << format_double(std::max(0.0, (r.best - 2.0) / 2.0))
                       << "}\n"
                       << std::flush;
      blocks[b] = std::move(r);
    }
  };
  const unsigned workers = std::max(1u, opts.workers);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Deterministic reduction in block order.
  double best = -INFINITY;
  for (const auto& b : blocks) best = std::max(best, b.best);
  for (const auto& b : blocks)
    for (const auto& t : b.ties)
      if (t.s >= best - opts.tie_tol) {
        ++result.tie_count;
        if (result.argmax_ids.size() < opts.max_ties) result.argmax_ids.push_back(t.id);
      }
  result.s_value = best;
  result.d_value = std::max(0.0, (best - 2.0) / 2.0);
  result.evaluated_pairs = static_cast<std::uint64_t>(catalog.size()) * catalog.size();
  result.elapsed = std::chrono::steady_clock::now() - start;
  return result;
}

/// Symmetric variant: searches both (p1, p2) and (p2, p1) and keeps the larger.
inline SearchResult distillable_2copy_symmetric(const BehaviorBox& p1, const BehaviorBox& p2,
                                                const SearchOptions& opts = {}) {
  SearchResult forward = distillable_2copy(p1, p2, opts);
  if (p1 == p2) return forward;
  SearchOptions second = opts;
  second.checkpoint.clear();
  SearchResult backward = distillable_2copy(p2, p1, second);
  return backward.s_value > forward.s_value + opts.tie_tol ? backward : forward;
}

inline WiringPair wiring_pair_from_id(std::uint64_t id) {
  const WiringCatalog& c = WiringCatalog::instance();
  const auto [a, b] = c.split_pair_id(id);
  return {c.representative(a), c.representative(b)};
}

// ---------------------------------------------------------------------------
// Region classification on the P(xi, gamma) section.

enum class Region { I, II, III, Ambiguous };

inline const char* to_string(Region r) {
  switch (r) {
    case Region::I: return "I";
    case Region::II: return "II";
    case Region::III: return "III";
    case Region::Ambiguous: return "AMBIGUOUS";
  }
  return "?";
}

struct RegionClassification {
  double xi = 0.0;
  double gamma = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double d2 = 0.0;
  Region label = Region::Ambiguous;
  double margin_distill = 0.0;  // d2 - c1
  double margin_cost = 0.0;     // c2 - c1
  std::uint64_t best_pair = 0;
  std::optional<CertifiedBounds> c2_certificate;
};

/// I: d2 > c1 + delta. II: d2 within delta of c1, c2 > c1 + delta.
/// III: c2 within delta of c1. Ambiguous: a margin below -delta (chain
/// violation), d2 distillable while c2 is not, or a margin in (delta, 2 delta].
inline Region label_region(double c1, double c2, double d2, double delta = kClassificationTol) {
  const double md = d2 - c1, mc = c2 - c1;
  if (md < -delta || mc < -delta) return Region::Ambiguous;
  if ((md > delta && md <= 2 * delta) || (mc > delta && mc <= 2 * delta)) return Region::Ambiguous;
  if (md > delta) return mc > delta ? Region::I : Region::Ambiguous;
  if (mc > delta) return Region::II;
  return Region::III;
}

struct ClassifyOptions {
  Epr2Options lp;
  SearchOptions search;
  double margin = kClassificationTol;
  bool certify_boundary = false;  // certify c2 when the label is close or ambiguous
};

inline RegionClassification classify_point(FamilyPoint pt, const ClassifyOptions& opts = {}) {
  const BehaviorBox box = family_box(pt);
  RegionClassification out;
  out.xi = pt.xi;
  out.gamma = pt.gamma;
  out.c1 = closed_form_cost(box);
  const Epr2Result two = epr2_cost_two_copies(box, box, opts.lp);
  out.c2 = two.cost;
  const SearchResult search = distillable_2copy(box, box, opts.search);
  out.d2 = search.d_value;
  out.best_pair = search.argmax_ids.empty() ? 0 : search.argmax_ids.front();
  out.margin_distill = out.d2 - out.c1;
  out.margin_cost = out.c2 - out.c1;
  out.label = label_region(out.c1, out.c2, out.d2, opts.margin);
  if (opts.certify_boundary &&
      (out.label == Region::Ambiguous || std::abs(out.margin_cost) < 100 * opts.margin))
    out.c2_certificate = certify(tensor_product(box, box), two, opts.lp.denominator_cap);
  return out;
}

}  // namespace nlbox
