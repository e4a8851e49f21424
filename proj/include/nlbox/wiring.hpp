#pragma once

// Deterministic adaptive 2 -> 1 wirings of binary boxes.
//
// On external input x a party queries one box with a fixed input, then the
// other box with an input that may depend on the first output, and outputs
// a function of both outputs. `StrategyTensor` is the canonical form: for
// every (x, a1, a2) the triple (x1, x2, a) of box inputs and final output it
// induces. The wired box depends on a wiring only through its tensor.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nlbox/box.hpp"

namespace nlbox {

enum class QueryOrder : std::uint8_t { BoxOneFirst = 1, BoxTwoFirst = 2 };

struct InputProtocol {
  QueryOrder order = QueryOrder::BoxOneFirst;
  std::uint8_t first_input = 0;
  std::array<std::uint8_t, 2> second_input{};  // indexed by first output
  std::array<std::uint8_t, 4> final_output{};  // [2 * first_output + second_output]

  friend bool operator==(const InputProtocol&, const InputProtocol&) = default;
};

struct PartyWiring {
  std::array<InputProtocol, 2> per_input{};  // indexed by the external input

  friend bool operator==(const PartyWiring&, const PartyWiring&) = default;
};

struct WiredQuery {
  unsigned x1 = 0;
  unsigned x2 = 0;
  unsigned out = 0;
};

/// Packed 24-bit tensor. Row (x, a1, a2) = 4x + 2a1 + a2 stores the 3-bit
/// code 4*x1 + 2*x2 + a at bit offset 3*(7 - row), so rows of input 0 form
/// the high 12 bits.
class StrategyTensor {
 public:
  static constexpr std::size_t kRows = 8;
  static constexpr std::size_t kCoordinates = 64;  // row * 8 + code

  constexpr StrategyTensor() = default;

  static StrategyTensor from_key(std::uint32_t key) {
    StrategyTensor t(key);
    if (key >= (1u << 24) || !t.realizable())
      throw InvalidInput("tensor key " + std::to_string(key) + " is not a valid wiring");
    return t;
  }

  constexpr std::uint32_t key() const { return key_; }

  constexpr unsigned code(std::size_t row) const { return (key_ >> (3 * (7 - row))) & 7u; }

  constexpr WiredQuery at(unsigned x, unsigned a1, unsigned a2) const {
    const unsigned c = code(4 * x + 2 * a1 + a2);
    return {(c >> 2) & 1u, (c >> 1) & 1u, c & 1u};
  }

  /// Coordinate of the single 1 in row (x, a1, a2) of the 64-dimensional 0/1 form.
  constexpr std::size_t coordinate(unsigned x, unsigned a1, unsigned a2) const {
    const std::size_t row = 4 * x + 2 * a1 + a2;
    return row * 8 + code(row);
  }

  /// 12-bit block for external input x.
  constexpr std::uint32_t part(unsigned x) const { return (key_ >> (12 * (1 - x))) & 0xfffu; }

  /// Box 1 is queried first on x iff x1 is constant and x2 depends on a1 only;
  /// symmetrically for box 2. One of the two must hold for each x.
  constexpr bool realizable() const {
    for (unsigned x = 0; x < 2; ++x) {
      bool one_first = true, two_first = true;
      for (unsigned a1 = 0; a1 < 2; ++a1)
        for (unsigned a2 = 0; a2 < 2; ++a2) {
          const WiredQuery q = at(x, a1, a2);
          if (q.x1 != at(x, 0, 0).x1 || q.x2 != at(x, a1, 0).x2) one_first = false;
          if (q.x2 != at(x, 0, 0).x2 || q.x1 != at(x, 0, a2).x1) two_first = false;
        }
      if (!one_first && !two_first) return false;
    }
    return true;
  }

  friend constexpr bool operator==(StrategyTensor, StrategyTensor) = default;
  friend constexpr auto operator<=>(StrategyTensor l, StrategyTensor r) { return l.key_ <=> r.key_; }

 private:
  constexpr explicit StrategyTensor(std::uint32_t key) : key_(key) {}
  friend StrategyTensor to_tensor(const PartyWiring&);

  std::uint32_t key_ = 0;
};

inline void require_valid_wiring(const PartyWiring& w) {
  for (const InputProtocol& p : w.per_input) {
    const bool ok = (p.order == QueryOrder::BoxOneFirst || p.order == QueryOrder::BoxTwoFirst) &&
                    p.first_input < 2 &&
                    std::all_of(p.second_input.begin(), p.second_input.end(),
                                [](std::uint8_t v) { return v < 2; }) &&
                    std::all_of(p.final_output.begin(), p.final_output.end(),
                                [](std::uint8_t v) { return v < 2; });
    if (!ok) throw InvalidInput("wiring entries must be bits and orders 1 or 2");
  }
}

inline StrategyTensor to_tensor(const PartyWiring& w) {
  require_valid_wiring(w);
  std::uint32_t key = 0;
  for (unsigned x = 0; x < 2; ++x) {
    const InputProtocol& p = w.per_input[x];
    for (unsigned a1 = 0; a1 < 2; ++a1)
      for (unsigned a2 = 0; a2 < 2; ++a2) {
        unsigned x1, x2, out;
        if (p.order == QueryOrder::BoxOneFirst) {
          x1 = p.first_input;
          x2 = p.second_input[a1];
          out = p.final_output[2 * a1 + a2];
        } else {
          x2 = p.first_input;
          x1 = p.second_input[a2];
          out = p.final_output[2 * a2 + a1];
        }
        const std::size_t row = 4 * x + 2 * a1 + a2;
        key |= ((x1 << 2) | (x2 << 1) | out) << (3 * (7 - row));
      }
  }
  return StrategyTensor(key);
}

// ---------------------------------------------------------------------------
// Application.

/// W[P1 x P2](ab|xy) = sum over consistent (a1, a2, b1, b2) of
/// P1(a1 b1 | x1 y1) P2(a2 b2 | x2 y2).
inline BehaviorBox apply_wiring(StrategyTensor alice, StrategyTensor bob, const BehaviorBox& p1,
                                const BehaviorBox& p2) {
  std::vector<double> p(16, 0.0);
  for (unsigned x = 0; x < 2; ++x)
    for (unsigned y = 0; y < 2; ++y)
      for (unsigned a1 = 0; a1 < 2; ++a1)
        for (unsigned a2 = 0; a2 < 2; ++a2) {
          const WiredQuery qa = alice.at(x, a1, a2);
          for (unsigned b1 = 0; b1 < 2; ++b1)
            for (unsigned b2 = 0; b2 < 2; ++b2) {
              const WiredQuery qb = bob.at(y, b1, b2);
              p[kBinaryShape.index(x, y, qa.out, qb.out)] +=
                  p1(qa.x1, qb.x1, a1, b1) * p2(qa.x2, qb.x2, a2, b2);
            }
        }
  return BehaviorBox(kBinaryShape, std::move(p));
}

inline BehaviorBox apply_wiring(const PartyWiring& alice, const PartyWiring& bob,
                                const BehaviorBox& p1, const BehaviorBox& p2) {
  require_binary(p1);
  require_binary(p2);
  require_valid(p1);
  require_valid(p2);
  return apply_wiring(to_tensor(alice), to_tensor(bob), p1, p2);
}

// ---------------------------------------------------------------------------
// Named protocols.

enum class NamedWiring { Trivial1, Trivial2, FWW, BS };

inline NamedWiring parse_named_wiring(std::string_view name) {
  if (name == "TRIVIAL_1") return NamedWiring::Trivial1;
  if (name == "TRIVIAL_2") return NamedWiring::Trivial2;
  if (name == "FWW") return NamedWiring::FWW;
  if (name == "BS") return NamedWiring::BS;
  throw InvalidInput("unknown wiring name '" + std::string(name) + "'");
}

inline PartyWiring named_wiring(NamedWiring name) {
  PartyWiring w;
  for (std::uint8_t x = 0; x < 2; ++x) {
    InputProtocol& p = w.per_input[x];
    p.first_input = x;
    switch (name) {
      case NamedWiring::Trivial1:  // box 1 at x, box 2 fed 0, output a1
        p.order = QueryOrder::BoxOneFirst;
        p.second_input = {0, 0};
        p.final_output = {0, 0, 1, 1};
        break;
      case NamedWiring::Trivial2:  // box 2 at x, box 1 fed 0, output a2
        p.order = QueryOrder::BoxTwoFirst;
        p.second_input = {0, 0};
        p.final_output = {0, 0, 1, 1};
        break;
      case NamedWiring::FWW:  // both boxes at x, output a1 + a2
        p.order = QueryOrder::BoxOneFirst;
        p.second_input = {x, x};
        p.final_output = {0, 1, 1, 0};
        break;
      case NamedWiring::BS:  // box 1 at x, box 2 at x * a1, output a1 + a2
        p.order = QueryOrder::BoxOneFirst;
        p.second_input = {0, x};
        p.final_output = {0, 1, 1, 0};
        break;
    }
  }
  return w;
}

inline PartyWiring named_wiring(std::string_view name) {
  return named_wiring(parse_named_wiring(name));
}

// ---------------------------------------------------------------------------
// Text records.
//
// Party record: one group per external input, "order,first,second,output",
// groups joined by '/', e.g. FWW is "1,0,00,0110/1,1,11,0110". `second` lists
// second_input for first output 0 and 1; `output` lists final_output for
// (first, second) = 00, 01, 10, 11. Pair record: "A=<party>;B=<party>".

inline std::string serialize_wiring(const PartyWiring& w) {
  std::string out;
  for (unsigned x = 0; x < 2; ++x) {
    const InputProtocol& p = w.per_input[x];
    if (x) out += '/';
    out += std::to_string(static_cast<int>(p.order)) + ',' + std::to_string(p.first_input) + ',';
    for (auto v : p.second_input) out += static_cast<char>('0' + v);
    out += ',';
    for (auto v : p.final_output) out += static_cast<char>('0' + v);
  }
  return out;
}

inline PartyWiring parse_wiring(std::string_view text) {
  auto bad = [&]() { return InvalidInput("malformed wiring record '" + std::string(text) + "'"); };
  auto bit = [&](char c) -> std::uint8_t {
    if (c != '0' && c != '1') throw bad();
    return static_cast<std::uint8_t>(c - '0');
  };
  PartyWiring w;
  const std::size_t slash = text.find('/');
  if (slash == std::string_view::npos) throw bad();
  const std::array<std::string_view, 2> groups{text.substr(0, slash), text.substr(slash + 1)};
  for (unsigned x = 0; x < 2; ++x) {
    const std::string_view g = groups[x];
    // "o,f,ss,oooo" is exactly 11 characters.
    if (g.size() != 11 || g[1] != ',' || g[3] != ',' || g[6] != ',') throw bad();
    InputProtocol& p = w.per_input[x];
    if (g[0] == '1') {
      p.order = QueryOrder::BoxOneFirst;
    } else if (g[0] == '2') {
      p.order = QueryOrder::BoxTwoFirst;
    } else {
      throw bad();
    }
    p.first_input = bit(g[2]);
    p.second_input = {bit(g[4]), bit(g[5])};
    p.final_output = {bit(g[7]), bit(g[8]), bit(g[9]), bit(g[10])};
  }
  return w;
}

struct WiringPair {
  PartyWiring alice;
  PartyWiring bob;
};

inline std::string serialize_wiring_pair(const WiringPair& w) {
  return "A=" + serialize_wiring(w.alice) + ";B=" + serialize_wiring(w.bob);
}

inline WiringPair parse_wiring_pair(std::string_view text) {
  const std::size_t semi = text.find(';');
  if (text.substr(0, 2) != "A=" || semi == std::string_view::npos ||
      text.substr(semi + 1, 2) != "B=")
    throw InvalidInput("malformed wiring pair record '" + std::string(text) + "'");
  return {parse_wiring(text.substr(2, semi - 2)), parse_wiring(text.substr(semi + 3))};
}

// ---------------------------------------------------------------------------
// Enumeration.

/// Raw code c = ((order * 2 + first) * 4 + second_fn) * 16 + output_fn for
/// one external input, with bit 1 of second_fn / bit 3 of output_fn for the
/// first table entry.
inline InputProtocol decode_input_protocol(unsigned c) {
  InputProtocol p;
  p.order = ((c >> 7) & 1u) ? QueryOrder::BoxTwoFirst : QueryOrder::BoxOneFirst;
  p.first_input = (c >> 6) & 1u;
  p.second_input = {static_cast<std::uint8_t>((c >> 5) & 1u),
                    static_cast<std::uint8_t>((c >> 4) & 1u)};
  for (unsigned k = 0; k < 4; ++k) p.final_output[k] = (c >> (3 - k)) & 1u;
  return p;
}

inline constexpr std::size_t kRawProtocolsPerInput = 256;
inline constexpr std::size_t kRawPartyWirings = kRawProtocolsPerInput * kRawProtocolsPerInput;

inline PartyWiring raw_party_wiring(std::size_t code) {
  PartyWiring w;
  w.per_input[0] = decode_input_protocol(static_cast<unsigned>(code / kRawProtocolsPerInput));
  w.per_input[1] = decode_input_protocol(static_cast<unsigned>(code % kRawProtocolsPerInput));
  return w;
}

/// Deduplicated, sorted list of per-party tensors. Stable id = position.
/// Since a wiring's two external inputs are chosen independently, the list
/// is the product of the distinct 12-bit per-input parts and
/// id = part_index(part 0) * parts + part_index(part 1).
class WiringCatalog {
 public:
  WiringCatalog() {
    std::vector<std::uint32_t> keys;
    keys.reserve(kRawPartyWirings);
    for (std::size_t code = 0; code < kRawPartyWirings; ++code)
      keys.push_back(to_tensor(raw_party_wiring(code)).key());
    std::vector<std::uint32_t> sorted = keys;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    tensors_.reserve(sorted.size());
    for (std::uint32_t k : sorted) tensors_.push_back(StrategyTensor::from_key(k));

    representative_.assign(tensors_.size(), kRawPartyWirings);
    for (std::size_t code = 0; code < kRawPartyWirings; ++code) {
      const std::size_t id = *id_of(StrategyTensor::from_key(keys[code]));
      if (representative_[id] == kRawPartyWirings) representative_[id] = code;
    }

    for (const StrategyTensor& t : tensors_) parts_.push_back(t.part(0));
    parts_.erase(std::unique(parts_.begin(), parts_.end()), parts_.end());
    if (parts_.size() * parts_.size() != tensors_.size())
      throw std::logic_error("wiring tensors do not factor over external inputs");
  }

  static const WiringCatalog& instance() {
    static const WiringCatalog catalog;
    return catalog;
  }

  std::size_t raw_count() const { return kRawPartyWirings; }
  std::size_t size() const { return tensors_.size(); }
  const std::vector<StrategyTensor>& tensors() const { return tensors_; }
  StrategyTensor tensor(std::size_t id) const { return tensors_.at(id); }

  std::optional<std::size_t> id_of(StrategyTensor t) const {
    const auto it = std::lower_bound(tensors_.begin(), tensors_.end(), t);
    if (it == tensors_.end() || *it != t) return std::nullopt;
    return static_cast<std::size_t>(it - tensors_.begin());
  }

  /// First raw wiring (in raw enumeration order) with this tensor.
  PartyWiring representative(std::size_t id) const {
    return raw_party_wiring(representative_.at(id));
  }

  const std::vector<std::uint32_t>& parts() const { return parts_; }

  std::uint64_t pair_id(std::size_t alice_id, std::size_t bob_id) const {
    return static_cast<std::uint64_t>(alice_id) * tensors_.size() + bob_id;
  }
  std::pair<std::size_t, std::size_t> split_pair_id(std::uint64_t id) const {
    return {static_cast<std::size_t>(id / tensors_.size()),
            static_cast<std::size_t>(id % tensors_.size())};
  }

 private:
  std::vector<StrategyTensor> tensors_;
  std::vector<std::size_t> representative_;
  std::vector<std::uint32_t> parts_;
};

inline const std::vector<StrategyTensor>& enumerate_party_wirings() {
  return WiringCatalog::instance().tensors();
}

}  // namespace nlbox
