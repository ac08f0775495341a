// Copyright 2026 The stepsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Token vocabularies.
//
// Instruction tokens are laid out densely as
//
//   0-9                integer constants
//   10 ...             primitives, then attribute selectors
//   ...                SEP, ARGSEP, EOS
//   ref_base ...       state references N+0 .. N+(max_refs-1)
//
// State tokens (the serialized program state a guidance model reads) use a
// separate, fixed ID space: digits 0-9 followed by the structural markers
// in StateToken.

#ifndef STEPSYNTH_VOCABULARY_HPP_
#define STEPSYNTH_VOCABULARY_HPP_

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stepsynth/dsl.hpp"

namespace stepsynth {

using Token = std::uint16_t;
using TokenSeq = std::vector<Token>;

enum class TokenClass : std::uint8_t {
  kInt,
  kPrimitive,
  kAttribute,
  kSep,
  kArgSep,
  kEos,
  kRef,
  kInvalid,
};

/// Structural markers of the state serialization. Values are token IDs.
enum class StateToken : Token {
  kGrid = 10,
  kRowSep,
  kInt,
  kBool,
  kIntList,
  kBoolList,
  kBigNum,
  kNeg,
  kNumEnd,
  kTarget,
  kExampleSep,
};

inline constexpr Token st(StateToken t) { return static_cast<Token>(t); }
inline constexpr Token kStateVocabularySize = 21;

inline constexpr std::array<std::string_view, 11> kStateTokenNames = {
    "GRID",   "ROWSEP", "INT",    "BOOL",   "INTLIST", "BOOLLIST",
    "BIGNUM", "NEG",    "NUMEND", "TARGET", "EXSEP"};

class VocabularyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a reference does not fit in the reference-token budget.
class RefOverflow : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class Vocabulary {
 public:
  static constexpr Token kNumIntTokens = 10;
  static constexpr int kManifestVersion = 1;

  Vocabulary() : Vocabulary(standard_catalog(), kDefaultMaxRefs) {}

  Vocabulary(std::vector<PrimitiveId> primitives, int max_refs)
      : primitives_(std::move(primitives)), max_refs_(max_refs) {
    if (primitives_.empty()) throw VocabularyError("empty primitive catalog");
    if (max_refs_ < 1) throw VocabularyError("max_refs must be positive");
    primitive_token_.fill(kAbsent);
    for (std::size_t i = 0; i < primitives_.size(); ++i) {
      auto& slot = primitive_token_[static_cast<std::size_t>(primitives_[i])];
      if (slot != kAbsent) throw VocabularyError("duplicate primitive");
      slot = static_cast<Token>(kNumIntTokens + i);
    }
    attr_base_ = static_cast<Token>(kNumIntTokens + primitives_.size());
    sep_ = static_cast<Token>(attr_base_ + kAllAttributes.size());
    argsep_ = sep_ + 1;
    eos_ = sep_ + 2;
    ref_base_ = sep_ + 3;
  }

  static std::vector<PrimitiveId> standard_catalog() {
    return {kAllPrimitives.begin(), kAllPrimitives.end()};
  }

  const std::vector<PrimitiveId>& primitives() const { return primitives_; }
  bool has_primitive(PrimitiveId id) const {
    return primitive_token_[static_cast<std::size_t>(id)] != kAbsent;
  }
  int max_refs() const { return max_refs_; }
  Token ref_base() const { return ref_base_; }
  Token sep() const { return sep_; }
  Token argsep() const { return argsep_; }
  Token eos() const { return eos_; }
  std::size_t size() const { return static_cast<std::size_t>(ref_base_) + max_refs_; }

  Token int_token(int v) const {
    if (v < 0 || v >= kNumIntTokens) throw VocabularyError("constant out of range");
    return static_cast<Token>(v);
  }
  Token primitive_token(PrimitiveId id) const {
    const Token t = primitive_token_[static_cast<std::size_t>(id)];
    if (t == kAbsent)
      throw VocabularyError("primitive not in catalog: " +
                            std::string(signature(id).name));
    return t;
  }
  Token attribute_token(Attribute a) const {
    return static_cast<Token>(attr_base_ + static_cast<Token>(a));
  }
  Token ref_token(int index) const {
    if (index < 0 || index >= max_refs_)
      throw RefOverflow("reference N" + std::to_string(index) +
                        " exceeds the reference-token budget");
    return static_cast<Token>(ref_base_ + index);
  }

  TokenClass classify(Token t) const {
    if (t < kNumIntTokens) return TokenClass::kInt;
    if (t < attr_base_) return TokenClass::kPrimitive;
    if (t < sep_) return TokenClass::kAttribute;
    if (t == sep_) return TokenClass::kSep;
    if (t == argsep_) return TokenClass::kArgSep;
    if (t == eos_) return TokenClass::kEos;
    if (t < size()) return TokenClass::kRef;
    return TokenClass::kInvalid;
  }
  PrimitiveId primitive_of(Token t) const {
    return primitives_[static_cast<std::size_t>(t - kNumIntTokens)];
  }
  Attribute attribute_of(Token t) const {
    return static_cast<Attribute>(t - attr_base_);
  }
  int ref_of(Token t) const { return static_cast<int>(t - ref_base_); }

  std::string token_name(Token t) const {
    switch (classify(t)) {
      case TokenClass::kInt: return std::to_string(t);
      case TokenClass::kPrimitive: return std::string(signature(primitive_of(t)).name);
      case TokenClass::kAttribute: return "." + std::string(attribute_name(attribute_of(t)));
      case TokenClass::kSep: return "<SEP>";
      case TokenClass::kArgSep: return "<ARGSEP>";
      case TokenClass::kEos: return "<EOS>";
      case TokenClass::kRef: return "N+" + std::to_string(ref_of(t));
      case TokenClass::kInvalid: break;
    }
    return "<?" + std::to_string(t) + ">";
  }

  /// Versioned text manifest shared with out-of-process guidance models.
  std::string manifest() const {
    std::ostringstream os;
    os << "stepsynth-vocabulary " << kManifestVersion << "\n";
    os << "max_refs " << max_refs_ << "\n";
    os << "ref_base " << ref_base_ << "\n";
    os << "size " << size() << "\n";
    for (Token t = 0; t < kNumIntTokens; ++t) os << "token " << t << " int " << t << "\n";
    for (PrimitiveId id : primitives_)
      os << "token " << primitive_token(id) << " primitive " << signature(id).name
         << " " << int(signature(id).arity) << "\n";
    for (Attribute a : kAllAttributes)
      os << "token " << attribute_token(a) << " attribute " << attribute_name(a) << "\n";
    os << "token " << sep_ << " control SEP\n";
    os << "token " << argsep_ << " control ARGSEP\n";
    os << "token " << eos_ << " control EOS\n";
    for (int i = 0; i < max_refs_; ++i)
      os << "token " << ref_token(i) << " ref " << i << "\n";
    os << "state_size " << kStateVocabularySize << "\n";
    for (Token t = 0; t < kNumIntTokens; ++t) os << "state_token " << t << " digit " << t << "\n";
    for (std::size_t i = 0; i < kStateTokenNames.size(); ++i)
      os << "state_token " << kNumIntTokens + i << " marker " << kStateTokenNames[i] << "\n";
    return os.str();
  }

  /// Parses a manifest and rebuilds the vocabulary it describes. The
  /// result's manifest() reproduces the input byte for byte.
  static Vocabulary from_manifest(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string word;
    int version = 0;
    if (!(is >> word >> version) || word != "stepsynth-vocabulary")
      throw VocabularyError("not a vocabulary manifest");
    if (version != kManifestVersion)
      throw VocabularyError("unsupported manifest version " + std::to_string(version));
    int max_refs = -1;
    std::vector<PrimitiveId> prims;
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string key;
      ls >> key;
      if (key == "max_refs") {
        ls >> max_refs;
      } else if (key == "token") {
        int id = 0;
        std::string cls, name;
        ls >> id >> cls >> name;
        if (cls == "primitive") {
          auto p = primitive_from_name(name);
          if (!p) throw VocabularyError("unknown primitive in manifest: " + name);
          prims.push_back(*p);
        }
      }
    }
    if (max_refs < 1) throw VocabularyError("manifest lacks max_refs");
    Vocabulary v(std::move(prims), max_refs);
    if (v.manifest() != text)
      throw VocabularyError("manifest layout does not match this build");
    return v;
  }

  /// Lowercase hex SHA-256 of manifest().
  std::string manifest_hash() const { return sha256_hex(manifest()); }

  static std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(),
                   nullptr) != 1)
      throw VocabularyError("sha256 failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += kHex[md[i] >> 4];
      out += kHex[md[i] & 0xf];
    }
    return out;
  }

 private:
  static constexpr Token kAbsent = 0xffff;

  std::vector<PrimitiveId> primitives_;
  int max_refs_;
  std::array<Token, kNumPrimitives> primitive_token_{};
  Token attr_base_ = 0;
  Token sep_ = 0;
  Token argsep_ = 0;
  Token eos_ = 0;
  Token ref_base_ = 0;
};

}  // namespace stepsynth

#endif  // STEPSYNTH_VOCABULARY_HPP_
