// Process-wide symbol interning. Words, POS tags, non-terminal labels and
// parser operations all live in one id space; contexts are positional so a
// word and a tag with the same spelling never collide in practice.

#ifndef SLM_SYMBOL_HPP
#define SLM_SYMBOL_HPP

#include <cstdint>
#include <deque>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

namespace slm {

using Symbol = std::uint32_t;

class SymbolTable {
public:
  static SymbolTable& global();

  Symbol intern(std::string_view text);
  // Returns false and leaves `out` untouched when the text was never interned.
  bool find(std::string_view text, Symbol& out) const;
  const std::string& str(Symbol id) const;
  std::size_t size() const;

private:
  SymbolTable() = default;

  mutable std::shared_mutex mutex_;
  std::deque<std::string> strings_;
  std::unordered_map<std::string_view, Symbol> index_;
};

inline Symbol intern(std::string_view text) { return SymbolTable::global().intern(text); }
inline const std::string& str(Symbol id) { return SymbolTable::global().str(id); }

// Distinguished symbols, interned on first use.
namespace sym {
Symbol sentence_begin();  // <s>
Symbol sentence_end();    // </s>
Symbol unknown();         // <unk>
Symbol tag_begin();       // SB
Symbol tag_end();         // SE
Symbol top();             // TOP
Symbol top_prime();       // TOP'
}  // namespace sym

// 64-bit FNV-1a, used for manifest and vocabulary hashes.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace slm

#endif
