#include "slm/symbol.hpp"

#include <cstdio>
#include <mutex>
#include <stdexcept>

namespace slm {

SymbolTable& SymbolTable::global() {
  static SymbolTable table;
  return table;
}

Symbol SymbolTable::intern(std::string_view text) {
  {
    std::shared_lock lock(mutex_);
    auto it = index_.find(text);
    if (it != index_.end()) return it->second;
  }
  std::unique_lock lock(mutex_);
  auto it = index_.find(text);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<Symbol>(strings_.size());
  strings_.emplace_back(text);
  index_.emplace(std::string_view(strings_.back()), id);
  return id;
}

bool SymbolTable::find(std::string_view text, Symbol& out) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find(text);
  if (it == index_.end()) return false;
  out = it->second;
  return true;
}

const std::string& SymbolTable::str(Symbol id) const {
  std::shared_lock lock(mutex_);
  if (id >= strings_.size()) throw std::out_of_range("symbol id out of range");
  return strings_[id];
}

std::size_t SymbolTable::size() const {
  std::shared_lock lock(mutex_);
  return strings_.size();
}

namespace sym {
Symbol sentence_begin() { static const Symbol s = intern("<s>"); return s; }
Symbol sentence_end() { static const Symbol s = intern("</s>"); return s; }
Symbol unknown() { static const Symbol s = intern("<unk>"); return s; }
Symbol tag_begin() { static const Symbol s = intern("SB"); return s; }
Symbol tag_end() { static const Symbol s = intern("SE"); return s; }
Symbol top() { static const Symbol s = intern("TOP"); return s; }
Symbol top_prime() { static const Symbol s = intern("TOP'"); return s; }
}  // namespace sym

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace slm
