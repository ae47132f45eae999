#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <variant>

namespace vpi {

/// Interned string. Two symbols are equal iff their names are equal; the
/// comparison is an id compare.
class Symbol {
 public:
  explicit Symbol(std::string_view name);

  std::string_view name() const;
  std::uint32_t id() const { return id_; }

  bool operator==(const Symbol& other) const { return id_ == other.id_; }
  std::strong_ordering operator<=>(const Symbol& other) const {
    if (id_ == other.id_) return std::strong_ordering::equal;
    return name() <=> other.name();
  }

 private:
  std::uint32_t id_;
};

/// A chosen value: integer, boolean or symbol.
class Value {
 public:
  Value() : v_(std::int64_t{0}) {}
  Value(std::int64_t i) : v_(i) {}
  Value(int i) : v_(std::int64_t{i}) {}
  Value(bool b) : v_(b) {}
  Value(Symbol s) : v_(s) {}

  static Value symbol(std::string_view name) { return Value(Symbol(name)); }

  bool is_int() const { return std::holds_alternative<std::int64_t>(v_); }
  bool is_bool() const { return std::holds_alternative<bool>(v_); }
  bool is_symbol() const { return std::holds_alternative<Symbol>(v_); }

  // Throw std::bad_variant_access on a kind mismatch.
  std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
  bool as_bool() const { return std::get<bool>(v_); }
  Symbol as_symbol() const { return std::get<Symbol>(v_); }

  bool operator==(const Value& other) const { return v_ == other.v_; }
  /// Total order: by kind (int < bool < symbol), then by content.
  std::strong_ordering operator<=>(const Value& other) const;

  std::size_t hash() const;
  std::string to_string() const;

 private:
  std::variant<std::int64_t, bool, Symbol> v_;
};

}  // namespace vpi

template <>
struct std::hash<vpi::Value> {
  std::size_t operator()(const vpi::Value& v) const noexcept { return v.hash(); }
};
