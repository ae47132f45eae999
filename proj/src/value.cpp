#include "vpi/value.hpp"

#include <deque>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>

namespace vpi {
namespace {

class SymbolTable {
 public:
  std::uint32_t intern(std::string_view name) {
    {
      std::shared_lock lock(mu_);
      if (auto it = ids_.find(name); it != ids_.end()) return it->second;
    }
    std::unique_lock lock(mu_);
    if (auto it = ids_.find(name); it != ids_.end()) return it->second;
    names_.emplace_back(name);
    auto id = static_cast<std::uint32_t>(names_.size() - 1);
    ids_.emplace(std::string_view(names_.back()), id);
    return id;
  }

  std::string_view name(std::uint32_t id) {
    std::shared_lock lock(mu_);
    return names_[id];
  }

 private:
  std::shared_mutex mu_;
  std::deque<std::string> names_;  // stable addresses
  std::unordered_map<std::string_view, std::uint32_t> ids_;
};

SymbolTable& table() {
  static SymbolTable t;
  return t;
}

}  // namespace

Symbol::Symbol(std::string_view name) : id_(table().intern(name)) {}

std::string_view Symbol::name() const { return table().name(id_); }

std::strong_ordering Value::operator<=>(const Value& other) const {
  if (v_.index() != other.v_.index()) return v_.index() <=> other.v_.index();
  switch (v_.index()) {
    case 0:
      return std::get<0>(v_) <=> std::get<0>(other.v_);
    case 1:
      return std::get<1>(v_) <=> std::get<1>(other.v_);
    default:
      return std::get<2>(v_) <=> std::get<2>(other.v_);
  }
}

std::size_t Value::hash() const {
  std::size_t h = 0;
  switch (v_.index()) {
    case 0:
      h = std::hash<std::int64_t>{}(std::get<0>(v_));
      break;
    case 1:
      h = std::hash<bool>{}(std::get<1>(v_));
      break;
    default:
      h = std::hash<std::uint32_t>{}(std::get<2>(v_).id());
      break;
  }
  return h ^ (v_.index() * 0x9e3779b97f4a7c15ULL);
}

std::string Value::to_string() const {
  switch (v_.index()) {
    case 0:
      return std::to_string(std::get<0>(v_));
    case 1:
      return std::get<1>(v_) ? "true" : "false";
    default:
      return std::string(std::get<2>(v_).name());
  }
}

}  // namespace vpi
