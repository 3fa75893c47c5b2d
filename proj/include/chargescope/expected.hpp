#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace chargescope {

/// Value-or-error carrier used by the wire decoders, which must never throw
/// on hostile input. Stand-in for std::expected until the toolchain has it.
template <typename T, typename E>
class Expected {
 public:
  Expected(T value) : v_(std::in_place_index<0>, std::move(value)) {}  // NOLINT
  Expected(E error) : v_(std::in_place_index<1>, std::move(error)) {}  // NOLINT

  bool has_value() const { return v_.index() == 0; }
  explicit operator bool() const { return has_value(); }

  const T& value() const& {
    if (!has_value()) throw std::logic_error("Expected::value() on error");
    return std::get<0>(v_);
  }
  T& value() & {
    if (!has_value()) throw std::logic_error("Expected::value() on error");
    return std::get<0>(v_);
  }
  T&& value() && {
    if (!has_value()) throw std::logic_error("Expected::value() on error");
    return std::get<0>(std::move(v_));
  }
  const E& error() const {
    if (has_value()) throw std::logic_error("Expected::error() on value");
    return std::get<1>(v_);
  }

  const T* operator->() const { return &value(); }
  const T& operator*() const& { return value(); }

 private:
  std::variant<T, E> v_;
};

}  // namespace chargescope
