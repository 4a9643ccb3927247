#pragma once

#include <limits>
#include <ostream>
#include <string>

#include "ratecalc/errors.hpp"

namespace ratecalc {

// A nonnegative real, +infinity, or Undefined. Undefined stands for an
// infimum over an empty set; it is never converted to a number.
class ExtendedValue {
 public:
  enum class Tag { kFinite, kPosInfinity, kUndefined };

  static ExtendedValue finite(double v) {
    if (!(v >= 0.0) || v == std::numeric_limits<double>::infinity()) {
      throw DomainError("ExtendedValue::finite requires a finite value >= 0");
    }
    return ExtendedValue(Tag::kFinite, v);
  }
  static ExtendedValue infinity() { return ExtendedValue(Tag::kPosInfinity, 0.0); }
  static ExtendedValue undefined() { return ExtendedValue(Tag::kUndefined, 0.0); }

  Tag tag() const noexcept { return tag_; }
  bool is_finite() const noexcept { return tag_ == Tag::kFinite; }
  bool is_infinite() const noexcept { return tag_ == Tag::kPosInfinity; }
  bool is_undefined() const noexcept { return tag_ == Tag::kUndefined; }

  double value() const {
    if (tag_ != Tag::kFinite) {
      throw DomainError("value() requested from a non-finite ExtendedValue");
    }
    return value_;
  }

  // Undefined is absorbing.
  friend ExtendedValue min(const ExtendedValue& a, const ExtendedValue& b) {
    if (a.is_undefined() || b.is_undefined()) return undefined();
    if (a.is_infinite()) return b;
    if (b.is_infinite()) return a;
    return a.value_ <= b.value_ ? a : b;
  }

  // Ordering against Undefined is an error rather than a silent false.
  friend bool less(const ExtendedValue& a, const ExtendedValue& b) {
    if (a.is_undefined() || b.is_undefined()) {
      throw DomainError("comparison involving an Undefined value");
    }
    if (a.is_infinite()) return false;
    if (b.is_infinite()) return true;
    return a.value_ < b.value_;
  }

  friend bool operator==(const ExtendedValue& a, const ExtendedValue& b) {
    if (a.tag_ != b.tag_) return false;
    return a.tag_ != Tag::kFinite || a.value_ == b.value_;
  }

  std::string to_string() const;

 private:
  ExtendedValue(Tag tag, double v) : tag_(tag), value_(v) {}

  Tag tag_;
  double value_;
};

inline std::ostream& operator<<(std::ostream& os, const ExtendedValue& v) {
  switch (v.tag()) {
    case ExtendedValue::Tag::kFinite:
      return os << v.value();
    case ExtendedValue::Tag::kPosInfinity:
      return os << "inf";
    case ExtendedValue::Tag::kUndefined:
      return os << "undefined";
  }
  return os;
}

inline std::string ExtendedValue::to_string() const {
  switch (tag_) {
    case Tag::kPosInfinity:
      return "inf";
    case Tag::kUndefined:
      return "undefined";
    default:
      return std::to_string(value_);
  }
}

}  // namespace ratecalc
