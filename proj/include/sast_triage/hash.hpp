#pragma once

#include <string>
#include <string_view>

namespace sast_triage {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Incremental hasher over length-prefixed fields, so ("ab","c") and
/// ("a","bc") never collide.
class FieldHasher {
 public:
  FieldHasher& add(std::string_view field);
  FieldHasher& add(long long value);
  /// Shortest round-trip representation.
  FieldHasher& add(double value);
  [[nodiscard]] std::string hex() const;

 private:
  std::string buffer_;
};

}  // namespace sast_triage
