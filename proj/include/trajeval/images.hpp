#pragma once

#include <optional>
#include <string>

#include "trajeval/chat.hpp"

namespace trajeval {

/// Loads screenshots for transmission, downscaling so the longest side is at most
/// `max_dimension` pixels. Images already within bounds are sent byte-for-byte.
class ImageLoader {
 public:
  explicit ImageLoader(int max_dimension = 1280) : max_dimension_(max_dimension) {}

  /// nullopt when the reference does not resolve to a readable, decodable image.
  std::optional<ImagePart> load(const std::string& ref) const;

  int max_dimension() const { return max_dimension_; }

 private:
  int max_dimension_;
};

std::string media_type_for(const std::string& path);

}  // namespace trajeval
