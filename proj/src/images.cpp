#include "trajeval/images.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace trajeval {

std::string media_type_for(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "image/png";
}

std::optional<ImagePart> ImageLoader::load(const std::string& ref) const {
  std::ifstream in(ref, std::ios::binary);
  if (!in) return std::nullopt;
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty()) return std::nullopt;

  const std::vector<unsigned char> buf(bytes.begin(), bytes.end());
  cv::Mat img = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  if (img.empty()) return std::nullopt;

  ImagePart part{media_type_for(ref), std::move(bytes)};
  const int longest = std::max(img.cols, img.rows);
  if (max_dimension_ <= 0 || longest <= max_dimension_) return part;

  const double scale = static_cast<double>(max_dimension_) / longest;
  cv::Mat small;
  cv::resize(img, small, cv::Size(), scale, scale, cv::INTER_AREA);
  const bool jpeg = part.media_type == "image/jpeg";
  std::vector<unsigned char> out;
  if (!cv::imencode(jpeg ? ".jpg" : ".png", small, out)) return std::nullopt;
  part.media_type = jpeg ? "image/jpeg" : "image/png";
  part.bytes.assign(out.begin(), out.end());
  return part;
}

}  // namespace trajeval
