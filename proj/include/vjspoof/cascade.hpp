#pragma once

// Boosted haar cascade model and its XML reader.
//
// Both XML layouts of the stump-based haar cascade are read into the same
// model: the stage/tree layout ("opencv-haar-classifier", per-stump feature,
// threshold, left_val/right_val, stage_threshold) and the stage/weak-classifier
// layout with a shared feature table ("opencv-cascade-classifier", BOOST/HAAR,
// as shipped in haarcascade_frontalface_default.xml). Tilted features,
// non-stump trees and non-haar feature types are rejected.

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vjspoof/error.hpp"

namespace vjspoof {

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  long long area() const noexcept { return static_cast<long long>(width) * height; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct WeightedRect {
  Rect rect;
  double weight = 0.0;
};

/// Two or three weighted rectangles in base-window coordinates.
struct HaarFeature {
  std::vector<WeightedRect> rects;
};

/// Depth-one tree: feature value < threshold selects left_value, else right_value.
struct WeakClassifier {
  HaarFeature feature;
  double threshold = 0.0;
  double left_value = 0.0;
  double right_value = 0.0;
};

struct CascadeStage {
  std::vector<WeakClassifier> classifiers;
  double stage_threshold = 0.0;
};

struct CascadeModel {
  int base_width = 0;
  int base_height = 0;
  std::vector<CascadeStage> stages;

  std::size_t classifier_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : stages) n += s.classifiers.size();
    return n;
  }
};

namespace detail {

using boost::property_tree::ptree;

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, const std::string& where) {
  T v{};
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error(Errc::schema_mismatch, where + ": bad number '" + std::string(tok) + "'");
  }
  return v;
}

template <typename T>
std::vector<T> parse_numbers(const std::string& text, const std::string& where) {
  std::vector<T> out;
  for (auto tok : split_ws(text)) out.push_back(parse_number<T>(tok, where));
  return out;
}

inline const ptree& required_child(const ptree& node, const std::string& key,
                                   const std::string& where) {
  auto it = node.find(key);
  if (it == node.not_found()) {
    throw Error(Errc::schema_mismatch, where + ": missing <" + key + ">");
  }
  return it->second;
}

template <typename T>
T required_value(const ptree& node, const std::string& key, const std::string& where) {
  const auto nums = parse_numbers<T>(required_child(node, key, where).data(), where + "/" + key);
  if (nums.size() != 1) {
    throw Error(Errc::schema_mismatch, where + "/" + key + ": expected a single value");
  }
  return nums.front();
}

/// Children named "_" (the list-item element of the format).
inline std::vector<const ptree*> items(const ptree& node) {
  std::vector<const ptree*> out;
  for (const auto& [key, child] : node) {
    if (key == "_") out.push_back(&child);
  }
  return out;
}

inline HaarFeature parse_feature(const ptree& node, const std::string& where) {
  if (auto t = node.find("tilted"); t != node.not_found()) {
    if (parse_numbers<int>(t->second.data(), where + "/tilted") != std::vector<int>{0}) {
      throw Error(Errc::unsupported_feature, where + ": tilted (45 degree) haar feature");
    }
  }
  HaarFeature f;
  for (const ptree* r : items(required_child(node, "rects", where))) {
    const auto toks = split_ws(r->data());
    if (toks.size() != 5) {
      throw Error(Errc::schema_mismatch, where + ": rectangle needs 'x y w h weight'");
    }
    WeightedRect wr;
    wr.rect = {parse_number<int>(toks[0], where), parse_number<int>(toks[1], where),
               parse_number<int>(toks[2], where), parse_number<int>(toks[3], where)};
    wr.weight = parse_number<double>(toks[4], where);
    f.rects.push_back(wr);
  }
  return f;
}

inline void validate_feature(const HaarFeature& f, int base_w, int base_h,
                             const std::string& where) {
  if (f.rects.size() < 2 || f.rects.size() > 3) {
    throw Error(Errc::schema_mismatch,
                where + ": feature has " + std::to_string(f.rects.size()) + " rectangles");
  }
  double balance = 0.0;
  double magnitude = 0.0;
  for (const auto& wr : f.rects) {
    const Rect& r = wr.rect;
    if (r.x < 0 || r.y < 0 || r.width <= 0 || r.height <= 0 || r.x + r.width > base_w ||
        r.y + r.height > base_h) {
      throw Error(Errc::schema_mismatch, where + ": rectangle outside the base window");
    }
    balance += wr.weight * static_cast<double>(r.area());
    magnitude += std::abs(wr.weight * static_cast<double>(r.area()));
  }
  if (std::abs(balance) > 1e-6 * magnitude) {
    throw Error(Errc::schema_mismatch, where + ": rectangle weights do not balance");
  }
}

inline CascadeModel parse_stage_tree_layout(const ptree& root) {
  CascadeModel m;
  const auto size = parse_numbers<int>(required_child(root, "size", "cascade").data(), "size");
  if (size.size() != 2) throw Error(Errc::schema_mismatch, "cascade/size: expected 'w h'");
  m.base_width = size[0];
  m.base_height = size[1];
  int si = 0;
  for (const ptree* st : items(required_child(root, "stages", "cascade"))) {
    const std::string sw = "stage " + std::to_string(si++);
    CascadeStage stage;
    stage.stage_threshold = required_value<double>(*st, "stage_threshold", sw);
    int ti = 0;
    for (const ptree* tree : items(required_child(*st, "trees", sw))) {
      const std::string tw = sw + " tree " + std::to_string(ti++);
      const auto nodes = items(*tree);
      if (nodes.size() != 1) {
        throw Error(Errc::schema_mismatch, tw + ": only single-stump trees are supported");
      }
      const ptree& node = *nodes.front();
      if (node.find("left_node") != node.not_found() || node.find("right_node") != node.not_found()) {
        throw Error(Errc::schema_mismatch, tw + ": only single-stump trees are supported");
      }
      WeakClassifier wc;
      wc.feature = parse_feature(required_child(node, "feature", tw), tw);
      wc.threshold = required_value<double>(node, "threshold", tw);
      wc.left_value = required_value<double>(node, "left_val", tw);
      wc.right_value = required_value<double>(node, "right_val", tw);
      validate_feature(wc.feature, m.base_width, m.base_height, tw);
      stage.classifiers.push_back(std::move(wc));
    }
    if (stage.classifiers.empty()) throw Error(Errc::schema_mismatch, sw + ": no classifiers");
    m.stages.push_back(std::move(stage));
  }
  return m;
}

inline CascadeModel parse_weak_classifier_layout(const ptree& root) {
  if (auto t = root.find("stageType"); t != root.not_found() && t->second.data() != "BOOST") {
    throw Error(Errc::schema_mismatch, "stageType " + t->second.data());
  }
  if (auto t = root.find("featureType"); t != root.not_found() && t->second.data() != "HAAR") {
    throw Error(Errc::unsupported_feature, "featureType " + t->second.data());
  }
  CascadeModel m;
  m.base_width = required_value<int>(root, "width", "cascade");
  m.base_height = required_value<int>(root, "height", "cascade");

  std::vector<HaarFeature> features;
  int fi = 0;
  for (const ptree* f : items(required_child(root, "features", "cascade"))) {
    const std::string fw = "feature " + std::to_string(fi++);
    features.push_back(parse_feature(*f, fw));
    validate_feature(features.back(), m.base_width, m.base_height, fw);
  }

  const auto stage_nodes = items(required_child(root, "stages", "cascade"));
  if (auto n = root.find("stageNum"); n != root.not_found()) {
    const auto declared = parse_numbers<int>(n->second.data(), "stageNum");
    if (declared.size() != 1 || declared[0] != static_cast<int>(stage_nodes.size())) {
      throw Error(Errc::schema_mismatch, "stageNum does not match the number of stages");
    }
  }
  int si = 0;
  for (const ptree* st : stage_nodes) {
    const std::string sw = "stage " + std::to_string(si++);
    CascadeStage stage;
    stage.stage_threshold = required_value<double>(*st, "stageThreshold", sw);
    const auto weak = items(required_child(*st, "weakClassifiers", sw));
    if (auto n = st->find("maxWeakCount"); n != st->not_found()) {
      const auto declared = parse_numbers<int>(n->second.data(), sw + "/maxWeakCount");
      if (declared.size() != 1 || declared[0] != static_cast<int>(weak.size())) {
        throw Error(Errc::schema_mismatch, sw + ": maxWeakCount does not match classifiers");
      }
    }
    int wi = 0;
    for (const ptree* w : weak) {
      const std::string ww = sw + " classifier " + std::to_string(wi++);
      const auto inner = split_ws(required_child(*w, "internalNodes", ww).data());
      const auto leaves = parse_numbers<double>(required_child(*w, "leafValues", ww).data(), ww);
      if (inner.size() != 4 || leaves.size() != 2) {
        throw Error(Errc::schema_mismatch, ww + ": only single-stump trees are supported");
      }
      const int idx = parse_number<int>(inner[2], ww);
      if (idx < 0 || idx >= static_cast<int>(features.size())) {
        throw Error(Errc::schema_mismatch, ww + ": feature index out of range");
      }
      WeakClassifier wc;
      wc.feature = features[static_cast<std::size_t>(idx)];
      wc.threshold = parse_number<double>(inner[3], ww);
      wc.left_value = leaves[0];
      wc.right_value = leaves[1];
      stage.classifiers.push_back(std::move(wc));
    }
    if (stage.classifiers.empty()) throw Error(Errc::schema_mismatch, sw + ": no classifiers");
    m.stages.push_back(std::move(stage));
  }
  return m;
}

}  // namespace detail

/// Parses cascade XML text into a model.
inline CascadeModel parse_cascade(std::string_view source) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  try {
    std::istringstream in{std::string(source)};
    pt::read_xml(in, doc, pt::xml_parser::no_comments | pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw Error(Errc::malformed_xml, e.what());
  }
  auto storage = doc.find("opencv_storage");
  if (storage == doc.not_found()) {
    throw Error(Errc::schema_mismatch, "missing <opencv_storage> root");
  }
  const pt::ptree* root = nullptr;
  std::string type_id;
  for (const auto& [key, child] : storage->second) {
    if (key == "<xmlattr>") continue;
    root = &child;
    type_id = child.get("<xmlattr>.type_id", key == "cascade" ? "opencv-cascade-classifier" : "");
    break;
  }
  if (root == nullptr) throw Error(Errc::schema_mismatch, "empty <opencv_storage>");

  CascadeModel m;
  if (type_id == "opencv-haar-classifier") {
    m = detail::parse_stage_tree_layout(*root);
  } else if (type_id == "opencv-cascade-classifier") {
    m = detail::parse_weak_classifier_layout(*root);
  } else {
    throw Error(Errc::schema_mismatch, "unknown cascade type '" + type_id + "'");
  }
  if (m.base_width < 1 || m.base_height < 1) {
    throw Error(Errc::schema_mismatch, "invalid base window size");
  }
  if (m.stages.empty()) throw Error(Errc::schema_mismatch, "cascade has no stages");
  return m;
}

inline CascadeModel load_cascade(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw Error(Errc::file_not_found, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_cascade(ss.str());
}

}  // namespace vjspoof
