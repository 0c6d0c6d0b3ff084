// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MMIE_TAGS_HPP
#define MMIE_TAGS_HPP

#include <span>
#include <string>
#include <vector>

namespace mmie {

// BIO tag ids over T entity types: O = 0, B-t = 1 + 2t, I-t = 2 + 2t.
class BioScheme {
 public:
  explicit BioScheme(std::vector<std::string> type_names) : names_(std::move(type_names)) {}
  static BioScheme with_default_names(int num_types);

  int num_types() const { return static_cast<int>(names_.size()); }
  int num_tags() const { return 2 * num_types() + 1; }
  const std::vector<std::string>& type_names() const { return names_; }

  static constexpr int outside() { return 0; }
  static constexpr int begin(int type) { return 1 + 2 * type; }
  static constexpr int inside(int type) { return 2 + 2 * type; }
  static constexpr bool is_begin(int tag) { return tag > 0 && tag % 2 == 1; }
  static constexpr bool is_inside(int tag) { return tag > 0 && tag % 2 == 0; }
  static constexpr int type_of(int tag) { return (tag - 1) / 2; }

  // I-X may only follow B-X or I-X.
  static constexpr bool transition_allowed(int prev, int next) {
    if (!is_inside(next)) return true;
    return prev > 0 && type_of(prev) == type_of(next);
  }
  static constexpr bool start_allowed(int tag) { return !is_inside(tag); }

  bool valid_tag(int tag) const { return tag >= 0 && tag < num_tags(); }
  static bool is_valid_sequence(std::span<const int> tags);

  std::string tag_name(int tag) const;
  std::vector<std::string> tag_names() const;

 private:
  std::vector<std::string> names_;
};

inline BioScheme BioScheme::with_default_names(int num_types) {
  static const char* kNames[] = {"PER", "LOC", "ORG", "MISC"};
  std::vector<std::string> names;
  for (int t = 0; t < num_types; ++t)
    names.push_back(t < 4 ? kNames[t] : "TYPE" + std::to_string(t));
  return BioScheme(std::move(names));
}

inline bool BioScheme::is_valid_sequence(std::span<const int> tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] < 0) return false;
    if (i == 0 ? !start_allowed(tags[i]) : !transition_allowed(tags[i - 1], tags[i])) return false;
  }
  return true;
}

inline std::string BioScheme::tag_name(int tag) const {
  if (tag == 0) return "O";
  return std::string(is_begin(tag) ? "B-" : "I-") + names_.at(type_of(tag));
}

inline std::vector<std::string> BioScheme::tag_names() const {
  std::vector<std::string> out;
  for (int t = 0; t < num_tags(); ++t) out.push_back(tag_name(t));
  return out;
}

// Relation label names; id 0 is the designated "none" relation.
inline std::vector<std::string> relation_names(int num_relations) {
  std::vector<std::string> out{"none"};
  for (int r = 1; r < num_relations; ++r) out.push_back("rel_" + std::to_string(r));
  return out;
}

}  // namespace mmie

#endif  // MMIE_TAGS_HPP
