#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace pclkit {

/// Byte-level Aho-Corasick automaton reporting every (possibly overlapping)
/// occurrence of every pattern in one pass. Transitions are fully resolved
/// at build time, so scanning costs one table lookup per input byte.
class AhoCorasick {
 public:
  struct Hit {
    std::size_t pattern;  // index in insertion order
    std::size_t begin;
    std::size_t end;
  };

  AhoCorasick() = default;

  /// Empty patterns are ignored. Returns the pattern index.
  std::size_t add(std::string_view pattern);
  void build();

  std::size_t pattern_count() const { return lengths_.size(); }
  bool built() const { return built_; }

  /// Hits in the order their end offset is reached (ascending end).
  template <typename Fn>
  void scan(std::string_view text, Fn&& on_hit) const {
    if (!built_) return;
    std::int32_t state = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      state = delta_[static_cast<std::size_t>(state) * 256 +
                     static_cast<unsigned char>(text[i])];
      for (std::int32_t s = has_output_[state] ? state : dict_link_[state]; s > 0;
           s = dict_link_[s]) {
        for (std::size_t p : outputs_[s]) {
          on_hit(Hit{p, i + 1 - lengths_[p], i + 1});
        }
      }
    }
  }

  std::vector<Hit> find_all(std::string_view text) const;

 private:
  std::vector<std::int32_t> delta_;   // states x 256
  std::vector<std::int32_t> fail_;
  std::vector<std::int32_t> dict_link_;  // nearest proper suffix state with output, 0 if none
  std::vector<std::vector<std::size_t>> outputs_;
  std::vector<char> has_output_;
  std::vector<std::size_t> lengths_;
  bool built_ = false;

  std::int32_t new_state();
};

}  // namespace pclkit
