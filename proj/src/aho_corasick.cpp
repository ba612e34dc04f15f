#include "pclkit/aho_corasick.hpp"

#include <queue>
#include <stdexcept>

namespace pclkit {

std::int32_t AhoCorasick::new_state() {
  const auto id = static_cast<std::int32_t>(fail_.size());
  delta_.resize(delta_.size() + 256, -1);
  fail_.push_back(0);
  dict_link_.push_back(0);
  outputs_.emplace_back();
  has_output_.push_back(0);
  return id;
}

std::size_t AhoCorasick::add(std::string_view pattern) {
  if (built_) throw std::logic_error("AhoCorasick::add after build");
  if (fail_.empty()) new_state();
  const std::size_t index = lengths_.size();
  lengths_.push_back(pattern.size());
  if (pattern.empty()) return index;

  std::int32_t state = 0;
  for (unsigned char c : pattern) {
    auto slot = static_cast<std::size_t>(state) * 256 + c;
    if (delta_[slot] < 0) {
      const auto next = new_state();
      delta_[slot] = next;  // re-index: new_state may have reallocated delta_
    }
    state = delta_[slot];
  }
  outputs_[state].push_back(index);
  has_output_[state] = 1;
  return index;
}

void AhoCorasick::build() {
  if (fail_.empty()) new_state();
  std::queue<std::int32_t> queue;
  for (std::size_t c = 0; c < 256; ++c) {
    std::int32_t& next = delta_[c];
    if (next < 0) {
      next = 0;
    } else {
      fail_[next] = 0;
      dict_link_[next] = 0;
      queue.push(next);
    }
  }
  while (!queue.empty()) {
    const std::int32_t state = queue.front();
    queue.pop();
    for (std::size_t c = 0; c < 256; ++c) {
      const auto slot = static_cast<std::size_t>(state) * 256 + c;
      const std::int32_t fallback = delta_[static_cast<std::size_t>(fail_[state]) * 256 + c];
      if (delta_[slot] < 0) {
        delta_[slot] = fallback;
      } else {
        const std::int32_t child = delta_[slot];
        fail_[child] = fallback;
        dict_link_[child] = has_output_[fallback] ? fallback : dict_link_[fallback];
        queue.push(child);
      }
    }
  }
  built_ = true;
}

std::vector<AhoCorasick::Hit> AhoCorasick::find_all(std::string_view text) const {
  std::vector<Hit> hits;
  scan(text, [&](const Hit& h) { hits.push_back(h); });
  return hits;
}

}  // namespace pclkit
