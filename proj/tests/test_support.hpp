#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <cstdlib>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ttc/lm_backend.hpp"

namespace ttc::testing {

/// "w0 w1 ... w{n-1}" with the given prefix: exactly n whitespace tokens.
inline std::string words(std::size_t n, const std::string& prefix = "w") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += prefix + std::to_string(i);
  }
  return out;
}

/// Segments given as (token count, attempts_stop); segment k uses prefix "s{k}_".
inline MockScript make_script(const std::vector<std::pair<std::size_t, bool>>& segs, std::string answer) {
  MockScript s;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    s.segments.push_back(MockSegment{words(segs[k].first, "s" + std::to_string(k) + "_"), segs[k].second, {}});
  }
  s.answer_text = std::move(answer);
  return s;
}

inline MockBackend single_script_backend(MockScript script, MockConfig config = {}) {
  return MockBackend([script = std::move(script)](std::string_view, std::int64_t) { return script; },
                     std::move(config));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "ttc_test_XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(TTC_FIXTURE_DIR) / name;
}

}  // namespace ttc::testing
