#pragma once

#include <stdexcept>
#include <string>

namespace netsel {

// Fatal contract or input error. Everything the engine cannot recover from
// surfaces as one of these; the CLI maps it to a nonzero exit status.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(what);
}

}  // namespace netsel
