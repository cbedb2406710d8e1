#ifndef CIDS_ERRORS_HPP
#define CIDS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cids {

// Bad user-facing input: malformed flags, out-of-range options. CLI exit code 1.
class UsageError : public std::runtime_error {
public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Bad data or config content: unparseable files, inconsistent shapes,
// fingerprint mismatches, degenerate inputs. CLI exit code 2.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cids

#endif
