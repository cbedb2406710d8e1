#ifndef CIDS_HARNESS_HPP
#define CIDS_HARNESS_HPP

#include <cstdint>

namespace cids {

// Named deterministic sub-stream of a base seed: stage tags keep env noise,
// behavior actions and net inits decoupled so reruns stay byte-identical.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

// The cids command-line tool. Returns the process exit code:
// 0 ok, 1 usage errors, 2 data errors.
int run_cli(int argc, char** argv);

}  // namespace cids

#endif
