#pragma once

#include <ostream>

namespace adakd {

/// Fast curated invariant sweep over the numeric core; prints one line per
/// check. Returns 0 when everything passes, 4 otherwise. Budgeted to finish
/// well under a minute.
int run_selfcheck(std::ostream& out);

}  // namespace adakd
