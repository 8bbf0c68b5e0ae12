#ifndef RWDRE_TESTS_ACCEPTANCE_HPP_
#define RWDRE_TESTS_ACCEPTANCE_HPP_

#include <iosfwd>

namespace rwdre::acceptance {

// Runs the full acceptance suite, printing one PASS/FAIL line per criterion.
// Returns the number of failed criteria.
int run_all(std::ostream& os, int threads);

}  // namespace rwdre::acceptance

#endif  // RWDRE_TESTS_ACCEPTANCE_HPP_
