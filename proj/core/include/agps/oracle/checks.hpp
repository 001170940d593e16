#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace agps::oracle {

struct CheckRow {
    std::string name;    // feature being recovered
    std::string method;  // "tree+formula" when a full tree exists, else "formula"
    double err = 0.0;    // worst absolute error (axis features up to sign)
    double tol = 1e-6;
    bool pass = false;
};

// Recovers the six hand-crafted geometric features on exactly constructed
// parts: rotation, cone apex, cylinder axis, sphere center, sphere radius,
// plane normal. Where the formula is expressible as an operation tree the
// tree output is checked against the direct formula too; rowsum and sqrt are
// not grammar operators, so the apex and sphere rows use the direct formula
// against constructed ground truth.
std::vector<CheckRow> run_oracle_checks(std::uint64_t seed);

}  // namespace agps::oracle
