#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dim {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;  // worst error / counterexample summary
    double seconds = 0.0;
};

// The full oracle suite: scan-vs-kernel, ZOH closed form, gradient checks,
// DDPM identities, roundtrips, count checks, determinism. Each entry is
// independent; a thrown exception fails the entry with the message as
// detail.
std::vector<CheckResult> run_all_checks();

std::vector<std::string> check_names();

// One entry of the suite by name; unknown names throw.
CheckResult run_single_check(const std::string& name);

// Pretty table plus a soft warning when the suite overruns its five-minute
// budget; returns the number of failed checks.
int print_check_report(std::ostream& os, const std::vector<CheckResult>& results);

}  // namespace dim
