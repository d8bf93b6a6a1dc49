#pragma once

namespace semplan {

// Command-line surface: plan / simulate / benchmark / export. Returns the
// process exit code (0 success; 1 usage or input error; plan: 2 when no plan
// is found; simulate: 2 on replan exhaustion, 3 on mission violation).
int run_cli(int argc, const char* const* argv);

}  // namespace semplan
