#pragma once

namespace semfill::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3 };

int run(int argc, char** argv);

}  // namespace semfill::cli
