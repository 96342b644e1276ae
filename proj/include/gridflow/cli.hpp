#pragma once

namespace gridflow {

/// Entry point of the gridflow tool. Returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace gridflow
