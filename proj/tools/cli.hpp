#pragma once

namespace guesslab::cli {

/// Entry point of the guesslab command; returns the process exit code.
int run(int argc, char** argv);

}  // namespace guesslab::cli
