#ifndef LPC_CLI_HPP
#define LPC_CLI_HPP

namespace lpc {

// Entry point of the command-line tool; returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace lpc

#endif  // LPC_CLI_HPP
