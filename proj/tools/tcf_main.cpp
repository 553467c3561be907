#include <vector>
#include <string>

#include "tcf/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return tcf::cli_run(args);
}
