#include "coevo/commands.hpp"

int main(int argc, char** argv) { return coevo::run_cli(argc, argv); }
