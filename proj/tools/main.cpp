#include "tf2/io.hpp"

int main(int argc, char** argv) { return tf2::cli_main(argc, argv); }
