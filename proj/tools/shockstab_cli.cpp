#include "shockstab/lab.hpp"

int main(int argc, char** argv) { return shockstab::cli(argc, argv); }
