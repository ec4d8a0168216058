// Regenerates fixtures/: the seeded 16-hidden-unit MLP and its exact
// attributions at n=200.

#include <cstdio>

#include "naa/verify.hpp"

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "fixtures";
  const auto f = naa::verify::make_fixture(20240601);
  naa::verify::write_fixture(f, dir);
  std::printf("wrote %s: total %.17g, residual %.3e\n", dir.c_str(), f.total, f.residual);
  return 0;
}
