// Writes a synthetic corpus (thumbnails plus ground-truth masks) for trying the
// CLI and the review service without the real dataset:
//
//   phantom_demo corpus/ 20
//   tissueseg bench corpus/ --out report/
//   tissueseg serve corpus/ --port 8080
#include <cstdlib>
#include <iostream>
#include <string>

#include "tissueseg/phantom.hpp"
#include "tissueseg/raster_io.hpp"

int main(int argc, char** argv) {
  if (argc < 2 || argc > 5) {
    std::cerr << "usage: phantom_demo OUT_DIR [COUNT=10] [SIZE=512] [SEED=1]\n";
    return 2;
  }
  const std::filesystem::path out = argv[1];
  const int count = argc > 2 ? std::atoi(argv[2]) : 10;
  const int size = argc > 3 ? std::atoi(argv[3]) : 512;
  const std::uint64_t seed = argc > 4 ? std::strtoull(argv[4], nullptr, 10) : 1;
  if (count < 1 || size < 64) {
    std::cerr << "COUNT must be >= 1 and SIZE >= 64\n";
    return 2;
  }
  try {
    std::filesystem::create_directories(out);
    for (int i = 0; i < count; ++i) {
      const auto spec = tissueseg::phantom::random_spec(seed + i, size, /*with_specks=*/true, /*noise=*/4);
      const auto ph = tissueseg::phantom::render(spec);
      char id[32];
      std::snprintf(id, sizeof id, "phantom%03d", i);
      tissueseg::write_png(out / (std::string(id) + ".png"), ph.image);
      tissueseg::write_mask(out / (std::string(id) + "_mask.png"), ph.tissue);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cout << "wrote " << count << " phantoms to " << out.string() << '\n';
  return 0;
}
