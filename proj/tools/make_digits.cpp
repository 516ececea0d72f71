// Generates a synthetic digit dataset in the IDX (MNIST-layout) format.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "snnlstm/digits.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic digit dataset generator (IDX format)"};
    std::string images = "train-images-idx3-ubyte";
    std::string labels = "train-labels-idx1-ubyte";
    std::size_t count = 60000;
    std::uint64_t seed = 1;
    app.add_option("--images", images, "output image file");
    app.add_option("--labels", labels, "output label file");
    app.add_option("--count", count, "number of images")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);
    try {
        snnlstm::write_digit_dataset(images, labels, count, seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    std::printf("wrote %zu images to %s / %s\n", count, images.c_str(), labels.c_str());
    return 0;
}
