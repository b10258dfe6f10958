#include "seld/io.hpp"

#include <cmath>
#include <random>

namespace seld::io {

std::size_t expected_tokens(Modality m) {
    return m == Modality::ClapAudio ? kClapTokens : kOwlVitTokens;
}

void validate_fixture(const EmbeddingFixture& fixture) {
    const auto want = expected_tokens(fixture.modality);
    if (fixture.tokens != want) {
        throw Error("embedding fixture has " + std::to_string(fixture.tokens) + " tokens, expected " +
                    std::to_string(want));
    }
    if (fixture.dim == 0 || fixture.values.size() != fixture.tokens * fixture.dim) {
        throw Error("embedding fixture payload does not match tokens x dim");
    }
    for (float v : fixture.values) {
        if (!std::isfinite(v)) {
            throw Error("embedding fixture contains a non-finite value");
        }
    }
}

EmbeddingFixture make_fixture(Modality m, std::uint64_t seed, std::size_t dim) {
    EmbeddingFixture f;
    f.modality = m;
    f.tokens = expected_tokens(m);
    f.dim = dim != 0 ? dim : (m == Modality::ClapAudio ? kClapDim : kOwlVitDim);
    std::mt19937_64 rng(seed ^ (m == Modality::ClapAudio ? 0xC1A9ull : 0x0715ull));
    std::normal_distribution<double> normal(0.0, 1.0);
    f.values.resize(f.tokens * f.dim);
    for (auto& v : f.values) {
        v = static_cast<float>(normal(rng));
    }
    return f;
}

EmbeddingFixture read_fixture(const fs::path& path, Modality m) {
    auto t = read_tensor(path);
    if (t.dims.size() != 2) {
        throw Error(path.string() + ": embedding fixture must be a 2-D tensor");
    }
    EmbeddingFixture f;
    f.modality = m;
    f.tokens = t.dims[0];
    f.dim = t.dims[1];
    f.values = std::move(t.data);
    validate_fixture(f);
    return f;
}

void write_fixture(const EmbeddingFixture& fixture, const fs::path& path) {
    validate_fixture(fixture);
    NdArray t;
    t.dims = {static_cast<std::uint32_t>(fixture.tokens), static_cast<std::uint32_t>(fixture.dim)};
    t.data = fixture.values;
    write_tensor(t, path);
}

}  // namespace seld::io
