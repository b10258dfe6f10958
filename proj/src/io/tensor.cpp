#include "seld/io.hpp"

#include "binary.hpp"

#include <functional>
#include <numeric>

namespace seld::io {

NdArray::NdArray(std::vector<std::uint32_t> d) : dims(std::move(d)), data(numel(), 0.0f) {}

std::size_t NdArray::numel() const {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           [](std::size_t a, std::uint32_t b) { return a * b; });
}

namespace {

std::size_t flat_index(const std::vector<std::uint32_t>& dims, std::initializer_list<std::size_t> index) {
    if (index.size() != dims.size()) {
        throw Error("index rank " + std::to_string(index.size()) + " does not match tensor rank " +
                    std::to_string(dims.size()));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= dims[axis]) {
            throw Error("index out of range on axis " + std::to_string(axis));
        }
        flat = flat * dims[axis] + i;
        ++axis;
    }
    return flat;
}

}  // namespace

float& NdArray::at(std::initializer_list<std::size_t> index) { return data[flat_index(dims, index)]; }
float NdArray::at(std::initializer_list<std::size_t> index) const { return data[flat_index(dims, index)]; }

std::string encode_tensor(const NdArray& tensor) {
    if (tensor.dims.size() > 255) {
        throw Error("tensor rank exceeds 255");
    }
    if (tensor.numel() != tensor.data.size()) {
        throw Error("payload size mismatch: dims give " + std::to_string(tensor.numel()) +
                    " elements, data has " + std::to_string(tensor.data.size()));
    }
    std::string out(kTensorMagic.begin(), kTensorMagic.end());
    detail::put<std::uint16_t>(out, kTensorVersion);
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.dims.size()));
    for (auto d : tensor.dims) {
        detail::put<std::uint32_t>(out, d);
    }
    out.reserve(out.size() + 4 * tensor.data.size());
    for (float v : tensor.data) {
        detail::put_f32(out, v);
    }
    return out;
}

NdArray decode_tensor(std::string_view bytes) {
    detail::ByteReader r(bytes);
    if (bytes.size() < 4 || r.take(4, "magic") != std::string_view(kTensorMagic.data(), 4)) {
        throw Error("bad magic: not an SSLD tensor");
    }
    auto version = r.read<std::uint16_t>("version");
    if (version != kTensorVersion) {
        throw Error("unsupported SSLD version " + std::to_string(version));
    }
    auto ndim = r.read<std::uint8_t>("rank");
    NdArray t;
    t.dims.resize(ndim);
    for (auto& d : t.dims) {
        d = r.read<std::uint32_t>("dims");
    }
    // Overflow-safe element count check against the remaining payload.
    std::size_t n = 1;
    for (auto d : t.dims) {
        if (d != 0 && n > r.remaining() / 4 / d + 1) {
            throw Error("payload size mismatch");
        }
        n *= d;
    }
    if (r.remaining() != 4 * n) {
        throw Error("payload size mismatch: expected " + std::to_string(4 * n) + " bytes, found " +
                    std::to_string(r.remaining()));
    }
    t.data.resize(n);
    for (auto& v : t.data) {
        v = r.read_f32("payload");
    }
    return t;
}

void write_tensor(const NdArray& tensor, const fs::path& path) { write_file(path, encode_tensor(tensor)); }

NdArray read_tensor(const fs::path& path) {
    try {
        return decode_tensor(read_file(path));
    } catch (const Error& err) {
        throw Error(path.string() + ": " + err.what());
    }
}

}  // namespace seld::io
