#include "eovseg/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "eovseg/error.hpp"

namespace eovseg {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
    if (t.empty()) throw FormatError("cannot encode an empty tensor");
    std::vector<std::uint8_t> out{'E', 'O', 'V', 'T', kEovtVersion, static_cast<std::uint8_t>(t.rank())};
    out.reserve(6 + 4 * t.rank() + 4 * t.size());
    for (auto e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (float f : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& source) {
    if (bytes.size() < 6 || std::memcmp(bytes.data(), "EOVT", 4) != 0)
        throw FormatError(source + ": bad magic (not an EOVT tensor file)");
    if (bytes[4] != kEovtVersion)
        throw FormatError(source + ": unsupported EOVT version " + std::to_string(bytes[4]));
    const std::size_t rank = bytes[5];
    if (rank < 1 || rank > kMaxRank) throw FormatError(source + ": invalid rank " + std::to_string(rank));
    if (bytes.size() < 6 + 4 * rank) throw FormatError(source + ": truncated header");
    Shape shape(rank);
    std::size_t n = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        shape[i] = get_u32(bytes.data() + 6 + 4 * i);
        if (shape[i] == 0) throw FormatError(source + ": zero extent on axis " + std::to_string(i));
        n *= shape[i];
    }
    const std::size_t header = 6 + 4 * rank;
    if (bytes.size() != header + 4 * n)
        throw FormatError(source + ": payload size " + std::to_string(bytes.size() - header) + " does not match shape " +
                          shape_str(shape));
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<float>(get_u32(bytes.data() + header + 4 * i));
    return Tensor(std::move(shape), std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    const auto bytes = encode_tensor(t);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError(path.string() + ": cannot open for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw FormatError(path.string() + ": write failed");
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError(path.string() + ": cannot open for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_tensor(bytes, path.string());
}

}  // namespace eovseg
