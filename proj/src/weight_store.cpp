#include "eovseg/weight_store.hpp"

#include <fstream>
#include <sstream>

#include "eovseg/error.hpp"
#include "eovseg/tensor_io.hpp"

namespace eovseg {

void WeightStore::put(const std::string& name, Tensor t) {
    if (name.empty() || name.find_first_of("\t\n/ ") != std::string::npos)
        throw FormatError("invalid tensor name '" + name + "'");
    tensors_[name] = std::move(t);
}

const Tensor& WeightStore::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw FormatError("missing tensor '" + name + "' in weight bundle");
    return it->second;
}

void WeightStore::save(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw FormatError(dir.string() + ": cannot create directory: " + ec.message());
    std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
    if (!manifest) throw FormatError((dir / "manifest.txt").string() + ": cannot open for writing");
    for (const auto& [name, t] : tensors_) {
        const std::string file = name + ".eovt";
        write_tensor(dir / file, t);
        manifest << name << '\t' << shape_str(t.shape()) << '\t' << file << '\n';
    }
    if (!manifest) throw FormatError((dir / "manifest.txt").string() + ": write failed");
}

bool WeightStore::exists(const std::filesystem::path& dir) {
    return std::filesystem::is_regular_file(dir / "manifest.txt");
}

WeightStore WeightStore::load(const std::filesystem::path& dir) {
    std::ifstream manifest(dir / "manifest.txt");
    if (!manifest) throw FormatError((dir / "manifest.txt").string() + ": cannot open manifest");
    WeightStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(manifest, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string name, shape, file;
        if (!std::getline(fields, name, '\t') || !std::getline(fields, shape, '\t') || !std::getline(fields, file))
            throw FormatError((dir / "manifest.txt").string() + ":" + std::to_string(lineno) + ": malformed entry");
        Tensor t = read_tensor(dir / file);
        if (shape_str(t.shape()) != shape)
            throw FormatError((dir / file).string() + ": shape " + shape_str(t.shape()) +
                              " disagrees with manifest " + shape);
        store.put(name, std::move(t));
    }
    return store;
}

std::uint64_t WeightStore::count(const std::string& prefix) const {
    std::uint64_t n = 0;
    for (const auto& [name, t] : tensors_)
        if (name.compare(0, prefix.size(), prefix) == 0) n += t.size();
    return n;
}

}  // namespace eovseg
