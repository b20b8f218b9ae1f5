#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "eovseg/params.hpp"
#include "eovseg/tensor.hpp"

namespace eovseg {

// Named tensor bundle persisted as a directory:
//   manifest.txt   one line per tensor: "<name>\t<extents, 'x'-separated>\t<file>"
//   <name>.eovt    one EOVT file per tensor
class WeightStore {
public:
    void put(const std::string& name, Tensor t);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    std::size_t size() const { return tensors_.size(); }
    const std::map<std::string, Tensor>& tensors() const { return tensors_; }

    void save(const std::filesystem::path& dir) const;
    static WeightStore load(const std::filesystem::path& dir);
    static bool exists(const std::filesystem::path& dir);

    // Total element count of tensors whose name starts with `prefix`.
    std::uint64_t count(const std::string& prefix = "") const;

private:
    std::map<std::string, Tensor> tensors_;
};

// Fills every tensor of `w` from the store (shapes must match) / copies
// every tensor of `w` into the store.
template <class W>
void load_params(W& w, const WeightStore& store, const std::string& prefix) {
    visit_params(w, prefix, [&](const std::string& name, Tensor& t) {
        const Tensor& src = store.get(name);
        require_shape(src, t.shape(), "weight '" + name + "'");
        t = src;
    });
}

template <class W>
void store_params(const W& w, WeightStore& store, const std::string& prefix) {
    visit_params(w, prefix, [&](const std::string& name, const Tensor& t) { store.put(name, t); });
}

}  // namespace eovseg
