#include "eovseg/fault.hpp"

#include <atomic>

namespace eovseg {

namespace {
std::atomic<Fault> g_fault{Fault::none};
}

void inject_fault(Fault fault) { g_fault.store(fault); }
Fault active_fault() { return g_fault.load(); }

std::optional<Fault> parse_fault(std::string_view name) {
    if (name == "none") return Fault::none;
    if (name == "softmax") return Fault::softmax;
    return std::nullopt;
}

}  // namespace eovseg
