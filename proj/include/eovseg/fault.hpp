#pragma once

#include <optional>
#include <string_view>

namespace eovseg {

// Deliberate faults used to prove the verification harness detects broken
// kernels. Never active outside `verify --sabotage`.
enum class Fault { none, softmax };

void inject_fault(Fault fault);
Fault active_fault();
std::optional<Fault> parse_fault(std::string_view name);

class FaultScope {
public:
    explicit FaultScope(Fault fault) : saved_(active_fault()) { inject_fault(fault); }
    ~FaultScope() { inject_fault(saved_); }
    FaultScope(const FaultScope&) = delete;
    FaultScope& operator=(const FaultScope&) = delete;

private:
    Fault saved_;
};

}  // namespace eovseg
